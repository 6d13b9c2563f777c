#pragma once

// Run configuration files.
//
// Format: `[section]` headers followed by `key = value` lines; `#` starts a
// comment line. Sections and keys:
//
//   [data]    path, format (mnist-idx | cifar10-binary), subset, subset_seed,
//             evaluate_test, pad_flip
//   [model]   features, conv1_filters, conv2_filters
//   [optim]   lr, momentum, weight_decay, schedule (cosine | multi-step),
//             milestones (comma separated), decay_factor
//   [policy]  gamma, sigma, actor_lr, critic_lr, hidden1, hidden2,
//             lambda_schedule (linear | cosine | step)
//   [train]   epochs, batch_size, mode, fixed_m, random_per_epoch, seed
//   [output]  dir
//
// Unknown sections or keys, duplicates and malformed values are ConfigErrors.
// Relative paths resolve against the directory holding the file.

#include "adaaug/controller.hpp"

#include <filesystem>
#include <iosfwd>
#include <string>

namespace adaaug::cli {

train::TrainConfig parse_config(std::istream& in, const std::filesystem::path& base_dir = {});
train::TrainConfig load_config(const std::filesystem::path& path);

/// Fully resolved config in the same format; parsing it back yields an equal config.
std::string serialize_config(const train::TrainConfig& config);

/// Manifest = header comments (tool version, build) + serialize_config.
std::string manifest_text(const train::TrainConfig& config);

inline constexpr const char* kVersion = "0.1.0";

}  // namespace adaaug::cli
