#pragma once

// Command implementations behind the `adaaug` executable.

#include "adaaug/controller.hpp"

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace adaaug::cli {

/// Fixed metrics column order.
inline constexpr const char* kMetricsHeader =
    "epoch,lambda,mean_magnitude,mean_L_none,mean_L_ada,mean_L_full,mean_reward,actor_loss,critic_loss,train_acc,"
    "test_acc,lr,wall_seconds";

std::string metrics_row(const train::EpochState& state);
std::string loss_ordering_row(const train::LossOrdering& entry);

/// Exclusive lock on a directory, held through an O_EXCL lock file.
class RunLock {
 public:
  explicit RunLock(const std::filesystem::path& dir);
  ~RunLock();
  RunLock(const RunLock&) = delete;
  RunLock& operator=(const RunLock&) = delete;

 private:
  std::filesystem::path file_;
};

class LockError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Trains in `config.out_dir`, writing manifest.ini, metrics.csv, loss_ordering.csv,
/// target.ckpt, magnitudes.bin and (adaaugment) policy.ckpt.
std::vector<train::EpochState> run_train(train::TrainConfig config, std::ostream* progress = nullptr);

/// Same, on datasets already in memory (data_path in the config is recorded only).
std::vector<train::EpochState> run_train(train::TrainConfig config, data::Dataset train_set,
                                         std::optional<data::Dataset> test_set, std::ostream* progress = nullptr);

/// Accuracy of a target checkpoint on the test split at `data_dir`.
double run_eval(const std::filesystem::path& checkpoint, const std::filesystem::path& data_dir, data::Format format);
double run_eval(const std::filesystem::path& checkpoint, const data::Dataset& dataset);

/// Writes magnitude.csv, accuracy.csv and losses.csv next to metrics.csv.
/// Every output is prepared before the first file is written.
void emit_plotdata(const std::filesystem::path& run_dir);

}  // namespace adaaug::cli
