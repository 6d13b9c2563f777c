#pragma once

#include "adaaug/tensor.hpp"

#include <cmath>
#include <cstdint>
#include <random>

namespace adaaug {

using Rng = std::mt19937_64;

/// Independent generator for one consumer (init, shuffling, ops, policy...)
/// derived from a run seed.
inline Rng make_stream(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), 0x9e3779b9u};
  return Rng(seq);
}

namespace stream {
inline constexpr std::uint64_t target_init = 1;
inline constexpr std::uint64_t policy_init = 2;
inline constexpr std::uint64_t shuffle = 3;
inline constexpr std::uint64_t operation = 4;
inline constexpr std::uint64_t policy_noise = 5;
inline constexpr std::uint64_t ablation = 6;
inline constexpr std::uint64_t preprocess = 7;
inline constexpr std::uint64_t subset = 8;
}  // namespace stream

/// Kaiming-uniform fan-in initialization, bound sqrt(6 / fan_in).
inline num::Tensor kaiming_uniform(num::Shape shape, std::size_t fan_in, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
  std::uniform_real_distribution<double> dist(-bound, bound);
  std::vector<double> values(num::shape_size(shape));
  for (auto& v : values) v = dist(rng);
  return num::Tensor::parameter(std::move(shape), std::move(values));
}

/// Default layer initialization of common frameworks (Kaiming-uniform with a = sqrt(5)): bound 1 / sqrt(fan_in).
inline num::Tensor fan_in_uniform(num::Shape shape, std::size_t fan_in, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  std::uniform_real_distribution<double> dist(-bound, bound);
  std::vector<double> values(num::shape_size(shape));
  for (auto& v : values) v = dist(rng);
  return num::Tensor::parameter(std::move(shape), std::move(values));
}

inline num::Tensor uniform_parameter(num::Shape shape, double bound, Rng& rng) {
  std::uniform_real_distribution<double> dist(-bound, bound);
  std::vector<double> values(num::shape_size(shape));
  for (auto& v : values) v = dist(rng);
  return num::Tensor::parameter(std::move(shape), std::move(values));
}

inline num::Tensor zeros_parameter(num::Shape shape) {
  const auto n = num::shape_size(shape);
  return num::Tensor::parameter(std::move(shape), std::vector<double>(n, 0.0));
}

}  // namespace adaaug
