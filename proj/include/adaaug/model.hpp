#pragma once

#include "adaaug/checkpoint.hpp"
#include "adaaug/rng.hpp"
#include "adaaug/tensor.hpp"

#include <span>
#include <vector>

namespace adaaug::model {

struct NetConfig {
  int channels = 1;
  int height = 28;
  int width = 28;
  int classes = 10;
  int features = 128;  // width of the state vector handed to the policy
  int conv1_filters = 32;
  int conv2_filters = 64;
};

/// Target classifier:
///   conv3x3 -> relu -> maxpool2 -> conv3x3 -> relu -> maxpool2 -> flatten
///   -> linear(F) [features] -> relu -> linear(k) [logits]
///
/// No normalization layers, so forward is a pure function of the parameters.
class TargetNet {
 public:
  TargetNet(const NetConfig& config, Rng& rng);

  struct Output {
    num::Tensor features;  // [B x F], the linear layer before the head
    num::Tensor logits;    // [B x k]
  };

  Output forward(const num::Tensor& batch) const;

  /// Per-sample cross-entropy; no tape is recorded.
  std::vector<double> per_sample_losses(const num::Tensor& batch, std::span<const int> labels) const;

  std::vector<num::Tensor> parameters() const;
  std::vector<num::NamedTensor> named_parameters() const;
  const NetConfig& config() const { return config_; }
  std::size_t flat_size() const { return flat_; }

  /// Rebuilds a network (architecture and weights) from checkpoint records.
  /// Deep copy; parameters do not share storage with this network.
  TargetNet clone() const;

  static TargetNet from_checkpoint(const std::vector<num::NamedTensor>& records);
  /// Architecture record stored next to the weights.
  num::NamedTensor config_record() const;

 private:
  NetConfig config_;
  std::size_t flat_ = 0;
  num::Tensor conv1_w_, conv1_b_, conv2_w_, conv2_b_;
  num::Tensor feat_w_, feat_b_, head_w_, head_b_;
};

}  // namespace adaaug::model
