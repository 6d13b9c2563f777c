#include "adaaug/model.hpp"

#include "adaaug/errors.hpp"

#include <string>

namespace adaaug::model {

namespace {

constexpr std::size_t kKernel = 3;
constexpr std::size_t kPool = 2;

std::size_t after_block(std::size_t extent) {
  if (extent < kKernel) return 0;
  return (extent - kKernel + 1) / kPool;
}

}  // namespace

TargetNet::TargetNet(const NetConfig& config, Rng& rng) : config_(config) {
  if (config.channels <= 0 || config.height <= 0 || config.width <= 0 || config.classes < 2 || config.features <= 0 ||
      config.conv1_filters <= 0 || config.conv2_filters <= 0) {
    throw ConfigError("target network: all extents must be positive and classes >= 2");
  }
  const auto c = static_cast<std::size_t>(config.channels);
  const auto f1 = static_cast<std::size_t>(config.conv1_filters);
  const auto f2 = static_cast<std::size_t>(config.conv2_filters);
  const auto feat = static_cast<std::size_t>(config.features);
  const auto k = static_cast<std::size_t>(config.classes);
  const std::size_t h = after_block(after_block(static_cast<std::size_t>(config.height)));
  const std::size_t w = after_block(after_block(static_cast<std::size_t>(config.width)));
  if (h == 0 || w == 0) {
    throw ConfigError("target network: input " + std::to_string(config.height) + "x" + std::to_string(config.width) +
                      " too small for two conv/pool blocks");
  }
  flat_ = f2 * h * w;

  conv1_w_ = fan_in_uniform({f1, c, kKernel, kKernel}, c * kKernel * kKernel, rng);
  conv1_b_ = zeros_parameter({f1});
  conv2_w_ = fan_in_uniform({f2, f1, kKernel, kKernel}, f1 * kKernel * kKernel, rng);
  conv2_b_ = zeros_parameter({f2});
  feat_w_ = fan_in_uniform({flat_, feat}, flat_, rng);
  feat_b_ = zeros_parameter({feat});
  head_w_ = fan_in_uniform({feat, k}, feat, rng);
  head_b_ = zeros_parameter({k});
}

TargetNet::Output TargetNet::forward(const num::Tensor& batch) const {
  using namespace num;
  if (batch.rank() != 4 || batch.dim(1) != static_cast<std::size_t>(config_.channels) ||
      batch.dim(2) != static_cast<std::size_t>(config_.height) ||
      batch.dim(3) != static_cast<std::size_t>(config_.width)) {
    throw ConfigError("target network built for [B x " + std::to_string(config_.channels) + " x " +
                      std::to_string(config_.height) + " x " + std::to_string(config_.width) + "] input, got " +
                      shape_string(batch.shape()));
  }
  Tensor x = relu(add_channel_bias(conv2d(batch, conv1_w_, 1, 0), conv1_b_));
  x = max_pool2d(x, kPool);
  x = relu(add_channel_bias(conv2d(x, conv2_w_, 1, 0), conv2_b_));
  x = max_pool2d(x, kPool);
  x = reshape(x, {batch.dim(0), flat_});
  Tensor features = linear(x, feat_w_, feat_b_);
  Tensor logits = linear(relu(features), head_w_, head_b_);
  return {features, logits};
}

std::vector<double> TargetNet::per_sample_losses(const num::Tensor& batch, std::span<const int> labels) const {
  num::NoGradGuard no_grad;
  const auto out = forward(batch);
  return num::cross_entropy(out.logits, labels).per_sample.to_vector();
}

std::vector<num::Tensor> TargetNet::parameters() const {
  return {conv1_w_, conv1_b_, conv2_w_, conv2_b_, feat_w_, feat_b_, head_w_, head_b_};
}

std::vector<num::NamedTensor> TargetNet::named_parameters() const {
  return {{"conv1.weight", conv1_w_},   {"conv1.bias", conv1_b_},   {"conv2.weight", conv2_w_},
          {"conv2.bias", conv2_b_},     {"feature.weight", feat_w_}, {"feature.bias", feat_b_},
          {"head.weight", head_w_},     {"head.bias", head_b_}};
}

TargetNet TargetNet::clone() const {
  TargetNet copy = *this;
  auto fresh = [](const num::Tensor& t) { return num::Tensor::parameter(t.shape(), t.to_vector()); };
  copy.conv1_w_ = fresh(conv1_w_);
  copy.conv1_b_ = fresh(conv1_b_);
  copy.conv2_w_ = fresh(conv2_w_);
  copy.conv2_b_ = fresh(conv2_b_);
  copy.feat_w_ = fresh(feat_w_);
  copy.feat_b_ = fresh(feat_b_);
  copy.head_w_ = fresh(head_w_);
  copy.head_b_ = fresh(head_b_);
  return copy;
}

num::NamedTensor TargetNet::config_record() const {
  return {"target.config",
          num::Tensor({7}, {static_cast<double>(config_.channels), static_cast<double>(config_.height),
                            static_cast<double>(config_.width), static_cast<double>(config_.classes),
                            static_cast<double>(config_.features), static_cast<double>(config_.conv1_filters),
                            static_cast<double>(config_.conv2_filters)})};
}

TargetNet TargetNet::from_checkpoint(const std::vector<num::NamedTensor>& records) {
  const num::NamedTensor* cfg = nullptr;
  for (const auto& r : records)
    if (r.name == "target.config") cfg = &r;
  if (!cfg || cfg->tensor.size() != 7) throw num::CheckpointError("checkpoint has no target.config record");
  const auto v = cfg->tensor.data();
  NetConfig config{static_cast<int>(v[0]), static_cast<int>(v[1]), static_cast<int>(v[2]), static_cast<int>(v[3]),
                   static_cast<int>(v[4]), static_cast<int>(v[5]), static_cast<int>(v[6])};
  Rng rng(0);
  TargetNet net(config, rng);
  num::assign_from(records, net.named_parameters());
  return net;
}

}  // namespace adaaug::model
