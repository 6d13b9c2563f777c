#include "adaaug/model.hpp"

#include <doctest.h>

#include <cmath>
#include <sstream>

using namespace adaaug;
using num::Tensor;

namespace {

std::vector<double> wave(std::size_t n, double freq) {
  std::vector<double> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = std::sin(freq * static_cast<double>(i));
  return v;
}

void zero_head(model::TargetNet& net) {
  for (auto& rec : net.named_parameters())
    if (rec.name.rfind("head.", 0) == 0)
      for (auto& v : rec.tensor.data()) v = 0.0;
}

}  // namespace

TEST_CASE("default architecture shapes") {
  Rng rng(1);
  model::TargetNet net(model::NetConfig{}, rng);
  CHECK(net.flat_size() == 64 * 5 * 5);
  const auto out = net.forward(Tensor({3, 1, 28, 28}, wave(3 * 784, 0.1)));
  CHECK(out.features.shape() == num::Shape{3, 128});
  CHECK(out.logits.shape() == num::Shape{3, 10});

  model::NetConfig cifar{3, 32, 32, 10, 64, 8, 16};
  model::TargetNet small(cifar, rng);
  CHECK(small.forward(Tensor({2, 3, 32, 32}, wave(2 * 3072, 0.2))).features.shape() == num::Shape{2, 64});

  CHECK_THROWS_AS(net.forward(Tensor({1, 3, 28, 28})), ConfigError);
  CHECK_THROWS_AS(net.forward(Tensor({1, 1, 32, 32})), ConfigError);
  CHECK_THROWS_AS(model::TargetNet(model::NetConfig{1, 5, 5, 10, 8, 2, 2}, rng), ConfigError);
}

TEST_CASE("zeroed head gives uniform logits") {
  Rng rng(2);
  model::TargetNet net(model::NetConfig{1, 12, 12, 10, 6, 3, 4}, rng);
  zero_head(net);
  const Tensor x({4, 1, 12, 12}, wave(4 * 144, 0.3));
  const auto logits = net.forward(x).logits;
  for (double v : logits.data()) CHECK(v == 0.0);
  const std::vector<int> labels{0, 3, 9, 5};
  for (double l : net.per_sample_losses(x, labels)) CHECK(std::abs(l - std::log(10.0)) <= 1e-15);
}

TEST_CASE("rows are computed independently") {
  Rng rng(3);
  model::TargetNet net(model::NetConfig{1, 12, 12, 3, 5, 2, 3}, rng);
  const auto one = wave(144, 0.7);
  auto two = one;
  two.insert(two.end(), one.begin(), one.end());
  const auto a = net.forward(Tensor({1, 1, 12, 12}, one));
  const auto b = net.forward(Tensor({2, 1, 12, 12}, two));
  for (std::size_t i = 0; i < 5; ++i) {
    CHECK(b.features.data()[i] == a.features.data()[i]);
    CHECK(b.features.data()[5 + i] == a.features.data()[i]);
  }
  const std::vector<int> labels{1, 1};
  const auto losses = net.per_sample_losses(Tensor({2, 1, 12, 12}, two), labels);
  CHECK(losses[0] == losses[1]);
}

TEST_CASE("per-sample losses match log-sum-exp of the logits") {
  Rng rng(4);
  model::TargetNet net(model::NetConfig{1, 12, 12, 4, 6, 3, 4}, rng);
  const Tensor x({3, 1, 12, 12}, wave(3 * 144, 1.3));
  const std::vector<int> labels{2, 0, 3};
  const auto logits = net.forward(x).logits.to_vector();
  const auto losses = net.per_sample_losses(x, labels);
  for (int b = 0; b < 3; ++b) {
    double mx = -1e300, s = 0.0;
    for (int j = 0; j < 4; ++j) mx = std::max(mx, logits[b * 4 + j]);
    for (int j = 0; j < 4; ++j) s += std::exp(logits[b * 4 + j] - mx);
    CHECK(std::abs(losses[b] - (mx + std::log(s) - logits[b * 4 + labels[b]])) <= 1e-12);
  }
}

TEST_CASE("golden features for a fixed seed") {
  Rng rng(42);
  model::TargetNet net(model::NetConfig{1, 12, 12, 4, 6, 3, 4}, rng);
  std::vector<double> x(144);
  for (std::size_t i = 0; i < 144; ++i) x[i] = std::sin(0.37 * static_cast<double>(i));
  const auto features = net.forward(Tensor({1, 1, 12, 12}, x)).features.to_vector();
  const std::vector<double> golden{0.050699218504423799, -0.082475975134200255, 0.07638819346151686,
                                   -0.11501135804694287, 0.21959876208750045,   -0.24836964744505197};
  REQUIRE(features.size() == golden.size());
  for (std::size_t i = 0; i < golden.size(); ++i) CHECK(std::abs(features[i] - golden[i]) <= 1e-12);
}

TEST_CASE("checkpoint round trip and clone") {
  Rng rng(5);
  model::TargetNet net(model::NetConfig{1, 12, 12, 3, 5, 2, 3}, rng);
  auto records = net.named_parameters();
  records.push_back(net.config_record());
  std::stringstream buf;
  num::write_checkpoint(buf, records);
  const auto back = model::TargetNet::from_checkpoint(num::read_checkpoint(buf));
  const Tensor x({2, 1, 12, 12}, wave(288, 0.9));
  CHECK(back.forward(x).logits.to_vector() == net.forward(x).logits.to_vector());
  CHECK(back.config().features == 5);

  auto copy = net.clone();
  for (auto& v : copy.parameters().front().data()) v += 1.0;
  CHECK(copy.forward(x).logits.to_vector() != net.forward(x).logits.to_vector());

  std::vector<num::NamedTensor> no_config = net.named_parameters();
  CHECK_THROWS_AS(model::TargetNet::from_checkpoint(no_config), num::CheckpointError);
}

TEST_CASE("features carry no gradient once detached") {
  Rng rng(6);
  model::TargetNet net(model::NetConfig{1, 12, 12, 3, 5, 2, 3}, rng);
  const auto out = net.forward(Tensor({1, 1, 12, 12}, wave(144, 0.4)));
  CHECK(out.features.requires_grad());
  CHECK_FALSE(out.features.detach().requires_grad());
}
