#include "adaaug/optim.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace adaaug::num {

SgdNesterov::SgdNesterov(std::vector<Tensor> params, double learning_rate, double momentum, double weight_decay)
    : params_(std::move(params)), lr_(learning_rate), momentum_(momentum), weight_decay_(weight_decay) {
  if (!(learning_rate > 0.0)) throw std::invalid_argument("learning rate must be positive");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw std::invalid_argument("momentum must lie in [0, 1)");
  if (!(weight_decay >= 0.0)) throw std::invalid_argument("weight decay must be nonnegative");
  velocity_.reserve(params_.size());
  for (const auto& p : params_) {
    if (!p.requires_grad()) throw ContractError("optimizer given a tensor that is not a trainable parameter");
    velocity_.emplace_back(p.size(), 0.0);
  }
}

void SgdNesterov::set_learning_rate(double lr) {
  if (!(lr >= 0.0)) throw std::invalid_argument("learning rate must be nonnegative");
  lr_ = lr;
}

void SgdNesterov::step() {
  for (std::size_t k = 0; k < params_.size(); ++k) {
    if (!params_[k].has_grad()) {
      throw ContractError("sgd step: parameter " + std::to_string(k) + " has no gradient; run backward first");
    }
  }
  for (std::size_t k = 0; k < params_.size(); ++k) {
    auto p = params_[k].data();
    auto g = params_[k].grad();
    auto& v = velocity_[k];
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double d = g[i] + weight_decay_ * p[i];
      v[i] = momentum_ * v[i] + d;
      p[i] -= lr_ * (d + momentum_ * v[i]);
    }
  }
  zero_grad();
}

void SgdNesterov::zero_grad() {
  for (auto& p : params_) p.zero_grad();
}

double LrSchedule::rate(int epoch) const {
  if (epoch < 0 || epoch > total_epochs) {
    throw std::out_of_range("lr schedule: epoch " + std::to_string(epoch) + " outside [0, " +
                            std::to_string(total_epochs) + "]");
  }
  switch (kind) {
    case ScheduleKind::cosine:
      return base_rate * 0.5 *
             (1.0 + std::cos(std::numbers::pi * static_cast<double>(epoch) / static_cast<double>(total_epochs)));
    case ScheduleKind::multi_step: {
      double r = base_rate;
      for (int m : milestones)
        if (epoch >= m) r *= decay_factor;
      return r;
    }
  }
  return base_rate;
}

}  // namespace adaaug::num
