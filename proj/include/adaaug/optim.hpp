#pragma once

#include "adaaug/tensor.hpp"

#include <cstddef>
#include <vector>

namespace adaaug::num {

/// SGD with Nesterov momentum and coupled weight decay.
///
///   v <- mu * v + g + wd * p
///   p <- p - lr * (g + wd * p + mu * v)
///
/// With mu = 0 this reduces to plain SGD. Velocity buffers are created
/// zeroed on construction and persist across steps.
class SgdNesterov {
 public:
  SgdNesterov(std::vector<Tensor> params, double learning_rate, double momentum = 0.0, double weight_decay = 0.0);

  /// Applies one update from the populated grads, then clears them.
  void step();
  void zero_grad();

  double learning_rate() const { return lr_; }
  void set_learning_rate(double lr);
  double momentum() const { return momentum_; }
  double weight_decay() const { return weight_decay_; }

  const std::vector<Tensor>& params() const { return params_; }
  const std::vector<std::vector<double>>& velocity() const { return velocity_; }

 private:
  std::vector<Tensor> params_;
  std::vector<std::vector<double>> velocity_;
  double lr_;
  double momentum_;
  double weight_decay_;
};

enum class ScheduleKind { cosine, multi_step };

struct LrSchedule {
  ScheduleKind kind = ScheduleKind::cosine;
  double base_rate = 0.1;
  int total_epochs = 1;
  std::vector<int> milestones;  // multi-step only, ascending
  double decay_factor = 0.1;    // multi-step only

  /// Rate for `epoch` in [0, total_epochs]. Throws std::out_of_range past the end.
  double rate(int epoch) const;
};

}  // namespace adaaug::num
