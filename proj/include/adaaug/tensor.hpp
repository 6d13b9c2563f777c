#pragma once

// Dense f64 tensors with a tape-based reverse-mode differentiation record.
//
// A Tensor is a shared handle: copies refer to the same storage and the same
// tape node. Operations whose inputs require gradients record a backward
// closure on the result; backward() walks the recorded graph from a scalar
// root in reverse topological order. Leaf gradients accumulate across calls
// until zero_grad() is called.

#include "adaaug/errors.hpp"

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace adaaug::num {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_string(const Shape& shape);

using adaaug::ContractError;
using adaaug::DimensionError;

class Tensor {
 public:
  struct Node;

  Tensor();
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> values);

  static Tensor scalar(double v);
  /// Trainable leaf; backward() populates its grad.
  static Tensor parameter(Shape shape, std::vector<double> values);

  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t size() const;
  std::size_t dim(std::size_t axis) const;

  std::span<double> data();
  std::span<const double> data() const;
  std::vector<double> to_vector() const;
  double item() const;

  bool requires_grad() const;
  bool has_grad() const;
  std::span<double> grad();
  std::span<const double> grad() const;
  /// Drops the gradient buffer; has_grad() is false until the next backward().
  void zero_grad();

  /// Copy of the value with no tape linkage.
  Tensor detach() const;
  bool defined() const { return node_ != nullptr; }
  bool same(const Tensor& other) const { return node_ == other.node_; }

  // Used by op implementations.
  explicit Tensor(std::shared_ptr<Node> node) : node_(std::move(node)) {}
  const std::shared_ptr<Node>& node() const { return node_; }

 private:
  std::shared_ptr<Node> node_;
};

struct Tensor::Node {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;  // empty until first needed
  bool requires_grad = false;
  bool leaf = true;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward_fn;

  std::vector<double>& ensure_grad() {
    if (grad.empty()) grad.assign(value.size(), 0.0);
    return grad;
  }
};

/// While alive, new operations record no tape (forward-only passes).
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

bool grad_enabled();

/// Propagates d(root)/d(x) into every trainable ancestor x of `root`.
void backward(const Tensor& root);

// ---- operations --------------------------------------------------------

/// out[b,o] = sum_i input[b,i] * weight[i,o] + bias[o]
Tensor linear(const Tensor& input, const Tensor& weight, const Tensor& bias);

/// Cross-correlation of NCHW input with FCKK kernel.
Tensor conv2d(const Tensor& input, const Tensor& kernel, std::size_t stride, std::size_t padding);
/// Adds bias[f] to every spatial position of channel f.
Tensor add_channel_bias(const Tensor& input, const Tensor& bias);
/// Non-overlapping window max pooling; trailing rows/cols that do not fill a window are dropped.
Tensor max_pool2d(const Tensor& input, std::size_t window);

Tensor relu(const Tensor& x);
Tensor reshape(const Tensor& x, Shape shape);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& x, double factor);
Tensor square(const Tensor& x);
Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);

struct CrossEntropy {
  Tensor mean;        // scalar
  Tensor per_sample;  // [B]
};

/// Softmax cross-entropy of logits [B x k] against integer labels.
CrossEntropy cross_entropy(const Tensor& logits, std::span<const int> labels);

}  // namespace adaaug::num
