#include "adaaug/tensor.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <unordered_set>

namespace adaaug::num {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using ConstMapMat = Eigen::Map<const RowMat>;

thread_local bool g_grad_enabled = true;

using NodePtr = std::shared_ptr<Tensor::Node>;

Tensor make_result(Shape shape, std::vector<double> value, std::vector<NodePtr> parents,
                   std::function<void(Tensor::Node&)> backward_fn) {
  auto node = std::make_shared<Tensor::Node>();
  node->shape = std::move(shape);
  node->value = std::move(value);
  node->leaf = false;
  bool needs = false;
  if (g_grad_enabled) {
    for (const auto& p : parents) needs = needs || p->requires_grad;
  }
  if (needs) {
    node->requires_grad = true;
    node->parents = std::move(parents);
    node->backward_fn = std::move(backward_fn);
  }
  return Tensor(std::move(node));
}

void require_rank(const Tensor& t, std::size_t rank, const char* what) {
  if (t.rank() != rank) {
    throw DimensionError(std::string(what) + ": expected rank " + std::to_string(rank) + ", got shape " +
                         shape_string(t.shape()));
  }
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* what) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(what) + ": shape mismatch " + shape_string(a.shape()) + " vs " +
                         shape_string(b.shape()));
  }
}

// Unrolls one image [C,H,W] into columns [C*K*K, Ho*Wo].
void im2col(const double* img, std::size_t channels, std::size_t height, std::size_t width, std::size_t k,
            std::size_t stride, std::size_t pad, std::size_t out_h, std::size_t out_w, double* col) {
  const std::size_t cols = out_h * out_w;
  for (std::size_t c = 0; c < channels; ++c) {
    for (std::size_t ki = 0; ki < k; ++ki) {
      for (std::size_t kj = 0; kj < k; ++kj) {
        double* row = col + ((c * k + ki) * k + kj) * cols;
        for (std::size_t oy = 0; oy < out_h; ++oy) {
          const auto iy = static_cast<std::ptrdiff_t>(oy * stride + ki) - static_cast<std::ptrdiff_t>(pad);
          double* dst = row + oy * out_w;
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(height)) {
            std::fill(dst, dst + out_w, 0.0);
            continue;
          }
          const double* src = img + (c * height + static_cast<std::size_t>(iy)) * width;
          for (std::size_t ox = 0; ox < out_w; ++ox) {
            const auto ix = static_cast<std::ptrdiff_t>(ox * stride + kj) - static_cast<std::ptrdiff_t>(pad);
            dst[ox] = (ix < 0 || ix >= static_cast<std::ptrdiff_t>(width)) ? 0.0 : src[ix];
          }
        }
      }
    }
  }
}

void col2im_add(const double* col, std::size_t channels, std::size_t height, std::size_t width, std::size_t k,
                std::size_t stride, std::size_t pad, std::size_t out_h, std::size_t out_w, double* img) {
  const std::size_t cols = out_h * out_w;
  for (std::size_t c = 0; c < channels; ++c) {
    for (std::size_t ki = 0; ki < k; ++ki) {
      for (std::size_t kj = 0; kj < k; ++kj) {
        const double* row = col + ((c * k + ki) * k + kj) * cols;
        for (std::size_t oy = 0; oy < out_h; ++oy) {
          const auto iy = static_cast<std::ptrdiff_t>(oy * stride + ki) - static_cast<std::ptrdiff_t>(pad);
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(height)) continue;
          double* dst = img + (c * height + static_cast<std::size_t>(iy)) * width;
          for (std::size_t ox = 0; ox < out_w; ++ox) {
            const auto ix = static_cast<std::ptrdiff_t>(ox * stride + kj) - static_cast<std::ptrdiff_t>(pad);
            if (ix >= 0 && ix < static_cast<std::ptrdiff_t>(width)) dst[ix] += row[oy * out_w + ox];
          }
        }
      }
    }
  }
}

}  // namespace

std::size_t shape_size(const Shape& shape) {
  std::size_t n = 1;
  for (auto e : shape) n *= e;
  return n;
}

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "x" : "") << shape[i];
  os << ']';
  return os.str();
}

// ---- Tensor --------------------------------------------------------------

Tensor::Tensor() : Tensor(Shape{}, 0.0) {}

Tensor::Tensor(Shape shape, double fill) : node_(std::make_shared<Node>()) {
  for (auto e : shape) {
    if (e == 0) throw DimensionError("tensor extents must be positive, got " + shape_string(shape));
  }
  node_->value.assign(shape_size(shape), fill);
  node_->shape = std::move(shape);
}

Tensor::Tensor(Shape shape, std::vector<double> values) : node_(std::make_shared<Node>()) {
  for (auto e : shape) {
    if (e == 0) throw DimensionError("tensor extents must be positive, got " + shape_string(shape));
  }
  if (shape_size(shape) != values.size()) {
    throw DimensionError("shape " + shape_string(shape) + " does not hold " + std::to_string(values.size()) +
                         " values");
  }
  node_->shape = std::move(shape);
  node_->value = std::move(values);
}

Tensor Tensor::scalar(double v) { return Tensor(Shape{}, std::vector<double>{v}); }

Tensor Tensor::parameter(Shape shape, std::vector<double> values) {
  Tensor t(std::move(shape), std::move(values));
  t.node_->requires_grad = true;
  return t;
}

const Shape& Tensor::shape() const { return node_->shape; }
std::size_t Tensor::size() const { return node_->value.size(); }
std::size_t Tensor::dim(std::size_t axis) const {
  if (axis >= rank()) throw DimensionError("axis " + std::to_string(axis) + " out of range for " + shape_string(shape()));
  return node_->shape[axis];
}

std::span<double> Tensor::data() { return node_->value; }
std::span<const double> Tensor::data() const { return node_->value; }
std::vector<double> Tensor::to_vector() const { return node_->value; }

double Tensor::item() const {
  if (size() != 1) throw ContractError("item() on non-scalar tensor " + shape_string(shape()));
  return node_->value[0];
}

bool Tensor::requires_grad() const { return node_->requires_grad; }
bool Tensor::has_grad() const { return !node_->grad.empty(); }
std::span<double> Tensor::grad() { return node_->grad; }
std::span<const double> Tensor::grad() const { return node_->grad; }

void Tensor::zero_grad() { node_->grad.clear(); }

Tensor Tensor::detach() const { return Tensor(node_->shape, node_->value); }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }
bool grad_enabled() { return g_grad_enabled; }

// ---- backward ------------------------------------------------------------

void backward(const Tensor& root) {
  if (root.size() != 1) throw ContractError("backward() requires a scalar root, got " + shape_string(root.shape()));
  const NodePtr& start = root.node();
  if (!start->requires_grad) return;

  // Iterative post-order DFS gives a topological order (parents before children).
  std::vector<Tensor::Node*> order;
  std::unordered_set<Tensor::Node*> visited;
  std::vector<std::pair<Tensor::Node*, std::size_t>> stack{{start.get(), 0}};
  visited.insert(start.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Tensor::Node* p = node->parents[next++].get();
      if (p->requires_grad && visited.insert(p).second) stack.emplace_back(p, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  for (Tensor::Node* n : order) {
    if (!n->leaf) n->grad.assign(n->value.size(), 0.0);
  }
  start->ensure_grad()[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Tensor::Node* n = *it;
    if (!n->leaf && n->backward_fn) n->backward_fn(*n);
  }
}

// ---- linear --------------------------------------------------------------

Tensor linear(const Tensor& input, const Tensor& weight, const Tensor& bias) {
  require_rank(input, 2, "linear input");
  require_rank(weight, 2, "linear weight");
  require_rank(bias, 1, "linear bias");
  const std::size_t batch = input.dim(0), in = input.dim(1), out = weight.dim(1);
  if (weight.dim(0) != in || bias.dim(0) != out) {
    throw DimensionError("linear: input " + shape_string(input.shape()) + " incompatible with weight " +
                         shape_string(weight.shape()) + " and bias " + shape_string(bias.shape()));
  }
  std::vector<double> value(batch * out);
  MapMat y(value.data(), batch, out);
  ConstMapMat x(input.data().data(), batch, in);
  ConstMapMat w(weight.data().data(), in, out);
  Eigen::Map<const Eigen::RowVectorXd> b(bias.data().data(), out);
  y.noalias() = x * w;
  y.rowwise() += b;

  NodePtr xn = input.node(), wn = weight.node(), bn = bias.node();
  return make_result({batch, out}, std::move(value), {xn, wn, bn}, [xn, wn, bn, batch, in, out](Tensor::Node& self) {
    ConstMapMat gy(self.grad.data(), batch, out);
    if (xn->requires_grad) {
      MapMat gx(xn->ensure_grad().data(), batch, in);
      gx.noalias() += gy * ConstMapMat(wn->value.data(), in, out).transpose();
    }
    if (wn->requires_grad) {
      MapMat gw(wn->ensure_grad().data(), in, out);
      gw.noalias() += ConstMapMat(xn->value.data(), batch, in).transpose() * gy;
    }
    if (bn->requires_grad) {
      // row by row: Eigen's colwise().sum() changes order with pointer alignment
      double* gb = bn->ensure_grad().data();
      const double* g = self.grad.data();
      for (std::size_t r = 0; r < batch; ++r)
        for (std::size_t c = 0; c < out; ++c) gb[c] += g[r * out + c];
    }
  });
}

// ---- convolution -----------------------------------------------------------

Tensor conv2d(const Tensor& input, const Tensor& kernel, std::size_t stride, std::size_t padding) {
  require_rank(input, 4, "conv2d input");
  require_rank(kernel, 4, "conv2d kernel");
  if (stride == 0) throw ContractError("conv2d: stride must be positive");
  const std::size_t batch = input.dim(0), channels = input.dim(1), height = input.dim(2), width = input.dim(3);
  const std::size_t filters = kernel.dim(0), k = kernel.dim(2);
  if (kernel.dim(1) != channels || kernel.dim(3) != k) {
    throw DimensionError("conv2d: input " + shape_string(input.shape()) + " incompatible with kernel " +
                         shape_string(kernel.shape()));
  }
  const std::size_t padded_h = height + 2 * padding, padded_w = width + 2 * padding;
  if (padded_h < k || padded_w < k || (padded_h - k) % stride != 0 || (padded_w - k) % stride != 0) {
    throw ConfigError("conv2d: non-integral output extent for input " + shape_string(input.shape()) +
                                ", kernel " + std::to_string(k) + ", stride " + std::to_string(stride) +
                                ", padding " + std::to_string(padding));
  }
  const std::size_t out_h = (padded_h - k) / stride + 1, out_w = (padded_w - k) / stride + 1;
  const std::size_t patch = channels * k * k, cols = out_h * out_w;
  const std::size_t in_stride = channels * height * width, out_stride = filters * cols;

  std::vector<double> value(batch * out_stride);
  std::vector<double> col(patch * cols);
  ConstMapMat kmat(kernel.data().data(), filters, patch);
  for (std::size_t b = 0; b < batch; ++b) {
    im2col(input.data().data() + b * in_stride, channels, height, width, k, stride, padding, out_h, out_w, col.data());
    MapMat(value.data() + b * out_stride, filters, cols).noalias() = kmat * ConstMapMat(col.data(), patch, cols);
  }

  NodePtr xn = input.node(), kn = kernel.node();
  return make_result(
      {batch, filters, out_h, out_w}, std::move(value), {xn, kn},
      [=](Tensor::Node& self) {
        std::vector<double> col(patch * cols), dcol(patch * cols);
        ConstMapMat kmat(kn->value.data(), filters, patch);
        for (std::size_t b = 0; b < batch; ++b) {
          ConstMapMat gy(self.grad.data() + b * out_stride, filters, cols);
          if (kn->requires_grad) {
            im2col(xn->value.data() + b * in_stride, channels, height, width, k, stride, padding, out_h, out_w,
                   col.data());
            MapMat(kn->ensure_grad().data(), filters, patch).noalias() +=
                gy * ConstMapMat(col.data(), patch, cols).transpose();
          }
          if (xn->requires_grad) {
            MapMat(dcol.data(), patch, cols).noalias() = kmat.transpose() * gy;
            col2im_add(dcol.data(), channels, height, width, k, stride, padding, out_h, out_w,
                       xn->ensure_grad().data() + b * in_stride);
          }
        }
      });
}

Tensor add_channel_bias(const Tensor& input, const Tensor& bias) {
  require_rank(input, 4, "add_channel_bias input");
  require_rank(bias, 1, "add_channel_bias bias");
  const std::size_t batch = input.dim(0), channels = input.dim(1), plane = input.dim(2) * input.dim(3);
  if (bias.dim(0) != channels) {
    throw DimensionError("add_channel_bias: input " + shape_string(input.shape()) + " vs bias " +
                         shape_string(bias.shape()));
  }
  std::vector<double> value = input.to_vector();
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t c = 0; c < channels; ++c) {
      double* p = value.data() + (b * channels + c) * plane;
      const double v = bias.data()[c];
      for (std::size_t i = 0; i < plane; ++i) p[i] += v;
    }
  NodePtr xn = input.node(), bn = bias.node();
  return make_result(input.shape(), std::move(value), {xn, bn}, [=](Tensor::Node& self) {
    if (xn->requires_grad) {
      auto& gx = xn->ensure_grad();
      for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += self.grad[i];
    }
    if (bn->requires_grad) {
      auto& gb = bn->ensure_grad();
      for (std::size_t b = 0; b < batch; ++b)
        for (std::size_t c = 0; c < channels; ++c) {
          const double* g = self.grad.data() + (b * channels + c) * plane;
          double acc = 0.0;
          for (std::size_t i = 0; i < plane; ++i) acc += g[i];
          gb[c] += acc;
        }
    }
  });
}

Tensor max_pool2d(const Tensor& input, std::size_t window) {
  require_rank(input, 4, "max_pool2d input");
  if (window == 0) throw ContractError("max_pool2d: window must be positive");
  const std::size_t batch = input.dim(0), channels = input.dim(1), height = input.dim(2), width = input.dim(3);
  const std::size_t out_h = height / window, out_w = width / window;
  if (out_h == 0 || out_w == 0) {
    throw DimensionError("max_pool2d: window " + std::to_string(window) + " larger than input " +
                         shape_string(input.shape()));
  }
  std::vector<double> value(batch * channels * out_h * out_w);
  std::vector<std::size_t> argmax(value.size());
  const auto& x = input.data();
  std::size_t o = 0;
  for (std::size_t bc = 0; bc < batch * channels; ++bc) {
    const std::size_t base = bc * height * width;
    for (std::size_t oy = 0; oy < out_h; ++oy)
      for (std::size_t ox = 0; ox < out_w; ++ox, ++o) {
        std::size_t best = base + oy * window * width + ox * window;
        for (std::size_t dy = 0; dy < window; ++dy)
          for (std::size_t dx = 0; dx < window; ++dx) {
            const std::size_t idx = base + (oy * window + dy) * width + ox * window + dx;
            if (x[idx] > x[best]) best = idx;
          }
        value[o] = x[best];
        argmax[o] = best;
      }
  }
  NodePtr xn = input.node();
  return make_result({batch, channels, out_h, out_w}, std::move(value), {xn},
                     [xn, argmax = std::move(argmax)](Tensor::Node& self) {
                       auto& gx = xn->ensure_grad();
                       for (std::size_t i = 0; i < argmax.size(); ++i) gx[argmax[i]] += self.grad[i];
                     });
}

// ---- elementwise -----------------------------------------------------------

Tensor relu(const Tensor& x) {
  std::vector<double> value = x.to_vector();
  for (auto& v : value) v = v > 0.0 ? v : 0.0;
  NodePtr xn = x.node();
  return make_result(x.shape(), std::move(value), {xn}, [xn](Tensor::Node& self) {
    auto& gx = xn->ensure_grad();
    for (std::size_t i = 0; i < gx.size(); ++i)
      if (xn->value[i] > 0.0) gx[i] += self.grad[i];
  });
}

Tensor reshape(const Tensor& x, Shape shape) {
  if (shape_size(shape) != x.size()) {
    throw DimensionError("reshape: cannot view " + shape_string(x.shape()) + " as " + shape_string(shape));
  }
  NodePtr xn = x.node();
  return make_result(std::move(shape), x.to_vector(), {xn}, [xn](Tensor::Node& self) {
    auto& gx = xn->ensure_grad();
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += self.grad[i];
  });
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  std::vector<double> value(a.size());
  for (std::size_t i = 0; i < value.size(); ++i) value[i] = a.data()[i] + b.data()[i];
  NodePtr an = a.node(), bn = b.node();
  return make_result(a.shape(), std::move(value), {an, bn}, [an, bn](Tensor::Node& self) {
    for (const auto& n : {an, bn}) {
      if (!n->requires_grad) continue;
      auto& g = n->ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    }
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  std::vector<double> value(a.size());
  for (std::size_t i = 0; i < value.size(); ++i) value[i] = a.data()[i] - b.data()[i];
  NodePtr an = a.node(), bn = b.node();
  return make_result(a.shape(), std::move(value), {an, bn}, [an, bn](Tensor::Node& self) {
    if (an->requires_grad) {
      auto& g = an->ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    }
    if (bn->requires_grad) {
      auto& g = bn->ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] -= self.grad[i];
    }
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  std::vector<double> value(a.size());
  for (std::size_t i = 0; i < value.size(); ++i) value[i] = a.data()[i] * b.data()[i];
  NodePtr an = a.node(), bn = b.node();
  return make_result(a.shape(), std::move(value), {an, bn}, [an, bn](Tensor::Node& self) {
    if (an->requires_grad) {
      auto& g = an->ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * bn->value[i];
    }
    if (bn->requires_grad) {
      auto& g = bn->ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * an->value[i];
    }
  });
}

Tensor scale(const Tensor& x, double factor) {
  std::vector<double> value = x.to_vector();
  for (auto& v : value) v *= factor;
  NodePtr xn = x.node();
  return make_result(x.shape(), std::move(value), {xn}, [xn, factor](Tensor::Node& self) {
    auto& g = xn->ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * factor;
  });
}

Tensor square(const Tensor& x) {
  std::vector<double> value = x.to_vector();
  for (auto& v : value) v *= v;
  NodePtr xn = x.node();
  return make_result(x.shape(), std::move(value), {xn}, [xn](Tensor::Node& self) {
    auto& g = xn->ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += 2.0 * xn->value[i] * self.grad[i];
  });
}

Tensor sum(const Tensor& x) {
  double acc = 0.0;
  for (double v : x.data()) acc += v;
  NodePtr xn = x.node();
  return make_result({}, {acc}, {xn}, [xn](Tensor::Node& self) {
    auto& g = xn->ensure_grad();
    for (auto& v : g) v += self.grad[0];
  });
}

Tensor mean(const Tensor& x) { return scale(sum(x), 1.0 / static_cast<double>(x.size())); }

// ---- loss ----------------------------------------------------------------

CrossEntropy cross_entropy(const Tensor& logits, std::span<const int> labels) {
  require_rank(logits, 2, "cross_entropy logits");
  const std::size_t batch = logits.dim(0), classes = logits.dim(1);
  if (labels.size() != batch) {
    throw DimensionError("cross_entropy: " + std::to_string(labels.size()) + " labels for logits " +
                         shape_string(logits.shape()));
  }
  std::vector<int> y(labels.begin(), labels.end());
  for (int label : y) {
    if (label < 0 || static_cast<std::size_t>(label) >= classes) {
      throw std::out_of_range("cross_entropy: label " + std::to_string(label) + " outside [0, " +
                              std::to_string(classes) + ")");
    }
  }
  std::vector<double> probs(batch * classes), losses(batch);
  const auto& z = logits.data();
  for (std::size_t b = 0; b < batch; ++b) {
    const double* row = z.data() + b * classes;
    const double mx = *std::max_element(row, row + classes);
    double denom = 0.0;
    for (std::size_t j = 0; j < classes; ++j) denom += std::exp(row[j] - mx);
    const double log_denom = std::log(denom);
    for (std::size_t j = 0; j < classes; ++j) probs[b * classes + j] = std::exp(row[j] - mx - log_denom);
    losses[b] = -(row[y[b]] - mx - log_denom);
  }
  NodePtr zn = logits.node();
  Tensor per_sample = make_result({batch}, std::move(losses), {zn},
                                  [zn, probs = std::move(probs), y, classes](Tensor::Node& self) {
                                    auto& g = zn->ensure_grad();
                                    for (std::size_t b = 0; b < y.size(); ++b) {
                                      const double gb = self.grad[b];
                                      for (std::size_t j = 0; j < classes; ++j) {
                                        const double target = static_cast<int>(j) == y[b] ? 1.0 : 0.0;
                                        g[b * classes + j] += gb * (probs[b * classes + j] - target);
                                      }
                                    }
                                  });
  return {mean(per_sample), per_sample};
}

}  // namespace adaaug::num
