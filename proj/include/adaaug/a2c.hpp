#pragma once

// Advantage actor-critic over per-sample augmentation magnitudes.
//
// The actor maps a target-network feature vector to the mean of a Gaussian in
// pre-squash space; a sample z is squashed through a sigmoid into a
// magnitude in (0, 1). The critic maps a feature vector to a scalar value.
// Each training sample is a one-step episode s_none -> s_ada.

#include "adaaug/checkpoint.hpp"
#include "adaaug/optim.hpp"
#include "adaaug/rng.hpp"
#include "adaaug/tensor.hpp"

#include <span>
#include <string>
#include <vector>

namespace adaaug::a2c {

struct PolicyHyper {
  double gamma = 0.99;
  double sigma = 0.2;
  double actor_lr = 1e-3;
  double critic_lr = 1e-3;
  int hidden1 = 512;
  int hidden2 = 256;

  void validate() const;
};

/// input -> hidden1 -> relu -> hidden2 -> relu -> 1
class Mlp {
 public:
  Mlp(std::string prefix, int input, int hidden1, int hidden2, Rng& rng);

  /// [B x input] -> [B]
  num::Tensor forward(const num::Tensor& x) const;
  std::vector<num::Tensor> parameters() const;
  std::vector<num::NamedTensor> named_parameters() const;
  int input_dim() const { return input_; }
  /// Deep copy with fresh (untaped) parameter storage.
  Mlp clone() const;
  /// Sets the output layer to zero (constant-zero network).
  void zero_output_layer();

 private:
  Mlp() = default;
  std::string prefix_;
  int input_ = 0;
  num::Tensor w1_, b1_, w2_, b2_, w3_, b3_;
};

struct Action {
  std::vector<double> magnitude;  // sigmoid(z), strictly inside (0, 1)
  std::vector<double> pre_squash;  // z
  num::Tensor log_prob;            // [B], differentiable w.r.t. actor parameters
};

/// Largest |z| an action may take; keeps sigmoid(z) representably inside (0, 1).
inline constexpr double kMaxPreSquash = 30.0;

/// z ~ Normal(mu(s), sigma^2), m = sigmoid(z),
/// log_prob = log N(z; mu, sigma) - log(m (1 - m)).
Action act(const Mlp& actor, const num::Tensor& states, double sigma, Rng& rng);

/// Log-density of given magnitudes under the current actor. Every m must lie in (0, 1).
num::Tensor log_prob(const Mlp& actor, const num::Tensor& states, std::span<const double> magnitudes, double sigma);

/// mean_b -log_prob[b] * (r[b] + gamma * v_ada[b] - v_none[b]); the advantage is a constant weight.
num::Tensor actor_loss(const num::Tensor& log_prob, std::span<const double> reward, std::span<const double> v_ada,
                       std::span<const double> v_none, double gamma);

/// mean_b (r[b] + gamma * v_ada[b] - v_none[b])^2; the target r + gamma * v_ada is a constant.
num::Tensor critic_loss(std::span<const double> reward, std::span<const double> v_ada, const num::Tensor& v_none,
                        double gamma);

/// Row-wise RMS normalization, s / sqrt(mean(s^2)); all-zero rows stay zero.
/// The target network's feature scale drifts while it trains; the agent
/// sees states of fixed scale. Not differentiable (states are detached).
num::Tensor normalize_states(const num::Tensor& states);

/// One batch of one-step transitions. s_none and s_ada are detached [B x F]
/// snapshots. `action` is the magnitude that produced s_ada; only actions
/// strictly inside (0, 1) came from the policy and contribute to the actor loss.
struct TransitionBatch {
  num::Tensor s_none;
  std::vector<double> action;
  std::vector<double> reward;
  num::Tensor s_ada;
};

struct UpdateStats {
  double actor_loss = 0.0;  // NaN when no transition was actor-eligible
  double critic_loss = 0.0;
  std::size_t actor_samples = 0;
};

class Agent {
 public:
  Agent(int state_dim, const PolicyHyper& hyper, Rng& rng);

  // States are raw feature rows; act, value and update normalize them.
  Action act(const num::Tensor& states, Rng& rng) const {
    return a2c::act(actor_, normalize_states(states), hyper_.sigma, rng);
  }
  /// V(s) per row, as a differentiable [B] tensor.
  num::Tensor value(const num::Tensor& states) const { return critic_.forward(normalize_states(states)); }

  /// One gradient step on the actor and on the critic, both from pre-update values.
  UpdateStats update(const TransitionBatch& batch);

  const Mlp& actor() const { return actor_; }
  const Mlp& critic() const { return critic_; }
  Mlp& actor() { return actor_; }
  Mlp& critic() { return critic_; }
  const PolicyHyper& hyper() const { return hyper_; }

 private:
  PolicyHyper hyper_;
  Mlp actor_;
  Mlp critic_;
  num::SgdNesterov actor_opt_;
  num::SgdNesterov critic_opt_;
};

}  // namespace adaaug::a2c
