#include "adaaug/a2c.hpp"

#include "adaaug/errors.hpp"

#include <cmath>
#include <limits>
#include <numbers>

namespace adaaug::a2c {

namespace {

num::Tensor copy_parameter(const num::Tensor& t) { return num::Tensor::parameter(t.shape(), t.to_vector()); }

void check_lengths(std::size_t n, std::size_t a, std::size_t b, const char* what) {
  if (a != n || b != n) {
    throw ContractError(std::string(what) + ": length mismatch (" + std::to_string(n) + ", " + std::to_string(a) +
                        ", " + std::to_string(b) + ")");
  }
}

num::Tensor advantage_weights(std::span<const double> reward, std::span<const double> v_ada,
                              std::span<const double> v_none, double gamma) {
  std::vector<double> adv(reward.size());
  for (std::size_t i = 0; i < adv.size(); ++i) adv[i] = reward[i] + gamma * v_ada[i] - v_none[i];
  const std::size_t n = adv.size();
  return num::Tensor({n}, std::move(adv));
}

}  // namespace

void PolicyHyper::validate() const {
  if (!(gamma >= 0.0 && gamma <= 1.0)) throw ConfigError("policy gamma must lie in [0, 1]");
  if (!(sigma > 0.0)) throw ConfigError("policy sigma must be positive");
  if (!(actor_lr > 0.0) || !(critic_lr > 0.0)) throw ConfigError("policy learning rates must be positive");
  if (hidden1 <= 0 || hidden2 <= 0) throw ConfigError("policy hidden widths must be positive");
}

// ---- Mlp -------------------------------------------------------------------

Mlp::Mlp(std::string prefix, int input, int hidden1, int hidden2, Rng& rng) : prefix_(std::move(prefix)), input_(input) {
  if (input <= 0 || hidden1 <= 0 || hidden2 <= 0) throw ConfigError("policy network widths must be positive");
  const auto in = static_cast<std::size_t>(input), h1 = static_cast<std::size_t>(hidden1),
             h2 = static_cast<std::size_t>(hidden2);
  w1_ = kaiming_uniform({in, h1}, in, rng);
  b1_ = zeros_parameter({h1});
  w2_ = kaiming_uniform({h1, h2}, h1, rng);
  b2_ = zeros_parameter({h2});
  w3_ = uniform_parameter({h2, 1}, 1.0 / std::sqrt(static_cast<double>(h2)), rng);
  b3_ = zeros_parameter({1});
}

num::Tensor Mlp::forward(const num::Tensor& x) const {
  if (x.rank() != 2 || x.dim(1) != static_cast<std::size_t>(input_)) {
    throw DimensionError("policy network expects [B x " + std::to_string(input_) + "] states, got " +
                         num::shape_string(x.shape()));
  }
  num::Tensor h = num::relu(num::linear(x, w1_, b1_));
  h = num::relu(num::linear(h, w2_, b2_));
  return num::reshape(num::linear(h, w3_, b3_), {x.dim(0)});
}

std::vector<num::Tensor> Mlp::parameters() const { return {w1_, b1_, w2_, b2_, w3_, b3_}; }

std::vector<num::NamedTensor> Mlp::named_parameters() const {
  return {{prefix_ + ".l1.weight", w1_}, {prefix_ + ".l1.bias", b1_}, {prefix_ + ".l2.weight", w2_},
          {prefix_ + ".l2.bias", b2_},   {prefix_ + ".l3.weight", w3_}, {prefix_ + ".l3.bias", b3_}};
}

Mlp Mlp::clone() const {
  Mlp m;
  m.prefix_ = prefix_;
  m.input_ = input_;
  m.w1_ = copy_parameter(w1_);
  m.b1_ = copy_parameter(b1_);
  m.w2_ = copy_parameter(w2_);
  m.b2_ = copy_parameter(b2_);
  m.w3_ = copy_parameter(w3_);
  m.b3_ = copy_parameter(b3_);
  return m;
}

void Mlp::zero_output_layer() {
  for (auto& v : w3_.data()) v = 0.0;
  for (auto& v : b3_.data()) v = 0.0;
}

// ---- policy ------------------------------------------------------------------

num::Tensor log_prob(const Mlp& actor, const num::Tensor& states, std::span<const double> magnitudes, double sigma) {
  if (!(sigma > 0.0)) throw ContractError("log_prob: sigma must be positive");
  const num::Tensor mu = actor.forward(states);
  if (magnitudes.size() != mu.size()) throw ContractError("log_prob: one magnitude per state row required");
  const std::size_t n = magnitudes.size();
  std::vector<double> z(n), offset(n);
  const double log_norm = -std::log(sigma) - 0.5 * std::log(2.0 * std::numbers::pi);
  for (std::size_t i = 0; i < n; ++i) {
    const double m = magnitudes[i];
    if (!(m > 0.0 && m < 1.0)) throw ContractError("log_prob: magnitude " + std::to_string(m) + " not inside (0, 1)");
    z[i] = std::log(m) - std::log1p(-m);
    offset[i] = log_norm - std::log(m * (1.0 - m));
  }
  const num::Tensor diff = num::sub(num::Tensor({n}, std::move(z)), mu);
  return num::add(num::scale(num::square(diff), -0.5 / (sigma * sigma)), num::Tensor({n}, std::move(offset)));
}

Action act(const Mlp& actor, const num::Tensor& states, double sigma, Rng& rng) {
  if (!(sigma > 0.0)) throw ContractError("act: sigma must be positive");
  const num::Tensor mu = actor.forward(states);
  const std::size_t n = mu.size();
  std::normal_distribution<double> noise(0.0, 1.0);
  Action a;
  a.magnitude.resize(n);
  a.pre_squash.resize(n);
  const double log_norm = -std::log(sigma) - 0.5 * std::log(2.0 * std::numbers::pi);
  std::vector<double> offset(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double z = std::clamp(mu.data()[i] + sigma * noise(rng), -kMaxPreSquash, kMaxPreSquash);
    const double m = 1.0 / (1.0 + std::exp(-z));
    a.pre_squash[i] = z;
    a.magnitude[i] = m;
    offset[i] = log_norm - std::log(m * (1.0 - m));
  }
  const num::Tensor diff = num::sub(num::Tensor({n}, a.pre_squash), mu);
  a.log_prob = num::add(num::scale(num::square(diff), -0.5 / (sigma * sigma)), num::Tensor({n}, std::move(offset)));
  return a;
}

num::Tensor actor_loss(const num::Tensor& log_prob, std::span<const double> reward, std::span<const double> v_ada,
                       std::span<const double> v_none, double gamma) {
  check_lengths(log_prob.size(), reward.size(), v_ada.size(), "actor_loss");
  check_lengths(log_prob.size(), v_none.size(), v_none.size(), "actor_loss");
  const num::Tensor adv = advantage_weights(reward, v_ada, v_none, gamma);
  return num::scale(num::mean(num::mul(log_prob, adv)), -1.0);
}

num::Tensor critic_loss(std::span<const double> reward, std::span<const double> v_ada, const num::Tensor& v_none,
                        double gamma) {
  check_lengths(v_none.size(), reward.size(), v_ada.size(), "critic_loss");
  std::vector<double> target(reward.size());
  for (std::size_t i = 0; i < target.size(); ++i) target[i] = reward[i] + gamma * v_ada[i];
  const std::size_t n = target.size();
  return num::mean(num::square(num::sub(num::Tensor({n}, std::move(target)), v_none)));
}

// ---- agent -------------------------------------------------------------------

num::Tensor normalize_states(const num::Tensor& states) {
  if (states.rank() != 2) throw DimensionError("states must be [B x F], got " + num::shape_string(states.shape()));
  const std::size_t rows = states.dim(0), f = states.dim(1);
  std::vector<double> out = states.to_vector();
  for (std::size_t r = 0; r < rows; ++r) {
    double sq = 0.0;
    for (std::size_t k = 0; k < f; ++k) sq += out[r * f + k] * out[r * f + k];
    if (sq == 0.0) continue;
    const double inv = 1.0 / std::sqrt(sq / static_cast<double>(f));
    for (std::size_t k = 0; k < f; ++k) out[r * f + k] *= inv;
  }
  return num::Tensor(states.shape(), std::move(out));
}

Agent::Agent(int state_dim, const PolicyHyper& hyper, Rng& rng)
    : hyper_((hyper.validate(), hyper)),
      actor_("actor", state_dim, hyper.hidden1, hyper.hidden2, rng),
      critic_("critic", state_dim, hyper.hidden1, hyper.hidden2, rng),
      actor_opt_(actor_.parameters(), hyper.actor_lr),
      critic_opt_(critic_.parameters(), hyper.critic_lr) {}

UpdateStats Agent::update(const TransitionBatch& batch) {
  const std::size_t n = batch.action.size();
  if (batch.reward.size() != n || batch.s_none.rank() != 2 || batch.s_none.dim(0) != n ||
      batch.s_ada.shape() != batch.s_none.shape()) {
    throw ContractError("a2c update: inconsistent transition batch");
  }
  const num::Tensor s_none = normalize_states(batch.s_none);
  std::vector<double> v_ada;
  {
    num::NoGradGuard no_grad;
    v_ada = critic_.forward(normalize_states(batch.s_ada)).to_vector();
  }
  num::Tensor v_none_t = critic_.forward(s_none);
  const std::vector<double> v_none = v_none_t.to_vector();

  UpdateStats stats;
  num::Tensor closs = critic_loss(batch.reward, v_ada, v_none_t, hyper_.gamma);
  stats.critic_loss = closs.item();
  critic_opt_.zero_grad();
  num::backward(closs);
  critic_opt_.step();

  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < n; ++i)
    if (batch.action[i] > 0.0 && batch.action[i] < 1.0) rows.push_back(i);
  stats.actor_samples = rows.size();
  if (rows.empty()) {
    stats.actor_loss = std::numeric_limits<double>::quiet_NaN();
    return stats;
  }
  const std::size_t f = s_none.dim(1);
  std::vector<double> states, actions, r, va, vn;
  states.reserve(rows.size() * f);
  for (auto i : rows) {
    const auto row = s_none.data().subspan(i * f, f);
    states.insert(states.end(), row.begin(), row.end());
    actions.push_back(batch.action[i]);
    r.push_back(batch.reward[i]);
    va.push_back(v_ada[i]);
    vn.push_back(v_none[i]);
  }
  const num::Tensor s({rows.size(), f}, std::move(states));
  num::Tensor aloss = actor_loss(log_prob(actor_, s, actions, hyper_.sigma), r, va, vn, hyper_.gamma);
  stats.actor_loss = aloss.item();
  actor_opt_.zero_grad();
  num::backward(aloss);
  actor_opt_.step();
  return stats;
}

}  // namespace adaaug::a2c
