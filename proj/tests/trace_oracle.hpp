#pragma once

// Straight-line replay of the joint training loop, scripted step by step
// with its own arithmetic, compared against what the Trainer recorded.
//
// Shared with the library: the target network's forward pass and its
// autodiff gradient (each verified on its own), the augmentation ops, and
// the seeded generator streams. Everything else (lr and lambda schedules,
// cross entropy, state scaling, sampling, rewards, the whole actor/critic forward,
// backward and update, Nesterov steps, the magnitude store) is redone here.

#include "adaaug/controller.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>
#include <vector>

namespace trace_oracle {

using namespace adaaug;

struct Report {
  double max_diff = 0.0;      // over every compared real
  std::size_t compared = 0;
  std::size_t batches = 0;
  std::string mismatch;       // first structural mismatch, empty if none
  bool ok(double tol) const { return mismatch.empty() && max_diff <= tol && compared > 0; }
};

// Plain-array 3-layer relu MLP, weights [in x out].
struct Mlp {
  std::size_t in = 0, h1 = 0, h2 = 0;
  std::vector<double> w1, b1, w2, b2, w3, b3;

  static Mlp from(const a2c::Mlp& net) {
    Mlp m;
    const auto p = net.named_parameters();
    m.w1 = p[0].tensor.to_vector();
    m.b1 = p[1].tensor.to_vector();
    m.w2 = p[2].tensor.to_vector();
    m.b2 = p[3].tensor.to_vector();
    m.w3 = p[4].tensor.to_vector();
    m.b3 = p[5].tensor.to_vector();
    m.in = p[0].tensor.dim(0);
    m.h1 = p[0].tensor.dim(1);
    m.h2 = p[2].tensor.dim(1);
    return m;
  }

  struct Cache {
    std::vector<double> x, a1, a2;
  };

  std::vector<double> forward(const std::vector<double>& x, std::size_t rows, Cache* cache = nullptr) const {
    std::vector<double> a1(rows * h1), a2(rows * h2), y(rows);
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t j = 0; j < h1; ++j) {
        double s = b1[j];
        for (std::size_t i = 0; i < in; ++i) s += x[r * in + i] * w1[i * h1 + j];
        a1[r * h1 + j] = s;
      }
      for (std::size_t j = 0; j < h2; ++j) {
        double s = b2[j];
        for (std::size_t i = 0; i < h1; ++i) s += std::max(0.0, a1[r * h1 + i]) * w2[i * h2 + j];
        a2[r * h2 + j] = s;
      }
      double s = b3[0];
      for (std::size_t i = 0; i < h2; ++i) s += std::max(0.0, a2[r * h2 + i]) * w3[i];
      y[r] = s;
    }
    if (cache) *cache = {x, a1, a2};
    return y;
  }

  // Plain SGD step from dL/dy per row.
  void sgd(const Cache& c, const std::vector<double>& dy, double lr) {
    const std::size_t rows = dy.size();
    std::vector<double> gw1(w1.size(), 0.0), gb1(h1, 0.0), gw2(w2.size(), 0.0), gb2(h2, 0.0), gw3(h2, 0.0);
    double gb3 = 0.0;
    for (std::size_t r = 0; r < rows; ++r) {
      gb3 += dy[r];
      std::vector<double> da2(h2), da1(h1, 0.0);
      for (std::size_t i = 0; i < h2; ++i) {
        const double a = c.a2[r * h2 + i];
        gw3[i] += std::max(0.0, a) * dy[r];
        da2[i] = a > 0.0 ? dy[r] * w3[i] : 0.0;
        gb2[i] += da2[i];
      }
      for (std::size_t i = 0; i < h1; ++i) {
        const double a = c.a1[r * h1 + i];
        double dh = 0.0;
        for (std::size_t j = 0; j < h2; ++j) {
          gw2[i * h2 + j] += std::max(0.0, a) * da2[j];
          dh += da2[j] * w2[i * h2 + j];
        }
        da1[i] = a > 0.0 ? dh : 0.0;
        gb1[i] += da1[i];
      }
      for (std::size_t i = 0; i < in; ++i)
        for (std::size_t j = 0; j < h1; ++j) gw1[i * h1 + j] += c.x[r * in + i] * da1[j];
    }
    auto apply = [lr](std::vector<double>& p, const std::vector<double>& g) {
      for (std::size_t k = 0; k < p.size(); ++k) p[k] -= lr * g[k];
    };
    apply(w1, gw1);
    apply(b1, gb1);
    apply(w2, gw2);
    apply(b2, gb2);
    apply(w3, gw3);
    b3[0] -= lr * gb3;
  }

  std::vector<double> flat() const {
    std::vector<double> f;
    for (const auto* v : {&w1, &b1, &w2, &b2, &w3, &b3}) f.insert(f.end(), v->begin(), v->end());
    return f;
  }
};

// Each row scaled to unit root-mean-square.
inline std::vector<double> rms_rows(std::vector<double> s, std::size_t f) {
  for (std::size_t r = 0; r * f < s.size(); ++r) {
    double sq = 0.0;
    for (std::size_t k = 0; k < f; ++k) sq += s[r * f + k] * s[r * f + k];
    if (sq == 0.0) continue;
    const double rms = std::sqrt(sq / static_cast<double>(f));
    for (std::size_t k = 0; k < f; ++k) s[r * f + k] /= rms;
  }
  return s;
}

inline std::vector<double> cross_entropy(const std::vector<double>& logits, const std::vector<int>& labels) {
  const std::size_t n = labels.size(), k = logits.size() / n;
  std::vector<double> out(n);
  for (std::size_t b = 0; b < n; ++b) {
    double mx = logits[b * k];
    for (std::size_t j = 1; j < k; ++j) mx = std::max(mx, logits[b * k + j]);
    double s = 0.0;
    for (std::size_t j = 0; j < k; ++j) s += std::exp(logits[b * k + j] - mx);
    out[b] = mx + std::log(s) - logits[b * k + static_cast<std::size_t>(labels[b])];
  }
  return out;
}

/// Trains `epochs` epochs of adaaugment mode (linear lambda, cosine lr, no
/// pad/flip) and replays them. Fills `traces` when non-null.
inline Report run(const train::TrainConfig& config, const data::Dataset& dataset, int epochs,
                  std::vector<train::BatchTrace>* traces = nullptr) {
  Report rep;
  auto note = [&rep](double a, double b) {
    const double d = std::abs(a - b);
    rep.max_diff = std::max(rep.max_diff, std::isnan(d) ? INFINITY : d);
    ++rep.compared;
  };
  auto note_all = [&](const std::vector<double>& a, const std::vector<double>& b, const char* what) {
    if (a.size() != b.size()) {
      if (rep.mismatch.empty()) rep.mismatch = std::string(what) + ": length differs";
      return;
    }
    for (std::size_t i = 0; i < a.size(); ++i) note(a[i], b[i]);
  };
  if (config.mode != train::Mode::adaaugment || config.pad_flip ||
      config.lambda_schedule != train::LambdaSchedule::linear || config.schedule != num::ScheduleKind::cosine) {
    rep.mismatch = "oracle covers adaaugment / linear lambda / cosine lr / no pad-flip only";
    return rep;
  }

  train::Trainer trainer(config, dataset);
  std::vector<train::BatchTrace> recorded;
  trainer.set_trace([&recorded](const train::BatchTrace& t) { recorded.push_back(t); });

  // oracle state
  model::TargetNet net = trainer.net().clone();
  auto params = net.parameters();
  std::vector<std::vector<double>> velocity;
  for (const auto& p : params) velocity.emplace_back(p.size(), 0.0);
  Mlp actor = Mlp::from(trainer.agent()->actor()), critic = Mlp::from(trainer.agent()->critic());
  std::vector<double> store(dataset.size(), 0.0);
  Rng op_rng = make_stream(config.seed, stream::operation);
  Rng noise_rng = make_stream(config.seed, stream::policy_noise);
  const double sigma = config.policy.sigma, gamma = config.policy.gamma;
  const int T = config.epochs;

  for (int t = 0; t < epochs; ++t) {
    recorded.clear();
    trainer.train_epoch(t);
    const double lambda = 1.0 - static_cast<double>(t) / static_cast<double>(T - 1);
    const double lr = config.lr * 0.5 * (1.0 + std::cos(std::numbers::pi * t / static_cast<double>(T)));
    std::vector<int> seen(dataset.size(), 0);

    for (const auto& tr : recorded) {
      ++rep.batches;
      const std::size_t n = tr.indices.size();
      for (auto i : tr.indices) ++seen.at(i);
      note(tr.lambda, lambda);
      note(tr.lr, lr);

      const auto op = aug::sample_operation(op_rng);
      if (op.kind != tr.op.kind || op.direction != tr.op.direction) {
        if (rep.mismatch.empty()) rep.mismatch = "operation differs at epoch " + std::to_string(t);
      }
      std::vector<double> applied(n);
      std::vector<aug::Image> x, x_ada, x_full;
      std::vector<int> labels(n);
      for (std::size_t i = 0; i < n; ++i) {
        const std::size_t j = tr.indices[i];
        applied[i] = store[j];
        labels[i] = dataset.labels[j];
        x.push_back(dataset.images[j]);
        x_ada.push_back(aug::apply(op, applied[i], x.back()));
        x_full.push_back(aug::apply(op, 1.0, x.back()));
      }
      note_all(tr.applied, applied, "applied");

      std::vector<double> l_none, l_full, s_none, s_ada;
      {
        num::NoGradGuard no_grad;
        const auto o_none = net.forward(data::to_batch_tensor(x, dataset.stats));
        const auto o_full = net.forward(data::to_batch_tensor(x_full, dataset.stats));
        l_none = cross_entropy(o_none.logits.to_vector(), labels);
        l_full = cross_entropy(o_full.logits.to_vector(), labels);
        s_none = o_none.features.to_vector();
      }
      const auto o_ada = net.forward(data::to_batch_tensor(x_ada, dataset.stats));
      const auto l_ada = cross_entropy(o_ada.logits.to_vector(), labels);
      s_ada = o_ada.features.to_vector();
      note_all(tr.l_none, l_none, "l_none");
      note_all(tr.l_ada, l_ada, "l_ada");
      note_all(tr.l_full, l_full, "l_full");
      s_none = rms_rows(s_none, actor.in);
      s_ada = rms_rows(s_ada, actor.in);

      // proposal from the pre-update actor
      const auto mu = actor.forward(s_none, n);
      std::normal_distribution<double> eps(0.0, 1.0);
      std::vector<double> proposed(n);
      for (std::size_t i = 0; i < n; ++i) {
        const double z = std::clamp(mu[i] + sigma * eps(noise_rng), -a2c::kMaxPreSquash, a2c::kMaxPreSquash);
        proposed[i] = 1.0 / (1.0 + std::exp(-z));
      }
      note_all(tr.proposed, proposed, "proposed");
      for (std::size_t i = 0; i < n; ++i) store[tr.indices[i]] = proposed[i];

      std::vector<double> r(n);
      for (std::size_t i = 0; i < n; ++i)
        r[i] = lambda * (l_full[i] - l_ada[i]) + (1.0 - lambda) * (l_ada[i] - l_none[i]);
      note_all(tr.rewards, r, "rewards");

      // critic and actor from pre-update values
      Mlp::Cache c_none, a_cache;
      const auto v_none = critic.forward(s_none, n, &c_none);
      const auto v_ada = critic.forward(s_ada, n);
      double closs = 0.0;
      std::vector<double> dv(n);
      for (std::size_t i = 0; i < n; ++i) {
        const double e = r[i] + gamma * v_ada[i] - v_none[i];
        closs += e * e / static_cast<double>(n);
        dv[i] = -2.0 * e / static_cast<double>(n);
      }
      note(tr.policy.critic_loss, closs);

      std::vector<std::size_t> rows;
      for (std::size_t i = 0; i < n; ++i)
        if (applied[i] > 0.0 && applied[i] < 1.0) rows.push_back(i);
      if (tr.policy.actor_samples != rows.size() && rep.mismatch.empty()) rep.mismatch = "actor sample count differs";
      if (!rows.empty()) {
        const std::size_t k = rows.size(), f = actor.in;
        std::vector<double> s(k * f);
        for (std::size_t q = 0; q < k; ++q)
          std::copy_n(s_none.begin() + static_cast<std::ptrdiff_t>(rows[q] * f), f,
                      s.begin() + static_cast<std::ptrdiff_t>(q * f));
        const auto m_mu = actor.forward(s, k, &a_cache);
        double aloss = 0.0;
        std::vector<double> dmu(k);
        for (std::size_t q = 0; q < k; ++q) {
          const std::size_t i = rows[q];
          const double m = applied[i], z = std::log(m) - std::log1p(-m);
          const double adv = r[i] + gamma * v_ada[i] - v_none[i];
          const double lp = -0.5 * std::pow((z - m_mu[q]) / sigma, 2) - std::log(sigma) -
                            0.5 * std::log(2.0 * std::numbers::pi) - std::log(m * (1.0 - m));
          aloss -= lp * adv / static_cast<double>(k);
          dmu[q] = -adv * (z - m_mu[q]) / (sigma * sigma) / static_cast<double>(k);
        }
        note(tr.policy.actor_loss, aloss);
        actor.sgd(a_cache, dmu, config.policy.actor_lr);
      }
      critic.sgd(c_none, dv, config.policy.critic_lr);

      // target: Nesterov step on mean L_ada
      for (auto& p : params) p.zero_grad();
      num::backward(num::cross_entropy(o_ada.logits, labels).mean);
      for (std::size_t k = 0; k < params.size(); ++k) {
        auto p = params[k].data();
        const auto g = params[k].grad();
        for (std::size_t e = 0; e < p.size(); ++e) {
          const double d = g[e] + config.weight_decay * p[e];
          velocity[k][e] = config.momentum * velocity[k][e] + d;
          p[e] -= lr * (d + config.momentum * velocity[k][e]);
        }
        params[k].zero_grad();
      }
      if (traces) traces->push_back(tr);
    }
    if (std::any_of(seen.begin(), seen.end(), [](int c) { return c != 1; }) && rep.mismatch.empty()) {
      rep.mismatch = "epoch " + std::to_string(t) + " did not visit every sample once";
    }
  }

  // final states
  const auto final_params = trainer.net().parameters();
  for (std::size_t k = 0; k < params.size(); ++k) note_all(final_params[k].to_vector(), params[k].to_vector(), "net");
  note_all(Mlp::from(trainer.agent()->actor()).flat(), actor.flat(), "actor");
  note_all(Mlp::from(trainer.agent()->critic()).flat(), critic.flat(), "critic");
  const auto kept = trainer.store().values();
  note_all(std::vector<double>(kept.begin(), kept.end()), store, "store");
  return rep;
}

}  // namespace trace_oracle
