#include "adaaug/a2c.hpp"

#include "gradcheck.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>

using namespace adaaug;
using num::Tensor;

namespace {

Tensor states(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  Rng rng(seed);
  return Tensor({rows, cols}, gradcheck::random_values(rows * cols, rng));
}

// Actor whose mean output is the constant `mu` for every state.
a2c::Mlp constant_actor(int input, double mu) {
  Rng rng(0);
  a2c::Mlp actor("actor", input, 4, 3, rng);
  actor.zero_output_layer();
  for (auto& rec : actor.named_parameters())
    if (rec.name == "actor.l3.bias") rec.tensor.data()[0] = mu;
  return actor;
}

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

}  // namespace

TEST_CASE("hyperparameter validation") {
  a2c::PolicyHyper h;
  CHECK(h.gamma == 0.99);
  CHECK(h.sigma == 0.2);
  CHECK_NOTHROW(h.validate());
  h.gamma = 1.2;
  CHECK_THROWS_AS(h.validate(), ConfigError);
  h = {};
  h.sigma = 0.0;
  CHECK_THROWS_AS(h.validate(), ConfigError);
  h = {};
  h.actor_lr = -1.0;
  CHECK_THROWS_AS(h.validate(), ConfigError);
}

TEST_CASE("network shapes and zero output layer") {
  Rng rng(1);
  a2c::Mlp critic("critic", 6, 512, 256, rng);
  const auto s = states(4, 6, 2);
  CHECK(critic.forward(s).shape() == num::Shape{4});
  critic.zero_output_layer();
  for (double v : critic.forward(s).to_vector()) CHECK(v == 0.0);
  CHECK_THROWS_AS(critic.forward(states(2, 5, 3)), DimensionError);
  CHECK(critic.named_parameters()[0].name == "critic.l1.weight");
  CHECK(critic.named_parameters()[4].tensor.shape() == num::Shape{256, 1});
}

TEST_CASE("duplicated rows give duplicated values; golden critic output") {
  Rng rng(43);
  a2c::Mlp critic("critic", 3, 8, 5, rng);
  const auto v = critic.forward(Tensor({2, 3}, {0.1, -0.2, 0.3, 1.0, 0.5, -1.5})).to_vector();
  CHECK(std::abs(v[0] - 0.11943377711031766) <= 1e-12);
  CHECK(std::abs(v[1] - 1.0005043220619727) <= 1e-12);
  const auto d = critic.forward(Tensor({2, 3}, {0.1, -0.2, 0.3, 0.1, -0.2, 0.3})).to_vector();
  CHECK(d[0] == d[1]);
}

TEST_CASE("act: bounded actions and log density") {
  const auto actor = constant_actor(3, 0.3);
  Rng rng(5);
  const auto s = states(1000, 3, 6);
  const auto a = a2c::act(actor, s, 0.2, rng);
  for (std::size_t i = 0; i < 1000; ++i) {
    const double m = a.magnitude[i], z = a.pre_squash[i];
    CHECK(m > 0.0);
    CHECK(m < 1.0);
    CHECK(m == sigmoid(z));
    const double want =
        -0.5 * std::pow((z - 0.3) / 0.2, 2) - std::log(0.2) - 0.5 * std::log(2 * std::numbers::pi) - std::log(m * (1 - m));
    CHECK(std::abs(a.log_prob.data()[i] - want) <= 1e-12);
  }
  // log_prob of the same magnitudes under the same actor agrees
  const auto lp = a2c::log_prob(actor, s, a.magnitude, 0.2).to_vector();
  for (std::size_t i = 0; i < 1000; ++i) CHECK(std::abs(lp[i] - a.log_prob.data()[i]) <= 1e-9);

  CHECK_THROWS_AS(a2c::log_prob(actor, states(1, 3, 1), std::vector<double>{1.0}, 0.2), ContractError);
  CHECK_THROWS_AS(a2c::log_prob(actor, states(1, 3, 1), std::vector<double>{0.0}, 0.2), ContractError);
}

TEST_CASE("act: tiny sigma at mu 0 gives one half") {
  const auto actor = constant_actor(2, 0.0);
  Rng rng(7);
  const auto a = a2c::act(actor, states(5, 2, 8), 1e-300, rng);
  for (double m : a.magnitude) CHECK(m == 0.5);
}

TEST_CASE("act: extreme means stay inside the open interval") {
  for (double mu : {-80.0, 80.0}) {
    const auto actor = constant_actor(2, mu);
    Rng rng(9);
    const auto a = a2c::act(actor, states(100, 2, 10), 0.2, rng);
    for (double m : a.magnitude) {
      CHECK(m > 0.0);
      CHECK(m < 1.0);
    }
    for (double v : a.log_prob.to_vector()) CHECK(std::isfinite(v));
  }
}

TEST_CASE("act: mean magnitude matches quadrature") {
  const double mu = 0.3, sigma = 0.2;
  // E[sigmoid(Z)], Z ~ N(mu, sigma^2), composite Simpson over +-10 sigma
  const int n = 20000;
  const double lo = mu - 10 * sigma, hi = mu + 10 * sigma, h = (hi - lo) / n;
  double e1 = 0.0, e2 = 0.0;
  for (int i = 0; i <= n; ++i) {
    const double z = lo + i * h;
    const double w = (i == 0 || i == n) ? 1.0 : (i % 2 ? 4.0 : 2.0);
    const double pdf = std::exp(-0.5 * std::pow((z - mu) / sigma, 2)) / (sigma * std::sqrt(2 * std::numbers::pi));
    e1 += w * pdf * sigmoid(z);
    e2 += w * pdf * sigmoid(z) * sigmoid(z);
  }
  e1 *= h / 3;
  e2 *= h / 3;
  const double se = std::sqrt((e2 - e1 * e1) / 1e6);

  const auto actor = constant_actor(1, mu);
  Rng rng(11);
  double total = 0.0;
  const std::size_t rows = 10000;
  const Tensor s({rows, 1}, 0.0);
  for (int rep = 0; rep < 100; ++rep) {
    num::NoGradGuard no_grad;
    const auto a = a2c::act(actor, s, sigma, rng);
    for (double m : a.magnitude) {
      REQUIRE(m > 0.0);
      REQUIRE(m < 1.0);
      total += m;
    }
  }
  const double mean = total / 1e6;
  CHECK(std::abs(mean - e1) <= 3 * se);
}

TEST_CASE("actor loss") {
  const Tensor lp({1}, {-1.0});
  const std::vector<double> r{0.5}, va{1.0}, vn{0.5};
  CHECK(std::abs(a2c::actor_loss(lp, r, va, vn, 0.99).item() - 0.99) <= 1e-15);

  const Tensor lps({3}, {-0.3, 1.2, -2.0});
  const std::vector<double> r3{0.2, -0.1, 0.4}, va3{0.5, 0.1, -0.3}, vn3{0.695, -0.001, 0.103};
  CHECK(std::abs(a2c::actor_loss(lps, r3, va3, vn3, 0.99).item()) <= 1e-15);  // zero advantage

  std::vector<double> r2{0.3, -0.7, 1.1}, zeros(3, 0.0);
  const double base = a2c::actor_loss(lps, r2, zeros, zeros, 0.9).item();
  for (auto& v : r2) v *= 2.5;
  CHECK(std::abs(a2c::actor_loss(lps, r2, zeros, zeros, 0.9).item() - 2.5 * base) <= 1e-14);

  CHECK_THROWS_AS(a2c::actor_loss(lps, r, va, vn, 0.99), ContractError);
}

TEST_CASE("critic loss") {
  const std::vector<double> r{1.0}, va{0.0};
  CHECK(a2c::critic_loss(r, va, Tensor({1}, {0.0}), 0.99).item() == 1.0);

  const std::vector<double> r3{0.2, -0.1, 0.4}, va3{0.5, 0.1, -0.3};
  const Tensor perfect({3}, {0.2 + 0.99 * 0.5, -0.1 + 0.99 * 0.1, 0.4 - 0.99 * 0.3});
  CHECK(std::abs(a2c::critic_loss(r3, va3, perfect, 0.99).item()) <= 1e-30);

  const Tensor vn({3}, {0.3, -0.2, 0.9});
  const std::vector<double> pr{0.4, 0.2, -0.1}, pva{-0.3, 0.5, 0.1};
  const Tensor pvn({3}, {0.9, 0.3, -0.2});
  CHECK(std::abs(a2c::critic_loss(r3, va3, vn, 0.99).item() - a2c::critic_loss(pr, pva, pvn, 0.99).item()) <= 1e-15);
  CHECK_THROWS_AS(a2c::critic_loss(r, va3, vn, 0.99), ContractError);
}

TEST_CASE("agent update") {
  a2c::PolicyHyper hyper;
  hyper.hidden1 = 16;
  hyper.hidden2 = 8;
  hyper.critic_lr = 0.05;
  Rng rng(21);
  a2c::Agent agent(4, hyper, rng);

  SUBCASE("zero advantage leaves the actor unchanged") {
    const auto s = states(6, 4, 1), s2 = states(6, 4, 2);
    std::vector<double> v_none, v_ada;
    {
      num::NoGradGuard g;
      v_none = agent.value(s).to_vector();
      v_ada = agent.value(s2).to_vector();
    }
    std::vector<double> r(6);
    for (std::size_t i = 0; i < 6; ++i) r[i] = v_none[i] - hyper.gamma * v_ada[i];
    std::vector<std::vector<double>> before;
    for (const auto& p : agent.actor().parameters()) before.push_back(p.to_vector());
    const auto stats = agent.update({s, {0.2, 0.4, 0.5, 0.6, 0.7, 0.9}, r, s2});
    CHECK(std::abs(stats.actor_loss) <= 1e-15);
    CHECK(stats.actor_samples == 6);
    for (std::size_t k = 0; k < before.size(); ++k) CHECK(agent.actor().parameters()[k].to_vector() == before[k]);
  }

  SUBCASE("boundary actions skip the actor") {
    const auto s = states(3, 4, 3);
    std::vector<std::vector<double>> before;
    for (const auto& p : agent.actor().parameters()) before.push_back(p.to_vector());
    const auto stats = agent.update({s, {0.0, 0.0, 1.0}, {0.1, 0.2, 0.3}, states(3, 4, 4)});
    CHECK(std::isnan(stats.actor_loss));
    CHECK(stats.actor_samples == 0);
    CHECK(std::isfinite(stats.critic_loss));
    for (std::size_t k = 0; k < before.size(); ++k) CHECK(agent.actor().parameters()[k].to_vector() == before[k]);
  }

  SUBCASE("critic converges on a frozen batch") {
    const auto s = states(8, 4, 5);
    const std::vector<double> r{0.5, -0.2, 0.1, 0.3, -0.4, 0.2, 0.0, 0.6};
    // terminal next state: v_ada is the critic's own value on an all-zero state
    const Tensor s2({8, 4}, 0.0);
    agent.critic().zero_output_layer();
    double first = 0.0, last = 0.0;
    for (int step = 0; step < 500; ++step) {
      const auto stats = agent.update({s, std::vector<double>(8, 0.5), r, s2});
      if (step == 0) first = stats.critic_loss;
      last = stats.critic_loss;
    }
    CHECK(first > 0.01);
    CHECK(last < 0.01 * first);
  }
}

TEST_CASE("agent determinism") {
  auto run = [] {
    a2c::PolicyHyper hyper;
    hyper.hidden1 = 12;
    hyper.hidden2 = 6;
    Rng init(3), noise(4);
    a2c::Agent agent(5, hyper, init);
    for (int i = 0; i < 20; ++i) {
      const auto s = states(7, 5, 100 + i), s2 = states(7, 5, 200 + i);
      std::vector<double> m;
      {
        num::NoGradGuard g;
        m = agent.act(s, noise).magnitude;
      }
      agent.update({s, m, gradcheck::random_values(7, noise), s2});
    }
    std::vector<double> flat;
    for (const auto& p : agent.actor().parameters()) {
      const auto v = p.to_vector();
      flat.insert(flat.end(), v.begin(), v.end());
    }
    for (const auto& p : agent.critic().parameters()) {
      const auto v = p.to_vector();
      flat.insert(flat.end(), v.begin(), v.end());
    }
    return flat;
  };
  CHECK(run() == run());
}

TEST_CASE("advantage is a constant weight") {
  // The actor gradient depends on the critic only through the advantage values.
  Rng rng(31);
  a2c::Mlp actor("actor", 3, 6, 4, rng);
  const auto s = states(4, 3, 32);
  const std::vector<double> m{0.2, 0.5, 0.7, 0.9}, r{0.1, 0.2, -0.3, 0.4};
  const std::vector<double> va1{0.3, 0.1, 0.2, 0.0}, vn1{0.2, 0.2, 0.1, 0.5};
  std::vector<double> va2(4), vn2(4);
  for (int i = 0; i < 4; ++i) {
    va2[i] = va1[i] + 0.7;  // both shifted so that r + g*va - vn is unchanged
    vn2[i] = vn1[i] + 0.99 * 0.7;
  }
  auto grads = [&](const std::vector<double>& va, const std::vector<double>& vn) {
    for (auto p : actor.parameters()) p.zero_grad();
    num::backward(a2c::actor_loss(a2c::log_prob(actor, s, m, 0.2), r, va, vn, 0.99));
    std::vector<double> g;
    for (const auto& p : actor.parameters()) g.insert(g.end(), p.grad().begin(), p.grad().end());
    return g;
  };
  const auto g1 = grads(va1, vn1), g2 = grads(va2, vn2);
  REQUIRE(g1.size() == g2.size());
  for (std::size_t i = 0; i < g1.size(); ++i) CHECK(std::abs(g1[i] - g2[i]) <= 1e-12);
}
