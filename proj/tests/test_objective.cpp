#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>
#include <vector>

#include "oracles.hpp"
#include "sumi/model.hpp"
#include "sumi/objective.hpp"

using namespace sumi;
using namespace sumi::objective;
using numkit::Bindings;
using numkit::GradMap;
using numkit::Graph;
using numkit::ParamSet;
using numkit::Tensor;

namespace {

Tensor random_dist(std::mt19937_64& rng, int c) {
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  Tensor z(c, 1);
  for (int i = 0; i < c; ++i) z[i] = u(rng);
  double mx = z[0];
  for (int i = 1; i < c; ++i) mx = std::max(mx, z[i]);
  double sum = 0.0;
  Tensor p(c, 1);
  for (int i = 0; i < c; ++i) {
    p[i] = std::exp(z[i] - mx);
    sum += p[i];
  }
  for (int i = 0; i < c; ++i) p[i] /= sum;
  return p;
}

}  // namespace

TEST_CASE("entropy: closed forms") {
  CHECK(std::fabs(entropy(Tensor::vector(4, 0.25)) - std::log(4.0)) <= 1e-9);
  CHECK(entropy(Tensor::vector({0.0, 1.0, 0.0})) == 0.0);
  CHECK(std::fabs(entropy(Tensor::vector({0.7, 0.3})) - 0.6108643) <= 1e-6);
}

TEST_CASE("entropy: uniform is the unique maximizer") {
  std::mt19937_64 rng(71);
  double ln8 = std::log(8.0);
  for (int trial = 0; trial < 1000; ++trial) {
    Tensor p = random_dist(rng, 8);
    double h = entropy(p);
    CHECK(h <= ln8 + 1e-12);
    if (h >= ln8 - 1e-9) {
      for (int i = 0; i < 8; ++i) CHECK(std::fabs(p[i] - 0.125) <= 1e-4);
    }
  }
  CHECK(std::fabs(entropy(Tensor::vector(8, 0.125)) - ln8) <= 1e-9);
}

TEST_CASE("complementary: two modalities give exactly the other distribution") {
  std::mt19937_64 rng(72);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<Tensor> dists{random_dist(rng, 5), random_dist(rng, 5)};
    CHECK(complementary(dists, 0) == dists[1]);
    CHECK(complementary(dists, 1) == dists[0]);
  }
}

TEST_CASE("complementary: three modalities average the others") {
  std::vector<Tensor> dists{
      Tensor::vector({0.5, 0.5, 0.0}),
      Tensor::vector({0.25, 0.25, 0.5}),
      Tensor::vector({0.75, 0.25, 0.0}),
  };
  Tensor c0 = complementary(dists, 0);
  CHECK(c0[0] == 0.5);
  CHECK(c0[1] == 0.25);
  CHECK(c0[2] == 0.25);
}

TEST_CASE("complementary: output stays on the simplex") {
  std::mt19937_64 rng(73);
  for (int trial = 0; trial < 100; ++trial) {
    int m = 2 + static_cast<int>(rng() % 4);
    std::vector<Tensor> dists;
    for (int j = 0; j < m; ++j) dists.push_back(random_dist(rng, 6));
    Tensor c = complementary(dists, static_cast<int>(rng() % static_cast<uint64_t>(m)));
    double sum = 0.0;
    for (int i = 0; i < 6; ++i) {
      CHECK(c[i] >= 0.0);
      sum += c[i];
    }
    CHECK(std::fabs(sum - 1.0) <= 1e-12);
  }
}

TEST_CASE("complementary: fewer than two distributions rejected") {
  CHECK_THROWS_AS(complementary({Tensor::vector(3, 1.0 / 3)}, 0), std::invalid_argument);
  CHECK_THROWS_AS(complementary({}, 0), std::invalid_argument);
}

TEST_CASE("mis_loss: closed forms and nonnegativity") {
  Tensor p = Tensor::vector({0.2, 0.5, 0.3});
  CHECK(mis_loss(p, p, p) == 0.0);

  Tensor a = Tensor::vector({1.0, 0.0});
  Tensor b = Tensor::vector({0.0, 1.0});
  Tensor m = Tensor::vector({0.5, 0.5});
  CHECK(std::fabs(mis_loss(a, b, m) - 2.0 * std::log(4.0)) <= 1e-9);

  std::mt19937_64 rng(74);
  for (int trial = 0; trial < 1000; ++trial) {
    Tensor x = random_dist(rng, 4), y = random_dist(rng, 4), z = random_dist(rng, 4);
    CHECK(mis_loss(x, y, z) >= -1e-12);
  }
}

TEST_CASE("sample_weight: closed forms and monotonicity") {
  double ent0 = 0.83;
  CHECK(sample_weight(ent0, ent0) == 1.0);
  CHECK(std::fabs(sample_weight(ent0 + 1.0, ent0) - std::exp(-1.0)) <= 1e-12);
  CHECK(std::fabs(sample_weight(ent0 - std::log(2.0), ent0) - 2.0) <= 1e-12);
  double prev = sample_weight(0.0, ent0);
  for (double ent = 0.05; ent <= 3.0; ent += 0.05) {
    double w = sample_weight(ent, ent0);
    CHECK(w < prev);
    CHECK(w > 0.0);
    prev = w;
  }
}

TEST_CASE("graph mis_node matches the host mis_loss bitwise") {
  std::mt19937_64 rng(75);
  for (int trial = 0; trial < 50; ++trial) {
    Tensor pu1 = random_dist(rng, 6), pu2 = random_dist(rng, 6), pm = random_dist(rng, 6);
    Graph g;
    int n1 = g.constant(pu1);
    int n2 = g.constant(pu2);
    int nm = g.constant(pm);
    int mis = mis_node(g, n1, n2, nm);
    g.set_output(mis);
    Tensor v = evaluate(g, Bindings{});
    CHECK(v.value() == mis_loss(pu1, pu2, pm));
  }
}

TEST_CASE("AdaptConfig: class- and horizon-dependent defaults") {
  AdaptConfig cfg;
  CHECK(cfg.resolved_gamma_m(8) == 0.4 * std::log(8.0));
  CHECK(cfg.resolved_ent0(8) == 0.4 * std::log(8.0));
  CHECK(cfg.resolved_t0(125) == 62);
  CHECK(std::fabs(cfg.gamma_u - std::exp(-1.0)) <= 1e-15);
  CHECK(cfg.lambda == 5.0);
  CHECK(cfg.beta == 0.6);
  CHECK(cfg.mu == 1.0);
  CHECK_FALSE(cfg.swapped_modalities());

  cfg.gamma_m = 0.9;
  cfg.ent0 = 0.8;
  cfg.t0 = 7;
  CHECK(cfg.resolved_gamma_m(8) == 0.9);
  CHECK(cfg.resolved_ent0(8) == 0.8);
  CHECK(cfg.resolved_t0(125) == 7);

  cfg.modality_order = {"u2", "u1"};
  CHECK(cfg.swapped_modalities());
  cfg.validate();

  AdaptConfig bad;
  bad.beta = 1.5;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = AdaptConfig{};
  bad.lambda = -1.0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = AdaptConfig{};
  bad.modality_order = {"u1", "u1"};
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

namespace {

struct LossFixture {
  model::Model m;
  Graph g;
  std::vector<SampleNodes> nodes;
  selection::SelectionMask mask;

  explicit LossFixture(int batch, uint64_t seed, model::Nonlinearity nonlin)
      : m(make_fixture_model(seed, nonlin)) {
    std::mt19937_64 rng(seed + 1);
    std::normal_distribution<double> n(0.0, 1.0);
    for (int i = 0; i < batch; ++i) {
      Tensor x1(m.spec.dim_u1, 1), x2(m.spec.dim_u2, 1);
      for (int k = 0; k < x1.size(); ++k) x1[k] = n(rng);
      for (int k = 0; k < x2.size(); ++k) x2[k] = n(rng);
      model::ForwardNodes fw = model::build_forward(g, m, x1, x2);
      nodes.push_back(SampleNodes{fw.p_m, fw.p_u1, fw.p_u2});
    }
    mask.selected.assign(static_cast<size_t>(batch), true);
    evaluate(g, Bindings::of(m.params));
  }

  static model::Model make_fixture_model(uint64_t seed, model::Nonlinearity nonlin) {
    model::ModelSpec spec;
    spec.dim_u1 = 5;
    spec.dim_u2 = 4;
    spec.hidden = 7;
    spec.repr = 6;
    spec.classes = 4;
    spec.nonlinearity = nonlin;
    return model::make_model(spec, seed);
  }

  double loss_value(const AdaptConfig& cfg, int t, OodMode mode, int iter) {
    LossNodes loss = total_loss(g, nodes, mask, cfg, t, mode, iter, m.spec.classes);
    evaluate(g, Bindings::of(m.params));
    return g.value(loss.total).value();
  }
};

}  // namespace

TEST_CASE("total_loss: empty selection gives zero loss and zero gradients") {
  LossFixture fx(3, 81, model::Nonlinearity::kRelu);
  fx.mask.selected.assign(3, false);
  AdaptConfig cfg;
  LossNodes loss = total_loss(fx.g, fx.nodes, fx.mask, cfg, 0, OodMode::kWeak, 10,
                              fx.m.spec.classes);
  Tensor v = evaluate(fx.g, Bindings::of(fx.m.params));
  CHECK(v.value() == 0.0);
  GradMap grads = gradient(fx.g, fx.m.params);
  for (const auto& [name, grad] : grads) {
    for (int i = 0; i < grad.size(); ++i) CHECK(grad[i] == 0.0);
  }
  for (double a : loss.alphas) CHECK(a == 0.0);
}

TEST_CASE("total_loss: single sample at ent0 reduces to its entropy") {
  LossFixture fx(1, 82, model::Nonlinearity::kRelu);
  double ent = entropy(fx.g.value(fx.nodes[0].p_m));
  AdaptConfig cfg;
  cfg.lambda = 0.0;
  cfg.ent0 = ent;  // alpha becomes exactly 1
  double loss = fx.loss_value(cfg, 0, OodMode::kWeak, 10);
  CHECK(loss == doctest::Approx(ent).epsilon(1e-15));
}

TEST_CASE("total_loss: wild mode past t0 is bitwise the lambda=0 loss") {
  AdaptConfig with_mis;
  with_mis.lambda = 5.0;
  AdaptConfig no_mis;
  no_mis.lambda = 0.0;

  LossFixture a(4, 83, model::Nonlinearity::kRelu);
  LossFixture b(4, 83, model::Nonlinearity::kRelu);
  int iter = 10;  // t0 resolves to 5
  double gated = a.loss_value(with_mis, 7, OodMode::kWild, iter);
  double lambda_zero = b.loss_value(no_mis, 7, OodMode::kWild, iter);
  CHECK(gated == lambda_zero);

  LossFixture c(4, 83, model::Nonlinearity::kRelu);
  double before_gate = c.loss_value(with_mis, 3, OodMode::kWild, iter);
  CHECK(before_gate != gated);  // MIS term active before t0

  LossFixture d(4, 83, model::Nonlinearity::kRelu);
  double weak = d.loss_value(with_mis, 7, OodMode::kWeak, iter);
  CHECK(weak == before_gate);  // weak mode never gates
}

TEST_CASE("total_loss: use_mis=false behaves as a hard lambda gate") {
  AdaptConfig off;
  off.use_mis = false;
  AdaptConfig zero;
  zero.lambda = 0.0;
  LossFixture a(3, 84, model::Nonlinearity::kRelu);
  LossFixture b(3, 84, model::Nonlinearity::kRelu);
  CHECK(a.loss_value(off, 0, OodMode::kWeak, 10) == b.loss_value(zero, 0, OodMode::kWeak, 10));
}

TEST_CASE("total_loss: duplicating the batch doubles the loss") {
  LossFixture fx(4, 85, model::Nonlinearity::kRelu);
  AdaptConfig cfg;

  // Same forward graph extended with the duplicated sample list.
  LossFixture dup(4, 85, model::Nonlinearity::kRelu);
  std::vector<SampleNodes> twice = dup.nodes;
  twice.insert(twice.end(), dup.nodes.begin(), dup.nodes.end());
  dup.mask.selected.assign(8, true);
  dup.nodes = twice;

  double once_v = fx.loss_value(cfg, 2, OodMode::kWeak, 10);
  double twice_v = dup.loss_value(cfg, 2, OodMode::kWeak, 10);
  CHECK(std::fabs(twice_v - 2.0 * once_v) <= 1e-12 * std::max(1.0, std::fabs(twice_v)));
}

TEST_CASE("total_loss: balance term equals the negative entropy of the mean prediction") {
  LossFixture fx(3, 86, model::Nonlinearity::kRelu);
  AdaptConfig plain;
  plain.lambda = 0.0;
  AdaptConfig balanced = plain;
  balanced.balance_term = true;
  balanced.balance_weight = 2.0;

  double base = fx.loss_value(plain, 0, OodMode::kWeak, 10);

  LossFixture fx2(3, 86, model::Nonlinearity::kRelu);
  double with_balance = fx2.loss_value(balanced, 0, OodMode::kWeak, 10);

  Tensor q(4, 1, 0.0);
  for (const auto& nd : fx.nodes) {
    const Tensor& p = fx.g.value(nd.p_m);
    for (int c = 0; c < 4; ++c) q[c] += p[c];
  }
  for (int c = 0; c < 4; ++c) q[c] /= 3.0;
  double neg_ent = -entropy(q);
  CHECK(std::fabs((with_balance - base) - 2.0 * neg_ent) <= 1e-12);
}

TEST_CASE("total_loss: gradient matches finite differences through MIS and unimodal paths") {
  // tanh keeps the finite-difference oracle away from ReLU kinks.
  for (uint64_t seed : {87ull, 88ull, 89ull}) {
    LossFixture fx(4, seed, model::Nonlinearity::kTanh);
    AdaptConfig cfg;
    cfg.lambda = 5.0;
    cfg.balance_term = (seed % 2 == 0);
    LossNodes loss = total_loss(fx.g, fx.nodes, fx.mask, cfg, 1, OodMode::kWeak, 10,
                                fx.m.spec.classes);
    (void)loss;
    evaluate(fx.g, Bindings::of(fx.m.params));
    GradMap reverse = gradient(fx.g, fx.m.params);
    GradMap fd = numkit::finite_diff_param_gradient(fx.g, fx.m.params, Bindings{}, 1e-5);
    REQUIRE(reverse.size() == 8);
    for (const auto& [name, grad] : reverse) {
      INFO("seed ", seed, " param ", name);
      CHECK(oracles::max_rel_err(grad, fd.at(name)) < 1e-4);
    }
  }
}

TEST_CASE("total_loss: mask size mismatch rejected") {
  LossFixture fx(3, 90, model::Nonlinearity::kRelu);
  fx.mask.selected.assign(2, true);
  AdaptConfig cfg;
  CHECK_THROWS_AS(
      total_loss(fx.g, fx.nodes, fx.mask, cfg, 0, OodMode::kWeak, 10, fx.m.spec.classes),
      std::invalid_argument);
}
