#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <limits>
#include <vector>

#include "invlearn/model.hpp"
#include "oracles.hpp"

using namespace invlearn;
using Catch::Approx;

TEST_CASE("GMF forward: frozen values and clamping", "[model]") {
  auto m = make_gmf(2, 2, 1, 1);
  const ParamLayout L = layout_of(m);

  SECTION("zero output weights give 0.5 everywhere") {
    m.values[L.out_w] = 0.0;
    const std::vector<UIPair> batch{{0, 0}, {1, 1}, {0, 1}};
    for (const double p : forward(m, batch)) CHECK(p == 0.5);
  }

  SECTION("d=1, p=2, q=3, h=0.1 gives sigmoid(0.6)") {
    m.values[L.user_gmf] = 2.0;
    m.values[L.item_gmf] = 3.0;
    m.values[L.out_w] = 0.1;
    const std::vector<UIPair> batch{{0, 0}};
    CHECK(forward(m, batch)[0] == Approx(0.6456563062257954).epsilon(1e-14));
  }

  SECTION("saturated logits stay inside the clamp") {
    m.values[L.user_gmf] = 100.0;
    m.values[L.item_gmf] = 100.0;
    m.values[L.out_w] = 100.0;
    const std::vector<UIPair> batch{{0, 0}};
    const double p = forward(m, batch)[0];
    CHECK(p == 1.0 - kPredClamp);
  }

  SECTION("out-of-range ids throw") {
    const std::vector<UIPair> batch{{2, 0}};
    CHECK_THROWS_AS(forward(m, batch), IndexError);
  }
}

TEST_CASE("logistic forward", "[model]") {
  auto m = make_logistic(3, 9);
  for (auto& v : m.values) v = 0.0;
  const std::vector<LogisticInstance> batch{{{1.0, -2.0, 0.5}, -1}, {{4.0, 0.0, 1.0}, -1}};
  for (const double p : forward(m, batch)) CHECK(p == 0.5);

  const std::vector<LogisticInstance> bad{{{1.0, 2.0}, -1}};
  CHECK_THROWS_AS(forward(m, bad), ShapeError);
}

TEST_CASE("forward is pure and repeatable", "[model]") {
  const auto m = make_gmf(6, 5, 3, 4);
  const auto snapshot = m.values;
  const std::vector<UIPair> batch{{0, 0}, {5, 4}, {2, 3}};
  const auto p1 = forward(m, batch);
  const auto p2 = forward(m, batch);
  CHECK(p1 == p2);
  CHECK(m.values == snapshot);
}

TEST_CASE("backward: zero weights and hard-label upstream", "[model]") {
  auto m = make_logistic(2, 3);
  m.values = {0.0, 0.0};

  SECTION("all-zero weights give a zero gradient") {
    const std::vector<LogisticInstance> batch{{{1.0, 2.0}, -1}, {{-1.0, 0.5}, -1}};
    const std::vector<DualWeights> w(2, DualWeights{0.0, 0.0});
    const auto g = backward(m, batch, w);
    for (const double v : g.values) CHECK(v == 0.0);
  }

  SECTION("hard label 1 at pred 0.5 means upstream -0.5") {
    const std::vector<LogisticInstance> batch{{{1.0, 0.0}, 1}};
    const std::vector<int> labels{1};
    const auto g = backward(m, batch, labels);
    CHECK(g.values[0] == Approx(-0.5).epsilon(1e-15));  // (pred - y) * x
    CHECK(g.values[1] == 0.0);
  }

  SECTION("non-finite weights are rejected") {
    const std::vector<LogisticInstance> batch{{{1.0, 0.0}, -1}};
    const std::vector<DualWeights> w{{std::nan(""), 0.5}};
    CHECK_THROWS_AS(backward(m, batch, w), NumericError);
  }
}

TEST_CASE("analytic gradients match central finite differences", "[model]") {
  Rng rng(20240614);
  for (const auto kind : {ModelKind::GMF, ModelKind::NeuMF, ModelKind::Logistic}) {
    for (int trial = 0; trial < 10; ++trial) {
      const auto m = oracles::random_model(kind, rng);
      const auto n = 1 + rng.below(8);

      std::vector<DualWeights> w(n);
      for (auto& ww : w) ww = {rng.uniform(), rng.uniform()};

      GradientBuffer analytic, fd;
      if (kind == ModelKind::Logistic) {
        std::vector<LogisticInstance> batch(n);
        for (auto& e : batch) {
          e.x.resize(static_cast<std::size_t>(m.dim));
          for (auto& v : e.x) v = rng.gaussian();
        }
        analytic = backward(m, batch, w);
        fd = oracles::fd_gradient(m, batch, w);
      } else {
        std::vector<UIPair> batch(n);
        for (auto& e : batch) {
          e.user = static_cast<std::int32_t>(rng.below(static_cast<std::uint64_t>(m.num_users)));
          e.item = static_cast<std::int32_t>(rng.below(static_cast<std::uint64_t>(m.num_items)));
        }
        analytic = backward(m, batch, w);
        fd = oracles::fd_gradient(m, batch, w);
      }
      INFO("kind " << to_string(kind) << " trial " << trial);
      CHECK(oracles::max_rel_error(analytic, fd) < 1e-4);
    }
  }
}

TEST_CASE("apply_step arithmetic and purity", "[model]") {
  ModelParams m = make_logistic(2, 1);
  m.values = {1.0, 2.0};
  GradientBuffer g{{0.5, -1.0}};

  SECTION("scale 0 is the identity") {
    const auto out = apply_step(m, g, 0.0);
    CHECK(out.values == m.values);
  }

  SECTION("frozen arithmetic example") {
    const auto out = apply_step(m, g, 0.1);
    CHECK(out.values[0] == Approx(0.95).epsilon(1e-15));
    CHECK(out.values[1] == Approx(2.1).epsilon(1e-15));
  }

  SECTION("inverse composition returns within 1e-12") {
    const auto there = apply_step(m, g, 0.37);
    const auto back = apply_step(there, g, -0.37);
    for (std::size_t i = 0; i < m.values.size(); ++i)
      CHECK(back.values[i] == Approx(m.values[i]).margin(1e-12));
  }

  SECTION("input is never mutated") {
    const auto snapshot = m.values;
    (void)apply_step(m, g, 0.5);
    CHECK(m.values == snapshot);
  }

  SECTION("shape and scale validation") {
    GradientBuffer bad{{1.0}};
    CHECK_THROWS_AS(apply_step(m, bad, 0.1), ShapeError);
    CHECK_THROWS_AS(apply_step(m, g, std::numeric_limits<double>::infinity()), NumericError);
  }
}

TEST_CASE("NeuMF with a zeroed tower reproduces GMF on shared embeddings", "[model]") {
  const std::int32_t U = 5, I = 6, d = 4;
  const auto gmf = make_gmf(U, I, d, 77);
  auto neumf = make_neumf(U, I, d, 78);
  const ParamLayout Lg = layout_of(gmf);
  const ParamLayout Ln = layout_of(neumf);

  // copy the GMF embeddings and output weights; kill the MLP contribution
  for (std::size_t i = 0; i < static_cast<std::size_t>((U + I) * d); ++i)
    neumf.values[i] = gmf.values[i];
  for (std::size_t l = 0; l < Ln.w_off.size(); ++l) {
    const auto rows = static_cast<std::size_t>(neumf.mlp_sizes[l + 1]);
    const auto cols = static_cast<std::size_t>(neumf.mlp_sizes[l]);
    for (std::size_t i = 0; i < rows * cols; ++i) neumf.values[Ln.w_off[l] + i] = 0.0;
    for (std::size_t i = 0; i < rows; ++i) neumf.values[Ln.b_off[l] + i] = 0.0;
  }
  for (std::int32_t k = 0; k < d; ++k)
    neumf.values[Ln.out_w + static_cast<std::size_t>(k)] =
        gmf.values[Lg.out_w + static_cast<std::size_t>(k)];
  // the MLP half of the output weights multiplies a zero vector; leave it random

  std::vector<UIPair> batch;
  for (std::int32_t u = 0; u < U; ++u)
    for (std::int32_t i = 0; i < I; ++i) batch.push_back({u, i});
  const auto pg = forward(gmf, batch);
  const auto pn = forward(neumf, batch);
  for (std::size_t i = 0; i < batch.size(); ++i) CHECK(pn[i] == Approx(pg[i]).margin(1e-15));
}

TEST_CASE("clamped instances contribute zero gradient", "[model]") {
  auto m = make_logistic(1, 2);
  m.values = {20.0};  // sigmoid(20) > 1 - 1e-7
  const std::vector<LogisticInstance> batch{{{1.0}, 0}};
  const std::vector<int> labels{0};
  const auto g = backward(m, batch, labels);
  CHECK(g.values[0] == 0.0);
}
