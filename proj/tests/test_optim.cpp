#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "invlearn/optim.hpp"

using namespace invlearn;
using Catch::Approx;

TEST_CASE("adam: zero gradient leaves params, advances the step count", "[optim]") {
  const auto m = make_logistic(3, 1);
  auto state = make_adam(m, 0.01);
  const GradientBuffer g{{0.0, 0.0, 0.0}};
  const auto [out, next] = adam_step(m, g, state);
  CHECK(out.values == m.values);
  CHECK(next.step_count == 1);
}

TEST_CASE("adam: first-step magnitude collapses to lr * sign(g)", "[optim]") {
  ModelParams m = make_logistic(2, 1);
  m.values = {0.0, 0.0};
  auto state = make_adam(m, 0.05);
  const GradientBuffer g{{0.4, -1.7}};
  const auto [out, next] = adam_step(m, g, state);
  CHECK(out.values[0] == Approx(-0.05).epsilon(1e-6));
  CHECK(out.values[1] == Approx(0.05).epsilon(1e-6));
}

TEST_CASE("adam: determinism and lr 0 identity", "[optim]") {
  const auto m = make_logistic(4, 7);
  const GradientBuffer g{{0.1, -0.2, 0.3, -0.4}};

  auto s1 = make_adam(m, 0.02);
  auto s2 = make_adam(m, 0.02);
  const auto r1 = adam_step(m, g, s1);
  const auto r2 = adam_step(m, g, s2);
  CHECK(r1.first.values == r2.first.values);
  CHECK(r1.second.first_moment == r2.second.first_moment);

  auto frozen = make_adam(m, 0.0);
  CHECK(adam_step(m, g, frozen).first.values == m.values);
}

TEST_CASE("adam: non-finite gradient refuses the step", "[optim]") {
  const auto m = make_logistic(2, 1);
  const auto state = make_adam(m, 0.01);
  const GradientBuffer g{{1.0, std::numeric_limits<double>::quiet_NaN()}};
  CHECK_THROWS_AS(adam_step(m, g, state), NumericError);
  CHECK(state.step_count == 0);  // caller's state untouched
}

TEST_CASE("raw_step matches apply_step bit for bit and composes to identity", "[optim]") {
  auto m = make_logistic(3, 5);
  const GradientBuffer g{{0.3, -0.6, 0.9}};
  CHECK(raw_step(m, g, 0.13).values == apply_step(m, g, 0.13).values);
  CHECK(raw_step(m, g, 0.0).values == m.values);

  const auto there = raw_step(m, g, -0.02);
  const auto back = raw_step(there, g, 0.02);
  for (std::size_t i = 0; i < m.values.size(); ++i)
    CHECK(back.values[i] == Approx(m.values[i]).margin(1e-12));
}
