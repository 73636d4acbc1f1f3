#pragma once

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "invlearn/error.hpp"
#include "invlearn/model.hpp"

namespace invlearn {

/// Adam moments for committed updates. Candidate exploration never touches
/// these; it goes through raw_step instead.
struct AdamState {
  std::vector<double> first_moment;
  std::vector<double> second_moment;
  long step_count = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double lr = 1e-3;
};

inline AdamState make_adam(const ModelParams& m, double lr) {
  if (!(lr >= 0.0) || !std::isfinite(lr)) throw ConfigError("adam lr must be finite and >= 0");
  AdamState s;
  s.first_moment.assign(m.values.size(), 0.0);
  s.second_moment.assign(m.values.size(), 0.0);
  s.lr = lr;
  return s;
}

/// Bias-corrected Adam update; returns fresh params and advanced state.
/// A non-finite gradient refuses the step and leaves the state untouched.
inline std::pair<ModelParams, AdamState> adam_step(const ModelParams& m,
                                                   const GradientBuffer& grad, AdamState state) {
  if (grad.values.size() != m.values.size()) throw ShapeError("adam_step: gradient shape mismatch");
  if (state.first_moment.size() != m.values.size())
    throw ShapeError("adam_step: moment shape mismatch");
  for (const double g : grad.values)
    if (!std::isfinite(g)) throw NumericError("adam_step: non-finite gradient entry");

  state.step_count += 1;
  const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step_count));
  const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step_count));
  ModelParams out = m;
  for (std::size_t i = 0; i < out.values.size(); ++i) {
    const double g = grad.values[i];
    state.first_moment[i] = state.beta1 * state.first_moment[i] + (1.0 - state.beta1) * g;
    state.second_moment[i] = state.beta2 * state.second_moment[i] + (1.0 - state.beta2) * g * g;
    const double m_hat = state.first_moment[i] / c1;
    const double v_hat = state.second_moment[i] / c2;
    out.values[i] -= state.lr * m_hat / (std::sqrt(v_hat) + state.eps);
  }
  return {std::move(out), std::move(state)};
}

/// Raw scaled step for candidate exploration; optimizer moments stay put.
inline ModelParams raw_step(const ModelParams& m, const GradientBuffer& grad,
                            double signed_scale) {
  return apply_step(m, grad, signed_scale);
}

}  // namespace invlearn
