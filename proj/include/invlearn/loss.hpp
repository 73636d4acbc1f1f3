#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "invlearn/error.hpp"

namespace invlearn {

// All predictions live in [kPredClamp, 1 - kPredClamp] so log losses stay finite.
inline constexpr double kPredClamp = 1e-7;

inline double clamp_pred(double p) {
  return std::clamp(p, kPredClamp, 1.0 - kPredClamp);
}

inline double sigmoid(double z) {
  return z >= 0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
}

// log(1 + e^t) without overflow.
inline double softplus(double t) {
  return std::log1p(std::exp(-std::fabs(t))) + std::max(t, 0.0);
}

/// Per-instance soft annotation: weights on the positive and negative label loss.
struct DualWeights {
  double w_pos = 0.0;  // weight on l(pred, 1)
  double w_neg = 0.0;  // weight on l(pred, 0)
};

enum class DenoiseMethod { None, NS, TCE, RCE, IDL, IG };

struct DenoiseConfig {
  DenoiseMethod method = DenoiseMethod::None;
  double tce_max_drop = 0.1;      // final fraction of positives dropped
  long tce_warmup_steps = 10000;  // steps to ramp the drop fraction up
  double rce_beta = 0.25;         // reweight exponent

  void validate() const {
    if (!(tce_max_drop >= 0.0 && tce_max_drop <= 0.5))
      throw ConfigError("tce_max_drop must be in [0, 0.5], got " + std::to_string(tce_max_drop));
    if (!(rce_beta >= 0.0))
      throw ConfigError("rce_beta must be >= 0, got " + std::to_string(rce_beta));
    if (tce_warmup_steps < 0)
      throw ConfigError("tce_warmup_steps must be >= 0");
  }
};

/// Binary cross entropy of a single prediction against a hard label.
inline double logloss(double pred, int label) {
  if (!(pred >= kPredClamp && pred <= 1.0 - kPredClamp))
    throw NumericError("prediction " + std::to_string(pred) + " outside clamp range");
  return label == 1 ? -std::log(pred) : -std::log1p(-pred);
}

// Same loss expressed on the logit; exact for any magnitude, no clamping.
inline double logloss_from_logit(double z, int label) {
  return label == 1 ? softplus(-z) : softplus(z);
}

// Closed form of the dual annotation weights. With a = l(pred,1) and
// b = l(pred,0), substituting the normalization z_w = b/a + a/b into the
// ratio definition collapses to w_pos = b^2/(a^2+b^2), w_neg = a^2/(a^2+b^2),
// so the pair always sums to one. The literal ratio form below is kept as an
// independent route for the numeric verifier.
inline DualWeights dual_weights(double pred) {
  const double a = logloss(pred, 1);
  const double b = logloss(pred, 0);
  const double denom = a * a + b * b;
  return {b * b / denom, a * a / denom};
}

// Literal ratio form of the definition; verification route only.
inline DualWeights dual_weights_literal(double pred) {
  const double a = logloss(pred, 1);
  const double b = logloss(pred, 0);
  const double z_w = b / a + a / b;
  return {b / (z_w * a), a / (z_w * b)};
}

// Logit-domain variant; robust when the prediction saturates in double.
inline DualWeights dual_weights_from_logit(double z) {
  const double a = softplus(-z);
  const double b = softplus(z);
  const double denom = a * a + b * b;
  return {b * b / denom, a * a / denom};
}

/// Mean dual loss over a batch of predictions; the returned weights are the
/// per-instance soft annotations (they are constants under differentiation).
inline std::pair<double, std::vector<DualWeights>> dual_loss(std::span<const double> preds) {
  if (preds.empty()) throw DataError("dual_loss: empty batch");
  std::vector<DualWeights> weights(preds.size());
  double total = 0.0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    weights[i] = dual_weights(preds[i]);
    total += weights[i].w_pos * logloss(preds[i], 1) + weights[i].w_neg * logloss(preds[i], 0);
  }
  return {total / static_cast<double>(preds.size()), std::move(weights)};
}

inline double tce_drop_fraction(long step, const DenoiseConfig& cfg) {
  if (cfg.tce_warmup_steps <= 0) return cfg.tce_max_drop;
  const double ramp = std::min(1.0, static_cast<double>(step) / static_cast<double>(cfg.tce_warmup_steps));
  return cfg.tce_max_drop * ramp;
}

/// Truncated cross entropy: drops the highest-loss fraction of the positive
/// instances (ramped up over the warmup), then averages over what remains.
inline double truncated_ce(std::span<const double> preds, std::span<const int> labels,
                           long step, const DenoiseConfig& cfg) {
  if (preds.empty()) throw DataError("truncated_ce: empty batch");
  if (preds.size() != labels.size()) throw ShapeError("truncated_ce: preds/labels size mismatch");
  const double drop = tce_drop_fraction(step, cfg);

  std::vector<double> pos_losses;
  double neg_total = 0.0;
  std::size_t neg_count = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const double l = logloss(preds[i], labels[i]);
    if (labels[i] == 1)
      pos_losses.push_back(l);
    else {
      neg_total += l;
      ++neg_count;
    }
  }
  const auto k_drop = static_cast<std::size_t>(
      std::floor(drop * static_cast<double>(pos_losses.size()) + 1e-12));
  std::sort(pos_losses.begin(), pos_losses.end());
  double total = neg_total;
  std::size_t kept = neg_count;
  for (std::size_t i = 0; i + k_drop < pos_losses.size(); ++i) {
    total += pos_losses[i];
    ++kept;
  }
  return total / static_cast<double>(kept);
}

/// Reweighted cross entropy: instance weight pred^beta for positives and
/// (1-pred)^beta for negatives, so confidently-wrong instances count less.
inline double reweighted_ce(std::span<const double> preds, std::span<const int> labels,
                            const DenoiseConfig& cfg) {
  if (preds.empty()) throw DataError("reweighted_ce: empty batch");
  if (preds.size() != labels.size()) throw ShapeError("reweighted_ce: preds/labels size mismatch");
  double total = 0.0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const double w = labels[i] == 1 ? std::pow(preds[i], cfg.rce_beta)
                                    : std::pow(1.0 - preds[i], cfg.rce_beta);
    total += w * logloss(preds[i], labels[i]);
  }
  return total / static_cast<double>(preds.size());
}

// Gradient-side weight builders for the denoising baselines. Both express the
// instance weighting as (w_pos, w_neg) pairs on the true label so the same
// weighted backward path serves every loss. The truncation weights carry a
// kept-count renormalization because the truncated loss averages over the
// retained instances only.
inline std::vector<DualWeights> tce_instance_weights(std::span<const double> preds,
                                                     std::span<const int> labels, long step,
                                                     const DenoiseConfig& cfg) {
  if (preds.size() != labels.size()) throw ShapeError("tce_instance_weights: size mismatch");
  const std::size_t n = preds.size();
  const double drop = tce_drop_fraction(step, cfg);

  std::vector<std::size_t> pos_idx;
  for (std::size_t i = 0; i < n; ++i)
    if (labels[i] == 1) pos_idx.push_back(i);
  const auto k_drop = static_cast<std::size_t>(
      std::floor(drop * static_cast<double>(pos_idx.size()) + 1e-12));
  // highest-loss positives are the lowest-prediction ones
  std::sort(pos_idx.begin(), pos_idx.end(),
            [&](std::size_t a, std::size_t b) { return preds[a] < preds[b]; });

  std::vector<bool> dropped(n, false);
  for (std::size_t i = 0; i < k_drop; ++i) dropped[pos_idx[i]] = true;
  const double kept = static_cast<double>(n - k_drop);
  const double scale = static_cast<double>(n) / kept;

  std::vector<DualWeights> w(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (dropped[i]) continue;
    if (labels[i] == 1)
      w[i].w_pos = scale;
    else
      w[i].w_neg = scale;
  }
  return w;
}

inline std::vector<DualWeights> rce_instance_weights(std::span<const double> preds,
                                                     std::span<const int> labels,
                                                     const DenoiseConfig& cfg) {
  if (preds.size() != labels.size()) throw ShapeError("rce_instance_weights: size mismatch");
  std::vector<DualWeights> w(preds.size());
  for (std::size_t i = 0; i < preds.size(); ++i) {
    if (labels[i] == 1)
      w[i].w_pos = std::pow(preds[i], cfg.rce_beta);
    else
      w[i].w_neg = std::pow(1.0 - preds[i], cfg.rce_beta);
  }
  return w;
}

}  // namespace invlearn
