#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "invlearn/error.hpp"
#include "invlearn/loss.hpp"
#include "invlearn/rng.hpp"

namespace invlearn {

/// Tally of strict loss orderings across randomized logistic-regression
/// trials. ascending means L(direct) < L(keep) < L(inverse); descending is
/// the mirror; degenerate trials are those where the candidate step does not
/// move the labeled logit. Anything else is a violation.
struct OrderingReport {
  long trials = 0;
  long ascending_count = 0;
  long descending_count = 0;
  long degenerate_count = 0;
  long violations = 0;
  int dim = 0;
  double alpha = 0.0;
  long batch_size = 1;
};

enum class TrialOutcome { Ascending, Descending, Degenerate, Violation };

inline constexpr double kDegenerateTol = 1e-12;  // |alpha * grad . x| below this is excluded
inline constexpr double kStrictTol = 1e-10;      // minimum gap for a strict ordering

namespace detail {

inline double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace detail

/// Classifies one trial of the single-instance ordering. The dual-loss
/// gradient at the unlabeled instance is (sigmoid(z) - w_pos) * x, so the
/// labeled logit moves by -/+ delta with delta = alpha * upstream * (xu . xl);
/// the losses are evaluated in the exact logit domain.
inline TrialOutcome classify_trial(const std::vector<double>& theta,
                                   const std::vector<double>& x_unlabeled,
                                   const std::vector<double>& x_labeled, int label,
                                   double alpha) {
  const double zu = detail::dot(theta, x_unlabeled);
  const DualWeights w = dual_weights_from_logit(zu);
  const double upstream = sigmoid(zu) - w.w_pos;  // (w_pos + w_neg) sigma - w_pos, sum is 1
  const double delta = alpha * upstream * detail::dot(x_unlabeled, x_labeled);
  if (std::fabs(delta) < kDegenerateTol) return TrialOutcome::Degenerate;

  const double zl = detail::dot(theta, x_labeled);
  const double loss_direct = logloss_from_logit(zl - delta, label);
  const double loss_keep = logloss_from_logit(zl, label);
  const double loss_inverse = logloss_from_logit(zl + delta, label);

  if (loss_direct < loss_keep - kStrictTol && loss_keep < loss_inverse - kStrictTol)
    return TrialOutcome::Ascending;
  if (loss_direct > loss_keep + kStrictTol && loss_keep > loss_inverse + kStrictTol)
    return TrialOutcome::Descending;
  return TrialOutcome::Violation;
}

/// Randomized check of the two-sided strict ordering on the logistic
/// hypothesis: theta and the features are standard Gaussian, the labeled
/// instance gets a random binary label.
inline OrderingReport verify_theorem1(long trials, int dim, double alpha, std::uint64_t seed) {
  if (trials < 1) throw ConfigError("verify_theorem1: trials must be >= 1");
  if (dim < 1) throw ConfigError("verify_theorem1: dim must be >= 1");
  if (alpha == 0.0 || !std::isfinite(alpha))
    throw ConfigError("verify_theorem1: alpha must be finite and nonzero");

  OrderingReport report;
  report.trials = trials;
  report.dim = dim;
  report.alpha = alpha;
  for (long t = 0; t < trials; ++t) {
    Rng rng(derive_seed(seed, 21, static_cast<std::uint64_t>(t)));
    std::vector<double> theta(dim), xu(dim), xl(dim);
    for (auto& v : theta) v = rng.gaussian();
    for (auto& v : xu) v = rng.gaussian();
    for (auto& v : xl) v = rng.gaussian();
    const int label = static_cast<int>(rng.below(2));
    switch (classify_trial(theta, xu, xl, label, alpha)) {
      case TrialOutcome::Ascending: ++report.ascending_count; break;
      case TrialOutcome::Descending: ++report.descending_count; break;
      case TrialOutcome::Degenerate: ++report.degenerate_count; break;
      case TrialOutcome::Violation: ++report.violations; break;
    }
  }
  return report;
}

/// Batch-level extension of the ordering: gradients averaged over a batch of
/// unlabeled instances, losses averaged over a batch of labeled ones. The
/// single-instance guarantee does not cover this; the counts are measured,
/// not asserted.
inline OrderingReport measure_batch_ordering(long trials, int dim, double alpha, long batch_size,
                                             std::uint64_t seed) {
  if (trials < 1) throw ConfigError("measure_batch_ordering: trials must be >= 1");
  if (batch_size < 1) throw ConfigError("measure_batch_ordering: batch_size must be >= 1");
  if (alpha == 0.0 || !std::isfinite(alpha))
    throw ConfigError("measure_batch_ordering: alpha must be finite and nonzero");

  OrderingReport report;
  report.trials = trials;
  report.dim = dim;
  report.alpha = alpha;
  report.batch_size = batch_size;
  const auto bs = static_cast<std::size_t>(batch_size);

  for (long t = 0; t < trials; ++t) {
    Rng rng(derive_seed(seed, 22, static_cast<std::uint64_t>(t)));
    std::vector<double> theta(dim);
    for (auto& v : theta) v = rng.gaussian();

    std::vector<double> grad(dim, 0.0);
    for (std::size_t b = 0; b < bs; ++b) {
      std::vector<double> x(dim);
      for (auto& v : x) v = rng.gaussian();
      const double z = detail::dot(theta, x);
      const double upstream = sigmoid(z) - dual_weights_from_logit(z).w_pos;
      for (int k = 0; k < dim; ++k) grad[k] += upstream * x[k] / static_cast<double>(bs);
    }

    std::vector<std::vector<double>> xs(bs);
    std::vector<int> labels(bs);
    for (std::size_t b = 0; b < bs; ++b) {
      xs[b].resize(dim);
      for (auto& v : xs[b]) v = rng.gaussian();
      labels[b] = static_cast<int>(rng.below(2));
    }
    double ld = 0.0, lk = 0.0, li = 0.0, max_shift = 0.0;
    for (std::size_t b = 0; b < bs; ++b) {
      const double z = detail::dot(theta, xs[b]);
      const double shift = alpha * detail::dot(grad, xs[b]);
      max_shift = std::max(max_shift, std::fabs(shift));
      ld += logloss_from_logit(z - shift, labels[b]) / static_cast<double>(bs);
      lk += logloss_from_logit(z, labels[b]) / static_cast<double>(bs);
      li += logloss_from_logit(z + shift, labels[b]) / static_cast<double>(bs);
    }
    if (max_shift < kDegenerateTol)
      ++report.degenerate_count;
    else if (ld < lk - kStrictTol && lk < li - kStrictTol)
      ++report.ascending_count;
    else if (ld > lk + kStrictTol && lk > li + kStrictTol)
      ++report.descending_count;
    else
      ++report.violations;
  }
  return report;
}

struct WeightIdentityReport {
  double max_sum_deviation = 0.0;   // |w_pos + w_neg - 1|
  double max_form_deviation = 0.0;  // closed form vs literal ratio form
};

/// Checks the closed-form weights against the literal ratio definition on
/// random predictions in [1e-6, 1 - 1e-6].
inline WeightIdentityReport verify_weight_identity(std::size_t samples, std::uint64_t seed) {
  if (samples < 1) throw ConfigError("verify_weight_identity: samples must be >= 1");
  Rng rng(derive_seed(seed, 23));
  WeightIdentityReport report;
  for (std::size_t s = 0; s < samples; ++s) {
    const double pred = 1e-6 + (1.0 - 2e-6) * rng.uniform();
    const DualWeights closed = dual_weights(pred);
    const DualWeights literal = dual_weights_literal(pred);
    report.max_sum_deviation =
        std::max(report.max_sum_deviation, std::fabs(closed.w_pos + closed.w_neg - 1.0));
    report.max_form_deviation =
        std::max({report.max_form_deviation, std::fabs(closed.w_pos - literal.w_pos),
                  std::fabs(closed.w_neg - literal.w_neg)});
  }
  return report;
}

}  // namespace invlearn
