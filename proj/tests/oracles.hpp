// Test-only oracles, kept independent of the implementation paths they
// check: the gradient oracle goes through forward() and logloss() alone,
// the metric oracles enumerate pairs and ranks literally.
#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <vector>

#include "invlearn/loss.hpp"
#include "invlearn/model.hpp"
#include "invlearn/rng.hpp"

namespace oracles {

using invlearn::DualWeights;
using invlearn::GradientBuffer;
using invlearn::ModelParams;

// Weighted batch-mean loss evaluated through the public forward pass.
template <class B>
double batch_loss(const ModelParams& m, const std::vector<B>& batch,
                  const std::vector<DualWeights>& weights) {
  const auto preds = invlearn::forward(m, batch);
  double total = 0.0;
  for (std::size_t i = 0; i < preds.size(); ++i)
    total += weights[i].w_pos * invlearn::logloss(preds[i], 1) +
             weights[i].w_neg * invlearn::logloss(preds[i], 0);
  return total / static_cast<double>(preds.size());
}

// Central finite differences of batch_loss, coordinate by coordinate.
template <class B>
GradientBuffer fd_gradient(const ModelParams& m, const std::vector<B>& batch,
                           const std::vector<DualWeights>& weights, double h = 1e-5) {
  GradientBuffer g{std::vector<double>(m.values.size(), 0.0)};
  ModelParams probe = m;
  for (std::size_t j = 0; j < m.values.size(); ++j) {
    probe.values[j] = m.values[j] + h;
    const double up = batch_loss(probe, batch, weights);
    probe.values[j] = m.values[j] - h;
    const double down = batch_loss(probe, batch, weights);
    probe.values[j] = m.values[j];
    g.values[j] = (up - down) / (2.0 * h);
  }
  return g;
}

// Largest guarded relative error between two gradients.
inline double max_rel_error(const GradientBuffer& a, const GradientBuffer& b) {
  double worst = 0.0;
  for (std::size_t j = 0; j < a.values.size(); ++j) {
    const double denom = std::max({std::fabs(a.values[j]), std::fabs(b.values[j]), 1e-3});
    worst = std::max(worst, std::fabs(a.values[j] - b.values[j]) / denom);
  }
  return worst;
}

// AUC by pair enumeration: wins + half ties over positive-negative pairs.
inline double brute_auc(const std::vector<double>& scores, const std::vector<int>& labels) {
  double numer = 0.0;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (labels[i] != 1) continue;
    for (std::size_t j = 0; j < scores.size(); ++j) {
      if (labels[j] != 0) continue;
      ++pairs;
      if (scores[i] > scores[j])
        numer += 1.0;
      else if (scores[i] == scores[j])
        numer += 0.5;
    }
  }
  return numer / static_cast<double>(pairs);
}

// Rank positions for one user (1-based), score descending, item id ascending
// on ties, by literal selection.
inline std::vector<std::size_t> brute_ranks(const std::vector<double>& scores,
                                            const std::vector<std::int32_t>& items) {
  const std::size_t n = scores.size();
  std::vector<bool> taken(n, false);
  std::vector<std::size_t> rank_of(n, 0);
  for (std::size_t r = 1; r <= n; ++r) {
    std::size_t best = n;
    for (std::size_t i = 0; i < n; ++i) {
      if (taken[i]) continue;
      if (best == n || scores[i] > scores[best] ||
          (scores[i] == scores[best] && items[i] < items[best]))
        best = i;
    }
    taken[best] = true;
    rank_of[best] = r;
  }
  return rank_of;
}

// Single-user NDCG@k from the literal definition.
inline double brute_ndcg(const std::vector<double>& scores, const std::vector<int>& labels,
                         const std::vector<std::int32_t>& items, int k) {
  const auto rank_of = brute_ranks(scores, items);
  double dcg = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (labels[i] == 1 && rank_of[i] <= static_cast<std::size_t>(k))
      dcg += 1.0 / std::log2(static_cast<double>(rank_of[i]) + 1.0);
  const auto n_pos = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 1));
  double idcg = 0.0;
  for (std::size_t r = 1; r <= std::min(n_pos, static_cast<std::size_t>(k)); ++r)
    idcg += 1.0 / std::log2(static_cast<double>(r) + 1.0);
  return dcg / idcg;
}

// Single-user reciprocal rank of the first positive.
inline double brute_rr(const std::vector<double>& scores, const std::vector<int>& labels,
                       const std::vector<std::int32_t>& items) {
  const auto rank_of = brute_ranks(scores, items);
  std::size_t best = scores.size() + 1;
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (labels[i] == 1) best = std::min(best, rank_of[i]);
  return 1.0 / static_cast<double>(best);
}

// Small random models with healthy parameter scales for gradient checks.
inline ModelParams random_model(invlearn::ModelKind kind, invlearn::Rng& rng) {
  const auto U = static_cast<std::int32_t>(2 + rng.below(7));  // <= 8
  const auto I = static_cast<std::int32_t>(2 + rng.below(7));
  const auto d = static_cast<std::int32_t>(1 + rng.below(4));  // <= 4
  ModelParams m;
  switch (kind) {
    case invlearn::ModelKind::GMF: m = invlearn::make_gmf(U, I, d, rng.next()); break;
    case invlearn::ModelKind::NeuMF: m = invlearn::make_neumf(U, I, d, rng.next()); break;
    case invlearn::ModelKind::Logistic: m = invlearn::make_logistic(d, rng.next()); break;
  }
  for (auto& v : m.values) v = 0.5 * rng.gaussian();
  return m;
}

}  // namespace oracles
