#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <span>
#include <vector>

#include "invlearn/data.hpp"
#include "invlearn/error.hpp"
#include "invlearn/model.hpp"

namespace invlearn {

struct MetricsReport {
  double auc = 0.0;
  double gauc = 0.0;
  double ndcg_at_10 = 0.0;
  double mrr = 0.0;
  int users_evaluated = 0;  // users with both classes (GAUC convention)
  int users_skipped = 0;
};

/// Mann-Whitney AUC with 0.5 credit for ties, via tie-averaged ranks.
inline double auc(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw ShapeError("auc: scores/labels size mismatch");
  const std::size_t n = scores.size();
  std::size_t n_pos = 0;
  for (const int y : labels) n_pos += static_cast<std::size_t>(y == 1);
  const std::size_t n_neg = n - n_pos;
  if (n_pos == 0 || n_neg == 0) throw MetricError("auc: needs both classes");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  double rank_sum_pos = 0.0;
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    const double avg_rank = 0.5 * static_cast<double>(i + 1 + j);  // mean of ranks i+1..j
    for (std::size_t k = i; k < j; ++k)
      if (labels[order[k]] == 1) rank_sum_pos += avg_rank;
    i = j;
  }
  const double np = static_cast<double>(n_pos);
  return (rank_sum_pos - np * (np + 1.0) / 2.0) / (np * static_cast<double>(n_neg));
}

/// One user's scored test interactions.
struct UserEval {
  std::vector<double> scores;
  std::vector<int> labels;
  std::vector<std::int32_t> items;
};

struct GaucResult {
  double value = 0.0;
  int evaluated = 0;
  int skipped = 0;
};

/// Impression-weighted mean of per-user AUC; single-class users are skipped
/// and counted.
inline GaucResult gauc(std::span<const UserEval> users) {
  GaucResult out;
  double weighted = 0.0, weight = 0.0;
  for (const auto& u : users) {
    const std::size_t n_pos = static_cast<std::size_t>(
        std::count(u.labels.begin(), u.labels.end(), 1));
    if (n_pos == 0 || n_pos == u.labels.size()) {
      ++out.skipped;
      continue;
    }
    const double a = auc(u.scores, u.labels);
    weighted += static_cast<double>(u.labels.size()) * a;
    weight += static_cast<double>(u.labels.size());
    ++out.evaluated;
  }
  if (out.evaluated == 0) throw MetricError("gauc: no user has both classes");
  out.value = weighted / weight;
  return out;
}

namespace detail {

// Rank order within one user: score descending, ties broken by item id.
inline std::vector<std::size_t> ranking_order(const UserEval& u) {
  std::vector<std::size_t> order(u.scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (u.scores[a] != u.scores[b]) return u.scores[a] > u.scores[b];
    return u.items[a] < u.items[b];
  });
  return order;
}

}  // namespace detail

/// Mean NDCG@k over users with at least one positive; binary relevance.
inline double ndcg_at_k(std::span<const UserEval> users, int k = 10) {
  double total = 0.0;
  std::size_t evaluated = 0;
  for (const auto& u : users) {
    const auto n_pos = static_cast<std::size_t>(std::count(u.labels.begin(), u.labels.end(), 1));
    if (n_pos == 0) continue;
    const auto order = detail::ranking_order(u);
    double dcg = 0.0;
    const std::size_t top = std::min<std::size_t>(order.size(), static_cast<std::size_t>(k));
    for (std::size_t r = 0; r < top; ++r)
      if (u.labels[order[r]] == 1) dcg += 1.0 / std::log2(static_cast<double>(r) + 2.0);
    double idcg = 0.0;
    for (std::size_t r = 0; r < std::min<std::size_t>(n_pos, static_cast<std::size_t>(k)); ++r)
      idcg += 1.0 / std::log2(static_cast<double>(r) + 2.0);
    total += dcg / idcg;
    ++evaluated;
  }
  if (evaluated == 0) throw MetricError("ndcg: no user has a positive");
  return total / static_cast<double>(evaluated);
}

/// Mean reciprocal rank of the first positive, same eligibility as NDCG.
inline double mrr(std::span<const UserEval> users) {
  double total = 0.0;
  std::size_t evaluated = 0;
  for (const auto& u : users) {
    if (std::count(u.labels.begin(), u.labels.end(), 1) == 0) continue;
    const auto order = detail::ranking_order(u);
    for (std::size_t r = 0; r < order.size(); ++r) {
      if (u.labels[order[r]] == 1) {
        total += 1.0 / static_cast<double>(r + 1);
        break;
      }
    }
    ++evaluated;
  }
  if (evaluated == 0) throw MetricError("mrr: no user has a positive");
  return total / static_cast<double>(evaluated);
}

/// Groups a split by user and scores it under the model.
inline std::vector<UserEval> score_by_user(const ModelParams& m,
                                           std::span<const Interaction> split) {
  const auto preds = forward(m, split);
  std::map<std::int32_t, UserEval> by_user;
  for (std::size_t n = 0; n < split.size(); ++n) {
    auto& u = by_user[split[n].user];
    u.scores.push_back(preds[n]);
    u.labels.push_back(split[n].label);
    u.items.push_back(split[n].item);
  }
  std::vector<UserEval> out;
  out.reserve(by_user.size());
  for (auto& [_, u] : by_user) out.push_back(std::move(u));
  return out;
}

/// Full report on one evaluation split.
inline MetricsReport evaluate(const ModelParams& m, std::span<const Interaction> split,
                              int k = 10) {
  if (split.empty()) throw DataError("evaluate: empty split");
  const auto preds = forward(m, split);
  std::vector<int> labels(split.size());
  for (std::size_t n = 0; n < split.size(); ++n) labels[n] = split[n].label;

  const auto users = score_by_user(m, split);
  const auto g = gauc(users);
  MetricsReport r;
  r.auc = auc(preds, labels);
  r.gauc = g.value;
  r.ndcg_at_10 = ndcg_at_k(users, k);
  r.mrr = mrr(users);
  r.users_evaluated = g.evaluated;
  r.users_skipped = g.skipped;
  return r;
}

/// Validation AUC only; the early-stopping signal.
inline double auc_of(const ModelParams& m, std::span<const Interaction> split) {
  const auto preds = forward(m, split);
  std::vector<int> labels(split.size());
  for (std::size_t n = 0; n < split.size(); ++n) labels[n] = split[n].label;
  return auc(preds, labels);
}

}  // namespace invlearn
