#pragma once

#include <cmath>
#include <concepts>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "invlearn/data.hpp"
#include "invlearn/error.hpp"
#include "invlearn/loss.hpp"
#include "invlearn/rng.hpp"

namespace invlearn {

enum class ModelKind { GMF, NeuMF, Logistic };

inline const char* to_string(ModelKind k) {
  switch (k) {
    case ModelKind::GMF: return "gmf";
    case ModelKind::NeuMF: return "neumf";
    case ModelKind::Logistic: return "logistic";
  }
  return "?";
}

/// Backbone parameters in one flat buffer. The layout is a pure function of
/// (kind, num_users, num_items, dim, mlp_sizes), so gradient buffers and
/// optimizer moments share the same indexing.
struct ModelParams {
  ModelKind kind = ModelKind::GMF;
  std::int32_t num_users = 0;
  std::int32_t num_items = 0;
  std::int32_t dim = 0;                 // embedding dim, or feature dim for Logistic
  std::vector<std::int32_t> mlp_sizes;  // NeuMF tower widths, input width first
  std::vector<double> values;
};

/// Gradient of one batch loss; shape-identical to its ModelParams.
struct GradientBuffer {
  std::vector<double> values;
};

struct ParamLayout {
  std::size_t user_gmf = 0, item_gmf = 0;
  std::size_t user_mlp = 0, item_mlp = 0;
  std::vector<std::size_t> w_off, b_off;  // per hidden layer
  std::size_t out_w = 0;
  std::size_t out_dim = 0;
  std::size_t total = 0;
};

inline ParamLayout layout_of(const ModelParams& m) {
  ParamLayout L;
  const auto U = static_cast<std::size_t>(m.num_users);
  const auto I = static_cast<std::size_t>(m.num_items);
  const auto d = static_cast<std::size_t>(m.dim);
  switch (m.kind) {
    case ModelKind::GMF:
      L.user_gmf = 0;
      L.item_gmf = U * d;
      L.out_w = (U + I) * d;
      L.out_dim = d;
      L.total = L.out_w + d;
      break;
    case ModelKind::NeuMF: {
      if (m.mlp_sizes.size() < 2 || m.mlp_sizes.front() != 2 * m.dim)
        throw ShapeError("NeuMF tower must start at width 2*dim");
      L.user_gmf = 0;
      L.item_gmf = U * d;
      L.user_mlp = (U + I) * d;
      L.item_mlp = L.user_mlp + U * d;
      std::size_t off = L.item_mlp + I * d;
      for (std::size_t l = 1; l < m.mlp_sizes.size(); ++l) {
        const auto rows = static_cast<std::size_t>(m.mlp_sizes[l]);
        const auto cols = static_cast<std::size_t>(m.mlp_sizes[l - 1]);
        L.w_off.push_back(off);
        off += rows * cols;
        L.b_off.push_back(off);
        off += rows;
      }
      L.out_w = off;
      L.out_dim = d + static_cast<std::size_t>(m.mlp_sizes.back());
      L.total = off + L.out_dim;
      break;
    }
    case ModelKind::Logistic:
      L.out_w = 0;
      L.out_dim = d;
      L.total = d;
      break;
  }
  return L;
}

inline std::vector<std::int32_t> default_neumf_tower(std::int32_t dim) {
  return {2 * dim, dim, std::max<std::int32_t>(dim / 2, 1)};
}

inline ModelParams make_gmf(std::int32_t num_users, std::int32_t num_items, std::int32_t dim,
                            std::uint64_t seed) {
  ModelParams m{ModelKind::GMF, num_users, num_items, dim, {}, {}};
  const ParamLayout L = layout_of(m);
  m.values.resize(L.total);
  Rng rng(seed);
  for (std::size_t i = 0; i < L.out_w; ++i) m.values[i] = 0.01 * rng.gaussian();
  for (std::size_t i = L.out_w; i < L.total; ++i) m.values[i] = 0.1 * rng.gaussian();
  return m;
}

inline ModelParams make_neumf(std::int32_t num_users, std::int32_t num_items, std::int32_t dim,
                              std::uint64_t seed, std::vector<std::int32_t> tower = {}) {
  if (tower.empty()) tower = default_neumf_tower(dim);
  ModelParams m{ModelKind::NeuMF, num_users, num_items, dim, std::move(tower), {}};
  const ParamLayout L = layout_of(m);
  m.values.resize(L.total);
  Rng rng(seed);
  const std::size_t emb_end = L.item_mlp + static_cast<std::size_t>(num_items) * dim;
  for (std::size_t i = 0; i < emb_end; ++i) m.values[i] = 0.01 * rng.gaussian();
  for (std::size_t l = 0; l < L.w_off.size(); ++l) {
    const auto rows = static_cast<std::size_t>(m.mlp_sizes[l + 1]);
    const auto cols = static_cast<std::size_t>(m.mlp_sizes[l]);
    for (std::size_t i = 0; i < rows * cols; ++i) m.values[L.w_off[l] + i] = 0.1 * rng.gaussian();
    // biases start at zero
  }
  for (std::size_t i = 0; i < L.out_dim; ++i) m.values[L.out_w + i] = 0.1 * rng.gaussian();
  return m;
}

inline ModelParams make_logistic(std::int32_t dim, std::uint64_t seed) {
  ModelParams m{ModelKind::Logistic, 0, 0, dim, {}, {}};
  m.values.resize(static_cast<std::size_t>(dim));
  Rng rng(seed);
  for (auto& v : m.values) v = rng.gaussian();
  return m;
}

/// One instance for the logistic-regression hypothesis: explicit features,
/// label -1 when unlabeled.
struct LogisticInstance {
  std::vector<double> x;
  int label = -1;
};

template <class T>
concept UserItemLike = requires(const T& t) {
  { t.user } -> std::convertible_to<std::int32_t>;
  { t.item } -> std::convertible_to<std::int32_t>;
};

namespace detail {

inline void check_ids(const ModelParams& m, std::int32_t u, std::int32_t i) {
  if (u < 0 || u >= m.num_users || i < 0 || i >= m.num_items)
    throw IndexError("pair (" + std::to_string(u) + ", " + std::to_string(i) +
                     ") outside model tables");
}

inline double gmf_logit(const ModelParams& m, const ParamLayout& L, std::int32_t u,
                        std::int32_t i) {
  const double* p = &m.values[L.user_gmf + static_cast<std::size_t>(u) * m.dim];
  const double* q = &m.values[L.item_gmf + static_cast<std::size_t>(i) * m.dim];
  const double* h = &m.values[L.out_w];
  double z = 0.0;
  for (std::int32_t k = 0; k < m.dim; ++k) z += h[k] * p[k] * q[k];
  return z;
}

struct NeumfActs {
  std::vector<std::vector<double>> a;    // a[0] = concat(pm, qm), a[l] = post-ReLU
  std::vector<std::vector<double>> pre;  // pre-activation per hidden layer
};

inline double neumf_logit(const ModelParams& m, const ParamLayout& L, std::int32_t u,
                          std::int32_t i, NeumfActs* acts) {
  const auto d = static_cast<std::size_t>(m.dim);
  const double* pm = &m.values[L.user_mlp + static_cast<std::size_t>(u) * d];
  const double* qm = &m.values[L.item_mlp + static_cast<std::size_t>(i) * d];

  std::vector<std::vector<double>> a(m.mlp_sizes.size());
  std::vector<std::vector<double>> pre(m.mlp_sizes.size() - 1);
  a[0].resize(2 * d);
  for (std::size_t k = 0; k < d; ++k) {
    a[0][k] = pm[k];
    a[0][d + k] = qm[k];
  }
  for (std::size_t l = 1; l < m.mlp_sizes.size(); ++l) {
    const auto rows = static_cast<std::size_t>(m.mlp_sizes[l]);
    const auto cols = static_cast<std::size_t>(m.mlp_sizes[l - 1]);
    const double* W = &m.values[L.w_off[l - 1]];
    const double* b = &m.values[L.b_off[l - 1]];
    pre[l - 1].resize(rows);
    a[l].resize(rows);
    for (std::size_t r = 0; r < rows; ++r) {
      double s = b[r];
      const double* wr = W + r * cols;
      for (std::size_t c = 0; c < cols; ++c) s += wr[c] * a[l - 1][c];
      pre[l - 1][r] = s;
      a[l][r] = s > 0.0 ? s : 0.0;
    }
  }

  const double* pg = &m.values[L.user_gmf + static_cast<std::size_t>(u) * d];
  const double* qg = &m.values[L.item_gmf + static_cast<std::size_t>(i) * d];
  const double* h = &m.values[L.out_w];
  double z = 0.0;
  for (std::size_t k = 0; k < d; ++k) z += h[k] * pg[k] * qg[k];
  const auto& top = a.back();
  for (std::size_t k = 0; k < top.size(); ++k) z += h[d + k] * top[k];

  if (acts) {
    acts->a = std::move(a);
    acts->pre = std::move(pre);
  }
  return z;
}

inline double logistic_logit(const ModelParams& m, const std::vector<double>& x) {
  if (x.size() != m.values.size())
    throw ShapeError("logistic feature dim " + std::to_string(x.size()) + " != " +
                     std::to_string(m.values.size()));
  double z = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) z += m.values[k] * x[k];
  return z;
}

template <UserItemLike P>
inline double logit_one(const ModelParams& m, const ParamLayout& L, const P& e,
                        NeumfActs* acts = nullptr) {
  check_ids(m, e.user, e.item);
  if (m.kind == ModelKind::GMF) return gmf_logit(m, L, e.user, e.item);
  if (m.kind == ModelKind::NeuMF) return neumf_logit(m, L, e.user, e.item, acts);
  throw ShapeError("logistic models score feature batches, not id pairs");
}

}  // namespace detail

/// Predicted probabilities for a batch of (user, item) pairs, clamped to
/// [kPredClamp, 1 - kPredClamp].
template <UserItemLike P>
std::vector<double> forward(const ModelParams& m, std::span<const P> batch) {
  const ParamLayout L = layout_of(m);
  std::vector<double> out(batch.size());
  for (std::size_t n = 0; n < batch.size(); ++n)
    out[n] = clamp_pred(sigmoid(detail::logit_one(m, L, batch[n])));
  return out;
}

inline std::vector<double> forward(const ModelParams& m, std::span<const LogisticInstance> batch) {
  if (m.kind != ModelKind::Logistic)
    throw ShapeError("feature batches require a logistic model");
  std::vector<double> out(batch.size());
  for (std::size_t n = 0; n < batch.size(); ++n)
    out[n] = clamp_pred(sigmoid(detail::logistic_logit(m, batch[n].x)));
  return out;
}

template <class P>
std::vector<double> forward(const ModelParams& m, const std::vector<P>& batch) {
  return forward(m, std::span<const P>(batch));
}

inline GradientBuffer zero_like(const ModelParams& m) {
  return GradientBuffer{std::vector<double>(m.values.size(), 0.0)};
}

namespace detail {

// Accumulates upstream * dz/dtheta for one instance into grad.
template <UserItemLike P>
inline void accumulate_one(const ModelParams& m, const ParamLayout& L, const P& e,
                           double upstream, std::vector<double>& grad) {
  const auto d = static_cast<std::size_t>(m.dim);
  const auto u = static_cast<std::size_t>(e.user);
  const auto i = static_cast<std::size_t>(e.item);
  if (m.kind == ModelKind::GMF) {
    const double* p = &m.values[L.user_gmf + u * d];
    const double* q = &m.values[L.item_gmf + i * d];
    const double* h = &m.values[L.out_w];
    for (std::size_t k = 0; k < d; ++k) {
      grad[L.out_w + k] += upstream * p[k] * q[k];
      grad[L.user_gmf + u * d + k] += upstream * h[k] * q[k];
      grad[L.item_gmf + i * d + k] += upstream * h[k] * p[k];
    }
    return;
  }

  // NeuMF: recompute activations, then backprop through the tower.
  NeumfActs acts;
  neumf_logit(m, L, e.user, e.item, &acts);
  const double* h = &m.values[L.out_w];
  const double* pg = &m.values[L.user_gmf + u * d];
  const double* qg = &m.values[L.item_gmf + i * d];

  // output layer and GMF leg
  const auto& top = acts.a.back();
  for (std::size_t k = 0; k < d; ++k) {
    grad[L.out_w + k] += upstream * pg[k] * qg[k];
    grad[L.user_gmf + u * d + k] += upstream * h[k] * qg[k];
    grad[L.item_gmf + i * d + k] += upstream * h[k] * pg[k];
  }
  for (std::size_t k = 0; k < top.size(); ++k) grad[L.out_w + d + k] += upstream * top[k];

  // delta at the tower output
  const std::size_t layers = m.mlp_sizes.size() - 1;
  std::vector<double> delta(top.size());
  for (std::size_t k = 0; k < top.size(); ++k)
    delta[k] = acts.pre[layers - 1][k] > 0.0 ? upstream * h[d + k] : 0.0;

  for (std::size_t l = layers; l >= 1; --l) {
    const auto rows = static_cast<std::size_t>(m.mlp_sizes[l]);
    const auto cols = static_cast<std::size_t>(m.mlp_sizes[l - 1]);
    const double* W = &m.values[L.w_off[l - 1]];
    for (std::size_t r = 0; r < rows; ++r) {
      grad[L.b_off[l - 1] + r] += delta[r];
      for (std::size_t c = 0; c < cols; ++c)
        grad[L.w_off[l - 1] + r * cols + c] += delta[r] * acts.a[l - 1][c];
    }
    std::vector<double> prev(cols, 0.0);
    for (std::size_t c = 0; c < cols; ++c) {
      double s = 0.0;
      for (std::size_t r = 0; r < rows; ++r) s += W[r * cols + c] * delta[r];
      prev[c] = s;
    }
    if (l >= 2) {
      for (std::size_t c = 0; c < cols; ++c)
        if (acts.pre[l - 2][c] <= 0.0) prev[c] = 0.0;
    } else {
      for (std::size_t k = 0; k < d; ++k) {
        grad[L.user_mlp + u * d + k] += prev[k];
        grad[L.item_mlp + i * d + k] += prev[d + k];
      }
      return;
    }
    delta = std::move(prev);
  }
}

inline void accumulate_one(const ModelParams&, const ParamLayout&, const LogisticInstance& e,
                           double upstream, std::vector<double>& grad) {
  for (std::size_t k = 0; k < e.x.size(); ++k) grad[k] += upstream * e.x[k];
}

// Upstream derivative dL/dz of the per-instance loss through the sigmoid.
// Weighted dual form: (w_pos + w_neg) * pred - w_pos, which reduces to
// pred - label for hard labels. Zero where the clamp is active, consistent
// with the clamped loss being locally flat there.
inline double upstream_weighted(double raw_sigmoid, const DualWeights& w) {
  if (raw_sigmoid < kPredClamp || raw_sigmoid > 1.0 - kPredClamp) return 0.0;
  return (w.w_pos + w.w_neg) * raw_sigmoid - w.w_pos;
}

template <class B>
inline double raw_pred(const ModelParams& m, const ParamLayout& L, const B& e) {
  if constexpr (std::is_same_v<B, LogisticInstance>)
    return sigmoid(logistic_logit(m, e.x));
  else
    return sigmoid(logit_one(m, L, e));
}

}  // namespace detail

/// Gradient of the weighted batch-mean loss
///   (1/n) sum_i w_pos_i * l(pred_i, 1) + w_neg_i * l(pred_i, 0)
/// with the weights held constant (stop-gradient).
template <class B>
GradientBuffer backward(const ModelParams& m, std::span<const B> batch,
                        std::span<const DualWeights> weights) {
  if (batch.empty()) throw DataError("backward: empty batch");
  if (batch.size() != weights.size()) throw ShapeError("backward: weights size mismatch");
  for (const auto& w : weights)
    if (!std::isfinite(w.w_pos) || !std::isfinite(w.w_neg) || w.w_pos < 0.0 || w.w_neg < 0.0)
      throw NumericError("backward: weights must be finite and non-negative");

  const ParamLayout L = layout_of(m);
  GradientBuffer g = zero_like(m);
  const double inv_n = 1.0 / static_cast<double>(batch.size());
  for (std::size_t n = 0; n < batch.size(); ++n) {
    const double raw = detail::raw_pred(m, L, batch[n]);
    const double up = detail::upstream_weighted(raw, weights[n]) * inv_n;
    if (up != 0.0) detail::accumulate_one(m, L, batch[n], up, g.values);
  }
  return g;
}

/// Gradient of the plain batch-mean LogLoss against hard labels.
template <class B>
GradientBuffer backward(const ModelParams& m, std::span<const B> batch,
                        std::span<const int> labels) {
  if (batch.size() != labels.size()) throw ShapeError("backward: labels size mismatch");
  std::vector<DualWeights> w(batch.size());
  for (std::size_t n = 0; n < batch.size(); ++n) {
    if (labels[n] != 0 && labels[n] != 1) throw NumericError("backward: labels must be binary");
    w[n] = labels[n] == 1 ? DualWeights{1.0, 0.0} : DualWeights{0.0, 1.0};
  }
  return backward(m, batch, std::span<const DualWeights>(w));
}

template <class B, class W>
GradientBuffer backward(const ModelParams& m, const std::vector<B>& batch,
                        const std::vector<W>& weights_or_labels) {
  return backward(m, std::span<const B>(batch), std::span<const W>(weights_or_labels));
}

/// theta' = theta - scale * grad, as a fresh parameter set.
inline ModelParams apply_step(const ModelParams& m, const GradientBuffer& grad, double scale) {
  if (!std::isfinite(scale)) throw NumericError("apply_step: scale must be finite");
  if (grad.values.size() != m.values.size())
    throw ShapeError("apply_step: gradient shape mismatch");
  ModelParams out = m;
  for (std::size_t i = 0; i < out.values.size(); ++i) out.values[i] -= scale * grad.values[i];
  return out;
}

/// Batch-mean LogLoss of a labeled batch under the model.
template <class B>
  requires requires(const B& b) { b.label; }
double mean_logloss(const ModelParams& m, std::span<const B> batch) {
  if (batch.empty()) throw DataError("mean_logloss: empty batch");
  const auto preds = forward(m, batch);
  double total = 0.0;
  for (std::size_t n = 0; n < batch.size(); ++n)
    total += logloss(preds[n], static_cast<int>(batch[n].label));
  return total / static_cast<double>(batch.size());
}

template <class B>
double mean_logloss(const ModelParams& m, const std::vector<B>& batch) {
  return mean_logloss(m, std::span<const B>(batch));
}

}  // namespace invlearn
