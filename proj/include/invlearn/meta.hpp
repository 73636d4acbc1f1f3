#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "invlearn/data.hpp"
#include "invlearn/error.hpp"
#include "invlearn/loss.hpp"
#include "invlearn/metrics.hpp"
#include "invlearn/model.hpp"
#include "invlearn/optim.hpp"
#include "invlearn/rng.hpp"

namespace invlearn {

enum class Direction { Direct, Inverse, Pass };

inline const char* to_string(Direction d) {
  switch (d) {
    case Direction::Direct: return "direct";
    case Direction::Inverse: return "inverse";
    case Direction::Pass: return "pass";
  }
  return "?";
}

/// One meta step: which candidate won and the three test losses it was
/// chosen among.
struct StepTrace {
  int epoch = 0;
  int step = 0;
  Direction direction = Direction::Pass;
  double loss_direct = 0.0;
  double loss_keep = 0.0;
  double loss_inverse = 0.0;
  double committed_test_loss = 0.0;
};

struct TrainConfig {
  double gamma = 1e-3;        // learning rate for labeled/test loss
  double alpha = -1.0;        // dual-loss rate; < 0 means alpha_ratio * gamma
  double alpha_ratio = 0.1;
  int batch_size = 1024;
  int embedding_dim = 32;
  double sampling_rate = 1.0;  // unlabeled samples per labeled batch slot
  int pretrain_epochs = 5;
  int meta_epochs = 20;
  int early_stop_patience = 5;
  bool pretrain_each_epoch = false;  // rerun the labeled pass every outer epoch
  std::uint64_t seed = 0;

  double effective_alpha() const { return alpha >= 0.0 ? alpha : alpha_ratio * gamma; }

  void validate() const {
    if (!(gamma > 0.0) || !std::isfinite(gamma)) throw ConfigError("gamma must be positive");
    if (!std::isfinite(effective_alpha()) || effective_alpha() < 0.0)
      throw ConfigError("alpha must be finite and >= 0");
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (embedding_dim < 1) throw ConfigError("embedding_dim must be >= 1");
    if (!(sampling_rate >= 0.0)) throw ConfigError("sampling_rate must be >= 0");
    if (pretrain_epochs < 0 || meta_epochs < 0) throw ConfigError("epoch counts must be >= 0");
    if (early_stop_patience < 1) throw ConfigError("early_stop_patience must be >= 1");
  }
};

/// One unlabeled sample's soft annotation under the incumbent model;
/// oracle_label is -1 when no ground truth is attached.
struct WeightTraceRow {
  int epoch = 0;
  int step = 0;
  double pred = 0.0;
  double w_pos = 0.0;
  double w_neg = 0.0;
  int oracle_label = -1;
};

struct ExploreResult {
  ModelParams chosen;
  StepTrace trace;
  std::vector<double> preds;          // incumbent predictions on the unlabeled batch
  std::vector<DualWeights> weights;   // their soft annotations
};

namespace stream {
inline constexpr std::uint64_t kInit = 11;
inline constexpr std::uint64_t kPretrain = 12;
inline constexpr std::uint64_t kEpochShuffle = 13;
inline constexpr std::uint64_t kUnlabeled = 14;
inline constexpr std::uint64_t kTestBatch = 15;
inline constexpr std::uint64_t kBaselineNs = 16;
}  // namespace stream

/// Explores the dual-loss gradient from the incumbent parameters: builds the
/// direct (theta - alpha*grad) and inverse (theta + alpha*grad) candidates
/// with raw steps, evaluates all three on the held-out test batch, and keeps
/// the strict argmin. Ties within 1e-12 keep the incumbent and record Pass.
/// Neither the incumbent nor any optimizer state is mutated.
template <class UB, class LB>
ExploreResult explore_directions(const ModelParams& params, std::span<const UB> unlabeled,
                                 std::span<const LB> test_batch, const TrainConfig& cfg) {
  if (unlabeled.empty() || test_batch.empty())
    throw DataError("explore_directions: empty batch");
  const double alpha = cfg.effective_alpha();

  ExploreResult res;
  res.preds = forward(params, unlabeled);
  res.weights.resize(res.preds.size());
  for (std::size_t i = 0; i < res.preds.size(); ++i) res.weights[i] = dual_weights(res.preds[i]);
  const GradientBuffer grad = backward(params, unlabeled, std::span<const DualWeights>(res.weights));

  ModelParams direct = raw_step(params, grad, alpha);
  ModelParams inverse = raw_step(params, grad, -alpha);

  const double loss_direct = mean_logloss(direct, test_batch);
  const double loss_keep = mean_logloss(params, test_batch);
  const double loss_inverse = mean_logloss(inverse, test_batch);

  constexpr double tol = 1e-12;
  res.trace.loss_direct = loss_direct;
  res.trace.loss_keep = loss_keep;
  res.trace.loss_inverse = loss_inverse;
  res.trace.committed_test_loss = std::min({loss_direct, loss_keep, loss_inverse});
  if (loss_direct < loss_keep - tol && loss_direct < loss_inverse - tol) {
    res.trace.direction = Direction::Direct;
    res.chosen = std::move(direct);
  } else if (loss_inverse < loss_keep - tol && loss_inverse < loss_direct - tol) {
    res.trace.direction = Direction::Inverse;
    res.chosen = std::move(inverse);
  } else {
    res.trace.direction = Direction::Pass;
    res.chosen = params;
  }
  return res;
}

template <class UB, class LB>
ExploreResult explore_directions(const ModelParams& params, const std::vector<UB>& unlabeled,
                                 const std::vector<LB>& test_batch, const TrainConfig& cfg) {
  return explore_directions(params, std::span<const UB>(unlabeled),
                            std::span<const LB>(test_batch), cfg);
}

namespace detail {

// One shuffled mini-batch pass of Adam on the plain LogLoss.
inline ModelParams labeled_pass(ModelParams params, std::span<const Interaction> data,
                                const TrainConfig& cfg, AdamState& adam, std::uint64_t seed) {
  std::vector<Interaction> shuffled(data.begin(), data.end());
  Rng rng(seed);
  rng.shuffle(shuffled);
  const auto bs = static_cast<std::size_t>(cfg.batch_size);
  for (std::size_t start = 0; start < shuffled.size(); start += bs) {
    const std::size_t end = std::min(start + bs, shuffled.size());
    const std::span<const Interaction> batch(shuffled.data() + start, end - start);
    std::vector<int> labels(batch.size());
    for (std::size_t i = 0; i < batch.size(); ++i) labels[i] = batch[i].label;
    const GradientBuffer g = backward(params, batch, std::span<const int>(labels));
    std::tie(params, adam) = adam_step(params, g, std::move(adam));
  }
  return params;
}

}  // namespace detail

/// Labeled pre-training: pretrain_epochs shuffled passes of mini-batch Adam
/// on the train-train split.
inline ModelParams pretrain(ModelParams params, std::span<const Interaction> train_train,
                            const TrainConfig& cfg, AdamState& adam) {
  if (train_train.empty()) throw DataError("pretrain: empty train_train split");
  for (int epoch = 1; epoch <= cfg.pretrain_epochs; ++epoch)
    params = detail::labeled_pass(std::move(params), train_train, cfg, adam,
                                  derive_seed(cfg.seed, stream::kPretrain, static_cast<std::uint64_t>(epoch)));
  return params;
}

struct EpochResult {
  std::vector<StepTrace> trace;
  std::vector<WeightTraceRow> weight_rows;
};

/// One meta epoch over ceil(|train_train| / batch_size) steps. Each step
/// samples an unlabeled batch and a with-replacement test batch from the
/// train-test split, explores the three candidates (or commits the direct
/// step unconditionally when select_direction is false), then applies one
/// committed Adam step on the test-batch LogLoss.
inline EpochResult ig_epoch(ModelParams& params, AdamState& adam, const DatasetBundle& bundle,
                            const TrainConfig& cfg, int epoch,
                            const GroundTruth* oracle = nullptr, bool select_direction = true) {
  if (bundle.train_train.empty() || bundle.train_test.empty())
    throw DataError("ig_epoch: empty training split");
  const auto bs = static_cast<std::size_t>(cfg.batch_size);
  const std::size_t steps = (bundle.train_train.size() + bs - 1) / bs;
  const auto unlabeled_count =
      static_cast<std::size_t>(std::llround(cfg.sampling_rate * cfg.batch_size));
  if (unlabeled_count < 1)
    throw ConfigError("ig_epoch: sampling_rate * batch_size must be >= 1");

  EpochResult out;
  for (std::size_t t = 0; t < steps; ++t) {
    const auto ue = static_cast<std::uint64_t>(epoch);
    const auto unlabeled =
        sample_unlabeled(bundle.num_users, bundle.num_items, bundle.labeled_index, unlabeled_count,
                         derive_seed(cfg.seed, stream::kUnlabeled, ue, t));
    std::vector<Interaction> test_batch(bs);
    {
      Rng rng(derive_seed(cfg.seed, stream::kTestBatch, ue, t));
      for (auto& e : test_batch)
        e = bundle.train_test[static_cast<std::size_t>(rng.below(bundle.train_test.size()))];
    }

    std::vector<double> preds;
    std::vector<DualWeights> weights;
    if (select_direction) {
      auto res = explore_directions(params, std::span<const UIPair>(unlabeled),
                                    std::span<const Interaction>(test_batch), cfg);
      res.trace.epoch = epoch;
      res.trace.step = static_cast<int>(t);
      out.trace.push_back(res.trace);
      params = std::move(res.chosen);
      preds = std::move(res.preds);
      weights = std::move(res.weights);
    } else {
      preds = forward(params, unlabeled);
      weights.resize(preds.size());
      for (std::size_t i = 0; i < preds.size(); ++i) weights[i] = dual_weights(preds[i]);
      const GradientBuffer g =
          backward(params, std::span<const UIPair>(unlabeled), std::span<const DualWeights>(weights));
      params = raw_step(params, g, cfg.effective_alpha());
    }

    for (std::size_t i = 0; i < unlabeled.size(); ++i) {
      WeightTraceRow row;
      row.epoch = epoch;
      row.step = static_cast<int>(t);
      row.pred = preds[i];
      row.w_pos = weights[i].w_pos;
      row.w_neg = weights[i].w_neg;
      row.oracle_label = oracle ? oracle->label(unlabeled[i].user, unlabeled[i].item) : -1;
      out.weight_rows.push_back(row);
    }

    std::vector<int> labels(test_batch.size());
    for (std::size_t i = 0; i < test_batch.size(); ++i) labels[i] = test_batch[i].label;
    const GradientBuffer g =
        backward(params, std::span<const Interaction>(test_batch), std::span<const int>(labels));
    std::tie(params, adam) = adam_step(params, g, std::move(adam));
  }
  return out;
}

struct TrainResult {
  ModelParams params;
  MetricsReport validation;
  MetricsReport test;
  std::vector<StepTrace> trace;              // one row per meta step (IG only)
  std::vector<WeightTraceRow> weight_trace;  // first and final epoch rows (IDL/IG)
  int epochs_run = 0;
  double best_val_auc = 0.0;
};

namespace detail {

inline void baseline_epoch(ModelParams& params, AdamState& adam,
                           const std::vector<Interaction>& pool, const DatasetBundle& bundle,
                           const TrainConfig& cfg, const DenoiseConfig& dcfg, int epoch,
                           long& global_step) {
  std::vector<Interaction> shuffled = pool;
  Rng rng(derive_seed(cfg.seed, stream::kEpochShuffle, static_cast<std::uint64_t>(epoch)));
  rng.shuffle(shuffled);
  const auto bs = static_cast<std::size_t>(cfg.batch_size);

  std::size_t step_in_epoch = 0;
  for (std::size_t start = 0; start < shuffled.size(); start += bs, ++step_in_epoch) {
    const std::size_t end = std::min(start + bs, shuffled.size());
    std::vector<Interaction> batch(shuffled.begin() + static_cast<std::ptrdiff_t>(start),
                                   shuffled.begin() + static_cast<std::ptrdiff_t>(end));
    if (dcfg.method != DenoiseMethod::None) {
      const auto count =
          static_cast<std::size_t>(std::llround(cfg.sampling_rate * static_cast<double>(batch.size())));
      if (count > 0) {
        const auto sampled = sample_unlabeled(
            bundle.num_users, bundle.num_items, bundle.labeled_index, count,
            derive_seed(cfg.seed, stream::kBaselineNs, static_cast<std::uint64_t>(epoch), step_in_epoch));
        for (const auto& p : sampled) batch.push_back({p.user, p.item, 0});
      }
    }

    std::vector<int> labels(batch.size());
    for (std::size_t i = 0; i < batch.size(); ++i) labels[i] = batch[i].label;

    GradientBuffer g;
    switch (dcfg.method) {
      case DenoiseMethod::TCE: {
        const auto preds = forward(params, batch);
        const auto w = tce_instance_weights(preds, labels, global_step, dcfg);
        g = backward(params, std::span<const Interaction>(batch), std::span<const DualWeights>(w));
        break;
      }
      case DenoiseMethod::RCE: {
        const auto preds = forward(params, batch);
        const auto w = rce_instance_weights(preds, labels, dcfg);
        g = backward(params, std::span<const Interaction>(batch), std::span<const DualWeights>(w));
        break;
      }
      default:
        g = backward(params, std::span<const Interaction>(batch), std::span<const int>(labels));
        break;
    }
    std::tie(params, adam) = adam_step(params, g, std::move(adam));
    ++global_step;
  }
}

}  // namespace detail

/// Full training run for one method on one bundle. Meta methods (IDL, IG)
/// pre-train on train-train and then run meta epochs; the baselines train on
/// the whole training split (train-train plus train-test) for an equal
/// pretrain_epochs + meta_epochs budget. Every method early-stops on
/// validation AUC and reports metrics at the best-validation parameters.
inline TrainResult train(ModelKind backbone, const DatasetBundle& bundle, const TrainConfig& cfg,
                         const DenoiseConfig& dcfg, const GroundTruth* oracle = nullptr) {
  cfg.validate();
  dcfg.validate();
  if (bundle.train_train.empty() || bundle.validation.empty() || bundle.test.empty())
    throw DataError("train: bundle has an empty split");
  const bool meta_method = dcfg.method == DenoiseMethod::IDL || dcfg.method == DenoiseMethod::IG;
  if (meta_method && bundle.train_test.empty())
    throw DataError("train: meta methods need a train-test split");
  if (meta_method && !(cfg.sampling_rate > 0.0))
    throw ConfigError("train: meta methods need sampling_rate > 0");

  ModelParams params;
  const std::uint64_t init_seed = derive_seed(cfg.seed, stream::kInit);
  switch (backbone) {
    case ModelKind::GMF:
      params = make_gmf(bundle.num_users, bundle.num_items, cfg.embedding_dim, init_seed);
      break;
    case ModelKind::NeuMF:
      params = make_neumf(bundle.num_users, bundle.num_items, cfg.embedding_dim, init_seed);
      break;
    case ModelKind::Logistic:
      throw ConfigError("train: logistic backbone scores feature data, not id pairs");
  }
  AdamState adam = make_adam(params, cfg.gamma);

  if (meta_method && !cfg.pretrain_each_epoch)
    params = pretrain(std::move(params), bundle.train_train, cfg, adam);

  std::vector<Interaction> pool;
  if (!meta_method) {
    pool = bundle.train_train;
    pool.insert(pool.end(), bundle.train_test.begin(), bundle.train_test.end());
  }

  const int total_epochs = meta_method ? cfg.meta_epochs : cfg.pretrain_epochs + cfg.meta_epochs;

  TrainResult out;
  ModelParams best = params;
  double best_val = auc_of(params, bundle.validation);
  int bad_epochs = 0;
  long global_step = 0;
  std::vector<WeightTraceRow> first_rows, last_rows;
  int first_epoch_kept = 0;

  for (int epoch = 1; epoch <= total_epochs; ++epoch) {
    out.epochs_run = epoch;
    switch (dcfg.method) {
      case DenoiseMethod::IDL:
      case DenoiseMethod::IG: {
        if (cfg.pretrain_each_epoch)
          params = detail::labeled_pass(
              std::move(params), bundle.train_train, cfg, adam,
              derive_seed(cfg.seed, stream::kPretrain, static_cast<std::uint64_t>(epoch)));
        auto er = ig_epoch(params, adam, bundle, cfg, epoch, oracle,
                           dcfg.method == DenoiseMethod::IG);
        if (dcfg.method == DenoiseMethod::IG)
          out.trace.insert(out.trace.end(), er.trace.begin(), er.trace.end());
        if (first_rows.empty()) {
          first_rows = er.weight_rows;
          first_epoch_kept = epoch;
        }
        last_rows = std::move(er.weight_rows);
        break;
      }
      default:
        detail::baseline_epoch(params, adam, pool, bundle, cfg, dcfg, epoch, global_step);
        break;
    }

    const double val = auc_of(params, bundle.validation);
    if (val > best_val + 1e-12) {
      best_val = val;
      best = params;
      bad_epochs = 0;
    } else if (++bad_epochs >= cfg.early_stop_patience) {
      break;
    }
  }

  out.weight_trace = std::move(first_rows);
  if (out.epochs_run > first_epoch_kept)
    out.weight_trace.insert(out.weight_trace.end(), last_rows.begin(), last_rows.end());

  out.params = std::move(best);
  out.best_val_auc = best_val;
  out.validation = evaluate(out.params, bundle.validation);
  out.test = evaluate(out.params, bundle.test);
  return out;
}

}  // namespace invlearn
