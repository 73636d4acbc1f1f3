#pragma once

#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "invlearn/data.hpp"
#include "invlearn/error.hpp"
#include "invlearn/meta.hpp"
#include "invlearn/metrics.hpp"
#include "invlearn/model.hpp"
#include "invlearn/theory.hpp"

namespace invlearn {

inline const char* to_string(DenoiseMethod m) {
  switch (m) {
    case DenoiseMethod::None: return "none";
    case DenoiseMethod::NS: return "ns";
    case DenoiseMethod::TCE: return "tce";
    case DenoiseMethod::RCE: return "rce";
    case DenoiseMethod::IDL: return "idl";
    case DenoiseMethod::IG: return "ig";
  }
  return "?";
}

inline DenoiseMethod method_from_string(const std::string& s) {
  if (s == "none") return DenoiseMethod::None;
  if (s == "ns") return DenoiseMethod::NS;
  if (s == "tce") return DenoiseMethod::TCE;
  if (s == "rce") return DenoiseMethod::RCE;
  if (s == "idl") return DenoiseMethod::IDL;
  if (s == "ig") return DenoiseMethod::IG;
  throw ConfigError("unknown method '" + s + "'");
}

inline ModelKind backbone_from_string(const std::string& s) {
  if (s == "gmf") return ModelKind::GMF;
  if (s == "neumf") return ModelKind::NeuMF;
  if (s == "logistic") return ModelKind::Logistic;
  throw ConfigError("unknown backbone '" + s + "'");
}

namespace detail {

// Shortest exact decimal for a double; CSV cells round-trip bit-exactly.
inline std::string fmt_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  double back = 0.0;
  std::sscanf(buf, "%lf", &back);
  if (back == v) {
    for (int prec = 1; prec < 17; ++prec) {
      char shorter[32];
      std::snprintf(shorter, sizeof(shorter), "%.*g", prec, v);
      std::sscanf(shorter, "%lf", &back);
      if (back == v) return shorter;
    }
  }
  return buf;
}

inline std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);  // "\n" endings everywhere
  if (!out) throw IoError("cannot write " + path);
  return out;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// dataset CSV: header `user,item,label`
// ---------------------------------------------------------------------------

inline void write_interactions_csv(const std::string& path,
                                   std::span<const Interaction> interactions) {
  auto out = detail::open_out(path);
  out << "user,item,label\n";
  for (const auto& it : interactions)
    out << it.user << ',' << it.item << ',' << static_cast<int>(it.label) << '\n';
}

inline LoadedRatings read_interactions_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw ParseError(path + ": empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "user,item,label") throw ParseError(path + ": expected header user,item,label");

  LoadedRatings out;
  long line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    long u = 0, i = 0, y = 0;
    char extra = 0;
    if (std::sscanf(line.c_str(), "%ld,%ld,%ld%c", &u, &i, &y, &extra) != 3 || u < 0 || i < 0 ||
        (y != 0 && y != 1))
      throw ParseError(path + ": malformed row at line " + std::to_string(line_no));
    out.interactions.push_back(
        {static_cast<std::int32_t>(u), static_cast<std::int32_t>(i), static_cast<std::int8_t>(y)});
    out.num_users = std::max(out.num_users, static_cast<std::int32_t>(u + 1));
    out.num_items = std::max(out.num_items, static_cast<std::int32_t>(i + 1));
  }
  if (out.interactions.empty()) throw DataError(path + ": no rows");
  return out;
}

// ---------------------------------------------------------------------------
// ground-truth CSV: header `user,item,oracle_label`, full grid
// ---------------------------------------------------------------------------

inline void write_ground_truth_csv(const std::string& path, const GroundTruth& truth) {
  auto out = detail::open_out(path);
  out << "user,item,oracle_label\n";
  for (std::int32_t u = 0; u < truth.num_users; ++u)
    for (std::int32_t i = 0; i < truth.num_items; ++i)
      out << u << ',' << i << ',' << truth.label(u, i) << '\n';
}

inline GroundTruth read_ground_truth_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw ParseError(path + ": empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "user,item,oracle_label")
    throw ParseError(path + ": expected header user,item,oracle_label");

  GroundTruth truth;
  truth.use_table = true;
  long line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    long u = 0, i = 0, y = 0;
    char extra = 0;
    if (std::sscanf(line.c_str(), "%ld,%ld,%ld%c", &u, &i, &y, &extra) != 3 || u < 0 || i < 0 ||
        (y != 0 && y != 1))
      throw ParseError(path + ": malformed row at line " + std::to_string(line_no));
    truth.table[PairSet::key(static_cast<std::int32_t>(u), static_cast<std::int32_t>(i))] =
        static_cast<std::int8_t>(y);
    truth.num_users = std::max(truth.num_users, static_cast<std::int32_t>(u + 1));
    truth.num_items = std::max(truth.num_items, static_cast<std::int32_t>(i + 1));
  }
  return truth;
}

// ---------------------------------------------------------------------------
// parameter checkpoint: small binary header + raw doubles, bit-exact
// ---------------------------------------------------------------------------

inline void save_checkpoint(const std::string& path, const ModelParams& m) {
  auto out = detail::open_out(path);
  const char magic[8] = {'I', 'V', 'L', 'C', 'K', 'P', 'T', '1'};
  out.write(magic, 8);
  const auto kind = static_cast<std::uint8_t>(m.kind);
  out.write(reinterpret_cast<const char*>(&kind), 1);
  auto w32 = [&](std::int32_t v) { out.write(reinterpret_cast<const char*>(&v), 4); };
  w32(m.num_users);
  w32(m.num_items);
  w32(m.dim);
  w32(static_cast<std::int32_t>(m.mlp_sizes.size()));
  for (const auto s : m.mlp_sizes) w32(s);
  const auto count = static_cast<std::uint64_t>(m.values.size());
  out.write(reinterpret_cast<const char*>(&count), 8);
  out.write(reinterpret_cast<const char*>(m.values.data()),
            static_cast<std::streamsize>(count * sizeof(double)));
  if (!out) throw IoError("short write to " + path);
}

inline ModelParams load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, "IVLCKPT1", 8) != 0)
    throw ParseError(path + ": not a checkpoint file");
  std::uint8_t kind = 0;
  in.read(reinterpret_cast<char*>(&kind), 1);
  if (kind > 2) throw ParseError(path + ": unknown model kind");
  auto r32 = [&]() {
    std::int32_t v = 0;
    in.read(reinterpret_cast<char*>(&v), 4);
    return v;
  };
  ModelParams m;
  m.kind = static_cast<ModelKind>(kind);
  m.num_users = r32();
  m.num_items = r32();
  m.dim = r32();
  const std::int32_t n_sizes = r32();
  if (!in || n_sizes < 0 || n_sizes > 64) throw ParseError(path + ": corrupt header");
  m.mlp_sizes.resize(static_cast<std::size_t>(n_sizes));
  for (auto& s : m.mlp_sizes) s = r32();
  std::uint64_t count = 0;
  in.read(reinterpret_cast<char*>(&count), 8);
  if (!in) throw ParseError(path + ": corrupt header");
  m.values.resize(count);
  in.read(reinterpret_cast<char*>(m.values.data()),
          static_cast<std::streamsize>(count * sizeof(double)));
  if (!in) throw ParseError(path + ": truncated values");
  if (count != layout_of(m).total) throw ParseError(path + ": value count does not match header");
  return m;
}

// ---------------------------------------------------------------------------
// trace CSVs
// ---------------------------------------------------------------------------

inline void write_trace_csv(const std::string& path, std::span<const StepTrace> trace) {
  auto out = detail::open_out(path);
  out << "epoch,step,direction,loss_direct,loss_keep,loss_inverse,committed_test_loss\n";
  for (const auto& t : trace)
    out << t.epoch << ',' << t.step << ',' << to_string(t.direction) << ','
        << detail::fmt_double(t.loss_direct) << ',' << detail::fmt_double(t.loss_keep) << ','
        << detail::fmt_double(t.loss_inverse) << ','
        << detail::fmt_double(t.committed_test_loss) << '\n';
}

/// Weight-trace CSV; the oracle column appears only when ground truth was
/// attached to the run.
inline void write_weight_trace_csv(const std::string& path,
                                   std::span<const WeightTraceRow> rows, bool with_oracle) {
  auto out = detail::open_out(path);
  out << (with_oracle ? "epoch,step,pred,w_pos,w_neg,oracle_label\n"
                      : "epoch,step,pred,w_pos,w_neg\n");
  for (const auto& r : rows) {
    out << r.epoch << ',' << r.step << ',' << detail::fmt_double(r.pred) << ','
        << detail::fmt_double(r.w_pos) << ',' << detail::fmt_double(r.w_neg);
    if (with_oracle) out << ',' << r.oracle_label;
    out << '\n';
  }
}

// ---------------------------------------------------------------------------
// JSON reports
// ---------------------------------------------------------------------------

inline nlohmann::json metrics_to_json(const MetricsReport& r) {
  return {{"auc", r.auc},         {"gauc", r.gauc},
          {"ndcg_at_10", r.ndcg_at_10}, {"mrr", r.mrr},
          {"users_evaluated", r.users_evaluated}, {"users_skipped", r.users_skipped}};
}

inline nlohmann::json config_to_json(const TrainConfig& cfg, const DenoiseConfig& dcfg) {
  return {{"gamma", cfg.gamma},
          {"alpha", cfg.effective_alpha()},
          {"alpha_ratio", cfg.alpha_ratio},
          {"batch_size", cfg.batch_size},
          {"embedding_dim", cfg.embedding_dim},
          {"sampling_rate", cfg.sampling_rate},
          {"pretrain_epochs", cfg.pretrain_epochs},
          {"meta_epochs", cfg.meta_epochs},
          {"early_stop_patience", cfg.early_stop_patience},
          {"pretrain_each_epoch", cfg.pretrain_each_epoch},
          {"tce_max_drop", dcfg.tce_max_drop},
          {"tce_warmup_steps", dcfg.tce_warmup_steps},
          {"rce_beta", dcfg.rce_beta}};
}

inline nlohmann::json run_report_json(ModelKind backbone, const TrainConfig& cfg,
                                      const DenoiseConfig& dcfg, const TrainResult& result) {
  return {{"schema_version", 1},
          {"method", to_string(dcfg.method)},
          {"backbone", to_string(backbone)},
          {"seed", cfg.seed},
          {"config", config_to_json(cfg, dcfg)},
          {"epochs_run", result.epochs_run},
          {"best_val_auc", result.best_val_auc},
          {"validation", metrics_to_json(result.validation)},
          {"test", metrics_to_json(result.test)}};
}

inline nlohmann::json ordering_report_json(const OrderingReport& r) {
  return {{"schema_version", 1},
          {"trials", r.trials},
          {"dim", r.dim},
          {"alpha", r.alpha},
          {"batch_size", r.batch_size},
          {"ascending_count", r.ascending_count},
          {"descending_count", r.descending_count},
          {"degenerate_count", r.degenerate_count},
          {"violations", r.violations}};
}

inline void write_json(const std::string& path, const nlohmann::json& j) {
  auto out = detail::open_out(path);
  out << j.dump(2) << '\n';
}

}  // namespace invlearn
