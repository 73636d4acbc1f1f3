// Experiment front end: dataset synthesis, training runs over the method
// roster, checkpoint evaluation, multi-seed comparisons, and the numeric
// verifier for the loss-ordering property.

#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "invlearn/invlearn.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct DataOptions {
  std::string dataset_path;
  std::string ground_truth_path;
  int pos_threshold = 4;
  int neg_threshold = 2;
  int synth_users = 300;
  int synth_items = 300;
  int synth_latent_dim = 8;
  double synth_density = 0.05;
  double synth_flip_rate = 0.0;
};

void add_data_options(CLI::App* cmd, DataOptions& d) {
  cmd->add_option("--dataset", d.dataset_path,
                  "Interaction file: `user,item,label` CSV or `user::item::rating::timestamp` "
                  "lines (auto-detected). Omit to train on synthetic data.");
  cmd->add_option("--ground-truth", d.ground_truth_path,
                  "Oracle CSV `user,item,oracle_label` for weight-trace annotation");
  cmd->add_option("--pos-threshold", d.pos_threshold, "Rating >= this becomes label 1")
      ->capture_default_str();
  cmd->add_option("--neg-threshold", d.neg_threshold, "Rating <= this becomes label 0")
      ->capture_default_str();
  cmd->add_option("--synth-users", d.synth_users, "Synthetic grid: users")->capture_default_str();
  cmd->add_option("--synth-items", d.synth_items, "Synthetic grid: items")->capture_default_str();
  cmd->add_option("--synth-latent-dim", d.synth_latent_dim, "Synthetic latent factor dim")
      ->capture_default_str();
  cmd->add_option("--synth-density", d.synth_density, "Fraction of the grid revealed as labels")
      ->capture_default_str();
  cmd->add_option("--synth-flip-rate", d.synth_flip_rate, "Fraction of revealed labels flipped")
      ->capture_default_str();
}

void add_train_options(CLI::App* cmd, invlearn::TrainConfig& cfg, invlearn::DenoiseConfig& dcfg) {
  cmd->add_option("--gamma", cfg.gamma, "Learning rate for labeled/test loss")
      ->capture_default_str();
  cmd->add_option("--alpha", cfg.alpha, "Learning rate for the dual loss (-1: alpha-ratio*gamma)")
      ->capture_default_str();
  cmd->add_option("--alpha-ratio", cfg.alpha_ratio, "alpha as a multiple of gamma")
      ->capture_default_str();
  cmd->add_option("--batch-size", cfg.batch_size, "Mini-batch size")->capture_default_str();
  cmd->add_option("--embedding-dim", cfg.embedding_dim, "Embedding size")->capture_default_str();
  cmd->add_option("--sampling-rate", cfg.sampling_rate,
                  "Unlabeled samples per labeled batch slot")
      ->capture_default_str();
  cmd->add_option("--pretrain-epochs", cfg.pretrain_epochs, "Labeled pre-training epochs")
      ->capture_default_str();
  cmd->add_option("--meta-epochs", cfg.meta_epochs, "Main training epochs")
      ->capture_default_str();
  cmd->add_option("--patience", cfg.early_stop_patience,
                  "Early-stop patience on validation AUC (epochs)")
      ->capture_default_str();
  cmd->add_flag("--pretrain-each-epoch", cfg.pretrain_each_epoch,
                "Rerun the labeled pass before every meta epoch");
  cmd->add_option("--tce-max-drop", dcfg.tce_max_drop, "T-CE: final drop fraction")
      ->capture_default_str();
  cmd->add_option("--tce-warmup-steps", dcfg.tce_warmup_steps, "T-CE: ramp length in steps")
      ->capture_default_str();
  cmd->add_option("--rce-beta", dcfg.rce_beta, "R-CE: reweight exponent")->capture_default_str();
}

bool looks_like_movielens(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw invlearn::IoError("cannot open " + path);
  std::string line;
  while (std::getline(in, line))
    if (!line.empty()) return line.find("::") != std::string::npos;
  throw invlearn::DataError(path + ": empty file");
}

// Builds the bundle (and oracle, when available) for one seed. File-backed
// datasets are re-split 60/20/20 then 90/10 under the seed; synthetic data
// is generated from it.
std::pair<invlearn::DatasetBundle, std::optional<invlearn::GroundTruth>> resolve_data(
    const DataOptions& d, std::uint64_t seed) {
  if (!d.dataset_path.empty()) {
    const auto loaded = looks_like_movielens(d.dataset_path)
                            ? invlearn::load_movielens(d.dataset_path, d.pos_threshold,
                                                       d.neg_threshold)
                            : invlearn::read_interactions_csv(d.dataset_path);
    auto bundle =
        invlearn::make_bundle(loaded.num_users, loaded.num_items, loaded.interactions, seed);
    std::optional<invlearn::GroundTruth> truth;
    if (!d.ground_truth_path.empty())
      truth = invlearn::read_ground_truth_csv(d.ground_truth_path);
    return {std::move(bundle), std::move(truth)};
  }
  auto [bundle, truth] =
      invlearn::generate_synthetic(d.synth_users, d.synth_items, d.synth_latent_dim,
                                   d.synth_density, d.synth_flip_rate, seed);
  return {std::move(bundle), std::move(truth)};
}

int threads_from_env(std::size_t cells) {
  long n = 0;
  if (const char* env = std::getenv("INVLEARN_THREADS")) n = std::strtol(env, nullptr, 10);
  if (n < 1) {
    const unsigned hc = std::thread::hardware_concurrency();
    n = hc == 0 ? 1 : static_cast<long>(hc);
  }
  return static_cast<int>(std::min<std::size_t>(static_cast<std::size_t>(n), cells));
}

int cmd_synth(const DataOptions& d, std::uint64_t seed, const std::string& out_dir) {
  auto [bundle, truth] = invlearn::generate_synthetic(
      d.synth_users, d.synth_items, d.synth_latent_dim, d.synth_density, d.synth_flip_rate, seed);

  std::vector<invlearn::Interaction> all;
  for (const auto* split :
       {&bundle.train_train, &bundle.train_test, &bundle.validation, &bundle.test})
    all.insert(all.end(), split->begin(), split->end());

  fs::create_directories(out_dir);
  const auto data_path = (fs::path(out_dir) / "dataset.csv").string();
  const auto truth_path = (fs::path(out_dir) / "ground_truth.csv").string();
  invlearn::write_interactions_csv(data_path, all);
  invlearn::write_ground_truth_csv(truth_path, truth);

  std::size_t positives = 0, flipped = 0;
  for (const auto& it : all) {
    positives += static_cast<std::size_t>(it.label == 1);
    flipped += static_cast<std::size_t>(it.label != truth.label(it.user, it.item));
  }
  std::cout << "wrote " << data_path << " (" << all.size() << " rows, " << positives
            << " positive, " << flipped << " flipped)\n"
            << "wrote " << truth_path << " ("
            << static_cast<long long>(truth.num_users) * truth.num_items << " rows)\n";
  return 0;
}

int cmd_train(const DataOptions& d, invlearn::ModelKind backbone, invlearn::DenoiseMethod method,
              invlearn::TrainConfig cfg, invlearn::DenoiseConfig dcfg,
              const std::string& out_dir) {
  dcfg.method = method;
  auto [bundle, truth] = resolve_data(d, cfg.seed);
  const auto result =
      invlearn::train(backbone, bundle, cfg, dcfg, truth ? &*truth : nullptr);

  fs::create_directories(out_dir);
  const fs::path dir(out_dir);
  invlearn::write_json((dir / "metrics.json").string(),
                       invlearn::run_report_json(backbone, cfg, dcfg, result));
  invlearn::write_trace_csv((dir / "trace.csv").string(), result.trace);
  invlearn::write_weight_trace_csv((dir / "weight_trace.csv").string(), result.weight_trace,
                                   truth.has_value());
  invlearn::save_checkpoint((dir / "checkpoint.bin").string(), result.params);

  std::cout << invlearn::to_string(method) << "/" << invlearn::to_string(backbone) << " seed "
            << cfg.seed << ": test auc " << result.test.auc << ", gauc " << result.test.gauc
            << ", ndcg@10 " << result.test.ndcg_at_10 << ", mrr " << result.test.mrr << " ("
            << result.epochs_run << " epochs)\n"
            << "artifacts in " << out_dir << "\n";
  return 0;
}

int cmd_eval(const DataOptions& d, const std::string& checkpoint, std::uint64_t seed,
             const std::string& out_path) {
  const auto params = invlearn::load_checkpoint(checkpoint);
  auto [bundle, truth] = resolve_data(d, seed);
  if (params.kind != invlearn::ModelKind::Logistic &&
      (params.num_users != bundle.num_users || params.num_items != bundle.num_items))
    throw invlearn::ShapeError("checkpoint tables do not match the dataset dimensions");

  const json report = {{"schema_version", 1},
                       {"backbone", invlearn::to_string(params.kind)},
                       {"checkpoint", checkpoint},
                       {"seed", seed},
                       {"validation", invlearn::metrics_to_json(
                                          invlearn::evaluate(params, bundle.validation))},
                       {"test", invlearn::metrics_to_json(invlearn::evaluate(params, bundle.test))}};
  if (out_path.empty())
    std::cout << report.dump(2) << "\n";
  else {
    invlearn::write_json(out_path, report);
    std::cout << "wrote " << out_path << "\n";
  }
  return 0;
}

struct CompareCell {
  invlearn::ModelKind backbone;
  invlearn::DenoiseMethod method;
  std::uint64_t seed;
  invlearn::MetricsReport test;
};

int cmd_compare(const DataOptions& d, const std::vector<std::string>& backbones,
                const std::vector<std::string>& methods, const std::vector<std::uint64_t>& seeds,
                invlearn::TrainConfig base_cfg, invlearn::DenoiseConfig base_dcfg,
                const std::string& out_dir) {
  std::vector<CompareCell> cells;
  for (const auto& b : backbones)
    for (const auto& m : methods)
      for (const auto s : seeds)
        cells.push_back({invlearn::backbone_from_string(b), invlearn::method_from_string(m), s, {}});
  if (cells.empty()) throw invlearn::ConfigError("compare: need at least one backbone/method/seed");

  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(cells.size());
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= cells.size()) return;
      try {
        auto cfg = base_cfg;
        cfg.seed = cells[i].seed;
        auto dcfg = base_dcfg;
        dcfg.method = cells[i].method;
        auto [bundle, truth] = resolve_data(d, cfg.seed);
        cells[i].test = invlearn::train(cells[i].backbone, bundle, cfg, dcfg).test;
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const int nthreads = threads_from_env(cells.size());
  std::vector<std::thread> pool;
  for (int t = 0; t < nthreads; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);

  // aggregate rows over seeds, preserving the requested order
  fs::create_directories(out_dir);
  const auto table_path = (fs::path(out_dir) / "comparison.csv").string();
  std::ofstream out(table_path, std::ios::binary);
  if (!out) throw invlearn::IoError("cannot write " + table_path);
  out << "backbone,method,seeds,ndcg10_mean,ndcg10_std,auc_mean,auc_std,gauc_mean,gauc_std,"
         "mrr_mean,mrr_std\n";
  for (const auto& b : backbones)
    for (const auto& m : methods) {
      std::vector<const invlearn::MetricsReport*> runs;
      for (const auto& cell : cells)
        if (cell.backbone == invlearn::backbone_from_string(b) &&
            cell.method == invlearn::method_from_string(m))
          runs.push_back(&cell.test);
      auto stat = [&](auto field) {
        double mean = 0.0;
        for (const auto* r : runs) mean += r->*field;
        mean /= static_cast<double>(runs.size());
        double var = 0.0;
        for (const auto* r : runs) var += (r->*field - mean) * (r->*field - mean);
        return std::pair{mean, std::sqrt(var / static_cast<double>(runs.size()))};
      };
      const auto [ndcg_m, ndcg_s] = stat(&invlearn::MetricsReport::ndcg_at_10);
      const auto [auc_m, auc_s] = stat(&invlearn::MetricsReport::auc);
      const auto [gauc_m, gauc_s] = stat(&invlearn::MetricsReport::gauc);
      const auto [mrr_m, mrr_s] = stat(&invlearn::MetricsReport::mrr);
      out << b << ',' << m << ',' << runs.size() << ',' << ndcg_m << ',' << ndcg_s << ','
          << auc_m << ',' << auc_s << ',' << gauc_m << ',' << gauc_s << ',' << mrr_m << ','
          << mrr_s << '\n';
      std::cout << b << "/" << m << ": auc " << auc_m << " +- " << auc_s << ", gauc " << gauc_m
                << ", ndcg@10 " << ndcg_m << ", mrr " << mrr_m << " over " << runs.size()
                << " seeds\n";
    }
  std::cout << "wrote " << table_path << "\n";
  return 0;
}

int cmd_verify_theorem(long trials, int dim, double alpha, std::uint64_t seed, long batch_size,
                       const std::string& out_path) {
  const auto report = invlearn::verify_theorem1(trials, dim, alpha, seed);
  json j = invlearn::ordering_report_json(report);
  if (batch_size > 1)
    j["batch_measurement"] = invlearn::ordering_report_json(
        invlearn::measure_batch_ordering(trials, dim, alpha, batch_size, seed));
  if (out_path.empty())
    std::cout << j.dump(2) << "\n";
  else {
    invlearn::write_json(out_path, j);
    std::cout << "wrote " << out_path << "\n";
  }
  return report.violations > 0 ? 2 : 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"invlearn: denoising recommendation trainer with inverse dual loss and "
               "meta-learned gradient direction selection"};
  app.require_subcommand(1);
  app.set_config("--config", "", "Read options from an INI/TOML file (flags take precedence)");
  app.allow_config_extras(CLI::config_extras_mode::error);

  DataOptions data;
  invlearn::TrainConfig cfg;
  invlearn::DenoiseConfig dcfg;
  std::string out_dir = "out";
  std::string backbone = "gmf";
  std::string method = "ig";
  std::uint64_t seed = 1;

  auto* synth = app.add_subcommand("synth", "Write a synthetic dataset and its oracle to disk");
  add_data_options(synth, data);
  synth->add_option("--seed", seed, "RNG seed")->capture_default_str();
  synth->add_option("--out-dir", out_dir, "Output directory")->capture_default_str();

  auto* train = app.add_subcommand("train", "Train one method and write metrics/trace artifacts");
  add_data_options(train, data);
  add_train_options(train, cfg, dcfg);
  train->add_option("--method", method, "none|ns|tce|rce|idl|ig")->capture_default_str();
  train->add_option("--backbone", backbone, "gmf|neumf")->capture_default_str();
  train->add_option("--seed", cfg.seed, "RNG seed")->capture_default_str();
  train->add_option("--out-dir", out_dir, "Output directory")->capture_default_str();

  std::string checkpoint, eval_out;
  auto* eval = app.add_subcommand("eval", "Evaluate a saved checkpoint on a dataset");
  add_data_options(eval, data);
  eval->add_option("--checkpoint", checkpoint, "Parameter checkpoint")->required();
  eval->add_option("--seed", seed, "Split seed (must match the training run)")
      ->capture_default_str();
  eval->add_option("--out", eval_out, "Write the report here instead of stdout");

  std::vector<std::string> cmp_backbones{"gmf"};
  std::vector<std::string> cmp_methods{"none", "ns", "idl", "ig"};
  std::vector<std::uint64_t> cmp_seeds{1, 2, 3};
  auto* compare = app.add_subcommand("compare", "Run a (backbone x method x seed) grid");
  add_data_options(compare, data);
  add_train_options(compare, cfg, dcfg);
  compare->add_option("--backbones", cmp_backbones, "Comma-separated backbones")
      ->delimiter(',')
      ->capture_default_str();
  compare->add_option("--methods", cmp_methods, "Comma-separated methods")
      ->delimiter(',')
      ->capture_default_str();
  compare->add_option("--seeds", cmp_seeds, "Comma-separated seeds")
      ->delimiter(',')
      ->capture_default_str();
  compare->add_option("--out-dir", out_dir, "Output directory")->capture_default_str();

  long vt_trials = 10000, vt_batch = 1;
  int vt_dim = 5;
  double vt_alpha = 0.01;
  auto* verify = app.add_subcommand("verify-theorem",
                                    "Check the strict loss ordering of the candidate steps");
  verify->add_option("--trials", vt_trials, "Random trials")->capture_default_str();
  verify->add_option("--dim", vt_dim, "Feature dimension")->capture_default_str();
  verify->add_option("--alpha", vt_alpha, "Candidate step size")->capture_default_str();
  verify->add_option("--seed", seed, "RNG seed")->capture_default_str();
  verify->add_option("--batch-size", vt_batch,
                     "Also measure the batch-level ordering at this batch size")
      ->capture_default_str();
  std::string verify_out;
  verify->add_option("--out", verify_out, "Write the report here instead of stdout");

  CLI11_PARSE(app, argc, argv);

  try {
    if (synth->parsed()) return cmd_synth(data, seed, out_dir);
    if (train->parsed())
      return cmd_train(data, invlearn::backbone_from_string(backbone),
                       invlearn::method_from_string(method), cfg, dcfg, out_dir);
    if (eval->parsed()) return cmd_eval(data, checkpoint, seed, eval_out);
    if (compare->parsed())
      return cmd_compare(data, cmp_backbones, cmp_methods, cmp_seeds, cfg, dcfg, out_dir);
    if (verify->parsed())
      return cmd_verify_theorem(vt_trials, vt_dim, vt_alpha, seed, vt_batch, verify_out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
