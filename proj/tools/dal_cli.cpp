// Command-line driver: dataset generation, ablation training, evaluation,
// gradient checking and correlation probing.
//
// Exit codes: 0 success, 1 check failure, 2 config error, 3 training
// failure, 4 I/O or shape error.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "dal/config.hpp"
#include "dal/eval.hpp"
#include "dal/gradcheck_suite.hpp"
#include "dal/model_io.hpp"
#include "dal/synthetic.hpp"
#include "dal/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitCheckFailure = 1;
constexpr int kExitConfigError = 2;
constexpr int kExitTrainFailure = 3;
constexpr int kExitIoError = 4;

constexpr const char* kVersion = "dal 0.1.0";

struct CommonOpts {
  std::string config_path;
  std::string data_path;
  std::string out_path;
  std::string ckpt_path;
  std::optional<std::uint64_t> seed;
  std::string mode;
};

dal::RunConfig load_run_config(const CommonOpts& opts) {
  dal::RunConfig cfg =
      opts.config_path.empty() ? dal::RunConfig{} : dal::parse_config_file(opts.config_path);
  if (opts.seed) cfg.train.seed = *opts.seed;
  if (!opts.mode.empty()) {
    const auto m = dal::parse_mode(opts.mode);
    if (!m) throw dal::ConfigError("unknown mode '" + opts.mode + "'");
    cfg.train.mode = *m;
  }
  return cfg;
}

dal::Dataset load_data(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open dataset " + path);
  return dal::load_dataset(in);
}

void write_atomic(const fs::path& path, const std::string& contents) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + tmp.string() + " for writing");
    out << contents;
  }
  fs::rename(tmp, path);
}

json config_snapshot(const dal::RunConfig& cfg) {
  std::ostringstream ss;
  dal::write_config(cfg, ss);
  json j = json::object();
  std::istringstream in(ss.str());
  std::string line;
  while (std::getline(in, line)) {
    const auto eq = line.find(" = ");
    if (eq != std::string::npos) j[line.substr(0, eq)] = line.substr(eq + 3);
  }
  return j;
}

int cmd_gen(const CommonOpts& opts) {
  dal::RunConfig cfg;
  try {
    cfg = load_run_config(opts);
  } catch (const dal::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfigError;
  }
  dal::Rng rng(opts.seed.value_or(cfg.train.seed));
  dal::Dataset ds = dal::generate(cfg.gen, rng);

  std::ostringstream out;
  dal::dump_dataset(ds, out);
  write_atomic(opts.out_path, out.str());

  std::array<std::size_t, dal::kNumAgeGroups> counts{};
  for (const auto& s : ds.samples) ++counts[s.age_group];
  std::cout << "wrote " << ds.samples.size() << " samples to " << opts.out_path << "\n";
  std::cout << "age group counts:\n";
  static const char* ranges[] = {"0-12",  "13-18", "19-25", "26-35",
                                 "36-45", "46-55", "56-65", ">=66"};
  for (std::size_t g = 0; g < dal::kNumAgeGroups; ++g)
    std::cout << "  " << g << " (" << ranges[g] << "): " << counts[g] << "\n";
  return 0;
}

int cmd_train(const CommonOpts& opts) {
  dal::RunConfig cfg;
  try {
    cfg = load_run_config(opts);
  } catch (const dal::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfigError;
  }

  const auto start = std::chrono::steady_clock::now();
  dal::Dataset ds;
  try {
    ds = load_data(opts.data_path);
  } catch (const std::exception& e) {
    std::cerr << "I/O error: " << e.what() << "\n";
    return kExitIoError;
  }
  cfg.train.model.d_in = ds.spec.d_in;

  fs::create_directories(opts.out_path);
  const fs::path out_dir(opts.out_path);
  const fs::path log_path = out_dir / "train_log.csv";
  const fs::path ckpt_path = out_dir / "model.ckpt";
  const fs::path manifest_path = out_dir / "manifest.json";

  dal::Rng split_rng(cfg.train.seed);
  dal::SplitResult split = dal::split_cross_age(ds.samples, split_rng, cfg.test_fraction);

  std::ofstream log(log_path);
  if (!log) {
    std::cerr << "I/O error: cannot open " << log_path << "\n";
    return kExitIoError;
  }
  log << dal::csv_header() << "\n";

  dal::TrainResult result;
  try {
    result = dal::fit(cfg.train, split.train,
                      [&](const dal::StepLog& row) { log << dal::csv_row(row) << "\n"; });
  } catch (const std::exception& e) {
    log.flush();
    std::cerr << "training failure: " << e.what() << "\n";
    return kExitTrainFailure;
  }
  log.close();

  dal::save_model(result.model, result.cmm, ckpt_path.string());

  const auto elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start);
  json manifest;
  manifest["version"] = kVersion;
  manifest["config"] = config_snapshot(cfg);
  manifest["duration_seconds"] = elapsed.count();
  manifest["outputs"] = {{"log", log_path.string()}, {"checkpoint", ckpt_path.string()}};
  manifest["train_samples"] = split.train.size();
  manifest["probe_pairs"] = split.probe.size();
  write_atomic(manifest_path, manifest.dump(2) + "\n");

  std::cout << "trained " << dal::mode_name(cfg.train.mode) << " for " << cfg.train.epochs
            << " epochs (" << result.log.size() << " iterations)\n";
  return 0;
}

int cmd_eval(const CommonOpts& opts) {
  try {
    auto [model, cmm] = dal::load_model(opts.ckpt_path);
    dal::Dataset ds = load_data(opts.data_path);
    if (ds.spec.d_in != model.cfg.d_in) {
      std::cerr << "shape error: dataset d_in " << ds.spec.d_in
                << " does not match checkpoint backbone input " << model.cfg.d_in << "\n";
      return kExitIoError;
    }
    std::uint64_t seed = opts.seed.value_or(1);
    if (!opts.config_path.empty()) {
      const dal::RunConfig cfg = dal::parse_config_file(opts.config_path);
      if (!opts.seed) seed = cfg.train.seed;
    }
    dal::Rng split_rng(seed);
    dal::SplitResult split = dal::split_cross_age(ds.samples, split_rng);

    dal::EvalReport report = dal::evaluate(model, split.probe, split.gallery, ds.samples);

    fs::create_directories(opts.out_path);
    std::ostringstream text, csv;
    dal::write_report_text(report, text);
    dal::write_report_csv(report, csv);
    write_atomic(fs::path(opts.out_path) / "report.txt", text.str());
    write_atomic(fs::path(opts.out_path) / "report_groups.csv", csv.str());
    std::cout << text.str();
    return 0;
  } catch (const dal::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIoError;
  }
}

int cmd_gradcheck(std::uint64_t seed, bool corrupt_bcca_sign) {
  const auto rows = dal::run_gradcheck(seed, corrupt_bcca_sign);
  std::printf("%-12s %-14s %-10s %s\n", "component", "max_rel_err", "tolerance", "status");
  for (const auto& r : rows) {
    std::printf("%-12s %-14.3e %-10.0e %s\n", r.component.c_str(), r.max_rel_error,
                r.tolerance, r.pass ? "pass" : "FAIL");
  }
  return dal::gradcheck_all_pass(rows) ? 0 : kExitCheckFailure;
}

int cmd_cca_probe(const CommonOpts& opts) {
  try {
    auto [model, cmm] = dal::load_model(opts.ckpt_path);
    dal::Dataset ds = load_data(opts.data_path);
    if (ds.spec.d_in != model.cfg.d_in) {
      std::cerr << "shape error: dataset d_in mismatch with checkpoint backbone\n";
      return kExitIoError;
    }
    dal::Matrix fid = dal::extract_id_features(model, ds.samples);
    dal::Matrix fage = dal::extract_age_features(model, ds.samples);
    dal::ResidualCorrelation closed =
        dal::residual_correlation_features(fid, fage, 1e-5);
    std::cout << "closed_form_max_corr = " << dal::format_double(closed.value) << "\n";
    if (closed.zero_variance) {
      std::cout << "warning: zero-variance feature block, correlation reported 0\n";
      std::cout << "sgd_max_corr = 0\n";
      return 0;
    }
    const double sgd = dal::sgd_max_correlation(fid, fage, 1e-5, 1000, 0.05,
                                                opts.seed.value_or(1));
    std::cout << "sgd_max_corr = " << dal::format_double(sgd) << "\n";
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIoError;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Decorrelated feature factorization trainer"};
  app.require_subcommand(1);

  CommonOpts opts;
  bool corrupt_bcca_sign = false;
  std::uint64_t gradcheck_seed = 1;

  auto* gen = app.add_subcommand("gen", "Generate a synthetic dataset");
  gen->add_option("--config", opts.config_path, "Config file");
  gen->add_option("--out", opts.out_path, "Output dataset path")->required();
  gen->add_option("--seed", opts.seed, "Seed override");

  auto* train = app.add_subcommand("train", "Train a model");
  train->add_option("--config", opts.config_path, "Config file");
  train->add_option("--data", opts.data_path, "Dataset path")->required();
  train->add_option("--out", opts.out_path, "Output directory")->required();
  train->add_option("--seed", opts.seed, "Seed override");
  train->add_option("--mode", opts.mode, "baseline | plus_age | plus_age_dal");

  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint");
  eval->add_option("--ckpt", opts.ckpt_path, "Checkpoint path")->required();
  eval->add_option("--data", opts.data_path, "Dataset path")->required();
  eval->add_option("--out", opts.out_path, "Output directory")->required();
  eval->add_option("--config", opts.config_path, "Config file (for the split seed)");
  eval->add_option("--seed", opts.seed, "Seed override");

  auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference gradient checks");
  gradcheck->add_option("--seed", gradcheck_seed, "Seed");
  gradcheck->add_flag("--corrupt-bcca-sign", corrupt_bcca_sign)->group("");  // test hook

  auto* probe = app.add_subcommand("cca-probe", "Residual correlation probe");
  probe->add_option("--ckpt", opts.ckpt_path, "Checkpoint path")->required();
  probe->add_option("--data", opts.data_path, "Dataset path")->required();
  probe->add_option("--seed", opts.seed, "Seed override");

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) return cmd_gen(opts);
    if (train->parsed()) return cmd_train(opts);
    if (eval->parsed()) return cmd_eval(opts);
    if (gradcheck->parsed()) return cmd_gradcheck(gradcheck_seed, corrupt_bcca_sign);
    if (probe->parsed()) return cmd_cca_probe(opts);
  } catch (const dal::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIoError;
  }
  return 0;
}
