#include "mvrad/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "mvrad/artifacts.hpp"
#include "mvrad/checkpoint.hpp"
#include "mvrad/config.hpp"
#include "mvrad/error.hpp"
#include "mvrad/log.hpp"

namespace mvrad {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct CliOptions {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir;
  std::vector<std::string> sets;
  std::string t1gd, flair, clinical;
  std::optional<std::size_t> threads;
  std::string checkpoint;
  std::string metrics;
  bool quiet = false;
};

ConfigEntries collect_entries(const CliOptions& opt) {
  ConfigEntries entries;
  if (!opt.config_path.empty()) entries = load_config_file(opt.config_path);
  for (const auto& s : opt.sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos || eq == 0) {
      throw Error(ErrorKind::SchemaViolation, "--set expects key=value, got '" + s + "'");
    }
    entries[s.substr(0, eq)] = s.substr(eq + 1);
  }
  if (opt.seed) entries["seed"] = std::to_string(*opt.seed);
  if (!opt.out_dir.empty()) entries["out_dir"] = opt.out_dir;
  if (opt.threads) entries["threads"] = std::to_string(*opt.threads);
  if (!opt.t1gd.empty()) entries["data.t1gd"] = opt.t1gd;
  if (!opt.flair.empty()) entries["data.flair"] = opt.flair;
  if (!opt.clinical.empty()) entries["data.clinical"] = opt.clinical;
  return entries;
}

struct LoadedCohort {
  Cohort cohort;
  std::optional<std::vector<double>> oracle;
};

LoadedCohort load_cohort(const RunConfig& config) {
  LoadedCohort out;
  if (config.mode == DataMode::Synthetic) {
    SyntheticCohort synth = synth_cohort(config.synth);
    out.oracle = synth.oracle_scores();
    out.cohort = std::move(synth.cohort);
  } else {
    const FeatureTable t1 = load_feature_table(config.t1gd_csv, Modality::T1Gd);
    const FeatureTable fl = load_feature_table(config.flair_csv, Modality::FLAIR);
    const ClinicalTable clin = load_clinical_table(config.clinical_csv);
    out.cohort = align_cohort(t1, fl, clin);
  }
  std::size_t pos = 0;
  for (auto v : out.cohort.y) pos += v;
  log_info("load", {{"mode", config.mode == DataMode::Real ? "real" : "synth"},
                    {"subjects", std::to_string(out.cohort.size())},
                    {"methylated", std::to_string(pos)},
                    {"unmethylated", std::to_string(out.cohort.size() - pos)}});
  return out;
}

fs::path prepare_out_dir(const RunConfig& config) {
  std::error_code ec;
  fs::create_directories(config.out_dir, ec);
  if (ec) throw Error(ErrorKind::IoError, "cannot create " + config.out_dir.string() + ": " + ec.message());
  return config.out_dir;
}

std::string history_csv(const TrainHistory& history) {
  std::ostringstream out;
  out << "epoch,train_total,train_recon_t1gd,train_recon_flair,train_kl_t1gd,train_kl_flair,train_l2,lr,val_loss,"
         "best_val_loss\n";
  char buf[512];
  for (const EpochRecord& e : history.epochs) {
    std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", e.epoch,
                  e.train.total, e.train.reconstruction[0], e.train.reconstruction[1], e.train.kl[0], e.train.kl[1],
                  e.train.l2, e.lr, e.val_loss, e.best_val_loss);
    out << buf;
  }
  return out.str();
}

Matrix row_matrix(const Vector& v) {
  Matrix m(1, v.size());
  m.row(0) = v.transpose();
  return m;
}

Vector row_vector(const Checkpoint& ckpt, const std::string& name) {
  const auto it = ckpt.extras.find(name);
  if (it == ckpt.extras.end() || it->second.rows() != 1) {
    throw Error(ErrorKind::MalformedCsv, "checkpoint lacks preprocessing array " + name);
  }
  return it->second.row(0).transpose();
}

std::string extra_name(const char* kind, std::size_t view) {
  return std::string(kind) + "/" + std::string(modality_name(kModalities[view]));
}

// ---- subcommands -----------------------------------------------------------

int cmd_synth(const RunConfig& config) {
  if (config.mode != DataMode::Synthetic) {
    throw Error(ErrorKind::SchemaViolation, "synth requires synthetic mode (no data.* keys)");
  }
  const fs::path dir = prepare_out_dir(config);
  const SyntheticCohort synth = synth_cohort(config.synth);
  write_feature_table(dir / "t1gd.csv", synth.cohort, Modality::T1Gd);
  write_feature_table(dir / "flair.csv", synth.cohort, Modality::FLAIR);
  write_clinical_table(dir / "clinical.csv", synth.cohort);
  std::ostringstream oracle;
  oracle << "subject_id,oracle_score\n";
  const auto scores = synth.oracle_scores();
  char buf[40];
  for (std::size_t i = 0; i < scores.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g", scores[i]);
    oracle << synth.cohort.subject_ids[i] << ',' << buf << '\n';
  }
  write_text_file(dir / "oracle_scores.csv", oracle.str());
  write_text_file(dir / "config.txt", render_config(config));
  log_info("synth", {{"out_dir", dir.string()}, {"subjects", std::to_string(synth.cohort.size())}});
  return 0;
}

int cmd_run(const RunConfig& config) {
  const auto start = std::chrono::steady_clock::now();
  const LoadedCohort data = load_cohort(config);
  const ExperimentOutcome outcome =
      run_experiment(data.cohort, config.experiment, data.oracle ? &*data.oracle : nullptr);
  const fs::path dir = prepare_out_dir(config);
  const auto files = emit_artifacts(outcome.report, dir);
  write_text_file(dir / "cv_early-fusion-tuned.csv", cv_table_csv(outcome.fusion_search));
  write_text_file(dir / "cv_mvvae-latent.csv", cv_table_csv(outcome.latent_search));
  write_text_file(dir / "vae_history.csv", history_csv(outcome.vae_history));
  write_text_file(dir / "config.txt", render_config(config));
  LogFields fields{{"out_dir", dir.string()}, {"files", std::to_string(files.size() + 4)}};
  for (const auto& m : outcome.report.models) fields.emplace_back(m.name, fmt_double(m.auc));
  fields.emplace_back("seconds", fmt_double(std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count()));
  log_info("run", fields);
  return 0;
}

int cmd_train_vae(const RunConfig& config) {
  const LoadedCohort data = load_cohort(config);
  const PreparedData prepared = prepare_holdout(data.cohort, config.seed, config.experiment.test_fraction);
  VaeStage stage = fit_vae(prepared, config.experiment);
  const fs::path dir = prepare_out_dir(config);
  Checkpoint ckpt;
  ckpt.model = std::move(stage.result.model);
  for (std::size_t v = 0; v < 2; ++v) {
    ckpt.extras[extra_name("median", v)] = row_matrix(prepared.medians[v]);
    ckpt.extras[extra_name("mean", v)] = row_matrix(prepared.norm.mean[v]);
    ckpt.extras[extra_name("stddev", v)] = row_matrix(prepared.norm.stddev[v]);
  }
  save_checkpoint(dir / "vae_checkpoint.txt", ckpt);
  write_text_file(dir / "vae_history.csv", history_csv(stage.result.history));
  log_info("train-vae", {{"out_dir", dir.string()},
                         {"epochs", std::to_string(stage.result.history.epochs.size())},
                         {"best_epoch", std::to_string(stage.result.history.best_epoch)},
                         {"initial_train_loss", fmt_double(stage.result.history.initial_train_loss)},
                         {"final_train_loss", fmt_double(stage.result.history.final_train_loss)}});
  return 0;
}

int cmd_embed(const RunConfig& config, const CliOptions& opt) {
  const fs::path ckpt_path = opt.checkpoint.empty() ? config.out_dir / "vae_checkpoint.txt" : fs::path(opt.checkpoint);
  if (!fs::exists(ckpt_path)) throw Error(ErrorKind::ConfigNotFound, "checkpoint not found: " + ckpt_path.string());
  const Checkpoint ckpt = load_checkpoint(ckpt_path);
  const LoadedCohort data = load_cohort(config);
  Cohort cohort = data.cohort;
  NormStats stats;
  for (std::size_t v = 0; v < 2; ++v) {
    const Vector median = row_vector(ckpt, extra_name("median", v));
    stats.mean[v] = row_vector(ckpt, extra_name("mean", v));
    stats.stddev[v] = row_vector(ckpt, extra_name("stddev", v));
    if (median.size() != cohort.views[v].cols() || stats.mean[v].size() != cohort.views[v].cols() ||
        static_cast<std::size_t>(cohort.views[v].cols()) != ckpt.model.config.input_dims[v]) {
      throw Error(ErrorKind::ShapeMismatch, std::string(modality_name(kModalities[v])) +
                                                " feature count does not match the checkpoint");
    }
    for (Eigen::Index r = 0; r < cohort.views[v].rows(); ++r) {
      for (Eigen::Index c = 0; c < cohort.views[v].cols(); ++c) {
        if (cohort.missing[v](r, c)) cohort.views[v](r, c) = median[c];
      }
    }
    cohort.missing[v].setConstant(false);
  }
  const Cohort normalised = zscore_apply(cohort, stats);
  RowIndex all(normalised.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  const Matrix z = embed(ckpt.model, normalised, all);

  const fs::path dir = prepare_out_dir(config);
  std::ostringstream out;
  out << "subject_id,mgmt";
  const std::size_t half = static_cast<std::size_t>(z.cols()) / 2;
  for (std::size_t v = 0; v < 2; ++v) {
    for (std::size_t j = 0; j < half; ++j) out << ',' << modality_name(kModalities[v]) << "_mu" << j;
  }
  out << '\n';
  char buf[40];
  for (Eigen::Index r = 0; r < z.rows(); ++r) {
    out << normalised.subject_ids[static_cast<std::size_t>(r)] << ','
        << static_cast<int>(normalised.y[static_cast<std::size_t>(r)]);
    for (Eigen::Index c = 0; c < z.cols(); ++c) {
      std::snprintf(buf, sizeof buf, "%.17g", z(r, c));
      out << ',' << buf;
    }
    out << '\n';
  }
  write_text_file(dir / "embeddings.csv", out.str());
  log_info("embed", {{"out_dir", dir.string()}, {"rows", std::to_string(z.rows())}, {"dims", std::to_string(z.cols())}});
  return 0;
}

int cmd_grid_search(const RunConfig& config) {
  const LoadedCohort data = load_cohort(config);
  const PreparedData prepared = prepare_holdout(data.cohort, config.seed, config.experiment.test_fraction);
  const GridSearchResult result = search_fusion(prepared, config.experiment);
  const fs::path dir = prepare_out_dir(config);
  write_text_file(dir / "cv_table.csv", cv_table_csv(result));
  json best = rf_config_json(result.best);
  const json summary{{"best_config_id", result.best_id},
                     {"best_mean_auc", result.best_mean_auc},
                     {"configs", result.configs.size()},
                     {"fits", result.fits.size()},
                     {"folds", result.folds},
                     {"best", best}};
  write_text_file(dir / "grid_best.json", dump_json(summary));
  return 0;
}

int cmd_report(const CliOptions& opt) {
  ConfigEntries entries;
  if (!opt.config_path.empty()) entries = load_config_file(opt.config_path);
  fs::path out_dir = "out";
  if (auto it = entries.find("out_dir"); it != entries.end()) out_dir = it->second;
  if (!opt.out_dir.empty()) out_dir = opt.out_dir;
  const fs::path metrics = opt.metrics.empty() ? out_dir / "metrics.json" : fs::path(opt.metrics);
  if (!fs::is_regular_file(metrics)) throw Error(ErrorKind::ConfigNotFound, "metrics file not found: " + metrics.string());
  const Report report = load_metrics_json(metrics);
  const auto files = emit_artifacts(report, out_dir);
  log_info("report", {{"out_dir", out_dir.string()}, {"files", std::to_string(files.size())}});
  return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args) {
  CLI::App app{"Multi-view VAE radiomics pipeline for MGMT methylation status", "mvrad"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);
  app.fallthrough();

  CliOptions opt;
  app.add_option("--config", opt.config_path, "flat key=value config file");
  app.add_option("--seed", opt.seed, "experiment seed (overrides the config file)");
  app.add_option("--out-dir", opt.out_dir, "output directory; nothing is written elsewhere");
  app.add_option("--set", opt.sets, "override one config key, e.g. --set vae.beta=0.5")->take_all();
  app.add_option("--t1gd", opt.t1gd, "T1Gd feature CSV (real-data mode)");
  app.add_option("--flair", opt.flair, "FLAIR feature CSV (real-data mode)");
  app.add_option("--clinical", opt.clinical, "clinical CSV with MGMT status (real-data mode)");
  app.add_option("--threads", opt.threads, "worker threads for forest fitting (0 = all cores)");
  app.add_flag("--quiet", opt.quiet, "suppress info log lines");

  auto* synth = app.add_subcommand("synth", "generate a synthetic cohort and write its CSVs");
  auto* run = app.add_subcommand("run", "full five-model experiment with all artifacts");
  auto* train_vae = app.add_subcommand("train-vae", "train the multi-view VAE and save a checkpoint");
  auto* embed_cmd = app.add_subcommand("embed", "embed a cohort with a saved VAE checkpoint");
  embed_cmd->add_option("--checkpoint", opt.checkpoint, "checkpoint file (default <out-dir>/vae_checkpoint.txt)");
  auto* grid = app.add_subcommand("grid-search", "cross-validated forest grid search on early-fused features");
  auto* report = app.add_subcommand("report", "re-render artifacts from an existing metrics.json");
  report->add_option("--metrics", opt.metrics, "metrics file (default <out-dir>/metrics.json)");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : exit_code(ErrorCategory::Config);
  }

  set_log_quiet(opt.quiet);
  try {
    if (report->parsed()) return cmd_report(opt);
    const RunConfig config = resolve_config(collect_entries(opt));
    if (synth->parsed()) return cmd_synth(config);
    if (run->parsed()) return cmd_run(config);
    if (train_vae->parsed()) return cmd_train_vae(config);
    if (embed_cmd->parsed()) return cmd_embed(config, opt);
    if (grid->parsed()) return cmd_grid_search(config);
    return exit_code(ErrorCategory::Internal);
  } catch (const Error& e) {
    log_event("error", "cli", {{"kind", std::string(kind_name(e.kind()))}, {"message", e.what()}});
    return exit_code(e.category());
  } catch (const std::exception& e) {
    log_event("error", "cli", {{"kind", "Unexpected"}, {"message", e.what()}});
    return exit_code(ErrorCategory::Internal);
  }
}

int run_cli(int argc, char** argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run_cli(args);
}

}  // namespace mvrad
