#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "mvrad/dataset.hpp"
#include "mvrad/forest.hpp"
#include "mvrad/metrics.hpp"
#include "mvrad/mvvae.hpp"

namespace mvrad {

inline constexpr std::array<std::string_view, 5> kModelNames{
    "unimodal-T1Gd", "unimodal-FLAIR", "early-fusion-default", "early-fusion-tuned", "mvvae-latent"};

inline constexpr std::string_view kVersion = "1.0.0";
inline constexpr int kReportFormat = 1;

/// Library-default forest used by the untuned baselines.
RfConfig baseline_forest_config();

struct ExperimentConfig {
  std::uint64_t seed = 0;
  double test_fraction = kDefaultTestFraction;
  std::size_t cv_folds = 5;
  double vae_val_fraction = 0.2;  ///< share of training rows held out for VAE early stopping
  VaeConfig vae;                  ///< input_dims and seed are filled from the cohort and `seed`
  HyperGrid grid;
  RfConfig baseline = baseline_forest_config();
  std::size_t threads = 0;
};

struct ModelResult {
  std::string name;
  double auc = 0.0;
  RocResult roc;
  nlohmann::json hyperparameters;
  std::size_t feature_dim = 0;
  std::optional<double> cv_mean_auc;

  bool operator==(const ModelResult&) const = default;
};

/// 2-D view of the fused latent space, coloured by a model's predictions.
struct LatentProjection {
  std::string model;
  std::string method = "pca";
  std::vector<std::string> subject_ids;
  Matrix coords;  ///< [n x 2]
  std::vector<double> probability;
  Labels labels;
  std::array<double, 2> variance{};

  bool operator==(const LatentProjection&) const = default;
};

struct Report {
  std::vector<ModelResult> models;
  nlohmann::json seeds;
  nlohmann::json split;
  nlohmann::json config;
  nlohmann::json versions;
  nlohmann::json timing;  ///< wall-clock seconds per stage; the only run-dependent content
  std::optional<double> oracle_auc;
  std::vector<LatentProjection> projections;

  const ModelResult& model(std::string_view name) const;
  bool operator==(const Report&) const = default;
};

/// Everything a run produces, including intermediates the CLI writes out.
struct ExperimentOutcome {
  Report report;
  GridSearchResult fusion_search;
  GridSearchResult latent_search;
  TrainHistory vae_history;
  MvVaeModel vae;
  NormStats norm;
};

/// Holdout split plus train-only preprocessing shared by every pipeline.
struct PreparedData {
  HoldoutSplit split;
  Labels y_train;
  Labels y_test;
  NormStats norm;
  std::array<Vector, 2> medians;  ///< imputation values per view column
  Cohort prepared;                ///< imputed and z-scored, all rows
  std::uint64_t split_seed = 0;
};

/// Splits with derive_seed(seed, 11), requires both classes in each
/// partition, then imputes and z-scores with training-row statistics.
PreparedData prepare_holdout(const Cohort& cohort, std::uint64_t seed, double test_fraction);

struct VaeStage {
  TrainResult result;
  RowIndex fit_rows;
  RowIndex validation_rows;
};

/// Trains the VAE on the training rows of `data`, holding out a stratified
/// `vae_val_fraction` of them for early stopping (seeded by
/// derive_seed(seed, 15)). Falls back to no validation set when that split
/// is impossible.
VaeStage fit_vae(const PreparedData& data, const ExperimentConfig& config);

/// Cross-validated grid search on the early-fusion training matrix, with the
/// same seeds run_experiment uses for the tuned fusion model.
GridSearchResult search_fusion(const PreparedData& data, const ExperimentConfig& config);

/// Column medians over the observed cells of `rows`.
std::array<Vector, 2> column_medians(const Cohort& cohort, const RowIndex& rows);

nlohmann::json rf_config_json(const RfConfig& config);
nlohmann::json experiment_config_json(const ExperimentConfig& config);

/// Five-model comparison on one seeded stratified holdout split. Imputation,
/// z-scoring and the VAE are fitted on training rows only; every model is
/// scored on the same test rows. `oracle_scores`, when given, are per-subject
/// Bayes scores whose test AUC is reported for context.
ExperimentOutcome run_experiment(const Cohort& cohort, const ExperimentConfig& config,
                                 const std::vector<double>* oracle_scores = nullptr);

}  // namespace mvrad
