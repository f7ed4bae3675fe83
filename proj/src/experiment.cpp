#include "mvrad/experiment.hpp"

#include <algorithm>
#include <chrono>

#include "mvrad/error.hpp"
#include "mvrad/log.hpp"
#include "mvrad/projection.hpp"

namespace mvrad {

using nlohmann::json;

namespace {
constexpr std::uint64_t kSplitStream = 11;
constexpr std::uint64_t kCvStream = 12;
constexpr std::uint64_t kForestStream = 13;
constexpr std::uint64_t kVaeStream = 14;
constexpr std::uint64_t kVaeSplitStream = 15;
}

RfConfig baseline_forest_config() {
  RfConfig c;
  c.n_estimators = 100;
  c.max_depth = std::nullopt;
  c.max_features = MaxFeatures::sqrt();
  c.min_samples_split = 2;
  c.min_samples_leaf = 1;
  c.criterion = Criterion::Gini;
  c.bootstrap = true;
  return c;
}

const ModelResult& Report::model(std::string_view name) const {
  for (const auto& m : models) {
    if (m.name == name) return m;
  }
  throw Error(ErrorKind::InvalidArgument, "report has no model " + std::string(name));
}

json rf_config_json(const RfConfig& c) {
  return json{{"n_estimators", c.n_estimators},
              {"max_depth", format_max_depth(c.max_depth)},
              {"max_features", c.max_features.to_string()},
              {"min_samples_split", c.min_samples_split},
              {"min_samples_leaf", c.min_samples_leaf},
              {"criterion", criterion_name(c.criterion)},
              {"bootstrap", c.bootstrap},
              {"seed", c.seed}};
}

json experiment_config_json(const ExperimentConfig& c) {
  const VaeConfig& v = c.vae;
  json grid{{"n_estimators", c.grid.n_estimators},
            {"max_depth", json::array()},
            {"max_features", json::array()},
            {"min_samples_split", c.grid.min_samples_split},
            {"min_samples_leaf", c.grid.min_samples_leaf},
            {"criterion", criterion_name(c.grid.base.criterion)},
            {"bootstrap", c.grid.base.bootstrap},
            {"size", c.grid.size()}};
  for (const auto& d : c.grid.max_depth) grid["max_depth"].push_back(format_max_depth(d));
  for (const auto& f : c.grid.max_features) grid["max_features"].push_back(f.to_string());
  json baseline = rf_config_json(c.baseline);
  baseline.erase("seed");
  return json{{"seed", c.seed},
              {"test_fraction", c.test_fraction},
              {"cv_folds", c.cv_folds},
              {"vae_val_fraction", c.vae_val_fraction},
              {"vae",
               {{"encoder_hidden", v.encoder_hidden},
                {"latent_dim", v.latent_dim},
                {"decoder_hidden", v.decoder_hidden},
                {"dropout_rate", v.dropout_rate},
                {"l2_lambda", v.l2_lambda},
                {"beta", v.beta},
                {"lr", v.lr},
                {"batch_size", v.batch_size},
                {"max_epochs", v.max_epochs},
                {"patience", v.patience},
                {"min_delta", v.min_delta},
                {"lr_factor", v.lr_factor},
                {"lr_patience", v.lr_patience},
                {"lr_floor", v.lr_floor},
                {"logvar_clamp", v.logvar_clamp}}},
              {"grid", grid},
              {"baseline", baseline},
              {"projection", "pca"}};
}

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

json class_counts(const Labels& y) {
  std::size_t pos = 0;
  for (auto v : y) pos += v;
  return json{{"methylated", pos}, {"unmethylated", y.size() - pos}};
}

ModelResult score_model(std::string name, const std::vector<double>& scores, const Labels& y_test, json hyper,
                        std::size_t dim) {
  ModelResult r;
  r.name = std::move(name);
  r.auc = auc(scores, y_test);
  r.roc = roc_curve(scores, y_test);
  r.hyperparameters = std::move(hyper);
  r.feature_dim = dim;
  log_info("evaluate", {{"model", r.name}, {"test_auc", fmt_double(r.auc)}, {"features", std::to_string(dim)}});
  return r;
}

}  // namespace

std::array<Vector, 2> column_medians(const Cohort& cohort, const RowIndex& rows) {
  std::array<Vector, 2> medians;
  for (std::size_t v = 0; v < 2; ++v) {
    const Matrix& x = cohort.views[v];
    medians[v].resize(x.cols());
    for (Eigen::Index c = 0; c < x.cols(); ++c) {
      std::vector<double> observed;
      for (std::size_t r : rows) {
        const auto i = static_cast<Eigen::Index>(r);
        if (!cohort.missing[v](i, c)) observed.push_back(x(i, c));
      }
      medians[v][c] = observed.empty() ? 0.0 : median_of(std::move(observed));
    }
  }
  return medians;
}

PreparedData prepare_holdout(const Cohort& cohort, std::uint64_t seed, double test_fraction) {
  if (cohort.size() < 4) throw Error(ErrorKind::InsufficientData, "cohort has fewer than 4 subjects");
  PreparedData data;
  data.split_seed = derive_seed(seed, kSplitStream);
  data.split = holdout_split(cohort.y, test_fraction, data.split_seed);
  data.y_train = select_labels(cohort.y, data.split.train);
  data.y_test = select_labels(cohort.y, data.split.test);
  for (const Labels* part : {&data.y_train, &data.y_test}) {
    const auto pos = std::count(part->begin(), part->end(), std::uint8_t{1});
    if (pos == 0 || static_cast<std::size_t>(pos) == part->size()) {
      throw Error(ErrorKind::InsufficientData, "both classes must appear in the train and the test partition");
    }
  }
  const Cohort imputed = impute_median(cohort, data.split.train);
  data.medians = column_medians(cohort, data.split.train);
  data.norm = zscore_fit(imputed, data.split.train);
  data.prepared = zscore_apply(imputed, data.norm);
  return data;
}

VaeStage fit_vae(const PreparedData& data, const ExperimentConfig& config) {
  const Cohort& prepared = data.prepared;
  VaeConfig vae_config = config.vae;
  vae_config.input_dims = {static_cast<std::size_t>(prepared.views[0].cols()),
                           static_cast<std::size_t>(prepared.views[1].cols())};
  vae_config.seed = derive_seed(config.seed, kVaeStream);
  VaeStage stage;
  stage.fit_rows = data.split.train;
  if (config.vae_val_fraction > 0.0) {
    try {
      const HoldoutSplit inner =
          holdout_split(data.y_train, config.vae_val_fraction, derive_seed(config.seed, kVaeSplitStream));
      stage.fit_rows.clear();
      for (std::size_t i : inner.train) stage.fit_rows.push_back(data.split.train[i]);
      for (std::size_t i : inner.test) stage.validation_rows.push_back(data.split.train[i]);
    } catch (const Error& e) {
      log_warn("train-vae", {{"validation_split", "disabled"}, {"reason", e.what()}});
    }
  }
  stage.result = train(prepared, stage.fit_rows, stage.validation_rows, vae_config);
  return stage;
}

GridSearchResult search_fusion(const PreparedData& data, const ExperimentConfig& config) {
  HyperGrid grid = config.grid;
  grid.base.seed = derive_seed(derive_seed(config.seed, kForestStream), 3);
  const Matrix fused_train = select_rows(concat_views(data.prepared), data.split.train);
  return grid_search_cv(fused_train, data.y_train, grid, config.cv_folds, derive_seed(config.seed, kCvStream),
                        config.threads);
}

ExperimentOutcome run_experiment(const Cohort& cohort, const ExperimentConfig& config,
                                 const std::vector<double>* oracle_scores) {
  const auto t_total = Clock::now();
  if (oracle_scores && oracle_scores->size() != cohort.size()) {
    throw Error(ErrorKind::ShapeMismatch, "oracle scores do not match cohort size");
  }

  const std::uint64_t split_seed = derive_seed(config.seed, kSplitStream);
  const std::uint64_t cv_seed = derive_seed(config.seed, kCvStream);
  const std::uint64_t forest_seed = derive_seed(config.seed, kForestStream);
  const std::uint64_t vae_seed = derive_seed(config.seed, kVaeStream);
  const std::uint64_t vae_split_seed = derive_seed(config.seed, kVaeSplitStream);
  const std::uint64_t projection_seed = derive_seed(config.seed, 16);

  ExperimentOutcome out;
  Report& report = out.report;
  json timing = json::object();

  // -- split and preprocessing (train rows only) --
  auto t_stage = Clock::now();
  const PreparedData data = prepare_holdout(cohort, config.seed, config.test_fraction);
  const HoldoutSplit& split = data.split;
  const Labels& y_train = data.y_train;
  const Labels& y_test = data.y_test;
  out.norm = data.norm;
  const Cohort& prepared = data.prepared;
  const Matrix fused = concat_views(prepared);
  timing["preprocess"] = seconds_since(t_stage);
  log_info("preprocess", {{"subjects", std::to_string(cohort.size())},
                          {"train", std::to_string(split.train.size())},
                          {"test", std::to_string(split.test.size())},
                          {"t1gd_features", std::to_string(prepared.views[0].cols())},
                          {"flair_features", std::to_string(prepared.views[1].cols())}});

  // -- untuned baselines --
  t_stage = Clock::now();
  const std::array<const Matrix*, 3> baseline_inputs{&prepared.views[0], &prepared.views[1], &fused};
  for (std::size_t b = 0; b < baseline_inputs.size(); ++b) {
    RfConfig rf = config.baseline;
    rf.seed = derive_seed(forest_seed, b);
    const Matrix& x = *baseline_inputs[b];
    const ForestModel forest = fit_forest(select_rows(x, split.train), y_train, rf, config.threads);
    const auto scores = forest.predict_proba(select_rows(x, split.test));
    report.models.push_back(score_model(std::string(kModelNames[b]), scores, y_test, rf_config_json(rf),
                                        static_cast<std::size_t>(x.cols())));
  }
  timing["baselines"] = seconds_since(t_stage);

  // -- tuned early fusion --
  t_stage = Clock::now();
  const Matrix fused_train = select_rows(fused, split.train);
  out.fusion_search = search_fusion(data, config);
  {
    const ForestModel forest = fit_forest(fused_train, y_train, out.fusion_search.best, config.threads);
    const auto scores = forest.predict_proba(select_rows(fused, split.test));
    ModelResult r = score_model(std::string(kModelNames[3]), scores, y_test, rf_config_json(out.fusion_search.best),
                                static_cast<std::size_t>(fused.cols()));
    r.cv_mean_auc = out.fusion_search.best_mean_auc;
    report.models.push_back(std::move(r));
  }
  timing["early_fusion_tuned"] = seconds_since(t_stage);

  // -- multi-view VAE, frozen, then tuned forest on the fused latent means --
  t_stage = Clock::now();
  VaeStage stage = fit_vae(data, config);
  const RowIndex& vae_fit_rows = stage.fit_rows;
  const RowIndex& vae_val_rows = stage.validation_rows;
  out.vae = std::move(stage.result.model);
  out.vae_history = std::move(stage.result.history);
  timing["vae_training"] = seconds_since(t_stage);

  t_stage = Clock::now();
  const Matrix latent_train = embed(out.vae, prepared, split.train);
  const Matrix latent_test = embed(out.vae, prepared, split.test);
  HyperGrid latent_grid = config.grid;
  latent_grid.base.seed = derive_seed(forest_seed, 4);
  out.latent_search = grid_search_cv(latent_train, y_train, latent_grid, config.cv_folds, cv_seed, config.threads);
  std::vector<double> latent_scores;
  {
    const ForestModel forest = fit_forest(latent_train, y_train, out.latent_search.best, config.threads);
    latent_scores = forest.predict_proba(latent_test);
    json hyper = rf_config_json(out.latent_search.best);
    hyper["vae_epochs"] = out.vae_history.epochs.size();
    hyper["vae_best_epoch"] = out.vae_history.best_epoch;
    ModelResult r = score_model(std::string(kModelNames[4]), latent_scores, y_test, hyper,
                                static_cast<std::size_t>(latent_test.cols()));
    r.cv_mean_auc = out.latent_search.best_mean_auc;
    report.models.push_back(std::move(r));
  }
  timing["latent_classifier"] = seconds_since(t_stage);

  // -- 2-D view of the test embeddings --
  {
    const Projection2d proj = project_2d(latent_test, projection_seed);
    LatentProjection lp;
    lp.model = std::string(kModelNames[4]);
    lp.coords = proj.coords;
    lp.variance = proj.variance;
    lp.probability = latent_scores;
    lp.labels = y_test;
    for (std::size_t r : split.test) lp.subject_ids.push_back(cohort.subject_ids[r]);
    report.projections.push_back(std::move(lp));
  }

  if (oracle_scores) {
    std::vector<double> test_oracle;
    for (std::size_t r : split.test) test_oracle.push_back((*oracle_scores)[r]);
    report.oracle_auc = auc(test_oracle, y_test);
  }

  report.seeds = json{{"experiment", config.seed},   {"split", split_seed},         {"cv", cv_seed},
                      {"forest", forest_seed},       {"vae", vae_seed},             {"vae_validation", vae_split_seed},
                      {"projection", projection_seed}};
  report.split = json{{"protocol", "stratified-holdout"},
                      {"test_fraction", config.test_fraction},
                      {"n_subjects", cohort.size()},
                      {"n_train", split.train.size()},
                      {"n_test", split.test.size()},
                      {"train_classes", class_counts(y_train)},
                      {"test_classes", class_counts(y_test)},
                      {"cv_folds", config.cv_folds},
                      {"vae_fit_rows", vae_fit_rows.size()},
                      {"vae_validation_rows", vae_val_rows.size()},
                      {"preprocessing", "median imputation and per-view z-score fitted on training rows"}};
  report.config = experiment_config_json(config);
  report.config["input_dims"] = {prepared.views[0].cols(), prepared.views[1].cols()};
  report.versions = json{{"mvrad", kVersion}, {"report_format", kReportFormat}};
  timing["total"] = seconds_since(t_total);
  report.timing = timing;
  return out;
}

}  // namespace mvrad
