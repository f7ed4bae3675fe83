#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mvrad/types.hpp"

namespace mvrad {

enum class Modality : std::uint8_t { T1Gd = 0, FLAIR = 1 };

inline constexpr std::array<Modality, 2> kModalities{Modality::T1Gd, Modality::FLAIR};

inline constexpr std::size_t view_index(Modality m) { return static_cast<std::size_t>(m); }
std::string_view modality_name(Modality m);

using MissingMask = Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// One modality's subjects x features table. Cells flagged in `missing` hold
/// an unspecified value and must not be read.
struct FeatureTable {
  Modality modality = Modality::T1Gd;
  std::vector<std::string> subject_ids;
  std::vector<std::string> feature_names;
  Matrix values;
  MissingMask missing;

  std::size_t n_subjects() const { return subject_ids.size(); }
  std::size_t n_features() const { return feature_names.size(); }
};

enum class MgmtLabel : std::int8_t { Unmethylated = 0, Methylated = 1, Unknown = -1 };

struct ClinicalTable {
  std::vector<std::string> subject_ids;
  std::vector<MgmtLabel> mgmt;
};

/// Aligned pair of per-view matrices plus binary labels. Before imputation
/// the masks may flag missing cells; afterwards they are all false.
struct Cohort {
  std::vector<std::string> subject_ids;
  std::array<Matrix, 2> views;
  std::array<MissingMask, 2> missing;
  std::array<std::vector<std::string>, 2> feature_names;
  Labels y;

  std::size_t size() const { return subject_ids.size(); }
  const Matrix& view(Modality m) const { return views[view_index(m)]; }
  bool has_missing() const;

  /// Copy restricted to `rows`, in the given order.
  Cohort subset(const RowIndex& rows) const;
};

/// Per-view training-set moments used for z-scoring.
struct NormStats {
  std::array<Vector, 2> mean;
  std::array<Vector, 2> stddev;
  RowIndex fitted_rows;
};

/// Columns whose training standard deviation falls below this map to 0.
inline constexpr double kConstantColumnStd = 1e-12;

// ---- CSV ingestion ---------------------------------------------------------

/// True for the recognised missing markers: empty, NA, NaN, null (any case).
bool is_missing_marker(std::string_view cell);

FeatureTable load_feature_table(const std::filesystem::path& path, Modality modality);
FeatureTable parse_feature_table(std::string_view csv_text, Modality modality,
                                 std::string_view source = "<memory>");

ClinicalTable load_clinical_table(const std::filesystem::path& path);
ClinicalTable parse_clinical_table(std::string_view csv_text, std::string_view source = "<memory>");

void write_feature_table(const std::filesystem::path& path, const Cohort& cohort, Modality modality);
void write_clinical_table(const std::filesystem::path& path, const Cohort& cohort);

// ---- preprocessing ---------------------------------------------------------

/// Keeps subjects present in both tables with a known label, sorted by id.
Cohort align_cohort(const FeatureTable& t1gd, const FeatureTable& flair, const ClinicalTable& clinical);

double median_of(std::vector<double> values);

/// Fills every missing cell with its column median over observed train rows.
Cohort impute_median(const Cohort& cohort, const RowIndex& train_rows);

NormStats zscore_fit(const Cohort& cohort, const RowIndex& train_rows);
Cohort zscore_apply(const Cohort& cohort, const NormStats& stats);

/// Horizontal concatenation [T1Gd | FLAIR] (early fusion).
Matrix concat_views(const Cohort& cohort);

Matrix select_rows(const Matrix& m, const RowIndex& rows);
Labels select_labels(const Labels& y, const RowIndex& rows);

// ---- splitting -------------------------------------------------------------

/// k disjoint stratified folds; within-class seeded shuffle then round-robin.
std::vector<RowIndex> stratified_split(const Labels& y, std::size_t k, std::uint64_t seed);

struct HoldoutSplit {
  RowIndex train;
  RowIndex test;
};

inline constexpr double kDefaultTestFraction = 0.25;

HoldoutSplit holdout_split(const Labels& y, double test_fraction, std::uint64_t seed);

// ---- synthetic cohorts -----------------------------------------------------

/// Generative model: shared latent u ~ N(0, I); per view
/// x = A_m u + private_scale * B_m p_m + noise_sigma * e, with a seeded subset
/// of "distractor" rows of A_m zeroed; y ~ Bernoulli(sigmoid(signal * w.u)).
/// w is drawn once and rescaled to norm sqrt(latent_dim).
struct SynthConfig {
  std::size_t n = 400;
  std::size_t d = 144;
  std::size_t latent_dim = 4;
  double signal_strength = 3.0;
  double noise_sigma = 1.0;
  std::size_t private_dim = 2;
  double private_scale = 1.0;
  double distractor_fraction = 0.25;
  std::uint64_t seed = 0;
};

/// Shared-signal, high-redundancy regime: few shared factors spread over
/// many features. Each informative column carries nine times more correlated
/// per-view nuisance variance than shared signal, plus iid noise, and half of
/// the columns load on no shared factor at all.
SynthConfig shared_signal_regime(std::uint64_t seed);

struct SyntheticCohort {
  Cohort cohort;
  Matrix latent;          ///< n x latent_dim draws of u
  Vector label_weights;   ///< w
  double signal_strength = 0.0;

  /// Bayes-optimal ranking score w.u per subject.
  std::vector<double> oracle_scores() const;
};

SyntheticCohort synth_cohort(const SynthConfig& config);

}  // namespace mvrad
