#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mvrad/rng.hpp"
#include "mvrad/types.hpp"

namespace mvrad {

enum class Criterion { Gini, Entropy };

std::string_view criterion_name(Criterion c);

/// Per-node feature subsampling rule.
struct MaxFeatures {
  enum class Rule { Sqrt, Log2, Fraction };
  Rule rule = Rule::Sqrt;
  double fraction = 1.0;

  static MaxFeatures sqrt() { return {Rule::Sqrt, 1.0}; }
  static MaxFeatures log2() { return {Rule::Log2, 1.0}; }
  static MaxFeatures of(double fraction) { return {Rule::Fraction, fraction}; }

  /// sqrt: ceil(sqrt d); log2: max(1, floor(log2 d)); fraction: max(1, floor(f d)).
  std::size_t resolve(std::size_t d) const;
  std::string to_string() const;
  static MaxFeatures parse(std::string_view text);

  bool operator==(const MaxFeatures&) const = default;
};

struct RfConfig {
  std::size_t n_estimators = 100;
  std::optional<std::size_t> max_depth;  ///< nullopt = unrestricted
  MaxFeatures max_features = MaxFeatures::sqrt();
  std::size_t min_samples_split = 2;
  std::size_t min_samples_leaf = 1;
  Criterion criterion = Criterion::Gini;
  bool bootstrap = true;
  std::uint64_t seed = 0;

  void validate() const;
  bool operator==(const RfConfig&) const = default;
};

/// Flat node: internal nodes route x[feature] <= threshold to `left`.
struct TreeNode {
  std::int32_t feature = -1;
  double threshold = 0.0;
  std::int32_t left = -1;
  std::int32_t right = -1;
  double p1 = 0.0;            ///< class-1 frequency of the training samples reaching the node
  double sample_count = 0.0;  ///< (bootstrap-weighted) samples reaching the node
  double gain = 0.0;          ///< impurity decrease of the chosen split; 0 for leaves

  bool is_leaf() const { return feature < 0; }
  double p0() const { return 1.0 - p1; }
};

/// Growth limits that can be applied after the fact: every node keeps its
/// class frequency, so stopping the descent where a limited tree would have
/// stopped growing gives that tree's prediction.
struct TreeLimits {
  std::optional<std::size_t> max_depth;
  std::size_t min_samples_split = 2;
};

struct DecisionTree {
  std::vector<TreeNode> nodes;  ///< nodes[0] is the root

  const TreeNode& leaf_for(std::span<const double> row) const;
  const TreeNode& leaf_for(std::span<const double> row, const TreeLimits& limits) const;
  double predict(std::span<const double> row) const { return leaf_for(row).p1; }
  double predict(std::span<const double> row, const TreeLimits& limits) const { return leaf_for(row, limits).p1; }
  std::size_t depth() const;
};

/// Impurity of a label multiset: gini 1 - sum p^2, entropy -sum p log2 p.
double impurity(std::span<const std::uint8_t> labels, Criterion criterion);
double impurity_from_counts(double n0, double n1, Criterion criterion);

/// Midpoint between consecutive distinct sorted values a < b, kept strictly below b.
double split_threshold(double a, double b);

/// Minimum impurity decrease a split must exceed; also the tolerance within
/// which two candidate splits count as tied.
inline constexpr double kMinGain = 1e-12;

/// CART tree on every row of X with unit weights (no bootstrap). Each node
/// draws its candidate features from its own stream, keyed by a root key taken
/// from `rng` and the node's path, so growing with a tighter max_depth or
/// min_samples_split gives exactly the unrestricted tree cut at those nodes.
DecisionTree fit_tree(const Matrix& X, const Labels& y, const RfConfig& config, Rng& rng);

struct ForestModel {
  std::vector<DecisionTree> trees;
  RfConfig config;
  std::size_t n_features = 0;

  /// Mean over trees of the reached leaf's class-1 frequency.
  std::vector<double> predict_proba(const Matrix& X) const;
  /// Same, restricted to the first `n_trees` trees.
  std::vector<double> predict_proba(const Matrix& X, std::size_t n_trees) const;
  /// First `n_trees` trees, each cut at `limits` (see TreeLimits).
  std::vector<double> predict_proba(const Matrix& X, std::size_t n_trees, const TreeLimits& limits) const;
  std::string serialize() const;
};

/// Tree t uses seed derive_seed(config.seed, t); trees are independent so the
/// result does not depend on `threads`.
ForestModel fit_forest(const Matrix& X, const Labels& y, const RfConfig& config, std::size_t threads = 0);

/// Cartesian hyperparameter grid. Enumeration is lexicographic over the axis
/// order below (last axis varies fastest).
struct HyperGrid {
  std::vector<std::size_t> n_estimators{100, 300, 500};
  std::vector<std::optional<std::size_t>> max_depth{std::nullopt, 10, 20};
  std::vector<MaxFeatures> max_features{MaxFeatures::sqrt(), MaxFeatures::log2(), MaxFeatures::of(0.5)};
  std::vector<std::size_t> min_samples_split{2, 5, 10};
  std::vector<std::size_t> min_samples_leaf{1, 2, 4};
  RfConfig base;  ///< criterion, bootstrap and seed shared by every point

  std::size_t size() const;
  RfConfig at(std::size_t config_id) const;
  void validate() const;
};

struct CvFit {
  std::size_t config_id = 0;
  std::size_t fold = 0;
  double auc = 0.0;
};

struct GridSearchResult {
  std::vector<RfConfig> configs;
  std::vector<CvFit> fits;        ///< |grid| x k entries ordered by (config_id, fold)
  std::vector<double> mean_auc;   ///< per config
  std::size_t folds = 0;
  std::size_t best_id = 0;
  RfConfig best;
  double best_mean_auc = 0.0;
};

/// Stratified k-fold grid search scored by validation AUC. Folds come from
/// stratified_split(y, k, seed) and are shared by every configuration; ties
/// in mean AUC go to the earliest configuration.
GridSearchResult grid_search_cv(const Matrix& X, const Labels& y, const HyperGrid& grid, std::size_t k,
                                std::uint64_t seed, std::size_t threads = 0);

std::string format_max_depth(const std::optional<std::size_t>& depth);

/// CSV `config_id,n_estimators,max_depth,max_features,min_samples_split,min_samples_leaf,fold,auc`.
std::string cv_table_csv(const GridSearchResult& result);

}  // namespace mvrad
