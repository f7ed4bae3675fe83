#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "mvrad/dataset.hpp"
#include "mvrad/error.hpp"
#include "mvrad/forest.hpp"
#include "mvrad/metrics.hpp"

using namespace mvrad;

namespace {

double gini(double n0, double n1) {
  const double n = n0 + n1;
  if (n == 0) return 0;
  return 1.0 - (n0 / n) * (n0 / n) - (n1 / n) * (n1 / n);
}

struct BestSplit {
  double gain = 0.0;
  bool found = false;
};

// Every feature and every boundary between consecutive distinct values.
BestSplit brute_force_split(const Matrix& X, const Labels& y, const RowIndex& rows, std::size_t min_leaf) {
  BestSplit best;
  double n0 = 0, n1 = 0;
  for (auto r : rows) (y[r] ? n1 : n0) += 1;
  const double parent = gini(n0, n1);
  for (Eigen::Index f = 0; f < X.cols(); ++f) {
    std::set<double> values;
    for (auto r : rows) values.insert(X(static_cast<Eigen::Index>(r), f));
    for (auto it = values.begin(); std::next(it) != values.end(); ++it) {
      const double cut = 0.5 * (*it + *std::next(it));
      double l0 = 0, l1 = 0;
      for (auto r : rows)
        if (X(static_cast<Eigen::Index>(r), f) <= cut) (y[r] ? l1 : l0) += 1;
      const double r0 = n0 - l0, r1 = n1 - l1;
      if (l0 + l1 < static_cast<double>(min_leaf) || r0 + r1 < static_cast<double>(min_leaf)) continue;
      const double child = ((l0 + l1) * gini(l0, l1) + (r0 + r1) * gini(r0, r1)) / (n0 + n1);
      const double gain = parent - child;
      if (gain > best.gain) {
        best.gain = gain;
        best.found = true;
      }
    }
  }
  return best;
}

double gain_of(const Matrix& X, const Labels& y, const RowIndex& rows, int feature, double threshold) {
  double n0 = 0, n1 = 0, l0 = 0, l1 = 0;
  for (auto r : rows) {
    (y[r] ? n1 : n0) += 1;
    if (X(static_cast<Eigen::Index>(r), feature) <= threshold) (y[r] ? l1 : l0) += 1;
  }
  const double r0 = n0 - l0, r1 = n1 - l1;
  return gini(n0, n1) - ((l0 + l1) * gini(l0, l1) + (r0 + r1) * gini(r0, r1)) / (n0 + n1);
}

void check_node(const DecisionTree& tree, std::int32_t id, const Matrix& X, const Labels& y, const RowIndex& rows,
                const RfConfig& cfg) {
  const TreeNode& node = tree.nodes[static_cast<std::size_t>(id)];
  double ones = 0;
  for (auto r : rows) ones += y[r];
  CHECK(node.sample_count == static_cast<double>(rows.size()));
  CHECK(node.p1 == doctest::Approx(ones / static_cast<double>(rows.size())).epsilon(1e-15));
  const BestSplit oracle = brute_force_split(X, y, rows, cfg.min_samples_leaf);
  if (node.is_leaf()) {
    const bool pure = ones == 0 || ones == static_cast<double>(rows.size());
    if (!pure && rows.size() >= cfg.min_samples_split) CHECK(oracle.gain <= kMinGain);
    return;
  }
  REQUIRE(oracle.found);
  CHECK(node.gain == doctest::Approx(oracle.gain).epsilon(1e-12));
  CHECK(gain_of(X, y, rows, node.feature, node.threshold) == doctest::Approx(oracle.gain).epsilon(1e-12));
  RowIndex left, right;
  for (auto r : rows) (X(static_cast<Eigen::Index>(r), node.feature) <= node.threshold ? left : right).push_back(r);
  CHECK(left.size() >= cfg.min_samples_leaf);
  CHECK(right.size() >= cfg.min_samples_leaf);
  check_node(tree, node.left, X, y, left, cfg);
  check_node(tree, node.right, X, y, right, cfg);
}

Matrix random_matrix(Eigen::Index r, Eigen::Index c, Rng& rng) {
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.normal();
  return m;
}

}  // namespace

TEST_CASE("impurity") {
  const Labels same{1, 1, 1};
  CHECK(impurity(same, Criterion::Gini) == 0.0);
  CHECK(impurity(same, Criterion::Entropy) == 0.0);
  const Labels half{0, 1};
  CHECK(impurity(half, Criterion::Gini) == doctest::Approx(0.5));
  CHECK(impurity(half, Criterion::Entropy) == doctest::Approx(1.0));
  const Labels third{0, 0, 1};
  CHECK(impurity(third, Criterion::Gini) == doctest::Approx(4.0 / 9.0));
}

TEST_CASE("max_features rules") {
  CHECK(MaxFeatures::log2().resolve(12) == 3);
  CHECK(MaxFeatures::sqrt().resolve(288) == 17);
  CHECK(MaxFeatures::of(0.5).resolve(288) == 144);
  CHECK(MaxFeatures::parse("sqrt") == MaxFeatures::sqrt());
  CHECK(MaxFeatures::parse(MaxFeatures::of(0.5).to_string()) == MaxFeatures::of(0.5));
}

TEST_CASE("small trees") {
  RfConfig cfg;
  cfg.max_features = MaxFeatures::of(1.0);
  Rng rng(1);
  Matrix pure_x(3, 1);
  pure_x << 1, 2, 3;
  auto leaf = fit_tree(pure_x, {1, 1, 1}, cfg, rng);
  REQUIRE(leaf.nodes.size() == 1);
  CHECK(leaf.nodes[0].p1 == 1.0);

  Matrix x(4, 1);
  x << 1, 2, 3, 4;
  auto t = fit_tree(x, {0, 0, 1, 1}, cfg, rng);
  REQUIRE(t.nodes.size() == 3);
  CHECK(t.nodes[0].threshold == 2.5);
  CHECK(t.nodes[static_cast<std::size_t>(t.nodes[0].left)].p1 == 0.0);
  CHECK(t.nodes[static_cast<std::size_t>(t.nodes[0].right)].p1 == 1.0);
}

TEST_CASE("every node of a fitted tree carries the exhaustive best split") {
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    Rng rng(seed);
    const auto n = static_cast<Eigen::Index>(2 + rng.below(11));
    const auto d = static_cast<Eigen::Index>(1 + rng.below(3));
    Matrix X(n, d);
    for (Eigen::Index i = 0; i < X.size(); ++i) X.data()[i] = static_cast<double>(rng.below(5));
    Labels y(static_cast<std::size_t>(n));
    for (auto& v : y) v = rng.uniform() < 0.5 ? 1 : 0;
    RfConfig cfg;
    cfg.max_features = MaxFeatures::of(1.0);
    cfg.min_samples_leaf = 1 + rng.below(2);
    cfg.min_samples_split = 2 + rng.below(3);
    Rng tree_rng(seed + 99);
    auto tree = fit_tree(X, y, cfg, tree_rng);
    RowIndex all(static_cast<std::size_t>(n));
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    check_node(tree, 0, X, y, all, cfg);
  }
}

TEST_CASE("forest fits separable blobs perfectly") {
  Rng rng(4);
  const Eigen::Index n = 200;
  Matrix X(n, 2);
  Labels y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const int c = i % 2;
    X(i, 0) = rng.normal() * 0.5 + (c ? 3 : -3);
    X(i, 1) = rng.normal() * 0.5 + (c ? 3 : -3);
    y[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(c);
  }
  RfConfig cfg;
  cfg.n_estimators = 100;
  cfg.seed = 8;
  auto forest = fit_forest(X, y, cfg);
  auto p = forest.predict_proba(X);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < p.size(); ++i) correct += (p[i] >= 0.5) == (y[i] == 1);
  CHECK(correct == p.size());
}

TEST_CASE("forest predictions") {
  Rng rng(5);
  Matrix X = random_matrix(60, 4, rng);
  Labels y(60);
  for (Eigen::Index i = 0; i < 60; ++i) y[static_cast<std::size_t>(i)] = X(i, 0) + 0.5 * rng.normal() > 0;
  RfConfig cfg;
  cfg.n_estimators = 1;
  cfg.bootstrap = false;
  cfg.seed = 3;
  auto single = fit_forest(X, y, cfg);
  Matrix probe = random_matrix(30, 4, rng);
  auto p = single.predict_proba(probe);
  for (Eigen::Index i = 0; i < probe.rows(); ++i) {
    const double direct = single.trees[0].predict({probe.row(i).data(), 4});
    CHECK(p[static_cast<std::size_t>(i)] == direct);
    CHECK((direct == 0.0 || direct == 1.0));
  }

  ForestModel clones = single;
  clones.trees.assign(5, single.trees[0]);
  clones.config.n_estimators = 5;
  CHECK(clones.predict_proba(probe) == p);

  cfg.n_estimators = 25;
  cfg.bootstrap = true;
  auto f1 = fit_forest(X, y, cfg, 1);
  auto f2 = fit_forest(X, y, cfg, 1);
  auto f4 = fit_forest(X, y, cfg, 4);
  CHECK(f1.serialize() == f2.serialize());
  CHECK(f1.serialize() == f4.serialize());
  Matrix wild = random_matrix(200, 4, rng) * 50.0;
  for (double v : f1.predict_proba(wild)) CHECK((v >= 0.0 && v <= 1.0));
}

TEST_CASE("limited growth equals the unrestricted tree cut short") {
  std::size_t mismatches = 0;
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    Rng rng(seed);
    Matrix X = random_matrix(80, 6, rng);
    Labels y(80);
    for (Eigen::Index i = 0; i < 80; ++i) y[static_cast<std::size_t>(i)] = X(i, 0) * X(i, 1) + 0.3 * rng.normal() > 0;
    RfConfig full;
    full.n_estimators = 12;
    full.seed = seed;
    full.min_samples_leaf = 1 + seed % 3;
    const auto loose = fit_forest(X, y, full, 1);
    Matrix probe = random_matrix(40, 6, rng);
    for (std::optional<std::size_t> depth : {std::optional<std::size_t>{1}, std::optional<std::size_t>{3}, std::optional<std::size_t>{}}) {
      for (std::size_t mss : {2, 5, 10}) {
        RfConfig limited = full;
        limited.max_depth = depth;
        limited.min_samples_split = mss;
        limited.n_estimators = 7;
        const auto direct = fit_forest(X, y, limited, 1).predict_proba(probe);
        const auto cut = loose.predict_proba(probe, 7, TreeLimits{depth, mss});
        mismatches += direct != cut;
      }
    }
  }
  CHECK(mismatches == 0);
}

TEST_CASE("grid search") {
  Rng rng(12);
  Matrix X = random_matrix(60, 5, rng);
  Labels y(60);
  for (Eigen::Index i = 0; i < 60; ++i) y[static_cast<std::size_t>(i)] = X(i, 0) - X(i, 2) + 0.7 * rng.normal() > 0;

  HyperGrid grid;
  grid.n_estimators = {5, 12};
  grid.max_depth = {std::nullopt, 2};
  grid.max_features = {MaxFeatures::sqrt(), MaxFeatures::of(0.5)};
  grid.min_samples_split = {2, 6};
  grid.min_samples_leaf = {1, 3};
  grid.base.seed = 5;
  const std::size_t k = 3;
  auto result = grid_search_cv(X, y, grid, k, 21);
  CHECK(result.configs.size() == 32);
  CHECK(result.fits.size() == 32 * k);

  // Each recorded fold score equals an independent fit of that configuration.
  const auto folds = stratified_split(y, k, 21);
  for (std::size_t id = 0; id < result.configs.size(); ++id) {
    for (std::size_t f = 0; f < k; ++f) {
      RowIndex train;
      for (std::size_t g = 0; g < k; ++g)
        if (g != f) train.insert(train.end(), folds[g].begin(), folds[g].end());
      std::sort(train.begin(), train.end());
      const auto forest = fit_forest(select_rows(X, train), select_labels(y, train), result.configs[id], 1);
      const double a = auc(forest.predict_proba(select_rows(X, folds[f])), select_labels(y, folds[f]));
      CHECK(result.fits[id * k + f].config_id == id);
      CHECK(result.fits[id * k + f].fold == f);
      CHECK(result.fits[id * k + f].auc == a);
    }
  }
  double best = -1;
  std::size_t best_id = 0;
  for (std::size_t id = 0; id < result.configs.size(); ++id) {
    double s = 0;
    for (std::size_t f = 0; f < k; ++f) s += result.fits[id * k + f].auc;
    if (s / k > best) {
      best = s / k;
      best_id = id;
    }
  }
  CHECK(result.best_id == best_id);
  CHECK(result.best == result.configs[best_id]);

  HyperGrid one;
  one.n_estimators = {7};
  one.max_depth = {4};
  one.max_features = {MaxFeatures::log2()};
  one.min_samples_split = {3};
  one.min_samples_leaf = {2};
  auto single = grid_search_cv(X, y, one, k, 1);
  CHECK(single.best == one.at(0));

  HyperGrid twins = one;
  twins.n_estimators = {7, 7};
  auto tied = grid_search_cv(X, y, twins, k, 1);
  CHECK(tied.mean_auc[0] == tied.mean_auc[1]);
  CHECK(tied.best_id == 0);

  std::istringstream table(cv_table_csv(result));
  std::string line;
  std::size_t lines = 0;
  while (std::getline(table, line)) ++lines;
  CHECK(lines == result.fits.size() + 1);
}

TEST_CASE("the default grid has 243 points") {
  HyperGrid grid;
  CHECK(grid.size() == 243);
  std::set<std::string> seen;
  for (std::size_t id = 0; id < grid.size(); ++id) {
    const RfConfig c = grid.at(id);
    seen.insert(std::to_string(c.n_estimators) + format_max_depth(c.max_depth) + c.max_features.to_string() +
                std::to_string(c.min_samples_split) + std::to_string(c.min_samples_leaf));
  }
  CHECK(seen.size() == 243);
}
