#include "mvrad/forest.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <numeric>
#include <sstream>

#include "mvrad/error.hpp"
#include "mvrad/parallel.hpp"

namespace mvrad {

std::string_view criterion_name(Criterion c) { return c == Criterion::Gini ? "gini" : "entropy"; }

std::size_t MaxFeatures::resolve(std::size_t d) const {
  if (d == 0) return 0;
  std::size_t k = 1;
  switch (rule) {
    case Rule::Sqrt:
      k = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(d))));
      break;
    case Rule::Log2:
      k = static_cast<std::size_t>(std::floor(std::log2(static_cast<double>(d))));
      break;
    case Rule::Fraction:
      k = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(d)));
      break;
  }
  return std::clamp<std::size_t>(k, 1, d);
}

std::string MaxFeatures::to_string() const {
  switch (rule) {
    case Rule::Sqrt: return "sqrt";
    case Rule::Log2: return "log2";
    case Rule::Fraction: break;
  }
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", fraction);
  return buf;
}

MaxFeatures MaxFeatures::parse(std::string_view text) {
  if (text == "sqrt") return sqrt();
  if (text == "log2") return log2();
  char* end = nullptr;
  const std::string s(text);
  const double f = std::strtod(s.c_str(), &end);
  if (end == s.c_str() || *end != '\0' || !(f > 0.0 && f <= 1.0)) {
    throw Error(ErrorKind::InvalidArgument, "max_features must be sqrt, log2 or a fraction in (0, 1]: " + s);
  }
  return of(f);
}

void RfConfig::validate() const {
  if (n_estimators < 1) throw Error(ErrorKind::InvalidArgument, "n_estimators must be >= 1");
  if (min_samples_split < 2) throw Error(ErrorKind::InvalidArgument, "min_samples_split must be >= 2");
  if (min_samples_leaf < 1) throw Error(ErrorKind::InvalidArgument, "min_samples_leaf must be >= 1");
  if (max_features.rule == MaxFeatures::Rule::Fraction && !(max_features.fraction > 0.0 && max_features.fraction <= 1.0)) {
    throw Error(ErrorKind::InvalidArgument, "max_features fraction must lie in (0, 1]");
  }
}

const TreeNode& DecisionTree::leaf_for(std::span<const double> row) const {
  const TreeNode* node = &nodes.front();
  while (!node->is_leaf()) {
    node = &nodes[static_cast<std::size_t>(row[static_cast<std::size_t>(node->feature)] <= node->threshold ? node->left
                                                                                                          : node->right)];
  }
  return *node;
}

const TreeNode& DecisionTree::leaf_for(std::span<const double> row, const TreeLimits& limits) const {
  const TreeNode* node = &nodes.front();
  std::size_t depth = 0;
  while (!node->is_leaf() && !(limits.max_depth && depth >= *limits.max_depth) &&
         !(node->sample_count < static_cast<double>(limits.min_samples_split))) {
    node = &nodes[static_cast<std::size_t>(row[static_cast<std::size_t>(node->feature)] <= node->threshold ? node->left
                                                                                                          : node->right)];
    ++depth;
  }
  return *node;
}

std::size_t DecisionTree::depth() const {
  std::vector<std::size_t> level(nodes.size(), 0);
  std::size_t deepest = 0;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    deepest = std::max(deepest, level[i]);
    if (!nodes[i].is_leaf()) {
      level[static_cast<std::size_t>(nodes[i].left)] = level[i] + 1;
      level[static_cast<std::size_t>(nodes[i].right)] = level[i] + 1;
    }
  }
  return deepest;
}

namespace {

// Same arithmetic as impurity_from_counts, inlinable into the split scan.
inline double node_impurity(double n0, double n1, Criterion criterion) {
  const double total = n0 + n1;
  const double p0 = n0 / total;
  const double p1 = n1 / total;
  if (criterion == Criterion::Gini) return 1.0 - (p0 * p0 + p1 * p1);
  double h = 0.0;
  if (p0 > 0.0) h -= p0 * std::log2(p0);
  if (p1 > 0.0) h -= p1 * std::log2(p1);
  return h;
}

}  // namespace

double impurity_from_counts(double n0, double n1, Criterion criterion) {
  const double total = n0 + n1;
  if (total <= 0.0) throw Error(ErrorKind::EmptyNode, "impurity of an empty node");
  const double p0 = n0 / total;
  const double p1 = n1 / total;
  if (criterion == Criterion::Gini) return 1.0 - (p0 * p0 + p1 * p1);
  double h = 0.0;
  if (p0 > 0.0) h -= p0 * std::log2(p0);
  if (p1 > 0.0) h -= p1 * std::log2(p1);
  return h;
}

double impurity(std::span<const std::uint8_t> labels, Criterion criterion) {
  if (labels.empty()) throw Error(ErrorKind::EmptyNode, "impurity of an empty label set");
  double n1 = 0.0;
  for (auto y : labels) n1 += y ? 1.0 : 0.0;
  return impurity_from_counts(static_cast<double>(labels.size()) - n1, n1, criterion);
}

double split_threshold(double a, double b) {
  const double t = a + 0.5 * (b - a);
  return t < b ? t : a;
}

namespace {

// Column-major copy of the design matrix plus per-column dense ranks (equal
// values share a rank), so split scans sort small integers instead of doubles.
struct FeatureColumns {
  std::size_t n = 0;
  std::size_t d = 0;
  std::vector<double> values;        // values[f * n + i]
  std::vector<std::uint32_t> ranks;  // ranks[f * n + i]
  std::vector<std::uint32_t> order;  // order[f * n + k]: row with the k-th smallest value

  explicit FeatureColumns(const Matrix& X)
      : n(static_cast<std::size_t>(X.rows())),
        d(static_cast<std::size_t>(X.cols())),
        values(n * d),
        ranks(n * d),
        order(n * d) {
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t f = 0; f < d; ++f) values[f * n + i] = X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(f));
    for (std::size_t f = 0; f < d; ++f) {
      const double* col = column(f);
      std::uint32_t* ord = order.data() + f * n;
      std::iota(ord, ord + n, 0u);
      std::sort(ord, ord + n, [col](std::uint32_t a, std::uint32_t b) { return col[a] < col[b]; });
      std::uint32_t r = 0;
      for (std::size_t k = 0; k < n; ++k) {
        if (k > 0 && col[ord[k]] != col[ord[k - 1]]) ++r;
        ranks[f * n + ord[k]] = r;
      }
    }
  }
  const double* column(std::size_t f) const { return values.data() + f * n; }
  const std::uint32_t* rank_column(std::size_t f) const { return ranks.data() + f * n; }
};

// Grows one CART tree over the distinct samples in `samples` with integer
// (bootstrap) weights. Two interchangeable scan strategies:
//  - sort: per node, sort the node's samples for each candidate feature;
//  - presorted: keep every feature's samples in value order and stably
//    partition all of them at each split.
// Both sweep thresholds in ascending value order and draw candidate features
// at the same points, so they produce identical trees; the cheaper one is
// picked from mtry, d and n.
class TreeBuilder {
 public:
  TreeBuilder(const FeatureColumns& data, const Labels& y, const RfConfig& config)
      : data_(data), y_(y), config_(config), mtry_(config.max_features.resolve(data.d)) {
    features_.resize(data.d);
  }

  DecisionTree build(std::vector<std::uint32_t> samples, const std::vector<std::uint32_t>& weights,
                     std::uint64_t root_key) {
    weight_.assign(data_.n, 0);
    for (std::size_t p = 0; p < samples.size(); ++p) weight_[samples[p]] = weights[p];
    samples_ = std::move(samples);
    const double m = static_cast<double>(std::max<std::size_t>(samples_.size(), 2));
    presorted_ = static_cast<double>(mtry_) * std::log2(m) > static_cast<double>(data_.d);
    if (presorted_) {
      sorted_.assign(data_.d * samples_.size(), 0);
      go_left_.assign(data_.n, 0);
      scratch_.resize(samples_.size());
      std::uint32_t* dst = sorted_.data();
      for (std::size_t f = 0; f < data_.d; ++f) {
        const std::uint32_t* ord = data_.order.data() + f * data_.n;
        for (std::size_t k = 0; k < data_.n; ++k) {
          if (weight_[ord[k]] > 0) *dst++ = ord[k];
        }
      }
    }
    tree_.nodes.clear();
    grow(0, samples_.size(), 0, root_key);
    return std::move(tree_);
  }

 private:
  struct Split {
    std::int32_t feature = -1;
    double threshold = 0.0;
    double gain = 0.0;
  };

  // Running best over candidate thresholds, visited in (feature, value) order.
  struct Scan {
    double total, c0, c1, parent, min_leaf;
    Criterion criterion;
    Split best;
    double best_gain = kMinGain;

    // Considers the boundary after a prefix with class weights (l0, l1);
    // lo/hi are the values on either side of it.
    void consider(std::size_t feature, double l0, double l1, double lo, double hi) {
      const double wl = l0 + l1;
      const double wr = total - wl;
      if (wl < min_leaf || wr < min_leaf) return;
      const double child =
          (wl * node_impurity(l0, l1, criterion) + wr * node_impurity(c0 - l0, c1 - l1, criterion)) /
          total;
      const double gain = parent - child;
      if (gain > best_gain + (best.feature < 0 ? 0.0 : kMinGain)) {
        best_gain = gain;
        best.feature = static_cast<std::int32_t>(feature);
        best.threshold = split_threshold(lo, hi);
        best.gain = gain;
      }
    }
  };

  std::int32_t grow(std::size_t begin, std::size_t end, std::size_t depth, std::uint64_t key) {
    double c0 = 0.0, c1 = 0.0;
    for (std::size_t p = begin; p < end; ++p) (y_[samples_[p]] ? c1 : c0) += weight_[samples_[p]];
    const double total = c0 + c1;
    const auto id = static_cast<std::int32_t>(tree_.nodes.size());
    tree_.nodes.push_back({});
    tree_.nodes.back().p1 = c1 / total;
    tree_.nodes.back().sample_count = total;

    const bool pure = c0 == 0.0 || c1 == 0.0;
    const bool depth_limited = config_.max_depth && depth >= *config_.max_depth;
    if (pure || depth_limited || total < static_cast<double>(config_.min_samples_split)) return id;

    const Split split = best_split(begin, end, c0, c1, key);
    if (split.feature < 0) return id;

    const std::size_t mid = partition(begin, end, split);
    tree_.nodes[static_cast<std::size_t>(id)].feature = split.feature;
    tree_.nodes[static_cast<std::size_t>(id)].threshold = split.threshold;
    tree_.nodes[static_cast<std::size_t>(id)].gain = split.gain;
    const std::int32_t left = grow(begin, mid, depth + 1, derive_seed(key, 1));
    const std::int32_t right = grow(mid, end, depth + 1, derive_seed(key, 2));
    tree_.nodes[static_cast<std::size_t>(id)].left = left;
    tree_.nodes[static_cast<std::size_t>(id)].right = right;
    return id;
  }

  // Moves rows with x <= threshold to the front of [begin, end) and returns
  // the boundary.
  std::size_t partition(std::size_t begin, std::size_t end, const Split& split) {
    const double* col = data_.column(static_cast<std::size_t>(split.feature));
    if (!presorted_) {
      std::size_t mid = begin;
      for (std::size_t p = begin; p < end; ++p) {
        if (col[samples_[p]] <= split.threshold) std::swap(samples_[p], samples_[mid++]);
      }
      return mid;
    }
    std::size_t n_left = 0;
    for (std::size_t p = begin; p < end; ++p) {
      const std::uint32_t s = samples_[p];
      go_left_[s] = col[s] <= split.threshold;
      n_left += go_left_[s];
    }
    const std::size_t m = samples_.size();
    auto stable_split = [&](std::uint32_t* range) {
      std::size_t l = 0, r = n_left;
      for (std::size_t p = begin; p < end; ++p) {
        const std::uint32_t s = range[p];
        scratch_[go_left_[s] ? l++ : r++] = s;
      }
      std::copy(scratch_.begin(), scratch_.begin() + static_cast<std::ptrdiff_t>(end - begin), range + begin);
    };
    for (std::size_t f = 0; f < data_.d; ++f) stable_split(sorted_.data() + f * m);
    stable_split(samples_.data());
    return begin + n_left;
  }

  Split best_split(std::size_t begin, std::size_t end, double c0, double c1, std::uint64_t key) {
    Scan scan{c0 + c1, c0, c1, impurity_from_counts(c0, c1, config_.criterion),
              static_cast<double>(config_.min_samples_leaf), config_.criterion, {}, kMinGain};

    // Partial Fisher-Yates from the identity: the first mtry_ entries become
    // this node's draw.
    Rng rng(key);
    std::iota(features_.begin(), features_.end(), std::size_t{0});
    for (std::size_t i = 0; i < mtry_; ++i) {
      const std::size_t j = i + rng.below(features_.size() - i);
      std::swap(features_[i], features_[j]);
    }
    candidates_.assign(features_.begin(), features_.begin() + static_cast<std::ptrdiff_t>(mtry_));
    std::sort(candidates_.begin(), candidates_.end());

    const std::size_t m = samples_.size();
    for (std::size_t f : candidates_) {
      const double* col = data_.column(f);
      const std::uint32_t* rk = data_.rank_column(f);
      double l0 = 0.0, l1 = 0.0;
      if (presorted_) {
        const std::uint32_t* order = sorted_.data() + f * m;
        if (rk[order[begin]] == rk[order[end - 1]]) continue;
        for (std::size_t p = begin; p + 1 < end; ++p) {
          const std::uint32_t s = order[p];
          (y_[s] ? l1 : l0) += weight_[s];
          const std::uint32_t next = order[p + 1];
          if (rk[s] != rk[next]) scan.consider(f, l0, l1, col[s], col[next]);
        }
      } else {
        keys_.clear();
        for (std::size_t p = begin; p < end; ++p) {
          const std::uint32_t s = samples_[p];
          keys_.push_back((static_cast<std::uint64_t>(rk[s]) << 32) | s);
        }
        std::sort(keys_.begin(), keys_.end());
        if ((keys_.front() >> 32) == (keys_.back() >> 32)) continue;
        for (std::size_t i = 0; i + 1 < keys_.size(); ++i) {
          const auto s = static_cast<std::uint32_t>(keys_[i]);
          (y_[s] ? l1 : l0) += weight_[s];
          if ((keys_[i] >> 32) != (keys_[i + 1] >> 32)) {
            scan.consider(f, l0, l1, col[s], col[static_cast<std::uint32_t>(keys_[i + 1])]);
          }
        }
      }
    }
    return scan.best;
  }

  const FeatureColumns& data_;
  const Labels& y_;
  const RfConfig& config_;
  std::size_t mtry_;
  bool presorted_ = false;
  std::vector<std::size_t> features_;
  std::vector<std::size_t> candidates_;
  std::vector<std::uint64_t> keys_;
  std::vector<std::uint32_t> samples_;  // distinct sample ids; node ranges are contiguous
  std::vector<std::uint32_t> weight_;   // per sample id
  std::vector<std::uint32_t> sorted_;   // presorted mode: d blocks of samples_.size() ids
  std::vector<std::uint8_t> go_left_;
  std::vector<std::uint32_t> scratch_;
  DecisionTree tree_;
};

void check_training_inputs(const Matrix& X, const Labels& y) {
  if (static_cast<std::size_t>(X.rows()) != y.size()) throw Error(ErrorKind::ShapeMismatch, "X rows != label count");
  if (X.rows() == 0 || X.cols() == 0) throw Error(ErrorKind::ShapeMismatch, "empty design matrix");
  if (!X.allFinite()) throw Error(ErrorKind::NonFiniteValue, "design matrix contains NaN or Inf");
  for (auto v : y) {
    if (v > 1) throw Error(ErrorKind::InvalidArgument, "labels must be 0 or 1");
  }
}

DecisionTree fit_one(const FeatureColumns& data, const Labels& y, const RfConfig& config, std::size_t tree_index) {
  Rng rng(derive_seed(config.seed, tree_index));
  std::vector<std::uint32_t> samples, weights;
  if (config.bootstrap) {
    std::vector<std::uint32_t> counts(data.n, 0);
    for (std::size_t i = 0; i < data.n; ++i) ++counts[rng.below(data.n)];
    for (std::size_t i = 0; i < data.n; ++i) {
      if (counts[i] > 0) {
        samples.push_back(static_cast<std::uint32_t>(i));
        weights.push_back(counts[i]);
      }
    }
  } else {
    samples.resize(data.n);
    std::iota(samples.begin(), samples.end(), 0u);
    weights.assign(data.n, 1);
  }
  TreeBuilder builder(data, y, config);
  return builder.build(std::move(samples), weights, rng.next_u64());
}

}  // namespace

DecisionTree fit_tree(const Matrix& X, const Labels& y, const RfConfig& config, Rng& rng) {
  config.validate();
  check_training_inputs(X, y);
  const FeatureColumns data(X);
  std::vector<std::uint32_t> samples(data.n);
  std::iota(samples.begin(), samples.end(), 0u);
  TreeBuilder builder(data, y, config);
  return builder.build(std::move(samples), std::vector<std::uint32_t>(data.n, 1), rng.next_u64());
}

ForestModel fit_forest(const Matrix& X, const Labels& y, const RfConfig& config, std::size_t threads) {
  config.validate();
  check_training_inputs(X, y);
  const auto positives = std::count(y.begin(), y.end(), std::uint8_t{1});
  if (positives == 0 || static_cast<std::size_t>(positives) == y.size()) {
    throw Error(ErrorKind::SingleClassTraining, "forest training labels contain a single class");
  }
  const FeatureColumns data(X);
  ForestModel forest;
  forest.config = config;
  forest.n_features = data.d;
  forest.trees.resize(config.n_estimators);
  parallel_for(
      config.n_estimators, [&](std::size_t t) { forest.trees[t] = fit_one(data, y, config, t); }, threads);
  return forest;
}

std::vector<double> ForestModel::predict_proba(const Matrix& X) const { return predict_proba(X, trees.size()); }

std::vector<double> ForestModel::predict_proba(const Matrix& X, std::size_t n_trees) const {
  return predict_proba(X, n_trees, TreeLimits{std::nullopt, 0});
}

std::vector<double> ForestModel::predict_proba(const Matrix& X, std::size_t n_trees, const TreeLimits& limits) const {
  if (static_cast<std::size_t>(X.cols()) != n_features) {
    throw Error(ErrorKind::ShapeMismatch, "forest expects " + std::to_string(n_features) + " features, got " +
                                              std::to_string(X.cols()));
  }
  if (n_trees == 0 || n_trees > trees.size()) throw Error(ErrorKind::InvalidArgument, "tree count out of range");
  std::vector<double> out(static_cast<std::size_t>(X.rows()), 0.0);
  std::vector<double> row(n_features);
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    for (std::size_t f = 0; f < n_features; ++f) row[f] = X(i, static_cast<Eigen::Index>(f));
    double sum = 0.0;
    for (std::size_t t = 0; t < n_trees; ++t) sum += trees[t].predict(row, limits);
    out[static_cast<std::size_t>(i)] = sum / static_cast<double>(n_trees);
  }
  return out;
}

std::string ForestModel::serialize() const {
  std::ostringstream out;
  char buf[64];
  out << "forest n_features=" << n_features << " n_estimators=" << config.n_estimators
      << " max_depth=" << format_max_depth(config.max_depth) << " max_features=" << config.max_features.to_string()
      << " min_samples_split=" << config.min_samples_split << " min_samples_leaf=" << config.min_samples_leaf
      << " criterion=" << criterion_name(config.criterion) << " bootstrap=" << config.bootstrap
      << " seed=" << config.seed << '\n';
  for (std::size_t t = 0; t < trees.size(); ++t) {
    out << "tree " << t << ' ' << trees[t].nodes.size() << '\n';
    for (const TreeNode& node : trees[t].nodes) {
      std::snprintf(buf, sizeof buf, "%a", node.threshold);
      out << node.feature << ' ' << buf << ' ' << node.left << ' ' << node.right << ' ';
      std::snprintf(buf, sizeof buf, "%a", node.p1);
      out << buf << ' ';
      std::snprintf(buf, sizeof buf, "%a", node.sample_count);
      out << buf << '\n';
    }
  }
  return out.str();
}

std::string format_max_depth(const std::optional<std::size_t>& depth) {
  return depth ? std::to_string(*depth) : std::string("none");
}

}  // namespace mvrad
