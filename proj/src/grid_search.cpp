#include <algorithm>
#include <cstdio>
#include <sstream>

#include "mvrad/dataset.hpp"
#include "mvrad/error.hpp"
#include "mvrad/forest.hpp"
#include "mvrad/log.hpp"
#include "mvrad/metrics.hpp"
#include "mvrad/parallel.hpp"

namespace mvrad {

std::size_t HyperGrid::size() const {
  return n_estimators.size() * max_depth.size() * max_features.size() * min_samples_split.size() *
         min_samples_leaf.size();
}

void HyperGrid::validate() const {
  if (size() == 0) throw Error(ErrorKind::InvalidArgument, "hyperparameter grid is empty");
  for (std::size_t id = 0; id < size(); ++id) at(id).validate();
}

RfConfig HyperGrid::at(std::size_t config_id) const {
  if (config_id >= size()) throw Error(ErrorKind::InvalidArgument, "config id out of range");
  RfConfig c = base;
  std::size_t rest = config_id;
  c.min_samples_leaf = min_samples_leaf[rest % min_samples_leaf.size()];
  rest /= min_samples_leaf.size();
  c.min_samples_split = min_samples_split[rest % min_samples_split.size()];
  rest /= min_samples_split.size();
  c.max_features = max_features[rest % max_features.size()];
  rest /= max_features.size();
  c.max_depth = max_depth[rest % max_depth.size()];
  rest /= max_depth.size();
  c.n_estimators = n_estimators[rest];
  return c;
}

GridSearchResult grid_search_cv(const Matrix& X, const Labels& y, const HyperGrid& grid, std::size_t k,
                                std::uint64_t seed, std::size_t threads) {
  grid.validate();
  if (static_cast<std::size_t>(X.rows()) != y.size()) throw Error(ErrorKind::ShapeMismatch, "X rows != label count");
  const auto folds = stratified_split(y, k, seed);

  GridSearchResult result;
  result.folds = k;
  const std::size_t n_configs = grid.size();
  for (std::size_t id = 0; id < n_configs; ++id) result.configs.push_back(grid.at(id));

  std::vector<Matrix> train_x(k), val_x(k);
  std::vector<Labels> train_y(k), val_y(k);
  for (std::size_t f = 0; f < k; ++f) {
    RowIndex train_rows;
    for (std::size_t g = 0; g < k; ++g) {
      if (g != f) train_rows.insert(train_rows.end(), folds[g].begin(), folds[g].end());
    }
    std::sort(train_rows.begin(), train_rows.end());
    train_x[f] = select_rows(X, train_rows);
    train_y[f] = select_labels(y, train_rows);
    val_x[f] = select_rows(X, folds[f]);
    val_y[f] = select_labels(y, folds[f]);
  }

  // Tree t of a forest depends only on (max_features, min_samples_leaf,
  // criterion, bootstrap, seed, t): n_estimators picks a prefix of the trees,
  // and max_depth / min_samples_split only cut trees short (see TreeLimits).
  // So one forest per (max_features, min_samples_leaf) and fold, grown at the
  // largest size with the loosest limits, scores every configuration in that
  // group; each entry equals an independent fit of its configuration.
  const std::size_t largest = *std::max_element(grid.n_estimators.begin(), grid.n_estimators.end());
  const std::size_t loosest_split = *std::min_element(grid.min_samples_split.begin(), grid.min_samples_split.end());
  std::optional<std::size_t> loosest_depth = 0;
  for (const auto& depth : grid.max_depth) {
    if (!depth || !loosest_depth) {
      loosest_depth = std::nullopt;
    } else {
      loosest_depth = std::max(*loosest_depth, *depth);
    }
  }
  const std::size_t n_leaf = grid.min_samples_leaf.size();
  const std::size_t group_count = grid.max_features.size() * n_leaf;
  std::vector<std::vector<std::size_t>> members(group_count);
  for (std::size_t id = 0; id < n_configs; ++id) {
    const RfConfig& c = result.configs[id];
    const auto mf = static_cast<std::size_t>(
        std::find(grid.max_features.begin(), grid.max_features.end(), c.max_features) - grid.max_features.begin());
    const auto leaf = static_cast<std::size_t>(
        std::find(grid.min_samples_leaf.begin(), grid.min_samples_leaf.end(), c.min_samples_leaf) -
        grid.min_samples_leaf.begin());
    members[mf * n_leaf + leaf].push_back(id);
  }

  std::vector<double> aucs(n_configs * k, 0.0);
  parallel_for(
      group_count * k,
      [&](std::size_t task) {
        const std::size_t group = task / k;
        const std::size_t fold = task % k;
        if (members[group].empty()) return;
        RfConfig config = result.configs[members[group].front()];
        config.n_estimators = largest;
        config.max_depth = loosest_depth;
        config.min_samples_split = loosest_split;
        const ForestModel forest = fit_forest(train_x[fold], train_y[fold], config, 1);
        for (std::size_t id : members[group]) {
          const RfConfig& c = result.configs[id];
          const auto scores =
              forest.predict_proba(val_x[fold], c.n_estimators, TreeLimits{c.max_depth, c.min_samples_split});
          aucs[id * k + fold] = auc(scores, val_y[fold]);
        }
      },
      threads);

  result.mean_auc.assign(n_configs, 0.0);
  for (std::size_t id = 0; id < n_configs; ++id) {
    double sum = 0.0;
    for (std::size_t f = 0; f < k; ++f) {
      result.fits.push_back({id, f, aucs[id * k + f]});
      sum += aucs[id * k + f];
    }
    result.mean_auc[id] = sum / static_cast<double>(k);
  }
  result.best_id = 0;
  for (std::size_t id = 1; id < n_configs; ++id) {
    if (result.mean_auc[id] > result.mean_auc[result.best_id]) result.best_id = id;
  }
  result.best = result.configs[result.best_id];
  result.best_mean_auc = result.mean_auc[result.best_id];
  log_info("grid-search", {{"configs", std::to_string(n_configs)},
                           {"fits", std::to_string(result.fits.size())},
                           {"best_id", std::to_string(result.best_id)},
                           {"best_mean_auc", fmt_double(result.best_mean_auc)}});
  return result;
}

std::string cv_table_csv(const GridSearchResult& result) {
  std::ostringstream out;
  out << "config_id,n_estimators,max_depth,max_features,min_samples_split,min_samples_leaf,fold,auc\n";
  char buf[40];
  for (const CvFit& fit : result.fits) {
    const RfConfig& c = result.configs[fit.config_id];
    std::snprintf(buf, sizeof buf, "%.17g", fit.auc);
    out << fit.config_id << ',' << c.n_estimators << ',' << format_max_depth(c.max_depth) << ','
        << c.max_features.to_string() << ',' << c.min_samples_split << ',' << c.min_samples_leaf << ',' << fit.fold
        << ',' << buf << '\n';
  }
  return out.str();
}

}  // namespace mvrad
