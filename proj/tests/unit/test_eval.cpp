#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "mvrad/artifacts.hpp"
#include "mvrad/error.hpp"
#include "mvrad/experiment.hpp"
#include "mvrad/metrics.hpp"
#include "mvrad/projection.hpp"
#include "mvrad/rng.hpp"

using namespace mvrad;

namespace {

double pairwise_auc(const std::vector<double>& s, const Labels& y) {
  double wins = 0, pairs = 0;
  for (std::size_t i = 0; i < s.size(); ++i)
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (y[i] != 1 || y[j] != 0) continue;
      pairs += 1;
      wins += s[i] > s[j] ? 1.0 : (s[i] == s[j] ? 0.5 : 0.0);
    }
  return wins / pairs;
}

Report sample_report() {
  Report r;
  Rng rng(3);
  for (auto name : kModelNames) {
    ModelResult m;
    m.name = std::string(name);
    std::vector<double> s(30);
    Labels y(30);
    for (std::size_t i = 0; i < 30; ++i) {
      y[i] = i % 3 == 0;
      s[i] = std::round(rng.uniform() * 8) / 8 + 0.2 * y[i];
    }
    m.roc = roc_curve(s, y);
    m.auc = m.roc.auc;
    m.feature_dim = 12;
    m.hyperparameters = {{"n_estimators", 100}, {"max_depth", nullptr}, {"max_features", "sqrt"}};
    if (name == "early-fusion-tuned") m.cv_mean_auc = 0.7123456789012345;
    r.models.push_back(m);
  }
  r.seeds = {{"experiment", 7}, {"split", 123456789012345ULL}};
  r.split = {{"n_train", 300}, {"n_test", 100}};
  r.config = {{"beta", 0.3}, {"lr", 1e-3}};
  r.versions = {{"mvrad", "1.0.0"}};
  r.timing = {{"total_seconds", 1.5}};
  r.oracle_auc = 0.93;
  LatentProjection p;
  p.model = "mvvae-latent";
  p.coords = Matrix(4, 2);
  p.coords << 0.1, -0.2, 1.0 / 3.0, 0.0, -1.5, 2.25, 0.0, -0.0;
  p.subject_ids = {"A", "B", "C", "D"};
  p.probability = {0.1, 0.9, 0.5, 0.25};
  p.labels = {0, 1, 1, 0};
  p.variance = {2.0, 0.5};
  r.projections.push_back(p);
  return r;
}

}  // namespace

TEST_CASE("auc examples") {
  const std::vector<double> s{0.1, 0.4, 0.35, 0.8};
  const Labels y{0, 0, 1, 1};
  CHECK(auc(s, y) == 0.75);
  CHECK(auc(std::vector<double>{0.1, 0.2, 0.8, 0.9}, y) == 1.0);
  CHECK(auc(std::vector<double>{0.5, 0.5, 0.5, 0.5}, y) == 0.5);
  CHECK_THROWS_AS(auc(std::vector<double>{0.1, 0.2}, Labels{1, 1}), Error);
}

TEST_CASE("auc, roc area and brute-force pair counting agree") {
  double worst = 0;
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    Rng rng(seed);
    const std::size_t n = 2 + rng.below(49);
    std::vector<double> s(n);
    Labels y(n);
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = seed % 2 ? std::round(rng.uniform() * 5) : rng.normal();
      y[i] = rng.uniform() < 0.5;
    }
    y[0] = 0;
    y[1] = 1;
    const double a = auc(s, y);
    const RocResult roc = roc_curve(s, y);
    worst = std::max(worst, std::abs(a - roc.auc));
    worst = std::max(worst, std::abs(a - pairwise_auc(s, y)));
    REQUIRE(roc.points.front().fpr == 0.0);
    REQUIRE(roc.points.front().tpr == 0.0);
    REQUIRE(roc.points.back().fpr == 1.0);
    REQUIRE(roc.points.back().tpr == 1.0);
    for (std::size_t i = 1; i < roc.points.size(); ++i) {
      CHECK(roc.points[i].fpr >= roc.points[i - 1].fpr);
      CHECK(roc.points[i].tpr >= roc.points[i - 1].tpr);
    }

    // Strictly increasing transforms leave the ranking unchanged.
    std::vector<double> t(n);
    for (std::size_t i = 0; i < n; ++i) t[i] = std::exp(s[i] / 3.0) * 2 - 1;
    CHECK(auc(t, y) == a);
    Labels flipped(n);
    for (std::size_t i = 0; i < n; ++i) flipped[i] = 1 - y[i];
    CHECK(auc(s, flipped) == doctest::Approx(1.0 - a).epsilon(1e-14));
  }
  CHECK(worst < 1e-12);
}

TEST_CASE("roc of a perfect classifier passes through the corner") {
  auto roc = roc_curve(std::vector<double>{0.1, 0.2, 0.8, 0.9}, Labels{0, 0, 1, 1});
  bool corner = false;
  for (const auto& p : roc.points) corner |= p.fpr == 0.0 && p.tpr == 1.0;
  CHECK(corner);
  CHECK(std::isinf(roc.points.front().threshold));
}

TEST_CASE("2-D projection") {
  Rng rng(2);
  Matrix data(50, 2);
  for (Eigen::Index i = 0; i < 50; ++i) {
    data(i, 0) = rng.normal() * 3 + 5;
    data(i, 1) = rng.normal() + data(i, 0) * 0.5;
  }
  auto p = project_2d(data, 1);
  Matrix centred = data.rowwise() - data.colwise().mean();
  double worst = 0;
  for (Eigen::Index i = 0; i < 50; ++i)
    for (Eigen::Index j = 0; j < 50; ++j)
      worst = std::max(worst, std::abs((centred.row(i) - centred.row(j)).norm() - (p.coords.row(i) - p.coords.row(j)).norm()));
  CHECK(worst < 1e-8);
  CHECK(p.variance[0] >= p.variance[1]);
  CHECK(std::abs(p.coords.col(0).mean()) < 1e-10);
  CHECK(std::abs(p.coords.col(1).mean()) < 1e-10);

  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng r(seed);
    Matrix m(30, 12);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = r.normal() * (1 + i % 12);
    auto q = project_2d(m, seed);
    CHECK(q.variance[0] >= q.variance[1]);
    CHECK((q.components.transpose() * q.components - Matrix::Identity(2, 2)).cwiseAbs().maxCoeff() < 1e-8);
    // Top eigenvalue of the sample covariance, by a direct solver.
    Matrix c = m.rowwise() - m.colwise().mean();
    Eigen::SelfAdjointEigenSolver<Matrix> es(c.transpose() * c / 29.0);
    CHECK(q.variance[0] == doctest::Approx(es.eigenvalues()(11)).epsilon(1e-6));
    CHECK(q.variance[1] == doctest::Approx(es.eigenvalues()(10)).epsilon(1e-6));
  }
}

TEST_CASE("metrics document round trips") {
  const Report r = sample_report();
  const std::string text = render_metrics_json(r);
  const Report back = parse_metrics_json(text);
  CHECK(back == r);
  CHECK(render_metrics_json(back) == text);
  CHECK_THROWS_AS(parse_metrics_json("{\"models\": 3}"), Error);
}

TEST_CASE("artifact files") {
  const Report r = sample_report();
  const auto dir = std::filesystem::temp_directory_path() / "mvrad_artifacts_test";
  std::filesystem::remove_all(dir);
  const auto written = emit_artifacts(r, dir);
  std::size_t csv = 0, svg = 0, json = 0;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    const auto ext = entry.path().extension();
    csv += ext == ".csv";
    svg += ext == ".svg";
    json += ext == ".json";
  }
  CHECK(written.size() == 8);
  CHECK(csv == 5);
  CHECK(svg == 2);
  CHECK(json == 1);

  for (const auto& m : r.models) {
    std::ifstream in(dir / ("roc_" + m.name + ".csv"));
    std::string line;
    std::size_t rows = 0;
    std::getline(in, line);
    CHECK(line == "threshold,fpr,tpr");
    while (std::getline(in, line)) ++rows;
    CHECK(rows == m.roc.points.size());
  }
  CHECK(load_metrics_json(dir / "metrics.json") == r);
  std::filesystem::remove_all(dir);
}

TEST_CASE("svg output is well formed") {
  const Report r = sample_report();
  const std::string bar = render_auc_bar_svg(r);
  CHECK(bar.find("<svg") != std::string::npos);
  CHECK(bar.find("</svg>") != std::string::npos);
  for (auto name : kModelNames) CHECK(bar.find(std::string(name)) != std::string::npos);
  const std::string scatter = render_latent_scatter_svg(r.projections[0], 0.8);
  CHECK(scatter.find("<circle") != std::string::npos);
  CHECK(scatter.find("nan") == std::string::npos);
  CHECK(render_latent_scatter_svg(r.projections[0], 0.8) == scatter);
}
