#include "mvrad/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>

#include "mvrad/error.hpp"

namespace mvrad {

namespace {

struct ClassCounts {
  std::uint64_t positives = 0;
  std::uint64_t negatives = 0;
};

ClassCounts validate(std::span<const double> scores, const Labels& labels) {
  if (scores.size() != labels.size()) throw Error(ErrorKind::ShapeMismatch, "scores and labels differ in length");
  ClassCounts c;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (!std::isfinite(scores[i])) throw Error(ErrorKind::NonFiniteValue, "score is not finite");
    if (labels[i] > 1) throw Error(ErrorKind::InvalidArgument, "labels must be 0 or 1");
    (labels[i] ? c.positives : c.negatives) += 1;
  }
  if (c.positives == 0 || c.negatives == 0) {
    throw Error(ErrorKind::SingleClassLabels, "AUC needs both classes present");
  }
  return c;
}

std::vector<std::size_t> order_by_score(std::span<const double> scores, bool descending) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return descending ? scores[a] > scores[b] : scores[a] < scores[b];
  });
  return order;
}

}  // namespace

double auc(std::span<const double> scores, const Labels& labels) {
  const ClassCounts counts = validate(scores, labels);
  const auto order = order_by_score(scores, false);
  // Twice the number of correctly ordered pairs, ties contributing 1.
  std::uint64_t twice_wins = 0;
  std::uint64_t negatives_below = 0;
  for (std::size_t start = 0; start < order.size();) {
    std::size_t stop = start;
    std::uint64_t pos = 0, neg = 0;
    while (stop < order.size() && scores[order[stop]] == scores[order[start]]) {
      (labels[order[stop]] ? pos : neg) += 1;
      ++stop;
    }
    twice_wins += 2 * pos * negatives_below + pos * neg;
    negatives_below += neg;
    start = stop;
  }
  return static_cast<double>(twice_wins) / (2.0 * static_cast<double>(counts.positives) *
                                            static_cast<double>(counts.negatives));
}

double trapezoid_area(const std::vector<RocPoint>& points) {
  double area = 0.0;
  for (std::size_t i = 1; i < points.size(); ++i) {
    area += (points[i].fpr - points[i - 1].fpr) * (points[i].tpr + points[i - 1].tpr) * 0.5;
  }
  return area;
}

RocResult roc_curve(std::span<const double> scores, const Labels& labels) {
  const ClassCounts counts = validate(scores, labels);
  const auto order = order_by_score(scores, true);
  const double P = static_cast<double>(counts.positives);
  const double N = static_cast<double>(counts.negatives);
  RocResult roc;
  roc.points.push_back({0.0, 0.0, std::numeric_limits<double>::infinity()});
  std::uint64_t tp = 0, fp = 0;
  for (std::size_t start = 0; start < order.size();) {
    const double threshold = scores[order[start]];
    std::size_t stop = start;
    while (stop < order.size() && scores[order[stop]] == threshold) {
      (labels[order[stop]] ? tp : fp) += 1;
      ++stop;
    }
    roc.points.push_back({static_cast<double>(fp) / N, static_cast<double>(tp) / P, threshold});
    start = stop;
  }
  roc.auc = trapezoid_area(roc.points);
  return roc;
}

}  // namespace mvrad
