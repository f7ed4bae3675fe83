#pragma once

#include <span>
#include <vector>

#include "mvrad/types.hpp"

namespace mvrad {

struct RocPoint {
  double fpr = 0.0;
  double tpr = 0.0;
  double threshold = 0.0;  ///< score >= threshold counts as positive; +inf for the origin

  bool operator==(const RocPoint&) const = default;
};

struct RocResult {
  std::vector<RocPoint> points;  ///< (0,0) first, (1,1) last, fpr and tpr non-decreasing
  double auc = 0.0;              ///< trapezoidal area under `points`

  bool operator==(const RocResult&) const = default;
};

/// Mann-Whitney AUC: the fraction of (positive, negative) pairs ranked
/// correctly, ties counting one half. Computed exactly from integer counts.
double auc(std::span<const double> scores, const Labels& labels);

/// ROC points at each distinct score (descending, ties grouped).
RocResult roc_curve(std::span<const double> scores, const Labels& labels);

/// Trapezoidal area under an ROC polyline.
double trapezoid_area(const std::vector<RocPoint>& points);

}  // namespace mvrad
