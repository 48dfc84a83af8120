#pragma once

#include <span>
#include <string>
#include <unordered_set>
#include <vector>

#include "eegrf/dataio.hpp"

namespace eegrf {

// Mann-Whitney AUC: fraction of (positive, negative) pairs where the positive
// scores higher, ties counting one half. Throws UndefinedMetricError when a
// class is missing, DataError on NaN scores.
double roc_auc(std::span<const double> scores, const std::vector<bool>& is_positive);

struct RocPoint {
  double fpr = 0.0;
  double tpr = 0.0;
  double threshold = 0.0;  // score at which this point is reached (+inf for the origin)
};

// One point per distinct score, from (0,0) to (1,1), thresholds descending.
std::vector<RocPoint> roc_curve(std::span<const double> scores, const std::vector<bool>& is_positive);

// Trapezoidal area under a curve from roc_curve.
double trapezoid_area(std::span<const RocPoint> curve);

// Mean over relevant items of precision at the item's rank.
double average_precision(const std::vector<bool>& relevant_by_rank);

// relevant must be non-empty (UndefinedMetricError) and contained in the
// ranking (DataError).
double average_precision(const Ranking& ranking, const std::unordered_set<std::string>& relevant);

// Mean of per-query APs. Values are summed in sorted order, so the result
// does not depend on the order of the input.
double mean_ap(std::span<const double> aps);

double mean(std::span<const double> values);
double sample_variance(std::span<const double> values);

struct TTestResult {
  double t = 0.0;
  double df = 0.0;
  double p = 1.0;  // two-sided
};

// Welch's unequal-variance t-test with the Welch-Satterthwaite df. Each group
// needs >= 2 values and non-zero variance (PreconditionError otherwise).
TTestResult welch_t_test(std::span<const double> group_a, std::span<const double> group_b);

}  // namespace eegrf
