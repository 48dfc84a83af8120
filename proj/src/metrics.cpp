#include "eegrf/metrics.hpp"

#include <algorithm>
#include <boost/math/distributions/students_t.hpp>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>

#include "eegrf/errors.hpp"

namespace eegrf {

namespace {

struct ClassCounts {
  std::uint64_t pos = 0;
  std::uint64_t neg = 0;
};

ClassCounts check_binary(std::span<const double> scores, const std::vector<bool>& is_positive) {
  if (scores.size() != is_positive.size()) {
    throw PreconditionError("metric: " + std::to_string(scores.size()) + " scores for " +
                            std::to_string(is_positive.size()) + " labels");
  }
  ClassCounts counts;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (std::isnan(scores[i])) throw DataError("metric: NaN score at index " + std::to_string(i));
    if (is_positive[i]) {
      ++counts.pos;
    } else {
      ++counts.neg;
    }
  }
  if (counts.pos == 0 || counts.neg == 0) {
    throw UndefinedMetricError("metric: ROC/AUC needs both positive and negative examples");
  }
  return counts;
}

std::vector<std::size_t> order_by_score(std::span<const double> scores, bool descending) {
  std::vector<std::size_t> idx(scores.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    return descending ? scores[a] > scores[b] : scores[a] < scores[b];
  });
  return idx;
}

}  // namespace

double roc_auc(std::span<const double> scores, const std::vector<bool>& is_positive) {
  const ClassCounts counts = check_binary(scores, is_positive);
  const auto idx = order_by_score(scores, false);
  // Twice the Mann-Whitney U, kept as an integer so ties are exact.
  std::uint64_t twice_wins = 0;
  std::uint64_t neg_below = 0;
  for (std::size_t g = 0; g < idx.size();) {
    std::size_t end = g;
    std::uint64_t pos = 0;
    std::uint64_t neg = 0;
    while (end < idx.size() && scores[idx[end]] == scores[idx[g]]) {
      if (is_positive[idx[end]]) {
        ++pos;
      } else {
        ++neg;
      }
      ++end;
    }
    twice_wins += 2 * pos * neg_below + pos * neg;
    neg_below += neg;
    g = end;
  }
  return static_cast<double>(twice_wins) / (2.0 * static_cast<double>(counts.pos) * static_cast<double>(counts.neg));
}

std::vector<RocPoint> roc_curve(std::span<const double> scores, const std::vector<bool>& is_positive) {
  const ClassCounts counts = check_binary(scores, is_positive);
  const auto idx = order_by_score(scores, true);
  std::vector<RocPoint> curve;
  curve.push_back({0.0, 0.0, std::numeric_limits<double>::infinity()});
  std::uint64_t tp = 0;
  std::uint64_t fp = 0;
  for (std::size_t g = 0; g < idx.size();) {
    const double threshold = scores[idx[g]];
    while (g < idx.size() && scores[idx[g]] == threshold) {
      if (is_positive[idx[g]]) {
        ++tp;
      } else {
        ++fp;
      }
      ++g;
    }
    curve.push_back({static_cast<double>(fp) / static_cast<double>(counts.neg),
                     static_cast<double>(tp) / static_cast<double>(counts.pos), threshold});
  }
  return curve;
}

double trapezoid_area(std::span<const RocPoint> curve) {
  double area = 0.0;
  for (std::size_t k = 1; k < curve.size(); ++k) {
    area += (curve[k].fpr - curve[k - 1].fpr) * (curve[k].tpr + curve[k - 1].tpr) / 2.0;
  }
  return area;
}

double average_precision(const std::vector<bool>& relevant_by_rank) {
  double sum = 0.0;
  std::size_t hits = 0;
  for (std::size_t k = 0; k < relevant_by_rank.size(); ++k) {
    if (!relevant_by_rank[k]) continue;
    ++hits;
    sum += static_cast<double>(hits) / static_cast<double>(k + 1);
  }
  if (hits == 0) throw UndefinedMetricError("average_precision: no relevant items");
  return sum / static_cast<double>(hits);
}

double average_precision(const Ranking& ranking, const std::unordered_set<std::string>& relevant) {
  if (relevant.empty()) throw UndefinedMetricError("average_precision: relevant set is empty");
  std::vector<bool> rel;
  rel.reserve(ranking.entries.size());
  std::size_t found = 0;
  for (const auto& e : ranking.entries) {
    const bool r = relevant.contains(e.image_id);
    found += r ? 1 : 0;
    rel.push_back(r);
  }
  if (found != relevant.size()) {
    throw DataError("average_precision: " + std::to_string(relevant.size() - found) +
                    " relevant ids are missing from the ranking");
  }
  return average_precision(rel);
}

double mean_ap(std::span<const double> aps) {
  if (aps.empty()) throw UndefinedMetricError("mean_ap: no queries");
  return mean(aps);
}

double mean(std::span<const double> values) {
  if (values.empty()) throw PreconditionError("mean: empty input");
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  double sum = 0.0;
  for (double v : sorted) sum += v;
  return sum / static_cast<double>(sorted.size());
}

double sample_variance(std::span<const double> values) {
  if (values.size() < 2) throw PreconditionError("sample_variance: needs at least 2 values");
  const double m = mean(values);
  double ss = 0.0;
  for (double v : values) ss += (v - m) * (v - m);
  return ss / static_cast<double>(values.size() - 1);
}

TTestResult welch_t_test(std::span<const double> group_a, std::span<const double> group_b) {
  if (group_a.size() < 2 || group_b.size() < 2) {
    throw PreconditionError("welch_t_test: each group needs at least 2 values");
  }
  const double va = sample_variance(group_a);
  const double vb = sample_variance(group_b);
  if (!(va > 0.0) || !(vb > 0.0)) throw PreconditionError("welch_t_test: degenerate (zero) variance");
  const double na = static_cast<double>(group_a.size());
  const double nb = static_cast<double>(group_b.size());
  const double sa = va / na;
  const double sb = vb / nb;
  TTestResult r;
  r.t = (mean(group_a) - mean(group_b)) / std::sqrt(sa + sb);
  r.df = (sa + sb) * (sa + sb) / (sa * sa / (na - 1.0) + sb * sb / (nb - 1.0));
  const boost::math::students_t dist(r.df);
  r.p = 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(r.t)));
  r.p = std::min(r.p, 1.0);
  return r;
}

}  // namespace eegrf
