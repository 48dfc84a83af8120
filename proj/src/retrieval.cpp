#include "eegrf/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <unordered_map>
#include <unordered_set>

#include "eegrf/errors.hpp"

namespace eegrf {

namespace {

std::unordered_map<std::string, std::size_t> positions(std::span<const std::string> ids) {
  std::unordered_map<std::string, std::size_t> pos;
  pos.reserve(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (!pos.emplace(ids[i], i).second) throw DataError("duplicate image id '" + ids[i] + "'");
  }
  return pos;
}

}  // namespace

Ranking ranking_from_scores(const std::string& query_id, std::span<const std::string> ids,
                            std::span<const double> scores, std::span<const std::string> display_order) {
  if (ids.size() != scores.size()) {
    throw PreconditionError("ranking_from_scores: " + std::to_string(ids.size()) + " ids for " +
                            std::to_string(scores.size()) + " scores");
  }
  const auto display = positions(display_order);
  std::vector<std::size_t> display_pos(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (std::isnan(scores[i])) throw DataError("ranking_from_scores: NaN score for '" + ids[i] + "'");
    const auto it = display.find(ids[i]);
    if (it == display.end()) throw PreconditionError("ranking_from_scores: '" + ids[i] + "' not in display order");
    display_pos[i] = it->second;
  }
  std::vector<std::size_t> order(ids.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return display_pos[a] < display_pos[b];
  });
  Ranking ranking;
  ranking.query_id = query_id;
  ranking.entries.reserve(ids.size());
  for (std::size_t i : order) ranking.entries.push_back({ids[i], scores[i]});
  return ranking;
}

AnnotationSets annotation_sets(const AnnotationLog& log, std::span<const std::string> display_order) {
  validate_log(log);
  const auto display = positions(display_order);

  constexpr std::int64_t kNever = std::numeric_limits<std::int64_t>::max();
  std::vector<std::int64_t> first_shown(display_order.size(), kNever);
  // Marking click per currently marked image: (time, event index).
  std::unordered_map<std::string, std::pair<std::int64_t, std::size_t>> marked;

  for (std::size_t k = 0; k < log.events.size(); ++k) {
    const auto& e = log.events[k];
    if (e.kind != EventKind::kShow && e.kind != EventKind::kClick) continue;
    const auto it = display.find(*e.image_id);
    if (it == display.end()) {
      throw LogConsistencyError("annotation_sets: event " + std::to_string(k) + " names '" + *e.image_id +
                                "', which is not in the display order");
    }
    if (e.kind == EventKind::kShow) {
      first_shown[it->second] = std::min(first_shown[it->second], e.t_ms);
    } else if (!marked.erase(*e.image_id)) {
      marked.emplace(*e.image_id, std::make_pair(e.t_ms, k));
    }
  }

  AnnotationSets sets;
  std::vector<std::pair<std::pair<std::int64_t, std::size_t>, std::string>> clicks;
  clicks.reserve(marked.size());
  for (const auto& [id, when] : marked) clicks.emplace_back(when, id);
  std::sort(clicks.begin(), clicks.end());
  for (const auto& c : clicks) sets.p_a.push_back(c.second);

  const std::int64_t last_click = clicks.empty() ? std::numeric_limits<std::int64_t>::min() : clicks.back().first.first;
  for (std::size_t i = 0; i < display_order.size(); ++i) {
    const std::string& id = display_order[i];
    if (marked.contains(id)) continue;
    if (first_shown[i] <= last_click) {
      sets.n_a.push_back(id);
    } else {
      sets.rest.push_back(id);
    }
  }
  return sets;
}

Ranking ranking_from_annotations(const AnnotationSets& sets, const std::string& query_id) {
  Ranking ranking;
  ranking.query_id = query_id;
  ranking.entries.reserve(sets.p_a.size() + sets.rest.size() + sets.n_a.size());
  std::unordered_set<std::string> seen;
  for (const auto* part : {&sets.p_a, &sets.rest, &sets.n_a}) {
    for (const auto& id : *part) {
      if (!seen.insert(id).second) throw DataError("annotation sets overlap on '" + id + "'");
      ranking.entries.push_back({id, std::nullopt});
    }
  }
  return ranking;
}

FeedbackLabels select_feedback_labels_eeg(const Ranking& ranking, std::size_t n_pos, std::size_t n_neg) {
  const std::size_t n = ranking.entries.size();
  if (n < n_pos + n_neg) {
    throw PreconditionError("select_feedback_labels_eeg: ranking has " + std::to_string(n) + " entries, need " +
                            std::to_string(n_pos + n_neg));
  }
  FeedbackLabels labels;
  for (std::size_t i = 0; i < n_pos; ++i) labels.positives.push_back(ranking.entries[i].image_id);
  for (std::size_t i = n - n_neg; i < n; ++i) labels.negatives.push_back(ranking.entries[i].image_id);
  return labels;
}

FeedbackLabels select_feedback_labels_mouse(const AnnotationSets& sets) {
  if (sets.p_a.empty()) throw TrainingError("mouse feedback: no clicked images, cannot train");
  if (sets.n_a.empty()) throw TrainingError("mouse feedback: no seen-but-unclicked images, cannot train");
  return {sets.p_a, sets.n_a};
}

Ranking feedback_rank(const FeedbackLabels& labels, const FeatureMatrix& features, const std::string& query_id,
                      const SvmOptions& options) {
  const auto rows = positions(features.image_ids);
  const std::size_t d = features.n_dims();
  Matrix train(labels.positives.size() + labels.negatives.size(), d);
  std::vector<int> y;
  y.reserve(train.rows);
  std::unordered_set<std::string> used;
  std::size_t r = 0;
  for (const auto* part : {&labels.positives, &labels.negatives}) {
    const int label = part == &labels.positives ? 1 : -1;
    for (const auto& id : *part) {
      if (!used.insert(id).second) throw DataError("feedback_rank: '" + id + "' labeled more than once");
      const auto it = rows.find(id);
      if (it == rows.end()) throw PreconditionError("feedback_rank: labeled image '" + id + "' not in feature matrix");
      const auto src = features.values.row(it->second);
      std::copy(src.begin(), src.end(), train.row(r).begin());
      y.push_back(label);
      ++r;
    }
  }
  const SvmModel model = fit_svm(train, y, options);
  const std::vector<double> scores = decision_scores(model, features.values);
  return ranking_from_scores(query_id, features.image_ids, scores, features.image_ids);
}

void check_permutation(const Ranking& ranking, std::span<const std::string> ids) {
  if (ranking.entries.size() != ids.size()) {
    throw DataError("ranking has " + std::to_string(ranking.entries.size()) + " entries for " +
                    std::to_string(ids.size()) + " images");
  }
  std::unordered_set<std::string> expected(ids.begin(), ids.end());
  for (const auto& e : ranking.entries) {
    if (!expected.erase(e.image_id)) throw DataError("ranking entry '" + e.image_id + "' unexpected or repeated");
  }
}

}  // namespace eegrf
