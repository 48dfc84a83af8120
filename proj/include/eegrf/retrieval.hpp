#pragma once

// Rankings from EEG scores and from mouse annotations, and relevance-feedback
// re-ranking of a larger feature-indexed collection.

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "eegrf/dataio.hpp"
#include "eegrf/svm.hpp"

namespace eegrf {

struct AnnotationSets {
  std::vector<std::string> p_a;   // clicked, in click-time order
  std::vector<std::string> n_a;   // seen before the last positive click, not clicked; display order
  std::vector<std::string> rest;  // everything else, display order
};

// Descending by score; exact ties keep display order. display_order must
// contain every id. NaN scores are rejected with DataError.
Ranking ranking_from_scores(const std::string& query_id, std::span<const std::string> ids,
                            std::span<const double> scores, std::span<const std::string> display_order);

// Splits the displayed images using a mouse log. Clicks toggle the marked
// state of an image; p_a holds the images marked at the end, ordered by the
// click that marked them. "Seen" means shown by a show event at or before
// the last such click. Throws LogConsistencyError for inconsistent logs.
AnnotationSets annotation_sets(const AnnotationLog& log, std::span<const std::string> display_order);

// p_a, then rest, then n_a; scores are null.
Ranking ranking_from_annotations(const AnnotationSets& sets, const std::string& query_id = {});

// Top n_pos entries become positives, bottom n_neg negatives.
FeedbackLabels select_feedback_labels_eeg(const Ranking& ranking, std::size_t n_pos = 10, std::size_t n_neg = 100);

// p_a positives, n_a negatives. Throws TrainingError if either is empty.
FeedbackLabels select_feedback_labels_mouse(const AnnotationSets& sets);

// Trains a linear SVM on the labeled rows and ranks every row of the matrix
// by decision score (ties in matrix row order).
Ranking feedback_rank(const FeedbackLabels& labels, const FeatureMatrix& features, const std::string& query_id = {},
                      const SvmOptions& options = {});

// Throws DataError unless the ranking is a permutation of ids.
void check_permutation(const Ranking& ranking, std::span<const std::string> ids);

}  // namespace eegrf
