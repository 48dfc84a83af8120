#pragma once

// Shared domain types and their on-disk formats.
//
// Array objects (recordings, feature matrices) use a two-file layout: a JSON
// header next to a raw little-endian float32 payload. Everything else is a
// single JSON document, except rankings (CSV) and markers (JSON lines).

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

namespace eegrf {

// Presentation structure of one query: 5 blocks of 200 images, 10 targets each.
inline constexpr int kBlocksPerQuery = 5;
inline constexpr int kImagesPerBlock = 200;
inline constexpr int kTargetsPerBlock = 10;
inline constexpr int kImagesPerQuery = kBlocksPerQuery * kImagesPerBlock;
inline constexpr int kTargetsPerQuery = kBlocksPerQuery * kTargetsPerBlock;

// Dense row-major float32 matrix.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<float> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, float fill = 0.0f) : rows(r), cols(c), data(r * c, fill) {}

  float& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  float operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

  std::span<float> row(std::size_t r) { return {data.data() + r * cols, cols}; }
  std::span<const float> row(std::size_t r) const { return {data.data() + r * cols, cols}; }

  bool operator==(const Matrix&) const = default;
};

// Multichannel EEG in microvolts; samples is n_channels x n_samples.
struct RawRecording {
  int sample_rate_hz = 0;
  std::vector<std::string> channel_labels;
  Matrix samples;

  std::size_t n_channels() const { return samples.rows; }
  std::size_t n_samples() const { return samples.cols; }

  bool operator==(const RawRecording&) const = default;
};

struct EventMarker {
  std::int64_t onset_sample = 0;
  std::string image_id;
  bool is_target = false;
  int block_index = 0;
  std::string query_id;

  bool operator==(const EventMarker&) const = default;
};

struct Epoch {
  std::string image_id;
  bool is_target = false;
  Matrix data;  // n_channels x n_epoch_samples
  int epoch_sample_rate_hz = 0;
};

struct FeatureVector {
  std::string image_id;
  bool is_target = false;
  std::vector<float> values;
};

// Rows follow image_ids; the order of image_ids is the only ordering that
// carries meaning.
struct FeatureMatrix {
  std::vector<std::string> image_ids;
  Matrix values;

  std::size_t n_rows() const { return values.rows; }
  std::size_t n_dims() const { return values.cols; }

  bool operator==(const FeatureMatrix&) const = default;
};

// A feature matrix together with per-row target labels.
struct LabeledFeatures {
  FeatureMatrix matrix;
  std::vector<bool> is_target;

  std::size_t n_targets() const;
};

struct PlanItem {
  std::string image_id;
  bool is_target = false;

  bool operator==(const PlanItem&) const = default;
};

struct RsvpPlan {
  std::string query_id;
  int rate_hz = 5;
  std::vector<std::vector<PlanItem>> blocks;
  double inter_block_gap_s = 5.0;
  std::uint64_t seed = 0;

  // Blocks concatenated in presentation order.
  std::vector<PlanItem> presentation_order() const;

  bool operator==(const RsvpPlan&) const = default;
};

// Checks the block structure: 5 blocks of 200 images with exactly 10 targets
// each, no repeated id, rate in {5, 10}. Throws DataError.
void validate_plan(const RsvpPlan& plan);

enum class AnnotationMode { kMouse, kRsvp };
enum class EventKind { kShow, kClick, kNext, kButton };

struct AnnotationEvent {
  std::int64_t t_ms = 0;
  EventKind kind = EventKind::kShow;
  std::optional<std::string> image_id;
  std::optional<int> page;
  std::optional<std::int64_t> seq;         // client sequence number
  std::optional<std::int64_t> arrival_ms;  // server receive time

  bool operator==(const AnnotationEvent&) const = default;
};

struct AnnotationLog {
  std::string session_id;
  AnnotationMode mode = AnnotationMode::kMouse;
  int rate_hz = 5;
  double duration_s = 200.0;
  std::vector<AnnotationEvent> events;
  // Events received after the time budget ran out. Kept for the record,
  // never used for ranking.
  std::vector<AnnotationEvent> late_events;

  bool operator==(const AnnotationLog&) const = default;
};

// Checks that t_ms is non-decreasing and within the budget, and that every
// click/button event names an image shown at or before it. Throws
// LogConsistencyError.
void validate_log(const AnnotationLog& log);

struct RankEntry {
  std::string image_id;
  std::optional<double> score;

  bool operator==(const RankEntry&) const = default;
};

struct Ranking {
  std::string query_id;
  std::vector<RankEntry> entries;

  std::vector<std::string> ids() const;

  bool operator==(const Ranking&) const = default;
};

// Positive / negative training examples for relevance feedback.
struct FeedbackLabels {
  std::vector<std::string> positives;
  std::vector<std::string> negatives;

  bool operator==(const FeedbackLabels&) const = default;
};

const char* to_string(AnnotationMode mode);
const char* to_string(EventKind kind);
AnnotationMode parse_mode(const std::string& s);
EventKind parse_event_kind(const std::string& s);

// JSON conversions. from_json variants throw FormatError naming the field.
nlohmann::json to_json(const EventMarker& m);
EventMarker marker_from_json(const nlohmann::json& j);
nlohmann::json to_json(const RsvpPlan& plan);
RsvpPlan plan_from_json(const nlohmann::json& j);
nlohmann::json to_json(const AnnotationEvent& e);
AnnotationEvent event_from_json(const nlohmann::json& j);
nlohmann::json to_json(const AnnotationLog& log);
AnnotationLog log_from_json(const nlohmann::json& j);
nlohmann::json to_json(const FeedbackLabels& labels);
FeedbackLabels labels_from_json(const nlohmann::json& j);

// `base` is the path without suffix: `<base>.rec.json` + `<base>.rec.f32`.
// A base that already ends in `.rec.json` is accepted.
void save_recording(const RawRecording& rec, const std::filesystem::path& base);
RawRecording load_recording(const std::filesystem::path& base);

// `<base>.feat.json` + `<base>.feat.f32`, row-major.
void save_feature_matrix(const FeatureMatrix& fm, const std::filesystem::path& base);
FeatureMatrix load_feature_matrix(const std::filesystem::path& base);

void save_markers(std::span<const EventMarker> markers, const std::filesystem::path& path);
std::vector<EventMarker> load_markers(const std::filesystem::path& path);

void save_plan(const RsvpPlan& plan, const std::filesystem::path& path);
RsvpPlan load_plan(const std::filesystem::path& path);  // validates

void save_log(const AnnotationLog& log, const std::filesystem::path& path);
AnnotationLog load_log(const std::filesystem::path& path);  // validates

// CSV `rank,image_id,score`, rank 1-based, empty score for null.
void save_ranking(const Ranking& ranking, const std::filesystem::path& path);
Ranking load_ranking(const std::filesystem::path& path, const std::string& query_id = {});
std::string ranking_to_csv(const Ranking& ranking);

void save_json(const nlohmann::json& j, const std::filesystem::path& path);
nlohmann::json load_json(const std::filesystem::path& path);
void save_text(const std::string& text, const std::filesystem::path& path);
std::string load_text(const std::filesystem::path& path);

// Shortest representation that reads back to the same double.
std::string format_double(double v);

}  // namespace eegrf
