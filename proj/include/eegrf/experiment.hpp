#pragma once

// Experiment harness over synthetic users: EEG and mouse rankings of the
// three query sessions, relevance feedback over each query's collection, and
// the profile x rate x modality comparison grid. All numbers it produces come
// from simulated users.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

#include "eegrf/dataio.hpp"
#include "eegrf/fixtures.hpp"
#include "eegrf/metrics.hpp"
#include "eegrf/signal_pipeline.hpp"
#include "eegrf/svm.hpp"
#include "eegrf/synth.hpp"

namespace eegrf {

// Headless stand-in for a person using the grid interface: scans the
// display order page by page at a fixed pace and clicks a target with
// probability detection_p when it is scanned.
struct AnnotatorPolicy {
  double images_per_s = 2.0;
  double detection_p = 0.9;
  int page_size = 20;
};

nlohmann::json to_json(const AnnotatorPolicy& p);
AnnotatorPolicy annotator_policy_from_json(const nlohmann::json& j);

std::vector<std::vector<std::string>> paginate(std::span<const std::string> display_order, int page_size);

// Page p is shown (one show event per image) when the previous page has been
// scanned, preceded by a next event. Image k of the whole order is scanned at
// (k + 1) / images_per_s seconds. Nothing happens after duration_s.
AnnotationLog simulate_annotator(std::span<const std::string> display_order, const std::vector<bool>& is_target,
                                 const AnnotatorPolicy& policy, double duration_s, std::uint64_t seed,
                                 const std::string& session_id = "sim");

struct ExperimentSetup {
  FeatureSetOptions feature_set;
  std::uint64_t dataset_seed = 1;  // collections and session image choice
  double inter_block_gap_s = 5.0;
  PipelineConfig pipeline;
  SvmOptions svm;
  AnnotatorPolicy annotator;
  int n_pos = 10;
  int n_neg = 100;
};

nlohmann::json to_json(const ExperimentSetup& s);
ExperimentSetup experiment_setup_from_json(const nlohmann::json& j);

// One query: an image-feature collection and the 1000 images of its session.
struct QueryCollection {
  std::string query_id;
  FeatureSet set;
  SessionImages session;
  std::unordered_set<std::string> relevant;         // over the whole collection
  std::unordered_set<std::string> session_targets;  // the 50 session targets
};

// Queries q1, q2, q3; fixed by setup.dataset_seed.
std::vector<QueryCollection> make_collections(const ExperimentSetup& setup);

RsvpPlan session_plan(const QueryCollection& query, std::size_t query_index, int rate_hz, std::uint64_t seed,
                      double inter_block_gap_s);

struct QueryOutcome {
  std::string query_id;
  Ranking ranking;                // the 1000 session images
  std::optional<double> auc;      // EEG only
  std::vector<RocPoint> roc;      // EEG only
  double ap = 0.0;                // session ranking against the session targets
  std::optional<double> feedback_ap;
  bool feedback_trained = false;  // false when the labels could not train a model
};

struct ArmOutcome {
  std::vector<QueryOutcome> queries;
  std::optional<double> mean_auc;
  double map = 0.0;
  std::optional<double> feedback_map;
};

// Simulates the three sessions for `profile` (its seed is combined with
// `seed`), runs the pipeline and leave-one-query-out scoring.
ArmOutcome run_eeg_arm(const std::vector<QueryCollection>& queries, const UserProfile& profile, int rate_hz,
                       std::uint64_t seed, const ExperimentSetup& setup, bool with_feedback);

// Mouse sessions over the same display orders with a budget of 1000 / rate s
// unless duration_s is given.
ArmOutcome run_mouse_arm(const std::vector<QueryCollection>& queries, int rate_hz, std::uint64_t seed,
                         const ExperimentSetup& setup, bool with_feedback,
                         std::optional<double> duration_s = std::nullopt, std::uint64_t annotator_stream = 0);

// Ranks the whole collection from feedback labels; falls back to collection
// order when the labels cannot train a model.
QueryOutcome feedback_outcome(const QueryCollection& query, const FeedbackLabels& labels, const SvmOptions& svm);

struct CompareConfig {
  int n_seeds = 20;
  std::uint64_t seed_base = 1;
  std::vector<UserProfile> profiles;
  std::vector<int> rates = {5, 10};
  std::vector<std::string> modalities = {"eeg", "mouse"};
  bool feedback = true;
  ExperimentSetup setup;
};

// Profiles may be preset names ("expert", "novice"), paths relative to
// base_dir, or inline objects.
CompareConfig compare_config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir);

struct CompareCell {
  std::string profile;
  int rate_hz = 0;
  std::string modality;
  std::vector<double> map;           // per seed
  std::vector<double> mean_auc;      // per seed, EEG only
  std::vector<double> feedback_map;  // per seed, when feedback ran
};

struct CompareTest {
  std::string label;
  std::string metric;
  std::string group_a;
  std::string group_b;
  std::optional<TTestResult> result;
  std::string note;  // why result is missing
};

struct CompareReport {
  CompareConfig config;
  std::vector<CompareCell> cells;
  std::vector<CompareTest> tests;
};

CompareReport run_compare(const CompareConfig& config);
nlohmann::json to_json(const CompareReport& report);
// One row per cell: means and sample sds over seeds.
std::string compare_csv(const CompareReport& report);

}  // namespace eegrf
