#include <algorithm>

#include <gtest/gtest.h>

#include "eegrf/errors.hpp"
#include "eegrf/experiment.hpp"
#include "eegrf/retrieval.hpp"
#include "test_util.hpp"

namespace eegrf {
namespace {

using testing::make_ids;

TEST(Paginate, SplitsInOrder) {
  const auto ids = make_ids(45);
  const auto pages = paginate(ids, 20);
  ASSERT_EQ(pages.size(), 3u);
  EXPECT_EQ(pages[0].size(), 20u);
  EXPECT_EQ(pages[2].size(), 5u);
  EXPECT_EQ(pages[1].front(), "img_20");
  EXPECT_TRUE(paginate(std::vector<std::string>{}, 5).empty());
  EXPECT_THROW(paginate(ids, 0), PreconditionError);
}

TEST(SimulateAnnotator, PacingBudgetAndClicks) {
  const auto ids = make_ids(1000);
  std::vector<bool> target(1000, false);
  for (std::size_t i = 0; i < 1000; i += 20) target[i + 7] = true;
  AnnotatorPolicy policy;
  policy.detection_p = 1.0;
  for (double duration : {100.0, 200.0}) {
    const AnnotationLog log = simulate_annotator(ids, target, policy, duration, 3);
    EXPECT_NO_THROW(validate_log(log));
    const auto scanned = static_cast<std::size_t>(duration * 2.0);
    std::size_t clicks = 0;
    for (const auto& e : log.events) {
      ASSERT_LE(e.t_ms, static_cast<std::int64_t>(duration * 1000));
      if (e.kind != EventKind::kClick) continue;
      ++clicks;
      const auto k = static_cast<std::size_t>(std::stoi(e.image_id->substr(4)));
      EXPECT_TRUE(target[k]);
      EXPECT_EQ(e.t_ms, static_cast<std::int64_t>((k + 1) * 500));
    }
    EXPECT_EQ(clicks, scanned / 20);
    // Sequence numbers count up from 0.
    for (std::size_t i = 0; i < log.events.size(); ++i) ASSERT_EQ(log.events[i].seq, static_cast<std::int64_t>(i));
  }
}

TEST(SimulateAnnotator, PagesOpenWhenPreviousPageIsScanned) {
  const auto ids = make_ids(60);
  const std::vector<bool> target(60, false);
  const AnnotationLog log = simulate_annotator(ids, target, AnnotatorPolicy{}, 200.0, 1);
  std::vector<std::int64_t> next_times;
  for (const auto& e : log.events) {
    if (e.kind == EventKind::kNext) next_times.push_back(e.t_ms);
  }
  EXPECT_EQ(next_times, (std::vector<std::int64_t>{10000, 20000}));
  const auto first_show_page2 = std::find_if(log.events.begin(), log.events.end(), [](const AnnotationEvent& e) {
    return e.kind == EventKind::kShow && e.image_id == "img_40";
  });
  ASSERT_NE(first_show_page2, log.events.end());
  EXPECT_EQ(first_show_page2->t_ms, 20000);
}

TEST(SimulateAnnotator, DetectionProbabilityAndDeterminism) {
  const auto ids = make_ids(1000);
  const std::vector<bool> target(1000, true);
  AnnotatorPolicy policy;
  policy.detection_p = 0.9;
  const AnnotationLog a = simulate_annotator(ids, target, policy, 500.0, 8);
  EXPECT_EQ(a, simulate_annotator(ids, target, policy, 500.0, 8));
  EXPECT_NE(a, simulate_annotator(ids, target, policy, 500.0, 9));
  const auto clicks = std::count_if(a.events.begin(), a.events.end(), [](const auto& e) { return e.kind == EventKind::kClick; });
  EXPECT_GT(clicks, 850);
  EXPECT_LT(clicks, 950);
  policy.detection_p = 0.0;
  const AnnotationLog none = simulate_annotator(ids, target, policy, 500.0, 8);
  EXPECT_EQ(std::count_if(none.events.begin(), none.events.end(), [](const auto& e) { return e.kind == EventKind::kClick; }), 0);
}

TEST(ExperimentSetup, JsonRoundTrip) {
  ExperimentSetup s;
  s.dataset_seed = 17;
  s.feature_set.d = 64;
  s.svm.c = 0.5;
  s.annotator.images_per_s = 3.0;
  s.pipeline.span_mode = SpanMode::kTruncated;
  s.n_neg = 90;
  const ExperimentSetup back = experiment_setup_from_json(to_json(s));
  EXPECT_EQ(to_json(back), to_json(s));
  EXPECT_THROW(annotator_policy_from_json({{"detection_p", 1.5}}), PreconditionError);
}

class CollectionsTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() { queries_ = new std::vector<QueryCollection>(make_collections(ExperimentSetup{})); }
  static void TearDownTestSuite() {
    delete queries_;
    queries_ = nullptr;
  }
  static std::vector<QueryCollection>* queries_;
};

std::vector<QueryCollection>* CollectionsTest::queries_ = nullptr;

TEST_F(CollectionsTest, ThreeQueriesWithSessions) {
  const auto& qs = *queries_;
  ASSERT_EQ(qs.size(), 3u);
  for (std::size_t q = 0; q < 3; ++q) {
    EXPECT_EQ(qs[q].query_id, "q" + std::to_string(q + 1));
    EXPECT_EQ(qs[q].set.matrix.n_rows(), 5000u);
    EXPECT_EQ(qs[q].relevant.size(), 100u);
    EXPECT_EQ(qs[q].session.targets.size(), 50u);
    EXPECT_EQ(qs[q].session.distractors.size(), 950u);
    EXPECT_EQ(qs[q].set.matrix.image_ids.front().rfind(qs[q].query_id + "_img_", 0), 0u);
    for (const auto& t : qs[q].session_targets) EXPECT_TRUE(qs[q].relevant.contains(t));
    const RsvpPlan plan = session_plan(qs[q], q, 5, 1, 5.0);
    EXPECT_NO_THROW(validate_plan(plan));
    EXPECT_EQ(plan.query_id, qs[q].query_id);
  }
  EXPECT_NE(qs[0].set.matrix.values, qs[1].set.matrix.values);
}

TEST_F(CollectionsTest, MouseArmLongerBudgetIsBetter) {
  ExperimentSetup setup;
  const ArmOutcome slow = run_mouse_arm(*queries_, 5, 1, setup, true);
  const ArmOutcome fast = run_mouse_arm(*queries_, 10, 1, setup, true);
  EXPECT_GT(slow.map, fast.map);
  EXPECT_FALSE(slow.mean_auc.has_value());
  ASSERT_TRUE(slow.feedback_map.has_value());
  for (const auto& q : slow.queries) {
    EXPECT_NO_THROW(check_permutation(q.ranking, [&] {
      std::vector<std::string> ids = (*queries_)[static_cast<std::size_t>(q.query_id[1] - '1')].session.targets;
      const auto& d = (*queries_)[static_cast<std::size_t>(q.query_id[1] - '1')].session.distractors;
      ids.insert(ids.end(), d.begin(), d.end());
      return ids;
    }()));
  }
  // Same inputs, same outcome.
  EXPECT_EQ(run_mouse_arm(*queries_, 5, 1, setup, false).map, slow.map);
}

TEST_F(CollectionsTest, EegArmExpertSeparatesTargets) {
  ExperimentSetup setup;
  const ArmOutcome arm = run_eeg_arm(*queries_, expert_profile(), 10, 2, setup, true);
  ASSERT_EQ(arm.queries.size(), 3u);
  ASSERT_TRUE(arm.mean_auc.has_value());
  EXPECT_GT(*arm.mean_auc, 0.85);
  for (const auto& q : arm.queries) {
    ASSERT_TRUE(q.auc.has_value());
    EXPECT_EQ(q.ranking.entries.size(), 1000u);
    EXPECT_TRUE(q.feedback_trained);
    EXPECT_FALSE(q.roc.empty());
  }
  ASSERT_TRUE(arm.feedback_map.has_value());
  const ArmOutcome again = run_eeg_arm(*queries_, expert_profile(), 10, 2, setup, true);
  for (std::size_t q = 0; q < 3; ++q) EXPECT_EQ(again.queries[q].ranking, arm.queries[q].ranking);
}

TEST_F(CollectionsTest, FeedbackFallsBackWhenUntrainable) {
  const auto& q = (*queries_)[0];
  const FeedbackLabels only_pos{{q.session.targets.front()}, {}};
  const QueryOutcome out = feedback_outcome(q, only_pos, SvmOptions{});
  EXPECT_FALSE(out.feedback_trained);
  EXPECT_EQ(out.ranking.ids(), q.set.matrix.image_ids);
}

TEST(CompareConfig, ParsesProfilesAndValidates) {
  const std::filesystem::path configs = std::filesystem::path(EEGRF_SOURCE_DIR) / "configs";
  const CompareConfig c = compare_config_from_json(load_json(configs / "experiments.json"), configs);
  ASSERT_EQ(c.profiles.size(), 2u);
  EXPECT_EQ(c.profiles[0].name, "expert");
  EXPECT_EQ(c.profiles[1].name, "novice");
  EXPECT_EQ(c.n_seeds, 20);
  EXPECT_EQ(c.rates, (std::vector<int>{5, 10}));

  const nlohmann::json inline_profile = {{"profiles", {"expert", {{"name", "custom"}, {"p300_amp_uv", 2.0}}}}};
  const CompareConfig d = compare_config_from_json(inline_profile, ".");
  EXPECT_EQ(d.profiles[1].name, "custom");
  EXPECT_EQ(d.profiles[1].p300_amp_uv, 2.0);

  EXPECT_THROW(compare_config_from_json({{"rates", {7}}}, "."), PreconditionError);
  EXPECT_THROW(compare_config_from_json({{"modalities", {"gaze"}}}, "."), PreconditionError);
  EXPECT_THROW(compare_config_from_json({{"profiles", {42}}}, "."), FormatError);
  EXPECT_THROW(compare_config_from_json({{"profiles", {"missing.json"}}}, "."), IoError);
}

TEST(RunCompare, SmallGridReport) {
  CompareConfig c;
  c.n_seeds = 2;
  c.profiles = {expert_profile(), novice_profile()};
  c.rates = {10};
  c.feedback = false;
  c.setup.feature_set.n = 2000;
  c.setup.feature_set.d = 16;
  const CompareReport r = run_compare(c);
  ASSERT_EQ(r.cells.size(), 4u);
  for (const auto& cell : r.cells) {
    EXPECT_EQ(cell.map.size(), 2u);
    EXPECT_EQ(cell.mean_auc.size(), cell.modality == "eeg" ? 2u : 0u);
  }
  const nlohmann::json j = to_json(r);
  EXPECT_EQ(j["synthetic"], true);
  EXPECT_EQ(j["cells"].size(), 4u);
  bool has_profile_auc = false;
  for (const auto& t : j["tests"]) has_profile_auc |= t["comparison"] == "profile" && t["metric"] == "mean_auc";
  EXPECT_TRUE(has_profile_auc);
  const std::string csv = compare_csv(r);
  EXPECT_EQ(csv.substr(0, csv.find('\n')),
            "profile,rate_hz,modality,duration_s,n_seeds,map_mean,map_sd,mean_auc,feedback_map_mean,feedback_map_sd");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 5);
}

}  // namespace
}  // namespace eegrf
