#include <cmath>
#include <string>

#include <gtest/gtest.h>

#include "eegrf/errors.hpp"
#include "eegrf/signal_pipeline.hpp"
#include "test_util.hpp"

namespace eegrf {
namespace {

RawRecording random_recording(Xoshiro256& rng, std::size_t channels, std::size_t samples, int rate) {
  RawRecording rec;
  rec.sample_rate_hz = rate;
  rec.channel_labels = testing::make_ids(channels, "ch");
  rec.samples = testing::random_matrix(rng, channels, samples, 10.0);
  return rec;
}

TEST(Rereference, ChannelMeanIsZero) {
  Xoshiro256 rng(1);
  const RawRecording out = rereference_average(random_recording(rng, 8, 300, 1000));
  for (std::size_t t = 0; t < out.n_samples(); ++t) {
    double sum = 0.0;
    for (std::size_t c = 0; c < out.n_channels(); ++c) sum += out.samples(c, t);
    ASSERT_NEAR(sum, 0.0, 1e-4);
  }
}

// Property: a signal common to every channel disappears.
TEST(Rereference, InvariantToCommonMode) {
  Xoshiro256 rng(2);
  for (int trial = 0; trial < 20; ++trial) {
    const RawRecording rec = random_recording(rng, 2 + rng.below(10), 50 + rng.below(50), 1000);
    RawRecording shifted = rec;
    const std::vector<double> common = testing::random_doubles(rng, rec.n_samples(), -100, 100);
    for (std::size_t c = 0; c < rec.n_channels(); ++c) {
      for (std::size_t t = 0; t < rec.n_samples(); ++t) shifted.samples(c, t) += static_cast<float>(common[t]);
    }
    const RawRecording a = rereference_average(rec);
    const RawRecording b = rereference_average(shifted);
    for (std::size_t i = 0; i < a.samples.data.size(); ++i) ASSERT_NEAR(a.samples.data[i], b.samples.data[i], 1e-3);
  }
}

TEST(Rereference, NeedsTwoChannels) {
  Xoshiro256 rng(3);
  EXPECT_THROW(rereference_average(random_recording(rng, 1, 10, 1000)), PreconditionError);
}

TEST(Decimate, BoxcarMeansAndDroppedTail) {
  RawRecording rec;
  rec.sample_rate_hz = 1000;
  rec.channel_labels = {"a", "b"};
  rec.samples = Matrix(2, 10);
  for (std::size_t t = 0; t < 10; ++t) {
    rec.samples(0, t) = static_cast<float>(t);
    rec.samples(1, t) = static_cast<float>(t * t);
  }
  const RawRecording out = decimate(rec, 4);
  EXPECT_EQ(out.sample_rate_hz, 250);
  ASSERT_EQ(out.n_samples(), 2u);
  EXPECT_FLOAT_EQ(out.samples(0, 0), 1.5f);
  EXPECT_FLOAT_EQ(out.samples(0, 1), 5.5f);
  EXPECT_FLOAT_EQ(out.samples(1, 0), (0 + 1 + 4 + 9) / 4.0f);
  EXPECT_FLOAT_EQ(out.samples(1, 1), (16 + 25 + 36 + 49) / 4.0f);
  EXPECT_THROW(decimate(rec, 3), PreconditionError);
  EXPECT_THROW(decimate(rec, 0), PreconditionError);
}

TEST(Bandpass, KeepsShapeAndRate) {
  Xoshiro256 rng(4);
  const RawRecording rec = random_recording(rng, 3, 1000, 250);
  const RawRecording out = bandpass(rec, 0.1, 20.0, 4);
  EXPECT_EQ(out.sample_rate_hz, 250);
  EXPECT_EQ(out.n_channels(), 3u);
  EXPECT_EQ(out.n_samples(), 1000u);
  EXPECT_EQ(out.channel_labels, rec.channel_labels);
}

TEST(Epochs, GeometryAtDecimatedRate) {
  Xoshiro256 rng(5);
  const RawRecording rec = random_recording(rng, 4, 2000, 250);
  const std::vector<EventMarker> markers = {{250, "a", true, 0, "q"}, {1000, "b", false, 0, "q"}, {1500, "c", false, 1, "q"}};
  const auto epochs = extract_epochs(rec, markers, PipelineConfig{});
  ASSERT_EQ(epochs.size(), 3u);
  for (std::size_t i = 0; i < epochs.size(); ++i) {
    EXPECT_EQ(epochs[i].data.rows, 4u);
    EXPECT_EQ(epochs[i].data.cols, 750u);  // -1 s .. +2 s at 250 Hz
    EXPECT_EQ(epochs[i].image_id, markers[i].image_id);
    EXPECT_EQ(epochs[i].is_target, markers[i].is_target);
    for (std::size_t c = 0; c < 4; ++c) {
      ASSERT_EQ(epochs[i].data(c, 250), rec.samples(c, static_cast<std::size_t>(markers[i].onset_sample)));
      ASSERT_EQ(epochs[i].data(c, 0), rec.samples(c, static_cast<std::size_t>(markers[i].onset_sample - 250)));
    }
  }
}

TEST(Epochs, ReportsEveryMarkerWithoutRoom) {
  Xoshiro256 rng(6);
  const RawRecording rec = random_recording(rng, 2, 1000, 250);
  const std::vector<EventMarker> markers = {{100, "early", false, 0, "q"}, {400, "ok", false, 0, "q"}, {600, "late", false, 0, "q"}};
  try {
    extract_epochs(rec, markers, PipelineConfig{});
    FAIL() << "expected PreconditionError";
  } catch (const PreconditionError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("2 of 3"), std::string::npos) << msg;
    EXPECT_NE(msg.find("early"), std::string::npos) << msg;
    EXPECT_NE(msg.find("late"), std::string::npos) << msg;
    EXPECT_EQ(msg.find("'ok'"), std::string::npos) << msg;
  }
}

// Brute-force oracle for the window means: windows start 200 ms after the
// stimulus, 24 samples long, 12 apart.
std::vector<float> oracle_features(const Epoch& ep, bool truncated) {
  const int start = 250 + 50;
  const int span = truncated ? 200 : 204;
  std::vector<float> out;
  for (std::size_t c = 0; c < ep.data.rows; ++c) {
    for (int w = 0; w < 16; ++w) {
      double acc = 0.0;
      int count = 0;
      for (int t = start + 12 * w; t < start + 12 * w + 24 && t < start + span; ++t) {
        acc += ep.data(c, static_cast<std::size_t>(t));
        ++count;
      }
      out.push_back(static_cast<float>(acc / count));
    }
  }
  return out;
}

TEST(Features, MatchBruteForceInBothSpanModes) {
  Xoshiro256 rng(7);
  for (int trial = 0; trial < 10; ++trial) {
    Epoch ep;
    ep.epoch_sample_rate_hz = 250;
    ep.data = testing::random_matrix(rng, 1 + rng.below(32), 750, 5.0);
    PipelineConfig cfg;
    const auto ext = epoch_features(ep, cfg);
    EXPECT_EQ(ext.values.size(), ep.data.rows * 16);
    const auto want_ext = oracle_features(ep, false);
    for (std::size_t i = 0; i < want_ext.size(); ++i) ASSERT_NEAR(ext.values[i], want_ext[i], 1e-5);
    cfg.span_mode = SpanMode::kTruncated;
    const auto tr = epoch_features(ep, cfg);
    const auto want_tr = oracle_features(ep, true);
    for (std::size_t i = 0; i < want_tr.size(); ++i) ASSERT_NEAR(tr.values[i], want_tr[i], 1e-5);
  }
}

TEST(Features, SpanBoundaries) {
  // A step that starts right after the extended span touches no window;
  // one at the last extended sample touches only window 15.
  Epoch ep;
  ep.epoch_sample_rate_hz = 250;
  ep.data = Matrix(1, 750, 0.0f);
  for (std::size_t t = 504; t < 750; ++t) ep.data(0, t) = 1.0f;
  const auto a = epoch_features(ep, PipelineConfig{});
  for (float v : a.values) EXPECT_EQ(v, 0.0f);
  ep.data(0, 503) = 24.0f;
  const auto b = epoch_features(ep, PipelineConfig{});
  for (int w = 0; w < 15; ++w) EXPECT_EQ(b.values[static_cast<std::size_t>(w)], 0.0f);
  EXPECT_FLOAT_EQ(b.values[15], 1.0f);
  // Truncated: the span ends at 500, so sample 503 is outside.
  PipelineConfig tr;
  tr.span_mode = SpanMode::kTruncated;
  for (float v : epoch_features(ep, tr).values) EXPECT_EQ(v, 0.0f);
}

TEST(Features, ShortEpochRejected) {
  Epoch ep;
  ep.epoch_sample_rate_hz = 250;
  ep.data = Matrix(2, 400);
  EXPECT_THROW(epoch_features(ep, PipelineConfig{}), PreconditionError);
}

TEST(PreprocessSession, ShapesAndOrder) {
  Xoshiro256 rng(8);
  const RawRecording rec = random_recording(rng, 32, 20000, 1000);
  std::vector<EventMarker> markers;
  for (int i = 0; i < 10; ++i) markers.push_back({1000 + 1500 * i, "m" + std::to_string(i), i % 3 == 0, 0, "q"});
  const LabeledFeatures lf = preprocess_session(rec, markers, PipelineConfig{});
  EXPECT_EQ(lf.matrix.n_rows(), 10u);
  EXPECT_EQ(lf.matrix.n_dims(), 512u);
  EXPECT_EQ(lf.n_targets(), 4u);
  for (std::size_t i = 0; i < markers.size(); ++i) {
    EXPECT_EQ(lf.matrix.image_ids[i], markers[i].image_id);
    EXPECT_EQ(lf.is_target[i], markers[i].is_target);
  }
  for (float v : lf.matrix.values.data) ASSERT_TRUE(std::isfinite(v));
}

TEST(PreprocessSession, EquivalentToExplicitChain) {
  Xoshiro256 rng(9);
  const RawRecording rec = random_recording(rng, 4, 12000, 1000);
  const std::vector<EventMarker> markers = {{2000, "a", true, 0, "q"}, {5003, "b", false, 0, "q"}};
  const PipelineConfig cfg;
  const LabeledFeatures lf = preprocess_session(rec, markers, cfg);
  const RawRecording filtered = bandpass(decimate(rereference_average(rec), 4), 0.1, 20.0, 4);
  std::vector<EventMarker> decimated = markers;
  for (auto& m : decimated) m.onset_sample /= 4;
  const auto epochs = extract_epochs(filtered, decimated, cfg);
  for (std::size_t i = 0; i < epochs.size(); ++i) {
    const auto fv = epoch_features(epochs[i], cfg);
    for (std::size_t k = 0; k < fv.values.size(); ++k) ASSERT_EQ(lf.matrix.values(i, k), fv.values[k]);
  }
}

TEST(PreprocessSession, MarkerWithoutRoomRejected) {
  Xoshiro256 rng(10);
  const RawRecording rec = random_recording(rng, 4, 5000, 1000);
  const std::vector<EventMarker> markers = {{4000, "late", false, 0, "q"}};
  EXPECT_THROW(preprocess_session(rec, markers, PipelineConfig{}), PreconditionError);
}

TEST(PipelineConfig, ValidationAndJson) {
  PipelineConfig cfg;
  EXPECT_NO_THROW(cfg.validate(1000));
  EXPECT_THROW(cfg.validate(999), PreconditionError);
  PipelineConfig bad = cfg;
  bad.band_hi_hz = 200.0;
  EXPECT_THROW(bad.validate(1000), PreconditionError);
  bad = cfg;
  bad.hop = 10;
  EXPECT_THROW(bad.validate(1000), PreconditionError);

  cfg.span_mode = SpanMode::kTruncated;
  cfg.band_hi_hz = 15.0;
  const PipelineConfig back = pipeline_config_from_json(to_json(cfg));
  EXPECT_EQ(back.span_mode, SpanMode::kTruncated);
  EXPECT_EQ(back.band_hi_hz, 15.0);
  EXPECT_EQ(pipeline_config_from_json(nlohmann::json::object()).n_windows, 16);
  EXPECT_THROW(pipeline_config_from_json({{"span_mode", "wide"}}), FormatError);
}

}  // namespace
}  // namespace eegrf
