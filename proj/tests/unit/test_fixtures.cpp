#include <chrono>
#include <cmath>
#include <fstream>

#include <gtest/gtest.h>

#include "eegrf/errors.hpp"
#include "eegrf/fixtures.hpp"
#include "eegrf/metrics.hpp"
#include "eegrf/retrieval.hpp"
#include "test_util.hpp"

namespace eegrf {
namespace {

using testing::scratch_dir;

TEST(Glyph, AlwaysInsideTheImage) {
  Xoshiro256 rng(60);
  const GlyphSpec spec;
  for (int i = 0; i < 10000; ++i) {
    const int w = 20 + static_cast<int>(rng.below(300));
    const int h = 20 + static_cast<int>(rng.below(300));
    const GlyphPlacement g = place_glyph(w, h, spec, rng);
    ASSERT_TRUE(glyph_inside(g, w, h)) << w << "x" << h << " at " << g.cx << "," << g.cy << " r " << g.radius;
    ASSERT_GE(g.radius, spec.min_radius_px);
    ASSERT_LE(g.radius, spec.max_radius_px);
  }
}

TEST(Glyph, RejectsImpossibleSpecs) {
  Xoshiro256 rng(61);
  GlyphSpec spec;
  EXPECT_THROW(place_glyph(15, 100, spec, rng), PreconditionError);
  spec.min_radius_px = 12;
  EXPECT_THROW(place_glyph(100, 100, spec, rng), PreconditionError);
  EXPECT_FALSE(glyph_inside(GlyphPlacement{3, 50, 5}, 100, 100));
  EXPECT_TRUE(glyph_inside(GlyphPlacement{5, 5, 5}, 100, 100));
}

TEST(RenderImage, RingIsDrawnInGlyphColour) {
  Xoshiro256 rng(62);
  const GlyphSpec spec;
  const GlyphPlacement g{80.0, 60.0, 9.0};
  const RgbImage img = render_image(160, 120, &g, spec, rng);
  ASSERT_EQ(img.pixels.size(), 160u * 120u * 3u);
  int ring = 0;
  int ring_hits = 0;
  for (int y = 0; y < 120; ++y) {
    for (int x = 0; x < 160; ++x) {
      const double r = std::hypot(x + 0.5 - g.cx, y + 0.5 - g.cy);
      if (r < g.radius - spec.thickness_px + 0.5 || r > g.radius - 0.5) continue;
      ++ring;
      const auto* p = &img.pixels[(static_cast<std::size_t>(y) * 160 + x) * 3];
      ring_hits += p[0] == spec.rgb[0] && p[1] == spec.rgb[1] && p[2] == spec.rgb[2];
    }
  }
  ASSERT_GT(ring, 0);
  EXPECT_EQ(ring_hits, ring);
}

TEST(Png, RoundTripIsLossless) {
  const auto dir = scratch_dir();
  Xoshiro256 rng(63);
  for (int trial = 0; trial < 5; ++trial) {
    const int w = 1 + static_cast<int>(rng.below(100));
    const int h = 1 + static_cast<int>(rng.below(100));
    RgbImage img{w, h, std::vector<std::uint8_t>(static_cast<std::size_t>(w) * h * 3)};
    for (auto& p : img.pixels) p = static_cast<std::uint8_t>(rng.below(256));
    write_png(img, dir / "x.png");
    const RgbImage back = read_png(dir / "x.png");
    EXPECT_EQ(back.width, w);
    EXPECT_EQ(back.height, h);
    EXPECT_EQ(back.pixels, img.pixels);
  }
  EXPECT_THROW(read_png(dir / "missing.png"), IoError);
  std::ofstream(dir / "bad.png") << "not a png";
  EXPECT_THROW(read_png(dir / "bad.png"), Error);
}

TEST(GenImages, ManifestCountsAndFiles) {
  const auto dir = scratch_dir();
  const ImageManifest m = gen_images(1000, 50, GlyphSpec{}, 7, dir);
  ASSERT_EQ(m.image_ids.size(), 1000u);
  EXPECT_EQ(std::count(m.is_target.begin(), m.is_target.end(), true), 50);
  EXPECT_EQ(m.image_ids.front(), "img_00000");
  EXPECT_EQ(m.image_ids.back(), "img_00999");
  EXPECT_EQ(m.example_image_ids.size(), 4u);
  for (const auto& id : m.image_ids) ASSERT_TRUE(std::filesystem::exists(dir / (id + ".png"))) << id;
  for (const auto& id : m.example_image_ids) ASSERT_TRUE(std::filesystem::exists(dir / (id + ".png"))) << id;
  EXPECT_EQ(image_manifest_from_json(load_json(dir / "manifest.json")), m);
  const RgbImage first = read_png(dir / (m.image_ids.front() + ".png"));
  EXPECT_EQ(first.width, 160);
  EXPECT_EQ(first.height, 120);
}

TEST(GenImages, SeedDeterminesOutput) {
  const auto dir = scratch_dir();
  const ImageManifest a = gen_images(30, 3, GlyphSpec{}, 11, dir / "a");
  const ImageManifest b = gen_images(30, 3, GlyphSpec{}, 11, dir / "b");
  const ImageManifest c = gen_images(30, 3, GlyphSpec{}, 12, dir / "c");
  EXPECT_EQ(a, b);
  for (const auto& id : a.image_ids) {
    ASSERT_EQ(load_text(dir / "a" / (id + ".png")), load_text(dir / "b" / (id + ".png")));
  }
  EXPECT_NE(load_text(dir / "a" / "img_00000.png"), load_text(dir / "c" / "img_00000.png"));
}

TEST(GenImages, Errors) {
  const auto dir = scratch_dir();
  std::ofstream(dir / "blocker") << "file";
  EXPECT_THROW(gen_images(5, 1, GlyphSpec{}, 1, dir / "blocker" / "sub"), IoError);
  EXPECT_THROW(gen_images(5, 6, GlyphSpec{}, 1, dir / "x"), PreconditionError);
  EXPECT_THROW(image_manifest_from_json({{"query_id", "q"}}), FormatError);
}

double mean_distance(const FeatureSet& set, const std::function<bool(std::size_t)>& a,
                     const std::function<bool(std::size_t)>& b) {
  const std::size_t d = set.matrix.n_dims();
  std::vector<double> ma(d, 0.0), mb(d, 0.0);
  double na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < set.matrix.n_rows(); ++i) {
    const auto row = set.matrix.values.row(i);
    if (a(i)) {
      for (std::size_t k = 0; k < d; ++k) ma[k] += row[k];
      na += 1.0;
    }
    if (b(i)) {
      for (std::size_t k = 0; k < d; ++k) mb[k] += row[k];
      nb += 1.0;
    }
  }
  double dist2 = 0.0;
  for (std::size_t k = 0; k < d; ++k) dist2 += (ma[k] / na - mb[k] / nb) * (ma[k] / na - mb[k] / nb);
  return std::sqrt(dist2);
}

TEST(GenFeatureSet, DefaultsShapeTimingAndSeparation) {
  const auto t0 = std::chrono::steady_clock::now();
  const FeatureSet set = gen_feature_set(FeatureSetOptions{}, 3);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  EXPECT_LT(secs, 5.0);
  EXPECT_EQ(set.matrix.n_rows(), 5000u);
  EXPECT_EQ(set.matrix.n_dims(), 128u);
  EXPECT_EQ(std::count(set.relevant.begin(), set.relevant.end(), true), 100);
  for (std::size_t i = 0; i < set.relevant.size(); ++i) ASSERT_EQ(set.relevant[i], set.cluster[i] == -1);
  // Distance from the relevant centre to the nearest distractor centre,
  // estimated from sample means (sampling noise adds about 1% here).
  double nearest = std::numeric_limits<double>::infinity();
  for (int c = 0; c < 8; ++c) {
    nearest = std::min(nearest, mean_distance(set, [&](std::size_t i) { return set.relevant[i]; },
                                              [&](std::size_t i) { return set.cluster[i] == c; }));
  }
  EXPECT_GT(nearest, 9.5);
  EXPECT_LT(nearest, 10.8);
  for (float v : set.matrix.values.data) ASSERT_TRUE(std::isfinite(v));
}

TEST(GenFeatureSet, DeterministicAndValidated) {
  FeatureSetOptions o;
  o.n = 300;
  o.d = 8;
  o.n_relevant = 10;
  EXPECT_EQ(gen_feature_set(o, 5).matrix, gen_feature_set(o, 5).matrix);
  EXPECT_NE(gen_feature_set(o, 5).matrix, gen_feature_set(o, 6).matrix);
  o.d = 1;
  EXPECT_THROW(gen_feature_set(o, 1), PreconditionError);
  o.d = 8;
  o.n_relevant = 301;
  EXPECT_THROW(gen_feature_set(o, 1), PreconditionError);
}

FeedbackLabels clean_labels(const FeatureSet& set, std::size_t n_pos, std::size_t n_neg) {
  FeedbackLabels labels;
  for (std::size_t i = 0; i < set.relevant.size(); ++i) {
    if (set.relevant[i] && labels.positives.size() < n_pos) labels.positives.push_back(set.matrix.image_ids[i]);
    if (!set.relevant[i] && labels.negatives.size() < n_neg) labels.negatives.push_back(set.matrix.image_ids[i]);
  }
  return labels;
}

std::unordered_set<std::string> relevant_ids(const FeatureSet& set) {
  std::unordered_set<std::string> out;
  for (std::size_t i = 0; i < set.relevant.size(); ++i) {
    if (set.relevant[i]) out.insert(set.matrix.image_ids[i]);
  }
  return out;
}

TEST(GenFeatureSet, SeparationTenIsRecoveredByCleanLabels) {
  const FeatureSet set = gen_feature_set(FeatureSetOptions{}, 4);
  const double ap = average_precision(feedback_rank(clean_labels(set, 10, 100), set.matrix), relevant_ids(set));
  EXPECT_GE(ap, 0.99);
}

TEST(GenFeatureSet, SeparationZeroIsIndistinguishable) {
  // One distractor cluster and no separation: relevant rows are drawn from
  // the same distribution as everything else.
  FeatureSetOptions o;
  o.n = 2000;
  o.d = 32;
  o.n_relevant = 40;
  o.separation = 0.0;
  o.n_clusters = 1;
  double total = 0.0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const FeatureSet set = gen_feature_set(o, seed);
    total += average_precision(feedback_rank(clean_labels(set, 10, 100), set.matrix), relevant_ids(set));
  }
  EXPECT_LT(total / 5.0, 0.06);  // prevalence 0.02
}

TEST(FeatureTruth, RoundTripAndAlignment) {
  const auto dir = scratch_dir();
  FeatureSetOptions o;
  o.n = 50;
  o.d = 4;
  o.n_relevant = 5;
  const FeatureSet set = gen_feature_set(o, 2);
  save_json(feature_truth_json(set), dir / "t.json");
  EXPECT_EQ(load_feature_truth(dir / "t.json", set.matrix), set.relevant);
  FeatureMatrix other = set.matrix;
  std::swap(other.image_ids[0], other.image_ids[1]);
  EXPECT_THROW(load_feature_truth(dir / "t.json", other), DataError);
}

TEST(SelectSessionImages, CountsOrderAndDeterminism) {
  FeatureSetOptions o;
  o.n = 3000;
  o.d = 16;
  o.n_relevant = 80;
  const FeatureSet set = gen_feature_set(o, 3);
  const SessionImages s = select_session_images(set.matrix.image_ids, set.relevant, 9);
  ASSERT_EQ(s.targets.size(), 50u);
  ASSERT_EQ(s.distractors.size(), 950u);
  EXPECT_TRUE(std::is_sorted(s.targets.begin(), s.targets.end()));  // zero-padded ids sort like indices
  EXPECT_TRUE(std::is_sorted(s.distractors.begin(), s.distractors.end()));
  const auto rel = relevant_ids(set);
  for (const auto& id : s.targets) EXPECT_TRUE(rel.contains(id));
  for (const auto& id : s.distractors) EXPECT_FALSE(rel.contains(id));
  const SessionImages again = select_session_images(set.matrix.image_ids, set.relevant, 9);
  EXPECT_EQ(again.targets, s.targets);
  EXPECT_EQ(again.distractors, s.distractors);
  o.n_relevant = 49;
  const FeatureSet few = gen_feature_set(o, 3);
  EXPECT_THROW(select_session_images(few.matrix.image_ids, few.relevant, 1), PreconditionError);
}

}  // namespace
}  // namespace eegrf
