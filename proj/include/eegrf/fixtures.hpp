#pragma once

// Synthetic stand-ins for a real image collection:
//  - PNG query sets: cluttered random shapes, targets also carry a small ring;
//  - image-feature matrices with one relevant cluster among distractor clusters.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "eegrf/dataio.hpp"
#include "eegrf/random.hpp"

namespace eegrf {

struct GlyphSpec {
  double min_radius_px = 5.0;
  double max_radius_px = 10.0;
  double thickness_px = 2.5;
  std::uint8_t rgb[3] = {230, 30, 30};
};

struct GlyphPlacement {
  double cx = 0.0;
  double cy = 0.0;
  double radius = 0.0;
};

// Uniform scale in [min_radius, max_radius] and a centre that keeps the
// ring's bounding box inside a width x height image.
GlyphPlacement place_glyph(int width, int height, const GlyphSpec& spec, Xoshiro256& rng);
bool glyph_inside(const GlyphPlacement& g, int width, int height);

struct ImageSetOptions {
  int width = 160;
  int height = 120;
  int n_examples = 4;
  std::string query_id = "q1";
  std::string query_text = "Find images that contain a small red ring";
  std::string id_prefix = "img_";
};

struct ImageManifest {
  std::string query_id;
  std::string query_text;
  int width = 0;
  int height = 0;
  std::vector<std::string> image_ids;
  std::vector<bool> is_target;
  std::vector<std::string> example_image_ids;

  bool operator==(const ImageManifest&) const = default;
};

nlohmann::json to_json(const ImageManifest& m);
ImageManifest image_manifest_from_json(const nlohmann::json& j);

// RGB, 8 bits per channel, row-major.
struct RgbImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;
};

RgbImage render_image(int width, int height, const GlyphPlacement* glyph, const GlyphSpec& spec, Xoshiro256& rng);
void write_png(const RgbImage& img, const std::filesystem::path& path);
RgbImage read_png(const std::filesystem::path& path);

// Writes <id>.png for every image plus the examples, and manifest.json.
// Throws IoError when out_dir cannot be written.
ImageManifest gen_images(int n, int n_targets, const GlyphSpec& glyph, std::uint64_t seed,
                         const std::filesystem::path& out_dir, const ImageSetOptions& options = {});

struct FeatureSetOptions {
  int n = 5000;
  int d = 128;
  int n_relevant = 100;
  double separation = 10.0;    // |c_r - nearest distractor centre| / noise_sd
  double noise_sd = 1.0;
  int n_clusters = 8;          // distractor clusters
  double centre_sd = 0.2;      // per-dimension spread of distractor centres, in noise_sd units
  std::string id_prefix = "img_";
};

struct FeatureSet {
  FeatureMatrix matrix;
  std::vector<bool> relevant;  // row-aligned with matrix.image_ids
  std::vector<int> cluster;    // distractor cluster per row, -1 for relevant rows
};

nlohmann::json feature_truth_json(const FeatureSet& set);
// Reads the truth file and checks it against the matrix ids.
std::vector<bool> load_feature_truth(const std::filesystem::path& path, const FeatureMatrix& matrix);

// Relevant rows sit at random positions. Throws PreconditionError for d < 2
// or inconsistent counts.
FeatureSet gen_feature_set(const FeatureSetOptions& options, std::uint64_t seed);

// Draws a query session (50 targets, 950 distractors) out of a larger
// labeled collection.
struct SessionImages {
  std::vector<std::string> targets;
  std::vector<std::string> distractors;
};
SessionImages select_session_images(const std::vector<std::string>& ids, const std::vector<bool>& is_target,
                                    std::uint64_t seed);

}  // namespace eegrf
