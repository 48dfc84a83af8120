#include "eegrf/fixtures.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>

#include "eegrf/errors.hpp"

namespace eegrf {

namespace {

std::string padded_id(const std::string& prefix, int i, int n) {
  int width = 5;
  for (int m = n - 1; m >= 100000; m /= 10) ++width;
  std::string digits = std::to_string(i);
  return prefix + std::string(static_cast<std::size_t>(std::max(0, width - static_cast<int>(digits.size()))), '0') +
         digits;
}

struct Canvas {
  RgbImage& img;

  void put(int x, int y, const std::uint8_t* c) {
    if (x < 0 || y < 0 || x >= img.width || y >= img.height) return;
    std::uint8_t* p = img.pixels.data() + (static_cast<std::size_t>(y) * img.width + x) * 3;
    p[0] = c[0];
    p[1] = c[1];
    p[2] = c[2];
  }

  // Every pixel whose centre satisfies inside(px, py).
  template <typename F>
  void fill(double x0, double y0, double x1, double y1, const std::uint8_t* c, F inside) {
    const int xa = std::max(0, static_cast<int>(std::floor(x0)));
    const int xb = std::min(img.width - 1, static_cast<int>(std::ceil(x1)));
    const int ya = std::max(0, static_cast<int>(std::floor(y0)));
    const int yb = std::min(img.height - 1, static_cast<int>(std::ceil(y1)));
    for (int y = ya; y <= yb; ++y) {
      for (int x = xa; x <= xb; ++x) {
        if (inside(x + 0.5, y + 0.5)) put(x, y, c);
      }
    }
  }
};

void random_colour(Xoshiro256& rng, std::uint8_t* c) {
  for (int k = 0; k < 3; ++k) c[k] = static_cast<std::uint8_t>(rng.below(256));
}

void draw_clutter(Canvas& canvas, Xoshiro256& rng) {
  const double w = canvas.img.width;
  const double h = canvas.img.height;
  const int n_shapes = 10 + static_cast<int>(rng.below(11));
  for (int s = 0; s < n_shapes; ++s) {
    std::uint8_t c[3];
    random_colour(rng, c);
    const double cx = rng.uniform() * w;
    const double cy = rng.uniform() * h;
    const double size = 4.0 + rng.uniform() * 0.3 * std::min(w, h);
    switch (rng.below(4)) {
      case 0: {  // axis-aligned rectangle
        const double hw = size * (0.3 + rng.uniform());
        const double hh = size * (0.3 + rng.uniform());
        canvas.fill(cx - hw, cy - hh, cx + hw, cy + hh, c, [](double, double) { return true; });
        break;
      }
      case 1: {  // disc
        canvas.fill(cx - size, cy - size, cx + size, cy + size, c, [&](double x, double y) {
          return (x - cx) * (x - cx) + (y - cy) * (y - cy) <= size * size;
        });
        break;
      }
      case 2: {  // thick segment
        const double angle = rng.uniform() * 2.0 * M_PI;
        const double dx = std::cos(angle) * size;
        const double dy = std::sin(angle) * size;
        const double half_thick = 1.0 + rng.uniform() * 2.0;
        canvas.fill(cx - size - 3, cy - size - 3, cx + size + 3, cy + size + 3, c, [&](double x, double y) {
          const double t = std::clamp(((x - cx) * dx + (y - cy) * dy) / (size * size), -1.0, 1.0);
          const double ex = x - (cx + t * dx);
          const double ey = y - (cy + t * dy);
          return ex * ex + ey * ey <= half_thick * half_thick;
        });
        break;
      }
      default: {  // triangle
        double px[3];
        double py[3];
        for (int k = 0; k < 3; ++k) {
          const double a = rng.uniform() * 2.0 * M_PI;
          px[k] = cx + std::cos(a) * size;
          py[k] = cy + std::sin(a) * size;
        }
        canvas.fill(cx - size, cy - size, cx + size, cy + size, c, [&](double x, double y) {
          double sign[3];
          for (int k = 0; k < 3; ++k) {
            const int m = (k + 1) % 3;
            sign[k] = (px[m] - px[k]) * (y - py[k]) - (py[m] - py[k]) * (x - px[k]);
          }
          return (sign[0] >= 0 && sign[1] >= 0 && sign[2] >= 0) || (sign[0] <= 0 && sign[1] <= 0 && sign[2] <= 0);
        });
        break;
      }
    }
  }
}

}  // namespace

GlyphPlacement place_glyph(int width, int height, const GlyphSpec& spec, Xoshiro256& rng) {
  if (!(spec.min_radius_px > 0.0) || spec.max_radius_px < spec.min_radius_px) {
    throw PreconditionError("glyph radius range is empty");
  }
  if (2.0 * spec.max_radius_px > std::min(width, height)) {
    throw PreconditionError("glyph does not fit in a " + std::to_string(width) + "x" + std::to_string(height) +
                            " image");
  }
  GlyphPlacement g;
  g.radius = spec.min_radius_px + rng.uniform() * (spec.max_radius_px - spec.min_radius_px);
  g.cx = g.radius + rng.uniform() * (width - 2.0 * g.radius);
  g.cy = g.radius + rng.uniform() * (height - 2.0 * g.radius);
  return g;
}

bool glyph_inside(const GlyphPlacement& g, int width, int height) {
  return g.cx - g.radius >= 0.0 && g.cy - g.radius >= 0.0 && g.cx + g.radius <= width && g.cy + g.radius <= height;
}

RgbImage render_image(int width, int height, const GlyphPlacement* glyph, const GlyphSpec& spec, Xoshiro256& rng) {
  if (width <= 0 || height <= 0) throw PreconditionError("image size must be positive");
  RgbImage img{width, height, std::vector<std::uint8_t>(static_cast<std::size_t>(width) * height * 3)};
  std::uint8_t bg[3];
  for (int k = 0; k < 3; ++k) bg[k] = static_cast<std::uint8_t>(60 + rng.below(140));
  for (std::size_t p = 0; p < img.pixels.size(); p += 3) std::copy(bg, bg + 3, img.pixels.begin() + p);
  Canvas canvas{img};
  draw_clutter(canvas, rng);
  if (glyph) {
    const GlyphPlacement g = *glyph;
    const double inner = std::max(0.0, g.radius - spec.thickness_px);
    canvas.fill(g.cx - g.radius, g.cy - g.radius, g.cx + g.radius, g.cy + g.radius, spec.rgb,
                [&](double x, double y) {
                  const double r2 = (x - g.cx) * (x - g.cx) + (y - g.cy) * (y - g.cy);
                  return r2 <= g.radius * g.radius && r2 >= inner * inner;
                });
  }
  return img;
}

void write_png(const RgbImage& img, const std::filesystem::path& path) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(img.width);
  image.height = static_cast<png_uint_32>(img.height);
  image.format = PNG_FORMAT_RGB;
  if (!png_image_write_to_file(&image, path.c_str(), 0, img.pixels.data(), 0, nullptr)) {
    const std::string msg = image.message;
    png_image_free(&image);
    throw IoError("cannot write " + path.string() + ": " + msg);
  }
}

RgbImage read_png(const std::filesystem::path& path) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.c_str())) {
    throw IoError("cannot read " + path.string() + ": " + image.message);
  }
  image.format = PNG_FORMAT_RGB;
  RgbImage img{static_cast<int>(image.width), static_cast<int>(image.height),
               std::vector<std::uint8_t>(PNG_IMAGE_SIZE(image))};
  if (!png_image_finish_read(&image, nullptr, img.pixels.data(), 0, nullptr)) {
    const std::string msg = image.message;
    png_image_free(&image);
    throw FormatError("cannot decode " + path.string() + ": " + msg);
  }
  return img;
}

nlohmann::json to_json(const ImageManifest& m) {
  return nlohmann::json{{"version", 1},
                        {"query_id", m.query_id},
                        {"query_text", m.query_text},
                        {"width", m.width},
                        {"height", m.height},
                        {"image_ids", m.image_ids},
                        {"is_target", m.is_target},
                        {"example_image_ids", m.example_image_ids}};
}

ImageManifest image_manifest_from_json(const nlohmann::json& j) {
  ImageManifest m;
  try {
    m.query_id = j.value("query_id", std::string{});
    m.query_text = j.value("query_text", std::string{});
    m.width = j.value("width", 0);
    m.height = j.value("height", 0);
    m.image_ids = j.at("image_ids").get<std::vector<std::string>>();
    m.is_target = j.at("is_target").get<std::vector<bool>>();
    m.example_image_ids = j.value("example_image_ids", std::vector<std::string>{});
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("image manifest: ") + e.what());
  }
  if (m.image_ids.size() != m.is_target.size()) {
    throw FormatError("image manifest: image_ids and is_target differ in length");
  }
  return m;
}

ImageManifest gen_images(int n, int n_targets, const GlyphSpec& glyph, std::uint64_t seed,
                         const std::filesystem::path& out_dir, const ImageSetOptions& options) {
  if (n <= 0 || n_targets < 0 || n_targets > n) {
    throw PreconditionError("gen_images: need 0 <= n_targets <= n, got n=" + std::to_string(n) +
                            " n_targets=" + std::to_string(n_targets));
  }
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create " + out_dir.string() + ": " + ec.message());

  ImageManifest manifest;
  manifest.query_id = options.query_id;
  manifest.query_text = options.query_text;
  manifest.width = options.width;
  manifest.height = options.height;
  manifest.is_target.assign(static_cast<std::size_t>(n), false);

  Xoshiro256 rng(seed);
  std::vector<int> order(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
  fisher_yates_shuffle(std::span<int>(order), rng);
  for (int k = 0; k < n_targets; ++k) manifest.is_target[static_cast<std::size_t>(order[static_cast<std::size_t>(k)])] = true;

  for (int i = 0; i < n; ++i) {
    const std::string id = padded_id(options.id_prefix, i, n);
    Xoshiro256 image_rng(derive_seed(seed, static_cast<std::uint64_t>(i) + 1));
    std::optional<GlyphPlacement> g;
    if (manifest.is_target[static_cast<std::size_t>(i)]) {
      g = place_glyph(options.width, options.height, glyph, image_rng);
    }
    write_png(render_image(options.width, options.height, g ? &*g : nullptr, glyph, image_rng),
              out_dir / (id + ".png"));
    manifest.image_ids.push_back(id);
  }
  for (int e = 0; e < options.n_examples; ++e) {
    const std::string id = "example_" + std::to_string(e);
    Xoshiro256 image_rng(derive_seed(seed, 0x6578616d706c65ULL + static_cast<std::uint64_t>(e)));
    const GlyphPlacement g = place_glyph(options.width, options.height, glyph, image_rng);
    write_png(render_image(options.width, options.height, &g, glyph, image_rng), out_dir / (id + ".png"));
    manifest.example_image_ids.push_back(id);
  }
  save_json(to_json(manifest), out_dir / "manifest.json");
  return manifest;
}

FeatureSet gen_feature_set(const FeatureSetOptions& o, std::uint64_t seed) {
  if (o.d < 2) throw PreconditionError("gen_feature_set: d must be at least 2, got " + std::to_string(o.d));
  if (o.n <= 0 || o.n_relevant < 0 || o.n_relevant > o.n) {
    throw PreconditionError("gen_feature_set: need 0 <= n_relevant <= n");
  }
  if (o.n_clusters < 1) throw PreconditionError("gen_feature_set: need at least one distractor cluster");
  if (!(o.noise_sd > 0.0) || o.separation < 0.0 || o.centre_sd < 0.0) {
    throw PreconditionError("gen_feature_set: noise_sd must be positive, separation and centre_sd non-negative");
  }
  const auto d = static_cast<std::size_t>(o.d);
  const auto k = static_cast<std::size_t>(o.n_clusters);
  Xoshiro256 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);

  std::vector<std::vector<double>> centres(k, std::vector<double>(d));
  for (auto& c : centres) {
    for (double& v : c) v = normal(rng) * o.centre_sd * o.noise_sd;
  }

  // Relevant centre at exactly separation * noise_sd from an anchor cluster,
  // in a random direction that leaves every other centre at least as far.
  const double gap = o.separation * o.noise_sd;
  const std::size_t anchor = rng.below(k);
  std::vector<double> relevant_centre = centres[anchor];
  if (gap > 0.0) {
    bool placed = false;
    for (int attempt = 0; attempt < 10000 && !placed; ++attempt) {
      std::vector<double> u(d);
      double norm = 0.0;
      for (double& v : u) {
        v = normal(rng);
        norm += v * v;
      }
      norm = std::sqrt(norm);
      for (std::size_t j = 0; j < d; ++j) relevant_centre[j] = centres[anchor][j] + gap * u[j] / norm;
      placed = true;
      for (std::size_t m = 0; m < k && placed; ++m) {
        if (m == anchor) continue;
        double dist2 = 0.0;
        for (std::size_t j = 0; j < d; ++j) {
          const double dv = relevant_centre[j] - centres[m][j];
          dist2 += dv * dv;
        }
        placed = dist2 >= gap * gap;
      }
    }
    if (!placed) throw PreconditionError("gen_feature_set: could not place the relevant cluster; lower separation");
  }

  FeatureSet set;
  const auto n = static_cast<std::size_t>(o.n);
  set.matrix.values = Matrix(n, d);
  set.relevant.assign(n, false);
  set.cluster.assign(n, -1);
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  fisher_yates_shuffle(std::span<std::size_t>(order), rng);
  for (std::size_t r = 0; r < static_cast<std::size_t>(o.n_relevant); ++r) set.relevant[order[r]] = true;

  for (std::size_t i = 0; i < n; ++i) {
    set.matrix.image_ids.push_back(padded_id(o.id_prefix, static_cast<int>(i), o.n));
    const std::vector<double>* centre = &relevant_centre;
    if (!set.relevant[i]) {
      set.cluster[i] = static_cast<int>(rng.below(k));
      centre = &centres[static_cast<std::size_t>(set.cluster[i])];
    }
    auto row = set.matrix.values.row(i);
    for (std::size_t j = 0; j < d; ++j) row[j] = static_cast<float>((*centre)[j] + normal(rng) * o.noise_sd);
  }
  return set;
}

nlohmann::json feature_truth_json(const FeatureSet& set) {
  return nlohmann::json{{"version", 1}, {"image_ids", set.matrix.image_ids}, {"is_relevant", set.relevant}};
}

std::vector<bool> load_feature_truth(const std::filesystem::path& path, const FeatureMatrix& matrix) {
  const nlohmann::json j = load_json(path);
  std::vector<std::string> ids;
  std::vector<bool> relevant;
  try {
    ids = j.at("image_ids").get<std::vector<std::string>>();
    relevant = j.at("is_relevant").get<std::vector<bool>>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
  if (ids != matrix.image_ids || relevant.size() != ids.size()) {
    throw DataError(path.string() + ": ground truth is not row-aligned with the feature matrix");
  }
  return relevant;
}

SessionImages select_session_images(const std::vector<std::string>& ids, const std::vector<bool>& is_target,
                                    std::uint64_t seed) {
  if (ids.size() != is_target.size()) throw PreconditionError("select_session_images: length mismatch");
  std::vector<std::size_t> targets;
  std::vector<std::size_t> distractors;
  for (std::size_t i = 0; i < ids.size(); ++i) (is_target[i] ? targets : distractors).push_back(i);
  const auto need_t = static_cast<std::size_t>(kTargetsPerQuery);
  const auto need_d = static_cast<std::size_t>(kImagesPerQuery - kTargetsPerQuery);
  if (targets.size() < need_t || distractors.size() < need_d) {
    throw PreconditionError("select_session_images: collection has " + std::to_string(targets.size()) +
                            " targets and " + std::to_string(distractors.size()) + " distractors, need " +
                            std::to_string(need_t) + " and " + std::to_string(need_d));
  }
  Xoshiro256 rng(seed);
  fisher_yates_shuffle(std::span<std::size_t>(targets), rng);
  fisher_yates_shuffle(std::span<std::size_t>(distractors), rng);
  targets.resize(need_t);
  distractors.resize(need_d);
  std::sort(targets.begin(), targets.end());
  std::sort(distractors.begin(), distractors.end());
  SessionImages out;
  for (std::size_t i : targets) out.targets.push_back(ids[i]);
  for (std::size_t i : distractors) out.distractors.push_back(ids[i]);
  return out;
}

}  // namespace eegrf
