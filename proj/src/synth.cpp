#include "eegrf/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <unordered_map>

#include "eegrf/errors.hpp"
#include "eegrf/planner.hpp"
#include "eegrf/random.hpp"

namespace eegrf {

namespace {

struct ScalpPos {
  const char* label;
  double x;  // left (-) to right (+)
  double y;  // back (-) to front (+)
};

// Azimuthal projection, head radius 1.
constexpr ScalpPos kMontage[] = {
    {"Fp1", -0.31, 0.95}, {"Fz", 0.0, 0.5},     {"F3", -0.42, 0.55},  {"F7", -0.81, 0.59},
    {"FT9", -0.95, 0.31}, {"FC5", -0.65, 0.28}, {"FC1", -0.22, 0.25}, {"C3", -0.5, 0.0},
    {"T7", -1.0, 0.0},    {"TP9", -0.95, -0.31}, {"CP5", -0.65, -0.28}, {"CP1", -0.22, -0.25},
    {"Pz", 0.0, -0.5},    {"P3", -0.42, -0.55}, {"P7", -0.81, -0.59}, {"O1", -0.31, -0.95},
    {"Oz", 0.0, -1.0},    {"O2", 0.31, -0.95},  {"P4", 0.42, -0.55},  {"P8", 0.81, -0.59},
    {"TP10", 0.95, -0.31}, {"CP6", 0.65, -0.28}, {"CP2", 0.22, -0.25}, {"Cz", 0.0, 0.0},
    {"C4", 0.5, 0.0},     {"T8", 1.0, 0.0},     {"FT10", 0.95, 0.31}, {"FC6", 0.65, 0.28},
    {"FC2", 0.22, 0.25},  {"F4", 0.42, 0.55},   {"F8", 0.81, 0.59},   {"Fp2", 0.31, 0.95},
};

constexpr double kTopographySpread = 0.45;

// Slow drift is synthesized on a coarse grid and linearly interpolated.
constexpr double kDriftGridHz = 100.0;
// Time constants of the AR(1) components; equal variance per component gives
// an approximately 1/f spectrum between the slowest and fastest corner.
constexpr double kDriftTau[] = {0.02, 0.06, 0.18, 0.54, 1.62, 4.86, 14.58};

enum Stream : std::uint64_t {
  kWhite = 1,
  kAlpha = 2,
  kDrift = 3,
  kCommonDrift = 4,
  kEvents = 5,
  kButtons = 6,
};

std::vector<double> drift_series(std::size_t n_samples, int rate_hz, double sd, std::uint64_t seed) {
  std::vector<double> out(n_samples, 0.0);
  if (sd <= 0.0 || n_samples == 0) return out;
  const double duration = static_cast<double>(n_samples) / rate_hz;
  const auto n_grid = static_cast<std::size_t>(std::ceil(duration * kDriftGridHz)) + 2;
  const double dt = 1.0 / kDriftGridHz;
  const double comp_sd = sd / std::sqrt(static_cast<double>(std::size(kDriftTau)));

  Xoshiro256 rng(seed);
  std::normal_distribution<double> normal;
  std::vector<double> grid(n_grid, 0.0);
  for (double tau : kDriftTau) {
    const double a = std::exp(-dt / tau);
    const double innovation = comp_sd * std::sqrt(1.0 - a * a);
    double v = comp_sd * normal(rng);  // stationary start
    for (std::size_t k = 0; k < n_grid; ++k) {
      grid[k] += v;
      v = a * v + innovation * normal(rng);
    }
  }
  for (std::size_t t = 0; t < n_samples; ++t) {
    const double pos = static_cast<double>(t) / rate_hz * kDriftGridHz;
    const auto k = static_cast<std::size_t>(pos);
    const double frac = pos - static_cast<double>(k);
    out[t] = grid[k] * (1.0 - frac) + grid[k + 1] * frac;
  }
  return out;
}

// White noise + alpha rhythm + drift for every channel.
Matrix background(const UserProfile& profile, std::size_t n_channels, std::size_t n_samples, int rate_hz,
                  std::uint64_t seed) {
  Matrix m(n_channels, n_samples);
  const std::vector<double> common = drift_series(n_samples, rate_hz, profile.drift_sd_uv, derive_seed(seed, kCommonDrift));
  Xoshiro256 alpha_rng(derive_seed(seed, kAlpha));
  for (std::size_t c = 0; c < n_channels; ++c) {
    Xoshiro256 white_rng(derive_seed(derive_seed(seed, kWhite), c));
    std::normal_distribution<double> normal(0.0, profile.noise_sd_uv);
    const std::vector<double> own =
        drift_series(n_samples, rate_hz, profile.drift_sd_uv, derive_seed(derive_seed(seed, kDrift), c));

    // Alpha via the Chebyshev recurrence s[t+1] = 2 cos(w) s[t] - s[t-1].
    const double freq = 9.5 + alpha_rng.uniform();
    const double phase = 2.0 * std::numbers::pi * alpha_rng.uniform();
    const double w = 2.0 * std::numbers::pi * freq / rate_hz;
    const double k = 2.0 * std::cos(w);
    double s_prev = std::sin(phase - w);
    double s_cur = std::sin(phase);

    auto row = m.row(c);
    for (std::size_t t = 0; t < n_samples; ++t) {
      row[t] = static_cast<float>(normal(white_rng) + profile.alpha_amp_uv * s_cur + own[t] + common[t]);
      const double s_next = k * s_cur - s_prev;
      s_prev = s_cur;
      s_cur = s_next;
    }
  }
  return m;
}

std::uint64_t session_seed(const RsvpPlan& plan, const UserProfile& profile) {
  return derive_seed(derive_seed(profile.seed, plan.seed), hash_string(plan.query_id));
}

}  // namespace

void UserProfile::validate(std::size_t n_channels) const {
  if (!(p300_amp_uv >= 0.0)) throw PreconditionError("profile '" + name + "': p300_amp_uv must be >= 0");
  if (!(p300_width_s > 0.0)) throw PreconditionError("profile '" + name + "': p300_width_s must be > 0");
  if (!(noise_sd_uv > 0.0)) throw PreconditionError("profile '" + name + "': noise_sd_uv must be > 0");
  if (latency_jitter_sd_s < 0.0 || amp_jitter_rel_sd < 0.0 || drift_sd_uv < 0.0 || alpha_amp_uv < 0.0 ||
      button_jitter_sd_s < 0.0) {
    throw PreconditionError("profile '" + name + "': standard deviations and amplitudes must be >= 0");
  }
  if (button_hit_rate < 0.0 || button_hit_rate > 1.0) {
    throw PreconditionError("profile '" + name + "': button_hit_rate must lie in [0, 1]");
  }
  if (!topography.empty()) {
    if (topography.size() != n_channels) {
      throw PreconditionError("profile '" + name + "': topography has " + std::to_string(topography.size()) +
                              " weights for " + std::to_string(n_channels) + " channels");
    }
    bool has_peak = false;
    for (double w : topography) {
      if (w < 0.0 || w > 1.0) throw PreconditionError("profile '" + name + "': topography weights must lie in [0, 1]");
      has_peak = has_peak || w == 1.0;
    }
    if (!has_peak) throw PreconditionError("profile '" + name + "': topography needs one weight equal to 1");
  }
}

nlohmann::json to_json(const UserProfile& p) {
  return nlohmann::json{{"name", p.name},
                        {"p300_amp_uv", p.p300_amp_uv},
                        {"p300_latency_s", p.p300_latency_s},
                        {"p300_width_s", p.p300_width_s},
                        {"latency_jitter_sd_s", p.latency_jitter_sd_s},
                        {"amp_jitter_rel_sd", p.amp_jitter_rel_sd},
                        {"noise_sd_uv", p.noise_sd_uv},
                        {"alpha_amp_uv", p.alpha_amp_uv},
                        {"drift_sd_uv", p.drift_sd_uv},
                        {"button_hit_rate", p.button_hit_rate},
                        {"button_delay_s", p.button_delay_s},
                        {"button_jitter_sd_s", p.button_jitter_sd_s},
                        {"topography", p.topography},
                        {"seed", p.seed}};
}

UserProfile user_profile_from_json(const nlohmann::json& j) {
  UserProfile p;
  try {
    p.name = j.value("name", p.name);
    p.p300_amp_uv = j.value("p300_amp_uv", p.p300_amp_uv);
    p.p300_latency_s = j.value("p300_latency_s", p.p300_latency_s);
    p.p300_width_s = j.value("p300_width_s", p.p300_width_s);
    p.latency_jitter_sd_s = j.value("latency_jitter_sd_s", p.latency_jitter_sd_s);
    p.amp_jitter_rel_sd = j.value("amp_jitter_rel_sd", p.amp_jitter_rel_sd);
    p.noise_sd_uv = j.value("noise_sd_uv", p.noise_sd_uv);
    p.alpha_amp_uv = j.value("alpha_amp_uv", p.alpha_amp_uv);
    p.drift_sd_uv = j.value("drift_sd_uv", p.drift_sd_uv);
    p.button_hit_rate = j.value("button_hit_rate", p.button_hit_rate);
    p.button_delay_s = j.value("button_delay_s", p.button_delay_s);
    p.button_jitter_sd_s = j.value("button_jitter_sd_s", p.button_jitter_sd_s);
    p.topography = j.value("topography", p.topography);
    p.seed = j.value("seed", p.seed);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("user profile: ") + e.what());
  }
  return p;
}

UserProfile load_user_profile(const std::filesystem::path& path) {
  try {
    return user_profile_from_json(load_json(path));
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

UserProfile expert_profile() {
  UserProfile p;
  p.name = "expert";
  p.p300_amp_uv = 8.0;
  p.latency_jitter_sd_s = 0.03;
  p.seed = 1;
  return p;
}

UserProfile novice_profile() {
  UserProfile p;
  p.name = "novice";
  p.p300_amp_uv = 4.0;
  p.latency_jitter_sd_s = 0.06;
  p.seed = 2;
  return p;
}

const std::vector<std::string>& standard_channel_labels() {
  static const std::vector<std::string> labels = [] {
    std::vector<std::string> out;
    for (const auto& pos : kMontage) out.emplace_back(pos.label);
    return out;
  }();
  return labels;
}

std::vector<double> parietal_topography(const std::vector<std::string>& labels) {
  std::unordered_map<std::string, ScalpPos> by_label;
  for (const auto& pos : kMontage) by_label.emplace(pos.label, pos);
  const ScalpPos& pz = by_label.at("Pz");
  std::vector<double> weights;
  weights.reserve(labels.size());
  for (const auto& label : labels) {
    const auto it = by_label.find(label);
    if (it == by_label.end()) {
      weights.push_back(0.0);
      continue;
    }
    const double dx = it->second.x - pz.x;
    const double dy = it->second.y - pz.y;
    weights.push_back(std::exp(-(dx * dx + dy * dy) / (2.0 * kTopographySpread * kTopographySpread)));
  }
  return weights;
}

double p300_template(double t_s, double amp, double latency, double width) {
  if (!(width > 0.0)) throw PreconditionError("p300_template: width must be > 0");
  const double d = t_s - latency;
  return amp * std::exp(-d * d / (2.0 * width * width));
}

RawRecording simulate_background(const UserProfile& profile, double duration_s, int sample_rate_hz,
                                 std::uint64_t seed) {
  const auto& labels = standard_channel_labels();
  profile.validate(labels.size());
  const auto n = static_cast<std::size_t>(std::llround(duration_s * sample_rate_hz));
  return RawRecording{sample_rate_hz, labels, background(profile, labels.size(), n, sample_rate_hz, seed)};
}

SimulatedSession simulate_recording(const RsvpPlan& plan, const UserProfile& profile,
                                    const SimulationOptions& options) {
  validate_plan(plan);
  const auto& labels = standard_channel_labels();
  profile.validate(labels.size());
  const std::vector<double> topo = profile.topography.empty() ? parietal_topography(labels) : profile.topography;
  const int rate = options.sample_rate_hz;
  if (rate <= 0 || rate % 1000 != 0) {
    throw PreconditionError("simulate_recording: sample rate must be a positive multiple of 1000 Hz");
  }
  const int per_ms = rate / 1000;

  const std::vector<std::int64_t> onsets_ms = timeline_ms(plan);
  const std::int64_t period_ms = stimulus_period_ms(plan.rate_hz);
  const auto pre_ms = static_cast<std::int64_t>(std::llround(options.pre_roll_s * 1000.0));
  const auto post_ms = static_cast<std::int64_t>(std::llround(options.post_roll_s * 1000.0));
  const std::int64_t total_ms = pre_ms + onsets_ms.back() + period_ms + post_ms;
  const auto n_samples = static_cast<std::size_t>(total_ms * per_ms);

  const std::uint64_t seed = session_seed(plan, profile);
  SimulatedSession session;
  session.recording = RawRecording{rate, labels, background(profile, labels.size(), n_samples, rate, seed)};

  const std::vector<PlanItem> order = plan.presentation_order();
  session.markers.reserve(order.size());
  {
    std::size_t i = 0;
    for (std::size_t b = 0; b < plan.blocks.size(); ++b) {
      for (std::size_t k = 0; k < plan.blocks[b].size(); ++k, ++i) {
        session.markers.push_back({(pre_ms + onsets_ms[i]) * per_ms, order[i].image_id, order[i].is_target,
                                   static_cast<int>(b), plan.query_id});
      }
    }
  }

  // P300 for each target, with per-event amplitude and latency jitter.
  Xoshiro256 event_rng(derive_seed(seed, kEvents));
  std::normal_distribution<double> normal;
  const double reach_s = 6.0 * profile.p300_width_s;
  std::vector<double> wave;
  for (const auto& m : session.markers) {
    if (!m.is_target) continue;
    const double amp = profile.p300_amp_uv * std::max(0.0, 1.0 + profile.amp_jitter_rel_sd * normal(event_rng));
    const double latency = profile.p300_latency_s + profile.latency_jitter_sd_s * normal(event_rng);
    if (amp == 0.0) continue;
    const auto first = std::max<std::int64_t>(0, static_cast<std::int64_t>(std::floor((latency - reach_s) * rate)));
    const auto last = static_cast<std::int64_t>(std::ceil((latency + reach_s) * rate));
    wave.clear();
    for (std::int64_t k = first; k <= last; ++k) {
      wave.push_back(p300_template(static_cast<double>(k) / rate, amp, latency, profile.p300_width_s));
    }
    for (std::size_t c = 0; c < labels.size(); ++c) {
      if (topo[c] == 0.0) continue;
      auto row = session.recording.samples.row(c);
      for (std::size_t k = 0; k < wave.size(); ++k) {
        const auto t = static_cast<std::size_t>(m.onset_sample + first + static_cast<std::int64_t>(k));
        if (t >= n_samples) break;
        row[t] = static_cast<float>(row[t] + topo[c] * wave[k]);
      }
    }
  }

  // Behavioural log: every stimulus shown, button presses for detected targets.
  AnnotationLog& log = session.presses;
  log.session_id = plan.query_id;
  log.mode = AnnotationMode::kRsvp;
  log.rate_hz = plan.rate_hz;
  log.duration_s = static_cast<double>(total_ms) / 1000.0;
  std::vector<AnnotationEvent> presses;
  Xoshiro256 button_rng(derive_seed(seed, kButtons));
  for (std::size_t i = 0; i < order.size(); ++i) {
    const int block = session.markers[i].block_index;
    log.events.push_back({pre_ms + onsets_ms[i], EventKind::kShow, order[i].image_id, block, {}, {}});
    if (!order[i].is_target) continue;
    const double jitter = profile.button_jitter_sd_s * normal(button_rng);
    if (button_rng.uniform() >= profile.button_hit_rate) continue;
    const auto t = pre_ms + onsets_ms[i] +
                   static_cast<std::int64_t>(std::llround((profile.button_delay_s + jitter) * 1000.0));
    presses.push_back({std::clamp<std::int64_t>(t, pre_ms + onsets_ms[i], total_ms), EventKind::kButton, {}, {}, {}, {}});
  }
  std::stable_sort(presses.begin(), presses.end(),
                   [](const AnnotationEvent& a, const AnnotationEvent& b) { return a.t_ms < b.t_ms; });
  // Each press names the image on screen at that moment (none during rests).
  for (auto& p : presses) {
    const std::int64_t rel = p.t_ms - pre_ms;
    const auto it = std::upper_bound(onsets_ms.begin(), onsets_ms.end(), rel);
    const auto idx = static_cast<std::size_t>(it - onsets_ms.begin()) - 1;
    if (rel < onsets_ms[idx] + period_ms) {
      p.image_id = order[idx].image_id;
      p.page = session.markers[idx].block_index;
    }
  }
  std::vector<AnnotationEvent> merged;
  merged.reserve(log.events.size() + presses.size());
  std::merge(log.events.begin(), log.events.end(), presses.begin(), presses.end(), std::back_inserter(merged),
             [](const AnnotationEvent& a, const AnnotationEvent& b) { return a.t_ms < b.t_ms; });
  log.events = std::move(merged);
  return session;
}

}  // namespace eegrf
