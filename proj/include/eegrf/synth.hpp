#pragma once

// Synthetic oddball-session EEG: background activity on every channel plus a
// P300-like Gaussian deflection after each target stimulus.

#include <cstdint>
#include <string>
#include <vector>

#include "eegrf/dataio.hpp"

namespace eegrf {

struct UserProfile {
  std::string name = "default";
  double p300_amp_uv = 6.0;
  double p300_latency_s = 0.4;
  double p300_width_s = 0.075;
  double latency_jitter_sd_s = 0.05;
  double amp_jitter_rel_sd = 0.3;
  double noise_sd_uv = 5.0;
  // Background knobs. None of these carry information about the stimuli.
  double alpha_amp_uv = 3.0;   // ~10 Hz rhythm, per-channel frequency and phase
  double drift_sd_uv = 4.0;    // 1/f-shaped slow drift, per channel and common mode
  // Behavioural button presses (logged, never used for classification).
  double button_hit_rate = 0.9;
  double button_delay_s = 0.45;
  double button_jitter_sd_s = 0.08;
  // Per-channel P300 weight in [0, 1]; empty means parietal_topography() of
  // the standard montage.
  std::vector<double> topography;
  std::uint64_t seed = 0;

  // Throws PreconditionError.
  void validate(std::size_t n_channels) const;
};

nlohmann::json to_json(const UserProfile& p);
UserProfile user_profile_from_json(const nlohmann::json& j);
UserProfile load_user_profile(const std::filesystem::path& path);

// Presets: expert 8 uV / 30 ms latency jitter, novice 4 uV / 60 ms.
UserProfile expert_profile();
UserProfile novice_profile();

// 32-channel 10-20 montage in amplifier order.
const std::vector<std::string>& standard_channel_labels();

// Gaussian fall-off around Pz (weight 1 at Pz) over approximate scalp
// positions of the standard montage. Unknown labels get weight 0.
std::vector<double> parietal_topography(const std::vector<std::string>& labels);

// amp * exp(-(t - latency)^2 / (2 width^2)). Throws PreconditionError if width <= 0.
double p300_template(double t_s, double amp, double latency, double width);

struct SimulationOptions {
  int sample_rate_hz = 1000;
  double pre_roll_s = 2.0;   // before the first stimulus onset
  double post_roll_s = 2.5;  // after the last stimulus leaves the screen
};

struct SimulatedSession {
  RawRecording recording;
  std::vector<EventMarker> markers;  // one per stimulus, sorted by onset
  AnnotationLog presses;             // rsvp-mode log with show and button events
};

// Deterministic in (plan, profile): the noise streams are seeded from
// profile.seed, plan.seed and plan.query_id.
SimulatedSession simulate_recording(const RsvpPlan& plan, const UserProfile& profile,
                                    const SimulationOptions& options = {});

// Background activity only (no stimuli), standard montage.
RawRecording simulate_background(const UserProfile& profile, double duration_s, int sample_rate_hz,
                                 std::uint64_t seed);

}  // namespace eegrf
