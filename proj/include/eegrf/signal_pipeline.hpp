#pragma once

// EEG epoch feature extraction:
//   average re-reference -> boxcar decimation -> zero-phase band-pass
//   -> epochs around each stimulus -> per-channel window means.

#include <span>
#include <vector>

#include "eegrf/dataio.hpp"

namespace eegrf {

// How the 16 feature windows relate to the nominal 200 ms - 1 s region.
//   kExtended: the span grows to (n_windows - 1) * hop + window_len samples
//              (204 at 250 Hz) so every window is complete.
//   kTruncated: the span is exactly the nominal region (200 samples) and the
//              trailing windows are clipped to it.
enum class SpanMode { kExtended, kTruncated };

struct PipelineConfig {
  int decim_factor = 4;
  double band_lo_hz = 0.1;
  double band_hi_hz = 20.0;
  int filter_order = 4;  // per band edge
  double epoch_pre_s = 1.0;
  double epoch_post_s = 2.0;
  double window_start_s = 0.2;
  double window_end_s = 1.0;  // nominal end of the region, used by kTruncated
  int n_windows = 16;
  int window_len = 24;
  int hop = 12;
  SpanMode span_mode = SpanMode::kExtended;

  // Throws PreconditionError when the configuration is inconsistent for a
  // recording sampled at input_rate_hz.
  void validate(int input_rate_hz) const;

  int n_features(std::size_t n_channels) const { return static_cast<int>(n_channels) * n_windows; }
};

nlohmann::json to_json(const PipelineConfig& cfg);
PipelineConfig pipeline_config_from_json(const nlohmann::json& j);

// out[c][t] = in[c][t] - mean_c in[c][t]. Requires >= 2 channels.
RawRecording rereference_average(const RawRecording& rec);

// Mean of non-overlapping groups of `factor` samples. A tail shorter than
// `factor` is dropped.
RawRecording decimate(const RawRecording& rec, int factor);

// Zero-phase Butterworth band-pass (high-pass of `order` at lo, low-pass of
// `order` at hi), applied forward and backward.
RawRecording bandpass(const RawRecording& rec, double lo_hz, double hi_hz, int order = 4);

// Markers index the recording passed in. Every marker needs pre/post room;
// otherwise all offending markers are reported in one PreconditionError.
std::vector<Epoch> extract_epochs(const RawRecording& rec, std::span<const EventMarker> markers,
                                  const PipelineConfig& cfg);

FeatureVector epoch_features(const Epoch& epoch, const PipelineConfig& cfg);

// Full chain on a raw recording. Marker onsets refer to the raw sample rate
// and are divided by cfg.decim_factor after decimation. Rows follow marker order.
LabeledFeatures preprocess_session(const RawRecording& rec, std::span<const EventMarker> markers,
                                   const PipelineConfig& cfg);

}  // namespace eegrf
