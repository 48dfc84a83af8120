#include "eegrf/signal_pipeline.hpp"

#include <cmath>
#include <sstream>
#include <string>

#include "eegrf/errors.hpp"
#include "eegrf/filter.hpp"

namespace eegrf {

namespace {

int seconds_to_samples(double seconds, int rate_hz) {
  return static_cast<int>(std::lround(seconds * rate_hz));
}

struct FeatureSpan {
  int start = 0;  // first sample of the span within the epoch
  int length = 0;
};

FeatureSpan feature_span(const PipelineConfig& cfg, int rate_hz) {
  FeatureSpan span;
  span.start = seconds_to_samples(cfg.epoch_pre_s + cfg.window_start_s, rate_hz);
  if (cfg.span_mode == SpanMode::kExtended) {
    span.length = (cfg.n_windows - 1) * cfg.hop + cfg.window_len;
  } else {
    span.length = seconds_to_samples(cfg.window_end_s - cfg.window_start_s, rate_hz);
  }
  return span;
}

Epoch slice_epoch(const RawRecording& rec, const EventMarker& m, std::int64_t onset, int pre, int post) {
  Epoch ep;
  ep.image_id = m.image_id;
  ep.is_target = m.is_target;
  ep.epoch_sample_rate_hz = rec.sample_rate_hz;
  const auto len = static_cast<std::size_t>(pre + post);
  ep.data = Matrix(rec.n_channels(), len);
  const auto first = static_cast<std::size_t>(onset - pre);
  for (std::size_t c = 0; c < rec.n_channels(); ++c) {
    const auto src = rec.samples.row(c).subspan(first, len);
    std::copy(src.begin(), src.end(), ep.data.row(c).begin());
  }
  return ep;
}

// Collects every marker whose epoch would leave the recording.
void check_epoch_bounds(std::span<const EventMarker> markers, std::span<const std::int64_t> onsets,
                        std::int64_t n_samples, int pre, int post) {
  std::ostringstream report;
  std::size_t rejected = 0;
  for (std::size_t i = 0; i < markers.size(); ++i) {
    if (onsets[i] - pre < 0 || onsets[i] + post > n_samples) {
      if (rejected < 20) {
        report << "\n  marker " << i << " ('" << markers[i].image_id << "') onset " << onsets[i]
               << " needs [" << onsets[i] - pre << ", " << onsets[i] + post << ") within [0, " << n_samples << ")";
      }
      ++rejected;
    }
  }
  if (rejected > 0) {
    std::ostringstream msg;
    msg << "extract_epochs: " << rejected << " of " << markers.size() << " markers rejected" << report.str();
    if (rejected > 20) msg << "\n  ...";
    throw PreconditionError(msg.str());
  }
}

}  // namespace

void PipelineConfig::validate(int input_rate_hz) const {
  if (decim_factor < 1) throw PreconditionError("pipeline: decim_factor must be >= 1");
  if (input_rate_hz <= 0) throw PreconditionError("pipeline: input sample rate must be positive");
  if (input_rate_hz % decim_factor != 0) {
    throw PreconditionError("pipeline: sample rate " + std::to_string(input_rate_hz) +
                            " Hz not divisible by decim_factor " + std::to_string(decim_factor));
  }
  const double out_rate = static_cast<double>(input_rate_hz) / decim_factor;
  if (!(band_lo_hz > 0.0 && band_lo_hz < band_hi_hz && band_hi_hz < out_rate / 2.0)) {
    throw PreconditionError("pipeline: band edges must satisfy 0 < lo < hi < decimated Nyquist (" +
                            std::to_string(out_rate / 2.0) + " Hz)");
  }
  if (filter_order < 1) throw PreconditionError("pipeline: filter_order must be >= 1");
  if (epoch_pre_s < 0.0 || epoch_post_s <= 0.0) throw PreconditionError("pipeline: bad epoch bounds");
  if (n_windows < 1 || window_len < 1) throw PreconditionError("pipeline: n_windows and window_len must be >= 1");
  if (window_len != 2 * hop) throw PreconditionError("pipeline: hop must be window_len / 2 (50% overlap)");
  if (window_start_s < 0.0 || window_end_s <= window_start_s) {
    throw PreconditionError("pipeline: feature region must satisfy 0 <= start < end");
  }
}

nlohmann::json to_json(const PipelineConfig& cfg) {
  return nlohmann::json{{"decim_factor", cfg.decim_factor},
                        {"band_lo_hz", cfg.band_lo_hz},
                        {"band_hi_hz", cfg.band_hi_hz},
                        {"filter_order", cfg.filter_order},
                        {"epoch_pre_s", cfg.epoch_pre_s},
                        {"epoch_post_s", cfg.epoch_post_s},
                        {"window_start_s", cfg.window_start_s},
                        {"window_end_s", cfg.window_end_s},
                        {"n_windows", cfg.n_windows},
                        {"window_len", cfg.window_len},
                        {"hop", cfg.hop},
                        {"span_mode", cfg.span_mode == SpanMode::kExtended ? "extended" : "truncated"}};
}

PipelineConfig pipeline_config_from_json(const nlohmann::json& j) {
  PipelineConfig cfg;
  try {
    cfg.decim_factor = j.value("decim_factor", cfg.decim_factor);
    cfg.band_lo_hz = j.value("band_lo_hz", cfg.band_lo_hz);
    cfg.band_hi_hz = j.value("band_hi_hz", cfg.band_hi_hz);
    cfg.filter_order = j.value("filter_order", cfg.filter_order);
    cfg.epoch_pre_s = j.value("epoch_pre_s", cfg.epoch_pre_s);
    cfg.epoch_post_s = j.value("epoch_post_s", cfg.epoch_post_s);
    cfg.window_start_s = j.value("window_start_s", cfg.window_start_s);
    cfg.window_end_s = j.value("window_end_s", cfg.window_end_s);
    cfg.n_windows = j.value("n_windows", cfg.n_windows);
    cfg.window_len = j.value("window_len", cfg.window_len);
    cfg.hop = j.value("hop", cfg.hop);
    const std::string mode = j.value("span_mode", std::string("extended"));
    if (mode == "extended") {
      cfg.span_mode = SpanMode::kExtended;
    } else if (mode == "truncated") {
      cfg.span_mode = SpanMode::kTruncated;
    } else {
      throw FormatError("pipeline config: unknown span_mode '" + mode + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("pipeline config: ") + e.what());
  }
  return cfg;
}

RawRecording rereference_average(const RawRecording& rec) {
  const std::size_t n_ch = rec.n_channels();
  const std::size_t n = rec.n_samples();
  if (n_ch < 2) throw PreconditionError("rereference_average: needs at least 2 channels");
  std::vector<double> mean(n, 0.0);
  for (std::size_t c = 0; c < n_ch; ++c) {
    const auto row = rec.samples.row(c);
    for (std::size_t t = 0; t < n; ++t) mean[t] += row[t];
  }
  for (double& m : mean) m /= static_cast<double>(n_ch);

  RawRecording out{rec.sample_rate_hz, rec.channel_labels, Matrix(n_ch, n)};
  for (std::size_t c = 0; c < n_ch; ++c) {
    const auto src = rec.samples.row(c);
    auto dst = out.samples.row(c);
    for (std::size_t t = 0; t < n; ++t) dst[t] = static_cast<float>(src[t] - mean[t]);
  }
  return out;
}

RawRecording decimate(const RawRecording& rec, int factor) {
  if (factor < 1) throw PreconditionError("decimate: factor must be >= 1");
  if (rec.sample_rate_hz % factor != 0) {
    throw PreconditionError("decimate: sample rate not divisible by factor " + std::to_string(factor));
  }
  const auto f = static_cast<std::size_t>(factor);
  const std::size_t n_out = rec.n_samples() / f;
  RawRecording out{rec.sample_rate_hz / factor, rec.channel_labels, Matrix(rec.n_channels(), n_out)};
  for (std::size_t c = 0; c < rec.n_channels(); ++c) {
    const auto src = rec.samples.row(c);
    auto dst = out.samples.row(c);
    for (std::size_t i = 0; i < n_out; ++i) {
      double acc = 0.0;
      for (std::size_t k = 0; k < f; ++k) acc += src[i * f + k];
      dst[i] = static_cast<float>(acc / static_cast<double>(f));
    }
  }
  return out;
}

RawRecording bandpass(const RawRecording& rec, double lo_hz, double hi_hz, int order) {
  const SosFilter sos = butterworth_bandpass(order, lo_hz, hi_hz, rec.sample_rate_hz);
  RawRecording out{rec.sample_rate_hz, rec.channel_labels, Matrix(rec.n_channels(), rec.n_samples())};
  std::vector<double> buf(rec.n_samples());
  for (std::size_t c = 0; c < rec.n_channels(); ++c) {
    const auto src = rec.samples.row(c);
    std::copy(src.begin(), src.end(), buf.begin());
    sos_filtfilt_inplace(sos, buf);
    auto dst = out.samples.row(c);
    for (std::size_t t = 0; t < buf.size(); ++t) dst[t] = static_cast<float>(buf[t]);
  }
  return out;
}

std::vector<Epoch> extract_epochs(const RawRecording& rec, std::span<const EventMarker> markers,
                                  const PipelineConfig& cfg) {
  const int pre = seconds_to_samples(cfg.epoch_pre_s, rec.sample_rate_hz);
  const int post = seconds_to_samples(cfg.epoch_post_s, rec.sample_rate_hz);
  std::vector<std::int64_t> onsets;
  onsets.reserve(markers.size());
  for (const auto& m : markers) onsets.push_back(m.onset_sample);
  check_epoch_bounds(markers, onsets, static_cast<std::int64_t>(rec.n_samples()), pre, post);

  std::vector<Epoch> epochs;
  epochs.reserve(markers.size());
  for (std::size_t i = 0; i < markers.size(); ++i) epochs.push_back(slice_epoch(rec, markers[i], onsets[i], pre, post));
  return epochs;
}

FeatureVector epoch_features(const Epoch& epoch, const PipelineConfig& cfg) {
  const FeatureSpan span = feature_span(cfg, epoch.epoch_sample_rate_hz);
  if (span.start < 0 || span.length <= 0 ||
      static_cast<std::size_t>(span.start + span.length) > epoch.data.cols) {
    throw PreconditionError("epoch_features: epoch of " + std::to_string(epoch.data.cols) +
                            " samples too short for feature span [" + std::to_string(span.start) + ", " +
                            std::to_string(span.start + span.length) + ")");
  }
  FeatureVector fv;
  fv.image_id = epoch.image_id;
  fv.is_target = epoch.is_target;
  fv.values.reserve(epoch.data.rows * static_cast<std::size_t>(cfg.n_windows));
  for (std::size_t c = 0; c < epoch.data.rows; ++c) {
    const auto region = epoch.data.row(c).subspan(static_cast<std::size_t>(span.start),
                                                  static_cast<std::size_t>(span.length));
    for (int w = 0; w < cfg.n_windows; ++w) {
      const int begin = w * cfg.hop;
      const int end = std::min(begin + cfg.window_len, span.length);
      if (end <= begin) throw PreconditionError("epoch_features: window " + std::to_string(w) + " is empty");
      double acc = 0.0;
      for (int t = begin; t < end; ++t) acc += region[static_cast<std::size_t>(t)];
      fv.values.push_back(static_cast<float>(acc / (end - begin)));
    }
  }
  return fv;
}

LabeledFeatures preprocess_session(const RawRecording& rec, std::span<const EventMarker> markers,
                                   const PipelineConfig& cfg) {
  cfg.validate(rec.sample_rate_hz);
  LabeledFeatures out;
  const auto dims = static_cast<std::size_t>(cfg.n_features(rec.n_channels()));
  out.matrix.values = Matrix(0, dims);
  if (markers.empty()) return out;

  const RawRecording filtered =
      bandpass(decimate(rereference_average(rec), cfg.decim_factor), cfg.band_lo_hz, cfg.band_hi_hz, cfg.filter_order);

  const int pre = seconds_to_samples(cfg.epoch_pre_s, filtered.sample_rate_hz);
  const int post = seconds_to_samples(cfg.epoch_post_s, filtered.sample_rate_hz);
  std::vector<std::int64_t> onsets;
  onsets.reserve(markers.size());
  for (const auto& m : markers) onsets.push_back(m.onset_sample / cfg.decim_factor);
  check_epoch_bounds(markers, onsets, static_cast<std::int64_t>(filtered.n_samples()), pre, post);

  out.matrix.values = Matrix(markers.size(), dims);
  out.matrix.image_ids.reserve(markers.size());
  out.is_target.reserve(markers.size());
  for (std::size_t i = 0; i < markers.size(); ++i) {
    const FeatureVector fv = epoch_features(slice_epoch(filtered, markers[i], onsets[i], pre, post), cfg);
    std::copy(fv.values.begin(), fv.values.end(), out.matrix.values.row(i).begin());
    out.matrix.image_ids.push_back(fv.image_id);
    out.is_target.push_back(fv.is_target);
  }
  return out;
}

}  // namespace eegrf
