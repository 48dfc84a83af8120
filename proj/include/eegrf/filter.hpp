#pragma once

// Digital Butterworth filters as cascades of second-order sections, and
// zero-phase (forward-backward) application.

#include <span>
#include <vector>

namespace eegrf {

// One second-order section, normalized so a0 = 1:
//   H(z) = (b0 + b1 z^-1 + b2 z^-2) / (1 + a1 z^-1 + a2 z^-2)
// First-order sections have b2 = a2 = 0.
struct Biquad {
  double b0 = 1, b1 = 0, b2 = 0;
  double a1 = 0, a2 = 0;
};

using SosFilter = std::vector<Biquad>;

// Bilinear-transform designs with frequency prewarping, so the digital
// magnitude is exactly 1 / (1 + (tan(pi f/fs) / tan(pi fc/fs))^(2n)) for the
// low-pass (and the mirrored expression for the high-pass).
// Throw PreconditionError for order < 1 or fc outside (0, fs/2), and
// NumericError when a pole lands on or outside the unit circle.
SosFilter butterworth_lowpass(int order, double cutoff_hz, double sample_rate_hz);
SosFilter butterworth_highpass(int order, double cutoff_hz, double sample_rate_hz);

// High-pass at lo followed by low-pass at hi, each of the given order.
SosFilter butterworth_bandpass(int order, double lo_hz, double hi_hz, double sample_rate_hz);

// |H(e^{j 2 pi f / fs})| of a single pass.
double magnitude_response(const SosFilter& sos, double freq_hz, double sample_rate_hz);

// Total filter order (2 per biquad, 1 per first-order section).
int filter_order(const SosFilter& sos);

// Causal filtering in transposed direct form II, starting from the given
// per-section state (two values per section), which is updated in place.
void sos_filter_inplace(const SosFilter& sos, std::span<double> x, std::span<double> state);

// Per-section state for which a constant input of 1 is already in steady
// state. Scale by the first input sample before filtering.
std::vector<double> sos_steady_state(const SosFilter& sos);

// Zero-phase filtering: odd-reflection padding of pad_len samples at both
// ends, steady-state initial conditions, forward pass, backward pass, trim.
// pad_len < 0 selects 3 x filter_order(sos). The padding is clipped to
// x.size() - 1.
void sos_filtfilt_inplace(const SosFilter& sos, std::span<double> x, int pad_len = -1);

}  // namespace eegrf
