#include "eegrf/filter.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <string>

#include "eegrf/errors.hpp"

namespace eegrf {

namespace {

using cplx = std::complex<double>;

enum class Kind { kLow, kHigh };

// Checks that every section is stable with some margin.
void check_stable(const SosFilter& sos, double cutoff_hz) {
  for (const auto& s : sos) {
    const double coeffs[] = {s.b0, s.b1, s.b2, s.a1, s.a2};
    for (double c : coeffs) {
      if (!std::isfinite(c)) {
        throw NumericError("butterworth: non-finite coefficient for cutoff " + std::to_string(cutoff_hz) + " Hz");
      }
    }
    // Roots of z^2 + a1 z + a2.
    const cplx disc = std::sqrt(cplx(s.a1 * s.a1 - 4.0 * s.a2, 0.0));
    const cplx r1 = (-s.a1 + disc) / 2.0;
    const cplx r2 = (-s.a1 - disc) / 2.0;
    if (std::abs(r1) >= 1.0 - 1e-12 || std::abs(r2) >= 1.0 - 1e-12) {
      throw NumericError("butterworth: unstable design for cutoff " + std::to_string(cutoff_hz) +
                         " Hz (pole on or outside the unit circle)");
    }
  }
}

SosFilter design(Kind kind, int order, double fc, double fs) {
  if (order < 1) throw PreconditionError("butterworth: order must be >= 1");
  if (!(fs > 0.0)) throw PreconditionError("butterworth: sample rate must be positive");
  if (!(fc > 0.0) || !(fc < fs / 2.0)) {
    throw PreconditionError("butterworth: cutoff " + std::to_string(fc) + " Hz must lie in (0, " +
                            std::to_string(fs / 2.0) + ")");
  }
  const double k = 2.0 * fs;
  const double warped = k * std::tan(std::numbers::pi * fc / fs);
  SosFilter sos;
  // Analog prototype poles in the left half plane; conjugate pairs first.
  for (int i = 0; i < order / 2; ++i) {
    const double theta = std::numbers::pi * (2.0 * i + 1.0 + order) / (2.0 * order);
    const cplx proto = std::polar(1.0, theta);
    const cplx s = kind == Kind::kLow ? warped * proto : warped / proto;
    const cplx z = (k + s) / (k - s);
    Biquad q;
    q.a1 = -2.0 * z.real();
    q.a2 = std::norm(z);
    if (kind == Kind::kLow) {
      const double g = (1.0 + q.a1 + q.a2) / 4.0;  // unity gain at DC
      q.b0 = g;
      q.b1 = 2.0 * g;
      q.b2 = g;
    } else {
      const double g = (1.0 - q.a1 + q.a2) / 4.0;  // unity gain at Nyquist
      q.b0 = g;
      q.b1 = -2.0 * g;
      q.b2 = g;
    }
    sos.push_back(q);
  }
  if (order % 2 == 1) {
    const double s = -warped;  // prototype pole at -1 maps to -warped for both kinds
    const double z = (k + s) / (k - s);
    Biquad q;
    q.a1 = -z;
    if (kind == Kind::kLow) {
      const double g = (1.0 + q.a1) / 2.0;
      q.b0 = g;
      q.b1 = g;
    } else {
      const double g = (1.0 - q.a1) / 2.0;
      q.b0 = g;
      q.b1 = -g;
    }
    sos.push_back(q);
  }
  check_stable(sos, fc);
  return sos;
}

}  // namespace

SosFilter butterworth_lowpass(int order, double cutoff_hz, double sample_rate_hz) {
  return design(Kind::kLow, order, cutoff_hz, sample_rate_hz);
}

SosFilter butterworth_highpass(int order, double cutoff_hz, double sample_rate_hz) {
  return design(Kind::kHigh, order, cutoff_hz, sample_rate_hz);
}

SosFilter butterworth_bandpass(int order, double lo_hz, double hi_hz, double sample_rate_hz) {
  if (!(lo_hz < hi_hz)) throw PreconditionError("butterworth: band edges must satisfy lo < hi");
  SosFilter sos = butterworth_highpass(order, lo_hz, sample_rate_hz);
  const SosFilter lp = butterworth_lowpass(order, hi_hz, sample_rate_hz);
  sos.insert(sos.end(), lp.begin(), lp.end());
  return sos;
}

double magnitude_response(const SosFilter& sos, double freq_hz, double sample_rate_hz) {
  const cplx zinv = std::polar(1.0, -2.0 * std::numbers::pi * freq_hz / sample_rate_hz);
  cplx h = 1.0;
  for (const auto& s : sos) {
    const cplx num = s.b0 + zinv * (s.b1 + zinv * s.b2);
    const cplx den = 1.0 + zinv * (s.a1 + zinv * s.a2);
    h *= num / den;
  }
  return std::abs(h);
}

int filter_order(const SosFilter& sos) {
  int n = 0;
  for (const auto& s : sos) n += (s.a2 != 0.0 || s.b2 != 0.0) ? 2 : 1;
  return n;
}

void sos_filter_inplace(const SosFilter& sos, std::span<double> x, std::span<double> state) {
  for (std::size_t k = 0; k < sos.size(); ++k) {
    const Biquad& s = sos[k];
    double z1 = state[2 * k];
    double z2 = state[2 * k + 1];
    for (double& v : x) {
      const double in = v;
      const double out = s.b0 * in + z1;
      z1 = s.b1 * in - s.a1 * out + z2;
      z2 = s.b2 * in - s.a2 * out;
      v = out;
    }
    state[2 * k] = z1;
    state[2 * k + 1] = z2;
  }
}

std::vector<double> sos_steady_state(const SosFilter& sos) {
  std::vector<double> zi(2 * sos.size());
  double level = 1.0;  // steady input level reaching this section
  for (std::size_t k = 0; k < sos.size(); ++k) {
    const Biquad& s = sos[k];
    const double gain = (s.b0 + s.b1 + s.b2) / (1.0 + s.a1 + s.a2);
    const double y = gain * level;
    const double z2 = s.b2 * level - s.a2 * y;
    const double z1 = s.b1 * level - s.a1 * y + z2;
    zi[2 * k] = z1;
    zi[2 * k + 1] = z2;
    level = y;
  }
  return zi;
}

void sos_filtfilt_inplace(const SosFilter& sos, std::span<double> x, int pad_len) {
  const std::size_t n = x.size();
  if (n == 0) return;
  std::size_t pad = pad_len < 0 ? static_cast<std::size_t>(3 * filter_order(sos)) : static_cast<std::size_t>(pad_len);
  pad = std::min(pad, n - 1);

  std::vector<double> ext(n + 2 * pad);
  for (std::size_t i = 0; i < pad; ++i) ext[i] = 2.0 * x[0] - x[pad - i];
  std::copy(x.begin(), x.end(), ext.begin() + static_cast<std::ptrdiff_t>(pad));
  for (std::size_t i = 0; i < pad; ++i) ext[pad + n + i] = 2.0 * x[n - 1] - x[n - 2 - i];

  const std::vector<double> zi = sos_steady_state(sos);
  std::vector<double> state(zi.size());

  for (std::size_t i = 0; i < zi.size(); ++i) state[i] = zi[i] * ext.front();
  sos_filter_inplace(sos, ext, state);

  std::reverse(ext.begin(), ext.end());
  for (std::size_t i = 0; i < zi.size(); ++i) state[i] = zi[i] * ext.front();
  sos_filter_inplace(sos, ext, state);
  std::reverse(ext.begin(), ext.end());

  std::copy(ext.begin() + static_cast<std::ptrdiff_t>(pad), ext.begin() + static_cast<std::ptrdiff_t>(pad + n),
            x.begin());
}

}  // namespace eegrf
