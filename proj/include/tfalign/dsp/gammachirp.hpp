// Copyright 2026 The tfalign Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include <unsupported/Eigen/FFT>

#include "tfalign/chunk.hpp"
#include "tfalign/errors.hpp"

namespace tfalign::dsp {

// Equivalent rectangular bandwidth (Glasberg & Moore), Hz.
inline double erb_hz(double f) { return 24.7 * (4.37 * f / 1000.0 + 1.0); }

inline double erb_rate(double f) { return 21.4 * std::log10(4.37 * f / 1000.0 + 1.0); }

inline double erb_rate_to_hz(double e) { return (std::pow(10.0, e / 21.4) - 1.0) * 1000.0 / 4.37; }

struct FilterbankSpec {
  std::vector<double> center_freqs;  // Hz, increasing
  // History in samples; the impulse response has impulse_length + 1 taps.
  int impulse_length = 400;
  int fft_size = 2048;
  int order = 4;
  double bandwidth_factor = 1.019;
  // Chirp term of the carrier phase; 0 gives a complex gammatone.
  double chirp = 0.0;

  static FilterbankSpec erb_spaced(int channels, double f_min, double f_max, int impulse_length,
                                   int fft_size) {
    FilterbankSpec s;
    s.impulse_length = impulse_length;
    s.fft_size = fft_size;
    s.center_freqs.resize(static_cast<std::size_t>(std::max(channels, 0)));
    const double lo = erb_rate(f_min);
    const double hi = erb_rate(f_max);
    for (int i = 0; i < channels; ++i) {
      const double t = channels > 1 ? static_cast<double>(i) / (channels - 1) : 0.0;
      s.center_freqs[static_cast<std::size_t>(i)] = erb_rate_to_hz(lo + t * (hi - lo));
    }
    return s;
  }

  int channels() const { return static_cast<int>(center_freqs.size()); }

  void validate(double sample_rate) const {
    if (channels() < 4) throw ConfigError("filterbank needs at least 4 channels");
    if (impulse_length < 1) throw ConfigError("filterbank impulse length must be positive");
    if (impulse_length + 1 >= fft_size) {
      throw ConfigError("filterbank impulse length " + std::to_string(impulse_length) +
                        " does not fit FFT block " + std::to_string(fft_size));
    }
    if ((fft_size & (fft_size - 1)) != 0) throw ConfigError("FFT block size must be a power of two");
    for (std::size_t i = 0; i < center_freqs.size(); ++i) {
      if (!(center_freqs[i] > 0.0) || center_freqs[i] >= sample_rate / 2.0) {
        throw ConfigError("center frequency " + std::to_string(center_freqs[i]) +
                          " Hz outside (0, Nyquist) at " + std::to_string(sample_rate) + " Hz");
      }
      if (i > 0 && center_freqs[i] <= center_freqs[i - 1]) {
        throw ConfigError("center frequencies must increase");
      }
    }
  }
};

// Complex gammachirp impulse response, scaled to unit gain at the center
// frequency.
inline std::vector<std::complex<double>> gammachirp_impulse(double fc, double sample_rate,
                                                            const FilterbankSpec& spec) {
  const std::size_t taps = static_cast<std::size_t>(spec.impulse_length) + 1;
  std::vector<std::complex<double>> h(taps);
  const double b = 2.0 * std::numbers::pi * spec.bandwidth_factor * erb_hz(fc);
  const double w = 2.0 * std::numbers::pi * fc;
  for (std::size_t n = 1; n < taps; ++n) {  // t = 0 is a zero of t^(order-1)
    const double t = static_cast<double>(n) / sample_rate;
    const double env = std::pow(t, spec.order - 1) * std::exp(-b * t);
    const double phase = w * t + spec.chirp * std::log(t);
    h[n] = env * std::complex<double>(std::cos(phase), std::sin(phase));
  }
  std::complex<double> gain = 0.0;
  for (std::size_t n = 0; n < taps; ++n) {
    gain += h[n] * std::polar(1.0, -w * static_cast<double>(n) / sample_rate);
  }
  const double scale = 1.0 / std::abs(gain);
  for (auto& v : h) v *= scale;
  return h;
}

// FFT overlap-and-add filterbank producing |y|^2 per channel. The overlap
// accumulator carries across calls, so chunked input reproduces whole-signal
// filtering; reset clears it.
class OlaFilterbank {
 public:
  OlaFilterbank(FilterbankSpec spec, double sample_rate)
      : spec_(std::move(spec)), sample_rate_(sample_rate) {
    spec_.validate(sample_rate_);
    const auto n = static_cast<std::size_t>(spec_.fft_size);
    taps_ = static_cast<std::size_t>(spec_.impulse_length) + 1;
    hop_ = n - taps_ + 1;
    spectra_.resize(spec_.center_freqs.size());
    overlap_.assign(spec_.center_freqs.size(), std::vector<std::complex<double>>(taps_ - 1));
    std::vector<std::complex<double>> padded(n);
    for (std::size_t k = 0; k < spec_.center_freqs.size(); ++k) {
      const auto h = gammachirp_impulse(spec_.center_freqs[k], sample_rate_, spec_);
      std::fill(padded.begin(), padded.end(), std::complex<double>{});
      std::copy(h.begin(), h.end(), padded.begin());
      fft_.fwd(spectra_[k], padded);
    }
  }

  // Energies for every sample of `x`, warm-up included.
  MatrixD process(std::span<const float> x, bool reset) {
    if (reset) {
      for (auto& o : overlap_) std::fill(o.begin(), o.end(), std::complex<double>{});
    }
    const auto channels = static_cast<Eigen::Index>(spectra_.size());
    MatrixD out(channels, static_cast<Eigen::Index>(x.size()));
    const auto n = static_cast<std::size_t>(spec_.fft_size);
    std::vector<std::complex<double>> block(n), spectrum(n), product(n), y(n);
    for (std::size_t start = 0; start < x.size(); start += hop_) {
      const std::size_t len = std::min(hop_, x.size() - start);
      std::fill(block.begin(), block.end(), std::complex<double>{});
      for (std::size_t i = 0; i < len; ++i) block[i] = x[start + i];
      fft_.fwd(spectrum, block);
      for (std::size_t k = 0; k < spectra_.size(); ++k) {
        for (std::size_t i = 0; i < n; ++i) product[i] = spectrum[i] * spectra_[k][i];
        fft_.inv(y, product);
        auto& acc = overlap_[k];
        // y[0, len + taps - 1) holds this block's contribution.
        for (std::size_t i = 0; i < taps_ - 1; ++i) y[i] += acc[i];
        for (std::size_t i = 0; i < len; ++i) {
          out(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(start + i)) = std::norm(y[i]);
        }
        for (std::size_t i = 0; i < taps_ - 1; ++i) acc[i] = y[len + i];
      }
    }
    return out;
  }

  const FilterbankSpec& spec() const { return spec_; }
  double sample_rate() const { return sample_rate_; }

 private:
  FilterbankSpec spec_;
  double sample_rate_;
  std::size_t taps_ = 0;
  std::size_t hop_ = 0;
  Eigen::FFT<double> fft_;
  std::vector<std::vector<std::complex<double>>> spectra_;
  std::vector<std::vector<std::complex<double>>> overlap_;
};

}  // namespace tfalign::dsp
