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
#include <cstdint>
#include <numbers>
#include <span>
#include <vector>

#include "tfalign/errors.hpp"

namespace tfalign::dsp {

// Windowed-sinc anti-alias low-pass for decimation by `factor`, Blackman
// window, unit DC gain. factor 1 with one tap is the identity.
inline std::vector<double> design_decimation_filter(int factor, int fir_length) {
  if (factor < 1) throw ConfigError("decimation factor must be >= 1");
  if (fir_length < 1 || fir_length % 2 == 0) throw ConfigError("fir_length must be a positive odd number");
  std::vector<double> h(static_cast<std::size_t>(fir_length));
  const double cutoff = 0.5 / factor;  // cycles per input sample
  const double mid = (fir_length - 1) / 2.0;
  double sum = 0.0;
  for (int k = 0; k < fir_length; ++k) {
    const double t = k - mid;
    const double sinc = t == 0.0 ? 2.0 * cutoff
                                 : std::sin(2.0 * std::numbers::pi * cutoff * t) / (std::numbers::pi * t);
    double w = 1.0;
    if (fir_length > 1) {
      const double x = 2.0 * std::numbers::pi * k / (fir_length - 1);
      w = 0.42 - 0.5 * std::cos(x) + 0.08 * std::cos(2.0 * x);
    }
    h[static_cast<std::size_t>(k)] = sinc * w;
    sum += h[static_cast<std::size_t>(k)];
  }
  for (auto& v : h) v /= sum;
  return h;
}

// Output steps of history needed before a decimated sample is valid.
inline std::int64_t decimation_delay(int factor, int fir_length) {
  return (fir_length - 1 + factor - 1) / factor;
}

// Causal FIR followed by keeping every `factor`-th sample. History and
// decimation phase persist across calls, so feeding a signal in pieces gives
// exactly the samples of filtering it whole.
class StreamingDecimator {
 public:
  StreamingDecimator(int factor, int fir_length)
      : factor_(factor), taps_(design_decimation_filter(factor, fir_length)),
        history_(taps_.size() - 1, 0.0) {}

  // Returns every output sample whose position falls inside `x`, including
  // the warm-up samples after a reset.
  std::vector<double> process(std::span<const float> x, bool reset) {
    if (reset) {
      std::fill(history_.begin(), history_.end(), 0.0);
      phase_ = 0;
    }
    const std::size_t hist = history_.size();
    std::vector<double> ext(hist + x.size());
    std::copy(history_.begin(), history_.end(), ext.begin());
    for (std::size_t i = 0; i < x.size(); ++i) ext[hist + i] = x[i];

    std::vector<double> out;
    std::size_t i = phase_;
    for (; i < x.size(); i += static_cast<std::size_t>(factor_)) {
      // ext[hist + i - k] is input sample i - k
      double acc = 0.0;
      for (std::size_t k = 0; k < taps_.size(); ++k) acc += taps_[k] * ext[hist + i - k];
      out.push_back(acc);
    }
    phase_ = i - x.size();
    std::copy(ext.end() - static_cast<std::ptrdiff_t>(hist), ext.end(), history_.begin());
    return out;
  }

  int factor() const { return factor_; }
  const std::vector<double>& taps() const { return taps_; }

 private:
  int factor_;
  std::vector<double> taps_;
  std::vector<double> history_;
  std::size_t phase_ = 0;
};

}  // namespace tfalign::dsp
