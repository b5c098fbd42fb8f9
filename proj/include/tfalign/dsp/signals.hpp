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
#include <random>
#include <vector>

namespace tfalign::dsp {

// Deterministic tone-plus-noise source. Samples are produced strictly in
// order, so the same seed always yields the same signal regardless of how
// the caller slices it into chunks.
class SignalGenerator {
 public:
  struct Spec {
    double sample_rate = 8000.0;
    double tone_hz = 1000.0;
    double tone_amplitude = 0.0;
    double noise_std = 0.0;
    std::uint64_t seed = 1;
  };

  explicit SignalGenerator(Spec spec) : spec_(spec), rng_(spec.seed), normal_(0.0, 1.0) {}

  std::vector<float> next(std::size_t count) {
    std::vector<float> out(count);
    const double w = 2.0 * std::numbers::pi * spec_.tone_hz / spec_.sample_rate;
    for (auto& s : out) {
      double v = spec_.tone_amplitude * std::sin(w * static_cast<double>(index_));
      if (spec_.noise_std > 0.0) v += spec_.noise_std * normal_(rng_);
      s = static_cast<float>(v);
      ++index_;
    }
    return out;
  }

  const Spec& spec() const { return spec_; }

 private:
  Spec spec_;
  std::mt19937_64 rng_;
  std::normal_distribution<double> normal_;
  std::uint64_t index_ = 0;
};

inline std::vector<float> white_noise(std::size_t count, double std_dev, std::uint64_t seed,
                                      double sample_rate = 8000.0) {
  SignalGenerator gen({sample_rate, 0.0, 0.0, std_dev, seed});
  return gen.next(count);
}

inline std::vector<float> tone_plus_noise(std::size_t count, double sample_rate, double tone_hz,
                                          double tone_amplitude, double noise_std,
                                          std::uint64_t seed) {
  SignalGenerator gen({sample_rate, tone_hz, tone_amplitude, noise_std, seed});
  return gen.next(count);
}

}  // namespace tfalign::dsp
