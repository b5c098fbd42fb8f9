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
#include <filesystem>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "tfalign/dsp/gammachirp.hpp"
#include "tfalign/dsp/ptn.hpp"
#include "tfalign/dsp/resampler.hpp"
#include "tfalign/dsp/signals.hpp"
#include "tfalign/dsp/structure.hpp"
#include "tfalign/dsp/wav.hpp"
#include "tfalign/graph.hpp"
#include "tfalign/runtime.hpp"

// Whole-signal evaluation of a pipeline with straightforward kernels: direct
// FIR decimation, direct complex convolution, per-cell structure scores. It
// shares no streaming state or block logic with the processors and serves
// as the comparison baseline for chunked runs.

namespace tfalign::reference {

// One stream over the full timeline at its rate. Columns outside
// [d, length - p) of the cumulative alignment are warm-up or lack
// look-ahead and are not comparable.
struct Stream {
  std::string name;
  double sample_rate = 0.0;
  AlignmentParams cumulative;
  Matrix values;

  Eigen::Index valid_begin() const { return cumulative.dropped_after_discontinuity; }
  Eigen::Index valid_end() const { return values.cols() - cumulative.included_past; }
};

struct Result {
  std::map<std::string, Stream> streams;
  std::map<std::string, dsp::SigmoidParams> sigmoids;  // by processor name
  std::map<std::string, double> relative_tonal_energy;
};

inline std::vector<double> decimate(const std::vector<double>& x, int factor, int fir_length) {
  const auto h = dsp::design_decimation_filter(factor, fir_length);
  const auto n = static_cast<std::int64_t>(x.size());
  std::vector<double> y;
  for (std::int64_t m = 0; m * factor < n; ++m) {
    double acc = 0.0;
    for (std::int64_t k = 0; k < static_cast<std::int64_t>(h.size()); ++k) {
      const std::int64_t i = m * factor - k;
      if (i >= 0) acc += h[static_cast<std::size_t>(k)] * x[static_cast<std::size_t>(i)];
    }
    y.push_back(acc);
  }
  return y;
}

inline MatrixD filterbank_energy(const std::vector<double>& x, const dsp::FilterbankSpec& spec, double rate) {
  const auto n = static_cast<Eigen::Index>(x.size());
  MatrixD e(spec.channels(), n);
  for (int ch = 0; ch < spec.channels(); ++ch) {
    const auto h = dsp::gammachirp_impulse(spec.center_freqs[static_cast<std::size_t>(ch)], rate, spec);
    for (Eigen::Index t = 0; t < n; ++t) {
      std::complex<double> acc = 0.0;
      const Eigen::Index kmax = std::min<Eigen::Index>(static_cast<Eigen::Index>(h.size()) - 1, t);
      for (Eigen::Index k = 0; k <= kmax; ++k) acc += h[static_cast<std::size_t>(k)] * x[static_cast<std::size_t>(t - k)];
      e(ch, t) = std::norm(acc);
    }
  }
  return e;
}

// Score of one cell from its neighbourhood.
inline double tract_score(const MatrixD& x, Eigen::Index row, Eigen::Index col, const dsp::StructureSpec& spec) {
  const Eigen::Index wt = spec.time_half_width;
  const Eigen::Index ws = spec.scale_half_width;
  double num = 0.0;
  double den = 0.0;
  if (spec.direction == dsp::TractDirection::horizontal) {
    for (Eigen::Index r = row - ws; r <= row + ws; ++r) {
      for (Eigen::Index tau = 0; tau <= wt; ++tau) {
        const double a = x(r, col - wt + tau);
        const double b = x(r, col + tau);
        num += a * b;
        den += a * a + b * b;
      }
    }
  } else {
    for (Eigen::Index sigma = 0; sigma <= ws; ++sigma) {
      for (Eigen::Index c = col - wt; c <= col + wt; ++c) {
        const double a = x(row - ws + sigma, c);
        const double b = x(row + sigma, c);
        num += a * b;
        den += a * a + b * b;
      }
    }
  }
  return den == 0.0 ? 0.0 : 2.0 * num / den;
}

inline MatrixD structure_scores(const MatrixD& x, const dsp::StructureSpec& spec) {
  const Eigen::Index wt = spec.time_half_width;
  const Eigen::Index ws = spec.scale_half_width;
  MatrixD out = MatrixD::Constant(x.rows(), x.cols(), std::numeric_limits<double>::quiet_NaN());
  for (Eigen::Index r = ws; r < x.rows() - ws; ++r) {
    for (Eigen::Index c = wt; c + wt < x.cols(); ++c) out(r, c) = tract_score(x, r, c, spec);
  }
  return out;
}

namespace detail {

inline Matrix to_float(const MatrixD& m) { return m.cast<Sample>(); }

inline std::vector<double> row_to_vector(const Matrix& m) {
  std::vector<double> v(static_cast<std::size_t>(m.cols()));
  for (Eigen::Index i = 0; i < m.cols(); ++i) v[static_cast<std::size_t>(i)] = m(0, i);
  return v;
}

inline std::optional<Sample> fill_of(const Params& params) {
  const std::string fill = params.get_string("invalid_fill", "nan");
  if (fill == "zero") return Sample{0};
  return std::nullopt;
}

inline dsp::SigmoidParams sigmoid_from(const Stream& tract, double k) {
  const auto [lo, hi] = valid_rows(tract.cumulative, tract.values.rows());
  const Eigen::Index c0 = tract.valid_begin();
  const Eigen::Index c1 = tract.valid_end();
  return dsp::calibrate_from_scores(tract.values.block(lo, c0, hi - lo, c1 - c0), k);
}

// Evaluates every non-input processor on `signal`. With `calibrating` set,
// tonal energy is skipped and structure nodes record their sigmoid fits.
inline std::map<std::string, Stream> evaluate(const PipelinePlan& plan, const std::vector<float>& signal,
                                              bool calibrating, Result& result) {
  std::map<std::string, Stream> streams;
  const PlannedNode& input = plan.nodes[plan.input_node];
  {
    const PlannedFeature& f = input.features.front();
    Stream s;
    s.name = input.spec.name + "." + f.spec.name;
    s.sample_rate = f.spec.info.sample_rate;
    s.values = Eigen::Map<const Matrix>(signal.data(), 1, static_cast<Eigen::Index>(signal.size()));
    streams[s.name] = std::move(s);
  }
  for (const auto& node : plan.nodes) {
    if (node.is_input) continue;
    std::vector<const Stream*> ins;
    for (std::size_t e : node.in_edges) ins.push_back(&streams.at(plan.edges[e].key.str()));
    const Params& params = node.spec.params;
    const PlannedFeature& out = node.features.front();
    Stream s;
    s.name = node.spec.name + "." + out.spec.name;
    s.sample_rate = out.spec.info.sample_rate;
    s.cumulative = out.cumulative;

    if (node.spec.kind == "resampler") {
      const auto y = decimate(row_to_vector(ins.front()->values), static_cast<int>(params.get_int("factor")),
                              static_cast<int>(params.get_int("fir_length", 31)));
      MatrixD m(1, static_cast<Eigen::Index>(y.size()));
      for (std::size_t i = 0; i < y.size(); ++i) m(0, static_cast<Eigen::Index>(i)) = y[i];
      s.values = to_float(m);
    } else if (node.spec.kind == "gammachirp") {
      dsp::FilterbankSpec spec;
      spec.center_freqs = out.spec.info.channel_freqs;
      spec.impulse_length = static_cast<int>(out.spec.alignment.dropped_after_discontinuity);
      spec.fft_size = static_cast<int>(params.get_int("fft_size", 2048));
      spec.order = static_cast<int>(params.get_int("order", 4));
      spec.bandwidth_factor = params.get_double("bandwidth_factor", 1.019);
      spec.chirp = params.get_double("chirp", 0.0);
      s.values = to_float(filterbank_energy(row_to_vector(ins.front()->values), spec, s.sample_rate));
    } else if (node.spec.kind == "structure") {
      dsp::StructureSpec spec;
      spec.time_half_width = static_cast<int>(params.get_int("w_t", 40));
      spec.scale_half_width = static_cast<int>(params.get_int("w_s", 3));
      spec.direction = dsp::tract_direction_from_string(params.get_string("direction", "horizontal"));
      s.values = to_float(structure_scores(ins.front()->values.cast<double>(), spec));
      if (calibrating) result.sigmoids[node.spec.name] = sigmoid_from(s, params.get_double("calibration_k", 2.0));
      if (auto fill = fill_of(params)) fill_invalid_rows(s.values, s.cumulative, *fill);
    } else if (node.spec.kind == "ptn") {
      const std::string tract_name = params.get_string("tract", "T");
      const Stream* energy = nullptr;
      const Stream* tract = nullptr;
      for (const Stream* in : ins) {
        (in->name.substr(in->name.find('.') + 1) == tract_name ? tract : energy) = in;
      }
      if (calibrating) {
        if (!params.has("theta")) {
          result.sigmoids[node.spec.name] = sigmoid_from(*tract, params.get_double("calibration_k", 2.0));
        }
        continue;
      }
      dsp::SigmoidParams sigmoid;
      if (params.has("theta")) {
        sigmoid = {params.get_double("theta"), params.get_double("beta")};
      } else {
        sigmoid = result.sigmoids.at(node.spec.name);
      }
      const auto [lo, hi] = valid_rows(node.merged, tract->values.rows());
      const auto fill = fill_of(params);
      Matrix et(energy->values.rows(), energy->values.cols());
      double sum_e = 0.0;
      double sum_et = 0.0;
      const Eigen::Index c0 = node.merged.dropped_after_discontinuity;
      const Eigen::Index c1 = energy->values.cols() - node.merged.included_past;
      for (Eigen::Index r = 0; r < et.rows(); ++r) {
        for (Eigen::Index c = 0; c < et.cols(); ++c) {
          const double t = tract->values(r, c);
          if (r < lo || r >= hi || !std::isfinite(t)) {
            et(r, c) = fill.value_or(std::numeric_limits<Sample>::quiet_NaN());
            continue;
          }
          const double e = energy->values(r, c);
          const double w = 1.0 / (1.0 + std::exp(-(t - sigmoid.theta) / sigmoid.beta));
          et(r, c) = static_cast<Sample>(e * w);
          if (c >= c0 && c < c1 && std::isfinite(e) && std::isfinite(et(r, c))) {
            sum_e += e;
            sum_et += et(r, c);
          }
        }
      }
      s.values = std::move(et);
      result.relative_tonal_energy[node.spec.name] = sum_e > 0.0 ? sum_et / sum_e : 0.0;
    } else {
      throw UnknownProcessorKindError("no reference implementation for kind '" + node.spec.kind + "'");
    }
    streams[s.name] = std::move(s);
  }
  return streams;
}

}  // namespace detail

// The input signal a run would see, for WAV or synthetic microphone input.
inline std::vector<float> input_signal(const PipelinePlan& plan, const std::optional<std::filesystem::path>& wav,
                                       std::uint64_t seed) {
  const PlannedNode& node = plan.nodes[plan.input_node];
  if (node.spec.kind == "wav_reader") {
    const auto path = wav ? *wav : std::filesystem::path(node.spec.params.get_string("path"));
    return dsp::read_wav(path).samples;
  }
  if (node.spec.kind == "mic_input" && node.spec.params.get_string("mode", "synthetic") == "synthetic") {
    const Params& p = node.spec.params;
    dsp::SignalGenerator gen({p.get_double("sample_rate", 8000.0), p.get_double("tone_hz", 1000.0),
                              p.get_double("tone_amplitude", 0.5), p.get_double("noise_std", 0.05),
                              input_seed(seed)});
    return gen.next(static_cast<std::size_t>(p.get_int("chunks", 8) * p.get_int("chunk_size")));
  }
  throw ConfigError("no reference input for processor " + node.spec.name);
}

inline Result run(const PipelinePlan& plan, const std::vector<float>& signal, std::uint64_t seed) {
  Result result;
  const auto& cal = plan.config.calibration;
  if (cal.enabled) {
    const auto noise = dsp::white_noise(static_cast<std::size_t>(cal.samples), cal.noise_std,
                                        calibration_seed(seed), plan.input_rate);
    detail::evaluate(plan, noise, true, result);
  }
  result.streams = detail::evaluate(plan, signal, false, result);
  return result;
}

struct Comparison {
  std::string stream;
  std::int64_t expected_columns = 0;
  std::int64_t actual_columns = 0;
  std::uint64_t compared = 0;
  std::uint64_t nan_mismatches = 0;
  std::uint64_t out_of_tolerance = 0;
  double max_relative_error = 0.0;

  bool ok() const {
    return expected_columns == actual_columns && nan_mismatches == 0 && out_of_tolerance == 0;
  }
};

// Compares the concatenated chunked output with the valid region of the
// reference stream, cell by cell: |a - b| <= rtol |b|, NaN where NaN.
inline Comparison compare(const Matrix& chunked, const Stream& ref, double rtol) {
  Comparison c;
  c.stream = ref.name;
  c.expected_columns = ref.valid_end() - ref.valid_begin();
  c.actual_columns = chunked.cols();
  if (c.expected_columns != c.actual_columns || chunked.rows() != ref.values.rows()) return c;
  for (Eigen::Index r = 0; r < chunked.rows(); ++r) {
    for (Eigen::Index j = 0; j < chunked.cols(); ++j) {
      const double a = chunked(r, j);
      const double b = ref.values(r, ref.valid_begin() + j);
      if (std::isnan(a) || std::isnan(b)) {
        if (std::isnan(a) != std::isnan(b)) ++c.nan_mismatches;
        continue;
      }
      ++c.compared;
      const double err = std::abs(a - b);
      const double rel = b == 0.0 ? (err == 0.0 ? 0.0 : std::numeric_limits<double>::infinity()) : err / std::abs(b);
      c.max_relative_error = std::max(c.max_relative_error, rel);
      if (err > rtol * std::abs(b)) ++c.out_of_tolerance;
    }
  }
  return c;
}

}  // namespace tfalign::reference
