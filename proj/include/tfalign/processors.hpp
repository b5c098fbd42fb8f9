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
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "tfalign/chunk.hpp"
#include "tfalign/config.hpp"
#include "tfalign/dsp/gammachirp.hpp"
#include "tfalign/dsp/ptn.hpp"
#include "tfalign/dsp/resampler.hpp"
#include "tfalign/dsp/signals.hpp"
#include "tfalign/dsp/structure.hpp"
#include "tfalign/dsp/wav.hpp"
#include "tfalign/merge.hpp"

namespace tfalign {

// Shape and timing of one published stream.
struct StreamInfo {
  bool series = false;
  Eigen::Index channels = 1;
  double sample_rate = 0.0;
  std::vector<double> channel_freqs;
};

// A produced feature with its relative alignment.
struct FeatureSpec {
  std::string name;
  AlignmentParams alignment;
  StreamInfo info;
};

// What a processor sees of one of its inputs at configuration time.
struct InputBinding {
  SourceKey key;
  StreamInfo info;
  AlignmentParams cumulative;
};

struct ProcessorContext {
  std::string name;
  std::optional<std::filesystem::path> output_dir;
};

class Processor {
 public:
  virtual ~Processor() = default;

  // Checks the inputs and declares the produced features in publish order.
  virtual std::vector<FeatureSpec> describe(const std::vector<InputBinding>& inputs) = 0;

  // One payload per declared feature, or none to publish nothing.
  virtual std::vector<Payload> process(const MergedChunk& merged) = 0;

  virtual void finish() {}
  virtual nlohmann::json report() const { return nlohmann::json::object(); }

  // True when the processor cannot run without a calibration chunk.
  virtual bool needs_calibration() const { return false; }
};

struct InputStats {
  std::uint64_t produced = 0;   // chunks acquired, including lost ones
  std::uint64_t published = 0;
  std::uint64_t overflowed = 0;
};

struct InputContext {
  std::string name;
  std::optional<std::filesystem::path> input_path;
  std::uint64_t seed = 1;
  std::uint64_t first_number = 0;
  std::set<std::uint64_t> overflows;
};

// A chunk source opened for one run. Invalid chunks never leave it.
class InputSource {
 public:
  virtual ~InputSource() = default;
  virtual std::optional<DataChunk> next() = 0;
  virtual InputStats stats() const = 0;
};

class InputProcessor {
 public:
  virtual ~InputProcessor() = default;
  virtual FeatureSpec describe() const = 0;
  virtual std::int64_t chunk_size() const = 0;
  virtual std::unique_ptr<InputSource> open(const InputContext& ctx) const = 0;
};

namespace detail {

inline const MergedInput& single_input(const MergedChunk& merged, const char* kind) {
  if (merged.inputs.size() != 1) {
    throw ProtocolError(std::string(kind) + " expects exactly one input");
  }
  return merged.inputs.begin()->second;
}

inline void expect_inputs(const std::vector<InputBinding>& inputs, std::size_t n, const std::string& who) {
  if (inputs.size() != n) {
    throw ConfigError(who + " needs " + std::to_string(n) + " input(s), has " +
                      std::to_string(inputs.size()));
  }
}

inline std::optional<Sample> parse_fill(const Params& params) {
  const std::string fill = params.get_string("invalid_fill", "nan");
  if (fill == "nan") return std::nullopt;
  if (fill == "zero") return Sample{0};
  throw ConfigError("invalid_fill must be nan or zero, got '" + fill + "'");
}

inline Matrix to_row(const std::vector<double>& v, std::size_t skip) {
  const auto n = static_cast<Eigen::Index>(v.size() - std::min(skip, v.size()));
  Matrix m(1, n);
  for (Eigen::Index i = 0; i < n; ++i) m(0, i) = static_cast<Sample>(v[skip + static_cast<std::size_t>(i)]);
  return m;
}

}  // namespace detail

// Anti-alias FIR and integer decimation of a time series.
class ResamplerProcessor final : public Processor {
 public:
  explicit ResamplerProcessor(const ProcessorSpec& spec)
      : name_(spec.name),
        feature_(spec.params.get_string("feature", "audio")),
        factor_(static_cast<int>(spec.params.get_int("factor"))),
        fir_length_(static_cast<int>(spec.params.get_int("fir_length", 31))),
        decimator_(factor_, fir_length_),
        delay_(dsp::decimation_delay(factor_, fir_length_)) {}

  std::vector<FeatureSpec> describe(const std::vector<InputBinding>& inputs) override {
    detail::expect_inputs(inputs, 1, name_);
    const InputBinding& in = inputs.front();
    if (!in.info.series) throw ConfigError(name_ + " resamples time series only");
    if (in.cumulative != AlignmentParams{}) {
      throw ConfigError(name_ + " must sit before any processor that drops time steps");
    }
    const double ratio = in.info.sample_rate / factor_;
    if (ratio != std::floor(ratio)) {
      throw NonIntegerRateError(name_ + ": " + std::to_string(in.info.sample_rate) +
                                " Hz is not divisible by " + std::to_string(factor_));
    }
    FeatureSpec out;
    out.name = feature_;
    out.alignment = {0, delay_, 0, 0};
    out.info = in.info;
    out.info.sample_rate = ratio;
    return {out};
  }

  std::vector<Payload> process(const MergedChunk& merged) override {
    const MergedInput& in = detail::single_input(merged, "resampler");
    const bool reset = is_discontinuous_subtype(merged.continuity);
    const auto& v = in.payload.values;
    const auto y = decimator_.process(std::span<const float>(v.data(), static_cast<std::size_t>(v.cols())), reset);
    Payload p;
    p.series = true;
    p.values = detail::to_row(y, reset ? static_cast<std::size_t>(delay_) : 0);
    return {p};
  }

 private:
  std::string name_;
  std::string feature_;
  int factor_;
  int fir_length_;
  dsp::StreamingDecimator decimator_;
  std::int64_t delay_;
};

// Overlap-and-add gammachirp filterbank producing the energy E(t, f).
class GammachirpProcessor final : public Processor {
 public:
  explicit GammachirpProcessor(const ProcessorSpec& spec) : name_(spec.name), params_(spec.params) {
    feature_ = params_.get_string("feature", "E");
  }

  std::vector<FeatureSpec> describe(const std::vector<InputBinding>& inputs) override {
    detail::expect_inputs(inputs, 1, name_);
    const InputBinding& in = inputs.front();
    if (!in.info.series) throw ConfigError(name_ + " filters time series only");
    rate_ = in.info.sample_rate;
    if (params_.has("sample_rate") && params_.get_double("sample_rate") != rate_) {
      throw SpecMismatchError(name_ + " is designed for " + params_.get_string("sample_rate") +
                              " Hz but receives " + std::to_string(rate_) + " Hz");
    }
    const auto impulse = static_cast<int>(std::lround(params_.get_double("impulse_ms", 100.0) * rate_ / 1000.0));
    auto spec = dsp::FilterbankSpec::erb_spaced(
        static_cast<int>(params_.get_int("channels", 64)), params_.get_double("f_min", 100.0),
        params_.get_double("f_max", 1800.0), impulse,
        static_cast<int>(params_.get_int("fft_size", 2048)));
    spec.order = static_cast<int>(params_.get_int("order", 4));
    spec.bandwidth_factor = params_.get_double("bandwidth_factor", 1.019);
    spec.chirp = params_.get_double("chirp", 0.0);
    bank_.emplace(spec, rate_);

    FeatureSpec out;
    out.name = feature_;
    out.alignment = {0, spec.impulse_length, 0, 0};
    out.info.series = false;
    out.info.channels = spec.channels();
    out.info.sample_rate = rate_;
    out.info.channel_freqs = spec.center_freqs;
    return {out};
  }

  std::vector<Payload> process(const MergedChunk& merged) override {
    const MergedInput& in = detail::single_input(merged, "gammachirp");
    if (in.sample_rate != rate_) {
      throw SpecMismatchError(name_ + " received " + std::to_string(in.sample_rate) +
                              " Hz, configured for " + std::to_string(rate_) + " Hz");
    }
    const bool reset = is_discontinuous_subtype(merged.continuity);
    const auto& v = in.payload.values;
    const MatrixD e = bank_->process(std::span<const float>(v.data(), static_cast<std::size_t>(v.cols())), reset);
    const Eigen::Index skip = reset ? std::min<Eigen::Index>(bank_->spec().impulse_length, e.cols()) : 0;
    Payload p;
    p.values = e.rightCols(e.cols() - skip).cast<Sample>();
    return {p};
  }

 private:
  std::string name_;
  Params params_;
  std::string feature_;
  double rate_ = 0.0;
  std::optional<dsp::OlaFilterbank> bank_;
};

// Tract feature T: windowed self-similarity of the cochleogram.
class StructureProcessor final : public Processor {
 public:
  explicit StructureProcessor(const ProcessorSpec& spec)
      : name_(spec.name),
        feature_(spec.params.get_string("feature", "T")),
        k_(spec.params.get_double("calibration_k", 2.0)),
        fill_(detail::parse_fill(spec.params)),
        extractor_(make_spec(spec.params)) {}

  std::vector<FeatureSpec> describe(const std::vector<InputBinding>& inputs) override {
    detail::expect_inputs(inputs, 1, name_);
    const InputBinding& in = inputs.front();
    if (in.info.series) throw ConfigError(name_ + " needs a time-frequency input");
    if (in.info.channels < extractor_.spec().min_channels()) {
      throw TooFewChannelsError(name_ + " needs at least " +
                                std::to_string(extractor_.spec().min_channels()) + " channels, input has " +
                                std::to_string(in.info.channels));
    }
    FeatureSpec out;
    out.name = feature_;
    out.alignment = extractor_.spec().feature_alignment();
    out.info = in.info;
    return {out};
  }

  std::vector<Payload> process(const MergedChunk& merged) override {
    const MergedInput& in = detail::single_input(merged, "structure");
    const bool reset = is_discontinuous_subtype(merged.continuity);
    Payload p;
    p.values = extractor_.process(in.payload.values, reset).cast<Sample>();
    const AlignmentParams out_alignment = compose(merged.alignment, extractor_.spec().feature_alignment());
    if (merged.continuity == Continuity::calibration_chunk) {
      const auto [lo, hi] = valid_rows(out_alignment, p.values.rows());
      sigmoid_ = dsp::calibrate_from_scores(p.values.middleRows(lo, hi - lo), k_);
    }
    if (fill_) fill_invalid_rows(p.values, out_alignment, *fill_);
    return {p};
  }

  nlohmann::json report() const override {
    nlohmann::json j = nlohmann::json::object();
    if (sigmoid_) j["calibration"] = {{"theta", sigmoid_->theta}, {"beta", sigmoid_->beta}, {"k", k_}};
    return j;
  }

  const std::optional<dsp::SigmoidParams>& calibration() const { return sigmoid_; }

 private:
  static dsp::StructureSpec make_spec(const Params& params) {
    dsp::StructureSpec s;
    s.time_half_width = static_cast<int>(params.get_int("w_t", 40));
    s.scale_half_width = static_cast<int>(params.get_int("w_s", 3));
    s.direction = dsp::tract_direction_from_string(params.get_string("direction", "horizontal"));
    return s;
  }

  std::string name_;
  std::string feature_;
  double k_;
  std::optional<Sample> fill_;
  dsp::StreamingTractExtractor extractor_;
  std::optional<dsp::SigmoidParams> sigmoid_;
};

// Tonal energy E_T = E logistic((T - theta) / beta) with streaming areal
// averages written to CSV.
class PtnProcessor final : public Processor {
 public:
  PtnProcessor(const ProcessorSpec& spec, ProcessorContext ctx)
      : name_(spec.name),
        ctx_(std::move(ctx)),
        feature_(spec.params.get_string("feature", "ET")),
        energy_name_(spec.params.get_string("energy", "E")),
        tract_name_(spec.params.get_string("tract", "T")),
        k_(spec.params.get_double("calibration_k", 2.0)),
        fill_(detail::parse_fill(spec.params)),
        averager_(static_cast<int>(spec.params.get_int("block_t", 100)),
                  static_cast<int>(spec.params.get_int("block_f", 8))) {
    const bool theta = spec.params.has("theta");
    const bool beta = spec.params.has("beta");
    if (theta != beta) throw ConfigError(name_ + ": theta and beta must be configured together");
    if (theta) {
      sigmoid_ = dsp::SigmoidParams{spec.params.get_double("theta"), spec.params.get_double("beta")};
      if (!(sigmoid_->beta > 0.0)) throw ConfigError(name_ + ": beta must be positive");
      configured_ = true;
    }
  }

  std::vector<FeatureSpec> describe(const std::vector<InputBinding>& inputs) override {
    detail::expect_inputs(inputs, 2, name_);
    const InputBinding* energy = nullptr;
    const InputBinding* tract = nullptr;
    for (const auto& in : inputs) {
      if (in.key.representation == tract_name_) {
        tract = &in;
      } else if (in.key.representation == energy_name_) {
        energy = &in;
      }
    }
    if (!energy || !tract) {
      throw ConfigError(name_ + " needs inputs named " + energy_name_ + " and " + tract_name_);
    }
    if (energy->info.channels != tract->info.channels ||
        energy->info.sample_rate != tract->info.sample_rate) {
      throw ConfigError(name_ + ": energy and tract inputs differ in shape or rate");
    }
    energy_key_ = energy->key;
    tract_key_ = tract->key;
    freqs_ = energy->info.channel_freqs;
    FeatureSpec out;
    out.name = feature_;
    out.alignment = {};
    out.info = energy->info;
    return {out};
  }

  bool needs_calibration() const override { return !configured_; }

  std::vector<Payload> process(const MergedChunk& merged) override {
    const auto e_it = merged.inputs.find(energy_key_);
    const auto t_it = merged.inputs.find(tract_key_);
    if (e_it == merged.inputs.end() || t_it == merged.inputs.end()) {
      throw ProtocolError(name_ + " received a merged chunk without its inputs");
    }
    const Matrix& energy = e_it->second.payload.values;
    const Matrix& tract = t_it->second.payload.values;
    const auto [lo, hi] = valid_rows(merged.alignment, tract.rows());

    if (merged.continuity == Continuity::calibration_chunk) {
      if (!configured_) sigmoid_ = dsp::calibrate_from_scores(tract.middleRows(lo, hi - lo), k_);
      return {};
    }
    if (!sigmoid_) {
      throw ConfigError(name_ + " has no sigmoid parameters: configure theta and beta or send a calibration chunk first");
    }

    Matrix masked = tract;
    if (lo > 0) masked.topRows(lo).setConstant(std::numeric_limits<Sample>::quiet_NaN());
    if (hi < masked.rows()) masked.bottomRows(masked.rows() - hi).setConstant(std::numeric_limits<Sample>::quiet_NaN());
    Payload p;
    p.values = dsp::tonal_energy(energy, masked, *sigmoid_, fill_);

    for (Eigen::Index r = lo; r < hi; ++r) {
      for (Eigen::Index c = 0; c < energy.cols(); ++c) {
        const double e = energy(r, c);
        const double et = p.values(r, c);
        if (std::isfinite(e) && std::isfinite(et)) {
          sum_energy_ += e;
          sum_tonal_ += et;
        }
      }
    }
    // The averager sees NaN on invalid rows regardless of the fill option.
    const Matrix tonal_for_blocks =
        fill_ ? dsp::tonal_energy(energy, masked, *sigmoid_) : p.values;
    write_blocks(averager_.push(energy, tonal_for_blocks, merged.number,
                                is_discontinuous_subtype(merged.continuity)));
    return {p};
  }

  void finish() override {
    write_blocks(averager_.flush());
    if (csv_) csv_->flush();
  }

  nlohmann::json report() const override {
    nlohmann::json j = nlohmann::json::object();
    if (sigmoid_) {
      j["sigmoid"] = {{"theta", sigmoid_->theta},
                      {"beta", sigmoid_->beta},
                      {"source", configured_ ? "config" : "calibration"}};
    }
    j["sum_energy"] = sum_energy_;
    j["sum_tonal_energy"] = sum_tonal_;
    j["relative_tonal_energy"] = sum_energy_ > 0.0 ? sum_tonal_ / sum_energy_ : 0.0;
    j["blocks"] = blocks_;
    return j;
  }

  double relative_tonal_energy() const { return sum_energy_ > 0.0 ? sum_tonal_ / sum_energy_ : 0.0; }
  const std::optional<dsp::SigmoidParams>& sigmoid() const { return sigmoid_; }

 private:
  void write_blocks(const std::vector<dsp::BlockRecord>& records) {
    blocks_ += records.size();
    if (!ctx_.output_dir || records.empty()) return;
    if (!csv_) {
      const auto path = *ctx_.output_dir / (name_ + ".blocks.csv");
      csv_.emplace(path);
      if (!*csv_) throw IoError("cannot create " + path.string());
      *csv_ << "segment,column,columns,row_lo,row_hi,f_lo_hz,f_hi_hz,valid,mean_e,mean_et,mean_residual\n";
    }
    char line[512];
    for (const auto& r : records) {
      const double f_lo = freqs_.empty() ? 0.0 : freqs_[static_cast<std::size_t>(r.row_lo)];
      const double f_hi = freqs_.empty() ? 0.0 : freqs_[static_cast<std::size_t>(r.row_hi - 1)];
      std::snprintf(line, sizeof line, "%llu,%lld,%lld,%lld,%lld,%.6f,%.6f,%llu,%.9g,%.9g,%.9g\n",
                    static_cast<unsigned long long>(r.segment), static_cast<long long>(r.column),
                    static_cast<long long>(r.columns), static_cast<long long>(r.row_lo),
                    static_cast<long long>(r.row_hi), f_lo, f_hi,
                    static_cast<unsigned long long>(r.valid), r.mean_energy, r.mean_tonal,
                    r.mean_energy - r.mean_tonal);
      *csv_ << line;
    }
  }

  std::string name_;
  ProcessorContext ctx_;
  std::string feature_;
  std::string energy_name_;
  std::string tract_name_;
  double k_;
  std::optional<Sample> fill_;
  dsp::ArealAverager averager_;
  std::optional<dsp::SigmoidParams> sigmoid_;
  bool configured_ = false;
  SourceKey energy_key_;
  SourceKey tract_key_;
  std::vector<double> freqs_;
  double sum_energy_ = 0.0;
  double sum_tonal_ = 0.0;
  std::uint64_t blocks_ = 0;
  std::optional<std::ofstream> csv_;
};

// Splits a signal into fixed-size chunks; the remainder joins the last one.
inline std::vector<DataChunk> split_into_chunks(const std::vector<float>& samples, std::int64_t chunk_size,
                                                double sample_rate, const SourceKey& key,
                                                std::uint64_t first_number = 0) {
  if (chunk_size < 1) throw ConfigError("chunk_size must be positive");
  std::vector<DataChunk> out;
  const auto total = static_cast<std::int64_t>(samples.size());
  const std::int64_t count = total / chunk_size == 0 ? (total > 0 ? 1 : 0) : total / chunk_size;
  for (std::int64_t i = 0; i < count; ++i) {
    const std::int64_t begin = i * chunk_size;
    const std::int64_t end = i + 1 == count ? total : begin + chunk_size;
    DataChunk c;
    c.number = first_number + static_cast<std::uint64_t>(i);
    c.source = key;
    c.sample_rate = sample_rate;
    c.payload.series = true;
    c.payload.values.resize(1, end - begin);
    for (std::int64_t j = begin; j < end; ++j) c.payload.values(0, j - begin) = samples[static_cast<std::size_t>(j)];
    if (i == 0) {
      c.continuity = Continuity::newfile;
    } else if (i + 1 == count) {
      c.continuity = Continuity::last;
    } else {
      c.continuity = Continuity::with_previous;
    }
    out.push_back(std::move(c));
  }
  return out;
}

inline std::vector<DataChunk> read_wav_chunks(const std::filesystem::path& path, std::int64_t chunk_size,
                                              const SourceKey& key, std::uint64_t first_number = 0) {
  const dsp::WavData wav = dsp::read_wav(path);
  return split_into_chunks(wav.samples, chunk_size, wav.sample_rate, key, first_number);
}

class WavReaderInput final : public InputProcessor {
 public:
  explicit WavReaderInput(const ProcessorSpec& spec)
      : name_(spec.name),
        feature_(spec.params.get_string("feature", "audio")),
        chunk_size_(spec.params.get_int("chunk_size")),
        rate_(spec.params.get_double("sample_rate")) {
    if (chunk_size_ < 1) throw ConfigError(name_ + ": chunk_size must be positive");
    if (!(rate_ > 0.0)) throw ConfigError(name_ + ": sample_rate must be positive");
    if (spec.params.has("path")) path_ = spec.params.get_string("path");
  }

  FeatureSpec describe() const override {
    FeatureSpec f;
    f.name = feature_;
    f.info.series = true;
    f.info.sample_rate = rate_;
    return f;
  }

  std::int64_t chunk_size() const override { return chunk_size_; }

  std::unique_ptr<InputSource> open(const InputContext& ctx) const override {
    const auto path = ctx.input_path ? ctx.input_path : path_;
    if (!path) throw ConfigError(name_ + " needs an input WAV file");
    const dsp::WavData wav = dsp::read_wav(*path);
    if (wav.sample_rate != rate_) {
      throw SpecMismatchError(path->string() + " has " + std::to_string(wav.sample_rate) +
                              " Hz, pipeline expects " + std::to_string(rate_) + " Hz");
    }
    auto chunks = split_into_chunks(wav.samples, chunk_size_, rate_, {name_, feature_}, ctx.first_number);
    return std::make_unique<Source>(std::move(chunks));
  }

 private:
  class Source final : public InputSource {
   public:
    explicit Source(std::vector<DataChunk> chunks) : chunks_(std::move(chunks)) {}
    std::optional<DataChunk> next() override {
      if (pos_ == chunks_.size()) return std::nullopt;
      ++stats_.produced;
      ++stats_.published;
      return std::move(chunks_[pos_++]);
    }
    InputStats stats() const override { return stats_; }

   private:
    std::vector<DataChunk> chunks_;
    std::size_t pos_ = 0;
    InputStats stats_;
  };

  std::string name_;
  std::string feature_;
  std::int64_t chunk_size_;
  double rate_;
  std::optional<std::filesystem::path> path_;
};

// Microphone input. Synthetic mode produces a seeded tone plus noise and
// simulates buffer overflows; live mode reads signed 16-bit little-endian
// PCM from a device path. An overflowed chunk stays here and the next
// successful chunk is published as discontinuous.
class MicInput final : public InputProcessor {
 public:
  explicit MicInput(const ProcessorSpec& spec)
      : name_(spec.name),
        feature_(spec.params.get_string("feature", "audio")),
        mode_(spec.params.get_string("mode", "synthetic")),
        chunk_size_(spec.params.get_int("chunk_size")),
        chunks_(spec.params.get_int("chunks", 8)),
        rate_(spec.params.get_double("sample_rate", 8000.0)),
        tone_hz_(spec.params.get_double("tone_hz", 1000.0)),
        tone_amplitude_(spec.params.get_double("tone_amplitude", 0.5)),
        noise_std_(spec.params.get_double("noise_std", 0.05)),
        device_(spec.params.get_string("device", "")) {
    if (mode_ != "synthetic" && mode_ != "live") {
      throw ConfigError(name_ + ": mode must be synthetic or live");
    }
    if (chunk_size_ < 1 || chunks_ < 0) throw ConfigError(name_ + ": chunk_size and chunks must be positive");
    if (!(rate_ > 0.0)) throw ConfigError(name_ + ": sample_rate must be positive");
  }

  FeatureSpec describe() const override {
    FeatureSpec f;
    f.name = feature_;
    f.info.series = true;
    f.info.sample_rate = rate_;
    return f;
  }

  std::int64_t chunk_size() const override { return chunk_size_; }

  std::unique_ptr<InputSource> open(const InputContext& ctx) const override {
    std::function<std::optional<std::vector<float>>()> acquire;
    if (mode_ == "synthetic") {
      auto gen = std::make_shared<dsp::SignalGenerator>(
          dsp::SignalGenerator::Spec{rate_, tone_hz_, tone_amplitude_, noise_std_, ctx.seed});
      auto left = std::make_shared<std::int64_t>(chunks_);
      const auto n = static_cast<std::size_t>(chunk_size_);
      acquire = [gen, left, n]() -> std::optional<std::vector<float>> {
        if (*left == 0) return std::nullopt;
        --*left;
        return gen->next(n);
      };
    } else {
      const std::filesystem::path path = ctx.input_path ? *ctx.input_path : std::filesystem::path(device_);
      auto in = std::make_shared<std::ifstream>(path, std::ios::binary);
      if (path.empty() || !*in) throw DeviceError("cannot open audio device " + path.string());
      const auto n = static_cast<std::size_t>(chunk_size_);
      acquire = [in, n, path]() -> std::optional<std::vector<float>> {
        std::vector<char> raw(2 * n);
        in->read(raw.data(), static_cast<std::streamsize>(raw.size()));
        if (in->bad()) throw DeviceError("read failure on " + path.string());
        if (static_cast<std::size_t>(in->gcount()) < raw.size()) return std::nullopt;
        std::vector<float> out(n);
        for (std::size_t i = 0; i < n; ++i) {
          const auto lo = static_cast<std::uint8_t>(raw[2 * i]);
          const auto hi = static_cast<std::uint8_t>(raw[2 * i + 1]);
          out[i] = static_cast<float>(static_cast<std::int16_t>(lo | (hi << 8))) / 32768.0f;
        }
        return out;
      };
    }
    return std::make_unique<Source>(std::move(acquire), SourceKey{name_, feature_}, rate_, ctx);
  }

 private:
  class Source final : public InputSource {
   public:
    Source(std::function<std::optional<std::vector<float>>()> acquire, SourceKey key, double rate,
           const InputContext& ctx)
        : acquire_(std::move(acquire)), key_(std::move(key)), rate_(rate),
          number_(ctx.first_number), overflows_(ctx.overflows) {
      lookahead_ = acquire_();
    }

    std::optional<DataChunk> next() override {
      while (lookahead_) {
        std::vector<float> samples = std::move(*lookahead_);
        const std::uint64_t number = number_++;
        lookahead_ = acquire_();
        ++stats_.produced;
        if (overflows_.count(number)) {
          ++stats_.overflowed;
          pending_discontinuity_ = true;
          continue;
        }
        DataChunk c;
        c.number = number;
        c.source = key_;
        c.sample_rate = rate_;
        c.payload.series = true;
        c.payload.values = Eigen::Map<const Matrix>(samples.data(), 1, static_cast<Eigen::Index>(samples.size()));
        if (first_ || pending_discontinuity_) {
          c.continuity = Continuity::discontinuous;
        } else if (!lookahead_) {
          c.continuity = Continuity::last;
        } else {
          c.continuity = Continuity::with_previous;
        }
        first_ = false;
        pending_discontinuity_ = false;
        ++stats_.published;
        return c;
      }
      return std::nullopt;
    }

    InputStats stats() const override { return stats_; }

   private:
    std::function<std::optional<std::vector<float>>()> acquire_;
    SourceKey key_;
    double rate_;
    std::uint64_t number_;
    std::set<std::uint64_t> overflows_;
    std::optional<std::vector<float>> lookahead_;
    bool first_ = true;
    bool pending_discontinuity_ = false;
    InputStats stats_;
  };

  std::string name_;
  std::string feature_;
  std::string mode_;
  std::int64_t chunk_size_;
  std::int64_t chunks_;
  double rate_;
  double tone_hz_;
  double tone_amplitude_;
  double noise_std_;
  std::string device_;
};

// Single whole-signal chunk of white noise, number 0.
inline DataChunk make_calibration_chunk(const SourceKey& key, double sample_rate, std::int64_t samples,
                                        double noise_std, std::uint64_t seed) {
  const auto noise = dsp::white_noise(static_cast<std::size_t>(samples), noise_std, seed, sample_rate);
  DataChunk c;
  c.number = 0;
  c.source = key;
  c.sample_rate = sample_rate;
  c.continuity = Continuity::calibration_chunk;
  c.payload.series = true;
  c.payload.values = Eigen::Map<const Matrix>(noise.data(), 1, static_cast<Eigen::Index>(noise.size()));
  return c;
}

// Runs the filterbank and the raw structure score over a calibration chunk
// and derives the sigmoid parameters from the valid scores.
inline dsp::SigmoidParams calibrate_structure(const DataChunk& chunk, const dsp::FilterbankSpec& bank,
                                              const dsp::StructureSpec& structure, double k) {
  if (chunk.continuity != Continuity::calibration_chunk) {
    throw NotACalibrationChunkError("chunk " + std::to_string(chunk.number) + " is flagged " +
                                    std::string(to_string(chunk.continuity)) + ", not calibrationChunk");
  }
  dsp::OlaFilterbank fb(bank, chunk.sample_rate);
  const auto& v = chunk.payload.values;
  const MatrixD e = fb.process(std::span<const float>(v.data(), static_cast<std::size_t>(v.cols())), true);
  const Eigen::Index skip = std::min<Eigen::Index>(bank.impulse_length, e.cols());
  const Matrix energy = e.rightCols(e.cols() - skip).cast<Sample>();
  const Matrix scores = dsp::tract_scores(energy.cast<double>(), structure).cast<Sample>();
  const Eigen::Index ws = structure.scale_half_width;
  return dsp::calibrate_from_scores(scores.middleRows(ws, scores.rows() - 2 * ws), k);
}

class Registry {
 public:
  using ProcessorFactory = std::function<std::unique_ptr<Processor>(const ProcessorSpec&, const ProcessorContext&)>;
  using InputFactory = std::function<std::unique_ptr<InputProcessor>(const ProcessorSpec&)>;

  static Registry& instance() {
    static Registry registry = builtin();
    return registry;
  }

  void register_kind(const std::string& kind, ProcessorFactory factory) {
    processors_[kind] = std::move(factory);
  }
  void register_input_kind(const std::string& kind, InputFactory factory) {
    inputs_[kind] = std::move(factory);
  }

  bool is_input(const std::string& kind) const { return inputs_.count(kind) != 0; }
  bool known(const std::string& kind) const { return is_input(kind) || processors_.count(kind) != 0; }

  std::unique_ptr<Processor> make(const ProcessorSpec& spec, const ProcessorContext& ctx = {}) const {
    auto it = processors_.find(spec.kind);
    if (it == processors_.end()) {
      throw UnknownProcessorKindError("processor " + spec.name + " has unknown kind '" + spec.kind + "'");
    }
    return it->second(spec, ctx);
  }

  std::unique_ptr<InputProcessor> make_input(const ProcessorSpec& spec) const {
    auto it = inputs_.find(spec.kind);
    if (it == inputs_.end()) {
      throw UnknownProcessorKindError("processor " + spec.name + " has unknown input kind '" + spec.kind + "'");
    }
    return it->second(spec);
  }

 private:
  static Registry builtin() {
    Registry r;
    r.register_kind("resampler", [](const ProcessorSpec& s, const ProcessorContext&) {
      return std::make_unique<ResamplerProcessor>(s);
    });
    r.register_kind("gammachirp", [](const ProcessorSpec& s, const ProcessorContext&) {
      return std::make_unique<GammachirpProcessor>(s);
    });
    r.register_kind("structure", [](const ProcessorSpec& s, const ProcessorContext&) {
      return std::make_unique<StructureProcessor>(s);
    });
    r.register_kind("ptn", [](const ProcessorSpec& s, const ProcessorContext& ctx) {
      return std::make_unique<PtnProcessor>(s, ctx);
    });
    r.register_input_kind("wav_reader", [](const ProcessorSpec& s) { return std::make_unique<WavReaderInput>(s); });
    r.register_input_kind("mic_input", [](const ProcessorSpec& s) { return std::make_unique<MicInput>(s); });
    return r;
  }

  std::map<std::string, ProcessorFactory> processors_;
  std::map<std::string, InputFactory> inputs_;
};

}  // namespace tfalign
