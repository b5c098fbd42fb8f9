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

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "tfalign/reference.hpp"
#include "tfalign/tfalign.hpp"

namespace fs = std::filesystem;
using namespace tfalign;

namespace {

void print_plan(const PipelinePlan& plan) {
  std::printf("input chunk size %lld samples at %g Hz (minimum %lld)\n",
              static_cast<long long>(plan.chunk_size), plan.input_rate,
              static_cast<long long>(plan.min_chunk_size));
  for (const auto& node : plan.nodes) {
    std::printf("%-14s %-11s", node.spec.name.c_str(), node.spec.kind.c_str());
    if (!node.inputs.empty()) {
      std::printf(" inputs");
      for (const auto& in : node.inputs) std::printf(" %s", in.key.str().c_str());
    }
    std::printf("\n");
    for (const auto& f : node.features) {
      std::printf("    %-8s rate %-8g channels %-4lld cumulative %s\n", f.spec.name.c_str(),
                  f.spec.info.sample_rate, static_cast<long long>(f.spec.info.channels),
                  to_string(f.cumulative).c_str());
    }
  }
}

void print_stats(const RunReport& report) {
  for (const auto& n : report.nodes) {
    std::printf("%-14s received %-6llu merged %-6llu published %-6llu discarded %-4llu stale %-4llu max buffered %zu\n",
                n.name.c_str(), static_cast<unsigned long long>(n.received),
                static_cast<unsigned long long>(n.merged), static_cast<unsigned long long>(n.published),
                static_cast<unsigned long long>(n.buffer.discarded),
                static_cast<unsigned long long>(n.buffer.stale), n.buffer.max_occupancy);
    if (!n.merge_log.empty()) {
      std::printf("    merges:");
      for (const auto& e : n.merge_log) {
        std::printf(" %llu:%s", static_cast<unsigned long long>(e.number), e.summary().c_str());
      }
      std::printf("\n");
    }
    if (!n.processor.empty()) std::printf("    %s\n", n.processor.dump().c_str());
  }
  for (const auto& e : report.edges) {
    if (e.dropped) std::printf("edge %s dropped %llu\n", e.edge.c_str(), static_cast<unsigned long long>(e.dropped));
  }
  for (const auto& o : report.outputs) {
    std::printf("output %-16s chunks %-6llu columns %-8llu invalid %.4f%% (from alignment %.4f%%)\n",
                o.stream.c_str(), static_cast<unsigned long long>(o.chunks),
                static_cast<unsigned long long>(o.columns), 100.0 * o.invalid_fraction(),
                100.0 * o.expected_invalid_fraction());
  }
}

int compare_dirs(const PipelinePlan& plan, const reference::Result& ref, const fs::path& dir, double rtol) {
  int failures = 0;
  for (const auto& out : plan.config.outputs) {
    const auto file = read_tf_file(dir / (out + ".tf"));
    const auto cmp = reference::compare(concatenate_records(file.records), ref.streams.at(out), rtol);
    std::printf("%-16s columns %lld/%lld compared %llu nan-mismatch %llu out-of-tolerance %llu max-rel %.3g %s\n",
                out.c_str(), static_cast<long long>(cmp.actual_columns),
                static_cast<long long>(cmp.expected_columns), static_cast<unsigned long long>(cmp.compared),
                static_cast<unsigned long long>(cmp.nan_mismatches),
                static_cast<unsigned long long>(cmp.out_of_tolerance), cmp.max_relative_error,
                cmp.ok() ? "ok" : "MISMATCH");
    if (!cmp.ok()) ++failures;
  }
  return failures;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Aligned streaming time-frequency analysis"};
  app.require_subcommand(1);

  std::string config_path;
  std::string input_path;
  std::string output_dir;
  std::optional<std::uint64_t> seed;
  bool stats = false;

  auto* run_cmd = app.add_subcommand("run", "Run a pipeline over an input");
  run_cmd->add_option("--config", config_path, "Pipeline config (YAML)")->required();
  run_cmd->add_option("--input", input_path, "Input WAV file or device");
  run_cmd->add_option("--output", output_dir, "Output directory")->required();
  run_cmd->add_option("--seed", seed, "Seed for calibration noise and synthetic input");
  run_cmd->add_flag("--stats", stats, "Print per-processor statistics");

  auto* validate_cmd = app.add_subcommand("validate", "Check a pipeline config and print its plan");
  validate_cmd->add_option("--config", config_path, "Pipeline config (YAML)")->required();

  std::string compare_dir;
  double rtol = 1e-6;
  auto* oracle_cmd = app.add_subcommand("oracle", "Run the unchunked reference computation");
  oracle_cmd->add_option("--config", config_path, "Pipeline config (YAML)")->required();
  oracle_cmd->add_option("--input", input_path, "Input WAV file");
  oracle_cmd->add_option("--seed", seed, "Seed for calibration noise and synthetic input");
  oracle_cmd->add_option("--output", output_dir, "Write reference streams here");
  oracle_cmd->add_option("--compare", compare_dir, "Compare with the outputs of a run in this directory");
  oracle_cmd->add_option("--rtol", rtol, "Relative tolerance for --compare");

  std::string wav_path;
  double seconds = 10.0;
  double rate = 8000.0;
  double tone_hz = 1000.0;
  double tone_amp = 0.3;
  double noise_std = 0.05;
  std::uint64_t synth_seed = 1;
  std::string format = "float32";
  auto* synth_cmd = app.add_subcommand("synth", "Write a tone-plus-noise WAV file");
  synth_cmd->add_option("--output", wav_path, "WAV file to write")->required();
  synth_cmd->add_option("--seconds", seconds, "Duration");
  synth_cmd->add_option("--rate", rate, "Sample rate in Hz");
  synth_cmd->add_option("--tone", tone_hz, "Tone frequency in Hz");
  synth_cmd->add_option("--amplitude", tone_amp, "Tone amplitude");
  synth_cmd->add_option("--noise", noise_std, "Noise standard deviation");
  synth_cmd->add_option("--seed", synth_seed, "Noise seed");
  synth_cmd->add_option("--format", format, "float32 or pcm16")->check(CLI::IsMember({"float32", "pcm16"}));

  CLI11_PARSE(app, argc, argv);

  try {
    if (*synth_cmd) {
      const auto samples = dsp::tone_plus_noise(static_cast<std::size_t>(seconds * rate), rate, tone_hz, tone_amp,
                                                noise_std, synth_seed);
      dsp::write_wav(wav_path, samples, static_cast<std::uint32_t>(rate),
                     format == "pcm16" ? dsp::WavSampleFormat::pcm16 : dsp::WavSampleFormat::float32);
      return 0;
    }

    const PipelinePlan plan = validate_graph(load_config(config_path));
    if (*validate_cmd) {
      print_plan(plan);
      return 0;
    }

    const std::optional<fs::path> input = input_path.empty() ? std::nullopt : std::optional<fs::path>(input_path);
    if (*run_cmd) {
      RunOptions options;
      options.input = input;
      options.output_dir = output_dir;
      options.seed = seed;
      const auto start = std::chrono::steady_clock::now();
      const RunReport report = run(plan, options);
      const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - start;
      if (stats) {
        print_stats(report);
        std::printf("elapsed %.2f s\n", elapsed.count());
      }
      return 0;
    }

    const std::uint64_t used_seed = seed.value_or(plan.config.seed);
    const auto ref = reference::run(plan, reference::input_signal(plan, input, used_seed), used_seed);
    for (const auto& [name, sigmoid] : ref.sigmoids) {
      std::printf("%s sigmoid theta %.9g beta %.9g\n", name.c_str(), sigmoid.theta, sigmoid.beta);
    }
    for (const auto& [name, rte] : ref.relative_tonal_energy) {
      std::printf("%s relative tonal energy %.6f\n", name.c_str(), rte);
    }
    if (!output_dir.empty()) {
      fs::create_directories(output_dir);
      for (const auto& [name, stream] : ref.streams) {
        const auto dot = name.find('.');
        DataChunk c;
        c.source = {name.substr(0, dot), name.substr(dot + 1)};
        c.payload.values = stream.values;
        c.payload.series = stream.values.rows() == 1 && stream.cumulative.scale_margin() == 0 &&
                           plan.node(c.source.producer).feature(c.source.representation).spec.info.series;
        c.sample_rate = stream.sample_rate;
        c.channel_freqs = plan.node(c.source.producer).feature(c.source.representation).spec.info.channel_freqs;
        c.alignment = stream.cumulative;
        c.continuity = Continuity::newfile;
        TfWriter w(fs::path(output_dir) / (name + ".ref.tf"),
                   {c.source, c.payload.series, static_cast<std::uint32_t>(c.payload.channels()), c.sample_rate,
                    c.channel_freqs});
        w.append(c);
        w.close();
      }
    }
    if (!compare_dir.empty()) return compare_dirs(plan, ref, compare_dir, rtol) == 0 ? 0 : 1;
    return 0;
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  }
}
