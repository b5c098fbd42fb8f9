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

#include <gtest/gtest.h>

#include <set>
#include <string>

#include "support.hpp"
#include "tfalign/reference.hpp"
#include "tfalign/runtime.hpp"

namespace tfalign {
namespace {

using testing::SmallPipeline;
using testing::TempDir;
using testing::small_pipeline_yaml;

RunReport run_small(const SmallPipeline& opt, const std::optional<std::filesystem::path>& out = std::nullopt) {
  RunOptions options;
  options.capture_all = true;
  options.output_dir = out;
  return run(parse_config(small_pipeline_yaml(opt)), options);
}

// Where a published chunk sits on its stream's timeline. Chunk n of the
// input spans [n e, (n + 1) e) at the stream rate; continuous chunks cover
// [a - p, b - p), discontinuous ones [a + d, b - p).
struct Coverage {
  Eigen::Index begin = 0;
  Eigen::Index end = 0;
};

Coverage coverage(const DataChunk& c, Eigen::Index e, std::uint64_t first_number) {
  const Eigen::Index a = static_cast<Eigen::Index>(c.number - first_number) * e;
  const Eigen::Index b = a + e;
  const auto& al = c.alignment;
  if (is_discontinuous_subtype(c.continuity)) return {a + al.dropped_after_discontinuity, b - al.included_past};
  return {a - al.included_past, b - al.included_past};
}

// Every published chunk of every captured stream must hold exactly the
// whole-signal reference values over the interval its metadata implies.
void expect_chunks_match_reference(const PipelinePlan& plan, const RunReport& report, std::uint64_t first_number) {
  const auto signal = reference::input_signal(plan, std::nullopt, plan.config.seed);
  const auto ref = reference::run(plan, signal, plan.config.seed);
  std::size_t checked = 0;
  for (const auto& [name, chunks] : report.captured) {
    auto it = ref.streams.find(name);
    if (it == ref.streams.end() || it->second.cumulative == AlignmentParams{}) continue;
    const Matrix& expected = it->second.values;
    const Eigen::Index e = plan.chunk_size * static_cast<Eigen::Index>(it->second.sample_rate) /
                           static_cast<Eigen::Index>(plan.input_rate);
    for (const auto& c : chunks) {
      if (c->continuity == Continuity::calibration_chunk) continue;
      const Coverage cov = coverage(*c, e, first_number);
      ASSERT_EQ(c->payload.time_length(), cov.end - cov.begin) << name << " chunk " << c->number;
      ASSERT_GE(cov.begin, 0);
      ASSERT_LE(cov.end, expected.cols());
      for (Eigen::Index r = 0; r < expected.rows(); ++r) {
        for (Eigen::Index t = 0; t < c->payload.time_length(); ++t) {
          ASSERT_TRUE(testing::close_or_both_nan(c->payload.values(r, t), expected(r, cov.begin + t), 1e-6))
              << name << " chunk " << c->number << " cell (" << r << "," << t << "): " << c->payload.values(r, t)
              << " vs " << expected(r, cov.begin + t);
        }
      }
      ++checked;
    }
  }
  EXPECT_GT(checked, 0u);
}

TEST(Runtime, FaultFreeStreamsAreContinuousAfterStartup) {
  SmallPipeline opt;
  const auto report = run_small(opt);
  for (const auto& stream : {"resampler.audio", "gammachirp.E", "structure.T", "ptn.ET"}) {
    const auto& chunks = report.captured.at(stream);
    ASSERT_EQ(chunks.size(), 24u) << stream;
    for (std::size_t i = 0; i < chunks.size(); ++i) {
      EXPECT_EQ(chunks[i]->number, i);
      const Continuity expected = i == 0 ? Continuity::discontinuous : i == 23 ? Continuity::last : Continuity::with_previous;
      EXPECT_EQ(chunks[i]->continuity, expected) << stream << " chunk " << i;
    }
  }
  EXPECT_EQ(testing::merge_log_string(report.node("gammachirp")).substr(0, 42), "0:RegularDiscontinuous 1:RegularContinuous");
}

TEST(Runtime, FaultFreeRunConservesSamples) {
  SmallPipeline opt;
  const auto report = run_small(opt);
  // 24 chunks of 128 steps at 4 kHz, minus d = 63 and p = 8 at ptn.
  EXPECT_EQ(report.output("ptn.ET").columns, 24u * 128u - 63u - 8u);
  EXPECT_EQ(report.output("gammachirp.E").columns, 24u * 128u - 55u);
  EXPECT_EQ(report.output("resampler.audio").columns, 24u * 128u - 15u);
  for (const auto& node : report.nodes) {
    EXPECT_EQ(node.buffer.discarded, 0u) << node.name;
    EXPECT_EQ(node.buffer.stale, 0u) << node.name;
    EXPECT_EQ(node.incomplete_at_end, 0u) << node.name;
  }
}

TEST(Runtime, FaultFreeChunksMatchTheReference) {
  SmallPipeline opt;
  const auto plan = validate_graph(parse_config(small_pipeline_yaml(opt)));
  RunOptions options;
  options.capture_all = true;
  expect_chunks_match_reference(plan, run(plan, options), 0);
}

TEST(Runtime, ChunksAfterFaultsSitWhereTheirAlignmentSays) {
  SmallPipeline opt;
  opt.faults = "  - {type: drop_chunk, edge: \"structure.T->ptn\", number: 5}\n"
               "  - {type: overflow_at, input: mic, number: 9}\n"
               "  - {type: link_down, edge: \"resampler.audio->gammachirp\", from: 14, to: 16}\n"
               "  - {type: drop_chunk, edge: \"gammachirp.E->ptn\", number: 20}\n";
  for (const char* transport : {"local", "tcp"}) {
    SCOPED_TRACE(transport);
    opt.transport = transport;
    const auto plan = validate_graph(parse_config(small_pipeline_yaml(opt)));
    RunOptions options;
    options.capture_all = true;
    const auto report = run(plan, options);
    expect_chunks_match_reference(plan, report, 0);
    EXPECT_EQ(testing::merge_log_string(report.node("ptn")),
              "0:RegularDiscontinuous 1:RegularContinuous 2:RegularContinuous 3:RegularContinuous "
              "4:RegularContinuous 6:IrregularDiscontinuous 7:RegularContinuous 8:RegularContinuous "
              "10:RegularDiscontinuous 11:RegularContinuous 12:RegularContinuous 13:RegularContinuous "
              "17:RegularDiscontinuous 18:RegularContinuous 19:RegularContinuous 21:IrregularDiscontinuous "
              "22:RegularContinuous 23:RegularContinuous");
  }
}

TEST(Runtime, CalibrationChunkComesFirstAndIsNeverWritten) {
  TempDir dir;
  SmallPipeline opt;
  opt.calibration = true;
  const auto report = run_small(opt, dir.path());
  const auto& tract = report.captured.at("structure.T");
  ASSERT_FALSE(tract.empty());
  EXPECT_EQ(tract.front()->continuity, Continuity::calibration_chunk);
  EXPECT_EQ(tract.front()->number, 0u);
  EXPECT_EQ(tract[1]->number, 1u);
  EXPECT_TRUE(report.node("structure").processor.contains("calibration"));
  EXPECT_EQ(report.node("ptn").processor.at("sigmoid").at("source"), "calibration");
  EXPECT_EQ(report.node("ptn").processor.at("sigmoid").at("theta"),
            report.node("structure").processor.at("calibration").at("theta"));

  for (const auto& stream : {"resampler.audio", "gammachirp.E", "structure.T", "ptn.ET"}) {
    const auto file = read_tf_file(dir / (std::string(stream) + ".tf"));
    ASSERT_EQ(file.records.size(), 24u) << stream;
    for (const auto& rec : file.records) EXPECT_NE(rec.continuity, Continuity::calibration_chunk);
    EXPECT_EQ(file.records.front().number, 1u);
  }
  EXPECT_EQ(report.output("ptn.ET").columns, 24u * 128u - 63u - 8u);

  const auto plan = validate_graph(parse_config(small_pipeline_yaml(opt)));
  expect_chunks_match_reference(plan, report, 1);
}

TEST(Runtime, OutputFilesAreByteIdenticalAcrossRuns) {
  SmallPipeline opt;
  opt.calibration = true;
  opt.transport = "tcp";
  opt.faults = "  - {type: drop_chunk, edge: \"structure.T->ptn\", number: 3}\n";
  TempDir a;
  TempDir b;
  run_small(opt, a.path());
  run_small(opt, b.path());
  std::size_t files = 0;
  for (const auto& entry : std::filesystem::directory_iterator(a.path())) {
    const auto name = entry.path().filename();
    ASSERT_TRUE(std::filesystem::exists(b.path() / name)) << name;
    EXPECT_EQ(testing::read_bytes(entry.path()), testing::read_bytes(b.path() / name)) << name;
    ++files;
  }
  EXPECT_GE(files, 6u);  // four streams, the block averages and the report
}

TEST(Runtime, TcpEdgesGiveTheSameFilesAsLocalQueues) {
  SmallPipeline opt;
  TempDir local;
  TempDir tcp;
  run_small(opt, local.path());
  opt.transport = "tcp";
  const auto report = run_small(opt, tcp.path());
  for (const auto& stream : {"resampler.audio", "gammachirp.E", "structure.T", "ptn.ET"}) {
    const std::string file = std::string(stream) + ".tf";
    EXPECT_EQ(testing::read_bytes(local / file), testing::read_bytes(tcp / file)) << stream;
  }
  for (const auto& e : report.edges) {
    EXPECT_EQ(e.transport, "tcp");
    EXPECT_EQ(e.wire.frames, e.sent) << e.edge;
    EXPECT_EQ(e.wire.checksum_errors, 0u);
  }
}

// A link outage over k chunks loses those k intervals plus one re-warm-up
// of the cumulative d + p.
TEST(Runtime, LinkDownLosesItsChunksPlusOneWarmUp) {
  SmallPipeline opt;
  opt.chunks = 40;
  opt.faults = "  - {type: link_down, edge: \"resampler.audio->gammachirp\", from: 10, to: 14}\n";
  const auto report = run_small(opt);
  const std::uint64_t e = 128;
  const std::uint64_t full = 40 * e - 63 - 8;
  EXPECT_EQ(report.output("ptn.ET").columns, full - (5 * e + 63 + 8));
  EXPECT_EQ(report.node("resampler").published, 40u);
  EXPECT_EQ(report.node("gammachirp").received, 35u);
}

TEST(Runtime, NetworkScenarioMergeLogs) {
  const auto config = load_config(testing::source_dir() / "configs" / "use_case_2_mic.yaml");
  const auto report = run(config);
  const std::string regularized = "0:RegularDiscontinuous 1:RegularContinuous 2:RegularContinuous 3:RegularContinuous "
                                  "4:RegularContinuous 6:RegularDiscontinuous 7:RegularContinuous";
  EXPECT_EQ(testing::merge_log_string(report.node("ptn")),
            "0:RegularDiscontinuous 1:RegularContinuous 3:IrregularDiscontinuous 4:RegularContinuous "
            "6:RegularDiscontinuous 7:RegularContinuous");
  for (const auto& node : {"resampler", "gammachirp", "structure"}) {
    EXPECT_EQ(testing::merge_log_string(report.node(node)), regularized) << node;
  }
  const auto& six = report.node("resampler").merge_log[5];
  EXPECT_EQ(six.number, 6u);
  EXPECT_TRUE(six.gap);
  EXPECT_EQ(report.node("mic").input->overflowed, 1u);
  EXPECT_EQ(report.node("ptn").buffer.discarded, 1u);
}

// The lost chunk travels as a withprevious successor to the resampler,
// which merges it discontinuously and publishes a regularized chunk 6.
TEST(Runtime, LossBeforeTheResamplerIsRegularizedThere) {
  auto config = load_config(testing::source_dir() / "configs" / "use_case_2_mic.yaml");
  config.faults.events = {DropChunk{EdgeRef::parse("structure.T->ptn"), 2},
                          DropChunk{EdgeRef::parse("mic.audio->resampler"), 5}};
  const auto report = run(config);
  EXPECT_EQ(testing::merge_log_string(report.node("resampler")),
            "0:RegularDiscontinuous 1:RegularContinuous 2:RegularContinuous 3:RegularContinuous "
            "4:RegularContinuous 6:IrregularDiscontinuous 7:RegularContinuous");
  for (const auto& node : {"gammachirp", "structure"}) {
    EXPECT_EQ(testing::merge_log_string(report.node(node)),
              "0:RegularDiscontinuous 1:RegularContinuous 2:RegularContinuous 3:RegularContinuous "
              "4:RegularContinuous 6:RegularDiscontinuous 7:RegularContinuous")
        << node;
  }
  EXPECT_EQ(testing::merge_log_string(report.node("ptn")),
            "0:RegularDiscontinuous 1:RegularContinuous 3:IrregularDiscontinuous 4:RegularContinuous "
            "6:RegularDiscontinuous 7:RegularContinuous");
}

TEST(Runtime, ForkMergeBufferStaysBoundedOverTenThousandChunks) {
  SmallPipeline opt;
  opt.chunk_size = 160;
  opt.chunks = 10000;
  opt.queue_depth = 4;
  const auto report = run_small(opt);
  const auto& ptn = report.node("ptn");
  EXPECT_EQ(ptn.merged, 10000u);
  EXPECT_EQ(ptn.buffer.discarded, 0u);
  // E can run ahead of T by what fits in the structure inbox, the chunk the
  // structure node holds and the ptn inbox.
  EXPECT_LE(ptn.buffer.max_occupancy, 2u * (2u * opt.queue_depth + 2u));
  EXPECT_EQ(report.output("ptn.ET").columns, 10000u * 80u - 63u - 8u);
}

TEST(Runtime, WorkerFailuresAbortTheRun) {
  TempDir dir;
  dsp::write_wav(dir / "fast.wav", std::vector<float>(20000, 0.0f), 16000);
  const auto config = load_config(testing::source_dir() / "configs" / "use_case_1.yaml");
  RunOptions options;
  options.input = dir / "fast.wav";
  EXPECT_THROW(run(config, options), SpecMismatchError);
  options.input = dir / "missing.wav";
  EXPECT_THROW(run(config, options), IoError);
}

TEST(Runtime, ReportJsonCarriesTheRunBookkeeping) {
  SmallPipeline opt;
  opt.faults = "  - {type: drop_chunk, edge: \"structure.T->ptn\", number: 5}\n";
  const auto j = run_small(opt).to_json();
  EXPECT_EQ(j.at("chunk_size"), 256);
  bool saw_drop = false;
  for (const auto& e : j.at("edges")) {
    if (e.at("edge") == "structure.T->ptn") saw_drop = e.at("dropped") == 1;
  }
  EXPECT_TRUE(saw_drop);
  for (const auto& p : j.at("processors")) EXPECT_FALSE(p.at("buffer").contains("max_occupancy"));
  for (const auto& o : j.at("outputs")) {
    if (o.at("stream") == "ptn.ET") {
      EXPECT_NEAR(o.at("invalid_fraction").get<double>(), 4.0 / 16.0, 1e-3);
    }
  }
}

}  // namespace
}  // namespace tfalign
