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

#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "tfalign/channel.hpp"
#include "tfalign/composite.hpp"
#include "tfalign/graph.hpp"
#include "tfalign/merge.hpp"
#include "tfalign/processors.hpp"
#include "tfalign/tfio.hpp"
#include "tfalign/transport.hpp"

namespace tfalign {

struct MergeLogEntry {
  std::uint64_t number = 0;
  Continuity continuity = Continuity::discontinuous;
  bool gap = false;
  std::map<SourceKey, MergeScenario> scenarios;

  // The common scenario of all inputs, or "Mixed".
  std::string summary() const {
    if (scenarios.empty()) return "None";
    const MergeScenario first = scenarios.begin()->second;
    for (const auto& [key, s] : scenarios) {
      if (s != first) return "Mixed";
    }
    return std::string(to_string(first));
  }
};

struct EdgeStats {
  std::string edge;
  std::string transport;
  std::uint64_t sent = 0;
  std::uint64_t dropped = 0;  // removed by the fault schedule
  wire::StreamDecoder::Counters wire;
};

struct OutputStats {
  std::string stream;
  std::filesystem::path file;
  AlignmentParams cumulative;
  Eigen::Index channels = 0;
  std::uint64_t chunks = 0;
  std::uint64_t columns = 0;
  std::uint64_t cells = 0;
  std::uint64_t nan_cells = 0;

  double invalid_fraction() const { return cells ? static_cast<double>(nan_cells) / static_cast<double>(cells) : 0.0; }
  double expected_invalid_fraction() const {
    return channels ? static_cast<double>(cumulative.scale_margin()) / static_cast<double>(channels) : 0.0;
  }
};

struct NodeStats {
  std::string name;
  std::string kind;
  std::uint64_t received = 0;
  std::uint64_t merged = 0;
  std::uint64_t published = 0;
  std::uint64_t incomplete_at_end = 0;
  BufferCounters buffer;
  std::vector<MergeLogEntry> merge_log;
  std::optional<InputStats> input;
  nlohmann::json processor = nlohmann::json::object();
};

struct RunReport {
  std::int64_t chunk_size = 0;
  std::int64_t min_chunk_size = 0;
  std::uint64_t seed = 0;
  std::vector<NodeStats> nodes;
  std::vector<EdgeStats> edges;
  std::vector<OutputStats> outputs;
  // Every published chunk of the captured streams, keyed "node.feature".
  std::map<std::string, std::vector<ChunkPtr>> captured;

  const NodeStats& node(const std::string& name) const {
    for (const auto& n : nodes) {
      if (n.name == name) return n;
    }
    throw ConfigError("report has no processor " + name);
  }

  const OutputStats& output(const std::string& stream) const {
    for (const auto& o : outputs) {
      if (o.stream == stream) return o;
    }
    throw ConfigError("report has no output " + stream);
  }

  // `volatile_counters` adds values that depend on thread scheduling, such
  // as peak buffer occupancy; without them the JSON is reproducible.
  nlohmann::json to_json(bool volatile_counters = false) const {
    nlohmann::json j;
    j["chunk_size"] = chunk_size;
    j["min_chunk_size"] = min_chunk_size;
    j["seed"] = seed;
    for (const auto& n : nodes) {
      nlohmann::json jn;
      jn["name"] = n.name;
      jn["kind"] = n.kind;
      jn["received"] = n.received;
      jn["merged"] = n.merged;
      jn["published"] = n.published;
      jn["incomplete_at_end"] = n.incomplete_at_end;
      jn["buffer"] = {{"completed", n.buffer.completed},
                      {"discarded", n.buffer.discarded},
                      {"stale", n.buffer.stale},
                      {"abandoned", n.buffer.abandoned}};
      if (volatile_counters) jn["buffer"]["max_occupancy"] = n.buffer.max_occupancy;
      if (n.input) {
        jn["input"] = {{"produced", n.input->produced},
                       {"published", n.input->published},
                       {"overflowed", n.input->overflowed}};
      }
      nlohmann::json log = nlohmann::json::array();
      for (const auto& e : n.merge_log) {
        nlohmann::json je = {{"number", e.number},
                             {"scenario", e.summary()},
                             {"continuity", to_string(e.continuity)},
                             {"gap", e.gap}};
        for (const auto& [key, s] : e.scenarios) je["inputs"][key.str()] = to_string(s);
        log.push_back(std::move(je));
      }
      jn["merge_log"] = std::move(log);
      jn["processor"] = n.processor;
      j["processors"].push_back(std::move(jn));
    }
    for (const auto& e : edges) {
      j["edges"].push_back({{"edge", e.edge},
                            {"transport", e.transport},
                            {"sent", e.sent},
                            {"dropped", e.dropped},
                            {"frames_decoded", e.wire.frames},
                            {"checksum_errors", e.wire.checksum_errors},
                            {"format_errors", e.wire.format_errors}});
    }
    for (const auto& o : outputs) {
      j["outputs"].push_back({{"stream", o.stream},
                              {"file", o.file.filename().string()},
                              {"alignment", to_string(o.cumulative)},
                              {"channels", o.channels},
                              {"chunks", o.chunks},
                              {"columns", o.columns},
                              {"nan_cells", o.nan_cells},
                              {"cells", o.cells},
                              {"invalid_fraction", o.invalid_fraction()},
                              {"expected_invalid_fraction", o.expected_invalid_fraction()}});
    }
    return j;
  }
};

struct RunOptions {
  std::optional<std::filesystem::path> input;
  std::optional<std::filesystem::path> output_dir;
  std::optional<std::uint64_t> seed;
  // Keep every published chunk of every stream in the report.
  bool capture_all = false;
};

// Seeds for the two random sources of a run, kept apart so that the
// calibration noise never repeats the input noise.
inline std::uint64_t calibration_seed(std::uint64_t seed) { return 2 * seed + 1; }
inline std::uint64_t input_seed(std::uint64_t seed) { return 2 * seed; }

namespace detail {

struct Aborted {};

struct Message {
  std::size_t edge = 0;
  ChunkPtr chunk;  // null marks end of stream on the edge
};

using Inbox = BoundedQueue<Message>;

class RunControl {
 public:
  void fail(std::exception_ptr error) {
    {
      std::lock_guard lock(mutex_);
      if (!first_) first_ = error;
    }
    abort();
  }

  void abort() {
    if (aborted_.exchange(true)) return;
    for (auto* q : queues_) q->close();
    for (auto* l : links_) l->shutdown();
  }

  void watch(Inbox* q) { queues_.push_back(q); }
  void watch(TcpLink* l) { links_.push_back(l); }

  std::exception_ptr error() const {
    std::lock_guard lock(mutex_);
    return first_;
  }

 private:
  mutable std::mutex mutex_;
  std::exception_ptr first_;
  std::atomic<bool> aborted_{false};
  std::vector<Inbox*> queues_;
  std::vector<TcpLink*> links_;
};

struct FeatureSink {
  std::optional<TfWriter> writer;
  OutputStats stats;
  bool capture = false;
  std::vector<ChunkPtr> captured;
};

class Runner {
 public:
  Runner(const PipelinePlan& plan, const RunOptions& options)
      : plan_(plan), options_(options), seed_(options.seed.value_or(plan.config.seed)) {
    const auto& nodes = plan_.nodes;
    inboxes_.resize(nodes.size());
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      if (nodes[i].is_input) continue;
      inboxes_[i] = std::make_unique<Inbox>(plan_.config.runtime.queue_depth);
      control_.watch(inboxes_[i].get());
    }
    links_.resize(plan_.edges.size());
    edge_stats_.resize(plan_.edges.size());
    for (std::size_t e = 0; e < plan_.edges.size(); ++e) {
      const auto& spec = plan_.edges[e].spec;
      edge_stats_[e].edge = spec.str();
      edge_stats_[e].transport = spec.transport == TransportKind::tcp ? "tcp" : "local";
      if (spec.transport == TransportKind::tcp) {
        links_[e] = std::make_unique<TcpLink>(spec.address);
        control_.watch(links_[e].get());
      }
    }
    if (options_.output_dir) std::filesystem::create_directories(*options_.output_dir);
    sinks_.resize(nodes.size());
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      for (const auto& f : nodes[i].features) {
        FeatureSink sink;
        const std::string stream = nodes[i].spec.name + "." + f.spec.name;
        sink.stats.stream = stream;
        sink.stats.cumulative = f.cumulative;
        sink.stats.channels = f.spec.info.channels;
        sink.capture = options_.capture_all || f.recorded;
        if (f.recorded && options_.output_dir) {
          sink.stats.file = *options_.output_dir / (stream + ".tf");
          sink.writer.emplace(sink.stats.file, TfFileHeader{{nodes[i].spec.name, f.spec.name},
                                                            f.spec.info.series,
                                                            static_cast<std::uint32_t>(f.spec.info.channels),
                                                            f.spec.info.sample_rate,
                                                            f.spec.info.channel_freqs});
        }
        sinks_[i].push_back(std::move(sink));
      }
    }
    stats_.resize(nodes.size());
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      stats_[i].name = nodes[i].spec.name;
      stats_[i].kind = nodes[i].spec.kind;
    }
  }

  RunReport run() {
    std::vector<std::thread> threads;
    for (std::size_t e = 0; e < links_.size(); ++e) {
      if (links_[e]) threads.emplace_back([this, e] { guarded([&] { receive(e); }); });
    }
    for (std::size_t i = 0; i < plan_.nodes.size(); ++i) {
      threads.emplace_back([this, i] {
        guarded([&] { plan_.nodes[i].is_input ? run_input(i) : run_node(i); });
      });
    }
    for (auto& t : threads) t.join();
    if (auto error = control_.error()) std::rethrow_exception(error);
    return report();
  }

 private:
  template <typename F>
  void guarded(F&& body) {
    try {
      body();
    } catch (const Aborted&) {
    } catch (...) {
      control_.fail(std::current_exception());
    }
  }

  void receive(std::size_t e) {
    Inbox& inbox = *inboxes_[plan_.edges[e].consumer];
    links_[e]->receive([&](DataChunk chunk) {
      return inbox.push({e, std::make_shared<const DataChunk>(std::move(chunk))});
    });
    inbox.push({e, nullptr});
  }

  void send(std::size_t e, const ChunkPtr& chunk) {
    const PlannedEdge& edge = plan_.edges[e];
    if (plan_.config.faults.drops(edge.spec.producer, edge.spec.feature, edge.spec.consumer, chunk->number)) {
      ++edge_stats_[e].dropped;
      return;
    }
    ++edge_stats_[e].sent;
    const bool ok = links_[e] ? links_[e]->send(wire::encode(*chunk))
                              : inboxes_[edge.consumer]->push({e, chunk});
    if (!ok) throw Aborted{};
  }

  void end_of_stream(std::size_t node) {
    for (const auto& f : plan_.nodes[node].features) {
      for (std::size_t e : f.edges) {
        if (links_[e]) {
          links_[e]->finish();
        } else if (!inboxes_[plan_.edges[e].consumer]->push({e, nullptr})) {
          throw Aborted{};
        }
      }
    }
  }

  void publish(std::size_t node, std::size_t feature, DataChunk chunk) {
    validate_chunk(chunk);
    auto ptr = std::make_shared<const DataChunk>(std::move(chunk));
    FeatureSink& sink = sinks_[node][feature];
    if (ptr->continuity != Continuity::calibration_chunk) {
      OutputStats& s = sink.stats;
      ++s.chunks;
      s.columns += static_cast<std::uint64_t>(ptr->payload.time_length());
      s.cells += static_cast<std::uint64_t>(ptr->payload.values.size());
      s.nan_cells += static_cast<std::uint64_t>(ptr->payload.values.isNaN().count());
      if (sink.writer) sink.writer->append(*ptr);
    }
    if (sink.capture) sink.captured.push_back(ptr);
    ++stats_[node].published;
    for (std::size_t e : plan_.nodes[node].features[feature].edges) send(e, ptr);
  }

  void close_sinks(std::size_t node) {
    for (auto& sink : sinks_[node]) {
      if (sink.writer) sink.writer->close();
    }
  }

  void run_input(std::size_t i) {
    const PlannedNode& node = plan_.nodes[i];
    const PlannedFeature& feature = node.features.front();
    const auto input = Registry::instance().make_input(node.spec);
    InputContext ctx;
    ctx.name = node.spec.name;
    ctx.input_path = options_.input;
    ctx.seed = input_seed(seed_);
    ctx.first_number = plan_.config.calibration.enabled ? 1 : 0;
    ctx.overflows = plan_.config.faults.overflows(node.spec.name);
    const auto source = input->open(ctx);

    if (plan_.config.calibration.enabled) {
      publish(i, 0, make_calibration_chunk({node.spec.name, feature.spec.name}, feature.spec.info.sample_rate,
                                           plan_.config.calibration.samples, plan_.config.calibration.noise_std,
                                           calibration_seed(seed_)));
    }
    while (auto chunk = source->next()) publish(i, 0, std::move(*chunk));
    stats_[i].input = source->stats();
    close_sinks(i);
    end_of_stream(i);
  }

  void run_node(std::size_t i) {
    const PlannedNode& node = plan_.nodes[i];
    NodeStats& stats = stats_[i];
    ProcessorContext ctx{node.spec.name, options_.output_dir};
    const auto proc = Registry::instance().make(node.spec, ctx);
    proc->describe(node.inputs);

    std::vector<SourceKey> keys;
    for (const auto& b : node.inputs) keys.push_back(b.key);
    CompositeManager buffer(keys);
    MergeState state;
    std::size_t open = node.in_edges.size();
    Inbox& inbox = *inboxes_[i];
    const auto watchdog = std::chrono::milliseconds(plan_.config.runtime.watchdog_ms);

    while (open > 0) {
      std::optional<Message> msg;
      if (watchdog.count() > 0) {
        bool timed_out = false;
        msg = inbox.pop_for(watchdog, timed_out);
        if (timed_out) {
          if (auto oldest = buffer.oldest_pending()) buffer.abandon(*oldest);
          continue;
        }
      } else {
        msg = inbox.pop();
      }
      if (!msg) throw Aborted{};
      if (!msg->chunk) {
        --open;
        continue;
      }
      ++stats.received;
      if (msg->chunk->source != plan_.edges[msg->edge].key) {
        throw ProtocolError(node.spec.name + " received " + msg->chunk->source.str() + " on edge " +
                            plan_.edges[msg->edge].spec.str());
      }
      auto accepted = buffer.accept(std::move(msg->chunk));
      if (!accepted.completed) continue;

      MergeResult merged = complete_merge(state, accepted.completed->chunks, accepted.completed->number);
      state = std::move(merged.state);
      ++stats.merged;
      MergeLogEntry entry{merged.merged.number, merged.merged.continuity, merged.merged.gap, {}};
      for (const auto& [key, in] : merged.merged.inputs) entry.scenarios.emplace(key, in.scenario);
      stats.merge_log.push_back(std::move(entry));

      auto payloads = proc->process(merged.merged);
      if (payloads.empty()) continue;
      if (payloads.size() != node.features.size()) {
        throw ProtocolError(node.spec.name + " returned " + std::to_string(payloads.size()) + " payloads for " +
                            std::to_string(node.features.size()) + " features");
      }
      for (std::size_t f = 0; f < payloads.size(); ++f) {
        const PlannedFeature& feature = node.features[f];
        DataChunk out;
        out.number = merged.merged.number;
        out.source = {node.spec.name, feature.spec.name};
        out.payload = std::move(payloads[f]);
        out.sample_rate = feature.spec.info.sample_rate;
        out.channel_freqs = feature.spec.info.channel_freqs;
        out.alignment = compose(merged.merged.alignment, feature.spec.alignment);
        out.continuity = merged.merged.continuity;
        publish(i, f, std::move(out));
      }
    }
    stats.incomplete_at_end = buffer.occupancy();
    stats.buffer = buffer.counters();
    proc->finish();
    stats.processor = proc->report();
    close_sinks(i);
    end_of_stream(i);
  }

  RunReport report() {
    RunReport r;
    r.chunk_size = plan_.chunk_size;
    r.min_chunk_size = plan_.min_chunk_size;
    r.seed = seed_;
    r.nodes = stats_;
    for (std::size_t e = 0; e < edge_stats_.size(); ++e) {
      EdgeStats s = edge_stats_[e];
      if (links_[e]) s.wire = links_[e]->counters();
      r.edges.push_back(std::move(s));
    }
    for (std::size_t i = 0; i < plan_.nodes.size(); ++i) {
      for (std::size_t f = 0; f < sinks_[i].size(); ++f) {
        auto& sink = sinks_[i][f];
        if (plan_.nodes[i].features[f].recorded) r.outputs.push_back(sink.stats);
        if (sink.capture) r.captured[sink.stats.stream] = std::move(sink.captured);
      }
    }
    return r;
  }

  const PipelinePlan& plan_;
  RunOptions options_;
  std::uint64_t seed_;
  RunControl control_;
  std::vector<std::unique_ptr<Inbox>> inboxes_;
  std::vector<std::unique_ptr<TcpLink>> links_;
  std::vector<EdgeStats> edge_stats_;
  std::vector<std::vector<FeatureSink>> sinks_;
  std::vector<NodeStats> stats_;
};

}  // namespace detail

// Runs a validated pipeline to completion: one worker thread per processor,
// bounded in-process queues or loopback TCP links between them. The first
// failure in any worker stops the run and is rethrown here.
inline RunReport run(const PipelinePlan& plan, const RunOptions& options = {}) {
  detail::Runner runner(plan, options);
  RunReport report = runner.run();
  if (options.output_dir) {
    std::ofstream out(*options.output_dir / "report.json");
    out << report.to_json().dump(2) << '\n';
    if (!out) throw IoError("cannot write report.json");
  }
  return report;
}

inline RunReport run(const PipelineConfig& config, const RunOptions& options = {}) {
  const PipelinePlan plan = validate_graph(config);
  return run(plan, options);
}

}  // namespace tfalign
