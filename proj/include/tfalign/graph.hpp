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

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <queue>
#include <string>
#include <vector>

#include "tfalign/config.hpp"
#include "tfalign/errors.hpp"
#include "tfalign/processors.hpp"

namespace tfalign {

struct PlannedEdge {
  EdgeSpec spec;
  std::size_t producer = 0;  // node index
  std::size_t consumer = 0;
  SourceKey key;
};

struct PlannedFeature {
  FeatureSpec spec;          // relative alignment and stream info
  AlignmentParams cumulative;
  std::vector<std::size_t> edges;
  bool recorded = false;     // written to the output directory
  std::int64_t chunk_length = 0;  // steps per input chunk at this rate
};

struct PlannedNode {
  ProcessorSpec spec;
  bool is_input = false;
  std::vector<std::size_t> in_edges;
  std::vector<InputBinding> inputs;
  AlignmentParams merged;    // merge of the cumulative input alignments
  std::vector<PlannedFeature> features;

  const PlannedFeature& feature(const std::string& name) const {
    for (const auto& f : features) {
      if (f.spec.name == name) return f;
    }
    throw ConfigError(spec.name + " has no feature '" + name + "'");
  }
};

struct PipelinePlan {
  PipelineConfig config;
  std::vector<PlannedNode> nodes;  // topological order
  std::vector<PlannedEdge> edges;
  std::size_t input_node = 0;
  std::int64_t chunk_size = 0;
  std::int64_t min_chunk_size = 0;
  double input_rate = 0.0;

  std::size_t node_index(const std::string& name) const {
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      if (nodes[i].spec.name == name) return i;
    }
    throw ConfigError("no processor named '" + name + "'");
  }
  const PlannedNode& node(const std::string& name) const { return nodes[node_index(name)]; }
};

namespace detail {

// Kahn's algorithm; ties resolve in configuration order so the plan is
// reproducible.
inline std::vector<std::size_t> topological_order(std::size_t count,
                                                  const std::vector<std::pair<std::size_t, std::size_t>>& arcs,
                                                  const std::vector<std::string>& names) {
  std::vector<std::size_t> indegree(count, 0);
  std::vector<std::vector<std::size_t>> out(count);
  for (const auto& [from, to] : arcs) {
    out[from].push_back(to);
    ++indegree[to];
  }
  std::priority_queue<std::size_t, std::vector<std::size_t>, std::greater<>> ready;
  for (std::size_t i = 0; i < count; ++i) {
    if (indegree[i] == 0) ready.push(i);
  }
  std::vector<std::size_t> order;
  while (!ready.empty()) {
    const std::size_t n = ready.top();
    ready.pop();
    order.push_back(n);
    for (std::size_t m : out[n]) {
      if (--indegree[m] == 0) ready.push(m);
    }
  }
  if (order.size() != count) {
    std::string members;
    for (std::size_t i = 0; i < count; ++i) {
      if (indegree[i] > 0) members += (members.empty() ? "" : ", ") + names[i];
    }
    throw CycleError("processor graph has a cycle through " + members);
  }
  return order;
}

inline std::int64_t steps_at_rate(std::int64_t samples, double input_rate, double rate,
                                  const std::string& who) {
  const double exact = static_cast<double>(samples) * rate / input_rate;
  const double whole = std::round(exact);
  if (std::abs(exact - whole) > 1e-9) {
    throw NonIntegerRateError(who + ": " + std::to_string(samples) + " input samples do not map to a whole number of steps at " +
                              std::to_string(rate) + " Hz");
  }
  return static_cast<std::int64_t>(whole);
}

}  // namespace detail

inline PipelinePlan validate_graph(const PipelineConfig& config) {
  const Registry& registry = Registry::instance();
  const auto& procs = config.processors;
  if (procs.empty()) throw ConfigError("pipeline has no processors");

  std::map<std::string, std::size_t> index;
  std::vector<std::string> names;
  for (std::size_t i = 0; i < procs.size(); ++i) {
    if (procs[i].name.empty() || procs[i].name.find_first_of(".->") != std::string::npos) {
      throw ConfigError("processor name '" + procs[i].name + "' is empty or contains '.', '-' or '>'");
    }
    if (!index.emplace(procs[i].name, i).second) throw ConfigError("duplicate processor " + procs[i].name);
    if (!registry.known(procs[i].kind)) {
      throw UnknownProcessorKindError("processor " + procs[i].name + " has unknown kind '" + procs[i].kind + "'");
    }
    names.push_back(procs[i].name);
  }

  std::vector<std::pair<std::size_t, std::size_t>> arcs;
  for (const auto& e : config.edges) {
    auto p = index.find(e.producer);
    auto c = index.find(e.consumer);
    if (p == index.end()) throw ConfigError("edge " + e.str() + " names unknown producer");
    if (c == index.end()) throw ConfigError("edge " + e.str() + " names unknown consumer");
    arcs.emplace_back(p->second, c->second);
  }
  const auto order = detail::topological_order(procs.size(), arcs, names);

  PipelinePlan plan;
  plan.config = config;
  std::vector<std::size_t> position(procs.size());
  for (std::size_t i = 0; i < order.size(); ++i) {
    position[order[i]] = i;
    PlannedNode node;
    node.spec = procs[order[i]];
    node.is_input = registry.is_input(node.spec.kind);
    plan.nodes.push_back(std::move(node));
  }

  std::optional<std::size_t> input;
  for (std::size_t i = 0; i < plan.nodes.size(); ++i) {
    if (!plan.nodes[i].is_input) continue;
    if (input) throw ConfigError("pipeline has more than one input processor");
    input = i;
  }
  if (!input) throw ConfigError("pipeline has no input processor");
  plan.input_node = *input;

  for (const auto& e : config.edges) {
    PlannedEdge pe;
    pe.spec = e;
    pe.producer = position[index.at(e.producer)];
    pe.consumer = position[index.at(e.consumer)];
    pe.key = {e.producer, e.feature};
    if (plan.nodes[pe.consumer].is_input) throw ConfigError("input processor " + e.consumer + " cannot consume " + e.str());
    for (std::size_t j : plan.nodes[pe.consumer].in_edges) {
      if (plan.edges[j].key == pe.key) throw ConfigError("duplicate edge " + e.str());
    }
    plan.nodes[pe.consumer].in_edges.push_back(plan.edges.size());
    plan.edges.push_back(std::move(pe));
  }

  // Describe every node in topological order, propagating stream info and
  // cumulative alignment.
  {
    PlannedNode& in = plan.nodes[plan.input_node];
    const auto source = registry.make_input(in.spec);
    PlannedFeature f;
    f.spec = source->describe();
    f.cumulative = {};
    in.features.push_back(std::move(f));
    plan.chunk_size = source->chunk_size();
    plan.input_rate = in.features.front().spec.info.sample_rate;
  }
  for (std::size_t i = 0; i < plan.nodes.size(); ++i) {
    PlannedNode& node = plan.nodes[i];
    if (node.is_input) continue;
    if (node.in_edges.empty()) throw ConfigError("processor " + node.spec.name + " has no inputs");
    std::vector<AlignmentParams> cumulative;
    for (std::size_t j : node.in_edges) {
      const PlannedEdge& e = plan.edges[j];
      const PlannedFeature& f = plan.nodes[e.producer].feature(e.spec.feature);
      node.inputs.push_back({e.key, f.spec.info, f.cumulative});
      cumulative.push_back(f.cumulative);
    }
    const double rate = node.inputs.front().info.sample_rate;
    for (const auto& b : node.inputs) {
      if (b.info.sample_rate != rate) {
        throw ConfigError(node.spec.name + " merges inputs at different sample rates");
      }
    }
    node.merged = merge_params(cumulative);
    const auto proc = registry.make(node.spec);
    if (proc->needs_calibration() && !config.calibration.enabled) {
      throw ConfigError(node.spec.name + " has no sigmoid parameters: enable the calibration chunk or set theta and beta");
    }
    for (auto& spec : proc->describe(node.inputs)) {
      PlannedFeature f;
      f.cumulative = compose(node.merged, spec.alignment);
      f.spec = std::move(spec);
      node.features.push_back(std::move(f));
    }
  }

  for (auto& e : plan.edges) {
    const PlannedNode& producer = plan.nodes[e.producer];
    producer.feature(e.spec.feature);  // throws for an undeclared feature
    for (auto& f : plan.nodes[e.producer].features) {
      if (f.spec.name == e.spec.feature) f.edges.push_back(static_cast<std::size_t>(&e - plan.edges.data()));
    }
  }

  for (const auto& out : config.outputs) {
    const auto [node, feature] = detail::split_stream(out);
    auto it = index.find(node);
    if (it == index.end()) throw ConfigError("output " + out + " names unknown processor");
    bool found = false;
    for (auto& f : plan.nodes[position[it->second]].features) {
      if (f.spec.name == feature) found = f.recorded = true;
    }
    if (!found) throw ConfigError("output " + out + " names unknown feature");
  }

  // Tract producers and their sigmoid consumers must agree on k.
  for (const auto& node : plan.nodes) {
    if (node.spec.kind != "ptn") continue;
    const double k = node.spec.params.get_double("calibration_k", 2.0);
    for (std::size_t j : node.in_edges) {
      const PlannedNode& producer = plan.nodes[plan.edges[j].producer];
      if (producer.spec.kind == "structure" && producer.spec.params.get_double("calibration_k", 2.0) != k) {
        throw ConfigError(node.spec.name + " and " + producer.spec.name + " use different calibration_k");
      }
    }
  }

  // Every stream needs at least one valid step per chunk, and every chunk
  // boundary has to land on a whole step at every rate.
  auto check_depth = [&](std::int64_t samples, const std::string& what) {
    std::int64_t required = 0;
    for (auto& node : plan.nodes) {
      for (auto& f : node.features) {
        const double rate = f.spec.info.sample_rate;
        const std::int64_t length = detail::steps_at_rate(samples, plan.input_rate, rate, node.spec.name);
        const std::int64_t margin = f.cumulative.time_margin();
        const auto ratio = static_cast<std::int64_t>(std::llround(plan.input_rate / rate));
        const std::int64_t minimum = (margin + 1) * std::max<std::int64_t>(ratio, 1);
        required = std::max(required, minimum);
        if (length <= margin) {
          throw ChunkTooShortForDepthError(what + " of " + std::to_string(samples) + " samples leaves no valid step at " +
                                           node.spec.name + "." + f.spec.name + " (cumulative d + p = " +
                                           std::to_string(margin) + "); minimum is " + std::to_string(minimum) +
                                           " samples");
        }
      }
    }
    return required;
  };
  plan.min_chunk_size = check_depth(plan.chunk_size, "chunk size");
  for (auto& node : plan.nodes) {
    for (auto& f : node.features) {
      f.chunk_length = detail::steps_at_rate(plan.chunk_size, plan.input_rate, f.spec.info.sample_rate, node.spec.name);
    }
  }
  if (config.calibration.enabled) check_depth(config.calibration.samples, "calibration chunk");

  config.faults.validate(
      [&](const EdgeRef& ref) {
        return std::any_of(config.edges.begin(), config.edges.end(), [&](const EdgeSpec& e) {
          return ref.matches(e.producer, e.feature, e.consumer);
        });
      },
      plan.nodes[plan.input_node].spec.name);
  return plan;
}

}  // namespace tfalign
