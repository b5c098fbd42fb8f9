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

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <yaml-cpp/yaml.h>

#include "tfalign/alignment.hpp"
#include "tfalign/errors.hpp"
#include "tfalign/faults.hpp"

namespace tfalign {

// Kind-specific key/value parameters. Values stay textual until a processor
// asks for them with a type.
class Params {
 public:
  Params() = default;
  explicit Params(std::map<std::string, std::string> values) : values_(std::move(values)) {}

  bool has(const std::string& key) const { return values_.count(key) != 0; }
  void set(const std::string& key, std::string value) { values_[key] = std::move(value); }
  const std::map<std::string, std::string>& values() const { return values_; }

  std::string get_string(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) throw ConfigError("missing parameter '" + key + "'");
    return it->second;
  }
  std::string get_string(const std::string& key, const std::string& fallback) const {
    return has(key) ? get_string(key) : fallback;
  }

  std::int64_t get_int(const std::string& key) const {
    const std::string s = get_string(key);
    std::int64_t v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) {
      throw ConfigError("parameter '" + key + "' must be an integer, got '" + s + "'");
    }
    return v;
  }
  std::int64_t get_int(const std::string& key, std::int64_t fallback) const {
    return has(key) ? get_int(key) : fallback;
  }

  double get_double(const std::string& key) const {
    const std::string s = get_string(key);
    try {
      std::size_t used = 0;
      const double v = std::stod(s, &used);
      if (used == s.size()) return v;
    } catch (const std::exception&) {
    }
    throw ConfigError("parameter '" + key + "' must be a number, got '" + s + "'");
  }
  double get_double(const std::string& key, double fallback) const {
    return has(key) ? get_double(key) : fallback;
  }

  bool get_bool(const std::string& key, bool fallback) const {
    if (!has(key)) return fallback;
    const std::string s = get_string(key);
    if (s == "true" || s == "yes" || s == "1") return true;
    if (s == "false" || s == "no" || s == "0") return false;
    throw ConfigError("parameter '" + key + "' must be a boolean, got '" + s + "'");
  }

 private:
  std::map<std::string, std::string> values_;
};

enum class TransportKind { local, tcp };

struct EdgeSpec {
  std::string producer;
  std::string feature;
  std::string consumer;
  TransportKind transport = TransportKind::local;
  std::string address = "127.0.0.1:0";  // tcp only; port 0 picks a free port

  EdgeRef ref() const { return {producer, feature, consumer}; }
  std::string str() const { return producer + "." + feature + "->" + consumer; }
};

struct ProcessorSpec {
  std::string name;
  std::string kind;
  Params params;
};

struct CalibrationSpec {
  bool enabled = false;
  std::int64_t samples = 16000;  // at the input rate
  double noise_std = 0.1;
};

struct RuntimeSpec {
  std::size_t queue_depth = 16;
  // Abandons an incomplete set after this many milliseconds; 0 disables.
  std::int64_t watchdog_ms = 0;
};

struct PipelineConfig {
  std::vector<ProcessorSpec> processors;
  std::vector<EdgeSpec> edges;
  std::vector<std::string> outputs;  // "node.feature" streams written to disk
  FaultSchedule faults;
  CalibrationSpec calibration;
  RuntimeSpec runtime;
  std::uint64_t seed = 1;
};

namespace detail {

inline std::string scalar(const YAML::Node& n, const std::string& where) {
  if (!n || !n.IsScalar()) throw ConfigError(where + " must be a scalar");
  return n.as<std::string>();
}

template <typename T>
T as(const YAML::Node& n, const std::string& where) {
  if (!n || !n.IsScalar()) throw ConfigError(where + " must be a scalar");
  try {
    return n.as<T>();
  } catch (const YAML::Exception&) {
    throw ConfigError(where + " has the wrong type: '" + n.as<std::string>() + "'");
  }
}

inline std::pair<std::string, std::string> split_stream(const std::string& s) {
  const auto dot = s.find('.');
  if (dot == std::string::npos || dot == 0 || dot + 1 == s.size()) {
    throw ConfigError("stream '" + s + "' must read <processor>.<feature>");
  }
  return {s.substr(0, dot), s.substr(dot + 1)};
}

}  // namespace detail

inline PipelineConfig parse_config(const YAML::Node& root) {
  if (!root.IsMap()) throw ConfigError("pipeline config must be a mapping");
  PipelineConfig cfg;

  const YAML::Node procs = root["processors"];
  if (!procs || !procs.IsSequence()) throw ConfigError("'processors' must be a list");
  for (const auto& p : procs) {
    ProcessorSpec spec;
    spec.name = detail::scalar(p["name"], "processor name");
    spec.kind = detail::scalar(p["kind"], "kind of " + spec.name);
    if (const YAML::Node params = p["params"]) {
      if (!params.IsMap()) throw ConfigError("params of " + spec.name + " must be a mapping");
      for (const auto& kv : params) {
        const std::string key = kv.first.as<std::string>();
        spec.params.set(key, detail::scalar(kv.second, spec.name + "." + key));
      }
    }
    cfg.processors.push_back(std::move(spec));
  }

  if (const YAML::Node edges = root["edges"]) {
    if (!edges.IsSequence()) throw ConfigError("'edges' must be a list");
    for (const auto& e : edges) {
      EdgeSpec edge;
      std::tie(edge.producer, edge.feature) = detail::split_stream(detail::scalar(e["from"], "edge from"));
      edge.consumer = detail::scalar(e["to"], "edge to");
      const std::string transport =
          e["transport"] ? detail::scalar(e["transport"], "edge transport") : "local";
      if (transport == "local") {
        edge.transport = TransportKind::local;
      } else if (transport == "tcp") {
        edge.transport = TransportKind::tcp;
      } else {
        throw ConfigError("unknown transport '" + transport + "' on " + edge.str());
      }
      if (e["address"]) edge.address = detail::scalar(e["address"], "edge address");
      cfg.edges.push_back(std::move(edge));
    }
  }

  if (const YAML::Node outs = root["outputs"]) {
    if (!outs.IsSequence()) throw ConfigError("'outputs' must be a list");
    for (const auto& o : outs) {
      const std::string s = detail::scalar(o, "output");
      detail::split_stream(s);
      cfg.outputs.push_back(s);
    }
  }

  if (const YAML::Node faults = root["faults"]) {
    if (!faults.IsSequence()) throw ConfigError("'faults' must be a list");
    for (const auto& f : faults) {
      const std::string type = detail::scalar(f["type"], "fault type");
      if (type == "drop_chunk") {
        cfg.faults.events.emplace_back(DropChunk{EdgeRef::parse(detail::scalar(f["edge"], "fault edge")),
                                                 detail::as<std::uint64_t>(f["number"], "fault number")});
      } else if (type == "overflow_at") {
        cfg.faults.events.emplace_back(OverflowAt{detail::scalar(f["input"], "fault input"),
                                                  detail::as<std::uint64_t>(f["number"], "fault number")});
      } else if (type == "link_down") {
        cfg.faults.events.emplace_back(LinkDown{EdgeRef::parse(detail::scalar(f["edge"], "fault edge")),
                                                detail::as<std::uint64_t>(f["from"], "link_down from"),
                                                detail::as<std::uint64_t>(f["to"], "link_down to")});
      } else {
        throw ConfigError("unknown fault type '" + type + "'");
      }
    }
  }

  if (const YAML::Node cal = root["calibration"]) {
    cfg.calibration.enabled = cal["enabled"] ? detail::as<bool>(cal["enabled"], "calibration.enabled") : true;
    if (cal["samples"]) cfg.calibration.samples = detail::as<std::int64_t>(cal["samples"], "calibration.samples");
    if (cal["noise_std"]) cfg.calibration.noise_std = detail::as<double>(cal["noise_std"], "calibration.noise_std");
    if (cfg.calibration.samples < 1) throw ConfigError("calibration.samples must be positive");
  }

  if (const YAML::Node rt = root["runtime"]) {
    if (rt["queue_depth"]) {
      const auto depth = detail::as<std::int64_t>(rt["queue_depth"], "runtime.queue_depth");
      if (depth < 1) throw ConfigError("runtime.queue_depth must be positive");
      cfg.runtime.queue_depth = static_cast<std::size_t>(depth);
    }
    if (rt["watchdog_ms"]) cfg.runtime.watchdog_ms = detail::as<std::int64_t>(rt["watchdog_ms"], "runtime.watchdog_ms");
  }

  if (root["seed"]) cfg.seed = detail::as<std::uint64_t>(root["seed"], "seed");
  return cfg;
}

inline PipelineConfig parse_config(const std::string& text) {
  try {
    return parse_config(YAML::Load(text));
  } catch (const YAML::Exception& e) {
    throw ConfigError(std::string("malformed pipeline config: ") + e.what());
  }
}

inline PipelineConfig load_config(const std::filesystem::path& path) {
  try {
    return parse_config(YAML::LoadFile(path.string()));
  } catch (const YAML::BadFile&) {
    throw IoError("cannot read config " + path.string());
  } catch (const YAML::Exception& e) {
    throw ConfigError("malformed pipeline config " + path.string() + ": " + e.what());
  }
}

}  // namespace tfalign
