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

#include <cstdint>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include "tfalign/errors.hpp"

namespace tfalign {

// An edge is named "producer->consumer" or "producer.feature->consumer".
struct EdgeRef {
  std::string producer;
  std::string feature;  // empty matches every feature of the producer
  std::string consumer;

  static EdgeRef parse(const std::string& text) {
    const auto arrow = text.find("->");
    if (arrow == std::string::npos || arrow == 0 || arrow + 2 >= text.size()) {
      throw ConfigError("edge '" + text + "' is not of the form producer->consumer");
    }
    EdgeRef e;
    std::string from = text.substr(0, arrow);
    e.consumer = text.substr(arrow + 2);
    const auto dot = from.find('.');
    if (dot != std::string::npos) {
      e.feature = from.substr(dot + 1);
      from.resize(dot);
    }
    e.producer = from;
    return e;
  }

  bool matches(const std::string& prod, const std::string& feat, const std::string& cons) const {
    return producer == prod && consumer == cons && (feature.empty() || feature == feat);
  }

  std::string str() const {
    return producer + (feature.empty() ? "" : "." + feature) + "->" + consumer;
  }
};

struct DropChunk {
  EdgeRef edge;
  std::uint64_t number = 0;
};

// Acquisition failure at an input: the chunk is flagged invalid and kept back.
struct OverflowAt {
  std::string input;
  std::uint64_t number = 0;
};

// Every chunk numbered in [from, to] is lost on the edge.
struct LinkDown {
  EdgeRef edge;
  std::uint64_t from = 0;
  std::uint64_t to = 0;
};

using FaultEvent = std::variant<DropChunk, OverflowAt, LinkDown>;

struct FaultSchedule {
  std::vector<FaultEvent> events;

  bool empty() const { return events.empty(); }

  bool drops(const std::string& producer, const std::string& feature, const std::string& consumer,
             std::uint64_t number) const {
    for (const auto& ev : events) {
      if (const auto* d = std::get_if<DropChunk>(&ev)) {
        if (d->number == number && d->edge.matches(producer, feature, consumer)) return true;
      } else if (const auto* l = std::get_if<LinkDown>(&ev)) {
        if (number >= l->from && number <= l->to && l->edge.matches(producer, feature, consumer)) {
          return true;
        }
      }
    }
    return false;
  }

  std::set<std::uint64_t> overflows(const std::string& input) const {
    std::set<std::uint64_t> out;
    for (const auto& ev : events) {
      if (const auto* o = std::get_if<OverflowAt>(&ev); o && o->input == input) out.insert(o->number);
    }
    return out;
  }

  // `edge_exists` answers whether an EdgeRef names at least one configured edge.
  template <typename EdgeExists>
  void validate(EdgeExists&& edge_exists, const std::string& input_name) const {
    for (const auto& ev : events) {
      if (const auto* d = std::get_if<DropChunk>(&ev)) {
        if (!edge_exists(d->edge)) throw ConfigError("fault on unknown edge " + d->edge.str());
      } else if (const auto* l = std::get_if<LinkDown>(&ev)) {
        if (!edge_exists(l->edge)) throw ConfigError("fault on unknown edge " + l->edge.str());
        if (l->to < l->from) throw ConfigError("link_down range is empty on " + l->edge.str());
      } else if (const auto* o = std::get_if<OverflowAt>(&ev)) {
        if (o->input != input_name) throw ConfigError("overflow_at names unknown input " + o->input);
      }
    }
  }
};

// Filters one edge's chunk stream through the schedule; survivors keep
// their order.
template <typename Chunk, typename NumberOf>
std::vector<Chunk> apply_faults(const FaultSchedule& schedule, const EdgeRef& edge,
                                std::vector<Chunk> stream, NumberOf&& number_of) {
  std::vector<Chunk> out;
  out.reserve(stream.size());
  for (auto& c : stream) {
    if (!schedule.drops(edge.producer, edge.feature, edge.consumer, number_of(c))) {
      out.push_back(std::move(c));
    }
  }
  return out;
}

}  // namespace tfalign
