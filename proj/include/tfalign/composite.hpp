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
#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <set>
#include <vector>

#include "tfalign/chunk.hpp"
#include "tfalign/errors.hpp"
#include "tfalign/merge.hpp"

namespace tfalign {

struct CompletedSet {
  std::uint64_t number = 0;
  ChunkSet chunks;
};

struct BufferCounters {
  std::uint64_t completed = 0;
  std::uint64_t discarded = 0;  // removed by gap inference or fast-forward
  std::uint64_t stale = 0;      // arrived after their number was given up
  std::uint64_t abandoned = 0;  // given up by the watchdog
  std::size_t max_occupancy = 0;
};

enum class AcceptStatus { accepted, stale };

struct AcceptResult {
  AcceptStatus status = AcceptStatus::accepted;
  std::optional<CompletedSet> completed;
  std::size_t discarded = 0;
};

// Per-consumer buffer of in-flight chunks from several upstream paths.
//
// Edges are FIFO, so once a key has delivered number n it can never deliver
// anything below n. A number below the lowest number some key can still
// deliver is therefore lost and every chunk carrying it is discarded. A set
// completes when every key holds the same number at the head of its queue.
class CompositeManager {
 public:
  explicit CompositeManager(std::vector<SourceKey> keys, std::uint64_t expected_next = 0)
      : expected_next_(expected_next) {
    if (keys.empty()) throw ConfigError("a composite manager needs at least one input key");
    for (auto& k : keys) queues_.try_emplace(std::move(k));
  }

  AcceptResult accept(ChunkPtr chunk) {
    auto it = queues_.find(chunk->source);
    if (it == queues_.end()) {
      throw UnknownKeyError("chunk from unconfigured source " + chunk->source.str());
    }
    Queue& q = it->second;
    AcceptResult result;
    const std::uint64_t n = chunk->number;
    if (n < expected_next_ || (q.last_received && n <= *q.last_received)) {
      ++counters_.stale;
      result.status = AcceptStatus::stale;
      return result;
    }
    q.chunks.push_back(std::move(chunk));
    q.last_received = n;
    counters_.max_occupancy = std::max(counters_.max_occupancy, occupancy());

    // Dropping a head can expose a later one and raise the bound again.
    for (std::uint64_t bound = lowest_deliverable(); bound > expected_next_; bound = lowest_deliverable()) {
      result.discarded += fast_forward(bound);
    }

    result.completed = pop_complete();
    return result;
  }

  // Drops every buffered chunk numbered below `to`. No-op unless `to` moves
  // the expected number forward.
  std::size_t fast_forward(std::uint64_t to) {
    if (to <= expected_next_) return 0;
    std::size_t removed = 0;
    for (auto& [key, q] : queues_) {
      while (!q.chunks.empty() && q.chunks.front()->number < to) {
        q.chunks.pop_front();
        ++removed;
      }
    }
    expected_next_ = to;
    counters_.discarded += removed;
    return removed;
  }

  // Smallest number currently waiting for completion, if any.
  std::optional<std::uint64_t> oldest_pending() const {
    std::optional<std::uint64_t> oldest;
    for (const auto& [key, q] : queues_) {
      if (!q.chunks.empty()) {
        const auto n = q.chunks.front()->number;
        if (!oldest || n < *oldest) oldest = n;
      }
    }
    return oldest;
  }

  // Watchdog path: gives up on `number` as if a later chunk had proven it lost.
  std::size_t abandon(std::uint64_t number) {
    ++counters_.abandoned;
    return fast_forward(number + 1);
  }

  std::size_t occupancy() const {
    std::size_t total = 0;
    for (const auto& [key, q] : queues_) total += q.chunks.size();
    return total;
  }

  std::uint64_t expected_next() const { return expected_next_; }
  const BufferCounters& counters() const { return counters_; }

  std::vector<SourceKey> keys() const {
    std::vector<SourceKey> out;
    for (const auto& [key, q] : queues_) out.push_back(key);
    return out;
  }

  // Buffered numbers for one key, oldest first.
  std::vector<std::uint64_t> buffered(const SourceKey& key) const {
    std::vector<std::uint64_t> out;
    auto it = queues_.find(key);
    if (it == queues_.end()) throw UnknownKeyError("unconfigured source " + key.str());
    for (const auto& c : it->second.chunks) out.push_back(c->number);
    return out;
  }

 private:
  struct Queue {
    std::deque<ChunkPtr> chunks;
    std::optional<std::uint64_t> last_received;
  };

  std::uint64_t lowest_deliverable() const {
    std::uint64_t bound = expected_next_;
    for (const auto& [key, q] : queues_) {
      std::uint64_t b = expected_next_;
      if (!q.chunks.empty()) {
        b = q.chunks.front()->number;
      } else if (q.last_received) {
        b = *q.last_received + 1;
      }
      bound = std::max(bound, b);
    }
    return bound;
  }

  std::optional<CompletedSet> pop_complete() {
    std::optional<std::uint64_t> number;
    for (const auto& [key, q] : queues_) {
      if (q.chunks.empty()) return std::nullopt;
      const auto n = q.chunks.front()->number;
      if (number && *number != n) return std::nullopt;
      number = n;
    }
    CompletedSet set;
    set.number = *number;
    for (auto& [key, q] : queues_) {
      set.chunks.emplace(key, std::move(q.chunks.front()));
      q.chunks.pop_front();
    }
    expected_next_ = set.number + 1;
    ++counters_.completed;
    return set;
  }

  std::map<SourceKey, Queue> queues_;
  std::uint64_t expected_next_;
  BufferCounters counters_;
};

}  // namespace tfalign
