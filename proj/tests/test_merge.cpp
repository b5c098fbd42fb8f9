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

#include <random>
#include <set>
#include <vector>

#include "support.hpp"
#include "tfalign/composite.hpp"
#include "tfalign/merge.hpp"

namespace tfalign {
namespace {

using testing::make_chunk;
using testing::share;

const SourceKey kEnergy{"gammachirp", "E"};
const SourceKey kTract{"structure", "T"};

TEST(DecideContinuity, FollowsNumberingAndFlags) {
  const std::vector<Continuity> cont{Continuity::with_previous, Continuity::with_previous};
  const std::vector<Continuity> mixed{Continuity::with_previous, Continuity::discontinuous};
  EXPECT_EQ(decide_continuity(5, 4, cont), Continuity::with_previous);
  EXPECT_EQ(decide_continuity(5, 3, cont), Continuity::discontinuous);
  EXPECT_EQ(decide_continuity(5, std::nullopt, cont), Continuity::discontinuous);
  EXPECT_EQ(decide_continuity(5, 4, mixed), Continuity::discontinuous);
}

TEST(DecideContinuity, InvalidChunksNeverMerge) {
  const std::vector<Continuity> bad{Continuity::with_previous, Continuity::invalid};
  EXPECT_THROW(decide_continuity(1, 0, bad), InvalidInMergeError);
  EXPECT_THROW(decide_continuity(1, 0, std::span<const Continuity>{}), EmptyInputError);
}

TEST(ClassifyScenario, CoversTheThreeOperations) {
  EXPECT_EQ(classify_scenario(Continuity::with_previous, Continuity::with_previous),
            MergeScenario::regular_continuous);
  EXPECT_EQ(classify_scenario(Continuity::last, Continuity::with_previous), MergeScenario::regular_continuous);
  EXPECT_EQ(classify_scenario(Continuity::newfile, Continuity::discontinuous),
            MergeScenario::regular_discontinuous);
  EXPECT_EQ(classify_scenario(Continuity::with_previous, Continuity::discontinuous),
            MergeScenario::irregular_discontinuous);
  EXPECT_THROW(classify_scenario(Continuity::discontinuous, Continuity::with_previous), ProtocolError);
  EXPECT_THROW(classify_scenario(Continuity::invalid, Continuity::discontinuous), InvalidInMergeError);
}

TEST(MergeArray, RegularContinuousPrependsTheCarriedTail) {
  const Matrix previous = make_chunk(kEnergy, 0, 2, 10).payload.values;
  const Matrix current = make_chunk(kEnergy, 1, 2, 10, {}, Continuity::with_previous, 100).payload.values;
  const Matrix tail = previous.rightCols(3);
  const Matrix out = merge_array(MergeScenario::regular_continuous, &tail, current, {3, 0, 0});
  ASSERT_EQ(out.cols(), 10);
  EXPECT_TRUE((out.leftCols(3) == previous.rightCols(3)).all());
  EXPECT_TRUE((out.rightCols(7) == current.leftCols(7)).all());
  EXPECT_EQ(out(1, 3), 1100.0f);
}

TEST(MergeArray, RegularDiscontinuousWithoutDropsIsUnchanged) {
  const Matrix current = make_chunk(kTract, 0, 3, 12).payload.values;
  const Matrix out = merge_array(MergeScenario::regular_discontinuous, nullptr, current, {0, 0, 7});
  EXPECT_TRUE((out == current).all());
}

TEST(MergeArray, IrregularDiscontinuousKeepsTheCommonRange) {
  // merged d = 4, chunk p = 2, merged p = 3: keep columns [6, 11) of 12.
  const Matrix current = make_chunk(kEnergy, 3, 2, 12).payload.values;
  const DropCounts drops = drop_counts({3, 4, 0, 0}, {2, 1, 0, 0});
  EXPECT_EQ(drops.high, 1);
  EXPECT_EQ(drops.low_continuous, 6);
  const Matrix out = merge_array(MergeScenario::irregular_discontinuous, nullptr, current, drops);
  ASSERT_EQ(out.cols(), 5);
  EXPECT_EQ(out(0, 0), 6.0f);
  EXPECT_EQ(out(0, 4), 10.0f);
  EXPECT_EQ(out.rows(), 2);
}

TEST(MergeArray, ReportsEmptyResultsAndMissingTails) {
  const Matrix current = make_chunk(kEnergy, 3, 1, 5).payload.values;
  EXPECT_THROW(merge_array(MergeScenario::irregular_discontinuous, nullptr, current, {2, 0, 3}), EmptyResultError);
  EXPECT_THROW(merge_array(MergeScenario::regular_continuous, nullptr, current, {2, 0, 0}), MissingTailError);
  const Matrix short_tail = current.leftCols(1);
  EXPECT_THROW(merge_array(MergeScenario::regular_continuous, &short_tail, current, {2, 0, 0}), MissingTailError);
}

TEST(CompleteMerge, StartupThenContinuousMerge) {
  const AlignmentParams energy_params{0, 415, 0, 0};
  const AlignmentParams tract_params{40, 455, 3, 3};
  MergeState state;

  ChunkSet first{{kEnergy, share(make_chunk(kEnergy, 0, 8, 600 - 415, energy_params, Continuity::discontinuous))},
                 {kTract, share(make_chunk(kTract, 0, 8, 600 - 495, tract_params, Continuity::discontinuous))}};
  auto r0 = complete_merge(state, first, 0);
  EXPECT_EQ(r0.merged.continuity, Continuity::discontinuous);
  EXPECT_TRUE(r0.merged.gap);
  EXPECT_EQ(r0.merged.alignment, (AlignmentParams{40, 455, 3, 3}));
  EXPECT_EQ(r0.merged.time_length(), 600 - 495);
  EXPECT_EQ(r0.merged.inputs.at(kEnergy).scenario, MergeScenario::regular_discontinuous);
  EXPECT_EQ(r0.state.carried_tails.at(kEnergy).cols(), 40);
  EXPECT_EQ(r0.state.carried_tails.at(kTract).cols(), 0);

  ChunkSet second{{kEnergy, share(make_chunk(kEnergy, 1, 8, 600, energy_params, Continuity::last))},
                  {kTract, share(make_chunk(kTract, 1, 8, 600, tract_params, Continuity::with_previous))}};
  auto r1 = complete_merge(r0.state, second, 1);
  EXPECT_EQ(r1.merged.continuity, Continuity::last);
  EXPECT_FALSE(r1.merged.gap);
  EXPECT_EQ(r1.merged.time_length(), 600);
  EXPECT_EQ(r1.merged.inputs.at(kTract).scenario, MergeScenario::regular_continuous);
}

TEST(CompleteMerge, SubtypeOfTheMergedChunk) {
  const AlignmentParams a{};
  ChunkSet set{{kEnergy, share(make_chunk(kEnergy, 0, 1, 20, a, Continuity::calibration_chunk))}};
  EXPECT_EQ(complete_merge({}, set, 0).merged.continuity, Continuity::calibration_chunk);
  set = {{kEnergy, share(make_chunk(kEnergy, 4, 1, 20, a, Continuity::newfile))}};
  EXPECT_EQ(complete_merge({}, set, 4).merged.continuity, Continuity::newfile);
}

TEST(CompleteMerge, RejectsMismatchedNumbers) {
  ChunkSet set{{kEnergy, share(make_chunk(kEnergy, 2, 1, 20))}};
  EXPECT_THROW(complete_merge({}, set, 3), ProtocolError);
  EXPECT_THROW(complete_merge({}, {}, 3), EmptyInputError);
}

TEST(CompleteMerge, ContinuousMergeWithoutTailIsMissingTail) {
  MergeState state;
  state.last_completed = 1;
  ChunkSet set{{kEnergy, share(make_chunk(kEnergy, 2, 1, 20, {1, 0, 0, 0}))},
               {kTract, share(make_chunk(kTract, 2, 1, 20, {2, 0, 0, 0}))}};
  EXPECT_THROW(complete_merge(state, set, 2), MissingTailError);
}

// Two producers publish windows of the same signal X with different
// alignment. Chunk n spans [n e, (n + 1) e); a continuous chunk covers
// [a - p, b - p) and a discontinuous one [a + d, b - p). Whatever reaches
// the merge, every merged array must equal X over [a + d_M, b - p_M) for a
// discontinuous merge and [a - p_M, b - p_M) for a continuous one.
struct Path {
  SourceKey key;
  AlignmentParams alignment;
};

Matrix window(const Matrix& x, Eigen::Index from, Eigen::Index to) { return x.middleCols(from, to - from); }

void run_oracle(std::uint64_t seed, bool faults) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> small(0, 12);
  std::bernoulli_distribution lose(faults ? 0.12 : 0.0);
  std::bernoulli_distribution overflow(faults ? 0.06 : 0.0);

  const std::vector<Path> paths{{kEnergy, {0, small(rng), 0, 0}},
                                {kTract, {small(rng), small(rng), 0, 0}},
                                {{"other", "F"}, {small(rng), small(rng), 0, 0}}};
  std::vector<AlignmentParams> params;
  for (const auto& p : paths) params.push_back(p.alignment);
  const AlignmentParams m = merge_params(params);
  const Eigen::Index e = m.time_margin() + 1 + std::uniform_int_distribution<Eigen::Index>(0, 20)(rng);
  const std::uint64_t count = 60;
  const Eigen::Index total = e * static_cast<Eigen::Index>(count);

  Matrix x(2, total + e);  // spare columns stand in for the future beyond the last chunk
  std::normal_distribution<float> normal;
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = normal(rng);

  // Upstream overflow: the chunk is never produced and its successor is
  // flagged discontinuous on every path.
  std::set<std::uint64_t> missing;
  for (std::uint64_t n = 1; n < count; ++n) {
    if (overflow(rng)) missing.insert(n);
  }

  std::vector<std::vector<ChunkPtr>> streams(paths.size());
  for (std::size_t k = 0; k < paths.size(); ++k) {
    const auto& [key, a] = paths[k];
    for (std::uint64_t n = 0; n < count; ++n) {
      if (missing.count(n)) continue;
      const bool disc = n == 0 || missing.count(n - 1);
      const Eigen::Index begin = static_cast<Eigen::Index>(n) * e;
      const Eigen::Index end = begin + e;
      DataChunk c;
      c.number = n;
      c.source = key;
      c.sample_rate = 100.0;
      c.alignment = a;
      c.continuity = disc ? Continuity::discontinuous : Continuity::with_previous;
      c.payload.values = disc ? window(x, begin + a.dropped_after_discontinuity, end - a.included_past)
                              : window(x, begin - a.included_past, end - a.included_past);
      if (!lose(rng)) streams[k].push_back(share(std::move(c)));
    }
  }

  std::vector<SourceKey> keys;
  for (const auto& p : paths) keys.push_back(p.key);
  CompositeManager manager(keys);
  MergeState state;
  std::vector<std::size_t> next(paths.size(), 0);
  std::uint64_t completed = 0;
  std::optional<std::uint64_t> previous;
  for (;;) {
    std::vector<std::size_t> ready;
    for (std::size_t k = 0; k < paths.size(); ++k) {
      if (next[k] < streams[k].size()) ready.push_back(k);
    }
    if (ready.empty()) break;
    const std::size_t k = ready[std::uniform_int_distribution<std::size_t>(0, ready.size() - 1)(rng)];
    // A chunk whose number another path has already skipped comes back
    // stale; it could never complete anyway.
    auto result = manager.accept(streams[k][next[k]++]);
    if (!faults) {
      ASSERT_EQ(result.status, AcceptStatus::accepted);
    }
    if (!result.completed) continue;

    const std::uint64_t n = result.completed->number;
    if (previous) {
      ASSERT_GT(n, *previous);
    }
    auto merged = complete_merge(state, result.completed->chunks, n);
    state = std::move(merged.state);
    previous = n;
    ++completed;

    const Eigen::Index begin = static_cast<Eigen::Index>(n) * e;
    const Eigen::Index end = begin + e;
    const bool disc = is_discontinuous_subtype(merged.merged.continuity);
    const Matrix expected = disc ? window(x, begin + m.dropped_after_discontinuity, end - m.included_past)
                                 : window(x, begin - m.included_past, end - m.included_past);
    for (const auto& [key, in] : merged.merged.inputs) {
      ASSERT_EQ(in.payload.values.cols(), expected.cols()) << "chunk " << n << " of " << key.str();
      ASSERT_TRUE((in.payload.values == expected).all()) << "chunk " << n << " of " << key.str();
    }
  }
  if (!faults) {
    EXPECT_EQ(completed, count);
  }
}

TEST(MergeOracle, FaultFreeMergesReproduceTheSignal) {
  for (std::uint64_t seed = 1; seed <= 40; ++seed) {
    SCOPED_TRACE(seed);
    run_oracle(seed, false);
  }
}

TEST(MergeOracle, MergesAfterLossAndOverflowReproduceTheSignal) {
  for (std::uint64_t seed = 100; seed <= 300; ++seed) {
    SCOPED_TRACE(seed);
    run_oracle(seed, true);
  }
}

// Concatenating a fault-free merged stream gives X[d_M, T - p_M) exactly.
TEST(MergeOracle, ConcatenationHasNoGapsOrDuplicates) {
  const AlignmentParams a{0, 5, 0, 0};
  const AlignmentParams b{3, 9, 0, 0};
  const Eigen::Index e = 20;
  const std::uint64_t count = 7;
  Matrix x(1, e * static_cast<Eigen::Index>(count) + e);
  for (Eigen::Index i = 0; i < x.cols(); ++i) x(0, i) = static_cast<Sample>(i);

  MergeState state;
  Matrix joined(1, 0);
  for (std::uint64_t n = 0; n < count; ++n) {
    const Eigen::Index begin = static_cast<Eigen::Index>(n) * e;
    auto chunk = [&](const SourceKey& key, const AlignmentParams& p) {
      DataChunk c;
      c.number = n;
      c.source = key;
      c.sample_rate = 1.0;
      c.alignment = p;
      c.continuity = n == 0 ? Continuity::newfile : Continuity::with_previous;
      c.payload.values = n == 0 ? window(x, begin + p.dropped_after_discontinuity, begin + e - p.included_past)
                                : window(x, begin - p.included_past, begin + e - p.included_past);
      return share(std::move(c));
    };
    auto r = complete_merge(state, {{kEnergy, chunk(kEnergy, a)}, {kTract, chunk(kTract, b)}}, n);
    state = r.state;
    const Matrix& part = r.merged.inputs.at(kEnergy).payload.values;
    Matrix grown(1, joined.cols() + part.cols());
    grown << joined, part;
    joined = grown;
  }
  const Eigen::Index expected = e * static_cast<Eigen::Index>(count) - 9 - 3;
  ASSERT_EQ(joined.cols(), expected);
  for (Eigen::Index i = 0; i < joined.cols(); ++i) EXPECT_EQ(joined(0, i), static_cast<Sample>(9 + i));
}

}  // namespace
}  // namespace tfalign
