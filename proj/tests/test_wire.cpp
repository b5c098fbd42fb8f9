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
#include <thread>

#include "support.hpp"
#include "tfalign/transport.hpp"
#include "tfalign/wire.hpp"

namespace tfalign {
namespace {

using testing::identical;
using testing::make_chunk;
using testing::random_chunk;

DataChunk sample_chunk() {
  DataChunk c = make_chunk({"structure", "T"}, 42, 3, 5, {40, 455, 3, 3}, Continuity::last);
  c.channel_freqs = {100.0, 200.0, 400.0};
  c.sample_rate = 4000.0;
  return c;
}

TEST(WireCodec, RoundTripIsBitExact) {
  const DataChunk c = sample_chunk();
  const wire::Bytes frame = wire::encode(c);
  EXPECT_TRUE(identical(wire::decode(frame), c));
  EXPECT_EQ(wire::frame_size(frame), frame.size());
}

TEST(WireCodec, RandomChunksRoundTrip) {
  std::mt19937_64 rng(1);
  for (int i = 0; i < 2000; ++i) {
    const DataChunk c = random_chunk(rng);
    ASSERT_TRUE(identical(wire::decode(wire::encode(c)), c)) << "case " << i;
  }
}

TEST(WireCodec, FrameLayoutStartsWithMagicAndVersion) {
  const wire::Bytes frame = wire::encode(sample_chunk());
  EXPECT_EQ(frame[0], 'T');
  EXPECT_EQ(frame[3], 'C');
  EXPECT_EQ(frame[4], 1);
  EXPECT_EQ(frame[5], 0);
}

TEST(WireCodec, EverySingleByteCorruptionIsDetected) {
  const wire::Bytes frame = wire::encode(sample_chunk());
  for (std::size_t i = 0; i < frame.size(); ++i) {
    for (std::uint8_t flip : {0x01, 0x80, 0xff}) {
      wire::Bytes bad = frame;
      bad[i] ^= flip;
      EXPECT_THROW(wire::decode(bad), Error) << "byte " << i << " flip " << int(flip);
    }
  }
}

TEST(WireCodec, PayloadCorruptionIsAChecksumError) {
  wire::Bytes frame = wire::encode(sample_chunk());
  frame[frame.size() - 10] ^= 0x10;
  EXPECT_THROW(wire::decode(frame), ChecksumError);
}

TEST(WireCodec, VersionAndTruncation) {
  wire::Bytes frame = wire::encode(sample_chunk());
  wire::Bytes newer = frame;
  newer[4] = 2;
  EXPECT_THROW(wire::decode(newer), VersionError);
  for (std::size_t cut : {std::size_t{3}, std::size_t{12}, frame.size() - 1}) {
    EXPECT_THROW(wire::decode(std::span(frame).first(cut)), TruncatedFrameError) << cut;
  }
  frame.push_back(0);
  EXPECT_THROW(wire::decode(frame), FrameError);
}

TEST(WireCodec, UnknownContinuityIsRejected) {
  DataChunk c = sample_chunk();
  c.continuity = static_cast<Continuity>(7);
  EXPECT_THROW(wire::decode(wire::encode(c)), FrameError);
}

TEST(StreamDecoder, ReassemblesFramesFromArbitraryPieces) {
  std::mt19937_64 rng(5);
  std::vector<DataChunk> sent;
  wire::Bytes stream;
  for (int i = 0; i < 50; ++i) {
    sent.push_back(random_chunk(rng));
    const auto f = wire::encode(sent.back());
    stream.insert(stream.end(), f.begin(), f.end());
  }
  wire::StreamDecoder dec;
  std::vector<DataChunk> got;
  std::size_t pos = 0;
  while (pos < stream.size()) {
    const std::size_t n = std::min<std::size_t>(stream.size() - pos, std::uniform_int_distribution<std::size_t>(1, 300)(rng));
    dec.feed(std::span(stream).subspan(pos, n));
    pos += n;
    while (auto c = dec.next()) got.push_back(std::move(*c));
  }
  ASSERT_EQ(got.size(), sent.size());
  for (std::size_t i = 0; i < sent.size(); ++i) EXPECT_TRUE(identical(got[i], sent[i]));
  EXPECT_EQ(dec.pending(), 0u);
}

TEST(StreamDecoder, SkipsACorruptFrameAndResynchronizes) {
  const DataChunk a = make_chunk({"a", "x"}, 1, 2, 8);
  const DataChunk b = make_chunk({"a", "x"}, 2, 2, 8);
  const DataChunk c = make_chunk({"a", "x"}, 3, 2, 8);
  wire::Bytes stream;
  for (const auto* chunk : {&a, &b, &c}) {
    const auto f = wire::encode(*chunk);
    stream.insert(stream.end(), f.begin(), f.end());
  }
  const std::size_t second = wire::encode(a).size();
  stream[second + 40] ^= 0x55;  // inside b's payload
  stream.insert(stream.begin(), {0x00, 'T', 'F'});  // leading garbage

  wire::StreamDecoder dec;
  dec.feed(stream);
  std::vector<std::uint64_t> numbers;
  while (auto chunk = dec.next()) numbers.push_back(chunk->number);
  EXPECT_EQ(numbers, (std::vector<std::uint64_t>{1, 3}));
  EXPECT_EQ(dec.counters().checksum_errors, 1u);
  EXPECT_GE(dec.counters().skipped_bytes, 3u);
}

TEST(TcpLink, CarriesChunksInOrderOverLoopback) {
  TcpLink link("127.0.0.1:0");
  std::mt19937_64 rng(9);
  std::vector<DataChunk> sent;
  for (int i = 0; i < 200; ++i) sent.push_back(random_chunk(rng));
  std::vector<DataChunk> got;
  std::thread reader([&] { link.receive([&](DataChunk c) { got.push_back(std::move(c)); return true; }); });
  for (const auto& c : sent) ASSERT_TRUE(link.send(wire::encode(c)));
  link.finish();
  reader.join();
  ASSERT_EQ(got.size(), sent.size());
  for (std::size_t i = 0; i < sent.size(); ++i) EXPECT_TRUE(identical(got[i], sent[i]));
}

TEST(TcpLink, RejectsMalformedAddresses) {
  EXPECT_THROW(TcpLink("127.0.0.1"), ConfigError);
  EXPECT_THROW(TcpLink("127.0.0.1:99999"), ConfigError);
  EXPECT_THROW(TcpLink("nowhere:1"), ConfigError);
}

}  // namespace
}  // namespace tfalign
