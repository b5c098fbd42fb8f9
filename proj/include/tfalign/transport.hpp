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
#include <functional>
#include <memory>
#include <string>

#include <boost/asio.hpp>

#include "tfalign/errors.hpp"
#include "tfalign/wire.hpp"

namespace tfalign {

// One loopback TCP connection carrying wire frames in one direction. The
// sending side writes whole frames; the receiving side decodes the byte
// stream and hands every intact chunk to a callback. Frames that fail to
// decode are skipped and counted, which downstream looks like a lost chunk.
class TcpLink {
 public:
  explicit TcpLink(const std::string& address) : sender_(io_), receiver_(io_) {
    const auto colon = address.rfind(':');
    if (colon == std::string::npos) throw ConfigError("tcp address '" + address + "' lacks a port");
    const std::string host = address.substr(0, colon);
    unsigned long port = 0;
    try {
      port = std::stoul(address.substr(colon + 1));
    } catch (const std::exception&) {
      throw ConfigError("tcp address '" + address + "' has a bad port");
    }
    if (port > 65535) throw ConfigError("tcp address '" + address + "' has a bad port");
    boost::system::error_code ec;
    const auto ip = boost::asio::ip::make_address(host, ec);
    if (ec) throw ConfigError("tcp address '" + address + "' has a bad host");
    boost::asio::ip::tcp::acceptor acceptor(io_, {ip, static_cast<std::uint16_t>(port)});
    sender_.connect(acceptor.local_endpoint(), ec);
    if (ec) throw IoError("cannot connect to " + address + ": " + ec.message());
    acceptor.accept(receiver_, ec);
    if (ec) throw IoError("cannot accept on " + address + ": " + ec.message());
    sender_.set_option(boost::asio::ip::tcp::no_delay(true));
  }

  // Blocks until the frame is in the socket. Returns false once the link is
  // shut down.
  bool send(const wire::Bytes& frame) {
    boost::system::error_code ec;
    boost::asio::write(sender_, boost::asio::buffer(frame), ec);
    return !ec;
  }

  // Signals end of stream to the receiver.
  void finish() {
    boost::system::error_code ec;
    sender_.shutdown(boost::asio::ip::tcp::socket::shutdown_send, ec);
  }

  // Reads until end of stream or shutdown. `deliver` returning false stops
  // the loop early.
  void receive(const std::function<bool(DataChunk)>& deliver) {
    std::vector<std::uint8_t> buf(1 << 16);
    for (;;) {
      boost::system::error_code ec;
      const std::size_t n = receiver_.read_some(boost::asio::buffer(buf), ec);
      if (n > 0) {
        decoder_.feed(std::span<const std::uint8_t>(buf.data(), n));
        while (auto chunk = decoder_.next()) {
          if (!deliver(std::move(*chunk))) return;
        }
      }
      if (ec) return;
    }
  }

  // Unblocks both ends; used when a run aborts.
  void shutdown() {
    boost::system::error_code ec;
    sender_.shutdown(boost::asio::ip::tcp::socket::shutdown_both, ec);
    receiver_.shutdown(boost::asio::ip::tcp::socket::shutdown_both, ec);
  }

  const wire::StreamDecoder::Counters& counters() const { return decoder_.counters(); }

 private:
  boost::asio::io_context io_;
  boost::asio::ip::tcp::socket sender_;
  boost::asio::ip::tcp::socket receiver_;
  wire::StreamDecoder decoder_;
};

}  // namespace tfalign
