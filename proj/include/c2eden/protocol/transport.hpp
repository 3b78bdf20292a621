#ifndef C2EDEN_PROTOCOL_TRANSPORT_HPP
#define C2EDEN_PROTOCOL_TRANSPORT_HPP

#include <cstdint>
#include <deque>
#include <span>
#include <vector>

#include "c2eden/error.hpp"
#include "c2eden/protocol/client.hpp"
#include "c2eden/protocol/message.hpp"
#include "c2eden/rng.hpp"

namespace c2eden::protocol {

/// Server end of a transport. Delivery is exactly-once; arrival order across
/// clients is unspecified.
class ServerTransport {
 public:
  virtual ~ServerTransport() = default;

  virtual std::uint32_t clients() const = 0;
  virtual void send(ClientId to, const Message& m) = 0;
  virtual void broadcast(const Message& m) {
    for (ClientId i = 0; i < clients(); ++i) send(i, m);
  }
  /// Next message from any client. `round` is only used for diagnostics.
  virtual Message receive(Round round) = 0;
};

struct InProcessOptions {
  // Hand messages to the server in a seeded random order instead of FIFO.
  bool shuffle_arrivals = false;
  std::uint64_t seed = 0;
};

/// Runs the clients synchronously inside the server's thread. Every message
/// still goes through wire_encode/wire_decode.
class InProcessTransport final : public ServerTransport {
 public:
  explicit InProcessTransport(std::span<const ClientShard> shards, InProcessOptions opts = {})
      : rng_(opts.seed), shuffle_(opts.shuffle_arrivals) {
    clients_.reserve(shards.size());
    for (const auto& s : shards) clients_.emplace_back(s);
  }

  std::uint32_t clients() const override { return static_cast<std::uint32_t>(clients_.size()); }

  void send(ClientId to, const Message& m) override {
    if (to >= clients_.size()) throw ProtocolError("send to unknown client", 0, to);
    auto replies = clients_[to].handle(through_wire(m));
    for (auto& r : replies) inbox_.push_back(through_wire(r));
  }

  Message receive(Round round) override {
    if (inbox_.empty()) throw ProtocolError("no pending client messages (client dropped?)", round);
    std::size_t pick = 0;
    if (shuffle_) pick = static_cast<std::size_t>(rng_.below(inbox_.size()));
    Message m = std::move(inbox_[pick]);
    inbox_.erase(inbox_.begin() + static_cast<std::ptrdiff_t>(pick));
    return m;
  }

  const C2edenClient& client(ClientId i) const { return clients_.at(i); }

 private:
  static Message through_wire(const Message& m) { return wire_decode(wire_encode(m)); }

  std::vector<C2edenClient> clients_;
  std::deque<Message> inbox_;
  SplitMix64 rng_;
  bool shuffle_;
};

}  // namespace c2eden::protocol

#endif  // C2EDEN_PROTOCOL_TRANSPORT_HPP
