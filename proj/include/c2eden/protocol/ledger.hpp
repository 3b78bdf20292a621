#ifndef C2EDEN_PROTOCOL_LEDGER_HPP
#define C2EDEN_PROTOCOL_LEDGER_HPP

#include <cstdint>
#include <vector>

namespace c2eden::protocol {

struct RoundCounts {
  std::uint64_t up_scalars = 0;    // client -> server, summed over clients
  std::uint64_t down_scalars = 0;  // server -> clients, a broadcast counts once
  std::uint64_t up_messages = 0;
  std::uint64_t down_messages = 0;  // per recipient
  std::uint64_t up_bytes = 0;
  std::uint64_t down_bytes = 0;     // per recipient, i.e. what crosses the wire

  RoundCounts& operator+=(const RoundCounts& o) {
    up_scalars += o.up_scalars;
    down_scalars += o.down_scalars;
    up_messages += o.up_messages;
    down_messages += o.down_messages;
    up_bytes += o.up_bytes;
    down_bytes += o.down_bytes;
    return *this;
  }
  friend bool operator==(const RoundCounts&, const RoundCounts&) = default;
};

/// Exact per-round communication counts. Setup and control traffic (Start,
/// the initial iterate, Stop) is kept apart from the per-round counts.
class CommLedger {
 public:
  void record_up(std::uint32_t round, std::uint64_t scalars, std::uint64_t bytes) {
    auto& r = at(round);
    r.up_scalars += scalars;
    r.up_messages += 1;
    r.up_bytes += bytes;
    total_.up_scalars += scalars;
    total_.up_messages += 1;
    total_.up_bytes += bytes;
  }

  /// A broadcast of `scalars` values delivered to `recipients` clients.
  void record_broadcast(std::uint32_t round, std::uint64_t scalars, std::uint64_t frame_bytes,
                        std::uint64_t recipients) {
    auto& r = at(round);
    r.down_scalars += scalars;
    r.down_messages += recipients;
    r.down_bytes += frame_bytes * recipients;
    total_.down_scalars += scalars;
    total_.down_messages += recipients;
    total_.down_bytes += frame_bytes * recipients;
  }

  void record_setup_down(std::uint64_t scalars, std::uint64_t bytes) {
    setup_.down_scalars += scalars;
    setup_.down_messages += 1;
    setup_.down_bytes += bytes;
  }

  const RoundCounts& total() const noexcept { return total_; }
  const RoundCounts& setup() const noexcept { return setup_; }
  const std::vector<RoundCounts>& per_round() const noexcept { return rounds_; }

  /// Sum over rounds [0, round_end).
  RoundCounts cumulative(std::uint32_t round_end) const {
    RoundCounts acc;
    for (std::uint32_t k = 0; k < round_end && k < rounds_.size(); ++k) acc += rounds_[k];
    return acc;
  }

 private:
  RoundCounts& at(std::uint32_t round) {
    if (rounds_.size() <= round) rounds_.resize(std::size_t{round} + 1);
    return rounds_[round];
  }

  std::vector<RoundCounts> rounds_;
  RoundCounts total_;
  RoundCounts setup_;
};

}  // namespace c2eden::protocol

#endif  // C2EDEN_PROTOCOL_LEDGER_HPP
