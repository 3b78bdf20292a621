#ifndef C2EDEN_PROTOCOL_MESSAGE_HPP
#define C2EDEN_PROTOCOL_MESSAGE_HPP

// Wire messages and their binary framing.
//
// Frame layout (all integers little-endian):
//
//   u32 length      bytes after this field = 9 + 8 * payload_count
//   u8  tag         1 Broadcast, 2 ClientReport, 3 WarmupReport, 4 Start, 5 Stop
//   u32 round
//   u32 client id   sender id for reports; 0 for server messages, except
//                   Start, which carries the id assigned to the recipient
//   f64 payload[]   IEEE-754 binary64
//
// Payloads: Broadcast x; ClientReport g followed by v (2d values);
// WarmupReport v; Start (K, M, d, n); Stop none.

#include <bit>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <type_traits>
#include <variant>
#include <vector>

#include "c2eden/error.hpp"
#include "c2eden/numkit.hpp"

namespace c2eden::protocol {

using ClientId = std::uint32_t;
using Round = std::uint32_t;

struct Broadcast {
  Round round = 0;
  Vec x;
};

struct ClientReport {
  ClientId client = 0;
  Round round = 0;
  Vec g;
  Vec v;
};

struct WarmupReport {
  ClientId client = 0;
  Round round = 0;
  Vec v;
};

struct Start {
  std::uint32_t K = 0;
  double M = 0.0;
  std::uint32_t d = 0;
  std::uint32_t n = 0;
  ClientId assigned = 0;
};

struct Stop {
  Round round = 0;
};

using Message = std::variant<Broadcast, ClientReport, WarmupReport, Start, Stop>;

enum class Tag : std::uint8_t {
  kBroadcast = 1,
  kClientReport = 2,
  kWarmupReport = 3,
  kStart = 4,
  kStop = 5,
};

inline constexpr std::size_t kHeaderBytes = 9;     // tag + round + client
inline constexpr std::size_t kPrefixBytes = 4;     // length field
inline constexpr std::uint64_t kMaxFrameBytes = std::uint64_t{1} << 31;

/// Number of payload scalars carried by a message.
inline std::size_t payload_scalars(const Message& m) {
  return std::visit(
      [](const auto& msg) -> std::size_t {
        using T = std::decay_t<decltype(msg)>;
        if constexpr (std::is_same_v<T, Broadcast>) return static_cast<std::size_t>(msg.x.size());
        else if constexpr (std::is_same_v<T, ClientReport>)
          return static_cast<std::size_t>(msg.g.size() + msg.v.size());
        else if constexpr (std::is_same_v<T, WarmupReport>) return static_cast<std::size_t>(msg.v.size());
        else if constexpr (std::is_same_v<T, Start>) return 4;
        else return 0;
      },
      m);
}

/// Total encoded size including the length prefix.
inline std::size_t frame_bytes(const Message& m) {
  return kPrefixBytes + kHeaderBytes + 8 * payload_scalars(m);
}

namespace detail {

inline void put_u32(std::vector<std::byte>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::byte>((v >> (8 * i)) & 0xFFu));
}

inline void put_f64(std::vector<std::byte>& out, double v) {
  const auto bits = std::bit_cast<std::uint64_t>(v);
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::byte>((bits >> (8 * i)) & 0xFFu));
}

inline std::uint32_t get_u32(std::span<const std::byte> in, std::size_t at) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= std::uint32_t(std::to_integer<std::uint8_t>(in[at + i])) << (8 * i);
  return v;
}

inline double get_f64(std::span<const std::byte> in, std::size_t at) {
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= std::uint64_t(std::to_integer<std::uint8_t>(in[at + i])) << (8 * i);
  return std::bit_cast<double>(bits);
}

inline void put_vec(std::vector<std::byte>& out, const Vec& v) {
  for (Index i = 0; i < v.size(); ++i) put_f64(out, v[i]);
}

}  // namespace detail

inline std::vector<std::byte> wire_encode(const Message& m) {
  const std::uint64_t body = kHeaderBytes + 8 * std::uint64_t{payload_scalars(m)};
  if (body + kPrefixBytes > kMaxFrameBytes) throw FrameError("frame exceeds 2^31 bytes");

  std::vector<std::byte> out;
  out.reserve(static_cast<std::size_t>(body + kPrefixBytes));
  detail::put_u32(out, static_cast<std::uint32_t>(body));

  auto header = [&](Tag tag, Round round, ClientId client) {
    out.push_back(static_cast<std::byte>(tag));
    detail::put_u32(out, round);
    detail::put_u32(out, client);
  };

  std::visit(
      [&](const auto& msg) {
        using T = std::decay_t<decltype(msg)>;
        if constexpr (std::is_same_v<T, Broadcast>) {
          header(Tag::kBroadcast, msg.round, 0);
          detail::put_vec(out, msg.x);
        } else if constexpr (std::is_same_v<T, ClientReport>) {
          if (msg.g.size() != msg.v.size())
            throw FrameError("ClientReport: g and v lengths differ");
          header(Tag::kClientReport, msg.round, msg.client);
          detail::put_vec(out, msg.g);
          detail::put_vec(out, msg.v);
        } else if constexpr (std::is_same_v<T, WarmupReport>) {
          header(Tag::kWarmupReport, msg.round, msg.client);
          detail::put_vec(out, msg.v);
        } else if constexpr (std::is_same_v<T, Start>) {
          header(Tag::kStart, 0, msg.assigned);
          detail::put_f64(out, static_cast<double>(msg.K));
          detail::put_f64(out, msg.M);
          detail::put_f64(out, static_cast<double>(msg.d));
          detail::put_f64(out, static_cast<double>(msg.n));
        } else {
          header(Tag::kStop, msg.round, 0);
        }
      },
      m);
  return out;
}

/// Body length announced by a 4-byte prefix; validates the bound.
inline std::uint32_t read_length_prefix(std::span<const std::byte> prefix) {
  if (prefix.size() < kPrefixBytes) throw FrameError("truncated length prefix");
  const std::uint32_t len = detail::get_u32(prefix, 0);
  if (len < kHeaderBytes) throw FrameError("frame body shorter than header");
  if (std::uint64_t{len} + kPrefixBytes > kMaxFrameBytes) throw FrameError("frame exceeds 2^31 bytes");
  if ((len - kHeaderBytes) % 8 != 0) throw FrameError("payload is not a whole number of doubles");
  return len;
}

/// Decodes exactly one complete frame (prefix included).
inline Message wire_decode(std::span<const std::byte> frame) {
  const std::uint32_t len = read_length_prefix(frame);
  if (frame.size() != kPrefixBytes + std::size_t{len})
    throw FrameError("frame size " + std::to_string(frame.size()) + " does not match length prefix " +
                     std::to_string(kPrefixBytes + std::size_t{len}));
  const auto tag = std::to_integer<std::uint8_t>(frame[4]);
  const Round round = detail::get_u32(frame, 5);
  const ClientId client = detail::get_u32(frame, 9);
  const std::size_t count = (len - kHeaderBytes) / 8;
  constexpr std::size_t base = kPrefixBytes + kHeaderBytes;

  auto read_vec = [&](std::size_t first, std::size_t n) {
    Vec v(static_cast<Index>(n));
    for (std::size_t i = 0; i < n; ++i) v[static_cast<Index>(i)] = detail::get_f64(frame, base + 8 * (first + i));
    return v;
  };

  switch (static_cast<Tag>(tag)) {
    case Tag::kBroadcast:
      return Broadcast{round, read_vec(0, count)};
    case Tag::kClientReport:
      if (count % 2 != 0) throw FrameError("ClientReport payload has odd length");
      return ClientReport{client, round, read_vec(0, count / 2), read_vec(count / 2, count / 2)};
    case Tag::kWarmupReport:
      return WarmupReport{client, round, read_vec(0, count)};
    case Tag::kStart: {
      if (count != 4) throw FrameError("Start payload must hold 4 values");
      const Vec p = read_vec(0, 4);
      return Start{static_cast<std::uint32_t>(p[0]), p[1], static_cast<std::uint32_t>(p[2]),
                   static_cast<std::uint32_t>(p[3]), client};
    }
    case Tag::kStop:
      if (count != 0) throw FrameError("Stop carries no payload");
      return Stop{round};
  }
  throw FrameError("unknown message tag " + std::to_string(tag));
}

inline bool bit_equal(const Vec& a, const Vec& b) {
  if (a.size() != b.size()) return false;
  for (Index i = 0; i < a.size(); ++i)
    if (std::bit_cast<std::uint64_t>(a[i]) != std::bit_cast<std::uint64_t>(b[i])) return false;
  return true;
}

/// Bitwise message equality (NaN payloads compare by bit pattern).
inline bool bit_equal(const Message& a, const Message& b) {
  if (a.index() != b.index()) return false;
  return std::visit(
      [&](const auto& x) {
        using T = std::decay_t<decltype(x)>;
        const auto& y = std::get<T>(b);
        if constexpr (std::is_same_v<T, Broadcast>) return x.round == y.round && bit_equal(x.x, y.x);
        else if constexpr (std::is_same_v<T, ClientReport>)
          return x.client == y.client && x.round == y.round && bit_equal(x.g, y.g) && bit_equal(x.v, y.v);
        else if constexpr (std::is_same_v<T, WarmupReport>)
          return x.client == y.client && x.round == y.round && bit_equal(x.v, y.v);
        else if constexpr (std::is_same_v<T, Start>)
          return x.K == y.K && std::bit_cast<std::uint64_t>(x.M) == std::bit_cast<std::uint64_t>(y.M) &&
                 x.d == y.d && x.n == y.n && x.assigned == y.assigned;
        else return x.round == y.round;
      },
      a);
}

}  // namespace c2eden::protocol

#endif  // C2EDEN_PROTOCOL_MESSAGE_HPP
