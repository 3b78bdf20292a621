#ifndef C2EDEN_PROTOCOL_TCP_HPP
#define C2EDEN_PROTOCOL_TCP_HPP

// Length-prefixed frames over TCP (POSIX sockets). Client ids are assigned in
// accept order and delivered in the Start frame.

#include <arpa/inet.h>
#include <fcntl.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cstring>
#include <functional>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "c2eden/error.hpp"
#include "c2eden/protocol/client.hpp"
#include "c2eden/protocol/message.hpp"
#include "c2eden/protocol/transport.hpp"

namespace c2eden::protocol {

using Millis = std::chrono::milliseconds;
using Clock = std::chrono::steady_clock;

namespace detail {

class Socket {
 public:
  Socket() = default;
  explicit Socket(int fd) : fd_(fd) {}
  Socket(Socket&& o) noexcept : fd_(std::exchange(o.fd_, -1)) {}
  Socket& operator=(Socket&& o) noexcept {
    if (this != &o) {
      reset();
      fd_ = std::exchange(o.fd_, -1);
    }
    return *this;
  }
  Socket(const Socket&) = delete;
  Socket& operator=(const Socket&) = delete;
  ~Socket() { reset(); }

  int get() const noexcept { return fd_; }
  explicit operator bool() const noexcept { return fd_ >= 0; }
  void reset() {
    if (fd_ >= 0) ::close(fd_);
    fd_ = -1;
  }

 private:
  int fd_ = -1;
};

inline std::string errno_text() { return std::strerror(errno); }

inline int remaining_ms(Clock::time_point deadline) {
  const auto left = std::chrono::duration_cast<Millis>(deadline - Clock::now()).count();
  return left < 0 ? 0 : static_cast<int>(left);
}

inline void set_nodelay(int fd) {
  int one = 1;
  ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
}

inline void write_all(int fd, std::span<const std::byte> bytes, Round round, ClientId peer) {
  std::size_t off = 0;
  while (off < bytes.size()) {
    const ssize_t n = ::send(fd, bytes.data() + off, bytes.size() - off, MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw ProtocolError("send failed: " + errno_text(), round, peer);
    }
    off += static_cast<std::size_t>(n);
  }
}

// Blocks until exactly `n` bytes arrived. Returns false on orderly EOF
// before the first byte.
inline bool read_exact(int fd, std::byte* out, std::size_t n, Clock::time_point deadline, Round round,
                       ClientId peer) {
  std::size_t got = 0;
  while (got < n) {
    pollfd p{fd, POLLIN, 0};
    const int ready = ::poll(&p, 1, remaining_ms(deadline));
    if (ready < 0) {
      if (errno == EINTR) continue;
      throw ProtocolError("poll failed: " + errno_text(), round, peer);
    }
    if (ready == 0) throw ProtocolError("timed out waiting for data", round, peer);
    const ssize_t r = ::recv(fd, out + got, n - got, 0);
    if (r < 0) {
      if (errno == EINTR) continue;
      throw ProtocolError("recv failed: " + errno_text(), round, peer);
    }
    if (r == 0) {
      if (got == 0) return false;
      throw ProtocolError("connection closed mid-frame", round, peer);
    }
    got += static_cast<std::size_t>(r);
  }
  return true;
}

inline std::optional<Message> read_frame(int fd, Clock::time_point deadline, Round round, ClientId peer) {
  std::vector<std::byte> frame(kPrefixBytes);
  if (!read_exact(fd, frame.data(), kPrefixBytes, deadline, round, peer)) return std::nullopt;
  const std::uint32_t len = read_length_prefix(frame);
  frame.resize(kPrefixBytes + len);
  if (!read_exact(fd, frame.data() + kPrefixBytes, len, deadline, round, peer))
    throw ProtocolError("connection closed mid-frame", round, peer);
  return wire_decode(frame);
}

inline sockaddr_in make_addr(const std::string& host, std::uint16_t port) {
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(port);
  if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1)
    throw Error("invalid IPv4 address '" + host + "'");
  return addr;
}

}  // namespace detail

class TcpListener {
 public:
  /// Binds and listens; port 0 picks an ephemeral port.
  explicit TcpListener(std::uint16_t port = 0, const std::string& host = "127.0.0.1") {
    sock_ = detail::Socket(::socket(AF_INET, SOCK_STREAM, 0));
    if (!sock_) throw Error("socket(): " + detail::errno_text());
    int one = 1;
    ::setsockopt(sock_.get(), SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
    sockaddr_in addr = detail::make_addr(host, port);
    if (::bind(sock_.get(), reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0)
      throw Error("bind " + host + ":" + std::to_string(port) + ": " + detail::errno_text());
    if (::listen(sock_.get(), 128) != 0) throw Error("listen: " + detail::errno_text());
    socklen_t len = sizeof addr;
    ::getsockname(sock_.get(), reinterpret_cast<sockaddr*>(&addr), &len);
    port_ = ntohs(addr.sin_port);
  }

  std::uint16_t port() const noexcept { return port_; }

  detail::Socket accept_one(Millis timeout) {
    const auto deadline = Clock::now() + timeout;
    for (;;) {
      pollfd p{sock_.get(), POLLIN, 0};
      const int ready = ::poll(&p, 1, detail::remaining_ms(deadline));
      if (ready < 0 && errno == EINTR) continue;
      if (ready <= 0) throw ProtocolError("timed out waiting for client connections", 0);
      detail::Socket c(::accept(sock_.get(), nullptr, nullptr));
      if (!c) {
        if (errno == EINTR) continue;
        throw Error("accept: " + detail::errno_text());
      }
      detail::set_nodelay(c.get());
      return c;
    }
  }

 private:
  detail::Socket sock_;
  std::uint16_t port_ = 0;
};

/// Server end over TCP. The constructor accepts exactly n connections.
class TcpServerTransport final : public ServerTransport {
 public:
  TcpServerTransport(TcpListener& listener, std::uint32_t n, Millis timeout = Millis(30000))
      : timeout_(timeout) {
    conns_.reserve(n);
    for (std::uint32_t i = 0; i < n; ++i) conns_.push_back(Conn{listener.accept_one(timeout), {}});
  }

  std::uint32_t clients() const override { return static_cast<std::uint32_t>(conns_.size()); }

  void send(ClientId to, const Message& m) override {
    if (to >= conns_.size()) throw ProtocolError("send to unknown client", 0, to);
    const auto bytes = wire_encode(m);
    detail::write_all(conns_[to].sock.get(), bytes, round_of(m), to);
  }

  void broadcast(const Message& m) override {
    const auto bytes = wire_encode(m);
    for (ClientId i = 0; i < clients(); ++i) detail::write_all(conns_[i].sock.get(), bytes, round_of(m), i);
  }

  Message receive(Round round) override {
    const auto deadline = Clock::now() + timeout_;
    for (;;) {
      for (std::size_t k = 0; k < conns_.size(); ++k) {
        const std::size_t i = (next_ + k) % conns_.size();
        if (auto m = take_frame(conns_[i], static_cast<ClientId>(i), round)) {
          next_ = (i + 1) % conns_.size();
          return std::move(*m);
        }
      }
      std::vector<pollfd> fds;
      fds.reserve(conns_.size());
      for (const auto& c : conns_) fds.push_back(pollfd{c.sock.get(), POLLIN, 0});
      const int ready = ::poll(fds.data(), fds.size(), detail::remaining_ms(deadline));
      if (ready < 0) {
        if (errno == EINTR) continue;
        throw ProtocolError("poll failed: " + detail::errno_text(), round);
      }
      if (ready == 0) throw ProtocolError("timed out waiting for client reports", round);
      for (std::size_t i = 0; i < conns_.size(); ++i) {
        if (fds[i].revents == 0) continue;
        std::byte buf[1 << 16];
        const ssize_t r = ::recv(conns_[i].sock.get(), buf, sizeof buf, 0);
        if (r < 0) {
          if (errno == EINTR) continue;
          throw ProtocolError("recv failed: " + detail::errno_text(), round, static_cast<ClientId>(i));
        }
        if (r == 0) throw ProtocolError("client connection closed", round, static_cast<ClientId>(i));
        conns_[i].buffer.insert(conns_[i].buffer.end(), buf, buf + r);
      }
    }
  }

 private:
  struct Conn {
    detail::Socket sock;
    std::vector<std::byte> buffer;
  };

  static Round round_of(const Message& m) {
    return std::visit(
        [](const auto& x) -> Round {
          if constexpr (requires { x.round; }) return x.round;
          else return 0;
        },
        m);
  }

  static std::optional<Message> take_frame(Conn& c, ClientId id, Round round) {
    if (c.buffer.size() < kPrefixBytes) return std::nullopt;
    std::uint32_t len = 0;
    try {
      len = read_length_prefix(c.buffer);
    } catch (const FrameError& e) {
      throw ProtocolError(std::string("bad frame: ") + e.what(), round, id);
    }
    const std::size_t total = kPrefixBytes + len;
    if (c.buffer.size() < total) return std::nullopt;
    Message m = wire_decode(std::span<const std::byte>(c.buffer.data(), total));
    c.buffer.erase(c.buffer.begin(), c.buffer.begin() + static_cast<std::ptrdiff_t>(total));
    return m;
  }

  std::vector<Conn> conns_;
  Millis timeout_;
  std::size_t next_ = 0;
};

using ShardLookup = std::function<const ClientShard&(ClientId)>;

/// Connects to the server, waits for Start to learn the assigned id, and
/// serves that shard until Stop. Connection attempts are retried until the
/// timeout expires.
inline void run_tcp_client(const std::string& host, std::uint16_t port, const ShardLookup& shard_for,
                           Millis timeout = Millis(30000)) {
  const auto connect_deadline = Clock::now() + timeout;
  detail::Socket sock;
  const sockaddr_in addr = detail::make_addr(host, port);
  for (;;) {
    sock = detail::Socket(::socket(AF_INET, SOCK_STREAM, 0));
    if (!sock) throw Error("socket(): " + detail::errno_text());
    if (::connect(sock.get(), reinterpret_cast<const sockaddr*>(&addr), sizeof addr) == 0) break;
    if (Clock::now() >= connect_deadline)
      throw Error("could not connect to " + host + ":" + std::to_string(port) + ": " + detail::errno_text());
    std::this_thread::sleep_for(Millis(20));
  }
  detail::set_nodelay(sock.get());

  std::optional<C2edenClient> client;
  Round round = 0;
  ClientId id = ProtocolError::kNoClient;
  for (;;) {
    auto m = detail::read_frame(sock.get(), Clock::now() + timeout, round, id);
    if (!m) throw ProtocolError("server closed the connection", round, id);
    if (const auto* s = std::get_if<Start>(&*m)) {
      id = s->assigned;
      client.emplace(shard_for(id));
    } else if (const auto* b = std::get_if<Broadcast>(&*m)) {
      round = b->round;
    }
    if (!client) throw ProtocolError("first frame was not Start", round);
    for (const auto& out : client->handle(*m)) detail::write_all(sock.get(), wire_encode(out), round, id);
    if (client->stopped()) return;
  }
}

}  // namespace c2eden::protocol

#endif  // C2EDEN_PROTOCOL_TCP_HPP
