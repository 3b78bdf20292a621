#ifndef C2EDEN_ALGORITHMS_C2EDEN_RUN_HPP
#define C2EDEN_ALGORITHMS_C2EDEN_RUN_HPP

#include <exception>
#include <functional>
#include <memory>
#include <mutex>
#include <span>
#include <thread>
#include <vector>

#include "c2eden/algorithms/recorder.hpp"
#include "c2eden/algorithms/trace.hpp"
#include "c2eden/error.hpp"
#include "c2eden/objective.hpp"
#include "c2eden/protocol/server.hpp"
#include "c2eden/protocol/tcp.hpp"
#include "c2eden/protocol/transport.hpp"

namespace c2eden {

/// Starts n TCP clients that will connect to 127.0.0.1:port. Returns a
/// function that waits for all of them and rethrows the first client failure.
using ClientLauncher = std::function<std::function<void()>(std::uint16_t port)>;

/// Default launcher: one thread per shard inside this process.
inline ClientLauncher thread_launcher(std::span<const ClientShard> shards) {
  return [shards](std::uint16_t port) -> std::function<void()> {
    struct State {
      std::vector<std::thread> threads;
      std::mutex mu;
      std::exception_ptr first;
    };
    auto st = std::make_shared<State>();
    for (std::size_t i = 0; i < shards.size(); ++i) {
      st->threads.emplace_back([st, shards, port] {
        try {
          protocol::run_tcp_client("127.0.0.1", port, [shards](protocol::ClientId id) -> const ClientShard& {
            if (id >= shards.size()) throw ProtocolError("assigned id out of range", 0, id);
            return shards[id];
          });
        } catch (...) {
          std::lock_guard lock(st->mu);
          if (!st->first) st->first = std::current_exception();
        }
      });
    }
    return [st] {
      for (auto& t : st->threads)
        if (t.joinable()) t.join();
      if (st->first) std::rethrow_exception(st->first);
    };
  };
}

namespace detail {

class RecordingObserver final : public protocol::RoundObserver {
 public:
  RecordingObserver(TraceRecorder& rec, protocol::RoundObserver* extra) : rec_(&rec), extra_(extra) {}

  void on_iterate(protocol::Round k, const Vec& x, const protocol::CommLedger& ledger) override {
    const auto c = ledger.cumulative(k);
    rec_->record(k, x, c.up_scalars, c.down_scalars);
    if (extra_) extra_->on_iterate(k, x, ledger);
  }
  void on_step(const protocol::StepEvent& e) override {
    if (extra_) extra_->on_step(e);
  }

 private:
  TraceRecorder* rec_;
  protocol::RoundObserver* extra_;
};

}  // namespace detail

/// C2EDEN over the configured transport. `extra` sees every protocol event;
/// `launcher` starts the TCP clients (threads by default).
inline IterationTrace run_c2eden(const RunConfig& cfg, std::span<const ClientShard> shards,
                                 protocol::RoundObserver* extra = nullptr, ClientLauncher launcher = {}) {
  if (cfg.method != Method::C2EDEN && cfg.method != Method::NewtonC2EDEN)
    throw Error("run_c2eden: method must be c2eden or c2eden_newton");
  require_shards(shards);
  const Index d = shards[0].dim();
  if (cfg.K <= static_cast<std::uint32_t>(d))
    throw Error("run_c2eden: K = " + std::to_string(cfg.K) + " must exceed d = " + std::to_string(d));

  protocol::ServerConfig sc;
  sc.K = cfg.K;
  sc.M = cfg.method == Method::NewtonC2EDEN ? 0.0 : cfg.M;
  sc.grad_tol = cfg.grad_tol;
  sc.newton_switch_grad = cfg.newton_switch_grad;
  const Vec x0 = detail::initial_point(cfg, d);

  IterationTrace trace;
  TraceRecorder rec(shards, cfg, trace);
  detail::RecordingObserver obs(rec, extra);

  auto finish = [&](const protocol::C2edenServer& server, const protocol::ServerResult& res) {
    trace.stopped_early = res.stopped_early;
    trace.ledger = server.state().ledger;
  };

  if (cfg.transport == TransportKind::InProcess) {
    protocol::InProcessTransport tx(shards, {cfg.seed != 0, cfg.seed});
    protocol::C2edenServer server(tx, sc, &obs);
    finish(server, server.run(x0));
    return trace;
  }

  protocol::TcpListener listener(cfg.port);
  if (!launcher) launcher = thread_launcher(shards);
  auto join = launcher(listener.port());
  try {
    protocol::TcpServerTransport tx(listener, static_cast<std::uint32_t>(shards.size()));
    protocol::C2edenServer server(tx, sc, &obs);
    finish(server, server.run(x0));
  } catch (...) {
    // Sockets are closed by now, so clients fail fast; the server error wins.
    try {
      join();
    } catch (...) {
    }
    throw;
  }
  join();
  return trace;
}

}  // namespace c2eden

#endif  // C2EDEN_ALGORITHMS_C2EDEN_RUN_HPP
