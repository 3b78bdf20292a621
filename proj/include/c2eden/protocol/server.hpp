#ifndef C2EDEN_PROTOCOL_SERVER_HPP
#define C2EDEN_PROTOCOL_SERVER_HPP

// Server side of the C2EDEN exchange: a sequential state machine over a
// ServerTransport.
//
// Round k (0-based, K rounds in total, iterates x_0 .. x_K):
//   k < d    warm-up: column k of H+ <- mean_i v_i,  x_{k+1} = x_0
//   k >= d   if k % d == 0: snapshot <- x_k, H <- H+
//            g <- mean_i g_i,  x_{k+1} <- T_M(g, H; x_k),  broadcast x_{k+1}
//            column (k % d) of H+ <- mean_i v_i
//
// Reports are aggregated in ascending client id, never in arrival order.

#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "c2eden/cubic_solver.hpp"
#include "c2eden/error.hpp"
#include "c2eden/numkit.hpp"
#include "c2eden/objective.hpp"
#include "c2eden/protocol/ledger.hpp"
#include "c2eden/protocol/message.hpp"
#include "c2eden/protocol/transport.hpp"

namespace c2eden::protocol {

struct ServerConfig {
  std::uint32_t K = 0;  // total rounds, warm-up included
  double M = 0.0;       // 0 selects the Newton step
  double grad_tol = 0.0;  // stop once the aggregated ||g_k|| <= grad_tol (0 disables)
  // Switch from cubic to Newton steps for good once ||g_k|| <= this (0 disables).
  double newton_switch_grad = 0.0;
};

struct ServerState {
  std::uint32_t k = 0;
  std::uint32_t d = 0;
  std::uint32_t n = 0;
  Vec x;
  Vec x_snapshot;
  SymMat H;
  SymMat H_plus;
  std::uint32_t H_round = 0;  // round whose iterate H was built at
  std::optional<EpochCache> cache;
  CommLedger ledger;
  bool newton = false;
};

struct StepEvent {
  Round k;
  const Vec& x;           // x_k
  const Vec& x_snapshot;  // point H was built at
  Round hessian_round;
  const SymMat& H;
  const Vec& g;
  const CubicSolution& step;
  bool newton;
};

class RoundObserver {
 public:
  virtual ~RoundObserver() = default;
  /// Called for x_0 and after every round with the new iterate.
  virtual void on_iterate(Round /*k*/, const Vec& /*x*/, const CommLedger& /*ledger*/) {}
  virtual void on_step(const StepEvent& /*e*/) {}
};

struct ServerResult {
  Vec x;
  Round rounds = 0;  // index of the last iterate
  bool stopped_early = false;
};

class C2edenServer {
 public:
  C2edenServer(ServerTransport& transport, ServerConfig cfg, RoundObserver* observer = nullptr)
      : tx_(&transport), cfg_(cfg), obs_(observer) {
    if (!(cfg_.M >= 0.0) || !std::isfinite(cfg_.M)) throw Error("server: M must be finite and >= 0");
  }

  const ServerState& state() const noexcept { return st_; }

  /// Sends Start to every client and the setup broadcast of x_0.
  void start(const Vec& x0) {
    require_finite(x0, "initial iterate");
    st_ = ServerState{};
    st_.d = static_cast<std::uint32_t>(x0.size());
    st_.n = tx_->clients();
    if (st_.d == 0) throw Error("server: dimension must be positive");
    if (st_.n == 0) throw Error("server: no clients");
    if (cfg_.K <= st_.d)
      throw Error("server: K = " + std::to_string(cfg_.K) + " must exceed d = " + std::to_string(st_.d));
    st_.x = x0;
    st_.x_snapshot = x0;
    st_.H_plus = SymMat(st_.d);
    pending_.clear();

    for (ClientId i = 0; i < st_.n; ++i) {
      const Message s = Start{cfg_.K, cfg_.M, st_.d, st_.n, i};
      tx_->send(i, s);
      st_.ledger.record_setup_down(payload_scalars(s), frame_bytes(s));
    }
    const Message b = Broadcast{0, x0};
    tx_->broadcast(b);
    st_.ledger.record_setup_down(payload_scalars(b), frame_bytes(b) * st_.n);
    notify_iterate();
  }

  void run_warmup_epoch() {
    if (st_.k != 0) throw ProtocolError("warm-up requested after round 0", st_.k);
    for (; st_.k < st_.d; ++st_.k) {
      const auto reports = collect<WarmupReport>(st_.k);
      std::vector<Vec> vs;
      vs.reserve(reports.size());
      for (const auto& r : reports) vs.push_back(r.v);
      st_.H_plus.set_column(st_.k, mean_in_order(vs));
      on_iterate_after(st_.k);
    }
  }

  /// One main round. Returns false when the gradient tolerance stopped the run
  /// (no step taken).
  bool run_main_round() {
    const Round k = st_.k;
    if (k < st_.d) throw ProtocolError("main round before warm-up completed", k);
    if (k >= cfg_.K) throw ProtocolError("round past K", k);
    const std::uint32_t col = k % st_.d;
    if (col == 0) {
      st_.x_snapshot = st_.x;
      st_.H = st_.H_plus;
      st_.H_round = k - st_.d;
      st_.cache.emplace(st_.H);
    }

    const auto reports = collect<ClientReport>(k);
    std::vector<Vec> gs, vs;
    gs.reserve(reports.size());
    vs.reserve(reports.size());
    for (const auto& r : reports) {
      gs.push_back(r.g);
      vs.push_back(r.v);
    }
    const Vec g = mean_in_order(gs);
    if (cfg_.grad_tol > 0.0 && g.norm() <= cfg_.grad_tol) return false;

    if (cfg_.M == 0.0 || (cfg_.newton_switch_grad > 0.0 && g.norm() <= cfg_.newton_switch_grad))
      st_.newton = true;

    CubicSolution step;
    try {
      step = st_.newton ? solve_newton(g, *st_.cache, st_.x) : solve_cubic(g, *st_.cache, cfg_.M, st_.x);
    } catch (const NotPositiveDefinite& e) {
      throw NotPositiveDefinite(e.lambda_min(), "round " + std::to_string(k));
    } catch (const NumericalFailure& e) {
      throw NumericalFailure("round " + std::to_string(k) + ": " + e.what());
    }
    if (!all_finite(step.y)) throw NumericalFailure("round " + std::to_string(k) + ": step is not finite");

    if (obs_) obs_->on_step(StepEvent{k, st_.x, st_.x_snapshot, st_.H_round, st_.H, g, step, st_.newton});

    st_.x = step.y;
    st_.H_plus.set_column(col, mean_in_order(vs));
    const Message b = Broadcast{k + 1, st_.x};
    tx_->broadcast(b);
    st_.ledger.record_broadcast(k, payload_scalars(b), frame_bytes(b), st_.n);
    ++st_.k;
    notify_iterate();
    return true;
  }

  ServerResult run(const Vec& x0) {
    start(x0);
    run_warmup_epoch();
    ServerResult res;
    while (st_.k < cfg_.K) {
      if (!run_main_round()) {
        res.stopped_early = true;
        break;
      }
    }
    stop();
    res.x = st_.x;
    res.rounds = st_.k;
    return res;
  }

  void stop() {
    const Message s = Stop{st_.k};
    tx_->broadcast(s);
    st_.ledger.record_setup_down(0, frame_bytes(s) * st_.n);
  }

 private:
  void notify_iterate() {
    if (obs_) obs_->on_iterate(st_.k, st_.x, st_.ledger);
  }
  // Warm-up rounds leave the iterate at x_0.
  void on_iterate_after(Round k) {
    if (obs_) obs_->on_iterate(k + 1, st_.x, st_.ledger);
  }

  static Round round_of(const Message& m) {
    if (const auto* r = std::get_if<ClientReport>(&m)) return r->round;
    if (const auto* w = std::get_if<WarmupReport>(&m)) return w->round;
    return 0;
  }
  static ClientId client_of(const Message& m) {
    if (const auto* r = std::get_if<ClientReport>(&m)) return r->client;
    if (const auto* w = std::get_if<WarmupReport>(&m)) return w->client;
    return ProtocolError::kNoClient;
  }

  // Validates one incoming message, books it in the ledger and files it under
  // its round.
  void accept(Message m, Round current) {
    const bool warm = std::holds_alternative<WarmupReport>(m);
    if (!warm && !std::holds_alternative<ClientReport>(m))
      throw ProtocolError("server received a server-to-client message", current);
    const Round r = round_of(m);
    const ClientId c = client_of(m);
    if (c >= st_.n) throw ProtocolError("report from unknown client", r, c);
    if (r < current) throw ProtocolError("late report for a finished round", r, c);
    if (r >= cfg_.K) throw ProtocolError("report for a round past K", r, c);
    if (warm != (r < st_.d)) throw ProtocolError("report kind does not match the round", r, c);
    const Index want = static_cast<Index>(st_.d);
    if (const auto* rep = std::get_if<ClientReport>(&m)) {
      if (rep->g.size() != want || rep->v.size() != want) throw ProtocolError("report has wrong length", r, c);
    } else if (std::get<WarmupReport>(m).v.size() != want) {
      throw ProtocolError("report has wrong length", r, c);
    }
    auto& slot = pending_[r];
    if (slot.empty()) slot.resize(st_.n);
    if (slot[c]) throw ProtocolError("duplicate report", r, c);
    st_.ledger.record_up(r, payload_scalars(m), frame_bytes(m));
    slot[c] = std::move(m);
  }

  template <class Report>
  std::vector<Report> collect(Round k) {
    auto ready = [&] {
      auto it = pending_.find(k);
      if (it == pending_.end()) return false;
      for (const auto& s : it->second)
        if (!s) return false;
      return true;
    };
    while (!ready()) accept(tx_->receive(k), k);
    std::vector<Report> out;
    out.reserve(st_.n);
    for (auto& s : pending_[k]) out.push_back(std::get<Report>(std::move(*s)));
    pending_.erase(k);
    return out;
  }

  ServerTransport* tx_;
  ServerConfig cfg_;
  RoundObserver* obs_;
  ServerState st_;
  std::map<Round, std::vector<std::optional<Message>>> pending_;
};

}  // namespace c2eden::protocol

#endif  // C2EDEN_PROTOCOL_SERVER_HPP
