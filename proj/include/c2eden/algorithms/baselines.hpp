#ifndef C2EDEN_ALGORITHMS_BASELINES_HPP
#define C2EDEN_ALGORITHMS_BASELINES_HPP

// GD, AGD, GIANT and LCRN. The rounds are simulated in-process; the ledger
// books what the same exchange would put on the wire (x_0 is setup traffic,
// as for C2EDEN). Trace row k holds the iterate after k communication rounds.

#include <span>
#include <string>
#include <vector>

#include "c2eden/algorithms/recorder.hpp"
#include "c2eden/algorithms/trace.hpp"
#include "c2eden/cubic_solver.hpp"
#include "c2eden/error.hpp"
#include "c2eden/objective.hpp"
#include "c2eden/objective_full.hpp"
#include "c2eden/protocol/ledger.hpp"
#include "c2eden/protocol/message.hpp"

namespace c2eden {

namespace detail {

inline std::uint64_t vec_frame_bytes(Index d) {
  return protocol::kPrefixBytes + protocol::kHeaderBytes + 8 * static_cast<std::uint64_t>(d);
}

// n clients each send one d-vector in round k; the server broadcasts one.
inline void book_round(protocol::CommLedger& ledger, std::uint32_t k, std::size_t n, Index d) {
  for (std::size_t i = 0; i < n; ++i) ledger.record_up(k, static_cast<std::uint64_t>(d), vec_frame_bytes(d));
  ledger.record_broadcast(k, static_cast<std::uint64_t>(d), vec_frame_bytes(d), n);
}

class BaselineRun {
 public:
  BaselineRun(const RunConfig& cfg, std::span<const ClientShard> shards)
      : cfg_(cfg), shards_(shards), rec_(shards, cfg, trace_) {
    require_shards(shards);
    d_ = shards[0].dim();
    x_ = initial_point(cfg, d_);
    ledger().record_setup_down(static_cast<std::uint64_t>(d_), vec_frame_bytes(d_) * shards.size());
    last_grad_ = rec_.record(0, x_, 0, 0);
  }

  // True while another `rounds`-round step fits and the run has neither
  // converged nor diverged.
  bool more(std::uint32_t rounds = 1) {
    if (trace_.divergent) return false;
    if (rec_.converged(last_grad_)) {
      trace_.stopped_early = k_ < cfg_.K;
      return false;
    }
    return k_ + rounds <= cfg_.K;
  }

  void finish_round(const Vec& x_next, std::uint32_t rounds = 1) {
    for (std::uint32_t r = 0; r < rounds; ++r) book_round(ledger(), k_ + r, shards_.size(), d_);
    k_ += rounds;
    x_ = x_next;
    const auto c = ledger().cumulative(k_);
    last_grad_ = rec_.record(k_, x_, c.up_scalars, c.down_scalars);
  }

  const Vec& x() const { return x_; }
  Index dim() const { return d_; }
  std::uint32_t round() const { return k_; }
  IterationTrace take() { return std::move(trace_); }

 private:
  protocol::CommLedger& ledger() { return trace_.ledger; }

  RunConfig cfg_;
  std::span<const ClientShard> shards_;
  IterationTrace trace_;
  TraceRecorder rec_;
  Index d_ = 0;
  Vec x_;
  std::uint32_t k_ = 0;
  double last_grad_ = 0.0;
};

inline void require_eta(const RunConfig& cfg, const char* who) {
  if (!(cfg.eta > 0.0) || !std::isfinite(cfg.eta)) throw Error(std::string(who) + ": step size must be positive");
}

}  // namespace detail

/// x <- x - eta * mean_i grad f_i(x).
inline IterationTrace run_gd(const RunConfig& cfg, std::span<const ClientShard> shards) {
  detail::require_eta(cfg, "gd");
  detail::BaselineRun run(cfg, shards);
  while (run.more()) run.finish_round(run.x() - cfg.eta * global_gradient(shards, run.x()));
  return run.take();
}

/// y_k = x_k + beta (x_k - x_{k-1}),  x_{k+1} = y_k - eta grad f(y_k).
inline IterationTrace run_agd(const RunConfig& cfg, std::span<const ClientShard> shards) {
  detail::require_eta(cfg, "agd");
  if (!(cfg.beta >= 0.0 && cfg.beta < 1.0)) throw Error("agd: momentum must lie in [0, 1)");
  detail::BaselineRun run(cfg, shards);
  Vec prev = run.x();
  while (run.more()) {
    const Vec y = run.x() + cfg.beta * (run.x() - prev);
    prev = run.x();
    run.finish_round(y - cfg.eta * global_gradient(shards, y));
  }
  return run.take();
}

/// warmup_gd_steps GD rounds, then per iteration two rounds: the global
/// gradient g, then the mean of local Newton directions H_i^{-1} g.
inline IterationTrace run_giant(const RunConfig& cfg, std::span<const ClientShard> shards) {
  if (cfg.warmup_gd_steps > 0) detail::require_eta(cfg, "giant warm-up");
  detail::BaselineRun run(cfg, shards);
  for (std::uint32_t s = 0; s < cfg.warmup_gd_steps && run.more(); ++s)
    run.finish_round(run.x() - cfg.eta * global_gradient(shards, run.x()));
  while (run.more(2)) {
    const Vec g = global_gradient(shards, run.x());
    std::vector<Vec> dirs;
    dirs.reserve(shards.size());
    for (std::size_t i = 0; i < shards.size(); ++i) {
      try {
        dirs.push_back(solve_spd(full_hessian(shards[i], run.x()), g));
      } catch (const NotPositiveDefinite& e) {
        throw NotPositiveDefinite(e.lambda_min(), "giant: round " + std::to_string(run.round()) + ", client " +
                                                      std::to_string(i) + " local Hessian");
      }
    }
    run.finish_round(run.x() - mean_in_order(dirs), 2);
  }
  return run.take();
}

/// Each client takes a cubic-regularized Newton step on its own f_i; the
/// server averages the results.
inline IterationTrace run_lcrn(const RunConfig& cfg, std::span<const ClientShard> shards) {
  if (!(cfg.M > 0.0) || !std::isfinite(cfg.M)) throw Error("lcrn: M must be positive");
  detail::BaselineRun run(cfg, shards);
  while (run.more()) {
    std::vector<Vec> ys;
    ys.reserve(shards.size());
    for (std::size_t i = 0; i < shards.size(); ++i) {
      try {
        const EpochCache cache(full_hessian(shards[i], run.x()));
        ys.push_back(solve_cubic(gradient(shards[i], run.x()), cache, cfg.M, run.x()).y);
      } catch (const Error& e) {
        throw NumericalFailure("lcrn: round " + std::to_string(run.round()) + ", client " + std::to_string(i) +
                               ": " + e.what());
      }
    }
    run.finish_round(mean_in_order(ys));
  }
  return run.take();
}

}  // namespace c2eden

#endif  // C2EDEN_ALGORITHMS_BASELINES_HPP
