#ifndef C2EDEN_ALGORITHMS_RECORDER_HPP
#define C2EDEN_ALGORITHMS_RECORDER_HPP

// Per-iterate instrumentation. Values come from the exact global oracle and
// never touch the communication ledger.

#include <chrono>
#include <cmath>
#include <span>

#include "c2eden/algorithms/stationarity.hpp"
#include "c2eden/algorithms/trace.hpp"
#include "c2eden/objective.hpp"
#include "c2eden/objective_full.hpp"

namespace c2eden {

namespace detail {

inline Vec initial_point(const RunConfig& cfg, Index d) {
  if (!cfg.x0) return Vec::Zero(d);
  require_dim(*cfg.x0, d, "initial point");
  require_finite(*cfg.x0, "initial point");
  return *cfg.x0;
}

}  // namespace detail

class TraceRecorder {
 public:
  TraceRecorder(std::span<const ClientShard> shards, const RunConfig& cfg, IterationTrace& out)
      : shards_(shards), cfg_(cfg), out_(&out), t0_(std::chrono::steady_clock::now()) {}

  /// Appends a row for iterate x after k rounds. Returns the gradient norm;
  /// flags the trace divergent on a non-finite value or iterate.
  double record(std::int64_t k, const Vec& x, std::uint64_t up, std::uint64_t down) {
    TraceRow row;
    row.k = k;
    row.up_scalars = up;
    row.down_scalars = down;
    if (!all_finite(x)) {
      row.f = std::numeric_limits<double>::quiet_NaN();
      row.grad_norm = std::numeric_limits<double>::quiet_NaN();
      out_->divergent = true;
    } else if (cfg_.record_curvature) {
      const GlobalEval e = global_oracle(shards_, x);
      row.f = e.value;
      row.grad_norm = e.gradient.norm();
      if (e.hessian.all_finite()) {
        const double lmin = min_eigenvalue(e.hessian);
        row.lambda_min = lmin;
        const double gm = cfg_.gamma_M > 0.0 ? cfg_.gamma_M : cfg_.M;
        if (gm > 0.0) row.gamma = gamma_from(row.grad_norm, lmin, gm);
      }
    } else {
      row.f = global_value(shards_, x);
      row.grad_norm = global_gradient(shards_, x).norm();
    }
    if (!std::isfinite(row.f) || !std::isfinite(row.grad_norm)) out_->divergent = true;
    if (cfg_.record_wall)
      row.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0_).count();
    out_->rows.push_back(row);
    out_->iterates.push_back(x);
    return row.grad_norm;
  }

  bool converged(double grad_norm) const { return grad_norm <= cfg_.grad_tol; }

 private:
  std::span<const ClientShard> shards_;
  RunConfig cfg_;
  IterationTrace* out_;
  std::chrono::steady_clock::time_point t0_;
};

}  // namespace c2eden

#endif  // C2EDEN_ALGORITHMS_RECORDER_HPP
