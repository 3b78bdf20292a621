#ifndef C2EDEN_INVARIANTS_HPP
#define C2EDEN_INVARIANTS_HPP

// Invariant battery shared by `c2eden check` and the acceptance binary. Each
// check returns a verdict with a one-line summary of the worst case seen.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "c2eden/algorithms/c2eden_run.hpp"
#include "c2eden/algorithms/descent_check.hpp"
#include "c2eden/algorithms/stationarity.hpp"
#include "c2eden/algorithms/trace.hpp"
#include "c2eden/cubic_solver.hpp"
#include "c2eden/objective.hpp"
#include "c2eden/objective_full.hpp"

namespace c2eden::invariants {

struct Verdict {
  bool ok = false;
  std::string detail;
};

inline std::string fmt(const char* f, double a) {
  char buf[96];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

inline double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

namespace detail {

inline Vec gaussian(std::mt19937_64& rng, Index d, double scale = 1.0) {
  std::normal_distribution<double> nd(0.0, scale);
  Vec v(d);
  for (Index i = 0; i < d; ++i) v[i] = nd(rng);
  return v;
}

// Symmetric with at least one negative eigenvalue.
inline SymMat indefinite(std::mt19937_64& rng, Index d) {
  Eigen::MatrixXd a(d, d);
  std::normal_distribution<double> nd(0.0, 2.0);
  for (Index i = 0; i < d; ++i)
    for (Index j = 0; j < d; ++j) a(i, j) = nd(rng);
  SymMat s = SymMat::from_lower(0.5 * (a + a.transpose()));
  const double lmin = min_eigenvalue(s);
  if (lmin >= 0.0) {
    const double shift = lmin + std::uniform_real_distribution<double>(0.1, 1.0)(rng);
    for (Index i = 0; i < d; ++i) s.set(i, i, s(i, i) - shift);
  }
  return s;
}

// Minimum of the d = 2 model over the square [-w, w]^2 around the anchor.
inline double grid_min_2d(const Vec& g, const SymMat& a, double M, double w, double step) {
  const int n = static_cast<int>(std::lround(2 * w / step));
  const double a00 = a(0, 0), a01 = a(0, 1), a11 = a(1, 1);
  double best = 0.0;
  for (int i = 0; i <= n; ++i) {
    const double u = -w + i * step;
    const double lin_u = g[0] * u + 0.5 * a00 * u * u;
    for (int j = 0; j <= n; ++j) {
      const double v = -w + j * step;
      const double r2 = u * u + v * v;
      const double m = lin_u + g[1] * v + a01 * u * v + 0.5 * a11 * v * v + M / 6.0 * r2 * std::sqrt(r2);
      best = std::min(best, m);
    }
  }
  return best;
}

}  // namespace detail

/// Optimality of the cubic solver on random indefinite instances (d <= 8,
/// M log-uniform on [1e-3, 1e3]); every tenth instance has its gradient
/// projected off the lambda_min eigenvector. The first `grid_instances`
/// two-dimensional instances are also compared with a grid search.
inline Verdict cubic_solver(int instances, int grid_instances, double grid_step, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> logm(-3.0, 3.0);
  double worst_res = 0.0, worst_dual = 0.0, worst_grid = -1e300;
  int grids = 0;
  bool ok = true;
  for (int t = 0; t < instances; ++t) {
    const Index d = 1 + static_cast<Index>(rng() % 8);
    const SymMat a = detail::indefinite(rng, d);
    Vec g = detail::gaussian(rng, d);
    if (t % 10 == 0) {
      const EigenDecomp e = sym_eig(a);
      g -= e.vectors.col(0).dot(g) * e.vectors.col(0);
    }
    const double M = std::pow(10.0, logm(rng));
    const CubicModel m{g, a, M, Vec::Zero(d)};
    const CubicSolution s = solve_cubic(m);
    const double res = s.stationarity_residual / (1.0 + g.norm());
    const double dual = -s.dual_feasibility / (1.0 + sym_eig(a).spectral_norm());
    worst_res = std::max(worst_res, res);
    worst_dual = std::max(worst_dual, dual);
    ok = ok && res <= 1e-8 && dual <= 1e-8;
    if (d == 2 && grids < grid_instances) {
      ++grids;
      const double excess = model_value(m, s.y) - detail::grid_min_2d(g, a, M, 5.0, grid_step);
      worst_grid = std::max(worst_grid, excess);
      ok = ok && excess <= 1e-5;
    }
  }
  return {ok, std::to_string(instances) + " instances, worst residual " + fmt("%.2e", worst_res) +
                  ", worst dual violation " + fmt("%.2e", worst_dual) + ", " + std::to_string(grids) +
                  " grid checks, worst excess over grid " + fmt("%.2e", worst_grid)};
}

/// Central finite differences for the gradient; hessian_column, hvp(e_j) and
/// full_hessian agree column by column.
inline Verdict oracles(std::span<const ClientShard> shards, int points, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  double worst_fd = 0.0, worst_col = 0.0;
  const Index d = shards[0].dim();
  for (int p = 0; p < points; ++p) {
    const Vec x = detail::gaussian(rng, d);
    for (const auto& shard : shards) {
      const Vec g = gradient(shard, x);
      Vec fd(d);
      for (Index j = 0; j < d; ++j) {
        const double h = 1e-5 * std::max(1.0, std::abs(x[j]));
        Vec xp = x, xm = x;
        xp[j] += h;
        xm[j] -= h;
        fd[j] = (value(shard, xp) - value(shard, xm)) / (xp[j] - xm[j]);
      }
      worst_fd = std::max(worst_fd, (fd - g).norm() / std::max(g.norm(), 1e-8));
      const SymMat full = full_hessian(shard, x);
      const double scale = std::max(1.0, full.dense().cwiseAbs().maxCoeff());
      for (Index j = 0; j < d; ++j) {
        const Vec col = hessian_column(shard, x, j);
        const Vec hv = hvp(shard, x, unit_vector(d, j));
        const double diff = std::max((col - hv).cwiseAbs().maxCoeff(),
                                     (col - full.dense().col(j)).cwiseAbs().maxCoeff());
        worst_col = std::max(worst_col, diff / scale);
      }
    }
  }
  return {worst_fd <= 1e-5 && worst_col <= 1e-12,
          std::to_string(points) + " points, worst gradient FD error " + fmt("%.2e", worst_fd) +
              " (relative), worst column disagreement " + fmt("%.2e", worst_col)};
}

/// The active H at every main round is bit-identical to the Hessian at
/// x_tau(k) assembled the way the server assembles it.
inline Verdict staleness(std::span<const ClientShard> shards, std::uint32_t K, double M) {
  struct Probe : protocol::RoundObserver {
    std::span<const ClientShard> shards;
    std::vector<Vec> xs;
    std::int64_t d = 0;
    int checked = 0, bad = 0;
    double worst_global = 0.0;
    void on_iterate(protocol::Round, const Vec& x, const protocol::CommLedger&) override { xs.push_back(x); }
    void on_step(const protocol::StepEvent& e) override {
      const auto t = static_cast<std::size_t>(tau(e.k, d));
      SymMat ref(static_cast<Index>(d));
      for (Index j = 0; j < d; ++j) {
        std::vector<Vec> cols;
        for (const auto& s : shards) cols.push_back(hessian_column(s, xs[t], j));
        ref.set_column(j, mean_in_order(cols));
      }
      ++checked;
      if (!(e.H == ref) || e.hessian_round != t) ++bad;
      worst_global = std::max(worst_global,
                              (e.H.dense() - global_hessian(shards, xs[t]).dense()).cwiseAbs().maxCoeff());
    }
  } probe;
  probe.shards = shards;
  probe.d = shards[0].dim();
  RunConfig cfg;
  cfg.K = K;
  cfg.M = M;
  cfg.grad_tol = 0.0;
  run_c2eden(cfg, shards, &probe);
  return {probe.bad == 0 && probe.checked == static_cast<int>(K) - probe.d,
          std::to_string(probe.checked) + " rounds checked, " + std::to_string(probe.bad) +
              " mismatches; max |H - full Hessian at x_tau| " + fmt("%.2e", probe.worst_global)};
}

/// up = n d^2 + 2 n d (K - d), down = d (K - d), with exact integers.
inline Verdict ledger_law(std::span<const ClientShard> shards, std::uint32_t K, TransportKind transport) {
  RunConfig cfg;
  cfg.K = K;
  cfg.grad_tol = 0.0;
  cfg.transport = transport;
  const auto t = run_c2eden(cfg, shards);
  const std::uint64_t n = shards.size(), d = static_cast<std::uint64_t>(shards[0].dim());
  const std::uint64_t up = n * d * d + 2 * n * d * (K - d), down = d * (K - d);
  const auto& tot = t.ledger.total();
  const bool ok = tot.up_scalars == up && tot.down_scalars == down && t.rows.back().up_scalars == up &&
                  t.rows.back().down_scalars == down;
  return {ok, "n=" + std::to_string(n) + " d=" + std::to_string(d) + " K=" + std::to_string(K) + ": up " +
                  std::to_string(tot.up_scalars) + " (law " + std::to_string(up) + "), down " +
                  std::to_string(tot.down_scalars) + " (law " + std::to_string(down) + ")"};
}

/// In-process and localhost TCP runs produce byte-identical trace CSVs.
inline Verdict cross_transport(std::span<const ClientShard> shards, std::uint32_t K, double M) {
  RunConfig cfg;
  cfg.K = K;
  cfg.M = M;
  cfg.grad_tol = 0.0;
  cfg.record_curvature = true;
  const std::string a = trace_csv(run_c2eden(cfg, shards));
  cfg.transport = TransportKind::Tcp;
  const std::string b = trace_csv(run_c2eden(cfg, shards));
  return {a == b, std::to_string(a.size()) + " CSV bytes, " + (a == b ? "identical" : "different")};
}

/// A synthetic logistic problem with the nonconvex regularizer, split over
/// `n` clients of `m` samples each.
inline std::vector<ClientShard> synthetic_problem(Index d, std::uint32_t n, Index m, double lambda,
                                                  std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const Vec w = detail::gaussian(rng, d);
  std::vector<ClientShard> shards;
  for (std::uint32_t i = 0; i < n; ++i) {
    FeatureMatrix a(m, d);
    Vec b(m);
    for (Index r = 0; r < m; ++r) {
      for (Index j = 0; j < d; ++j) a(r, j) = nd(rng) / std::sqrt(static_cast<double>(d));
      b[r] = u(rng) < 1.0 / (1.0 + std::exp(-a.row(r).dot(w))) ? 1.0 : -1.0;
    }
    shards.emplace_back(std::move(a), std::move(b), lambda, Regularizer::SmoothNonconvex);
  }
  return shards;
}

struct TheoryRun {
  IterationTrace trace;
  double L = 0.0;
  double M = 0.0;
};

/// C2EDEN with M = 12 d L from a random start.
inline TheoryRun theory_run(std::span<const ClientShard> shards, std::uint32_t K, std::uint64_t seed) {
  TheoryRun r;
  const Index d = shards[0].dim();
  r.L = hessian_lipschitz_bound(shards);
  r.M = 12.0 * static_cast<double>(d) * r.L;
  std::mt19937_64 rng(seed);
  RunConfig cfg;
  cfg.K = K;
  cfg.M = r.M;
  cfg.grad_tol = 0.0;
  cfg.x0 = detail::gaussian(rng, d, 2.0);
  r.trace = run_c2eden(cfg, shards);
  return r;
}

/// The per-step descent inequality on every main round.
inline Verdict descent_inequality(std::span<const ClientShard> shards, const TheoryRun& run) {
  const auto d = static_cast<std::int64_t>(shards[0].dim());
  const auto checks = check_descent_inequality(run.trace.iterates, d, run.L, run.M, shards, 1e-9);
  int bad = 0;
  double worst = 1e300;
  for (const auto& c : checks) {
    if (!c.ok) ++bad;
    worst = std::min(worst, c.decrease - c.bound);
  }
  return {bad == 0 && !checks.empty(),
          std::to_string(checks.size()) + " rounds, " + std::to_string(bad) + " violations, L=" +
              fmt("%.4g", run.L) + " M=" + fmt("%.4g", run.M) + ", smallest margin " + fmt("%.3e", worst)};
}

}  // namespace c2eden::invariants

#endif  // C2EDEN_INVARIANTS_HPP
