#ifndef C2EDEN_CUBIC_SOLVER_HPP
#define C2EDEN_CUBIC_SOLVER_HPP

// Global minimizer of the cubic-regularized model
//
//   m(y) = <g, y - x> + 1/2 <A (y - x), y - x> + M/6 ||y - x||^3
//
// A may be indefinite. The minimizer s = y - x is characterized by
//
//   g + A s + (M/2) ||s|| s = 0,   A + (M/2) ||s|| I  positive semidefinite.
//
// With A = Q diag(lambda) Q^T and g_hat = Q^T g, s(r) = -(Lambda + M r/2)^-1 g_hat
// and the step length r solves phi(r) = ||s(r)|| - r = 0 on
// r > max(0, -2 lambda_min / M). phi is convex and strictly decreasing there.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>

#include "c2eden/error.hpp"
#include "c2eden/numkit.hpp"

namespace c2eden {

struct CubicModel {
  Vec g;
  SymMat A;
  double M = 0.0;
  Vec anchor;
};

struct CubicSolution {
  Vec y;
  Vec s;
  double r = 0.0;    // ||s||
  double lam = 0.0;  // M r / 2
  double stationarity_residual = 0.0;  // ||g + A s + lam s||
  double dual_feasibility = 0.0;       // lambda_min(A) + lam
  bool hard_case = false;
};

/// Eigendecomposition of a snapshot Hessian, built once and shared read-only
/// across the d steps that reuse it.
class EpochCache {
 public:
  explicit EpochCache(SymMat h) : h_(std::move(h)), eig_(sym_eig(h_)) { orient(); }

  const SymMat& matrix() const noexcept { return h_; }
  const EigenDecomp& eig() const noexcept { return eig_; }
  Index dim() const noexcept { return h_.dim(); }

 private:
  // First nonzero component of every eigenvector is made positive.
  void orient() {
    for (Index c = 0; c < eig_.vectors.cols(); ++c) {
      for (Index r = 0; r < eig_.vectors.rows(); ++r) {
        const double v = eig_.vectors(r, c);
        if (std::abs(v) > 1e-14) {
          if (v < 0) eig_.vectors.col(c) *= -1.0;
          break;
        }
      }
    }
  }

  SymMat h_;
  EigenDecomp eig_;
};

namespace detail {

inline void fill_residuals(const Vec& g, const SymMat& a, double lambda_min, double M,
                           CubicSolution& sol) {
  sol.r = sol.s.norm();
  sol.lam = 0.5 * M * sol.r;
  sol.stationarity_residual = (g + a * sol.s + sol.lam * sol.s).norm();
  sol.dual_feasibility = lambda_min + sol.lam;
}

struct Secular {
  const Vec& lambda;
  const Vec& g_hat;
  double M;
  // Components excluded from the sum (the lambda_min eigenspace in the
  // degenerate branch). Empty means none.
  Index skip_begin = 0;
  Index skip_end = 0;

  bool skipped(Index i) const { return i >= skip_begin && i < skip_end; }

  double step_norm(double r) const {
    double acc = 0.0;
    for (Index i = 0; i < lambda.size(); ++i) {
      if (skipped(i)) continue;
      const double q = g_hat[i] / (lambda[i] + 0.5 * M * r);
      acc += q * q;
    }
    return std::sqrt(acc);
  }

  // phi(r) and phi'(r).
  std::pair<double, double> eval(double r) const {
    double acc = 0.0;
    double dacc = 0.0;
    for (Index i = 0; i < lambda.size(); ++i) {
      if (skipped(i)) continue;
      const double den = lambda[i] + 0.5 * M * r;
      const double q = g_hat[i] / den;
      acc += q * q;
      dacc += q * q / den;
    }
    const double norm = std::sqrt(acc);
    const double dnorm = norm > 0 ? -0.5 * M * dacc / norm : 0.0;
    return {norm - r, dnorm - 1.0};
  }

  Vec step_hat(double r) const {
    Vec out = Vec::Zero(lambda.size());
    for (Index i = 0; i < lambda.size(); ++i)
      if (!skipped(i)) out[i] = -g_hat[i] / (lambda[i] + 0.5 * M * r);
    return out;
  }
};

// Root of phi on (lo, hi] with phi(lo+) > 0 >= phi(hi). Newton iterates
// are accepted when they stay inside the bracket, otherwise bisect.
inline double solve_secular(const Secular& sec, double lo, double hi) {
  double r = hi;
  auto [f, df] = sec.eval(r);
  if (f == 0.0) return r;
  for (int iter = 0; iter < 500; ++iter) {
    if (f > 0) lo = r; else hi = r;
    if (std::abs(f) <= 4 * std::numeric_limits<double>::epsilon() * (1.0 + r)) return r;
    if (hi - lo <= 2 * std::numeric_limits<double>::epsilon() * hi) return f <= 0 ? r : hi;
    double next = r - f / df;
    if (!(next > lo && next < hi) || !std::isfinite(next)) next = 0.5 * (lo + hi);
    if (next == r) return r;
    r = next;
    std::tie(f, df) = sec.eval(r);
  }
  return r;
}

}  // namespace detail

/// Model value m(y) exactly as written above.
inline double model_value(const CubicModel& m, const Vec& y) {
  require_dim(y, m.anchor.size(), "model_value");
  const Vec s = y - m.anchor;
  const double r = s.norm();
  return m.g.dot(s) + 0.5 * s.dot(m.A * s) + m.M / 6.0 * r * r * r;
}

/// Cubic step from a cached eigendecomposition. M must be positive.
inline CubicSolution solve_cubic(const Vec& g, const EpochCache& cache, double M, const Vec& anchor) {
  const Index d = cache.dim();
  require_dim(g, d, "solve_cubic gradient");
  require_dim(anchor, d, "solve_cubic anchor");
  require_finite(g, "solve_cubic gradient");
  if (!(M > 0.0) || !std::isfinite(M))
    throw Error("solve_cubic: M must be positive and finite (use solve_newton for M = 0)");

  const EigenDecomp& eig = cache.eig();
  const Vec& lambda = eig.values;
  const double lambda_min = lambda[0];
  const Vec g_hat = eig.vectors.transpose() * g;
  const double g_norm = g.norm();
  const double a_scale = 1.0 + eig.spectral_norm();

  // Extent of the lambda_min eigenspace (eigenvalues are ascending).
  Index min_end = 1;
  while (min_end < d && lambda[min_end] - lambda_min <= 1e-12 * a_scale) ++min_end;

  double min_space_norm = 0.0;
  for (Index i = 0; i < min_end; ++i) min_space_norm = std::max(min_space_norm, std::abs(g_hat[i]));
  const bool degenerate = min_space_norm <= 1e-13 * g_norm;

  CubicSolution sol;
  const double r_min = std::max(0.0, -2.0 * lambda_min / M);

  if (g_norm == 0.0 && lambda_min >= 0.0) {
    sol.s = Vec::Zero(d);
  } else {
    detail::Secular sec{lambda, g_hat, M};
    if (degenerate) {
      sec.skip_begin = 0;
      sec.skip_end = min_end;
    }
    const bool interior_root = !degenerate || lambda_min > 0.0 ||
                               (r_min > 0.0 ? sec.step_norm(r_min) > r_min
                                            : g_norm > 0.0);
    if (interior_root) {
      double hi = (-lambda_min + std::sqrt(lambda_min * lambda_min + 2.0 * M * g_norm)) / M;
      hi = std::max(hi, r_min) * (1.0 + 1e-12) + std::numeric_limits<double>::min();
      while (sec.eval(hi).first > 0.0) hi *= 2.0;
      const double r = detail::solve_secular(sec, r_min, hi);
      Vec s_hat = sec.step_hat(r);
      // Near the hard case the smallest-denominator component is very
      // sensitive to r; rebuild it from the norm so that ||s|| = r.
      const Index j = degenerate ? min_end : 0;
      if (j < d) {
        const double rest = s_hat.squaredNorm() - s_hat[j] * s_hat[j];
        if (rest <= r * r && std::abs(s_hat[j]) * std::abs(s_hat[j]) >= rest)
          s_hat[j] = std::copysign(std::sqrt(r * r - rest), s_hat[j]);
      }
      sol.s = eig.vectors * s_hat;
    } else {
      // Hard case: sit on r_min and complete the norm along the first
      // (oriented) lambda_min eigenvector.
      Vec s_hat = r_min > 0.0 ? sec.step_hat(r_min) : Vec::Zero(d);
      const double p = s_hat.norm();
      s_hat[0] += std::sqrt(std::max(0.0, r_min * r_min - p * p));
      sol.s = eig.vectors * s_hat;
      sol.hard_case = true;
    }
  }
  sol.y = anchor + sol.s;
  detail::fill_residuals(g, cache.matrix(), lambda_min, M, sol);
  return sol;
}

inline CubicSolution solve_cubic(const CubicModel& m) {
  if (!(m.M > 0.0)) throw Error("solve_cubic: M must be positive (use solve_newton for M = 0)");
  const EpochCache cache(m.A);
  return solve_cubic(m.g, cache, m.M, m.anchor);
}

/// The M = 0 limit: y = x - A^{-1} g, for positive definite A.
inline CubicSolution solve_newton(const Vec& g, const SymMat& a, const Vec& anchor) {
  require_dim(anchor, a.dim(), "solve_newton anchor");
  CubicSolution sol;
  sol.s = -solve_spd(a, g);
  sol.y = anchor + sol.s;
  detail::fill_residuals(g, a, min_eigenvalue(a), 0.0, sol);
  return sol;
}

/// Newton step through a cached eigendecomposition.
inline CubicSolution solve_newton(const Vec& g, const EpochCache& cache, const Vec& anchor) {
  const Index d = cache.dim();
  require_dim(g, d, "solve_newton gradient");
  require_dim(anchor, d, "solve_newton anchor");
  require_finite(g, "solve_newton gradient");
  const EigenDecomp& eig = cache.eig();
  if (!(eig.min() > 1e-12 * eig.spectral_norm())) throw NotPositiveDefinite(eig.min());
  Vec s_hat = eig.vectors.transpose() * g;
  s_hat.array() /= -eig.values.array();
  CubicSolution sol;
  sol.s = eig.vectors * s_hat;
  sol.y = anchor + sol.s;
  detail::fill_residuals(g, cache.matrix(), eig.min(), 0.0, sol);
  return sol;
}

}  // namespace c2eden

#endif  // C2EDEN_CUBIC_SOLVER_HPP
