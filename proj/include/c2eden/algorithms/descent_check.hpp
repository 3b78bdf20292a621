#ifndef C2EDEN_ALGORITHMS_DESCENT_CHECK_HPP
#define C2EDEN_ALGORITHMS_DESCENT_CHECK_HPP

// Checks of the per-step descent inequality, the averaged stationarity bound
// and the local contraction of the gradient norm, evaluated on recorded
// iterates with the exact global oracle.

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <vector>

#include "c2eden/algorithms/schedule.hpp"
#include "c2eden/algorithms/stationarity.hpp"
#include "c2eden/error.hpp"
#include "c2eden/objective_full.hpp"

namespace c2eden {

struct DescentCheck {
  std::int64_t k = 0;
  double decrease = 0.0;  // f(x_k) - f(x_{k+1})
  double bound = 0.0;     // right-hand side, slack included
  bool ok = false;
};

/// For every main round k (d <= k < K):
///   f(x_k) - f(x_{k+1}) >= gamma(x_{k+1}) + (M/48) ||x_{k+1} - x_k||^3
///                          - (11 L^3 / M^2) ||x_k - x_tau(k)||^3 - slack.
/// `iterates` holds x_0 .. x_K.
inline std::vector<DescentCheck> check_descent_inequality(std::span<const Vec> iterates, std::int64_t d, double L,
                                                          double M, std::span<const ClientShard> shards,
                                                          double slack = 1e-9) {
  if (!(M > 0.0)) throw Error("check_descent_inequality: M must be positive");
  if (!(L >= 0.0)) throw Error("check_descent_inequality: L must be non-negative");
  std::vector<DescentCheck> out;
  const auto K = static_cast<std::int64_t>(iterates.size()) - 1;
  std::vector<double> f(iterates.size());
  for (std::size_t i = 0; i < iterates.size(); ++i) f[i] = global_value(shards, iterates[i]);
  for (std::int64_t k = d; k < K; ++k) {
    const Vec& xk = iterates[static_cast<std::size_t>(k)];
    const Vec& xn = iterates[static_cast<std::size_t>(k + 1)];
    const Vec& xt = iterates[static_cast<std::size_t>(tau(k, d))];
    const double step = (xn - xk).norm();
    const double stale = (xk - xt).norm();
    DescentCheck c;
    c.k = k;
    c.decrease = f[static_cast<std::size_t>(k)] - f[static_cast<std::size_t>(k + 1)];
    c.bound = gamma(shards, xn, M) + M / 48.0 * step * step * step -
              11.0 * L * L * L / (M * M) * stale * stale * stale - slack;
    c.ok = c.decrease >= c.bound;
    out.push_back(c);
  }
  return out;
}

struct AverageBound {
  double min_gamma = 0.0;  // over d < i <= K
  double bound = 0.0;      // (f(x_0) - f_best) / (K - d)
  bool ok = false;
};

/// min_{d < i <= K} gamma(x_i) <= (f(x_0) - f_best) / (K - d), f_best being
/// the smallest observed value.
inline AverageBound check_average_bound(std::span<const Vec> iterates, std::int64_t d, double M,
                                        std::span<const ClientShard> shards) {
  const auto K = static_cast<std::int64_t>(iterates.size()) - 1;
  if (K <= d) throw Error("check_average_bound: need more than d rounds");
  double f_best = std::numeric_limits<double>::infinity();
  for (const auto& x : iterates) f_best = std::min(f_best, global_value(shards, x));
  AverageBound r;
  r.min_gamma = std::numeric_limits<double>::infinity();
  for (std::int64_t i = d + 1; i <= K; ++i)
    r.min_gamma = std::min(r.min_gamma, gamma(shards, iterates[static_cast<std::size_t>(i)], M));
  r.bound = (global_value(shards, iterates[0]) - f_best) / static_cast<double>(K - d);
  r.ok = r.min_gamma <= r.bound;
  return r;
}

struct ContractionCheck {
  std::int64_t k = 0;
  double s_next = 0.0;
  double product = 0.0;  // s_k * s_tau(k)
  bool ok = false;
};

/// s_k = ((M + 3L) / mu^2) ||grad f(x_k)||; checks s_{k+1} <= s_k s_tau(k) + slack
/// for main rounds k in [k_begin, k_end).
inline std::vector<ContractionCheck> check_contraction(std::span<const double> grad_norms, std::int64_t d,
                                                       double M, double L, double mu, std::int64_t k_begin,
                                                       std::int64_t k_end, double slack = 1e-9) {
  if (!(mu > 0.0)) throw Error("check_contraction: mu must be positive");
  const double c = (M + 3.0 * L) / (mu * mu);
  std::vector<ContractionCheck> out;
  k_begin = std::max(k_begin, d);
  k_end = std::min<std::int64_t>(k_end, static_cast<std::int64_t>(grad_norms.size()) - 1);
  for (std::int64_t k = k_begin; k < k_end; ++k) {
    ContractionCheck r;
    r.k = k;
    r.s_next = c * grad_norms[static_cast<std::size_t>(k + 1)];
    r.product = c * grad_norms[static_cast<std::size_t>(k)] * c * grad_norms[static_cast<std::size_t>(tau(k, d))];
    r.ok = r.s_next <= r.product + slack;
    out.push_back(r);
  }
  return out;
}

}  // namespace c2eden

#endif  // C2EDEN_ALGORITHMS_DESCENT_CHECK_HPP
