#ifndef C2EDEN_ALGORITHMS_STATIONARITY_HPP
#define C2EDEN_ALGORITHMS_STATIONARITY_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>

#include "c2eden/data_io.hpp"
#include "c2eden/error.hpp"
#include "c2eden/objective_full.hpp"

namespace c2eden {

/// max{ -lambda_min^3 / (648 M^2), ||grad||^(3/2) / (72 sqrt(2) M) }.
inline double gamma_from(double grad_norm, double lambda_min, double M) {
  if (!(M > 0.0)) throw Error("gamma: M must be positive");
  const double curvature = -lambda_min * lambda_min * lambda_min / (648.0 * M * M);
  const double first_order = std::pow(grad_norm, 1.5) / (72.0 * std::sqrt(2.0) * M);
  return std::max(curvature, first_order);
}

/// gamma at x, using the exact global gradient and Hessian.
inline double gamma(std::span<const ClientShard> shards, const Vec& x, double M) {
  const GlobalEval e = global_oracle(shards, x);
  return gamma_from(e.gradient.norm(), min_eigenvalue(e.hessian), M);
}

struct StationarityReport {
  double eps = 0.0;
  double delta = 0.0;
  bool is_fosp = false;
  bool is_sosp = false;
  std::optional<std::int64_t> witness;  // first round meeting the SOSP test
};

inline bool is_fosp(double grad_norm, double eps) { return grad_norm <= eps; }
inline bool is_sosp(double grad_norm, double lambda_min, double eps, double delta) {
  return grad_norm <= eps && lambda_min >= -delta;
}

inline StationarityReport check_stationarity(double grad_norm, double lambda_min, double eps, double delta,
                                             std::optional<std::int64_t> round = std::nullopt) {
  StationarityReport r{eps, delta, is_fosp(grad_norm, eps), is_sosp(grad_norm, lambda_min, eps, delta), {}};
  if (r.is_sosp) r.witness = round;
  return r;
}

inline constexpr double kLogisticThirdDerivMax = 0.0962250448649376;  // 1/(6 sqrt 3)
inline constexpr double kNonconvexThirdDerivMax = 4.67;  // sup |d^3/dx^3 x^2/(1+x^2)| ~ 4.6686

/// Upper bound on the Lipschitz constant of the Hessian of the global
/// objective: max_i ||a_i||^3 / (6 sqrt 3) for the loss, plus lambda times the
/// largest third derivative of the regularizer.
inline double hessian_lipschitz_bound(const Dataset& ds, double lambda, Regularizer reg) {
  double worst = 0.0;
  for (const auto& row : ds.rows) {
    double sq = 0.0;
    for (const auto& e : row) sq += e.value * e.value;
    worst = std::max(worst, sq);
  }
  const double loss = kLogisticThirdDerivMax * std::pow(worst, 1.5);
  return loss + (reg == Regularizer::SmoothNonconvex ? lambda * kNonconvexThirdDerivMax : 0.0);
}

inline double hessian_lipschitz_bound(std::span<const ClientShard> shards) {
  require_shards(shards);
  double worst = 0.0;
  for (const auto& s : shards) worst = std::max(worst, s.features().rowwise().squaredNorm().maxCoeff());
  const auto& first = shards.front();
  // Least squares has a constant Hessian in the loss term.
  const double loss = first.loss() == Loss::Squared ? 0.0 : kLogisticThirdDerivMax * std::pow(worst, 1.5);
  return loss + (first.regularizer() == Regularizer::SmoothNonconvex ? first.lambda() * kNonconvexThirdDerivMax
                                                                     : 0.0);
}

}  // namespace c2eden

#endif  // C2EDEN_ALGORITHMS_STATIONARITY_HPP
