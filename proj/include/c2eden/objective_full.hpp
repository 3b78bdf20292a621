#ifndef C2EDEN_OBJECTIVE_FULL_HPP
#define C2EDEN_OBJECTIVE_FULL_HPP

// Dense Hessians. Only the LCRN/GIANT baselines, instrumentation and tests
// include this header; the C2EDEN client never does.

#include <span>
#include <vector>

#include "c2eden/numkit.hpp"
#include "c2eden/objective.hpp"

namespace c2eden {

/// Exact local Hessian (1/m) A^T diag(w) A + lambda * diag(R''(x)),
/// accumulated as a weighted Gram product rather than column by column.
inline SymMat full_hessian(const ClientShard& shard, const Vec& x) {
  detail::check_x(shard, x);
  const Vec w = detail::curvature_weights(shard, x);
  Eigen::MatrixXd h = shard.features().transpose() * w.asDiagonal() * shard.features();
  h /= static_cast<double>(shard.samples());
  for (Index p = 0; p < x.size(); ++p)
    h(p, p) += shard.lambda() * detail::reg_second(shard.regularizer(), x[p]);
  return SymMat::from_lower(h);
}

struct GlobalEval {
  double value;
  Vec gradient;
  SymMat hessian;
};

inline SymMat global_hessian(std::span<const ClientShard> shards, const Vec& x) {
  require_shards(shards);
  SymMat sum = full_hessian(shards[0], x);
  for (std::size_t i = 1; i < shards.size(); ++i) sum += full_hessian(shards[i], x);
  sum *= 1.0 / static_cast<double>(shards.size());
  return sum;
}

/// Unweighted mean over clients of (value, gradient, Hessian).
inline GlobalEval global_oracle(std::span<const ClientShard> shards, const Vec& x) {
  return GlobalEval{global_value(shards, x), global_gradient(shards, x), global_hessian(shards, x)};
}

}  // namespace c2eden

#endif  // C2EDEN_OBJECTIVE_FULL_HPP
