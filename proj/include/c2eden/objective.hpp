#ifndef C2EDEN_OBJECTIVE_HPP
#define C2EDEN_OBJECTIVE_HPP

// Local oracles for regularized logistic regression on one client shard:
//
//   f_i(x) = (1/m_i) sum_j softplus(-b_ij <x, a_ij>) + lambda * R(x)
//
// with R either 0.5 ||x||^2 or the separable sum_p x_p^2 / (1 + x_p^2).
// Nothing in this header forms a d x d matrix; the dense Hessian lives in
// objective_full.hpp and is reserved for baselines and test oracles.

#include <Eigen/Core>

#include <cmath>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "c2eden/error.hpp"
#include "c2eden/numkit.hpp"

namespace c2eden {

enum class Regularizer { L2, SmoothNonconvex };

inline std::string_view to_string(Regularizer r) {
  return r == Regularizer::L2 ? "l2" : "nonconvex";
}

inline Regularizer regularizer_from_string(std::string_view s) {
  if (s == "l2") return Regularizer::L2;
  if (s == "nonconvex" || s == "smooth_nonconvex") return Regularizer::SmoothNonconvex;
  throw Error("unknown regularizer '" + std::string(s) + "' (expected l2 or nonconvex)");
}

inline constexpr double kDefaultLambda = 1e-6;

using FeatureMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Per-sample loss. Logistic is the model studied here; Squared (least
/// squares, any real label) gives a quadratic objective with an exactly
/// constant Hessian under the L2 regularizer, used by equivalence checks.
enum class Loss { Logistic, Squared };

/// One client's rows, labels and regularization setting. Immutable once built.
class ClientShard {
 public:
  ClientShard(FeatureMatrix features, Vec labels, double lambda, Regularizer reg, Loss loss = Loss::Logistic)
      : features_(std::move(features)), labels_(std::move(labels)), lambda_(lambda), reg_(reg), loss_(loss) {
    if (features_.rows() < 1) throw Error("ClientShard: needs at least one sample");
    if (features_.cols() < 1) throw Error("ClientShard: needs at least one feature");
    if (labels_.size() != features_.rows())
      throw DimensionMismatch("ClientShard labels", features_.rows(), labels_.size());
    if (!features_.allFinite()) throw NonFiniteInput("ClientShard: non-finite feature entry");
    if (!labels_.allFinite()) throw NonFiniteInput("ClientShard: non-finite label");
    if (loss_ == Loss::Logistic)
      for (Index r = 0; r < labels_.size(); ++r)
        if (labels_[r] != 1.0 && labels_[r] != -1.0)
          throw Error("ClientShard: labels must be +1 or -1 (row " + std::to_string(r) + ")");
    if (!(lambda_ >= 0.0) || !std::isfinite(lambda_))
      throw Error("ClientShard: lambda must be finite and non-negative");
  }

  Index dim() const noexcept { return features_.cols(); }
  Index samples() const noexcept { return features_.rows(); }
  const FeatureMatrix& features() const noexcept { return features_; }
  const Vec& labels() const noexcept { return labels_; }
  double lambda() const noexcept { return lambda_; }
  Regularizer regularizer() const noexcept { return reg_; }
  Loss loss() const noexcept { return loss_; }

 private:
  FeatureMatrix features_;
  Vec labels_;
  double lambda_;
  Regularizer reg_;
  Loss loss_;
};

namespace detail {

// max(t, 0) + log1p(exp(-|t|)); finite for any finite t.
inline double softplus(double t) { return std::max(t, 0.0) + std::log1p(std::exp(-std::abs(t))); }

inline double sigmoid(double t) {
  if (t >= 0.0) return 1.0 / (1.0 + std::exp(-t));
  const double e = std::exp(t);
  return e / (1.0 + e);
}

inline double reg_value(Regularizer r, double xp) {
  if (r == Regularizer::L2) return 0.5 * xp * xp;
  const double s = xp * xp;
  return s / (1.0 + s);
}

inline double reg_first(Regularizer r, double xp) {
  if (r == Regularizer::L2) return xp;
  const double q = 1.0 + xp * xp;
  return 2.0 * xp / (q * q);
}

// (2 - 6x^2) / (1 + x^2)^3 for the nonconvex term; lies in [-1/2, 2].
inline double reg_second(Regularizer r, double xp) {
  if (r == Regularizer::L2) return 1.0;
  const double s = xp * xp;
  const double q = 1.0 + s;
  return (2.0 - 6.0 * s) / (q * q * q);
}

inline void check_x(const ClientShard& shard, const Vec& x) {
  require_dim(x, shard.dim(), "objective argument");
}

// z_j = <x, a_j>
inline Vec margins(const ClientShard& shard, const Vec& x) { return shard.features() * x; }

// Loss and its derivative in the margin z = <x, a_j>.
inline double loss_value(Loss l, double z, double b) {
  if (l == Loss::Squared) return 0.5 * (z - b) * (z - b);
  return softplus(-b * z);
}
inline double loss_first(Loss l, double z, double b) {
  if (l == Loss::Squared) return z - b;
  return -b * sigmoid(-b * z);
}

// w_j = sigma(z_j) sigma(-z_j) for the logistic loss, 1 for least squares.
inline Vec curvature_weights(const ClientShard& shard, const Vec& x) {
  if (shard.loss() == Loss::Squared) return Vec::Ones(shard.samples());
  Vec z = margins(shard, x);
  for (Index j = 0; j < z.size(); ++j) z[j] = sigmoid(z[j]) * sigmoid(-z[j]);
  return z;
}

}  // namespace detail

inline double value(const ClientShard& shard, const Vec& x) {
  detail::check_x(shard, x);
  const Vec z = detail::margins(shard, x);
  double loss = 0.0;
  for (Index j = 0; j < z.size(); ++j) loss += detail::loss_value(shard.loss(), z[j], shard.labels()[j]);
  loss /= static_cast<double>(shard.samples());
  double reg = 0.0;
  for (Index p = 0; p < x.size(); ++p) reg += detail::reg_value(shard.regularizer(), x[p]);
  return loss + shard.lambda() * reg;
}

inline Vec gradient(const ClientShard& shard, const Vec& x) {
  detail::check_x(shard, x);
  Vec c = detail::margins(shard, x);
  for (Index j = 0; j < c.size(); ++j) c[j] = detail::loss_first(shard.loss(), c[j], shard.labels()[j]);
  Vec g = shard.features().transpose() * c;
  g /= static_cast<double>(shard.samples());
  for (Index p = 0; p < x.size(); ++p)
    g[p] += shard.lambda() * detail::reg_first(shard.regularizer(), x[p]);
  return g;
}

/// Column j of the local Hessian from one weighted pass over the features.
inline Vec hessian_column(const ClientShard& shard, const Vec& x, Index j) {
  detail::check_x(shard, x);
  if (j < 0 || j >= shard.dim())
    throw Error("hessian_column: index " + std::to_string(j) + " out of range [0, " +
                std::to_string(shard.dim()) + ")");
  Vec c = detail::curvature_weights(shard, x);
  c.array() *= shard.features().col(j).array();
  Vec col = shard.features().transpose() * c;
  col /= static_cast<double>(shard.samples());
  col[j] += shard.lambda() * detail::reg_second(shard.regularizer(), x[j]);
  return col;
}

/// Local Hessian-vector product in O(m d).
inline Vec hvp(const ClientShard& shard, const Vec& x, const Vec& v) {
  detail::check_x(shard, x);
  require_dim(v, shard.dim(), "hvp direction");
  Vec c = detail::curvature_weights(shard, x);
  c.array() *= (shard.features() * v).array();
  Vec out = shard.features().transpose() * c;
  out /= static_cast<double>(shard.samples());
  for (Index p = 0; p < x.size(); ++p)
    out[p] += shard.lambda() * detail::reg_second(shard.regularizer(), x[p]) * v[p];
  return out;
}

// Aggregation over clients always sums in ascending client order, then
// divides by n. Every component that forms a global mean uses these helpers,
// which keeps results bit-identical across transports.

inline Vec mean_in_order(std::span<const Vec> parts) {
  if (parts.empty()) throw Error("mean_in_order: no parts");
  Vec sum = parts[0];
  for (std::size_t i = 1; i < parts.size(); ++i) sum += parts[i];
  sum /= static_cast<double>(parts.size());
  return sum;
}

inline void require_shards(std::span<const ClientShard> shards) {
  if (shards.empty()) throw Error("global objective: empty shard list");
  for (const auto& s : shards)
    if (s.dim() != shards[0].dim())
      throw DimensionMismatch("global objective: shard dimension", shards[0].dim(), s.dim());
}

inline double global_value(std::span<const ClientShard> shards, const Vec& x) {
  require_shards(shards);
  double sum = 0.0;
  for (const auto& s : shards) sum += value(s, x);
  return sum / static_cast<double>(shards.size());
}

inline Vec global_gradient(std::span<const ClientShard> shards, const Vec& x) {
  require_shards(shards);
  std::vector<Vec> parts;
  parts.reserve(shards.size());
  for (const auto& s : shards) parts.push_back(gradient(s, x));
  return mean_in_order(parts);
}

}  // namespace c2eden

#endif  // C2EDEN_OBJECTIVE_HPP
