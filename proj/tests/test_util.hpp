#ifndef C2EDEN_TEST_UTIL_HPP
#define C2EDEN_TEST_UTIL_HPP

#include <random>
#include <string>
#include <vector>

#include "c2eden/data_io.hpp"
#include "c2eden/numkit.hpp"
#include "c2eden/objective.hpp"

namespace c2eden::test {

inline std::string data_path(const std::string& name) { return std::string(C2EDEN_DATA_DIR) + "/" + name; }

inline Dataset toy() { return normalize_labels(load_libsvm_file(data_path("toy.libsvm"), 0)); }

inline Vec random_vec(std::mt19937_64& rng, Index d, double scale = 1.0) {
  std::normal_distribution<double> nd(0.0, scale);
  Vec v(d);
  for (Index i = 0; i < d; ++i) v[i] = nd(rng);
  return v;
}

inline SymMat random_sym(std::mt19937_64& rng, Index d, double scale = 1.0) {
  std::normal_distribution<double> nd(0.0, scale);
  Eigen::MatrixXd a(d, d);
  for (Index i = 0; i < d; ++i)
    for (Index j = 0; j < d; ++j) a(i, j) = nd(rng);
  return SymMat::from_lower(0.5 * (a + a.transpose()));
}

/// Dense synthetic shard with Gaussian features and labels from a noisy
/// linear model.
inline ClientShard random_shard(std::mt19937_64& rng, Index m, Index d, double lambda, Regularizer reg,
                                double scale = 1.0) {
  std::normal_distribution<double> nd(0.0, scale);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  FeatureMatrix a(m, d);
  Vec b(m);
  const Vec w = random_vec(rng, d);
  for (Index i = 0; i < m; ++i) {
    for (Index j = 0; j < d; ++j) a(i, j) = nd(rng);
    const double p = 1.0 / (1.0 + std::exp(-a.row(i).dot(w)));
    b[i] = u(rng) < p ? 1.0 : -1.0;
  }
  return ClientShard(std::move(a), std::move(b), lambda, reg);
}

}  // namespace c2eden::test

#endif  // C2EDEN_TEST_UTIL_HPP
