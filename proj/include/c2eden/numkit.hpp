#ifndef C2EDEN_NUMKIT_HPP
#define C2EDEN_NUMKIT_HPP

// Dense linear-algebra kernel shared by every other module. Vectors are plain
// Eigen column vectors; symmetric matrices go through SymMat so that symmetry
// holds exactly no matter how the matrix was filled.

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <string>

#include "c2eden/error.hpp"

namespace c2eden {

using Vec = Eigen::VectorXd;
using Index = Eigen::Index;

inline bool all_finite(const Vec& v) { return v.allFinite(); }

inline void require_finite(const Vec& v, const char* what) {
  if (!v.allFinite()) throw NonFiniteInput(std::string(what) + " has non-finite entries");
}

inline void require_dim(const Vec& v, Index d, const char* what) {
  if (v.size() != d) throw DimensionMismatch(what, d, v.size());
}

inline Vec unit_vector(Index d, Index j) {
  Vec e = Vec::Zero(d);
  e[j] = 1.0;
  return e;
}

/// Dense symmetric matrix. Every mutator writes the mirrored entry as well, so
/// A(i,j) == A(j,i) bit-for-bit at all times.
class SymMat {
 public:
  SymMat() = default;
  explicit SymMat(Index d) : a_(Eigen::MatrixXd::Zero(d, d)) {}

  /// Takes the lower triangle of `dense` and mirrors it.
  static SymMat from_lower(const Eigen::MatrixXd& dense) {
    if (dense.rows() != dense.cols())
      throw DimensionMismatch("SymMat::from_lower (square)", dense.rows(), dense.cols());
    SymMat m(dense.rows());
    m.a_.triangularView<Eigen::Lower>() = dense.triangularView<Eigen::Lower>();
    m.a_.triangularView<Eigen::StrictlyUpper>() =
        dense.triangularView<Eigen::StrictlyLower>().transpose();
    return m;
  }

  static SymMat identity(Index d) {
    SymMat m(d);
    m.a_.setIdentity();
    return m;
  }

  static SymMat diagonal(const Vec& diag) {
    SymMat m(diag.size());
    m.a_.diagonal() = diag;
    return m;
  }

  Index dim() const noexcept { return a_.rows(); }
  double operator()(Index i, Index j) const { return a_(i, j); }
  const Eigen::MatrixXd& dense() const noexcept { return a_; }

  void set(Index i, Index j, double v) {
    a_(i, j) = v;
    a_(j, i) = v;
  }

  /// Installs column j from its lower part (rows j..d-1) and mirrors it into
  /// row j. Filling every column this way yields a complete symmetric matrix
  /// whose (i,j), i >= j, entry comes from column j.
  void set_column(Index j, const Vec& column) {
    require_dim(column, dim(), "SymMat::set_column");
    for (Index i = j; i < dim(); ++i) set(i, j, column[i]);
  }

  void add_diagonal(double c) { a_.diagonal().array() += c; }

  SymMat& operator+=(const SymMat& o) {
    a_ += o.a_;
    return *this;
  }
  SymMat& operator*=(double c) {
    a_ *= c;
    return *this;
  }

  Vec operator*(const Vec& v) const {
    require_dim(v, dim(), "SymMat * Vec");
    return a_ * v;
  }

  bool all_finite() const { return a_.allFinite(); }
  double frobenius_norm() const { return a_.norm(); }

  friend bool operator==(const SymMat& a, const SymMat& b) {
    return a.dim() == b.dim() && a.a_ == b.a_;
  }

 private:
  Eigen::MatrixXd a_;
};

/// Eigenvalues in ascending order, eigenvectors as orthonormal columns.
struct EigenDecomp {
  Vec values;
  Eigen::MatrixXd vectors;

  double min() const { return values[0]; }
  /// Spectral norm of the decomposed matrix.
  double spectral_norm() const {
    return std::max(std::abs(values[0]), std::abs(values[values.size() - 1]));
  }
};

// Eigen's SelfAdjointEigenSolver does Householder tridiagonalization followed
// by implicit symmetric QR, and returns eigenvalues sorted ascending.
inline EigenDecomp sym_eig(const SymMat& a) {
  if (a.dim() == 0) throw DimensionMismatch("sym_eig", 1, 0);
  if (!a.all_finite()) throw NonFiniteInput("sym_eig: matrix has non-finite entries");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(a.dense(), Eigen::ComputeEigenvectors);
  if (es.info() != Eigen::Success)
    throw NumericalFailure("sym_eig: QR iteration did not converge");
  return EigenDecomp{es.eigenvalues(), es.eigenvectors()};
}

inline double min_eigenvalue(const SymMat& a) {
  if (a.dim() == 0) throw DimensionMismatch("min_eigenvalue", 1, 0);
  if (!a.all_finite()) throw NonFiniteInput("min_eigenvalue: matrix has non-finite entries");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(a.dense(), Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success)
    throw NumericalFailure("min_eigenvalue: QR iteration did not converge");
  return es.eigenvalues()[0];
}

/// Solves A x = b for positive definite A. Rejects A whose smallest
/// eigenvalue is at most 1e-12 * ||A||.
inline Vec solve_spd(const SymMat& a, const Vec& b) {
  require_dim(b, a.dim(), "solve_spd");
  require_finite(b, "solve_spd rhs");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(a.dense(), Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success)
    throw NumericalFailure("solve_spd: QR iteration did not converge");
  const Vec& ev = es.eigenvalues();
  const double norm = std::max(std::abs(ev[0]), std::abs(ev[ev.size() - 1]));
  if (!(ev[0] > 1e-12 * norm)) throw NotPositiveDefinite(ev[0]);
  Eigen::LLT<Eigen::MatrixXd> llt(a.dense());
  if (llt.info() != Eigen::Success) throw NotPositiveDefinite(ev[0]);
  return llt.solve(b);
}

}  // namespace c2eden

#endif  // C2EDEN_NUMKIT_HPP
