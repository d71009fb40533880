#pragma once

#include <Eigen/Dense>

namespace enshrink {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Eigendecomposition of a symmetric matrix with negative eigenvalues clamped
/// to zero. `floored_mass` is the sum of |λ| over the clamped eigenvalues.
struct FlooredEigen {
  Matrix vectors;
  Vector values;  // ascending, all >= 0
  double floored_mass = 0.0;
};

FlooredEigen floored_eigen(const Matrix& sym);

/// Unique symmetric PSD square root V·diag(√max(λ,0))·Vᵀ.
///
/// Throws ErrorKind::NotSymmetric if the input departs from symmetry by more
/// than 1e-10 (relative to max(1, ‖M‖_F)). When `floored_mass` is non-null it
/// receives the total magnitude of negative eigenvalues that were clamped.
Matrix symmetric_sqrt(const Matrix& sym, double* floored_mass = nullptr);

/// Square root from an already floored decomposition.
Matrix symmetric_sqrt(const FlooredEigen& eig);

/// Reassembles V·diag(λ)·Vᵀ.
Matrix recompose(const FlooredEigen& eig);

void require_symmetric(const Matrix& m, const char* what);

/// Cholesky factorization of a symmetric positive definite matrix; throws
/// ErrorKind::SingularInnovationCovariance when the factorization fails.
class SpdSolver {
 public:
  explicit SpdSolver(const Matrix& spd);

  Matrix solve(const Matrix& rhs) const { return llt_.solve(rhs); }
  Vector solve(const Vector& rhs) const { return llt_.solve(rhs); }
  Eigen::Index size() const { return llt_.rows(); }

 private:
  Eigen::LLT<Matrix> llt_;
};

/// Moore-Penrose pseudo-inverse retaining at most `keep` leading singular
/// values (and never singular values that are exactly zero).
Matrix truncated_pseudo_inverse(const Matrix& a, Eigen::Index keep);

/// Row-wise mean subtraction applied to a copy.
Matrix center_columns(const Matrix& m);

}  // namespace enshrink
