#include "enshrink/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "enshrink/errors.hpp"

namespace enshrink {

void require_symmetric(const Matrix& m, const char* what) {
  if (m.rows() != m.cols()) {
    throw Error(ErrorKind::ShapeMismatch, std::string(what) + " is not square");
  }
  const double scale = std::max(1.0, m.norm());
  if ((m - m.transpose()).norm() > 1e-10 * scale) {
    throw Error(ErrorKind::NotSymmetric, std::string(what) + " is not symmetric");
  }
}

FlooredEigen floored_eigen(const Matrix& sym) {
  require_symmetric(sym, "matrix");
  const Matrix s = 0.5 * (sym + sym.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> solver(s);
  FlooredEigen out;
  out.vectors = solver.eigenvectors();
  out.values = solver.eigenvalues();
  for (Eigen::Index i = 0; i < out.values.size(); ++i) {
    if (out.values(i) < 0.0) {
      out.floored_mass -= out.values(i);
      out.values(i) = 0.0;
    }
  }
  return out;
}

Matrix symmetric_sqrt(const FlooredEigen& eig) {
  return eig.vectors * eig.values.cwiseSqrt().asDiagonal() * eig.vectors.transpose();
}

Matrix recompose(const FlooredEigen& eig) {
  return eig.vectors * eig.values.asDiagonal() * eig.vectors.transpose();
}

Matrix symmetric_sqrt(const Matrix& sym, double* floored_mass) {
  const FlooredEigen eig = floored_eigen(sym);
  if (floored_mass) *floored_mass = eig.floored_mass;
  return symmetric_sqrt(eig);
}

SpdSolver::SpdSolver(const Matrix& spd) : llt_(spd) {
  if (llt_.info() != Eigen::Success) {
    throw Error(ErrorKind::SingularInnovationCovariance,
                "matrix is not symmetric positive definite");
  }
}

Matrix truncated_pseudo_inverse(const Matrix& a, Eigen::Index keep) {
  Eigen::JacobiSVD<Matrix> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vector& s = svd.singularValues();
  const Eigen::Index k = std::min<Eigen::Index>(keep, s.size());
  Matrix out = Matrix::Zero(a.cols(), a.rows());
  for (Eigen::Index i = 0; i < k; ++i) {
    if (s(i) == 0.0) break;
    out += svd.matrixV().col(i) * (1.0 / s(i)) * svd.matrixU().col(i).transpose();
  }
  return out;
}

Matrix center_columns(const Matrix& m) {
  return m.colwise() - m.rowwise().mean();
}

}  // namespace enshrink
