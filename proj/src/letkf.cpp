#include <cmath>

#include "enshrink/errors.hpp"
#include "enshrink/filters.hpp"
#include "local_transform.hpp"

namespace enshrink {
namespace detail {

Vector require_diagonal(const Matrix& r) {
  const Matrix off = r - Matrix(r.diagonal().asDiagonal());
  if (off.cwiseAbs().maxCoeff() > 0.0) {
    throw Error(ErrorKind::UnsupportedObservationError,
                "local analysis requires a diagonal observation error covariance");
  }
  const Vector diag = r.diagonal();
  if ((diag.array() <= 0.0).any()) {
    throw Error(ErrorKind::SingularInnovationCovariance, "R has non-positive variances");
  }
  return diag;
}

LocalObservations select_observations(Eigen::Index j, Eigen::Index obs_count,
                                      const DistanceFn& distance, TaperKind kind,
                                      double radius) {
  LocalObservations local;
  for (Eigen::Index k = 0; k < obs_count; ++k) {
    const double d = distance(j, k);
    const double w = std::isinf(radius) ? taper(kind, 0.0) : taper(kind, d / radius);
    if (w > 0.0) {
      local.index.push_back(k);
      local.weight.push_back(w);
    }
  }
  return local;
}

LocalTransform local_transform(const Matrix& z, const Vector& d, const Vector& variance,
                               const LocalObservations& local) {
  const Eigen::Index k = z.cols();
  const auto count = static_cast<Eigen::Index>(local.index.size());
  LocalTransform out;
  if (count == 0) {
    out.sqrt = Matrix::Identity(k, k);
    out.increment = Vector::Zero(k);
    return out;
  }
  Matrix zl(count, k);
  Vector rinv(count), dl(count);
  for (Eigen::Index i = 0; i < count; ++i) {
    const Eigen::Index o = local.index[i];
    zl.row(i) = z.row(o);
    rinv(i) = local.weight[i] / variance(o);
    dl(i) = d(o);
  }
  Matrix precision = zl.transpose() * rinv.asDiagonal() * zl;
  precision.diagonal().array() += 1.0;
  Eigen::SelfAdjointEigenSolver<Matrix> eig(precision);
  const Matrix& v = eig.eigenvectors();
  const Vector inv = eig.eigenvalues().cwiseInverse();
  out.sqrt = v * inv.cwiseSqrt().asDiagonal() * v.transpose();
  const Vector rhs = zl.transpose() * rinv.cwiseProduct(dl);
  out.increment = v * inv.asDiagonal() * (v.transpose() * rhs);
  out.identity = false;
  return out;
}

}  // namespace detail

TransformResult letkf_analysis(const Ensemble& forecast, const ObservationRecord& obs,
                               const ObservationOperator& h, const FilterConfig& cfg,
                               const DistanceFn& distance) {
  if (!distance) throw Error(ErrorKind::Config, "LETKF needs a distance function");
  const Vector variance = detail::require_diagonal(obs.error_covariance);
  const AnomalySet s = inflate(anomaly_set(forecast, h, obs), cfg.inflation);

  const Eigen::Index n = s.state.rows();
  Matrix analysis_a(n, s.size());
  Vector mean(n);
  int unobserved = 0;
  for (Eigen::Index j = 0; j < n; ++j) {
    const auto local = detail::select_observations(j, s.obs.rows(), distance, cfg.taper,
                                                   cfg.radius);
    const auto t = detail::local_transform(s.obs, s.innovation, variance, local);
    if (t.identity) ++unobserved;
    mean(j) = s.mean(j) + s.state.row(j).dot(t.increment);
    analysis_a.row(j) = s.state.row(j) * t.sqrt;
  }

  TransformResult out;
  out.mean = mean;
  out.analysis = reconstruct(mean, analysis_a, forecast.time);
  out.diagnostics["unobserved_variables"] = unobserved;
  return out;
}

}  // namespace enshrink
