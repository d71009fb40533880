#include "enshrink/ensemble.hpp"

#include <cmath>
#include <exception>
#include <utility>

#include "enshrink/errors.hpp"

namespace enshrink {

ObservationOperator ObservationOperator::identity(Eigen::Index n) {
  std::vector<double> loc(n);
  for (Eigen::Index i = 0; i < n; ++i) loc[i] = static_cast<double>(i);
  ObservationOperator op = linear(Matrix::Identity(n, n), std::move(loc));
  op.name_ = "identity";
  return op;
}

ObservationOperator ObservationOperator::linear(Matrix h, std::vector<double> locations) {
  ObservationOperator op;
  op.name_ = "linear";
  op.output_dim_ = h.rows();
  op.map_ = [h](const Vector& x) -> Vector { return h * x; };
  op.matrix_ = std::move(h);
  op.locations_ = std::move(locations);
  return op;
}

ObservationOperator ObservationOperator::nonlinear(std::string name, Map map,
                                                   Eigen::Index output_dim,
                                                   std::vector<double> locations) {
  ObservationOperator op;
  op.name_ = std::move(name);
  op.map_ = std::move(map);
  op.output_dim_ = output_dim;
  op.locations_ = std::move(locations);
  return op;
}

ObservationOperator ObservationOperator::elementwise_square(Eigen::Index n) {
  std::vector<double> loc(n);
  for (Eigen::Index i = 0; i < n; ++i) loc[i] = static_cast<double>(i);
  return nonlinear(
      "square", [](const Vector& x) -> Vector { return x.array().square().matrix(); }, n,
      std::move(loc));
}

Vector ObservationOperator::apply(const Vector& x) const {
  Vector y = map_(x);
  if (y.size() != output_dim_) {
    throw Error(ErrorKind::ObservationOperator,
                name_ + " returned " + std::to_string(y.size()) + " values, expected " +
                    std::to_string(output_dim_));
  }
  return y;
}

void ObservationRecord::validate() const {
  const Eigen::Index m = values.size();
  if (error_covariance.rows() != m || error_covariance.cols() != m) {
    throw Error(ErrorKind::ShapeMismatch, "R must be m×m with m = number of observations");
  }
  require_symmetric(error_covariance, "R");
  Eigen::LLT<Matrix> llt(error_covariance);
  if (llt.info() != Eigen::Success) {
    throw Error(ErrorKind::SingularInnovationCovariance, "R is not positive definite");
  }
}

namespace {

void require_members(Eigen::Index count) {
  if (count < 2) {
    throw Error(ErrorKind::InsufficientEnsemble,
                "need at least 2 members, got " + std::to_string(count));
  }
}

}  // namespace

Decomposition decompose(const Ensemble& ensemble) {
  require_members(ensemble.size());
  Decomposition d;
  d.mean = ensemble.members.rowwise().mean();
  d.anomalies = (ensemble.members.colwise() - d.mean) /
                std::sqrt(static_cast<double>(ensemble.size() - 1));
  return d;
}

Ensemble reconstruct(const Vector& mean, const Matrix& anomalies, double time) {
  const double scale = std::sqrt(static_cast<double>(anomalies.cols() - 1));
  return Ensemble{(scale * anomalies).colwise() + mean, time};
}

Matrix apply_members(const Matrix& members, const ObservationOperator& h) {
  Matrix out(h.output_dim(), members.cols());
  for (Eigen::Index k = 0; k < members.cols(); ++k) {
    try {
      out.col(k) = h.apply(members.col(k));
    } catch (const std::exception& e) {
      throw Error(ErrorKind::ObservationOperator,
                  "member " + std::to_string(k) + ": " + e.what());
    }
  }
  return out;
}

ObservedEnsemble observe(const Ensemble& ensemble, const ObservationOperator& h,
                         const ObservationRecord& obs) {
  require_members(ensemble.size());
  if (obs.values.size() != h.output_dim()) {
    throw Error(ErrorKind::ShapeMismatch, "observation vector does not match operator");
  }
  const Matrix images = apply_members(ensemble.members, h);
  ObservedEnsemble out;
  out.mean = images.rowwise().mean();
  out.anomalies = (images.colwise() - out.mean) /
                  std::sqrt(static_cast<double>(ensemble.size() - 1));
  out.innovation = obs.values - out.mean;
  return out;
}

AnomalySet anomaly_set(const Ensemble& ensemble, const ObservationOperator& h,
                       const ObservationRecord& obs) {
  Decomposition d = decompose(ensemble);
  ObservedEnsemble o = observe(ensemble, h, obs);
  AnomalySet s;
  s.state = std::move(d.anomalies);
  s.mean = std::move(d.mean);
  s.obs = std::move(o.anomalies);
  s.obs_mean = std::move(o.mean);
  s.innovation = std::move(o.innovation);
  return s;
}

AnomalySet inflate(AnomalySet anomalies, double alpha) {
  if (!(alpha >= 1.0)) {
    throw Error(ErrorKind::InvalidInflation,
                "inflation must be >= 1, got " + std::to_string(alpha));
  }
  anomalies.state *= alpha;
  anomalies.obs *= alpha;
  anomalies.inflation *= alpha;
  return anomalies;
}

}  // namespace enshrink
