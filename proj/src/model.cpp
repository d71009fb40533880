#include "enshrink/model.hpp"

#include <algorithm>
#include <string>

#include "enshrink/errors.hpp"

namespace enshrink {

void ModelConfig::validate() const {
  if (n < 4) {
    throw Error(ErrorKind::InvalidModelDimension,
                "Lorenz '96 needs n >= 4, got " + std::to_string(n));
  }
  if (!(step > 0.0)) throw Error(ErrorKind::Config, "step size must be positive");
}

ModelErrorSpec ModelErrorSpec::from_covariance(const Matrix& q) {
  require_symmetric(q, "model error covariance");
  const FlooredEigen eig = floored_eigen(q);
  const double scale = std::max(1.0, eig.values.cwiseAbs().maxCoeff());
  if (eig.floored_mass > 1e-12 * scale) {
    throw Error(ErrorKind::Domain, "model error covariance has negative eigenvalues");
  }
  ModelErrorSpec spec;
  spec.covariance_ = q;
  spec.factor_ = symmetric_sqrt(eig);
  return spec;
}

ModelErrorSpec ModelErrorSpec::isotropic(int n, double variance) {
  if (variance == 0.0) return zero();
  return from_covariance(variance * Matrix::Identity(n, n));
}

Vector ModelErrorSpec::draw(Eigen::Index n, Rng& rng) const {
  if (!factor_) return Vector::Zero(n);
  if (factor_->rows() != n) {
    throw Error(ErrorKind::ShapeMismatch, "model error dimension mismatch");
  }
  return *factor_ * standard_normal(n, rng);
}

Vector standard_normal(Eigen::Index n, Rng& rng) {
  std::normal_distribution<double> normal;
  Vector v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = normal(rng);
  return v;
}

Vector lorenz96_tendency(const Vector& y, double forcing) {
  const Eigen::Index n = y.size();
  if (n < 4) {
    throw Error(ErrorKind::InvalidModelDimension,
                "Lorenz '96 needs n >= 4, got " + std::to_string(n));
  }
  Vector dy(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double ym1 = y((i + n - 1) % n);
    const double ym2 = y((i + n - 2) % n);
    const double yp1 = y((i + 1) % n);
    dy(i) = -ym1 * (ym2 - yp1) - y(i) + forcing;
  }
  return dy;
}

Tendency lorenz96(double forcing) {
  return [forcing](const Vector& y) { return lorenz96_tendency(y, forcing); };
}

namespace {

void check_finite(const Vector& v, double t) {
  if (!v.allFinite()) throw IntegrationBlowup(t);
}

}  // namespace

ModelState rk4_step(const Tendency& f, const ModelState& state, double h) {
  if (!(h > 0.0)) throw Error(ErrorKind::Domain, "step size must be positive");
  const Vector& y = state.values;
  const double t = state.time;

  const Vector k1 = f(y);
  check_finite(k1, t);
  const Vector k2 = f(y + 0.5 * h * k1);
  check_finite(k2, t + 0.5 * h);
  const Vector k3 = f(y + 0.5 * h * k2);
  check_finite(k3, t + 0.5 * h);
  const Vector k4 = f(y + h * k3);
  check_finite(k4, t + h);

  ModelState out{y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4), t + h};
  check_finite(out.values, out.time);
  return out;
}

ModelState integrate(const Tendency& f, ModelState state, int steps, double h) {
  for (int s = 0; s < steps; ++s) state = rk4_step(f, state, h);
  return state;
}

ModelState forecast_member(const Tendency& f, const ModelState& state, int steps, double h,
                           const ModelErrorSpec& q, Rng& rng) {
  if (steps < 1) throw Error(ErrorKind::Domain, "forecast needs at least one step");
  ModelState out = integrate(f, state, steps, h);
  if (!q.is_zero()) out.values += q.draw(out.values.size(), rng);
  return out;
}

}  // namespace enshrink
