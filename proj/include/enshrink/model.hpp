#pragma once

#include <functional>
#include <optional>
#include <random>

#include "enshrink/linalg.hpp"

namespace enshrink {

using Rng = std::mt19937_64;

struct ModelState {
  Vector values;
  double time = 0.0;
};

struct ModelConfig {
  int n = 40;
  double forcing = 8.0;
  double step = 0.05;

  void validate() const;
};

/// Additive model error N(0, Q). The default-constructed value is the zero
/// (perfect model) spec; otherwise a symmetric square root of Q is cached so
/// that draws cost one matrix-vector product.
class ModelErrorSpec {
 public:
  ModelErrorSpec() = default;

  static ModelErrorSpec zero() { return {}; }
  static ModelErrorSpec from_covariance(const Matrix& q);
  static ModelErrorSpec isotropic(int n, double variance);

  bool is_zero() const { return !factor_.has_value(); }
  const Matrix& covariance() const { return *covariance_; }

  /// One draw from N(0, Q); zero vector of length `n` for the zero spec.
  Vector draw(Eigen::Index n, Rng& rng) const;

 private:
  std::optional<Matrix> covariance_;
  std::optional<Matrix> factor_;
};

using Tendency = std::function<Vector(const Vector&)>;

/// Lorenz '96: y'_i = -y_{i-1}(y_{i-2} - y_{i+1}) - y_i + F, cyclic indices.
Vector lorenz96_tendency(const Vector& state, double forcing);

Tendency lorenz96(double forcing);

/// Classical four-stage Runge-Kutta step. Throws IntegrationBlowup if any
/// stage or the result is non-finite.
ModelState rk4_step(const Tendency& tendency, const ModelState& state, double h);

ModelState integrate(const Tendency& tendency, ModelState state, int steps, double h);

/// `steps` RK4 steps followed by one additive draw from N(0, Q).
ModelState forecast_member(const Tendency& tendency, const ModelState& state, int steps,
                           double h, const ModelErrorSpec& q, Rng& rng);

Vector standard_normal(Eigen::Index n, Rng& rng);

}  // namespace enshrink
