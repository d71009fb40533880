#pragma once

#include <string>

#include "enshrink/ensemble.hpp"

namespace enshrink {

/// How the shrinkage weight γ is obtained at each analysis.
struct GammaPolicy {
  enum class Kind { Static, RBLW, ClosedForm };

  Kind kind = Kind::RBLW;
  double value = 0.0;  // Static only

  static GammaPolicy fixed(double gamma) { return {Kind::Static, gamma}; }
  static GammaPolicy rblw() { return {Kind::RBLW, 0.0}; }
  static GammaPolicy closed_form() { return {Kind::ClosedForm, 0.0}; }

  /// "rblw", "closed_form", or a number for a static weight.
  static GammaPolicy parse(const std::string& text);
  std::string label() const;
};

struct ShrinkageEstimate {
  double gamma = 0.0;
  double mu = 0.0;
  double sphericity = 0.0;
  GammaPolicy::Kind policy = GammaPolicy::Kind::RBLW;
};

/// Û = (n·Σσ⁴/(Σσ²)² - 1)/(n-1), the departure of the whitened sample
/// covariance from a multiple of the identity.
double sphericity(const Vector& singular_values, Eigen::Index n);

/// Rao-Blackwellized Ledoit-Wolf weight, clamped to 1. Pass N-1 as
/// `effective_size` when the mean is estimated from the same members.
/// Returns exactly 1 for Û ≤ 1e-12.
double rblw_gamma(double sphericity, Eigen::Index n, Eigen::Index effective_size);

/// Closed-form weight against a dense target P:
///   [ (1/N²)Σ‖x_k - x̄‖⁴ - (1/N)‖Ĉ‖²_F ] / ‖Ĉ - P‖²_F, clamped to [0, 1],
/// with Ĉ = AAᵀ. Returns 1 when Ĉ = P. O(n²N); small n only.
double closed_form_gamma(const Ensemble& ensemble, const Matrix& target);

/// Same estimator from scaled anomalies A (deviations are √(N-1)·A).
double closed_form_gamma_from_anomalies(const Matrix& anomalies, const Matrix& target);

}  // namespace enshrink
