#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "enshrink/linalg.hpp"

namespace enshrink {

/// n×N matrix of realizations, one column per member.
struct Ensemble {
  Matrix members;
  double time = 0.0;

  Eigen::Index size() const { return members.cols(); }
  Eigen::Index dim() const { return members.rows(); }
};

class ObservationOperator {
 public:
  using Map = std::function<Vector(const Vector&)>;

  static ObservationOperator identity(Eigen::Index n);
  static ObservationOperator linear(Matrix h, std::vector<double> locations = {});
  static ObservationOperator nonlinear(std::string name, Map map, Eigen::Index output_dim,
                                       std::vector<double> locations = {});
  /// x ↦ x∘x, observed at every grid point.
  static ObservationOperator elementwise_square(Eigen::Index n);

  Vector apply(const Vector& x) const;

  bool is_linear() const { return matrix_.has_value(); }
  const Matrix& matrix() const { return *matrix_; }
  Eigen::Index output_dim() const { return output_dim_; }
  const std::string& name() const { return name_; }

  /// Grid coordinate of each observation; empty when no spatial layout is known.
  const std::vector<double>& locations() const { return locations_; }

 private:
  std::string name_;
  Map map_;
  std::optional<Matrix> matrix_;
  Eigen::Index output_dim_ = 0;
  std::vector<double> locations_;
};

struct ObservationRecord {
  Vector values;
  Matrix error_covariance;
  double time = 0.0;

  /// Checks shape and symmetric positive definiteness of R.
  void validate() const;
};

struct Decomposition {
  Vector mean;
  Matrix anomalies;  // (X - x̄1ᵀ)/√(N-1)
};

Decomposition decompose(const Ensemble& ensemble);

/// X = x̄1ᵀ + √(N-1)A.
Ensemble reconstruct(const Vector& mean, const Matrix& anomalies, double time = 0.0);

struct ObservedEnsemble {
  Matrix anomalies;  // Z
  Vector innovation;  // d = y° - H̄
  Vector mean;        // H̄
};

/// Applies H member by member and centers; never uses H·A.
ObservedEnsemble observe(const Ensemble& ensemble, const ObservationOperator& h,
                         const ObservationRecord& obs);

/// Member images H(x_k) without centering (m×N).
Matrix apply_members(const Matrix& members, const ObservationOperator& h);

struct AnomalySet {
  Matrix state;      // A
  Matrix obs;        // Z
  Vector mean;       // x̄
  Vector obs_mean;   // H̄
  Vector innovation; // d
  double inflation = 1.0;

  Eigen::Index size() const { return state.cols(); }
};

AnomalySet anomaly_set(const Ensemble& ensemble, const ObservationOperator& h,
                       const ObservationRecord& obs);

/// Scales A and Z by α ≥ 1; means and innovation untouched.
AnomalySet inflate(AnomalySet anomalies, double alpha);

}  // namespace enshrink
