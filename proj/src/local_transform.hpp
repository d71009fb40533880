#pragma once

#include <vector>

#include "enshrink/filters.hpp"

namespace enshrink::detail {

/// Transform for one local analysis domain, in the ensemble space of Z:
/// G = (I + Zᵀ R̃⁻¹ Z)⁻¹ with R̃⁻¹ = diag(weights / R_kk) over the selected
/// observations, T = G^{1/2}, and the mean-increment weights G Zᵀ R̃⁻¹ d.
struct LocalTransform {
  Matrix sqrt;
  Vector increment;
  bool identity = true;  // no observation in range
};

struct LocalObservations {
  std::vector<Eigen::Index> index;
  std::vector<double> weight;
};

LocalObservations select_observations(Eigen::Index state_index, Eigen::Index obs_count,
                                       const DistanceFn& distance, TaperKind kind,
                                       double radius);

LocalTransform local_transform(const Matrix& z, const Vector& innovation,
                               const Vector& error_variance, const LocalObservations& local);

/// Diagonal of R; throws UnsupportedObservationError when R has off-diagonal entries.
Vector require_diagonal(const Matrix& r);

}  // namespace enshrink::detail
