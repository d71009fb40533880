#pragma once

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>

#include "enshrink/climatology.hpp"
#include "enshrink/ensemble.hpp"
#include "enshrink/shrinkage.hpp"
#include "enshrink/taper.hpp"

namespace enshrink {

enum class FilterVariant { ETKF, LETKF, ShrinkSymmetric, ShrinkLowRank, ShrinkSplit };

FilterVariant parse_variant(std::string_view name);
std::string_view to_string(FilterVariant v);
bool uses_shrinkage(FilterVariant v);

/// Upper bound applied to γ before the 1/√(1-γ) rescaling of truncated
/// extended anomalies.
inline constexpr double kGammaCeiling = 1.0 - 1e-6;

struct FilterConfig {
  FilterVariant variant = FilterVariant::ETKF;
  double inflation = 1.0;
  GammaPolicy gamma = GammaPolicy::rblw();
  SyntheticEnsembleSpec synthetic;
  TaperKind taper = TaperKind::GaspariCohn;
  double radius = 4.0;  // grid units
  bool recenter_analysis_anomalies = false;
  /// Local transforms over the extended ensemble (ShrinkSymmetric only).
  bool localize_shrinkage = false;

  void validate() const;
};

/// Distance from state index j to observation index k, in grid units.
using DistanceFn = std::function<double(Eigen::Index state_index, Eigen::Index obs_index)>;

struct TransformResult {
  Ensemble analysis;
  Vector mean;
  double gamma = 0.0;
  double mu = 0.0;
  std::map<std::string, double> diagnostics;
};

/// [√(1-γ)A | √γ𝒜] and the matching observation-space block.
struct ExtendedAnomalySet {
  Matrix state;
  Matrix obs;
  double gamma = 0.0;
  Eigen::Index physical_size = 0;
};

ExtendedAnomalySet build_extended(const Matrix& a, const Matrix& z, const Matrix& synthetic_a,
                                  const Matrix& synthetic_z, double gamma);

/// Ensemble-space transform for anomalies Z and error covariance R:
/// G = I - Zᵀ(ZZᵀ + R)⁻¹Z, decomposed with eigenvalues floored at zero.
struct EnsembleTransform {
  FlooredEigen gain;  // eigen decomposition of G
  Matrix sqrt;        // symmetric square root of G
};

EnsembleTransform ensemble_transform(const Matrix& z, const Matrix& r);

/// Global ETKF analysis with multiplicative inflation α.
TransformResult etkf_analysis(const Ensemble& forecast, const ObservationRecord& obs,
                              const ObservationOperator& h, double alpha);

/// Analysis from precomputed (already inflated) anomalies.
TransformResult etkf_update(const AnomalySet& anomalies, const Matrix& r, double time = 0.0);

/// The weight (γ), target scale (μ) and sphericity for inflated anomalies A.
ShrinkageEstimate estimate_shrinkage(const Matrix& a, const TargetCovariance& p,
                                     const GammaPolicy& policy);

/// Stochastic shrinkage ETKF (variants ShrinkSymmetric / ShrinkLowRank).
/// `localization` is consulted only when cfg.localize_shrinkage is set.
TransformResult shrinkage_etkf_analysis(const Ensemble& forecast, const ObservationRecord& obs,
                                        const ObservationOperator& h, const TargetCovariance& p,
                                        const FilterConfig& cfg, Rng& rng,
                                        const DistanceFn& localization = {});

/// Shrinkage analysis from given forecast and synthetic anomalies; the
/// deterministic core of shrinkage_etkf_analysis.
TransformResult shrinkage_update(const AnomalySet& forecast, const Matrix& synthetic_a,
                                 const Matrix& synthetic_z, const Matrix& r, double gamma,
                                 FilterVariant variant, bool recenter = false);

/// Physical and synthetic transforms of the block-diagonal (split) formulation.
struct SplitTransform {
  Matrix physical;   // T  (N×N)
  Matrix synthetic;  // 𝒯 (M×M)
  double floored_mass = 0.0;
};

SplitTransform split_transform(const Matrix& a, const Matrix& z, const Matrix& synthetic_a,
                               const Matrix& synthetic_z, const Matrix& r, double gamma);

struct SplitResult {
  TransformResult result;
  Matrix synthetic_analysis_anomalies;  // 𝒜𝒯
};

SplitResult split_update(const AnomalySet& forecast, const Matrix& synthetic_a,
                         const Matrix& synthetic_z, const Matrix& r, double gamma);

SplitResult split_shrinkage_analysis(const Ensemble& forecast, const ObservationRecord& obs,
                                     const ObservationOperator& h, const TargetCovariance& p,
                                     const FilterConfig& cfg, Rng& rng);

/// LETKF: each state variable is updated by its own ETKF transform with
/// R⁻¹ tapered by taper(cfg.taper, distance/cfg.radius). R must be diagonal.
TransformResult letkf_analysis(const Ensemble& forecast, const ObservationRecord& obs,
                               const ObservationOperator& h, const FilterConfig& cfg,
                               const DistanceFn& distance);

/// Dispatches on cfg.variant. `p` may be null for ETKF/LETKF.
TransformResult analyze(const Ensemble& forecast, const ObservationRecord& obs,
                        const ObservationOperator& h, const TargetCovariance* p,
                        const FilterConfig& cfg, Rng& rng, const DistanceFn& distance);

}  // namespace enshrink
