#include "enshrink/filters.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "enshrink/errors.hpp"
#include "local_transform.hpp"

namespace enshrink {

FilterVariant parse_variant(std::string_view name) {
  if (name == "etkf") return FilterVariant::ETKF;
  if (name == "letkf") return FilterVariant::LETKF;
  if (name == "shrink_symmetric") return FilterVariant::ShrinkSymmetric;
  if (name == "shrink_lowrank") return FilterVariant::ShrinkLowRank;
  if (name == "shrink_split") return FilterVariant::ShrinkSplit;
  throw Error(ErrorKind::Config, "unknown filter variant '" + std::string(name) + "'");
}

std::string_view to_string(FilterVariant v) {
  switch (v) {
    case FilterVariant::ETKF: return "etkf";
    case FilterVariant::LETKF: return "letkf";
    case FilterVariant::ShrinkSymmetric: return "shrink_symmetric";
    case FilterVariant::ShrinkLowRank: return "shrink_lowrank";
    case FilterVariant::ShrinkSplit: return "shrink_split";
  }
  return "?";
}

bool uses_shrinkage(FilterVariant v) {
  return v == FilterVariant::ShrinkSymmetric || v == FilterVariant::ShrinkLowRank ||
         v == FilterVariant::ShrinkSplit;
}

void FilterConfig::validate() const {
  if (!(inflation >= 1.0)) {
    throw Error(ErrorKind::InvalidInflation, "inflation must be >= 1");
  }
  if (gamma.kind == GammaPolicy::Kind::Static && !(gamma.value >= 0.0 && gamma.value < 1.0)) {
    throw Error(ErrorKind::Config, "static gamma must lie in [0, 1)");
  }
  if (uses_shrinkage(variant) && synthetic.size < 2) {
    throw Error(ErrorKind::Config, "shrinkage variants need a synthetic size >= 2");
  }
  if (!(radius > 0.0)) throw Error(ErrorKind::Config, "localization radius must be positive");
  if (localize_shrinkage && variant != FilterVariant::ShrinkSymmetric) {
    throw Error(ErrorKind::Config, "localized shrinkage is only available for shrink_symmetric");
  }
}

ExtendedAnomalySet build_extended(const Matrix& a, const Matrix& z, const Matrix& sa,
                                  const Matrix& sz, double gamma) {
  if (!(gamma >= 0.0)) throw Error(ErrorKind::Domain, "gamma must be >= 0");
  if (gamma >= 1.0) {
    throw Error(ErrorKind::GammaAtBound, "gamma must be < 1 for the extended ensemble");
  }
  if (a.cols() < 2 || sa.cols() < 2) {
    throw Error(ErrorKind::InsufficientEnsemble, "extended ensemble needs N, M >= 2");
  }
  if (a.rows() != sa.rows() || z.rows() != sz.rows() || a.cols() != z.cols() ||
      sa.cols() != sz.cols()) {
    throw Error(ErrorKind::ShapeMismatch, "inconsistent anomaly blocks");
  }
  const double wp = std::sqrt(1.0 - gamma);
  const double ws = std::sqrt(gamma);
  ExtendedAnomalySet ext;
  ext.gamma = gamma;
  ext.physical_size = a.cols();
  ext.state.resize(a.rows(), a.cols() + sa.cols());
  ext.state << wp * a, ws * sa;
  ext.obs.resize(z.rows(), z.cols() + sz.cols());
  ext.obs << wp * z, ws * sz;
  return ext;
}

EnsembleTransform ensemble_transform(const Matrix& z, const Matrix& r) {
  if (r.rows() != z.rows() || r.cols() != z.rows()) {
    throw Error(ErrorKind::ShapeMismatch, "R does not match observation anomalies");
  }
  const SpdSolver s(z * z.transpose() + r);
  Matrix g = -z.transpose() * s.solve(z);
  g.diagonal().array() += 1.0;
  g = 0.5 * (g + g.transpose());
  EnsembleTransform t;
  t.gain = floored_eigen(g);
  t.sqrt = symmetric_sqrt(t.gain);
  return t;
}

namespace {

double condition_number(const FlooredEigen& eig) {
  const double lo = eig.values.minCoeff();
  const double hi = eig.values.maxCoeff();
  return lo > 0.0 ? std::sqrt(hi / lo) : std::numeric_limits<double>::infinity();
}

Matrix synthetic_obs_anomalies(const Ensemble& synthetic, const ObservationOperator& h) {
  const Matrix images = apply_members(synthetic.members, h);
  return center_columns(images) / std::sqrt(static_cast<double>(synthetic.size() - 1));
}

}  // namespace

TransformResult etkf_update(const AnomalySet& s, const Matrix& r, double time) {
  const EnsembleTransform t = ensemble_transform(s.obs, r);
  const Vector rinv_d = SpdSolver(r).solve(s.innovation);
  const Matrix analysis_a = s.state * t.sqrt;
  const Matrix analysis_z = s.obs * t.sqrt;

  TransformResult out;
  out.mean = s.mean + analysis_a * (analysis_z.transpose() * rinv_d);
  out.analysis = reconstruct(out.mean, analysis_a, time);
  out.diagnostics["floored_mass"] = t.gain.floored_mass;
  out.diagnostics["transform_condition"] = condition_number(t.gain);
  return out;
}

TransformResult etkf_analysis(const Ensemble& forecast, const ObservationRecord& obs,
                              const ObservationOperator& h, double alpha) {
  const AnomalySet s = inflate(anomaly_set(forecast, h, obs), alpha);
  return etkf_update(s, obs.error_covariance, forecast.time);
}

ShrinkageEstimate estimate_shrinkage(const Matrix& a, const TargetCovariance& p,
                                     const GammaPolicy& policy) {
  const Eigen::Index n = a.rows();
  const Vector sigma = whiten(p, a);
  ShrinkageEstimate est;
  est.policy = policy.kind;
  est.mu = scaling_mu(sigma, n);
  if (sigma.squaredNorm() > 0.0) est.sphericity = sphericity(sigma, n);

  switch (policy.kind) {
    case GammaPolicy::Kind::Static:
      est.gamma = policy.value;
      break;
    case GammaPolicy::Kind::RBLW:
      // The mean comes from the same members: effective size N-1.
      est.gamma = rblw_gamma(sphericity(sigma, n), n, a.cols() - 1);
      break;
    case GammaPolicy::Kind::ClosedForm:
      est.gamma = closed_form_gamma_from_anomalies(a, est.mu * p.dense());
      break;
  }
  return est;
}

namespace {

Matrix lowrank_transform(const Matrix& ext_state, const Matrix& sqrt_g, Eigen::Index n_keep) {
  // Within the eigenbasis of G, keep the N-dimensional frame that retains the
  // most state-space variance: the leading right singular vectors of 𝔄·𝕋.
  const Matrix y = ext_state * sqrt_g;
  Eigen::JacobiSVD<Matrix> svd(y, Eigen::ComputeFullV);
  return sqrt_g * svd.matrixV().leftCols(n_keep);
}

}  // namespace

TransformResult shrinkage_update(const AnomalySet& s, const Matrix& sa, const Matrix& sz,
                                 const Matrix& r, double gamma, FilterVariant variant,
                                 bool recenter) {
  if (variant != FilterVariant::ShrinkSymmetric && variant != FilterVariant::ShrinkLowRank) {
    throw Error(ErrorKind::Config, "shrinkage_update handles the symmetric and low-rank variants");
  }
  const ExtendedAnomalySet ext = build_extended(s.state, s.obs, sa, sz, gamma);
  const EnsembleTransform t = ensemble_transform(ext.obs, r);
  const Vector rinv_d = SpdSolver(r).solve(s.innovation);
  const Eigen::Index n_members = s.size();

  // Full 𝕋𝕋ᵀ in the mean update, for both variants.
  const Matrix tt = recompose(t.gain);
  TransformResult out;
  out.gamma = gamma;
  out.mean = s.mean + ext.state * (tt * (ext.obs.transpose() * rinv_d));

  const double rescale = 1.0 / std::sqrt(1.0 - gamma);
  Matrix analysis_a;
  if (variant == FilterVariant::ShrinkSymmetric) {
    analysis_a = rescale * (ext.state * t.sqrt.leftCols(n_members));
  } else {
    analysis_a = rescale * (ext.state * lowrank_transform(ext.state, t.sqrt, n_members));
  }
  out.diagnostics["anomaly_mean_norm"] = analysis_a.rowwise().mean().norm();
  if (recenter) analysis_a = center_columns(analysis_a);

  out.analysis = reconstruct(out.mean, analysis_a);
  out.diagnostics["floored_mass"] = t.gain.floored_mass;
  out.diagnostics["transform_condition"] = condition_number(t.gain);
  return out;
}

namespace {

TransformResult localized_shrinkage_update(const AnomalySet& s, const Matrix& sa,
                                           const Matrix& sz, const Matrix& r, double gamma,
                                           const FilterConfig& cfg, const DistanceFn& distance) {
  if (!distance) throw Error(ErrorKind::Config, "localized shrinkage needs a distance function");
  const Vector variance = detail::require_diagonal(r);
  const ExtendedAnomalySet ext = build_extended(s.state, s.obs, sa, sz, gamma);
  const Eigen::Index n = s.state.rows();
  const Eigen::Index n_members = s.size();
  const double rescale = 1.0 / std::sqrt(1.0 - gamma);

  Matrix analysis_a(n, n_members);
  Vector mean(n);
  for (Eigen::Index j = 0; j < n; ++j) {
    const auto local =
        detail::select_observations(j, ext.obs.rows(), distance, cfg.taper, cfg.radius);
    const auto t = detail::local_transform(ext.obs, s.innovation, variance, local);
    mean(j) = s.mean(j) + ext.state.row(j).dot(t.increment);
    analysis_a.row(j) = rescale * (ext.state.row(j) * t.sqrt.leftCols(n_members));
  }
  if (cfg.recenter_analysis_anomalies) analysis_a = center_columns(analysis_a);
  TransformResult out;
  out.gamma = gamma;
  out.mean = mean;
  out.analysis = reconstruct(mean, analysis_a);
  return out;
}

}  // namespace

TransformResult shrinkage_etkf_analysis(const Ensemble& forecast, const ObservationRecord& obs,
                                        const ObservationOperator& h, const TargetCovariance& p,
                                        const FilterConfig& cfg, Rng& rng,
                                        const DistanceFn& localization) {
  cfg.validate();
  const AnomalySet s = inflate(anomaly_set(forecast, h, obs), cfg.inflation);
  const ShrinkageEstimate est = estimate_shrinkage(s.state, p, cfg.gamma);
  const double gamma = std::min(est.gamma, kGammaCeiling);

  const Ensemble synthetic = sample_synthetic(s.mean, est.mu, p, cfg.synthetic, rng);
  const Matrix sa = decompose(synthetic).anomalies;
  const Matrix sz = synthetic_obs_anomalies(synthetic, h);

  TransformResult out =
      cfg.localize_shrinkage
          ? localized_shrinkage_update(s, sa, sz, obs.error_covariance, gamma, cfg, localization)
          : shrinkage_update(s, sa, sz, obs.error_covariance, gamma, cfg.variant,
                             cfg.recenter_analysis_anomalies);
  out.analysis.time = forecast.time;
  out.mu = est.mu;
  out.diagnostics["sphericity"] = est.sphericity;
  out.diagnostics["gamma_raw"] = est.gamma;
  return out;
}

SplitTransform split_transform(const Matrix& a, const Matrix& z, const Matrix& sa,
                               const Matrix& sz, const Matrix& r, double gamma) {
  if (!(gamma >= 0.0 && gamma < 1.0)) {
    throw Error(ErrorKind::GammaAtBound, "split transform needs gamma in [0, 1)");
  }
  const Eigen::Index n_members = a.cols();
  const SpdSolver s(gamma * sz * sz.transpose() + (1.0 - gamma) * z * z.transpose() + r);
  const Matrix s_z = s.solve(z);
  const Matrix s_sz = s.solve(sz);

  SplitTransform out;
  double mass = 0.0;

  Matrix gs = -gamma * sz.transpose() * s_sz;
  gs.diagonal().array() += 1.0;
  out.synthetic = symmetric_sqrt(0.5 * (gs + gs.transpose()), &mass);
  out.floored_mass += mass;

  // Pseudo-inverse of A keeping N-1 singular values: maps the synthetic
  // anomalies into the physical ensemble's coefficient space.
  const Matrix coeff = truncated_pseudo_inverse(a, n_members - 1) * sa;  // N×M
  const Matrix cross = coeff * (sz.transpose() * s_z);                   // N×N
  Matrix inner = -(1.0 - gamma) * z.transpose() * s_z - gamma * (cross + cross.transpose());
  inner.diagonal().array() += 1.0;
  out.physical = symmetric_sqrt(0.5 * (inner + inner.transpose()), &mass);
  out.floored_mass += mass;
  return out;
}

SplitResult split_update(const AnomalySet& s, const Matrix& sa, const Matrix& sz,
                         const Matrix& r, double gamma) {
  const SplitTransform t = split_transform(s.state, s.obs, sa, sz, r, gamma);
  const Vector rinv_d = SpdSolver(r).solve(s.innovation);
  const Matrix analysis_a = s.state * t.physical;
  const Matrix analysis_z = s.obs * t.physical;
  const Matrix syn_a = sa * t.synthetic;
  const Matrix syn_z = sz * t.synthetic;

  SplitResult out;
  TransformResult& res = out.result;
  res.gamma = gamma;
  res.mean = s.mean + gamma * (syn_a * (syn_z.transpose() * rinv_d)) +
             (1.0 - gamma) * (analysis_a * (analysis_z.transpose() * rinv_d));
  res.analysis = reconstruct(res.mean, analysis_a);
  res.diagnostics["floored_mass"] = t.floored_mass;
  out.synthetic_analysis_anomalies = syn_a;
  return out;
}

SplitResult split_shrinkage_analysis(const Ensemble& forecast, const ObservationRecord& obs,
                                     const ObservationOperator& h, const TargetCovariance& p,
                                     const FilterConfig& cfg, Rng& rng) {
  cfg.validate();
  const AnomalySet s = inflate(anomaly_set(forecast, h, obs), cfg.inflation);
  const ShrinkageEstimate est = estimate_shrinkage(s.state, p, cfg.gamma);
  const double gamma = std::min(est.gamma, kGammaCeiling);
  const Ensemble synthetic = sample_synthetic(s.mean, est.mu, p, cfg.synthetic, rng);
  SplitResult out = split_update(s, decompose(synthetic).anomalies,
                                 synthetic_obs_anomalies(synthetic, h), obs.error_covariance,
                                 gamma);
  out.result.analysis.time = forecast.time;
  out.result.mu = est.mu;
  out.result.diagnostics["sphericity"] = est.sphericity;
  out.result.diagnostics["gamma_raw"] = est.gamma;
  return out;
}

TransformResult analyze(const Ensemble& forecast, const ObservationRecord& obs,
                        const ObservationOperator& h, const TargetCovariance* p,
                        const FilterConfig& cfg, Rng& rng, const DistanceFn& distance) {
  cfg.validate();
  if (uses_shrinkage(cfg.variant) && !p) {
    throw Error(ErrorKind::Config, "shrinkage variants need a target covariance");
  }
  switch (cfg.variant) {
    case FilterVariant::ETKF: return etkf_analysis(forecast, obs, h, cfg.inflation);
    case FilterVariant::LETKF: return letkf_analysis(forecast, obs, h, cfg, distance);
    case FilterVariant::ShrinkSymmetric:
    case FilterVariant::ShrinkLowRank:
      return shrinkage_etkf_analysis(forecast, obs, h, *p, cfg, rng, distance);
    case FilterVariant::ShrinkSplit:
      return split_shrinkage_analysis(forecast, obs, h, *p, cfg, rng).result;
  }
  throw Error(ErrorKind::Config, "unhandled filter variant");
}

}  // namespace enshrink
