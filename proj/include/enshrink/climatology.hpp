#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>

#include "enshrink/ensemble.hpp"
#include "enshrink/model.hpp"

namespace enshrink {

/// Climatological target covariance P = U·diag(L)·Uᵀ in reduced spectral form.
/// Immutable once built; zero modes are dropped at construction.
class TargetCovariance {
 public:
  /// Relative eigenvalue threshold below which modes are discarded.
  static constexpr double kRankThreshold = 1e-10;

  TargetCovariance(Matrix basis, Vector spectrum, std::optional<Vector> mean = std::nullopt,
                   std::map<std::string, std::string> metadata = {});

  static TargetCovariance from_covariance(const Matrix& covariance,
                                          std::optional<Vector> mean = std::nullopt,
                                          std::map<std::string, std::string> metadata = {});
  /// Sample covariance of the columns of `samples` (n×K, K ≥ 2).
  static TargetCovariance from_samples(const Matrix& samples);

  Eigen::Index dim() const { return basis_.rows(); }
  Eigen::Index rank() const { return basis_.cols(); }
  const Matrix& basis() const { return basis_; }
  const Vector& spectrum() const { return spectrum_; }
  const std::optional<Vector>& mean() const { return mean_; }
  const std::map<std::string, std::string>& metadata() const { return metadata_; }

  /// n×n dense P. Only meant for small n and for the closed-form estimator.
  Matrix dense() const;

  void save(const std::filesystem::path& path) const;
  static TargetCovariance load(const std::filesystem::path& path);

 private:
  Matrix basis_;
  Vector spectrum_;
  std::optional<Vector> mean_;
  std::map<std::string, std::string> metadata_;
};

/// Running mean and covariance (Welford update, one column at a time).
class CovarianceAccumulator {
 public:
  explicit CovarianceAccumulator(Eigen::Index n);

  void add(const Vector& x);
  long count() const { return count_; }
  const Vector& mean() const { return mean_; }
  /// Unbiased sample covariance; requires count() ≥ 2.
  Matrix covariance() const;

 private:
  long count_ = 0;
  Vector mean_;
  Matrix scatter_;
};

enum class ClimatologyMode {
  Trajectory,  // snapshots from one long run
  Ensemble,    // independent members, each sampled repeatedly
};

struct ClimatologyOptions {
  ClimatologyMode mode = ClimatologyMode::Trajectory;
  /// Ensemble mode only: number of independent members; sampleCount is then
  /// the number of snapshots per member.
  int members = 10000;
  /// Optional Gaspari-Cohn taper (periodic grid distance) applied to the sample
  /// covariance before the eigendecomposition. Off by default.
  std::optional<double> taper_radius;
};

/// Snapshots of the Lorenz '96 model after spinup, every `interval_steps` RK4
/// steps, reduced to their spectral sample covariance.
TargetCovariance generate_climatology(const ModelConfig& model, int sample_count,
                                      int spinup_steps, int interval_steps, Rng& rng,
                                      const ClimatologyOptions& options = {});

/// Singular values of P^{-1/2}A with P^{-1/2} = U L^{-1/2} Uᵀ, computed in the
/// r-dimensional basis (no n×n products). Sorted descending.
Vector whiten(const TargetCovariance& p, const Matrix& anomalies);

/// μ = Σσ² / n.
double scaling_mu(const Vector& singular_values, Eigen::Index n);

enum class SamplingDistribution { Gaussian, Laplace };

SamplingDistribution parse_distribution(std::string_view name);
std::string_view to_string(SamplingDistribution d);

struct SyntheticEnsembleSpec {
  int size = 100;
  SamplingDistribution distribution = SamplingDistribution::Gaussian;
};

/// M draws with mean `mean` and covariance μP.
///
/// Gaussian: mean + √μ·U·L^{1/2}ξ. Laplace: an exponential scale mixture,
/// mean + √(μw)·U·L^{1/2}ξ with w ~ Exp(1), which has the same covariance and
/// heavier tails.
Ensemble sample_synthetic(const Vector& mean, double mu, const TargetCovariance& p,
                          const SyntheticEnsembleSpec& spec, Rng& rng);

}  // namespace enshrink
