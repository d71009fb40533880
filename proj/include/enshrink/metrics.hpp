#pragma once

#include <deque>
#include <vector>

#include "enshrink/ensemble.hpp"
#include "enshrink/model.hpp"

namespace enshrink {

/// √( Σ_i Σ_j (x̄_ij - x^t_ij)² / (K·n) ).
double spatiotemporal_rmse(const std::vector<Vector>& analysis_means,
                           const std::vector<Vector>& truths);

/// √(Σ_i Σ_j (x̄_ij - x^t_ij)²), kept as a diagnostic.
double unnormalized_error_norm(const std::vector<Vector>& analysis_means,
                               const std::vector<Vector>& truths);

struct RankHistogram {
  std::vector<long> bins;  // N+1 bins for an N-member ensemble
  long total = 0;

  RankHistogram() = default;
  explicit RankHistogram(int members) : bins(static_cast<std::size_t>(members) + 1, 0) {}

  void add(int rank);
  /// Bin-wise sum; both histograms must have the same bin count.
  RankHistogram& merge(const RankHistogram& other);
};

/// Rank (0..N) of `truth` among `members`; ties are placed uniformly at random
/// among the tied positions.
int truth_rank(const Vector& members, double truth, Rng& rng);

RankHistogram rank_histogram(const std::vector<Ensemble>& ensembles,
                             const std::vector<Vector>& truths, Eigen::Index var_index,
                             Rng& rng);

/// D(P‖Q) = Σ P_k log(P_k/Q_k) with P uniform and Q the normalized histogram.
/// Empty bins receive probability 1/(2·total) before renormalization.
double kl_from_uniform(const RankHistogram& hist);

/// Σ p_k log(p_k/q_k) for two probability vectors; +inf when q_k = 0 < p_k.
double relative_entropy(const std::vector<double>& p, const std::vector<double>& q);

/// Pearson χ² statistic of the histogram against the uniform distribution.
double chi_square_uniform(const RankHistogram& hist);

/// Flags a run as diverged when any entry is non-finite or the RMSE over the
/// trailing window of steps exceeds a threshold.
class DivergenceMonitor {
 public:
  explicit DivergenceMonitor(int window = 50, double threshold = 100.0)
      : window_(window), threshold_(threshold) {}

  /// Records one step; returns true once the run counts as diverged.
  bool record(const Vector& analysis_mean, const Vector& truth);
  bool diverged() const { return diverged_; }

 private:
  int window_;
  double threshold_;
  std::deque<double> mse_;
  double sum_ = 0.0;
  bool diverged_ = false;
};

}  // namespace enshrink
