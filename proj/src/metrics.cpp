#include "enshrink/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "enshrink/errors.hpp"

namespace enshrink {

namespace {

double squared_error_sum(const std::vector<Vector>& means, const std::vector<Vector>& truths,
                         Eigen::Index* n_out) {
  if (means.size() != truths.size()) {
    throw Error(ErrorKind::ShapeMismatch, "analysis and truth sequences differ in length");
  }
  if (means.empty()) throw Error(ErrorKind::ShapeMismatch, "need at least one snapshot");
  const Eigen::Index n = means.front().size();
  double sum = 0.0;
  for (std::size_t i = 0; i < means.size(); ++i) {
    if (means[i].size() != n || truths[i].size() != n) {
      throw Error(ErrorKind::ShapeMismatch, "snapshot dimensions differ");
    }
    sum += (means[i] - truths[i]).squaredNorm();
  }
  if (n_out) *n_out = n;
  return sum;
}

}  // namespace

double spatiotemporal_rmse(const std::vector<Vector>& means, const std::vector<Vector>& truths) {
  Eigen::Index n = 0;
  const double sum = squared_error_sum(means, truths, &n);
  return std::sqrt(sum / (static_cast<double>(means.size()) * static_cast<double>(n)));
}

double unnormalized_error_norm(const std::vector<Vector>& means,
                               const std::vector<Vector>& truths) {
  return std::sqrt(squared_error_sum(means, truths, nullptr));
}

void RankHistogram::add(int rank) {
  if (rank < 0 || rank >= static_cast<int>(bins.size())) {
    throw Error(ErrorKind::Domain, "rank out of range");
  }
  ++bins[static_cast<std::size_t>(rank)];
  ++total;
}

RankHistogram& RankHistogram::merge(const RankHistogram& other) {
  if (bins.empty()) bins.assign(other.bins.size(), 0);
  if (other.bins.size() != bins.size()) {
    throw Error(ErrorKind::ShapeMismatch, "cannot merge histograms with different bin counts");
  }
  for (std::size_t k = 0; k < bins.size(); ++k) bins[k] += other.bins[k];
  total += other.total;
  return *this;
}

int truth_rank(const Vector& members, double truth, Rng& rng) {
  int below = 0, tied = 0;
  for (Eigen::Index k = 0; k < members.size(); ++k) {
    if (members(k) < truth) ++below;
    else if (members(k) == truth) ++tied;
  }
  if (tied == 0) return below;
  return below + std::uniform_int_distribution<int>(0, tied)(rng);
}

RankHistogram rank_histogram(const std::vector<Ensemble>& ensembles,
                             const std::vector<Vector>& truths, Eigen::Index var_index,
                             Rng& rng) {
  if (ensembles.size() != truths.size()) {
    throw Error(ErrorKind::ShapeMismatch, "ensemble and truth series differ in length");
  }
  if (ensembles.empty()) return {};
  RankHistogram hist(static_cast<int>(ensembles.front().size()));
  for (std::size_t t = 0; t < ensembles.size(); ++t) {
    if (var_index < 0 || var_index >= ensembles[t].dim()) {
      throw Error(ErrorKind::Domain, "variable index out of range");
    }
    hist.add(truth_rank(ensembles[t].members.row(var_index).transpose(), truths[t](var_index),
                        rng));
  }
  return hist;
}

double relative_entropy(const std::vector<double>& p, const std::vector<double>& q) {
  if (p.size() != q.size()) throw Error(ErrorKind::ShapeMismatch, "distribution sizes differ");
  double d = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) {
    if (p[k] == 0.0) continue;
    if (q[k] == 0.0) return std::numeric_limits<double>::infinity();
    d += p[k] * std::log(p[k] / q[k]);
  }
  return d;
}

double kl_from_uniform(const RankHistogram& hist) {
  if (hist.total < 1 || hist.bins.empty()) {
    throw Error(ErrorKind::EmptyHistogram, "histogram has no samples");
  }
  const double total = static_cast<double>(hist.total);
  const double eps = 1.0 / (2.0 * total);
  std::vector<double> q(hist.bins.size());
  double norm = 0.0;
  for (std::size_t k = 0; k < q.size(); ++k) {
    q[k] = hist.bins[k] > 0 ? static_cast<double>(hist.bins[k]) / total : eps;
    norm += q[k];
  }
  for (double& v : q) v /= norm;
  const std::vector<double> p(q.size(), 1.0 / static_cast<double>(q.size()));
  return std::max(0.0, relative_entropy(p, q));
}

double chi_square_uniform(const RankHistogram& hist) {
  if (hist.total < 1) throw Error(ErrorKind::EmptyHistogram, "histogram has no samples");
  const double expected = static_cast<double>(hist.total) / static_cast<double>(hist.bins.size());
  double chi2 = 0.0;
  for (long c : hist.bins) {
    const double diff = static_cast<double>(c) - expected;
    chi2 += diff * diff / expected;
  }
  return chi2;
}

bool DivergenceMonitor::record(const Vector& mean, const Vector& truth) {
  if (diverged_) return true;
  if (!mean.allFinite()) {
    diverged_ = true;
    return true;
  }
  const double mse = (mean - truth).squaredNorm() / static_cast<double>(mean.size());
  mse_.push_back(mse);
  sum_ += mse;
  if (static_cast<int>(mse_.size()) > window_) {
    sum_ -= mse_.front();
    mse_.pop_front();
  }
  const double rmse = std::sqrt(std::max(0.0, sum_) / static_cast<double>(mse_.size()));
  if (!std::isfinite(rmse) || rmse > threshold_) diverged_ = true;
  return diverged_;
}

}  // namespace enshrink
