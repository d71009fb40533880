#include "enshrink/climatology.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <random>
#include <sstream>
#include <utility>
#include <vector>

#include "enshrink/errors.hpp"
#include "enshrink/taper.hpp"

namespace enshrink {

TargetCovariance::TargetCovariance(Matrix basis, Vector spectrum, std::optional<Vector> mean,
                                   std::map<std::string, std::string> metadata)
    : basis_(std::move(basis)),
      spectrum_(std::move(spectrum)),
      mean_(std::move(mean)),
      metadata_(std::move(metadata)) {
  if (basis_.cols() != spectrum_.size()) {
    throw Error(ErrorKind::ShapeMismatch, "basis columns must match spectrum length");
  }
  if (rank() < 1) throw Error(ErrorKind::DegenerateClimatology, "target covariance has rank 0");
  if ((spectrum_.array() <= 0.0).any()) {
    throw Error(ErrorKind::DegenerateClimatology, "spectrum entries must be positive");
  }
  if (mean_ && mean_->size() != dim()) {
    throw Error(ErrorKind::ShapeMismatch, "climatological mean has wrong length");
  }
  const Matrix gram = basis_.transpose() * basis_;
  if ((gram - Matrix::Identity(rank(), rank())).cwiseAbs().maxCoeff() > 1e-10) {
    throw Error(ErrorKind::Domain, "basis columns are not orthonormal");
  }
}

TargetCovariance TargetCovariance::from_covariance(const Matrix& covariance,
                                                   std::optional<Vector> mean,
                                                   std::map<std::string, std::string> metadata) {
  require_symmetric(covariance, "covariance");
  Eigen::SelfAdjointEigenSolver<Matrix> solver(0.5 * (covariance + covariance.transpose()));
  const Vector& values = solver.eigenvalues();
  const double top = values.size() ? values(values.size() - 1) : 0.0;
  if (!(top > 0.0)) {
    throw Error(ErrorKind::DegenerateClimatology, "sample covariance is zero");
  }
  // Descending order, numerically zero modes dropped.
  std::vector<Eigen::Index> kept;
  for (Eigen::Index i = values.size() - 1; i >= 0; --i) {
    if (values(i) > kRankThreshold * top) kept.push_back(i);
  }
  Matrix basis(covariance.rows(), static_cast<Eigen::Index>(kept.size()));
  Vector spectrum(static_cast<Eigen::Index>(kept.size()));
  for (std::size_t c = 0; c < kept.size(); ++c) {
    basis.col(c) = solver.eigenvectors().col(kept[c]);
    spectrum(c) = values(kept[c]);
  }
  return TargetCovariance(std::move(basis), std::move(spectrum), std::move(mean),
                          std::move(metadata));
}

TargetCovariance TargetCovariance::from_samples(const Matrix& samples) {
  if (samples.cols() < 2) {
    throw Error(ErrorKind::InsufficientEnsemble, "need at least 2 samples");
  }
  CovarianceAccumulator acc(samples.rows());
  for (Eigen::Index k = 0; k < samples.cols(); ++k) acc.add(samples.col(k));
  return from_covariance(acc.covariance(), acc.mean(),
                         {{"samples", std::to_string(samples.cols())}});
}

Matrix TargetCovariance::dense() const {
  return basis_ * spectrum_.asDiagonal() * basis_.transpose();
}

// Text container, one token per value, doubles in hexadecimal floating point
// so that save/load is exact:
//
//   enshrink-climatology 1
//   n <n>
//   rank <r>
//   meta <key> <value...>        (zero or more)
//   mean <0|1> [n values]
//   spectrum <r values>
//   basis <n*r values, row-major>
void TargetCovariance::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
  out << std::hexfloat;
  out << "enshrink-climatology 1\n";
  out << "n " << dim() << "\nrank " << rank() << "\n";
  for (const auto& [key, value] : metadata_) out << "meta " << key << ' ' << value << '\n';
  out << "mean " << (mean_ ? 1 : 0);
  if (mean_) {
    for (Eigen::Index i = 0; i < dim(); ++i) out << ' ' << (*mean_)(i);
  }
  out << "\nspectrum";
  for (Eigen::Index i = 0; i < rank(); ++i) out << ' ' << spectrum_(i);
  out << "\nbasis\n";
  for (Eigen::Index i = 0; i < dim(); ++i) {
    for (Eigen::Index j = 0; j < rank(); ++j) out << (j ? " " : "") << basis_(i, j);
    out << '\n';
  }
  if (!out) throw Error(ErrorKind::Io, "failed writing " + path.string());
}

namespace {

double read_double(std::istream& in, const std::filesystem::path& path) {
  std::string token;
  if (!(in >> token)) throw Error(ErrorKind::Io, "truncated climatology file " + path.string());
  char* end = nullptr;
  const double v = std::strtod(token.c_str(), &end);
  if (end == token.c_str() || *end != '\0') {
    throw Error(ErrorKind::Io, "bad number '" + token + "' in " + path.string());
  }
  return v;
}

void expect(std::istream& in, const std::string& word, const std::filesystem::path& path) {
  std::string token;
  if (!(in >> token) || token != word) {
    throw Error(ErrorKind::Io, "expected '" + word + "' in " + path.string());
  }
}

}  // namespace

TargetCovariance TargetCovariance::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot read " + path.string());
  std::string magic;
  int version = 0;
  in >> magic >> version;
  if (magic != "enshrink-climatology" || version != 1) {
    throw Error(ErrorKind::Io, path.string() + " is not a version-1 climatology file");
  }
  Eigen::Index n = 0, r = 0;
  expect(in, "n", path);
  in >> n;
  expect(in, "rank", path);
  in >> r;
  if (!in || n < 1 || r < 1 || r > n) throw Error(ErrorKind::Io, "bad dimensions in " + path.string());

  std::map<std::string, std::string> metadata;
  std::string token;
  while (in >> token && token == "meta") {
    std::string key, value;
    in >> key;
    std::getline(in, value);
    if (!value.empty() && value.front() == ' ') value.erase(0, 1);
    metadata[key] = value;
  }
  if (token != "mean") throw Error(ErrorKind::Io, "expected 'mean' in " + path.string());
  int has_mean = 0;
  in >> has_mean;
  std::optional<Vector> mean;
  if (has_mean) {
    Vector m(n);
    for (Eigen::Index i = 0; i < n; ++i) m(i) = read_double(in, path);
    mean = std::move(m);
  }
  expect(in, "spectrum", path);
  Vector spectrum(r);
  for (Eigen::Index i = 0; i < r; ++i) spectrum(i) = read_double(in, path);
  expect(in, "basis", path);
  Matrix basis(n, r);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < r; ++j) basis(i, j) = read_double(in, path);
  }
  return TargetCovariance(std::move(basis), std::move(spectrum), std::move(mean),
                          std::move(metadata));
}

CovarianceAccumulator::CovarianceAccumulator(Eigen::Index n)
    : mean_(Vector::Zero(n)), scatter_(Matrix::Zero(n, n)) {}

void CovarianceAccumulator::add(const Vector& x) {
  ++count_;
  const Vector delta = x - mean_;
  mean_ += delta / static_cast<double>(count_);
  scatter_.noalias() += delta * (x - mean_).transpose();
}

Matrix CovarianceAccumulator::covariance() const {
  if (count_ < 2) throw Error(ErrorKind::InsufficientEnsemble, "need at least 2 samples");
  const Matrix c = scatter_ / static_cast<double>(count_ - 1);
  return 0.5 * (c + c.transpose());
}

TargetCovariance generate_climatology(const ModelConfig& model, int sample_count,
                                      int spinup_steps, int interval_steps, Rng& rng,
                                      const ClimatologyOptions& options) {
  model.validate();
  if (sample_count < 2) throw Error(ErrorKind::Config, "climatology needs sampleCount >= 2");
  if (interval_steps < 1) throw Error(ErrorKind::Config, "interval_steps must be >= 1");
  if (spinup_steps < 0) throw Error(ErrorKind::Config, "spinup_steps must be >= 0");

  const Tendency f = lorenz96(model.forcing);
  const Vector base = Vector::Constant(model.n, model.forcing);
  CovarianceAccumulator acc(model.n);

  auto run_member = [&](int snapshots) {
    ModelState s{base + standard_normal(model.n, rng), 0.0};
    s = integrate(f, s, spinup_steps, model.step);
    for (int k = 0; k < snapshots; ++k) {
      s = integrate(f, s, interval_steps, model.step);
      acc.add(s.values);
    }
  };

  std::map<std::string, std::string> meta{
      {"model", "lorenz96"},
      {"n", std::to_string(model.n)},
      {"forcing", std::to_string(model.forcing)},
      {"step", std::to_string(model.step)},
      {"spinup_steps", std::to_string(spinup_steps)},
      {"interval_steps", std::to_string(interval_steps)},
  };
  if (options.mode == ClimatologyMode::Trajectory) {
    run_member(sample_count);
    meta["mode"] = "trajectory";
    meta["samples"] = std::to_string(sample_count);
  } else {
    if (options.members < 1) throw Error(ErrorKind::Config, "ensemble mode needs members >= 1");
    for (int m = 0; m < options.members; ++m) run_member(sample_count);
    meta["mode"] = "ensemble";
    meta["members"] = std::to_string(options.members);
    meta["snapshots_per_member"] = std::to_string(sample_count);
  }

  Matrix cov = acc.covariance();
  if (options.taper_radius) {
    const double radius = *options.taper_radius;
    if (!(radius > 0.0)) throw Error(ErrorKind::Config, "taper radius must be positive");
    for (Eigen::Index i = 0; i < cov.rows(); ++i) {
      for (Eigen::Index j = 0; j < cov.cols(); ++j) {
        const double d = periodic_distance(static_cast<double>(i), static_cast<double>(j),
                                           static_cast<double>(model.n));
        cov(i, j) *= taper(TaperKind::GaspariCohn, d / radius);
      }
    }
    std::ostringstream r;
    r << radius;
    meta["taper_radius"] = r.str();
  }
  return TargetCovariance::from_covariance(cov, acc.mean(), std::move(meta));
}

Vector whiten(const TargetCovariance& p, const Matrix& anomalies) {
  if (anomalies.rows() != p.dim()) {
    throw Error(ErrorKind::ShapeMismatch, "anomalies do not match target covariance dimension");
  }
  // P^{-1/2}A = U (L^{-1/2} UᵀA); U has orthonormal columns so the singular
  // values are those of the r×N factor.
  const Matrix reduced =
      p.spectrum().cwiseSqrt().cwiseInverse().asDiagonal() * (p.basis().transpose() * anomalies);
  return Eigen::JacobiSVD<Matrix>(reduced).singularValues();
}

double scaling_mu(const Vector& singular_values, Eigen::Index n) {
  if (n < 1) throw Error(ErrorKind::Domain, "state dimension must be >= 1");
  return singular_values.squaredNorm() / static_cast<double>(n);
}

SamplingDistribution parse_distribution(std::string_view name) {
  if (name == "gaussian") return SamplingDistribution::Gaussian;
  if (name == "laplace") return SamplingDistribution::Laplace;
  throw Error(ErrorKind::Config, "unknown sampling distribution '" + std::string(name) + "'");
}

std::string_view to_string(SamplingDistribution d) {
  return d == SamplingDistribution::Gaussian ? "gaussian" : "laplace";
}

Ensemble sample_synthetic(const Vector& mean, double mu, const TargetCovariance& p,
                          const SyntheticEnsembleSpec& spec, Rng& rng) {
  if (!(mu > 0.0) || !std::isfinite(mu)) {
    throw Error(ErrorKind::InvalidScale, "synthetic scale must be positive, got " + std::to_string(mu));
  }
  if (spec.size < 2) throw Error(ErrorKind::InsufficientEnsemble, "synthetic size must be >= 2");
  if (mean.size() != p.dim()) throw Error(ErrorKind::ShapeMismatch, "mean does not match P");

  const Eigen::Index r = p.rank();
  Matrix xi(r, spec.size);
  std::normal_distribution<double> normal;
  std::exponential_distribution<double> exponential(1.0);
  Vector scale = Vector::Constant(spec.size, std::sqrt(mu));
  for (int k = 0; k < spec.size; ++k) {
    for (Eigen::Index i = 0; i < r; ++i) xi(i, k) = normal(rng);
    if (spec.distribution == SamplingDistribution::Laplace) {
      scale(k) = std::sqrt(mu * exponential(rng));
    }
  }
  const Matrix factor = p.basis() * p.spectrum().cwiseSqrt().asDiagonal();
  Matrix members = (factor * xi) * scale.asDiagonal();
  members.colwise() += mean;
  return Ensemble{std::move(members), 0.0};
}

}  // namespace enshrink
