#include "enshrink/shrinkage.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <sstream>

#include "enshrink/errors.hpp"

namespace enshrink {

GammaPolicy GammaPolicy::parse(const std::string& text) {
  if (text == "rblw") return rblw();
  if (text == "closed_form") return closed_form();
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw Error(ErrorKind::Config, "unknown gamma policy '" + text + "'");
  }
  if (!(v >= 0.0 && v < 1.0)) {
    throw Error(ErrorKind::Config, "static gamma must lie in [0, 1), got " + text);
  }
  return fixed(v);
}

std::string GammaPolicy::label() const {
  switch (kind) {
    case Kind::RBLW: return "rblw";
    case Kind::ClosedForm: return "closed_form";
    case Kind::Static: {
      std::ostringstream s;
      s << value;
      return s.str();
    }
  }
  return "?";
}

double sphericity(const Vector& sigma, Eigen::Index n) {
  if (n < 2) throw Error(ErrorKind::Domain, "sphericity needs n >= 2");
  const Vector sq = sigma.array().square();
  const double tr = sq.sum();
  if (!(tr > 0.0)) throw Error(ErrorKind::ZeroCovariance, "whitened covariance has zero trace");
  const double tr2 = sq.squaredNorm();
  const double nn = static_cast<double>(n);
  return (nn * tr2 / (tr * tr) - 1.0) / (nn - 1.0);
}

double rblw_gamma(double u, Eigen::Index n, Eigen::Index effective_size) {
  if (effective_size < 2 || n < 2) {
    throw Error(ErrorKind::Domain, "RBLW needs n >= 2 and effective size >= 2");
  }
  if (u <= 1e-12) return 1.0;
  const double N = static_cast<double>(effective_size);
  const double p = static_cast<double>(n);
  const double g = (N - 2.0) / (N * (N + 2.0)) +
                   ((p + 1.0) * N - 2.0) / (u * N * (N + 2.0) * (p - 1.0));
  return std::clamp(g, 0.0, 1.0);
}

double closed_form_gamma_from_anomalies(const Matrix& a, const Matrix& target) {
  const Eigen::Index N = a.cols();
  if (N < 2) throw Error(ErrorKind::InsufficientEnsemble, "need at least 2 members");
  if (target.rows() != a.rows() || target.cols() != a.rows()) {
    throw Error(ErrorKind::ShapeMismatch, "target must be n×n");
  }
  const double nn = static_cast<double>(N);
  const Matrix c = a * a.transpose();
  const double denom = (c - target).squaredNorm();
  if (denom == 0.0) return 1.0;
  // ‖x_k - x̄‖² = (N-1)‖a_k‖²
  const Vector dev_sq = (nn - 1.0) * a.colwise().squaredNorm().transpose();
  const double fourth = dev_sq.squaredNorm();
  const double numer = fourth / (nn * nn) - c.squaredNorm() / nn;
  return std::clamp(numer / denom, 0.0, 1.0);
}

double closed_form_gamma(const Ensemble& ensemble, const Matrix& target) {
  return closed_form_gamma_from_anomalies(decompose(ensemble).anomalies, target);
}

}  // namespace enshrink
