#pragma once

#include <stdexcept>
#include <string>

namespace enshrink {

enum class ErrorKind {
  InvalidModelDimension,
  IntegrationBlowup,
  InsufficientEnsemble,
  ObservationOperator,
  InvalidInflation,
  DegenerateClimatology,
  InvalidScale,
  ZeroCovariance,
  ShapeMismatch,
  NotSymmetric,
  SingularInnovationCovariance,
  GammaAtBound,
  UnsupportedObservationError,
  Domain,
  EmptyHistogram,
  Config,
  Io,
};

const char* to_string(ErrorKind kind);

// All library failures are reported through this type; `kind()` lets callers
// and tests discriminate without string matching.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

class IntegrationBlowup : public Error {
 public:
  explicit IntegrationBlowup(double time)
      : Error(ErrorKind::IntegrationBlowup,
              "non-finite stage value at t=" + std::to_string(time)),
        time_(time) {}

  double time() const noexcept { return time_; }

 private:
  double time_;
};

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidModelDimension: return "invalid-model-dimension";
    case ErrorKind::IntegrationBlowup: return "integration-blowup";
    case ErrorKind::InsufficientEnsemble: return "insufficient-ensemble";
    case ErrorKind::ObservationOperator: return "observation-operator";
    case ErrorKind::InvalidInflation: return "invalid-inflation";
    case ErrorKind::DegenerateClimatology: return "degenerate-climatology";
    case ErrorKind::InvalidScale: return "invalid-scale";
    case ErrorKind::ZeroCovariance: return "zero-covariance";
    case ErrorKind::ShapeMismatch: return "shape-mismatch";
    case ErrorKind::NotSymmetric: return "not-symmetric";
    case ErrorKind::SingularInnovationCovariance: return "singular-innovation-covariance";
    case ErrorKind::GammaAtBound: return "gamma-at-bound";
    case ErrorKind::UnsupportedObservationError: return "unsupported-observation-error";
    case ErrorKind::Domain: return "domain";
    case ErrorKind::EmptyHistogram: return "empty-histogram";
    case ErrorKind::Config: return "config";
    case ErrorKind::Io: return "io";
  }
  return "unknown";
}

}  // namespace enshrink
