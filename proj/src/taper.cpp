#include "enshrink/taper.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "enshrink/errors.hpp"

namespace enshrink {

namespace {

double gaspari_cohn(double z) {
  if (z >= 2.0) return 0.0;
  if (z <= 1.0) {
    return (((-0.25 * z + 0.5) * z + 0.625) * z - 5.0 / 3.0) * z * z + 1.0;
  }
  return ((((z / 12.0 - 0.5) * z + 0.625) * z + 5.0 / 3.0) * z - 5.0) * z + 4.0 -
         2.0 / (3.0 * z);
}

double operational(double k) {
  if (k <= 1.0) return 1.0;
  if (k <= 1.25) {
    const double a = 5.0 - 4.0 * k;
    return a * a * (8.0 * k - 7.0);
  }
  return 0.0;
}

}  // namespace

double taper(TaperKind kind, double k) {
  if (!(k >= 0.0)) {
    throw Error(ErrorKind::Domain, "taper argument must be >= 0, got " + std::to_string(k));
  }
  switch (kind) {
    case TaperKind::GaspariCohn: return gaspari_cohn(k);
    case TaperKind::Operational: return operational(k);
  }
  return 0.0;
}

double periodic_distance(double a, double b, double period) {
  const double d = std::fmod(std::abs(a - b), period);
  return std::min(d, period - d);
}

TaperKind parse_taper_kind(std::string_view name) {
  if (name == "gaspari_cohn" || name == "gc") return TaperKind::GaspariCohn;
  if (name == "operational" || name == "op") return TaperKind::Operational;
  throw Error(ErrorKind::Config, "unknown taper '" + std::string(name) + "'");
}

std::string_view to_string(TaperKind kind) {
  return kind == TaperKind::GaspariCohn ? "gaspari_cohn" : "operational";
}

}  // namespace enshrink
