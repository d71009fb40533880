#pragma once

#include <string_view>

namespace enshrink {

enum class TaperKind { GaspariCohn, Operational };

/// Correlation taper evaluated at k = distance / radius.
///
/// GaspariCohn: fifth-order piecewise rational function with half-width equal
/// to the radius, so its support is k < 2.
/// Operational: 1 on k ≤ 1, (5-4k)²(8k-7) on (1, 5/4], 0 beyond.
double taper(TaperKind kind, double k);

/// Distance on a ring of circumference `period`: min(|a-b|, period-|a-b|).
double periodic_distance(double a, double b, double period);

TaperKind parse_taper_kind(std::string_view name);
std::string_view to_string(TaperKind kind);

}  // namespace enshrink
