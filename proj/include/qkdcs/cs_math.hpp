#pragma once

// Cauchy-Schwarz band functions linking the n-photon yields (or error rates)
// of two intensity settings with overlap parameter z = tau:
//
//   G_-(y, z) <= y_b <= G_+(y, z),   g_pm(y, z) = y + (1-z)(1-2y) +- 2 sqrt(z(1-z) y(1-y)).
//
// G_- is convex and G_+ concave in y on [0,1], so tangents are outer (relaxing)
// approximations and chords are inner (conservative) ones.

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>

#include "qkdcs/errors.hpp"

namespace qkdcs::cs {

inline constexpr double kDefaultInteriorMargin = 1e-9;

/// Line y_b = intercept + slope * y.
struct Line {
  double intercept = 0.0;
  double slope = 0.0;
  constexpr double operator()(double y) const { return intercept + slope * y; }
};

struct TangentPair {
  Line lower;  // lies below G_- on [0,1]
  Line upper;  // lies above G_+ on [0,1]
  double reference = 0.0;
};

inline double g_plus(double y, double z) {
  return y + (1.0 - z) * (1.0 - 2.0 * y) + 2.0 * std::sqrt(z * (1.0 - z) * y * (1.0 - y));
}

inline double g_minus(double y, double z) {
  return y + (1.0 - z) * (1.0 - 2.0 * y) - 2.0 * std::sqrt(z * (1.0 - z) * y * (1.0 - y));
}

inline bool lower_active(double y, double z) { return y > 1.0 - z; }
inline bool upper_active(double y, double z) { return y < z; }

inline double G_minus(double y, double z) { return lower_active(y, z) ? std::max(0.0, g_minus(y, z)) : 0.0; }
inline double G_plus(double y, double z) { return upper_active(y, z) ? std::min(1.0, g_plus(y, z)) : 1.0; }

/// (G_-, G_+) at y.
inline std::pair<double, double> band(double y, double z) { return {G_minus(y, z), G_plus(y, z)}; }

inline double g_prime_plus(double y, double z) {
  return -1.0 + 2.0 * z + (1.0 - 2.0 * y) * std::sqrt(z * (1.0 - z) / (y * (1.0 - y)));
}

inline double g_prime_minus(double y, double z) {
  return -1.0 + 2.0 * z - (1.0 - 2.0 * y) * std::sqrt(z * (1.0 - z) / (y * (1.0 - y)));
}

/// Slopes of (G_-, G_+), zero on inactive branches. The slopes diverge at 0 and 1,
/// so y must lie in the clamped interior.
inline std::pair<double, double> band_derivatives(double y, double z, double eps = kDefaultInteriorMargin) {
  if (!(y >= eps && y <= 1.0 - eps)) throw DomainError("band_derivatives: y outside the clamped interior");
  const double lo = lower_active(y, z) ? g_prime_minus(y, z) : 0.0;
  const double hi = upper_active(y, z) ? g_prime_plus(y, z) : 0.0;
  return {lo, hi};
}

namespace detail {

// Rounding bound for evaluating intercept + slope*y near the reference point.
inline double rounding_margin(double value, double slope, double y) {
  constexpr double u = std::numeric_limits<double>::epsilon();
  return 8.0 * u * (std::abs(value) + std::abs(slope * y) + std::abs(slope) + 1e-300);
}

}  // namespace detail

/// First-order expansion of both band functions at y_ref (clamped to [eps, 1-eps]).
/// Intercepts are shifted outward by a rounding bound so the lines dominate the
/// band in floating point as well.
inline TangentPair tangent_relaxation(double y_ref, double z, double eps = kDefaultInteriorMargin) {
  const double y = std::clamp(y_ref, eps, 1.0 - eps);
  TangentPair t;
  t.reference = y;
  if (z >= 1.0) {
    // The band collapses to the identity.
    t.lower = {0.0, 1.0};
    t.upper = {0.0, 1.0};
    return t;
  }
  if (lower_active(y, z)) {
    const double v = g_minus(y, z);
    const double s = g_prime_minus(y, z);
    t.lower = {v - s * y - detail::rounding_margin(v, s, y), s};
  } else {
    t.lower = {0.0, 0.0};
  }
  if (upper_active(y, z)) {
    const double v = g_plus(y, z);
    const double s = g_prime_plus(y, z);
    t.upper = {v - s * y + detail::rounding_margin(v, s, y), s};
  } else {
    t.upper = {1.0, 0.0};
  }
  return t;
}

/// Chord of G_- through (y0, G_-(y0)) and (y1, G_-(y1)); lies above G_- on [y0, y1].
inline Line lower_chord(double y0, double y1, double z) {
  if (z >= 1.0) return {0.0, 1.0};
  const double v0 = G_minus(y0, z), v1 = G_minus(y1, z);
  const double s = (v1 - v0) / (y1 - y0);
  return {v0 - s * y0, s};
}

/// Chord of G_+ through (y0, G_+(y0)) and (y1, G_+(y1)); lies below G_+ on [y0, y1].
inline Line upper_chord(double y0, double y1, double z) {
  if (z >= 1.0) return {0.0, 1.0};
  const double v0 = G_plus(y0, z), v1 = G_plus(y1, z);
  const double s = (v1 - v0) / (y1 - y0);
  return {v0 - s * y0, s};
}

/// Amount by which (y_a, y_b) violates the band, zero if inside.
inline double band_violation(double y_a, double y_b, double z) {
  const auto [lo, hi] = band(std::clamp(y_a, 0.0, 1.0), z);
  return std::max({0.0, lo - y_b, y_b - hi});
}

}  // namespace qkdcs::cs
