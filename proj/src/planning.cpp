#include "pmon/planning.hpp"

#include "pmon/coordination.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace pmon {

double min_radius_coverage(double A, double B, int a, int b) {
  return std::max(B * std::sin(kPi / (2.0 * a)), A * std::sin(kPi / (2.0 * b)));
}

double min_radius_detection(double A, double B, int N, int kappa) {
  const double slots = static_cast<double>(N) / kappa;
  if (slots < 2.0) throw std::invalid_argument("min_radius_detection: N/kappa must be >= 2");
  return std::sin(kPi / slots) * std::hypot(A, B);
}

double inflated_radius(double base, double eta) {
  if (!(eta >= 1.0)) throw std::invalid_argument("inflated_radius: eta must be >= 1");
  return eta * base;
}

std::optional<int> min_robots(double A, double B, double r_s, int kappa) {
  const double diag = std::hypot(A, B);
  if (r_s >= diag) return std::nullopt;
  double bound = kPi * kappa / std::asin(r_s / diag);
  // Snap values that are an integer up to rounding so the strict
  // inequality is applied to the intended boundary.
  const double r = std::round(bound);
  if (std::abs(bound - r) < 1e-9 * std::max(1.0, r)) bound = r;
  return static_cast<int>(std::floor(bound)) + 1;
}

double max_detection_time(double omega, int N, int kappa) {
  if (!(omega > 0.0)) throw std::invalid_argument("max_detection_time: omega must be > 0");
  return (kTwoPi / omega) / (static_cast<double>(N) / kappa);
}

double max_encumbrance_2d(double A, double B, int a, int b, int N) {
  return std::sin(kPi / N) * A * B / std::sqrt(A * A * a * a + B * B * b * b);
}

double max_encumbrance_3d(const LissajousParams& params, int N, int samples) {
  return 0.5 * min_pairwise_separation(params, N, samples);
}

SearchResult search_3d_params(double A, double B, int a, int b, int N,
                              const SearchSpace& space) {
  SearchResult best;
  bool found = false;
  std::ostringstream rejected;
  for (int c : space.c_candidates) {
    if (c <= 0 || gcd(a, c) != 1 || gcd(b, c) != 1) {
      rejected << " c=" << c << " (gcd(a,c)=" << gcd(a, c) << ", gcd(b,c)=" << gcd(b, c)
               << ")";
      continue;
    }
    for (int k = 0; k < space.C_points; ++k) {
      const double C = space.C_points == 1
                           ? space.C_max
                           : space.C_min + (space.C_max - space.C_min) * k /
                                               (space.C_points - 1);
      for (double phi : space.phi_grid) {
        auto p = LissajousParams::make_unchecked(A, B, C, a, b, c, phi);
        if (!is_knot(p)) continue;
        const double e = max_encumbrance_3d(p, N, space.samples);
        ++best.evaluated;
        // Strict improvement only: earlier (smaller) tuples win ties.
        if (!found || e > best.encumbrance) {
          best.C = C;
          best.c = c;
          best.phi = phi;
          best.encumbrance = e;
          found = true;
        }
      }
    }
  }
  if (!found) {
    throw SearchFailure("search_3d_params: no knot among candidates;" +
                        (rejected.str().empty() ? std::string(" all phases singular")
                                                : rejected.str()));
  }
  return best;
}

GuaranteeReport check_guarantees(const MissionSpec& m, const LissajousParams& params,
                                 double omega) {
  GuaranteeReport r;
  r.curve_ok = is_nondegenerate(params);
  if (!r.curve_ok) r.violated.push_back("curve_nondegenerate");

  r.spacing_ok = m.kappa > 0 && m.N % m.kappa == 0 && params.a + params.b == m.N / m.kappa;
  if (!r.spacing_ok) r.violated.push_back("a_plus_b_equals_N_over_kappa");

  r.coverage_bound = min_radius_coverage(m.A, m.B, params.a, params.b);
  r.coverage_ok = m.r_s > r.coverage_bound;
  if (!r.coverage_ok) r.violated.push_back("coverage_radius");

  if (m.kappa > 0 && static_cast<double>(m.N) / m.kappa >= 2.0) {
    r.detection_bound = min_radius_detection(m.A, m.B, m.N, m.kappa);
    r.required_radius = inflated_radius(r.detection_bound, std::max(1.0, m.eta));
    r.detection_ok = m.r_s >= r.required_radius;
  }
  if (!r.detection_ok) r.violated.push_back("detection_radius");

  r.collision_bound = max_encumbrance_2d(m.A, m.B, params.a, params.b, m.N);
  // A lone robot has no pairs to separate.
  if (!params.planar() && m.N >= 2) r.collision_bound_3d = max_encumbrance_3d(params, m.N, 1 << 14);
  r.T_max = omega > 0.0 ? max_detection_time(omega, m.N, m.kappa) : 0.0;
  r.min_robots = min_robots(m.A, m.B, m.r_s, m.kappa).value_or(0);
  for (int p : stable_p_set(m.N))
    if (gcd(m.N, p) == m.kappa) r.stable_p.push_back(p);
  r.omega_ok = omega > 0.0;
  if (!r.omega_ok) r.violated.push_back("omega_positive");
  return r;
}

}  // namespace pmon
