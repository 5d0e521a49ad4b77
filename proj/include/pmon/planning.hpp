#pragma once

#include "pmon/curve.hpp"

#include <optional>
#include <string>
#include <vector>

namespace pmon {

struct MissionSpec {
  double A = 1.0;
  double B = 1.0;
  double r_s = 1.0;
  double eta = 1.0;
  int kappa = 1;
  int N = 2;
};

/// Each check keeps the strictness of its bound: coverage and collision are
/// strict, detection is non-strict.
struct GuaranteeReport {
  bool curve_ok = false;      // non-degenerate x-y curve
  bool spacing_ok = false;    // a + b = N / kappa (rotating-ellipse placement)
  bool coverage_ok = false;   // r_s > coverage bound
  bool detection_ok = false;  // r_s >= eta * detection bound
  bool omega_ok = false;
  double coverage_bound = 0.0;
  double detection_bound = 0.0;   // without eta
  double required_radius = 0.0;   // eta * detection_bound
  double collision_bound = 0.0;   // max encumbrance radius (2D closed form)
  double collision_bound_3d = 0.0;  // numeric, 0 when planar
  double T_max = 0.0;
  int min_robots = 0;             // 0 when r_s covers the whole diagonal
  std::vector<int> stable_p;      // stable p with gcd(N, p) = kappa
  std::vector<std::string> violated;

  bool ok() const { return violated.empty(); }
};

/// max{B sin(pi/2a), A sin(pi/2b)}.
double min_radius_coverage(double A, double B, int a, int b);

/// sin(pi / (N/kappa)) * sqrt(A^2 + B^2).
double min_radius_detection(double A, double B, int N, int kappa);

double inflated_radius(double base, double eta);

/// Smallest N strictly above pi kappa / asin(r_s / sqrt(A^2+B^2)); nullopt
/// when r_s reaches the half-diagonal (any N works).
std::optional<int> min_robots(double A, double B, double r_s, int kappa);

/// (2 pi / omega) / (N / kappa).
double max_detection_time(double omega, int N, int kappa);

/// sin(pi/N) A B / sqrt(A^2 a^2 + B^2 b^2).
double max_encumbrance_2d(double A, double B, int a, int b, int N);

/// Half the minimum equilibrium separation of N robots on the curve.
double max_encumbrance_3d(const LissajousParams& params, int N,
                          int samples = kDefaultScanSamples);

struct SearchSpace {
  std::vector<int> c_candidates;
  double C_min = 0.5;
  double C_max = 5.0;
  int C_points = 8;
  std::vector<double> phi_grid{0.0, kPi / 4.0, kPi / 2.0};
  int samples = 1 << 14;
};

struct SearchResult {
  double C = 0.0;
  int c = 0;
  double phi = 0.0;
  double encumbrance = 0.0;  // max_encumbrance_3d of the winner
  int evaluated = 0;
};

class SearchFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Exhaustive grid search over (C, c, phi) for the knot maximizing the
/// equilibrium separation. Ties break toward the lexicographically smallest
/// (C, c, phi).
SearchResult search_3d_params(double A, double B, int a, int b, int N,
                              const SearchSpace& space);

GuaranteeReport check_guarantees(const MissionSpec& mission,
                                 const LissajousParams& params, double omega);

}  // namespace pmon
