#pragma once

#include <Eigen/Core>

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace pmon {

using Vec3 = Eigen::Vector3d;

inline constexpr double kTwoPi = 6.283185307179586476925286766559;
inline constexpr double kPi = 3.141592653589793238462643383280;

/// Default sample count for self-distance and separation scans.
inline constexpr int kDefaultScanSamples = 1 << 17;

class InvalidCurve : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Parameters of a 2D (C = 0) or 3D Lissajous curve
///   x = A cos(a g), y = B sin(b g), z = C cos(c g + phi).
///
/// Construction through make() enforces the mission invariants (a odd,
/// coprime frequencies). make_unchecked() bypasses them for analysis-only
/// use such as the unit circle.
struct LissajousParams {
  double A = 1.0;
  double B = 1.0;
  double C = 0.0;
  int a = 1;
  int b = 1;
  int c = 1;
  double phi = 0.0;

  bool planar() const { return C == 0.0; }

  static LissajousParams make(double A, double B, double C, int a, int b,
                              int c = 1, double phi = 0.0);
  static LissajousParams make_unchecked(double A, double B, double C, int a,
                                        int b, int c = 1, double phi = 0.0);

  /// Human-readable reasons the parameters violate the mission invariants;
  /// empty when valid.
  std::vector<std::string> violations() const;
};

struct CurveDiagnostics {
  bool nondegenerate = false;
  bool knot = false;
  double min_self_distance = 0.0;
  std::vector<std::pair<double, double>> violating_parameter_pairs;
};

Vec3 eval(const LissajousParams& p, double gamma);

/// d/dt of eval(p, gamma(t)) for d gamma/dt = gamma_rate.
Vec3 eval_velocity(const LissajousParams& p, double gamma, double gamma_rate);

/// Second derivative with respect to gamma.
Vec3 eval_second_derivative(const LissajousParams& p, double gamma);

/// True when the x-y projection is traced without overlap: a odd, gcd(a,b)=1.
bool is_nondegenerate(const LissajousParams& p);

/// True when the 3D curve has no self-intersection. Requires pairwise
/// coprime frequencies and a phase phi outside the finite singular set
/// where branches of the curve cross (phi = 0 is always singular).
bool is_knot(const LissajousParams& p);

/// Phase values in [0, pi) for which a coprime 3D curve self-intersects.
std::vector<double> singular_phases(const LissajousParams& p);

struct ScanOptions {
  int samples = kDefaultScanSamples;
};

/// Arithmetic checks plus a numeric self-distance scan.
CurveDiagnostics validate(const LissajousParams& p, ScanOptions opts = {});

/// Minimum distance between non-adjacent strands of the curve, with the
/// parameter pairs at which the curve (numerically) meets itself.
std::pair<double, std::vector<std::pair<double, double>>> min_self_distance(
    const LissajousParams& p, int samples = kDefaultScanSamples);

inline constexpr double kDefaultProjectionWindow = kPi / 2.0;

/// Parameter in [hint - window, hint + window] closest to point. Coarse grid
/// followed by golden-section refinement; ties resolve toward hint.
double project(const LissajousParams& p, const Vec3& point, double theta_hint,
               double window = kDefaultProjectionWindow);

/// Minimum over g in [0, 2pi) of the minimum pairwise distance between the
/// N points eval(p, g + 2 pi i / N).
double min_pairwise_separation(const LissajousParams& p, int N,
                               int samples = kDefaultScanSamples);

/// Max over robots of the residual of the rotating-ellipse identity in the
/// x-y plane. Positions are eval(p, theta_i + gamma); the ellipse parameter
/// is (a + b)(gamma + theta_0), so any equilibrium anchored at thetas[0]
/// gives zero.
double ellipse_residual(const LissajousParams& p,
                        const std::vector<double>& thetas, double gamma);

int gcd(int x, int y);

}  // namespace pmon
