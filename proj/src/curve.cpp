#include "pmon/curve.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <sstream>
#include <unordered_map>

namespace pmon {

int gcd(int x, int y) { return std::gcd(std::abs(x), std::abs(y)); }

LissajousParams LissajousParams::make_unchecked(double A, double B, double C,
                                                int a, int b, int c,
                                                double phi) {
  LissajousParams p;
  p.A = A;
  p.B = B;
  p.C = C;
  p.a = a;
  p.b = b;
  p.c = c;
  p.phi = phi;
  return p;
}

LissajousParams LissajousParams::make(double A, double B, double C, int a,
                                      int b, int c, double phi) {
  auto p = make_unchecked(A, B, C, a, b, c, phi);
  auto v = p.violations();
  if (!v.empty()) {
    std::ostringstream os;
    os << "invalid Lissajous parameters:";
    for (const auto& s : v) os << " " << s << ";";
    throw InvalidCurve(os.str());
  }
  return p;
}

std::vector<std::string> LissajousParams::violations() const {
  std::vector<std::string> out;
  if (!(A > 0.0)) out.push_back("A must be > 0");
  if (!(B > 0.0)) out.push_back("B must be > 0");
  if (!(C >= 0.0)) out.push_back("C must be >= 0");
  if (a <= 0 || b <= 0 || c <= 0) out.push_back("frequencies must be positive");
  if (a % 2 == 0) out.push_back("a must be odd (non-degeneracy)");
  if (gcd(a, b) != 1) out.push_back("gcd(a, b) must be 1 (non-degeneracy)");
  if (C > 0.0) {
    if (gcd(a, c) != 1) out.push_back("gcd(a, c) must be 1");
    if (gcd(b, c) != 1) out.push_back("gcd(b, c) must be 1");
  }
  return out;
}

Vec3 eval(const LissajousParams& p, double g) {
  return {p.A * std::cos(p.a * g), p.B * std::sin(p.b * g),
          p.C == 0.0 ? 0.0 : p.C * std::cos(p.c * g + p.phi)};
}

Vec3 eval_velocity(const LissajousParams& p, double g, double rate) {
  Vec3 d{-p.A * p.a * std::sin(p.a * g), p.B * p.b * std::cos(p.b * g),
         p.C == 0.0 ? 0.0 : -p.C * p.c * std::sin(p.c * g + p.phi)};
  return d * rate;
}

Vec3 eval_second_derivative(const LissajousParams& p, double g) {
  return {-p.A * p.a * p.a * std::cos(p.a * g),
          -p.B * p.b * p.b * std::sin(p.b * g),
          p.C == 0.0 ? 0.0 : -p.C * p.c * p.c * std::cos(p.c * g + p.phi)};
}

bool is_nondegenerate(const LissajousParams& p) {
  return p.A > 0.0 && p.B > 0.0 && p.a > 0 && p.b > 0 && p.a % 2 == 1 &&
         gcd(p.a, p.b) == 1;
}

namespace {

double wrap_pi_interval(double x) {
  // into [0, pi)
  double r = std::fmod(x, kPi);
  if (r < 0) r += kPi;
  if (r >= kPi) r -= kPi;
  return r;
}

}  // namespace

std::vector<double> singular_phases(const LissajousParams& p) {
  std::vector<double> out;
  // Branch x(g1)=x(g2) via g1+g2 and y via g1-g2: crossing whenever
  // c(g1+g2) + 2 phi is a multiple of 2 pi, i.e. phi in (pi/a)Z. Needs b >= 2.
  if (p.b >= 2) {
    for (int j = 0; j < p.a; ++j) out.push_back(kPi * j / p.a);
  }
  // Branch x via g1-g2 and y via g1+g2 = (2k+1) pi / b. Needs a >= 2.
  if (p.a >= 2) {
    if (p.c % 2 == 1) {
      for (int m = 0; m < p.b; ++m) out.push_back(kPi * (2 * m + 1) / (2.0 * p.b));
    } else {
      for (int j = 0; j < p.b; ++j) out.push_back(kPi * j / p.b);
    }
  }
  for (auto& v : out) v = wrap_pi_interval(v);
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end(),
                        [](double x, double y) { return std::abs(x - y) < 1e-12; }),
            out.end());
  return out;
}

bool is_knot(const LissajousParams& p) {
  if (!is_nondegenerate(p) || !(p.C > 0.0)) return false;
  if (gcd(p.a, p.c) != 1 || gcd(p.b, p.c) != 1) return false;
  const double ph = wrap_pi_interval(p.phi);
  for (double s : singular_phases(p)) {
    double d = std::abs(ph - s);
    d = std::min(d, kPi - d);
    if (d < 1e-9) return false;
  }
  return true;
}

namespace {

struct CellKey {
  std::int64_t x, y, z;
  bool operator==(const CellKey&) const = default;
};

struct CellHash {
  std::size_t operator()(const CellKey& k) const {
    std::uint64_t h = static_cast<std::uint64_t>(k.x) * 73856093ULL;
    h ^= static_cast<std::uint64_t>(k.y) * 19349663ULL;
    h ^= static_cast<std::uint64_t>(k.z) * 83492791ULL;
    return static_cast<std::size_t>(h);
  }
};

// Gauss-Newton on r(g1, g2) = L(g1) - L(g2); converges in a handful of steps
// near a crossing or a closest approach of two strands.
std::pair<double, double> refine_pair(const LissajousParams& p, double g1,
                                      double g2) {
  double lambda = 1e-9;
  for (int it = 0; it < 50; ++it) {
    Vec3 r = eval(p, g1) - eval(p, g2);
    Eigen::Matrix<double, 3, 2> J;
    J.col(0) = eval_velocity(p, g1, 1.0);
    J.col(1) = -eval_velocity(p, g2, 1.0);
    Eigen::Matrix2d JtJ = J.transpose() * J;
    JtJ.diagonal().array() += lambda * (1.0 + JtJ.diagonal().array());
    Eigen::Vector2d step = -JtJ.ldlt().solve(J.transpose() * r);
    double n1 = (eval(p, g1 + step(0)) - eval(p, g2 + step(1))).squaredNorm();
    if (n1 <= r.squaredNorm()) {
      g1 += step(0);
      g2 += step(1);
      lambda *= 0.3;
      if (step.cwiseAbs().maxCoeff() < 1e-14) break;
    } else {
      lambda *= 10.0;
      if (lambda > 1e6) break;
    }
  }
  return {g1, g2};
}

double wrap_two_pi(double g) {
  double r = std::fmod(g, kTwoPi);
  if (r < 0) r += kTwoPi;
  return r;
}

}  // namespace

std::pair<double, std::vector<std::pair<double, double>>> min_self_distance(
    const LissajousParams& p, int samples) {
  const int n = std::max(samples, 1024);
  const double dg = kTwoPi / n;
  std::vector<Vec3> pts(n);
  double max_step = 0.0;
  for (int i = 0; i < n; ++i) pts[i] = eval(p, i * dg);
  for (int i = 0; i < n; ++i)
    max_step = std::max(max_step, (pts[(i + 1) % n] - pts[i]).norm());

  const int max_freq = std::max({p.a, p.b, p.planar() ? 1 : p.c});
  // Samples closer than a quarter of the fastest oscillation are on one arc.
  const int exclusion = std::max(2, n / (4 * max_freq));
  const double diag = 2.0 * std::sqrt(p.A * p.A + p.B * p.B + p.C * p.C);

  auto d2 = [&](int i, int j) {
    return (pts[((i % n) + n) % n] - pts[((j % n) + n) % n]).squaredNorm();
  };

  double best = std::numeric_limits<double>::infinity();
  std::vector<std::pair<double, double>> crossings;
  double h = 4.0 * max_step;
  while (h <= 2.0 * diag) {
    std::unordered_map<CellKey, std::vector<int>, CellHash> grid;
    grid.reserve(n);
    auto key = [&](const Vec3& q) {
      return CellKey{static_cast<std::int64_t>(std::floor(q.x() / h)),
                     static_cast<std::int64_t>(std::floor(q.y() / h)),
                     static_cast<std::int64_t>(std::floor(q.z() / h))};
    };
    for (int i = 0; i < n; ++i) grid[key(pts[i])].push_back(i);

    std::vector<std::pair<int, int>> minima;
    const double h2 = h * h;
    for (int i = 0; i < n; ++i) {
      const CellKey k = key(pts[i]);
      for (int dx = -1; dx <= 1; ++dx)
        for (int dy = -1; dy <= 1; ++dy)
          for (int dz = -1; dz <= 1; ++dz) {
            auto it = grid.find({k.x + dx, k.y + dy, k.z + dz});
            if (it == grid.end()) continue;
            for (int j : it->second) {
              if (j <= i) continue;
              const int sep = std::min(j - i, n - (j - i));
              if (sep < exclusion) continue;
              const double v = d2(i, j);
              if (v >= h2) continue;
              if (v < d2(i - 1, j) && v <= d2(i + 1, j) && v < d2(i, j - 1) &&
                  v <= d2(i, j + 1))
                minima.emplace_back(i, j);
            }
          }
    }
    if (!minima.empty()) {
      const double tol = 1e-7 * std::max({p.A, p.B, 1.0});
      for (auto [i, j] : minima) {
        auto [g1, g2] = refine_pair(p, i * dg, j * dg);
        double sep = std::abs(wrap_two_pi(g1) - wrap_two_pi(g2));
        sep = std::min(sep, kTwoPi - sep);
        if (sep < 0.5 * exclusion * dg) continue;  // collapsed onto one arc
        const double d = (eval(p, g1) - eval(p, g2)).norm();
        best = std::min(best, d);
        if (d < tol) {
          double u = wrap_two_pi(g1), w = wrap_two_pi(g2);
          if (u > w) std::swap(u, w);
          bool dup = false;
          for (const auto& [cu, cw] : crossings)
            if (std::abs(cu - u) < 1e-6 && std::abs(cw - w) < 1e-6) dup = true;
          if (!dup) crossings.emplace_back(u, w);
        }
      }
      if (std::isfinite(best)) break;
    }
    h *= 2.0;
  }
  std::sort(crossings.begin(), crossings.end());
  return {best, crossings};
}

CurveDiagnostics validate(const LissajousParams& p, ScanOptions opts) {
  CurveDiagnostics d;
  d.nondegenerate = is_nondegenerate(p);
  d.knot = d.nondegenerate && is_knot(p);
  auto [m, pairs] = min_self_distance(p, opts.samples);
  d.min_self_distance = m;
  d.violating_parameter_pairs = std::move(pairs);
  return d;
}

double project(const LissajousParams& p, const Vec3& point, double hint,
               double window) {
  if (!(window > 0.0)) throw std::invalid_argument("project: window must be > 0");
  constexpr int kGrid = 512;
  const double lo = hint - window;
  const double step = 2.0 * window / kGrid;
  std::vector<double> f(kGrid + 1);
  for (int k = 0; k <= kGrid; ++k)
    f[k] = (eval(p, lo + k * step) - point).squaredNorm();

  auto golden = [&](double a, double b) {
    const double r = 0.5 * (std::sqrt(5.0) - 1.0);
    double x1 = b - r * (b - a), x2 = a + r * (b - a);
    double f1 = (eval(p, x1) - point).squaredNorm();
    double f2 = (eval(p, x2) - point).squaredNorm();
    while (b - a > 1e-12) {
      if (f1 < f2) {
        b = x2;
        x2 = x1;
        f2 = f1;
        x1 = b - r * (b - a);
        f1 = (eval(p, x1) - point).squaredNorm();
      } else {
        a = x1;
        x1 = x2;
        f1 = f2;
        x2 = a + r * (b - a);
        f2 = (eval(p, x2) - point).squaredNorm();
      }
    }
    return 0.5 * (a + b);
  };

  // Refine every sampled local minimum, then pick the closest; near-equal
  // minima are tie-broken toward the hint.
  struct Cand {
    double theta, dist;
  };
  std::vector<Cand> cands;
  for (int k = 0; k <= kGrid; ++k) {
    const bool left_ok = k == 0 || f[k] <= f[k - 1];
    const bool right_ok = k == kGrid || f[k] <= f[k + 1];
    if (!(left_ok && right_ok)) continue;
    const double a = std::max(lo, lo + (k - 1) * step);
    const double b = std::min(hint + window, lo + (k + 1) * step);
    const double t = golden(a, b);
    cands.push_back({t, (eval(p, t) - point).norm()});
  }
  double best = std::numeric_limits<double>::infinity();
  for (const auto& c : cands) best = std::min(best, c.dist);
  const double tie = 1e-6 * (1.0 + best);
  double out = hint;
  double out_gap = std::numeric_limits<double>::infinity();
  for (const auto& c : cands) {
    if (c.dist <= best + tie && std::abs(c.theta - hint) < out_gap) {
      out = c.theta;
      out_gap = std::abs(c.theta - hint);
    }
  }
  return out;
}

double min_pairwise_separation(const LissajousParams& p, int N, int samples) {
  if (N < 2) throw std::invalid_argument("min_pairwise_separation: N must be >= 2");
  const int steps = std::max(64, samples / N);
  const double span = kTwoPi / N;
  std::vector<Vec3> pos(N);
  double best = std::numeric_limits<double>::infinity();
  for (int s = 0; s < steps; ++s) {
    const double g = span * s / steps;
    for (int i = 0; i < N; ++i) pos[i] = eval(p, g + kTwoPi * i / N);
    for (int i = 0; i < N; ++i)
      for (int j = i + 1; j < N; ++j)
        best = std::min(best, (pos[i] - pos[j]).squaredNorm());
  }
  return std::sqrt(best);
}

double ellipse_residual(const LissajousParams& p,
                        const std::vector<double>& thetas, double gamma) {
  if (thetas.empty()) return 0.0;
  const double s = (p.a + p.b) * (gamma + thetas.front());
  const double sn = std::sin(s), cs = std::cos(s);
  double worst = 0.0;
  for (double th : thetas) {
    const double x = p.A * std::cos(p.a * (th + gamma));
    const double y = p.B * std::sin(p.b * (th + gamma));
    const double lhs = y * y / (p.B * p.B) + x * x / (p.A * p.A) -
                       2.0 * x * y * sn / (p.A * p.B);
    worst = std::max(worst, std::abs(lhs - cs * cs));
  }
  return worst;
}

}  // namespace pmon
