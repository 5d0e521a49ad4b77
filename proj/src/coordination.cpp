#include "pmon/coordination.hpp"

#include "pmon/curve.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace pmon {

RingTopology::RingTopology(int n) : RingTopology([n] {
  if (n < 1) throw std::invalid_argument("ring needs at least 1 robot");
  std::vector<int> o(n);
  std::iota(o.begin(), o.end(), 0);
  return o;
}()) {}

RingTopology::RingTopology(std::vector<int> order) : order_(std::move(order)) {
  const int n = size();
  if (n < 1) throw std::invalid_argument("ring needs at least 1 robot");
  position_.assign(n, -1);
  for (int k = 0; k < n; ++k) {
    const int id = order_[k];
    if (id < 0 || id >= n || position_[id] != -1)
      throw std::invalid_argument("ring order must be a permutation of 0..N-1");
    position_[id] = k;
  }
}

std::array<int, 2> RingTopology::neighbors(int id) const {
  const int n = size();
  const int k = position_.at(id);
  return {order_[(k + n - 1) % n], order_[(k + 1) % n]};
}

bool RingTopology::is_edge(int u, int v) const {
  if (u < 0 || v < 0 || u >= size() || v >= size() || u == v) return false;
  auto nb = neighbors(u);
  return nb[0] == v || nb[1] == v;
}

std::vector<std::array<int, 2>> RingTopology::edges() const {
  const int n = size();
  std::vector<std::array<int, 2>> e;
  const int count = n == 1 ? 0 : (n == 2 ? 1 : n);
  for (int k = 0; k < count; ++k) e.push_back({order_[k], order_[(k + 1) % n]});
  return e;
}

void SwarmParams::check() const {
  if (N < 1) throw std::invalid_argument("swarm: N must be >= 1");
  if (!(dt > 0.0)) throw std::invalid_argument("swarm: dt must be > 0");
  if (substeps < 1) throw std::invalid_argument("swarm: substeps must be >= 1");
  if (std::abs(K) * step_size() > kMaxGainStep) {
    std::ostringstream os;
    os << "swarm: K*h = " << std::abs(K) * step_size() << " exceeds " << kMaxGainStep
       << " (explicit Euler unstable); raise substeps or lower K";
    throw std::invalid_argument(os.str());
  }
}

EquilibriumSpec EquilibriumSpec::make(int N, int p, double theta0) {
  EquilibriumSpec eq;
  eq.p = p;
  eq.theta0 = theta0;
  eq.kappa = gcd(N, p);
  return eq;
}

double kuramoto_rate(double theta_i, const std::array<double, 2>& nb, double omega,
                     double K) {
  return omega - K * (std::sin(nb[0] - theta_i) + std::sin(nb[1] - theta_i));
}

double kuramoto_rate(double theta_i, const std::array<double, 2>& nb,
                     const SwarmParams& params) {
  return kuramoto_rate(theta_i, nb, params.omega, params.K);
}

std::vector<double> equilibrium_phases(int N, int p, double theta0) {
  if (N < 1) throw std::invalid_argument("equilibrium_phases: N must be >= 1");
  std::vector<double> out(N);
  for (int k = 0; k < N; ++k) out[k] = theta0 + kTwoPi * p * k / N;
  return out;
}

std::vector<double> equilibrium_phases(const RingTopology& ring, int p, double theta0) {
  const int n = ring.size();
  auto by_pos = equilibrium_phases(n, p, theta0);
  std::vector<double> out(n);
  for (int k = 0; k < n; ++k) out[ring.order()[k]] = by_pos[k];
  return out;
}

std::vector<int> stable_p_set(int N) {
  std::vector<int> out;
  for (int p = 0; p <= N; ++p)
    if (4 * p > N && 4 * p < 3 * N) out.push_back(p);
  return out;
}

int cluster_count(int N, int p) {
  if (N <= 2) throw std::invalid_argument("cluster_count: N must be > 2");
  return gcd(N, p);
}

double wrap_angle(double x) {
  double r = std::fmod(x + kPi, kTwoPi);
  if (r <= 0.0) r += kTwoPi;
  return r - kPi;
}

ClusterAnalysis analyze_clusters(const std::vector<double>& thetas, double tol) {
  if (!(tol > 0.0)) throw std::invalid_argument("cluster tolerance must be > 0");
  ClusterAnalysis out;
  const int n = static_cast<int>(thetas.size());
  if (n == 0) return out;
  std::vector<double> w(n);
  for (int i = 0; i < n; ++i) {
    double r = std::fmod(thetas[i], kTwoPi);
    if (r < 0) r += kTwoPi;
    w[i] = r;
  }
  std::sort(w.begin(), w.end());
  std::vector<double> gaps(n);
  for (int i = 0; i < n; ++i)
    gaps[i] = i + 1 < n ? w[i + 1] - w[i] : w[0] + kTwoPi - w[n - 1];

  // A gap within a factor 2 of tol is ambiguous; split at the widest
  // log-gap among the ordered gap values instead of at tol itself.
  double threshold = tol;
  for (double g : gaps)
    if (g > 0.5 * tol && g < 2.0 * tol) out.ambiguous = true;
  if (out.ambiguous) {
    std::vector<double> s = gaps;
    std::sort(s.begin(), s.end());
    double best_ratio = 0.0;
    for (int i = 0; i + 1 < n; ++i) {
      const double lo = std::max(s[i], 1e-15), hi = s[i + 1];
      if (hi < 0.1 * tol || lo > 10.0 * tol) continue;
      if (hi / lo > best_ratio) {
        best_ratio = hi / lo;
        threshold = std::sqrt(lo * hi);
      }
    }
  }

  std::vector<int> sizes;
  int start = -1;
  for (int i = 0; i < n; ++i)
    if (gaps[i] > threshold) {
      start = i;
      break;
    }
  if (start < 0) {
    sizes.push_back(n);  // every phase within tol of its successor
  } else {
    int run = 0;
    for (int k = 1; k <= n; ++k) {
      const int i = (start + k) % n;
      ++run;
      if (gaps[i] > threshold) {
        sizes.push_back(run);
        run = 0;
      }
    }
  }
  out.classes = static_cast<int>(sizes.size());
  out.cluster_size = *std::min_element(sizes.begin(), sizes.end());
  out.uniform = std::all_of(sizes.begin(), sizes.end(),
                            [&](int s) { return s == sizes.front(); });
  return out;
}

int clusters_from_phases(const std::vector<double>& thetas, double tol) {
  return analyze_clusters(thetas, tol).cluster_size;
}

bool perturbation_safe(const EquilibriumSpec& eq, int i, double delta,
                       const RingTopology& ring) {
  const int n = ring.size();
  auto phase = [&](int id) {
    return eq.theta0 + kTwoPi * eq.p * ring.position_of(id) / n;
  };
  for (int j : ring.neighbors(i))
    if (!(std::cos(phase(i) - phase(j) + delta) < 0.0)) return false;
  return true;
}

double order_residual(const std::vector<double>& thetas, const RingTopology& ring) {
  double worst = 0.0;
  for (int i = 0; i < ring.size(); ++i) {
    double s = 0.0;
    for (int j : ring.neighbors(i)) s += std::sin(thetas[i] - thetas[j]);
    worst = std::max(worst, std::abs(s));
  }
  return worst;
}

std::vector<double> simulate_ring(std::vector<double> thetas, const RingTopology& ring,
                                  const SwarmParams& params, long steps) {
  const int n = ring.size();
  const double h = params.step_size();
  std::vector<double> next(n);
  std::vector<std::array<int, 2>> nbs(n);
  for (int i = 0; i < n; ++i) nbs[i] = ring.neighbors(i);
  for (long s = 0; s < steps; ++s) {
    for (int i = 0; i < n; ++i) {
      const double r =
          kuramoto_rate(thetas[i], {thetas[nbs[i][0]], thetas[nbs[i][1]]}, params);
      next[i] = step(thetas[i], r, h);
    }
    thetas.swap(next);
  }
  return thetas;
}

}  // namespace pmon
