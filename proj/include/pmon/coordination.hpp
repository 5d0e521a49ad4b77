#pragma once

#include <array>
#include <stdexcept>
#include <vector>

namespace pmon {

/// Ring of N robots. order[k] is the robot id at ring position k; each
/// robot talks to the robots immediately before and after it. A single
/// robot is its own neighbor, which makes every coupling term vanish.
class RingTopology {
 public:
  explicit RingTopology(int n);  // identity order
  explicit RingTopology(std::vector<int> order);

  int size() const { return static_cast<int>(order_.size()); }
  const std::vector<int>& order() const { return order_; }
  int position_of(int id) const { return position_[id]; }

  /// {previous, next} along the ring.
  std::array<int, 2> neighbors(int id) const;
  bool is_edge(int u, int v) const;

  /// Undirected edges (order[k], order[k+1]) in ring order.
  std::vector<std::array<int, 2>> edges() const;

 private:
  std::vector<int> order_;
  std::vector<int> position_;
};

/// Maximum K * h for the explicit Euler step. The ring Laplacian has
/// eigenvalues up to 4, so K h <= 0.5 keeps every mode inside the stability
/// disc regardless of the equilibrium.
inline constexpr double kMaxGainStep = 0.5;

struct SwarmParams {
  int N = 2;
  double omega = 0.0;
  double K = 1.0;
  double dt = 0.01;
  int substeps = 1;

  double step_size() const { return dt / substeps; }

  /// Throws std::invalid_argument on N < 1, dt <= 0 or K h > kMaxGainStep.
  void check() const;
};

struct EquilibriumSpec {
  int p = 1;
  double theta0 = 0.0;
  int kappa = 1;

  static EquilibriumSpec make(int N, int p, double theta0 = 0.0);
};

/// omega - K * sum_j sin(theta_j - theta_i).
double kuramoto_rate(double theta_i, const std::array<double, 2>& neighbor_thetas,
                     double omega, double K);
double kuramoto_rate(double theta_i, const std::array<double, 2>& neighbor_thetas,
                     const SwarmParams& params);

inline double step(double theta, double rate, double dt) { return theta + rate * dt; }

/// theta_0 + 2 pi p k / N for ring position k, unwrapped.
std::vector<double> equilibrium_phases(int N, int p, double theta0 = 0.0);

/// Phases indexed by robot id for a ring with arbitrary order.
std::vector<double> equilibrium_phases(const RingTopology& ring, int p,
                                       double theta0 = 0.0);

/// Integers strictly inside (N/4, 3N/4).
std::vector<int> stable_p_set(int N);

/// gcd(N, p): robots sharing each slot at the equilibrium.
int cluster_count(int N, int p);

struct ClusterAnalysis {
  int classes = 0;     // distinct phases mod 2 pi
  int cluster_size = 0;  // robots per class (smallest class when uneven)
  bool uniform = true;
  bool ambiguous = false;
};

inline constexpr double kDefaultClusterTol = 1e-2;

ClusterAnalysis analyze_clusters(const std::vector<double>& thetas,
                                 double tol = kDefaultClusterTol);

/// Robots per cluster, the quantity that equals gcd(N, p) at a stable
/// equilibrium.
int clusters_from_phases(const std::vector<double>& thetas,
                         double tol = kDefaultClusterTol);

/// True iff cos(theta*_i - theta*_j + delta) < 0 for both ring neighbors j of
/// robot i at the equilibrium eq.
bool perturbation_safe(const EquilibriumSpec& eq, int i, double delta,
                       const RingTopology& ring);

/// max_i |sum_{j in ring(i)} sin(theta_i - theta_j)|.
double order_residual(const std::vector<double>& thetas, const RingTopology& ring);

/// Wraps into (-pi, pi].
double wrap_angle(double x);

/// Synchronous Euler integration of the ring with fresh neighbor values at
/// every step. Returns the phases after `steps` steps.
std::vector<double> simulate_ring(std::vector<double> thetas, const RingTopology& ring,
                                  const SwarmParams& params, long steps);

}  // namespace pmon
