#pragma once

#include "pmon/curve.hpp"
#include "pmon/qp_solver.hpp"

#include <Eigen/Core>

#include <array>
#include <cstdint>
#include <random>
#include <vector>

namespace pmon {

/// [x, vx, ax, y, vy, ay, z, vz, az]
using KinematicState = Eigen::Matrix<double, 9, 1>;
using StateMatrix = Eigen::Matrix<double, 9, 9>;
using InputMatrix = Eigen::Matrix<double, 9, 3>;

struct MpcConfig {
  int n = 15;
  double dt = 0.1;
  std::array<double, 9> Q{1.0, 0.1, 0.01, 1.0, 0.1, 0.01, 1.0, 0.1, 0.01};
  std::array<double, 9> S{10.0, 1.0, 0.1, 10.0, 1.0, 0.1, 10.0, 1.0, 0.1};
  std::array<double, 9> x_max{1e4, 8.0, 6.0, 1e4, 8.0, 6.0, 1e4, 8.0, 6.0};
  std::array<double, 3> u_dot_max{100.0, 100.0, 100.0};  // jerk slew, m/s^4
  std::array<double, 3> u_max{20.0, 20.0, 20.0};         // jerk, m/s^3
  QpSettings qp{};

  /// Throws std::invalid_argument listing every violated invariant.
  void check() const;
};

/// Exact discretization of three decoupled triple integrators (jerk input).
std::pair<StateMatrix, InputMatrix> build_model(double dt);

enum class MpcStatus { optimal, infeasible, max_iter };

struct MpcSolution {
  std::vector<Vec3> inputs;                 // u[0..n-1]; apply inputs[0]
  std::vector<KinematicState> predicted;    // x[1..n]
  MpcStatus status = MpcStatus::optimal;
  double cost = 0.0;
  double residual = 0.0;   // worst primal/dual residual over the three axes
  int iterations = 0;      // summed over axes
};

/// Reference over the horizon: ref[k] for k = 0..n (k = 0 is the current
/// time). A constant reference repeats one state.
using ReferenceTrajectory = std::vector<KinematicState>;

KinematicState point_reference(const Vec3& p);

/// Rate-limits a reference: entry k keeps target k when it lies within
/// speed * k * h of the current position, otherwise it is the point that far
/// along the straight line toward it, moving at speed.
ReferenceTrajectory approach_reference(const KinematicState& state,
                                       const ReferenceTrajectory& target, double speed,
                                       double h);

/// Receding-horizon tracker. Matrices and factorizations are cached per axis
/// and the QP iterate is warm-started between calls.
class MpcTracker {
 public:
  explicit MpcTracker(MpcConfig config = {});

  const MpcConfig& config() const { return cfg_; }

  MpcSolution solve(const KinematicState& state, const Vec3& reference, const Vec3& prev_input);
  MpcSolution solve(const KinematicState& state, const ReferenceTrajectory& reference,
                    const Vec3& prev_input);

  /// Objective of an arbitrary input sequence (same cost as the solver).
  double cost(const KinematicState& state, const ReferenceTrajectory& reference,
              const std::vector<Vec3>& inputs) const;

  /// Largest violation of the state box, input box and slew constraints.
  double constraint_violation(const KinematicState& state, const std::vector<Vec3>& inputs,
                              const Vec3& prev_input) const;

 private:
  struct Axis {
    Eigen::MatrixXd Gamma;  // 3n x n
    Eigen::MatrixXd Phi;    // 3n x 3
    Eigen::VectorXd W;      // 3n weights
    Eigen::MatrixXd H;
    AdmmSolver solver;
  };

  MpcConfig cfg_;
  StateMatrix Am_;
  InputMatrix Bm_;
  std::array<Axis, 3> axes_;
};

/// One-shot solve with a fresh tracker.
MpcSolution solve(const KinematicState& state, const Vec3& reference, const Vec3& prev_input,
                  const MpcConfig& config);

/// Seeded zero-mean Gaussian acceleration disturbance.
class Disturbance {
 public:
  Disturbance(double sigma, std::uint64_t seed) : sigma_(sigma), rng_(seed) {}
  Vec3 draw();
  double sigma() const { return sigma_; }

 private:
  double sigma_;
  std::mt19937_64 rng_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

/// x' = A x + B u plus an external acceleration acting on position and
/// velocity over the step (the commanded acceleration state is untouched).
KinematicState propagate(const KinematicState& state, const Vec3& input, double dt,
                         const Vec3& accel_disturbance = Vec3::Zero());

Vec3 position_of(const KinematicState& s);
Vec3 velocity_of(const KinematicState& s);

}  // namespace pmon
