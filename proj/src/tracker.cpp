#include "pmon/tracker.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace pmon {

namespace {

constexpr double kNoBound = 1e30;
constexpr double kRidge = 1e-9;

Eigen::Matrix3d axis_A(double h) {
  Eigen::Matrix3d A;
  A << 1.0, h, 0.5 * h * h, 0.0, 1.0, h, 0.0, 0.0, 1.0;
  return A;
}

Eigen::Vector3d axis_B(double h) { return {h * h * h / 6.0, 0.5 * h * h, h}; }

}  // namespace

void MpcConfig::check() const {
  std::ostringstream err;
  if (n < 1) err << " n must be >= 1;";
  if (!(dt > 0.0)) err << " dt must be > 0;";
  for (int i = 0; i < 9; ++i) {
    if (!(Q[i] >= 0.0)) err << " Q[" << i << "] must be >= 0;";
    if (!(S[i] >= 0.0)) err << " S[" << i << "] must be >= 0;";
    if (!(x_max[i] > 0.0)) err << " x_max[" << i << "] must be > 0;";
  }
  for (int i = 0; i < 3; ++i) {
    if (!(u_max[i] > 0.0)) err << " u_max[" << i << "] must be > 0;";
    if (!(u_dot_max[i] > 0.0)) err << " u_dot_max[" << i << "] must be > 0;";
  }
  if (!err.str().empty()) throw std::invalid_argument("mpc config:" + err.str());
}

std::pair<StateMatrix, InputMatrix> build_model(double dt) {
  if (!(dt > 0.0)) throw std::invalid_argument("build_model: dt must be > 0");
  StateMatrix A = StateMatrix::Zero();
  InputMatrix B = InputMatrix::Zero();
  for (int ax = 0; ax < 3; ++ax) {
    A.block<3, 3>(3 * ax, 3 * ax) = axis_A(dt);
    B.block<3, 1>(3 * ax, ax) = axis_B(dt);
  }
  return {A, B};
}

KinematicState point_reference(const Vec3& p) {
  KinematicState s = KinematicState::Zero();
  s(0) = p.x();
  s(3) = p.y();
  s(6) = p.z();
  return s;
}

Vec3 position_of(const KinematicState& s) { return {s(0), s(3), s(6)}; }
Vec3 velocity_of(const KinematicState& s) { return {s(1), s(4), s(7)}; }

MpcTracker::MpcTracker(MpcConfig config) : cfg_(std::move(config)) {
  cfg_.check();
  std::tie(Am_, Bm_) = build_model(cfg_.dt);
  const int n = cfg_.n;
  const Eigen::Matrix3d A = axis_A(cfg_.dt);
  const Eigen::Vector3d B = axis_B(cfg_.dt);

  std::vector<Eigen::Matrix3d> Apow(n + 1);
  Apow[0].setIdentity();
  for (int k = 1; k <= n; ++k) Apow[k] = A * Apow[k - 1];

  for (int ax = 0; ax < 3; ++ax) {
    Axis& a = axes_[ax];
    a.Gamma = Eigen::MatrixXd::Zero(3 * n, n);
    a.Phi.resize(3 * n, 3);
    a.W.resize(3 * n);
    for (int k = 1; k <= n; ++k) {
      a.Phi.block(3 * (k - 1), 0, 3, 3) = Apow[k];
      for (int j = 0; j < k; ++j) a.Gamma.block(3 * (k - 1), j, 3, 1) = Apow[k - 1 - j] * B;
      for (int c = 0; c < 3; ++c)
        a.W(3 * (k - 1) + c) = k < n ? cfg_.Q[3 * ax + c] : 2.0 * cfg_.S[3 * ax + c];
    }
    a.H = a.Gamma.transpose() * a.W.asDiagonal() * a.Gamma;
    // Zero weights can leave H singular; only then is a ridge needed.
    if (Eigen::LLT<Eigen::MatrixXd>(a.H).info() != Eigen::Success) a.H.diagonal().array() += kRidge;

    Eigen::MatrixXd C = Eigen::MatrixXd::Zero(5 * n, n);
    C.topRows(3 * n) = a.Gamma;
    C.block(3 * n, 0, n, n).setIdentity();
    for (int k = 0; k < n; ++k) {
      C(4 * n + k, k) = 1.0;
      if (k > 0) C(4 * n + k, k - 1) = -1.0;
    }
    a.solver = AdmmSolver(a.H, C, cfg_.qp);
  }
}

ReferenceTrajectory approach_reference(const KinematicState& state,
                                       const ReferenceTrajectory& target, double speed,
                                       double h) {
  if (!(speed > 0.0) || !(h > 0.0))
    throw std::invalid_argument("approach_reference: speed and h must be > 0");
  const Vec3 p0 = position_of(state);
  ReferenceTrajectory out = target;
  for (size_t k = 0; k < target.size(); ++k) {
    const Vec3 goal(target[k](0), target[k](3), target[k](6));
    const Vec3 gap = goal - p0;
    const double reach = speed * static_cast<double>(k) * h;
    if (gap.norm() <= reach) continue;
    const Vec3 dir = gap.normalized();
    const Vec3 pk = p0 + reach * dir;
    KinematicState r = KinematicState::Zero();
    for (int c = 0; c < 3; ++c) {
      r(3 * c) = pk(c);
      r(3 * c + 1) = speed * dir(c);
    }
    out[k] = r;
  }
  return out;
}

MpcSolution MpcTracker::solve(const KinematicState& state, const Vec3& reference,
                              const Vec3& prev_input) {
  return solve(state, ReferenceTrajectory(cfg_.n + 1, point_reference(reference)), prev_input);
}

MpcSolution MpcTracker::solve(const KinematicState& state, const ReferenceTrajectory& ref,
                              const Vec3& prev_input) {
  if (!state.allFinite() || !prev_input.allFinite())
    throw std::invalid_argument("mpc solve: non-finite state or input");
  const int n = cfg_.n;
  if (static_cast<int>(ref.size()) != n + 1)
    throw std::invalid_argument("mpc solve: reference must have n + 1 entries");
  for (const auto& r : ref)
    if (!r.allFinite()) throw std::invalid_argument("mpc solve: non-finite reference");

  MpcSolution sol;
  sol.inputs.assign(n, Vec3::Zero());
  for (int ax = 0; ax < 3; ++ax) {
    Axis& a = axes_[ax];
    const Eigen::Vector3d s0 = state.segment<3>(3 * ax);
    Eigen::VectorXd R(3 * n);
    for (int k = 1; k <= n; ++k) R.segment<3>(3 * (k - 1)) = ref[k].segment<3>(3 * ax);
    const Eigen::VectorXd free = a.Phi * s0;
    const Eigen::VectorXd q = a.Gamma.transpose() * (a.W.asDiagonal() * (free - R));

    Eigen::VectorXd l(5 * n), u(5 * n);
    // A state already outside the box widens that bound to its own magnitude,
    // so the problem keeps pulling it back instead of dropping the rows.
    bool inside = true;
    std::array<double, 3> xm{};
    for (int c = 0; c < 3; ++c) {
      xm[c] = cfg_.x_max[3 * ax + c];
      if (std::abs(s0(c)) > xm[c] * (1.0 + 1e-12)) {
        inside = false;
        xm[c] = std::abs(s0(c));
      }
    }
    for (int k = 0; k < n; ++k)
      for (int c = 0; c < 3; ++c) {
        l(3 * k + c) = -xm[c] - free(3 * k + c);
        u(3 * k + c) = xm[c] - free(3 * k + c);
      }
    const double um = cfg_.u_max[ax];
    const double du = cfg_.u_dot_max[ax] * cfg_.dt;
    l.segment(3 * n, n).setConstant(-um);
    u.segment(3 * n, n).setConstant(um);
    l.segment(4 * n, n).setConstant(-du);
    u.segment(4 * n, n).setConstant(du);
    l(4 * n) = prev_input(ax) - du;
    u(4 * n) = prev_input(ax) + du;

    QpResult r = a.solver.solve(q, l, u);
    bool feasible = inside;
    if (!r.polished && r.prim_res > 1e-4) {
      // Box not reachable from here; drop the state rows and report it.
      l.head(3 * n).setConstant(-kNoBound);
      u.head(3 * n).setConstant(kNoBound);
      a.solver.reset_warm_start();
      r = a.solver.solve(q, l, u);
      feasible = false;
    }
    sol.iterations += r.iterations;
    sol.residual = std::max({sol.residual, r.prim_res, r.dual_res});
    if (!feasible) sol.status = MpcStatus::infeasible;
    else if (r.status != QpStatus::solved && sol.status == MpcStatus::optimal)
      sol.status = MpcStatus::max_iter;
    for (int k = 0; k < n; ++k) sol.inputs[k](ax) = r.x(k);
  }

  sol.predicted.resize(n);
  KinematicState x = state;
  for (int k = 0; k < n; ++k) {
    x = Am_ * x + Bm_ * sol.inputs[k];
    sol.predicted[k] = x;
  }
  sol.cost = cost(state, ref, sol.inputs);
  return sol;
}

double MpcTracker::cost(const KinematicState& state, const ReferenceTrajectory& ref,
                        const std::vector<Vec3>& inputs) const {
  const int n = cfg_.n;
  double J = 0.0;
  KinematicState x = state;
  for (int k = 0; k <= n; ++k) {
    if (k > 0) x = Am_ * x + Bm_ * inputs[k - 1];
    const KinematicState e = x - ref[k];
    for (int i = 0; i < 9; ++i)
      J += k < n ? 0.5 * cfg_.Q[i] * e(i) * e(i) : cfg_.S[i] * e(i) * e(i);
  }
  return J;
}

double MpcTracker::constraint_violation(const KinematicState& state,
                                        const std::vector<Vec3>& inputs,
                                        const Vec3& prev_input) const {
  double worst = 0.0;
  KinematicState x = state;
  Vec3 prev = prev_input;
  for (const Vec3& u : inputs) {
    x = Am_ * x + Bm_ * u;
    for (int i = 0; i < 9; ++i) worst = std::max(worst, std::abs(x(i)) - cfg_.x_max[i]);
    for (int c = 0; c < 3; ++c) {
      worst = std::max(worst, std::abs(u(c)) - cfg_.u_max[c]);
      worst = std::max(worst, std::abs(u(c) - prev(c)) - cfg_.u_dot_max[c] * cfg_.dt);
    }
    prev = u;
  }
  return worst;
}

MpcSolution solve(const KinematicState& state, const Vec3& reference, const Vec3& prev_input,
                  const MpcConfig& config) {
  MpcTracker t(config);
  return t.solve(state, reference, prev_input);
}

Vec3 Disturbance::draw() {
  if (sigma_ <= 0.0) return Vec3::Zero();
  const double x = normal_(rng_), y = normal_(rng_), z = normal_(rng_);
  return sigma_ * Vec3(x, y, z);
}

KinematicState propagate(const KinematicState& state, const Vec3& input, double dt,
                         const Vec3& accel_disturbance) {
  if (!(dt > 0.0)) throw std::invalid_argument("propagate: dt must be > 0");
  const auto [A, B] = build_model(dt);
  KinematicState out = A * state + B * input;
  for (int ax = 0; ax < 3; ++ax) {
    out(3 * ax) += 0.5 * accel_disturbance(ax) * dt * dt;
    out(3 * ax + 1) += accel_disturbance(ax) * dt;
  }
  return out;
}

}  // namespace pmon
