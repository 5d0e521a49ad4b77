#include "pmon/sim.hpp"

#include "pmon/netsim.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>
#include <sstream>

namespace pmon {

CoverageGrid::CoverageGrid(double A, double B, double cell) : A_(A), B_(B), cell_(cell) {
  if (!(cell > 0.0)) throw std::invalid_argument("coverage cell must be > 0");
  nx_ = std::max(1, static_cast<int>(std::ceil(2.0 * A / cell - 1e-9)));
  ny_ = std::max(1, static_cast<int>(std::ceil(2.0 * B / cell - 1e-9)));
  first_.assign(static_cast<size_t>(nx_) * ny_, -1.0);
}

Vec2 CoverageGrid::center(int ix, int iy) const {
  const double wx = 2.0 * A_ / nx_, wy = 2.0 * B_ / ny_;
  return {-A_ + (ix + 0.5) * wx, -B_ + (iy + 0.5) * wy};
}

double CoverageGrid::fraction() const {
  return first_.empty() ? 0.0 : static_cast<double>(covered_count_) / first_.size();
}

int CoverageGrid::mark_disc(const Vec2& p, double r, double t) {
  if (!enabled()) return 0;
  const double wx = 2.0 * A_ / nx_, wy = 2.0 * B_ / ny_;
  const int x0 = std::max(0, static_cast<int>(std::floor((p.x() - r + A_) / wx)));
  const int x1 = std::min(nx_ - 1, static_cast<int>(std::floor((p.x() + r + A_) / wx)));
  const int y0 = std::max(0, static_cast<int>(std::floor((p.y() - r + B_) / wy)));
  const int y1 = std::min(ny_ - 1, static_cast<int>(std::floor((p.y() + r + B_) / wy)));
  const double r2 = r * r;
  int added = 0;
  for (int iy = y0; iy <= y1; ++iy) {
    const double cy = -B_ + (iy + 0.5) * wy - p.y();
    for (int ix = x0; ix <= x1; ++ix) {
      double& f = first_[static_cast<size_t>(iy) * nx_ + ix];
      if (f >= 0.0) continue;
      const double cx = -A_ + (ix + 0.5) * wx - p.x();
      if (cx * cx + cy * cy <= r2) {
        f = t;
        ++added;
      }
    }
  }
  covered_count_ += added;
  return added;
}

std::vector<double> z_safety(const std::vector<Vec3>& pos, double threshold, double offset,
                             const std::vector<bool>& active) {
  if (!(threshold > 0.0)) throw std::invalid_argument("z_safety: threshold must be > 0");
  const int n = static_cast<int>(pos.size());
  std::vector<double> dz(n, 0.0);
  const double t2 = threshold * threshold;
  for (int i = 0; i < n; ++i) {
    if (!active.empty() && !active[i]) continue;
    for (int j = i + 1; j < n; ++j) {
      if (!active.empty() && !active[j]) continue;
      const double dx = pos[i].x() - pos[j].x(), dy = pos[i].y() - pos[j].y();
      if (dx * dx + dy * dy < t2) dz[i] = offset;  // i < j: lower id
    }
  }
  return dz;
}

namespace {

Vec2 random_point(double A, double B, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> ux(-A, A), uy(-B, B);
  const double x = ux(rng);
  const double y = uy(rng);
  return {x, y};
}

}  // namespace

std::vector<Target> spawn_targets(int count, double speed, double A, double B,
                                  std::mt19937_64& rng) {
  if (!(speed >= 0.0)) throw std::invalid_argument("targets: speed must be >= 0");
  std::vector<Target> out(count);
  for (auto& t : out) {
    t.position = random_point(A, B, rng);
    t.waypoint = random_point(A, B, rng);
    t.speed_max = speed;
  }
  return out;
}

void update_targets(std::vector<Target>& targets, double dt, double A, double B,
                    std::mt19937_64& rng) {
  for (auto& t : targets) {
    if (t.speed_max <= 0.0) continue;
    double step = t.speed_max * dt;
    while (step > 0.0) {
      const Vec2 to = t.waypoint - t.position;
      const double d = to.norm();
      if (d <= step) {
        t.position = t.waypoint;
        step -= d;
        t.waypoint = random_point(A, B, rng);
        if (d == 0.0) break;
      } else {
        t.position += to * (step / d);
        step = 0.0;
      }
    }
    t.position.x() = std::clamp(t.position.x(), -A, A);
    t.position.y() = std::clamp(t.position.y(), -B, B);
  }
}

int check_detection(std::vector<Target>& targets, const std::vector<Vec3>& robots, double r_s,
                    const std::vector<bool>& active, double t) {
  if (!(r_s > 0.0)) throw std::invalid_argument("check_detection: r_s must be > 0");
  const double r2 = r_s * r_s;
  int found = 0;
  for (auto& tg : targets) {
    if (tg.detected_at) continue;
    for (size_t i = 0; i < robots.size(); ++i) {
      if (!active.empty() && !active[i]) continue;
      const double dx = robots[i].x() - tg.position.x(), dy = robots[i].y() - tg.position.y();
      if (dx * dx + dy * dy <= r2) {
        tg.detected_at = t;
        ++found;
        break;
      }
    }
  }
  return found;
}

void update_coverage(CoverageGrid& grid, const std::vector<Vec3>& robots, double r_s,
                     const std::vector<bool>& active, double t) {
  for (size_t i = 0; i < robots.size(); ++i)
    if (active.empty() || active[i]) grid.mark_disc(robots[i].head<2>(), r_s, t);
}

double baseline_openloop_rate(const SwarmParams& params) { return params.omega; }

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct Agent {
  RobotState s;
  std::array<int, 2> nb{0, 0};
  std::optional<MpcTracker> mpc;
  Vec3 input = Vec3::Zero();
  std::mt19937_64 gps_rng;
  std::normal_distribution<double> gps{0.0, 1.0};
  std::optional<Disturbance> disturbance;
  double z_offset = 0.0;
  std::array<bool, 2> spoofing{false, false};
  std::array<double, 2> consistent_since{-1.0, -1.0};
  bool recovered = false;
  bool broadcasting = true;
  double broadcast = 0.0;
  double lateral = 0.0;
  std::optional<FailureKind> injected;
};

class World {
 public:
  explicit World(const ScenarioConfig& sc);
  void run_loop();
  SimTrace take() { return std::move(trace_); }

 private:
  bool nominal(int i) const { return ag_[i].s.failure.mode == Mode::nominal; }
  Vec3 pos(int i) const { return position_of(ag_[i].s.kinematic); }
  double staleness(int i, int j) const;
  void event(const std::string& kind, int robot, int other = -1, const std::string& d = "");
  void transition(int i, Mode to, FailureCause why = FailureCause::none);
  void apply_failures();
  void poll_network();
  void protocol();
  void update_phases();
  void capture_spacing();
  void move();
  void broadcast_all();
  void after_tick();
  void log_row();
  double rejoin_slot(int i, bool& live) const;
  double virtual_phase(int j) const;
  void check_finite() const;

  const ScenarioConfig& sc_;
  LissajousParams curve_;
  RingTopology ring_;
  SwarmParams swarm_;
  int n_;
  double dt_;
  double r_s_;
  double two_eta_rs_;
  double eps_th_;
  double safety_threshold_;
  DetectConfig detect_{};
  std::unique_ptr<Network> net_;
  std::vector<Agent> ag_;
  std::vector<Target> targets_;
  std::mt19937_64 target_rng_;
  CoverageGrid grid_;
  SimTrace trace_;
  long tick_ = 0;
  double t_ = 0.0;
  long comm_every_ = 10;
  long mpc_every_ = 10;
  long log_every_ = 1;
  long coverage_every_ = 10;
  double coverage_r_ = 0.0;
  double pending_min_pair_ = kInf;
  std::vector<Vec3> prev_pos_;
  std::vector<bool> prev_active_;
  std::vector<FailureEvent> failures_;
  std::vector<bool> failure_started_, failure_ended_;
};

double World::staleness(int i, int j) const {
  auto it = ag_[i].s.neighbor_estimates.find(j);
  if (it == ag_[i].s.neighbor_estimates.end()) return kInf;
  return t_ - it->second.stamp;
}

World::World(const ScenarioConfig& sc)
    : sc_(sc),
      curve_(sc.curve),
      ring_(sc.swarm.ring_order.empty() ? RingTopology(sc.swarm.N)
                                        : RingTopology(sc.swarm.ring_order)),
      n_(sc.swarm.N),
      dt_(sc.swarm.dt),
      target_rng_(derive_seed(sc.seed, 3)) {
  if (auto errs = validate_config(sc); !errs.empty()) throw ConfigError(errs);
  swarm_ = {n_, sc.swarm.omega, sc.swarm.K, dt_, sc.swarm.substeps};
  swarm_.check();

  trace_.report = check_guarantees(sc.mission_spec(), curve_, sc.swarm.omega);
  if (!trace_.report.ok() && !sc.override_guarantees) {
    std::string what = "guarantee check failed:";
    for (const auto& v : trace_.report.violated) what += " " + v;
    throw GuaranteeRefused(what, trace_.report);
  }

  r_s_ = sc.sensing_radius();
  two_eta_rs_ = 2.0 * r_s_;  // r_s already carries eta
  eps_th_ = sc.eps_th();
  detect_ = {sc.protocol.tau_fail, eps_th_, two_eta_rs_};
  safety_threshold_ = sc.safety.threshold > 0.0
                          ? sc.safety.threshold
                          : 2.0 * max_encumbrance_2d(curve_.A, curve_.B, curve_.a, curve_.b, n_);
  comm_every_ = std::max(1L, std::lround(sc.comm_period() / dt_));
  mpc_every_ = std::max(1L, std::lround(sc.tracking.mpc.dt / dt_));
  log_every_ = sc.output.log_every > 0.0 ? std::max(1L, std::lround(sc.output.log_every / dt_)) : 1;
  coverage_every_ = std::max(1L, std::lround(sc.output.coverage_period / dt_));
  coverage_r_ = sc.output.coverage_radius > 0.0 ? sc.output.coverage_radius : r_s_;
  if (sc.output.coverage_cell > 0.0) grid_ = CoverageGrid(curve_.A, curve_.B, sc.output.coverage_cell);

  trace_.N = n_;
  trace_.dt = dt_;
  trace_.edges = ring_.edges();
  trace_.summary.T_max = trace_.report.T_max;

  // Initial phases.
  std::mt19937_64 init_rng(derive_seed(sc.seed, 4));
  double theta0 = sc.swarm.theta0;
  if (sc.init.random_theta0) theta0 = std::uniform_real_distribution<double>(0.0, kTwoPi)(init_rng);
  const auto eq = equilibrium_phases(ring_, sc.swarm.p, theta0);
  std::uniform_real_distribution<double> noise(-sc.init.phase_noise, sc.init.phase_noise);
  ag_.resize(n_);
  for (int i = 0; i < n_; ++i) {
    Agent& a = ag_[i];
    a.s.id = i;
    double th = eq[i];
    if (i < static_cast<int>(sc.init.offsets.size())) th += sc.init.offsets[i];
    if (sc.init.phase_noise > 0.0) th += noise(init_rng);
    a.s.theta = a.s.theta_desired = th;
    a.broadcast = th;
    a.nb = ring_.neighbors(i);
    const Vec3 p = eval(curve_, th), v = eval_velocity(curve_, th, sc.swarm.omega);
    for (int c = 0; c < 3; ++c) {
      a.s.kinematic(3 * c) = p(c);
      a.s.kinematic(3 * c + 1) = v(c);
    }
    a.gps_rng.seed(derive_seed(sc.seed, 1000 + i));
    if (sc.tracking.mode == TrackingMode::mpc) {
      a.mpc.emplace(sc.tracking.mpc);
      a.disturbance.emplace(sc.tracking.disturbance_sigma, derive_seed(sc.seed, 2000 + i));
    }
  }
  for (int i = 0; i < n_; ++i)
    for (int j : ag_[i].nb)
      if (j != i) ag_[i].s.neighbor_estimates[j] = {ag_[j].s.theta, 0.0};

  // Network and scheduled link changes.
  if (sc.network.mode == NetworkMode::event && n_ > 1) {
    NetworkConfig nc = sc.network.config;
    nc.seed = derive_seed(sc.seed, 1);
    net_ = std::make_unique<Network>(ring_, nc);
    for (const auto& ev : sc.network.schedule) net_->set_link(ev.u, ev.v, ev.state, ev.at, ev.delay);
  }

  std::vector<FailureEvent> failures = sc.failures;
  if (sc.initial_failures > 0) {
    const auto& order = ring_.order();
    const int start = std::uniform_int_distribution<int>(0, n_ - 1)(init_rng);
    for (int k = 0; k < sc.initial_failures; ++k)
      failures.push_back({order[(start + k) % n_], 0.0, -1.0, FailureKind::exit, 0.0});
  }
  failures_ = failures;
  failure_started_.assign(failures_.size(), false);
  failure_ended_.assign(failures_.size(), false);
  for (const auto& f : failures_) {
    if (f.kind == FailureKind::exit || !net_) continue;
    const LinkState st = f.kind == FailureKind::comm_loss ? LinkState::down : LinkState::delay_override;
    for (int j : ring_.neighbors(f.robot)) {
      net_->set_link(f.robot, j, st, f.start, f.delay);
      if (f.duration >= 0.0) net_->set_link(f.robot, j, LinkState::up, f.start + f.duration);
    }
  }

  // Initial spacing knowledge: the starting configuration is shared.
  const double thr = sc.protocol.capture_threshold;
  for (int i = 0; i < n_ && n_ > 1; ++i) {
    double res = 0.0;
    for (int j : ag_[i].nb) res += std::sin(ag_[i].s.theta - ag_[j].s.theta);
    for (int j : ag_[i].nb) {
      auto e = estimate_spacing(ag_[i].s.theta, ag_[j].s.theta, std::abs(res), thr);
      if (e) ag_[i].s.spacing[j] = *e;
    }
  }

  if (sc.targets.count > 0)
    targets_ = spawn_targets(sc.targets.count, sc.targets.speed, curve_.A, curve_.B, target_rng_);
}

void World::event(const std::string& kind, int robot, int other, const std::string& d) {
  trace_.events.push_back({t_, kind, robot, other, d});
}

void World::transition(int i, Mode to, FailureCause why) {
  const Mode from = ag_[i].s.failure.mode;
  ag_[i].s.failure.transition(to, t_, why);
  event("mode", i, -1, std::string(to_string(from)) + "->" + to_string(to) +
                           (to == Mode::failed ? std::string(" cause=") + to_string(why) : ""));
  if (to == Mode::failed) ++trace_.summary.failures;
  if (to == Mode::nominal) ++trace_.summary.rejoins;
}

void World::apply_failures() {
  for (size_t k = 0; k < failures_.size(); ++k) {
    const FailureEvent& f = failures_[k];
    Agent& a = ag_[f.robot];
    if (!failure_started_[k] && t_ >= f.start - 1e-9) {
      failure_started_[k] = true;
      event("failure_start", f.robot, -1, to_string(f.kind));
      if (f.kind == FailureKind::exit) {
        a.injected = f.kind;
        a.recovered = false;
        if (a.s.failure.mode == Mode::nominal) transition(f.robot, Mode::failed, FailureCause::injected);
      }
    }
    if (failure_started_[k] && !failure_ended_[k] && f.duration >= 0.0 &&
        t_ >= f.start + f.duration - 1e-9) {
      failure_ended_[k] = true;
      event("failure_end", f.robot, -1, to_string(f.kind));
      if (f.kind == FailureKind::exit) a.recovered = true;
    }
  }
}

void World::poll_network() {
  if (!net_) {
    // Synchronous sharing: every broadcasting robot is visible immediately.
    for (int i = 0; i < n_; ++i)
      for (int j : ag_[i].nb)
        if (j != i && ag_[j].broadcasting) ag_[i].s.neighbor_estimates[j] = {ag_[j].broadcast, t_};
    return;
  }
  for (int i = 0; i < n_; ++i) {
    for (const auto& [j, m] : net_->poll(i, t_)) {
      auto& ne = ag_[i].s.neighbor_estimates[j];
      if (m.sent_at >= ne.stamp) ne = {m.theta, m.sent_at};
    }
  }
}

double World::virtual_phase(int j) const {
  for (int i : ag_[j].nb) {
    if (i == j || !nominal(i)) continue;
    const Agent& a = ag_[i];
    const int q = a.nb[0] == j ? 0 : 1;
    if (!a.spoofing[q]) continue;
    auto it = a.s.spacing.find(j);
    if (it != a.s.spacing.end()) return a.s.theta + it->second.delta_star;
  }
  return ag_[j].s.theta;
}

double World::rejoin_slot(int i, bool& live) const {
  const Agent& a = ag_[i];
  double sx = 0.0, sy = 0.0;
  live = false;
  for (int j : a.nb) {
    if (j == i || !nominal(j) || staleness(i, j) > sc_.protocol.tau_fail) continue;
    auto e = a.s.spacing.find(j);
    if (e == a.s.spacing.end()) continue;
    const double slot = a.s.neighbor_estimates.at(j).theta - e->second.delta_star;
    sx += std::cos(slot);
    sy += std::sin(slot);
    live = true;
  }
  if (!live) return a.s.theta_desired;
  // Keep the unwrapped branch closest to the previous desired phase.
  const double ang = std::atan2(sy, sx);
  return a.s.theta_desired + wrap_angle(ang - a.s.theta_desired);
}

void World::protocol() {
  if (!sc_.protocol.enabled || n_ < 2) return;
  const auto& pc = sc_.protocol;

  // Mode progression of affected robots.
  for (int i = 0; i < n_; ++i) {
    Agent& a = ag_[i];
    switch (a.s.failure.mode) {
      case Mode::nominal: break;
      case Mode::failed:
        if (a.s.failure.since < t_) transition(i, Mode::exiting);
        break;
      case Mode::exiting: {
        bool ready = false;
        if (a.injected) ready = a.recovered;
        else if (a.s.failure.cause == FailureCause::stale_comm)
          ready = std::any_of(a.nb.begin(), a.nb.end(),
                              [&](int j) { return staleness(i, j) <= pc.tau_fail; });
        else
          ready = (pos(i) - sc_.p_out()).norm() < 2.0;
        if (ready) {
          a.injected.reset();
          transition(i, Mode::rejoining);
        }
        break;
      }
      case Mode::rejoining: break;  // completed in update_phases
    }
  }

  // Neighbor-side detection and spoofing.
  for (int i = 0; i < n_; ++i) {
    Agent& a = ag_[i];
    if (!nominal(i)) continue;
    for (int q = 0; q < 2; ++q) {
      const int j = a.nb[q];
      if (j == i) continue;
      const Mode mj = ag_[j].s.failure.mode;
      const double d = (pos(i) - pos(j)).head<2>().norm();
      const double st = staleness(i, j);
      if (!a.spoofing[q]) {
        const bool notified = pc.prompt_detection && (mj == Mode::failed || mj == Mode::exiting);
        const Detection det = detect_failure(st, d, detect_, notified);
        if (!det.failed) continue;
        a.spoofing[q] = true;
        a.consistent_since[q] = -1.0;
        event("spoof_start", i, j, to_string(det.cause));
        if (det.cause == FailureCause::distance_violation && mj == Mode::nominal) {
          // The robot further from its curve point is the one declared failed.
          const int worst = ag_[j].lateral >= a.lateral ? j : i;
          transition(worst, Mode::failed, FailureCause::distance_violation);
          if (worst == i) break;
        }
      } else {
        auto est = a.s.spacing.find(j);
        const double recv = a.s.neighbor_estimates.count(j) ? a.s.neighbor_estimates.at(j).theta : 0.0;
        const bool ok = (mj == Mode::nominal || mj == Mode::rejoining) && st <= pc.tau_fail &&
                        d <= two_eta_rs_ && est != a.s.spacing.end() &&
                        std::abs(wrap_angle(recv - a.s.theta - est->second.delta_star)) <= eps_th_;
        if (!ok) {
          a.consistent_since[q] = -1.0;
        } else if (a.consistent_since[q] < 0.0) {
          a.consistent_since[q] = t_;
        } else if (t_ - a.consistent_since[q] >= pc.consistency_window - 1e-9) {
          a.spoofing[q] = false;
          event("spoof_stop", i, j);
        }
      }
    }
  }

  // Self-detected communication loss.
  if (net_) {
    for (int i = 0; i < n_; ++i) {
      if (!nominal(i)) continue;
      int watched = 0, stale = 0;
      for (int j : ag_[i].nb) {
        const Mode mj = ag_[j].s.failure.mode;
        if (j == i || mj == Mode::failed || mj == Mode::exiting) continue;
        ++watched;
        if (staleness(i, j) > pc.tau_fail) ++stale;
      }
      if (watched > 0 && stale == watched) transition(i, Mode::failed, FailureCause::stale_comm);
    }
  }
}

void World::update_phases() {
  const bool measure = sc_.tracking.mode == TrackingMode::mpc || sc_.tracking.gps_sigma > 0.0;
  const double win = sc_.tracking.projection_window;
  std::vector<double> cur(n_);
  for (int i = 0; i < n_; ++i) {
    Agent& a = ag_[i];
    const Mode m = a.s.failure.mode;
    if (m == Mode::failed || m == Mode::exiting) {
      cur[i] = a.s.theta;
      continue;
    }
    const Vec3 truth = pos(i);
    Vec3 meas = truth;
    if (sc_.tracking.gps_sigma > 0.0) {
      const double gx = a.gps(a.gps_rng), gy = a.gps(a.gps_rng), gz = a.gps(a.gps_rng);
      meas += sc_.tracking.gps_sigma * Vec3(gx, gy, gz);
    }
    if (m == Mode::rejoining) {
      bool live = false;
      const double slot = rejoin_slot(i, live);
      a.s.theta = project(curve_, meas, slot, kPi);
      a.s.theta_desired = slot;
      a.lateral = (truth - eval(curve_, a.s.theta)).norm();
      if (live) {
        const double dev = std::abs(wrap_angle(slot - a.s.theta));
        const bool close = (truth - eval(curve_, slot)).norm() < sc_.protocol.rejoin_lateral_tol;
        if (dev <= eps_th_ && close) {
          a.s.theta = project(curve_, meas, slot, win);
          transition(i, Mode::nominal);
          event("rejoin_complete", i, -1);
        }
      }
      cur[i] = a.s.theta;
      continue;
    }
    if (measure) {
      // The robot knows its own safety lift and projects onto the lifted curve.
      a.s.theta = project(curve_, meas - Vec3(0.0, 0.0, a.z_offset), a.s.theta_desired, win);
      a.lateral = (truth - eval(curve_, a.s.theta)).head<2>().norm();
    } else {
      a.s.theta = a.s.theta_desired;
    }
    cur[i] = a.s.theta;
  }

  // Neighbor inputs: spoofed, received, or (synchronous) the live value.
  const double h = swarm_.step_size();
  std::vector<double> next = cur;
  for (int s = 0; s < swarm_.substeps; ++s) {
    for (int i = 0; i < n_; ++i) {
      if (!nominal(i)) continue;
      const Agent& a = ag_[i];
      if (sc_.swarm.coupling == Coupling::openloop || n_ == 1) {
        next[i] = cur[i] + h * baseline_openloop_rate(swarm_);
        continue;
      }
      std::array<double, 2> nbv{};
      for (int q = 0; q < 2; ++q) {
        const int j = a.nb[q];
        if (a.spoofing[q]) {
          auto e = a.s.spacing.find(j);
          const double last = a.s.neighbor_estimates.count(j) ? a.s.neighbor_estimates.at(j).theta
                                                              : cur[i];
          nbv[q] = spoof_virtual(cur[i], e == a.s.spacing.end()
                                             ? std::nullopt
                                             : std::optional<SpacingEstimate>(e->second),
                                 last)
                       .theta;
        } else if (!net_ && nominal(j)) {
          nbv[q] = cur[j];
        } else {
          auto it = a.s.neighbor_estimates.find(j);
          nbv[q] = it != a.s.neighbor_estimates.end() ? it->second.theta : cur[i];
        }
      }
      next[i] = step(cur[i], kuramoto_rate(cur[i], nbv, swarm_), h);
    }
    cur.swap(next);
    next = cur;
  }
  for (int i = 0; i < n_; ++i)
    if (nominal(i)) ag_[i].s.theta_desired = cur[i];
}

void World::capture_spacing() {
  if (n_ < 2) return;
  for (int i = 0; i < n_; ++i) {
    Agent& a = ag_[i];
    if (!nominal(i) || a.spoofing[0] || a.spoofing[1]) continue;
    double res = 0.0;
    bool known = true;
    for (int j : a.nb) {
      auto it = a.s.neighbor_estimates.find(j);
      if (it == a.s.neighbor_estimates.end()) {
        known = false;
        break;
      }
      res += std::sin(a.s.theta - it->second.theta);
    }
    if (!known) continue;
    for (int j : a.nb) {
      std::optional<SpacingEstimate> prior;
      if (auto e = a.s.spacing.find(j); e != a.s.spacing.end()) prior = e->second;
      auto e = estimate_spacing(a.s.theta, a.s.neighbor_estimates.at(j).theta, std::abs(res),
                                sc_.protocol.capture_threshold, prior);
      if (e) a.s.spacing[j] = *e;
    }
  }
}

void World::move() {
  std::vector<Vec3> p(n_);
  std::vector<bool> present(n_);
  for (int i = 0; i < n_; ++i) {
    p[i] = pos(i);
    const Mode m = ag_[i].s.failure.mode;
    present[i] = m == Mode::nominal || m == Mode::rejoining;
  }
  if (sc_.safety.enabled) {
    const auto dz = z_safety(p, safety_threshold_, sc_.safety.offset, present);
    for (int i = 0; i < n_; ++i) {
      if ((dz[i] != 0.0) != (ag_[i].z_offset != 0.0)) {
        event(dz[i] != 0.0 ? "safety_engage" : "safety_release", i);
        if (dz[i] != 0.0) ++trace_.summary.safety_engagements;
      }
      ag_[i].z_offset = dz[i];
    }
  }

  const double omega = sc_.swarm.omega;
  for (int i = 0; i < n_; ++i) {
    Agent& a = ag_[i];
    const Mode m = a.s.failure.mode;
    const bool leaving = m == Mode::failed || m == Mode::exiting;
    const Vec3 lift(0.0, 0.0, a.z_offset);
    if (sc_.tracking.mode == TrackingMode::ideal) {
      KinematicState k = KinematicState::Zero();
      Vec3 pp, vv = Vec3::Zero();
      if (leaving) {
        pp = exit_to_pout(sc_.p_out()).target;
      } else {
        pp = eval(curve_, a.s.theta_desired) + lift;
        vv = eval_velocity(curve_, a.s.theta_desired, omega);
      }
      for (int c = 0; c < 3; ++c) {
        k(3 * c) = pp(c);
        k(3 * c + 1) = vv(c);
      }
      a.s.kinematic = k;
      continue;
    }
    if (tick_ % mpc_every_ == 0) {
      const int n = a.mpc->config().n;
      const double h = a.mpc->config().dt;
      ReferenceTrajectory ref(n + 1);
      if (leaving) {
        std::fill(ref.begin(), ref.end(), point_reference(exit_to_pout(sc_.p_out()).target));
      } else if (sc_.tracking.reference == ReferenceMode::constant) {
        std::fill(ref.begin(), ref.end(), point_reference(eval(curve_, a.s.theta_desired)));
      } else {
        for (int k = 0; k <= n; ++k) {
          const double g = a.s.theta_desired + k * h * omega;
          const Vec3 pp = eval(curve_, g);
          const Vec3 vv = eval_velocity(curve_, g, omega);
          const Vec3 acc = eval_second_derivative(curve_, g) * omega * omega;
          for (int c = 0; c < 3; ++c) {
            ref[k](3 * c) = pp(c);
            ref[k](3 * c + 1) = vv(c);
            ref[k](3 * c + 2) = acc(c);
          }
        }
      }
      // The safety lift is a pure z shift on top of the rate-limited curve reference.
      KinematicState unlifted = a.s.kinematic;
      if (!leaving) unlifted(6) -= a.z_offset;
      ref = approach_reference(unlifted, ref, sc_.tracking.approach_speed, h);
      if (!leaving)
        for (auto& r : ref) r(6) += a.z_offset;
      const MpcSolution sol = a.mpc->solve(a.s.kinematic, ref, a.input);
      a.input = sol.inputs.front();
      if (sol.status == MpcStatus::infeasible) event("mpc_infeasible", i);
    }
    a.s.kinematic = propagate(a.s.kinematic, a.input, dt_, a.disturbance->draw());
  }
}

void World::broadcast_all() {
  for (int i = 0; i < n_; ++i) {
    Agent& a = ag_[i];
    const Mode m = a.s.failure.mode;
    a.broadcasting = m == Mode::nominal || m == Mode::rejoining;
    a.broadcast = a.s.theta_desired;
  }
  if (!net_ || tick_ % comm_every_ != 0) return;
  for (int i = 0; i < n_; ++i) {
    if (!ag_[i].broadcasting) continue;
    for (int j : ag_[i].nb)
      if (j != i) net_->send(i, j, ag_[i].broadcast, t_);
  }
}

void World::after_tick() {
  // Metrics at the new time.
  std::vector<Vec3> p(n_);
  std::vector<bool> active(n_);
  for (int i = 0; i < n_; ++i) {
    p[i] = pos(i);
    active[i] = nominal(i);
  }
  // Closest approach over the step, with positions interpolated linearly; sampling only at
  // step instants misses crossings on fast curves.
  const bool have_prev = prev_pos_.size() == p.size();
  double mp = kInf;
  for (int i = 0; i < n_; ++i) {
    if (!active[i]) continue;
    for (int j = i + 1; j < n_; ++j) {
      if (!active[j]) continue;
      const Vec3 d1 = p[i] - p[j];
      double d = d1.norm();
      if (have_prev && prev_active_[i] && prev_active_[j]) {
        const Vec3 d0 = prev_pos_[i] - prev_pos_[j];
        const Vec3 dd = d1 - d0;
        const double den = dd.squaredNorm();
        if (den > 0.0) {
          const double s = std::clamp(-d0.dot(dd) / den, 0.0, 1.0);
          d = std::min(d, (d0 + s * dd).norm());
        }
      }
      mp = std::min(mp, d);
    }
  }
  prev_pos_ = p;
  prev_active_ = active;
  pending_min_pair_ = std::min(pending_min_pair_, mp);
  auto& sm = trace_.summary;
  sm.min_pair_distance = std::min(sm.min_pair_distance, mp);
  for (const auto& e : trace_.edges) {
    if (!active[e[0]] || !active[e[1]]) continue;
    const double d = (p[e[0]] - p[e[1]]).head<2>().norm();
    sm.min_adjacent_xy = std::min(sm.min_adjacent_xy, d);
    sm.max_adjacent_xy = std::max(sm.max_adjacent_xy, d);
    sm.max_cos = std::max(sm.max_cos, std::cos(ag_[e[0]].s.theta_desired - ag_[e[1]].s.theta_desired));
  }
  for (int i = 0; i < n_; ++i)
    if (active[i]) sm.max_lateral_error = std::max(sm.max_lateral_error, ag_[i].lateral);

  if (!targets_.empty()) {
    update_targets(targets_, dt_, curve_.A, curve_.B, target_rng_);
    const int before = sm.detected;
    const int found = check_detection(targets_, p, r_s_, active, t_);
    if (found > 0) {
      for (size_t k = 0; k < targets_.size(); ++k)
        if (targets_[k].detected_at && *targets_[k].detected_at == t_)
          event("detection", -1, static_cast<int>(k));
      sm.detected = before + found;
      sm.max_detection_time = t_;
      if (sm.detected == static_cast<int>(targets_.size())) sm.all_detected_at = t_;
    }
  }
  if (grid_.enabled() && tick_ % coverage_every_ == 0) update_coverage(grid_, p, coverage_r_, active, t_);

  if (n_ > 1) {
    std::vector<double> failed_phases;
    for (int i = 0; i < n_; ++i)
      if (!active[i]) failed_phases.push_back(virtual_phase(i));
    if (!feasibility_check(n_, failed_phases)) {
      if (sm.feasible_throughout) event("infeasible", -1, -1, std::to_string(failed_phases.size()));
      sm.feasible_throughout = false;
    }
  }
}

void World::log_row() {
  TraceRow r;
  r.t = t_;
  for (int i = 0; i < n_; ++i) {
    const Vec3 p = pos(i);
    r.theta.push_back(ag_[i].s.theta_desired);
    r.x.push_back(p.x());
    r.y.push_back(p.y());
    r.z.push_back(p.z());
    r.mode.push_back(static_cast<int>(ag_[i].s.failure.mode));
  }
  for (const auto& e : trace_.edges) {
    const int u = e[0], v = e[1];
    r.d.push_back((pos(u) - pos(v)).head<2>().norm());
    r.cosdiff.push_back(std::cos(ag_[u].s.theta_desired - ag_[v].s.theta_desired));
    r.stale.push_back(net_ ? std::max(staleness(u, v), staleness(v, u)) : 0.0);
  }
  r.coverage_pct = 100.0 * grid_.fraction();
  r.detections = trace_.summary.detected;
  if (tick_ == 0 && std::isinf(pending_min_pair_)) {
    for (int i = 0; i < n_; ++i)
      for (int j = i + 1; j < n_; ++j)
        if (nominal(i) && nominal(j)) pending_min_pair_ = std::min(pending_min_pair_, (pos(i) - pos(j)).norm());
  }
  r.min_pair_distance = pending_min_pair_;
  pending_min_pair_ = kInf;
  trace_.rows.push_back(std::move(r));
}

void World::check_finite() const {
  for (int i = 0; i < n_; ++i) {
    const Agent& a = ag_[i];
    if (std::isfinite(a.s.theta) && std::isfinite(a.s.theta_desired) && a.s.kinematic.allFinite())
      continue;
    std::ostringstream os;
    os << "non-finite state at t=" << t_ << " tick=" << tick_ << "\n";
    for (int k = 0; k < n_; ++k)
      os << "  robot " << k << " mode=" << to_string(ag_[k].s.failure.mode)
         << " theta=" << ag_[k].s.theta << " theta_d=" << ag_[k].s.theta_desired
         << " state=" << ag_[k].s.kinematic.transpose() << "\n";
    throw SimulationAborted(os.str());
  }
}

void World::run_loop() {
  const long steps = std::lround(sc_.duration / dt_);
  t_ = 0.0;
  tick_ = 0;
  // t = 0: failures due now, then initial detection and coverage.
  apply_failures();
  {
    std::vector<Vec3> p(n_);
    std::vector<bool> active(n_);
    for (int i = 0; i < n_; ++i) {
      p[i] = pos(i);
      active[i] = nominal(i);
    }
    if (!targets_.empty()) {
      auto& sm = trace_.summary;
      sm.detected = check_detection(targets_, p, r_s_, active, 0.0);
      if (sm.detected == static_cast<int>(targets_.size())) sm.all_detected_at = 0.0;
    }
    if (grid_.enabled()) update_coverage(grid_, p, coverage_r_, active, 0.0);
  }
  log_row();
  for (tick_ = 0; tick_ < steps; ++tick_) {
    t_ = tick_ * dt_;
    apply_failures();
    poll_network();
    protocol();
    update_phases();
    capture_spacing();
    move();
    broadcast_all();
    t_ = (tick_ + 1) * dt_;
    check_finite();
    after_tick();
    const long done = tick_ + 1;
    if (done % log_every_ == 0 || done == steps) {
      const long saved = tick_;
      tick_ = done;
      log_row();
      tick_ = saved;
    }
    if (sc_.targets.stop_when_all_detected && trace_.summary.all_detected_at >= 0.0) {
      if (done % log_every_ != 0 && done != steps) {
        tick_ = done;
        log_row();
      }
      ++tick_;
      break;
    }
  }
  auto& sm = trace_.summary;
  sm.ticks = tick_;
  sm.targets = static_cast<int>(targets_.size());
  double sum = 0.0;
  for (const auto& tg : targets_)
    if (tg.detected_at) sum += *tg.detected_at;
  sm.mean_detection_time = sm.detected > 0 ? sum / sm.detected : 0.0;
  sm.final_coverage_pct = 100.0 * grid_.fraction();
  if (grid_.enabled()) {
    std::vector<double> firsts;
    for (int iy = 0; iy < grid_.ny(); ++iy)
      for (int ix = 0; ix < grid_.nx(); ++ix)
        if (grid_.covered(ix, iy)) firsts.push_back(grid_.first_covered(ix, iy));
    std::sort(firsts.begin(), firsts.end());
    const double total = static_cast<double>(grid_.nx()) * grid_.ny();
    for (double pct : {50.0, 90.0, 99.0, 99.5, 100.0}) {
      const auto need = static_cast<size_t>(std::ceil(pct / 100.0 * total - 1e-9));
      std::ostringstream key;
      key << pct;
      sm.coverage_milestones[key.str()] =
          need == 0 ? 0.0 : (need <= firsts.size() ? firsts[need - 1] : -1.0);
    }
  }
}

}  // namespace

SimTrace run(const ScenarioConfig& scenario) {
  World w(scenario);
  w.run_loop();
  return w.take();
}

}  // namespace pmon
