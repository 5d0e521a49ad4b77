#include "pmon/resilience.hpp"

#include "pmon/coordination.hpp"

#include <algorithm>
#include <cmath>

namespace pmon {

const char* to_string(Mode m) {
  switch (m) {
    case Mode::nominal: return "nominal";
    case Mode::failed: return "failed";
    case Mode::exiting: return "exiting";
    case Mode::rejoining: return "rejoining";
  }
  return "?";
}

const char* to_string(FailureCause c) {
  switch (c) {
    case FailureCause::none: return "none";
    case FailureCause::stale_comm: return "stale_comm";
    case FailureCause::distance_violation: return "distance_violation";
    case FailureCause::injected: return "injected";
  }
  return "?";
}

bool FailureStatus::legal(Mode from, Mode to) {
  switch (from) {
    case Mode::nominal: return to == Mode::failed;
    case Mode::failed: return to == Mode::exiting;
    case Mode::exiting: return to == Mode::rejoining;
    case Mode::rejoining: return to == Mode::nominal;
  }
  return false;
}

void FailureStatus::transition(Mode to, double t, FailureCause why) {
  if (!legal(mode, to))
    throw IllegalTransition(std::string("illegal transition ") + to_string(mode) + " -> " +
                            to_string(to));
  mode = to;
  since = t;
  if (to == Mode::failed) cause = why;
  if (to == Mode::nominal) cause = FailureCause::none;
}

std::optional<SpacingEstimate> estimate_spacing(double theta_i, double theta_j, double residual,
                                                double threshold,
                                                const std::optional<SpacingEstimate>& prior) {
  if (!(threshold > 0.0)) throw std::invalid_argument("estimate_spacing: threshold must be > 0");
  if (!(residual < threshold)) return prior;
  const double meas = wrap_angle(theta_j - theta_i);
  SpacingEstimate e;
  if (!prior || prior->captures == 0) {
    e.delta_star = meas;
    e.captures = 1;
  } else {
    e.captures = prior->captures + 1;
    const double alpha = std::max(1.0 / e.captures, kMinSmoothing);
    e.delta_star = wrap_angle(prior->delta_star + alpha * wrap_angle(meas - prior->delta_star));
  }
  e.confidence = residual;
  return e;
}

std::array<std::optional<SpacingEstimate>, 2> estimate_spacing(
    double theta_i, const std::array<double, 2>& nb, double residual, double threshold,
    const std::array<std::optional<SpacingEstimate>, 2>& prior) {
  return {estimate_spacing(theta_i, nb[0], residual, threshold, prior[0]),
          estimate_spacing(theta_i, nb[1], residual, threshold, prior[1])};
}

Detection detect_failure(double staleness, double d_ij, const DetectConfig& cfg, bool injected) {
  if (!(cfg.tau_fail > 0.0) || !(cfg.two_eta_rs > 0.0))
    throw std::invalid_argument("detect_failure: thresholds must be > 0");
  if (injected) return {true, FailureCause::injected};
  if (d_ij > cfg.two_eta_rs) return {true, FailureCause::distance_violation};
  if (staleness > cfg.tau_fail) return {true, FailureCause::stale_comm};
  return {};
}

SpoofResult spoof_virtual(double theta_i, const std::optional<SpacingEstimate>& estimate,
                          double last_received) {
  if (!estimate) return {last_received, true};
  return {theta_i + estimate->delta_star, false};
}

MotionDirective exit_to_pout(const Vec3& p_out) { return {p_out, false, false}; }

RejoinDirective rejoin(double theta_i, std::optional<double> theta_neighbor,
                       const std::optional<SpacingEstimate>& estimate, double eps_th) {
  RejoinDirective d;
  if (!theta_neighbor || !estimate) return d;  // deferred
  d.theta_target = *theta_neighbor - estimate->delta_star;
  d.deviation = std::abs(wrap_angle(*theta_neighbor - theta_i - estimate->delta_star));
  d.action = d.deviation <= eps_th ? RejoinAction::complete : RejoinAction::steer;
  return d;
}

double default_eps_th(int N, int p) {
  // Spacing measured as the wrapped neighbor offset, so p and N - p agree.
  return 0.15 * std::abs(wrap_angle(kTwoPi * p / N));
}

bool feasibility_check(int N, const std::vector<double>& phases) {
  const int n = static_cast<int>(phases.size());
  if (n > N / 2) return false;
  if (n <= 1) return true;
  std::vector<double> w(n);
  for (int i = 0; i < n; ++i) {
    double r = std::fmod(phases[i], kTwoPi);
    if (r < 0.0) r += kTwoPi;
    w[i] = r;
  }
  std::sort(w.begin(), w.end());
  double largest_gap = w[0] + kTwoPi - w[n - 1];
  for (int i = 0; i + 1 < n; ++i) largest_gap = std::max(largest_gap, w[i + 1] - w[i]);
  return kTwoPi - largest_gap < kPi;
}

}  // namespace pmon
