#pragma once

#include "pmon/curve.hpp"

#include <array>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace pmon {

enum class Mode { nominal, failed, exiting, rejoining };
enum class FailureCause { none, stale_comm, distance_violation, injected };

const char* to_string(Mode m);
const char* to_string(FailureCause c);

class IllegalTransition : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// nominal -> failed -> exiting -> rejoining -> nominal, one step at a time.
struct FailureStatus {
  Mode mode = Mode::nominal;
  double since = 0.0;
  FailureCause cause = FailureCause::none;

  static bool legal(Mode from, Mode to);
  void transition(Mode to, double t, FailureCause why = FailureCause::none);
};

/// Equilibrium offset to one neighbor, stored as theta_j - theta_i wrapped to
/// (-pi, pi], so the neighbor's phase is recovered as theta_i + delta_star.
struct SpacingEstimate {
  double delta_star = 0.0;
  double confidence = 0.0;  // order residual at the latest capture
  int captures = 0;
};

/// Smoothing weight after k captures: max(1/k, kMinSmoothing).
inline constexpr double kMinSmoothing = 0.01;

/// Captures theta_j - theta_i when residual < threshold and folds it into
/// prior by a circular running mean. Returns prior unchanged (possibly
/// empty) when the residual is too high.
std::optional<SpacingEstimate> estimate_spacing(double theta_i, double theta_j, double residual,
                                                double threshold,
                                                const std::optional<SpacingEstimate>& prior = {});

/// Both ring neighbors at once, in {previous, next} order.
std::array<std::optional<SpacingEstimate>, 2> estimate_spacing(
    double theta_i, const std::array<double, 2>& neighbor_thetas, double residual,
    double threshold, const std::array<std::optional<SpacingEstimate>, 2>& prior = {});

struct DetectConfig {
  double tau_fail = 1.0;
  double eps_th = 0.1;
  double two_eta_rs = 1.0;
};

struct Detection {
  bool failed = false;
  FailureCause cause = FailureCause::none;
};

Detection detect_failure(double staleness, double d_ij, const DetectConfig& cfg,
                         bool injected = false);

struct SpoofResult {
  double theta = 0.0;
  bool degraded = false;  // no estimate: fell back to the last received phase
};

SpoofResult spoof_virtual(double theta_i, const std::optional<SpacingEstimate>& estimate,
                          double last_received);

struct MotionDirective {
  Vec3 target = Vec3::Zero();
  bool on_curve = true;
  bool active_sensor = true;  // counts for coverage and detection
};

MotionDirective exit_to_pout(const Vec3& p_out);

enum class RejoinAction { steer, complete, deferred };

struct RejoinDirective {
  RejoinAction action = RejoinAction::deferred;
  double theta_target = 0.0;
  double deviation = 0.0;  // |wrap(theta_j - theta_i - delta_star)|
};

/// Slot for robot i next to live neighbor j: theta_j - delta_star, where
/// delta_star is i's estimate of theta_j - theta_i.
RejoinDirective rejoin(double theta_i, std::optional<double> theta_neighbor,
                       const std::optional<SpacingEstimate>& estimate, double eps_th);

/// Default guard: 15% of the nominal spacing 2 pi p / N.
double default_eps_th(int N, int p);

/// Failed count <= floor(N/2) and the failed phases fit inside an open arc
/// shorter than pi (so the complementary half ring is fully active).
bool feasibility_check(int N, const std::vector<double>& failed_phases);

}  // namespace pmon
