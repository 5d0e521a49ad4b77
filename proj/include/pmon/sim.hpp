#pragma once

#include "pmon/coordination.hpp"
#include "pmon/curve.hpp"
#include "pmon/planning.hpp"
#include "pmon/resilience.hpp"
#include "pmon/scenario.hpp"
#include "pmon/tracker.hpp"

#include <Eigen/Core>

#include <array>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace pmon {

using Vec2 = Eigen::Vector2d;

struct NeighborInfo {
  double theta = 0.0;
  double stamp = 0.0;  // sent_at of the value
};

struct RobotState {
  int id = 0;
  double theta = 0.0;
  double theta_desired = 0.0;
  KinematicState kinematic = KinematicState::Zero();
  std::map<int, NeighborInfo> neighbor_estimates;
  FailureStatus failure{};
  std::map<int, SpacingEstimate> spacing;  // keyed by neighbor id
};

struct Target {
  Vec2 position = Vec2::Zero();
  Vec2 waypoint = Vec2::Zero();
  double speed_max = 0.0;
  std::optional<double> detected_at;
};

class CoverageGrid {
 public:
  CoverageGrid() = default;
  CoverageGrid(double A, double B, double cell);

  bool enabled() const { return cell_ > 0.0; }
  int nx() const { return nx_; }
  int ny() const { return ny_; }
  double cell() const { return cell_; }
  Vec2 center(int ix, int iy) const;
  bool covered(int ix, int iy) const { return first_[iy * nx_ + ix] >= 0.0; }
  double first_covered(int ix, int iy) const { return first_[iy * nx_ + ix]; }
  double fraction() const;
  /// Marks cells whose centers lie within r of p; returns newly covered count.
  int mark_disc(const Vec2& p, double r, double t);

 private:
  double A_ = 0.0, B_ = 0.0, cell_ = 0.0;
  int nx_ = 0, ny_ = 0;
  long covered_count_ = 0;
  std::vector<double> first_;  // -1 when never covered
};

struct TraceRow {
  double t = 0.0;
  std::vector<double> theta, x, y, z;
  std::vector<double> d, cosdiff, stale;  // per ring edge
  double coverage_pct = 0.0;
  int detections = 0;
  double min_pair_distance = std::numeric_limits<double>::infinity();  // since previous row
  std::vector<int> mode;  // per robot, Mode as int
};

struct SimEvent {
  double t = 0.0;
  std::string kind;
  int robot = -1;
  int other = -1;
  std::string detail;
};

struct SimSummary {
  double min_pair_distance = std::numeric_limits<double>::infinity();
  double min_adjacent_xy = std::numeric_limits<double>::infinity();
  double max_adjacent_xy = 0.0;
  double max_cos = -1.0;
  double max_lateral_error = 0.0;
  int targets = 0;
  int detected = 0;
  double max_detection_time = 0.0;
  double mean_detection_time = 0.0;
  double all_detected_at = -1.0;
  double final_coverage_pct = 0.0;
  std::map<std::string, double> coverage_milestones;  // "50" -> time, -1 if never
  int safety_engagements = 0;
  int failures = 0;
  int rejoins = 0;
  bool feasible_throughout = true;
  double T_max = 0.0;
  long ticks = 0;
};

struct SimTrace {
  int N = 0;
  double dt = 0.0;
  std::vector<std::array<int, 2>> edges;
  std::vector<TraceRow> rows;
  std::vector<SimEvent> events;
  SimSummary summary;
  GuaranteeReport report;
};

class GuaranteeRefused : public std::runtime_error {
 public:
  GuaranteeRefused(const std::string& what, GuaranteeReport report)
      : std::runtime_error(what), report_(std::move(report)) {}
  const GuaranteeReport& report() const { return report_; }

 private:
  GuaranteeReport report_;
};

class SimulationAborted : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Per-robot z offsets: for every x-y pair closer than threshold the
/// lower-id robot of the pair is raised by offset (once, however many pairs).
std::vector<double> z_safety(const std::vector<Vec3>& positions, double threshold,
                             double offset, const std::vector<bool>& active = {});

/// Random-waypoint motion inside [-A, A] x [-B, B].
void update_targets(std::vector<Target>& targets, double dt, double A, double B,
                    std::mt19937_64& rng);
std::vector<Target> spawn_targets(int count, double speed, double A, double B,
                                  std::mt19937_64& rng);

/// Sets detected_at = t for undetected targets within r_s (x-y) of an active
/// robot. Returns the number of new detections.
int check_detection(std::vector<Target>& targets, const std::vector<Vec3>& robots, double r_s,
                    const std::vector<bool>& active, double t);

void update_coverage(CoverageGrid& grid, const std::vector<Vec3>& robots, double r_s,
                     const std::vector<bool>& active, double t);

/// Precomputed-trajectory baseline: omega, no coupling.
double baseline_openloop_rate(const SwarmParams& params);

/// Runs the scenario. Throws GuaranteeRefused when the planning checks fail
/// and the scenario carries no override, ConfigError on invalid configs.
SimTrace run(const ScenarioConfig& scenario);

}  // namespace pmon
