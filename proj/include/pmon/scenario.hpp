#pragma once

#include "pmon/coordination.hpp"
#include "pmon/curve.hpp"
#include "pmon/netsim.hpp"
#include "pmon/planning.hpp"
#include "pmon/tracker.hpp"

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace pmon {

enum class Coupling { kuramoto, openloop };
enum class TrackingMode { ideal, mpc };
enum class ReferenceMode { preview, constant };
enum class NetworkMode { event, synchronous };
enum class FailureKind { exit, comm_loss, link_stall };

struct SwarmConfig {
  int N = 1;
  double omega = 0.0;
  double K = 0.0;
  double dt = 0.01;
  int substeps = 1;
  int p = 1;
  double theta0 = 0.0;
  Coupling coupling = Coupling::kuramoto;
  std::vector<int> ring_order;  // empty: identity
};

struct MissionConfig {
  double r_s = 0.0;  // 0: eta times the detection bound
  double eta = 1.0;
  int kappa = 1;
};

struct TrackingConfig {
  TrackingMode mode = TrackingMode::ideal;
  ReferenceMode reference = ReferenceMode::preview;
  MpcConfig mpc{};
  double disturbance_sigma = 0.0;  // m/s^2 per tick
  double gps_sigma = 0.1;          // m
  double projection_window = 0.25;  // rad
  double approach_speed = 3.0;      // m/s, cap on how fast the reference leads
};

struct NetworkSection {
  NetworkMode mode = NetworkMode::event;
  NetworkConfig config{};
  double comm_period = 0.0;  // 0: 10 dt
  std::vector<LinkEvent> schedule;
};

struct FailureEvent {
  int robot = 0;
  double start = 0.0;
  double duration = 0.0;  // < 0: never recovers
  FailureKind kind = FailureKind::exit;
  double delay = 5.0;     // link_stall only
};

struct ProtocolConfig {
  bool enabled = true;
  double tau_fail = 1.0;
  double eps_th = 0.0;  // 0: 15% of the nominal spacing
  Vec3 p_out{0.0, 0.0, 0.0};
  bool p_out_set = false;  // default: just outside the (+A, +B) corner
  bool prompt_detection = true;
  double consistency_window = 1.0;
  double rejoin_lateral_tol = 1.0;
  double capture_threshold = 0.05;
};

struct TargetsConfig {
  int count = 0;
  double speed = 1.0;
  bool stop_when_all_detected = false;
};

struct SafetyConfig {
  bool enabled = true;
  double threshold = 0.0;  // 0: twice the planar encumbrance bound
  double offset = 1.0;
};

struct InitConfig {
  double phase_noise = 0.0;  // uniform half-width, rad
  std::vector<double> offsets;  // per robot, rad
  bool random_theta0 = false;
};

struct OutputConfig {
  double log_every = 0.0;       // 0: every tick
  double coverage_cell = 0.0;   // 0: no coverage grid
  double coverage_period = 0.1;
  double coverage_radius = 0.0;  // 0: sensing radius
};

struct ScenarioConfig {
  std::string name;
  LissajousParams curve{};
  SwarmConfig swarm{};
  MissionConfig mission{};
  TrackingConfig tracking{};
  NetworkSection network{};
  ProtocolConfig protocol{};
  std::vector<FailureEvent> failures;
  int initial_failures = 0;  // a contiguous block of ring neighbors that exits at t = 0
  TargetsConfig targets{};
  SafetyConfig safety{};
  InitConfig init{};
  OutputConfig output{};
  double duration = 10.0;
  std::uint64_t seed = 1;
  bool override_guarantees = false;

  MissionSpec mission_spec() const;
  double sensing_radius() const;
  double comm_period() const;
  double eps_th() const;
  Vec3 p_out() const;
};

/// All schema problems found while parsing, each prefixed by its key path.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(std::vector<std::string> errors);
  const std::vector<std::string>& errors() const { return errors_; }

 private:
  std::vector<std::string> errors_;
};

ScenarioConfig parse_config(const std::string& path);
ScenarioConfig parse_config_string(const std::string& yaml);
std::string serialize_config(const ScenarioConfig& cfg);

/// Semantic checks beyond the schema; empty when consistent.
std::vector<std::string> validate_config(const ScenarioConfig& cfg);

/// Dotted paths accepted by set_field.
std::vector<std::string> sweepable_fields();
/// Sets a numeric field; throws std::invalid_argument for an unknown path.
void set_field(ScenarioConfig& cfg, const std::string& path, double value);

const char* to_string(FailureKind k);

/// splitmix64 stream split: independent seeds per subsystem.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

}  // namespace pmon
