#include "pmon/scenario.hpp"

#include "pmon/resilience.hpp"

#include <yaml-cpp/yaml.h>

#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

namespace pmon {

namespace {

std::string join_errors(const std::vector<std::string>& errs) {
  std::string s = "invalid scenario config:";
  for (const auto& e : errs) s += "\n  " + e;
  return s;
}

/// Walks a YAML tree collecting every problem instead of stopping at the first.
class Reader {
 public:
  std::vector<std::string> errors;

  template <typename T>
  bool get(const YAML::Node& node, const std::string& key, const std::string& path, T& out,
           bool required = false) {
    const std::string full = path.empty() ? key : path + "." + key;
    seen_[path].insert(key);
    if (!node || !node.IsMap() || !node[key]) {
      if (required) errors.push_back(full + ": missing required key");
      return false;
    }
    try {
      out = node[key].template as<T>();
      return true;
    } catch (const YAML::Exception&) {
      errors.push_back(full + ": type mismatch (expected " + type_name<T>() + ")");
      return false;
    }
  }

  template <typename T, size_t K>
  void get_array(const YAML::Node& node, const std::string& key, const std::string& path,
                 std::array<T, K>& out) {
    std::vector<T> v;
    if (!get(node, key, path, v)) return;
    if (v.size() != K) {
      errors.push_back(path + "." + key + ": expected " + std::to_string(K) + " values, got " +
                       std::to_string(v.size()));
      return;
    }
    std::copy(v.begin(), v.end(), out.begin());
  }

  YAML::Node section(const YAML::Node& root, const std::string& key, const std::string& path,
                     bool required = false) {
    const std::string full = path.empty() ? key : path + "." + key;
    seen_[path].insert(key);
    YAML::Node n = root[key];
    if (!n) {
      if (required) errors.push_back(full + ": missing required section");
      return YAML::Node();
    }
    if (!n.IsMap()) {
      errors.push_back(full + ": expected a mapping");
      return YAML::Node();
    }
    return n;
  }

  void mark(const std::string& path, const std::string& key) { seen_[path].insert(key); }

  void check_unknown(const YAML::Node& node, const std::string& path) {
    if (!node || !node.IsMap()) return;
    for (const auto& kv : node) {
      const std::string k = kv.first.as<std::string>();
      if (!seen_[path].count(k)) errors.push_back((path.empty() ? k : path + "." + k) + ": unknown key");
    }
  }

 private:
  template <typename T>
  static std::string type_name() {
    if constexpr (std::is_same_v<T, double>) return "number";
    else if constexpr (std::is_same_v<T, int>) return "integer";
    else if constexpr (std::is_same_v<T, bool>) return "boolean";
    else if constexpr (std::is_same_v<T, std::string>) return "string";
    else if constexpr (std::is_same_v<T, std::uint64_t>) return "unsigned integer";
    else return "list";
  }

  std::map<std::string, std::set<std::string>> seen_;
};

template <typename E>
bool parse_enum(Reader& r, const YAML::Node& node, const std::string& key, const std::string& path,
                const std::map<std::string, E>& names, E& out) {
  std::string s;
  if (!r.get(node, key, path, s)) return false;
  auto it = names.find(s);
  if (it == names.end()) {
    std::string allowed;
    for (const auto& [k, v] : names) allowed += (allowed.empty() ? "" : "|") + k;
    r.errors.push_back(path + "." + key + ": unknown value '" + s + "' (expected " + allowed + ")");
    return false;
  }
  out = it->second;
  return true;
}

const std::map<std::string, Coupling> kCoupling{{"kuramoto", Coupling::kuramoto},
                                                {"openloop", Coupling::openloop}};
const std::map<std::string, TrackingMode> kTracking{{"ideal", TrackingMode::ideal},
                                                    {"mpc", TrackingMode::mpc}};
const std::map<std::string, ReferenceMode> kReference{{"preview", ReferenceMode::preview},
                                                      {"constant", ReferenceMode::constant}};
const std::map<std::string, NetworkMode> kNetMode{{"event", NetworkMode::event},
                                                  {"synchronous", NetworkMode::synchronous}};
const std::map<std::string, FailureKind> kFailure{{"exit", FailureKind::exit},
                                                  {"comm_loss", FailureKind::comm_loss},
                                                  {"link_stall", FailureKind::link_stall}};
const std::map<std::string, LinkState> kLink{{"up", LinkState::up},
                                             {"down", LinkState::down},
                                             {"delay_override", LinkState::delay_override}};

template <typename E>
std::string name_of(const std::map<std::string, E>& names, E v) {
  for (const auto& [k, e] : names)
    if (e == v) return k;
  return "?";
}

ScenarioConfig from_yaml(const YAML::Node& root) {
  Reader r;
  ScenarioConfig c;
  if (!root || !root.IsMap()) throw ConfigError({"<root>: expected a mapping"});

  r.get(root, "name", "", c.name);
  r.get(root, "seed", "", c.seed);
  r.get(root, "duration", "", c.duration, true);
  r.get(root, "override_guarantees", "", c.override_guarantees);
  r.get(root, "initial_failures", "", c.initial_failures);

  if (auto n = r.section(root, "curve", "", true)) {
    r.get(n, "A", "curve", c.curve.A, true);
    r.get(n, "B", "curve", c.curve.B, true);
    r.get(n, "C", "curve", c.curve.C);
    r.get(n, "a", "curve", c.curve.a, true);
    r.get(n, "b", "curve", c.curve.b, true);
    r.get(n, "c", "curve", c.curve.c);
    r.get(n, "phi", "curve", c.curve.phi);
    r.check_unknown(n, "curve");
  }
  if (auto n = r.section(root, "swarm", "", true)) {
    r.get(n, "N", "swarm", c.swarm.N, true);
    r.get(n, "omega", "swarm", c.swarm.omega, true);
    r.get(n, "K", "swarm", c.swarm.K, true);
    r.get(n, "dt", "swarm", c.swarm.dt, true);
    r.get(n, "substeps", "swarm", c.swarm.substeps);
    r.get(n, "p", "swarm", c.swarm.p, true);
    r.get(n, "theta0", "swarm", c.swarm.theta0);
    parse_enum(r, n, "coupling", "swarm", kCoupling, c.swarm.coupling);
    r.get(n, "ring_order", "swarm", c.swarm.ring_order);
    r.check_unknown(n, "swarm");
  }
  if (auto n = r.section(root, "mission", "", true)) {
    double A = 0.0, B = 0.0;
    if (r.get(n, "A", "mission", A) && A != c.curve.A)
      r.errors.push_back("mission.A: must equal curve.A");
    if (r.get(n, "B", "mission", B) && B != c.curve.B)
      r.errors.push_back("mission.B: must equal curve.B");
    r.get(n, "r_s", "mission", c.mission.r_s);
    r.get(n, "eta", "mission", c.mission.eta, true);
    r.get(n, "kappa", "mission", c.mission.kappa);
    r.check_unknown(n, "mission");
  }
  if (auto n = r.section(root, "tracking", "")) {
    parse_enum(r, n, "mode", "tracking", kTracking, c.tracking.mode);
    parse_enum(r, n, "reference", "tracking", kReference, c.tracking.reference);
    r.get(n, "disturbance_sigma", "tracking", c.tracking.disturbance_sigma);
    r.get(n, "gps_sigma", "tracking", c.tracking.gps_sigma);
    r.get(n, "projection_window", "tracking", c.tracking.projection_window);
    r.get(n, "approach_speed", "tracking", c.tracking.approach_speed);
    if (auto m = r.section(n, "mpc", "tracking")) {
      auto& mc = c.tracking.mpc;
      r.get(m, "n", "tracking.mpc", mc.n);
      r.get(m, "dt", "tracking.mpc", mc.dt);
      r.get_array(m, "Q", "tracking.mpc", mc.Q);
      r.get_array(m, "S", "tracking.mpc", mc.S);
      r.get_array(m, "x_max", "tracking.mpc", mc.x_max);
      r.get_array(m, "u_dot_max", "tracking.mpc", mc.u_dot_max);
      r.get_array(m, "u_max", "tracking.mpc", mc.u_max);
      r.get(m, "max_iter", "tracking.mpc", mc.qp.max_iter);
      r.check_unknown(m, "tracking.mpc");
    }
    r.check_unknown(n, "tracking");
  }
  if (auto n = r.section(root, "network", "")) {
    auto& nc = c.network.config;
    parse_enum(r, n, "mode", "network", kNetMode, c.network.mode);
    r.get(n, "base_delay", "network", nc.base_delay);
    r.get(n, "jitter", "network", nc.jitter);
    r.get(n, "drop_prob", "network", nc.drop_prob);
    r.get(n, "comm_period", "network", c.network.comm_period);
    r.mark("network", "overrides");
    if (n["overrides"] && !n["overrides"].IsSequence())
      r.errors.push_back("network.overrides: expected a list");
    if (n["overrides"] && n["overrides"].IsSequence()) {
      int k = 0;
      for (const auto& o : n["overrides"]) {
        const std::string p = "network.overrides[" + std::to_string(k++) + "]";
        int u = 0, v = 0;
        LinkParams lp{nc.base_delay, nc.jitter, nc.drop_prob};
        r.get(o, "u", p, u, true);
        r.get(o, "v", p, v, true);
        r.get(o, "base_delay", p, lp.base_delay);
        r.get(o, "jitter", p, lp.jitter);
        r.get(o, "drop_prob", p, lp.drop_prob);
        r.check_unknown(o, p);
        nc.per_link_overrides[{std::min(u, v), std::max(u, v)}] = lp;
      }
    }
    r.mark("network", "schedule");
    if (n["schedule"] && !n["schedule"].IsSequence())
      r.errors.push_back("network.schedule: expected a list");
    if (n["schedule"] && n["schedule"].IsSequence()) {
      int k = 0;
      for (const auto& o : n["schedule"]) {
        const std::string p = "network.schedule[" + std::to_string(k++) + "]";
        LinkEvent ev;
        r.get(o, "u", p, ev.u, true);
        r.get(o, "v", p, ev.v, true);
        parse_enum(r, o, "state", p, kLink, ev.state);
        r.get(o, "at", p, ev.at, true);
        r.get(o, "delay", p, ev.delay);
        r.check_unknown(o, p);
        c.network.schedule.push_back(ev);
      }
    }
    r.check_unknown(n, "network");
  }
  if (auto n = r.section(root, "protocol", "")) {
    auto& pc = c.protocol;
    r.get(n, "enabled", "protocol", pc.enabled);
    r.get(n, "tau_fail", "protocol", pc.tau_fail);
    r.get(n, "eps_th", "protocol", pc.eps_th);
    std::array<double, 3> po{};
    if (n["p_out"]) {
      r.get_array(n, "p_out", "protocol", po);
      pc.p_out = Vec3(po[0], po[1], po[2]);
      pc.p_out_set = true;
    } else {
      r.get_array(n, "p_out", "protocol", po);
    }
    r.get(n, "prompt_detection", "protocol", pc.prompt_detection);
    r.get(n, "consistency_window", "protocol", pc.consistency_window);
    r.get(n, "rejoin_lateral_tol", "protocol", pc.rejoin_lateral_tol);
    r.get(n, "capture_threshold", "protocol", pc.capture_threshold);
    r.check_unknown(n, "protocol");
  }
  r.mark("", "failures");
  if (root["failures"]) {
    if (!root["failures"].IsSequence()) {
      r.errors.push_back("failures: expected a list");
    } else {
      int k = 0;
      for (const auto& o : root["failures"]) {
        const std::string p = "failures[" + std::to_string(k++) + "]";
        FailureEvent f;
        r.get(o, "robot", p, f.robot, true);
        r.get(o, "start", p, f.start, true);
        r.get(o, "duration", p, f.duration, true);
        parse_enum(r, o, "kind", p, kFailure, f.kind);
        r.get(o, "delay", p, f.delay);
        r.check_unknown(o, p);
        c.failures.push_back(f);
      }
    }
  }
  if (auto n = r.section(root, "targets", "")) {
    r.get(n, "count", "targets", c.targets.count);
    r.get(n, "speed", "targets", c.targets.speed);
    r.get(n, "stop_when_all_detected", "targets", c.targets.stop_when_all_detected);
    r.check_unknown(n, "targets");
  }
  if (auto n = r.section(root, "safety", "")) {
    r.get(n, "enabled", "safety", c.safety.enabled);
    r.get(n, "threshold", "safety", c.safety.threshold);
    r.get(n, "offset", "safety", c.safety.offset);
    r.check_unknown(n, "safety");
  }
  if (auto n = r.section(root, "init", "")) {
    r.get(n, "phase_noise", "init", c.init.phase_noise);
    r.get(n, "offsets", "init", c.init.offsets);
    r.get(n, "random_theta0", "init", c.init.random_theta0);
    r.check_unknown(n, "init");
  }
  if (auto n = r.section(root, "output", "")) {
    r.get(n, "log_every", "output", c.output.log_every);
    r.get(n, "coverage_cell", "output", c.output.coverage_cell);
    r.get(n, "coverage_period", "output", c.output.coverage_period);
    r.get(n, "coverage_radius", "output", c.output.coverage_radius);
    r.check_unknown(n, "output");
  }
  r.check_unknown(root, "");

  if (r.errors.empty()) {
    for (auto& e : validate_config(c)) r.errors.push_back(std::move(e));
  } else if (std::none_of(r.errors.begin(), r.errors.end(),
                          [](const std::string& e) { return e.rfind("curve", 0) == 0; })) {
    // Other sections failed; curve invariants are still worth reporting.
    for (const auto& v : c.curve.violations()) r.errors.push_back("curve: " + v);
  }
  if (!r.errors.empty()) throw ConfigError(r.errors);
  return c;
}

}  // namespace

ConfigError::ConfigError(std::vector<std::string> errors)
    : std::runtime_error(join_errors(errors)), errors_(std::move(errors)) {}

MissionSpec ScenarioConfig::mission_spec() const {
  return {curve.A, curve.B, sensing_radius(), mission.eta, mission.kappa, swarm.N};
}

double ScenarioConfig::sensing_radius() const {
  if (mission.r_s > 0.0) return mission.r_s;
  const int slots = mission.kappa > 0 ? swarm.N / mission.kappa : 0;
  if (slots < 2) return std::hypot(curve.A, curve.B);
  return inflated_radius(min_radius_detection(curve.A, curve.B, swarm.N, mission.kappa),
                         std::max(1.0, mission.eta));
}

double ScenarioConfig::comm_period() const {
  return network.comm_period > 0.0 ? network.comm_period : 10.0 * swarm.dt;
}

double ScenarioConfig::eps_th() const {
  return protocol.eps_th > 0.0 ? protocol.eps_th : default_eps_th(swarm.N, swarm.p);
}

Vec3 ScenarioConfig::p_out() const {
  if (protocol.p_out_set) return protocol.p_out;
  return {curve.A + 10.0, curve.B + 10.0, 0.0};
}

std::vector<std::string> validate_config(const ScenarioConfig& c) {
  std::vector<std::string> e;
  for (const auto& v : c.curve.violations()) e.push_back("curve: " + v);
  if (!(c.curve.A > 0.0) || !(c.curve.B > 0.0)) e.push_back("curve: A and B must be > 0");
  if (c.curve.C < 0.0) e.push_back("curve.C: must be >= 0");
  const auto& s = c.swarm;
  if (s.N < 1) e.push_back("swarm.N: must be >= 1");
  if (!(s.dt > 0.0)) e.push_back("swarm.dt: must be > 0");
  if (s.substeps < 1) e.push_back("swarm.substeps: must be >= 1");
  if (s.dt > 0.0 && s.substeps >= 1 && std::abs(s.K) * s.dt / s.substeps > kMaxGainStep)
    e.push_back("swarm: K*dt/substeps exceeds " + std::to_string(kMaxGainStep) +
                " (explicit Euler unstable)");
  if (!s.ring_order.empty()) {
    try {
      RingTopology ring(s.ring_order);
      if (ring.size() != s.N) e.push_back("swarm.ring_order: must list N robots");
    } catch (const std::exception& ex) {
      e.push_back(std::string("swarm.ring_order: ") + ex.what());
    }
  }
  if (c.mission.eta < 1.0) e.push_back("mission.eta: must be >= 1");
  if (c.mission.kappa < 1) e.push_back("mission.kappa: must be >= 1");
  if (c.mission.r_s < 0.0) e.push_back("mission.r_s: must be >= 0");
  if (!(c.duration > 0.0)) e.push_back("duration: must be > 0");
  try {
    c.tracking.mpc.check();
  } catch (const std::exception& ex) {
    e.push_back(std::string("tracking.") + ex.what());
  }
  if (c.tracking.mode == TrackingMode::mpc && s.dt > 0.0) {
    const double ratio = c.tracking.mpc.dt / s.dt;
    if (std::abs(ratio - std::round(ratio)) > 1e-6 || ratio < 1.0 - 1e-9)
      e.push_back("tracking.mpc.dt: must be a positive multiple of swarm.dt");
  }
  if (c.tracking.gps_sigma < 0.0) e.push_back("tracking.gps_sigma: must be >= 0");
  if (c.tracking.disturbance_sigma < 0.0) e.push_back("tracking.disturbance_sigma: must be >= 0");
  if (!(c.tracking.projection_window > 0.0)) e.push_back("tracking.projection_window: must be > 0");
  if (!(c.tracking.approach_speed > 0.0)) e.push_back("tracking.approach_speed: must be > 0");
  try {
    c.network.config.check();
  } catch (const std::exception& ex) {
    e.push_back(ex.what());
  }
  if (c.network.comm_period < 0.0) e.push_back("network.comm_period: must be >= 0");
  if (s.N >= 1) {
    RingTopology ring = s.ring_order.empty() || static_cast<int>(s.ring_order.size()) != s.N
                            ? RingTopology(s.N)
                            : RingTopology(s.ring_order);
    for (size_t k = 0; k < c.network.schedule.size(); ++k) {
      const auto& ev = c.network.schedule[k];
      if (!ring.is_edge(ev.u, ev.v))
        e.push_back("network.schedule[" + std::to_string(k) + "]: not a ring edge");
    }
    for (size_t k = 0; k < c.failures.size(); ++k) {
      const auto& f = c.failures[k];
      const std::string p = "failures[" + std::to_string(k) + "]";
      if (f.robot < 0 || f.robot >= s.N) e.push_back(p + ".robot: out of range");
      if (f.start < 0.0) e.push_back(p + ".start: must be >= 0");
      if (f.kind != FailureKind::exit && c.network.mode != NetworkMode::event)
        e.push_back(p + ".kind: needs network.mode event");
      if (f.kind == FailureKind::link_stall && !(f.delay >= 0.0))
        e.push_back(p + ".delay: must be >= 0");
    }
  }
  if (c.initial_failures < 0 || c.initial_failures > s.N)
    e.push_back("initial_failures: must be in [0, N]");
  if (!(c.protocol.tau_fail > 0.0)) e.push_back("protocol.tau_fail: must be > 0");
  if (c.protocol.eps_th < 0.0) e.push_back("protocol.eps_th: must be >= 0");
  if (!(c.protocol.capture_threshold > 0.0)) e.push_back("protocol.capture_threshold: must be > 0");
  if (c.protocol.consistency_window < 0.0) e.push_back("protocol.consistency_window: must be >= 0");
  if (c.targets.count < 0) e.push_back("targets.count: must be >= 0");
  if (c.targets.speed < 0.0) e.push_back("targets.speed: must be >= 0");
  if (c.safety.threshold < 0.0) e.push_back("safety.threshold: must be >= 0");
  if (c.init.phase_noise < 0.0) e.push_back("init.phase_noise: must be >= 0");
  if (c.init.offsets.size() > static_cast<size_t>(std::max(0, s.N)))
    e.push_back("init.offsets: more entries than robots");
  if (c.output.log_every < 0.0) e.push_back("output.log_every: must be >= 0");
  if (c.output.coverage_cell < 0.0) e.push_back("output.coverage_cell: must be >= 0");
  if (!(c.output.coverage_period > 0.0)) e.push_back("output.coverage_period: must be > 0");
  if (c.output.coverage_radius < 0.0) e.push_back("output.coverage_radius: must be >= 0");
  return e;
}

ScenarioConfig parse_config_string(const std::string& text) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::Exception& ex) {
    throw ConfigError({std::string("<yaml>: ") + ex.what()});
  }
  return from_yaml(root);
}

ScenarioConfig parse_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError({path + ": cannot open"});
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_string(ss.str());
}

namespace {

template <typename C>
void emit_seq(YAML::Emitter& out, const C& values) {
  out << YAML::Flow << YAML::BeginSeq;
  for (const auto& v : values) out << v;
  out << YAML::EndSeq;
}

}  // namespace

std::string serialize_config(const ScenarioConfig& c) {
  YAML::Emitter out;
  out.SetDoublePrecision(17);
  out << YAML::BeginMap;
  out << YAML::Key << "name" << YAML::Value << c.name;
  out << YAML::Key << "seed" << YAML::Value << c.seed;
  out << YAML::Key << "duration" << YAML::Value << c.duration;
  out << YAML::Key << "override_guarantees" << YAML::Value << c.override_guarantees;
  out << YAML::Key << "initial_failures" << YAML::Value << c.initial_failures;

  out << YAML::Key << "curve" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "A" << YAML::Value << c.curve.A << YAML::Key << "B" << YAML::Value << c.curve.B
      << YAML::Key << "C" << YAML::Value << c.curve.C << YAML::Key << "a" << YAML::Value << c.curve.a
      << YAML::Key << "b" << YAML::Value << c.curve.b << YAML::Key << "c" << YAML::Value << c.curve.c
      << YAML::Key << "phi" << YAML::Value << c.curve.phi;
  out << YAML::EndMap;

  out << YAML::Key << "swarm" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "N" << YAML::Value << c.swarm.N << YAML::Key << "omega" << YAML::Value
      << c.swarm.omega << YAML::Key << "K" << YAML::Value << c.swarm.K << YAML::Key << "dt"
      << YAML::Value << c.swarm.dt << YAML::Key << "substeps" << YAML::Value << c.swarm.substeps
      << YAML::Key << "p" << YAML::Value << c.swarm.p << YAML::Key << "theta0" << YAML::Value
      << c.swarm.theta0 << YAML::Key << "coupling" << YAML::Value
      << name_of(kCoupling, c.swarm.coupling);
  if (!c.swarm.ring_order.empty()) {
    out << YAML::Key << "ring_order" << YAML::Value;
    emit_seq(out, c.swarm.ring_order);
  }
  out << YAML::EndMap;

  out << YAML::Key << "mission" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "r_s" << YAML::Value << c.mission.r_s << YAML::Key << "eta" << YAML::Value
      << c.mission.eta << YAML::Key << "kappa" << YAML::Value << c.mission.kappa;
  out << YAML::EndMap;

  const auto& mc = c.tracking.mpc;
  out << YAML::Key << "tracking" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "mode" << YAML::Value << name_of(kTracking, c.tracking.mode);
  out << YAML::Key << "reference" << YAML::Value << name_of(kReference, c.tracking.reference);
  out << YAML::Key << "disturbance_sigma" << YAML::Value << c.tracking.disturbance_sigma;
  out << YAML::Key << "gps_sigma" << YAML::Value << c.tracking.gps_sigma;
  out << YAML::Key << "projection_window" << YAML::Value << c.tracking.projection_window;
  out << YAML::Key << "approach_speed" << YAML::Value << c.tracking.approach_speed;
  out << YAML::Key << "mpc" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "n" << YAML::Value << mc.n << YAML::Key << "dt" << YAML::Value << mc.dt;
  out << YAML::Key << "Q" << YAML::Value;
  emit_seq(out, mc.Q);
  out << YAML::Key << "S" << YAML::Value;
  emit_seq(out, mc.S);
  out << YAML::Key << "x_max" << YAML::Value;
  emit_seq(out, mc.x_max);
  out << YAML::Key << "u_dot_max" << YAML::Value;
  emit_seq(out, mc.u_dot_max);
  out << YAML::Key << "u_max" << YAML::Value;
  emit_seq(out, mc.u_max);
  out << YAML::Key << "max_iter" << YAML::Value << mc.qp.max_iter;
  out << YAML::EndMap << YAML::EndMap;

  const auto& nc = c.network.config;
  out << YAML::Key << "network" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "mode" << YAML::Value << name_of(kNetMode, c.network.mode);
  out << YAML::Key << "base_delay" << YAML::Value << nc.base_delay;
  out << YAML::Key << "jitter" << YAML::Value << nc.jitter;
  out << YAML::Key << "drop_prob" << YAML::Value << nc.drop_prob;
  out << YAML::Key << "comm_period" << YAML::Value << c.network.comm_period;
  if (!nc.per_link_overrides.empty()) {
    out << YAML::Key << "overrides" << YAML::Value << YAML::BeginSeq;
    for (const auto& [k, lp] : nc.per_link_overrides)
      out << YAML::Flow << YAML::BeginMap << YAML::Key << "u" << YAML::Value << k.first
          << YAML::Key << "v" << YAML::Value << k.second << YAML::Key << "base_delay"
          << YAML::Value << lp.base_delay << YAML::Key << "jitter" << YAML::Value << lp.jitter
          << YAML::Key << "drop_prob" << YAML::Value << lp.drop_prob << YAML::EndMap;
    out << YAML::EndSeq;
  }
  if (!c.network.schedule.empty()) {
    out << YAML::Key << "schedule" << YAML::Value << YAML::BeginSeq;
    for (const auto& ev : c.network.schedule)
      out << YAML::Flow << YAML::BeginMap << YAML::Key << "u" << YAML::Value << ev.u << YAML::Key
          << "v" << YAML::Value << ev.v << YAML::Key << "state" << YAML::Value
          << name_of(kLink, ev.state) << YAML::Key << "at" << YAML::Value << ev.at << YAML::Key
          << "delay" << YAML::Value << ev.delay << YAML::EndMap;
    out << YAML::EndSeq;
  }
  out << YAML::EndMap;

  const auto& pc = c.protocol;
  out << YAML::Key << "protocol" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "enabled" << YAML::Value << pc.enabled;
  out << YAML::Key << "tau_fail" << YAML::Value << pc.tau_fail;
  out << YAML::Key << "eps_th" << YAML::Value << pc.eps_th;
  if (pc.p_out_set) {
    out << YAML::Key << "p_out" << YAML::Value;
    emit_seq(out, std::array<double, 3>{pc.p_out.x(), pc.p_out.y(), pc.p_out.z()});
  }
  out << YAML::Key << "prompt_detection" << YAML::Value << pc.prompt_detection;
  out << YAML::Key << "consistency_window" << YAML::Value << pc.consistency_window;
  out << YAML::Key << "rejoin_lateral_tol" << YAML::Value << pc.rejoin_lateral_tol;
  out << YAML::Key << "capture_threshold" << YAML::Value << pc.capture_threshold;
  out << YAML::EndMap;

  if (!c.failures.empty()) {
    out << YAML::Key << "failures" << YAML::Value << YAML::BeginSeq;
    for (const auto& f : c.failures)
      out << YAML::Flow << YAML::BeginMap << YAML::Key << "robot" << YAML::Value << f.robot
          << YAML::Key << "start" << YAML::Value << f.start << YAML::Key << "duration"
          << YAML::Value << f.duration << YAML::Key << "kind" << YAML::Value
          << name_of(kFailure, f.kind) << YAML::Key << "delay" << YAML::Value << f.delay
          << YAML::EndMap;
    out << YAML::EndSeq;
  }

  out << YAML::Key << "targets" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "count" << YAML::Value << c.targets.count << YAML::Key << "speed"
      << YAML::Value << c.targets.speed << YAML::Key << "stop_when_all_detected" << YAML::Value
      << c.targets.stop_when_all_detected;
  out << YAML::EndMap;

  out << YAML::Key << "safety" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "enabled" << YAML::Value << c.safety.enabled << YAML::Key << "threshold"
      << YAML::Value << c.safety.threshold << YAML::Key << "offset" << YAML::Value
      << c.safety.offset;
  out << YAML::EndMap;

  out << YAML::Key << "init" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "phase_noise" << YAML::Value << c.init.phase_noise;
  if (!c.init.offsets.empty()) {
    out << YAML::Key << "offsets" << YAML::Value;
    emit_seq(out, c.init.offsets);
  }
  out << YAML::Key << "random_theta0" << YAML::Value << c.init.random_theta0;
  out << YAML::EndMap;

  out << YAML::Key << "output" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "log_every" << YAML::Value << c.output.log_every << YAML::Key
      << "coverage_cell" << YAML::Value << c.output.coverage_cell << YAML::Key
      << "coverage_period" << YAML::Value << c.output.coverage_period << YAML::Key
      << "coverage_radius" << YAML::Value << c.output.coverage_radius;
  out << YAML::EndMap;

  out << YAML::EndMap;
  return std::string(out.c_str()) + "\n";
}

namespace {

using Setter = std::function<void(ScenarioConfig&, double)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> m{
      {"duration", [](ScenarioConfig& c, double v) { c.duration = v; }},
      {"initial_failures", [](ScenarioConfig& c, double v) { c.initial_failures = static_cast<int>(std::lround(v)); }},
      {"curve.C", [](ScenarioConfig& c, double v) { c.curve.C = v; }},
      {"curve.phi", [](ScenarioConfig& c, double v) { c.curve.phi = v; }},
      {"swarm.omega", [](ScenarioConfig& c, double v) { c.swarm.omega = v; }},
      {"swarm.K", [](ScenarioConfig& c, double v) { c.swarm.K = v; }},
      {"swarm.p", [](ScenarioConfig& c, double v) { c.swarm.p = static_cast<int>(std::lround(v)); }},
      {"swarm.substeps", [](ScenarioConfig& c, double v) { c.swarm.substeps = static_cast<int>(std::lround(v)); }},
      {"mission.eta", [](ScenarioConfig& c, double v) { c.mission.eta = v; }},
      {"mission.r_s", [](ScenarioConfig& c, double v) { c.mission.r_s = v; }},
      {"tracking.disturbance_sigma", [](ScenarioConfig& c, double v) { c.tracking.disturbance_sigma = v; }},
      {"tracking.gps_sigma", [](ScenarioConfig& c, double v) { c.tracking.gps_sigma = v; }},
      {"network.base_delay", [](ScenarioConfig& c, double v) { c.network.config.base_delay = v; }},
      {"network.jitter", [](ScenarioConfig& c, double v) { c.network.config.jitter = v; }},
      {"network.drop_prob", [](ScenarioConfig& c, double v) { c.network.config.drop_prob = v; }},
      {"protocol.tau_fail", [](ScenarioConfig& c, double v) { c.protocol.tau_fail = v; }},
      {"protocol.eps_th", [](ScenarioConfig& c, double v) { c.protocol.eps_th = v; }},
      {"targets.count", [](ScenarioConfig& c, double v) { c.targets.count = static_cast<int>(std::lround(v)); }},
      {"targets.speed", [](ScenarioConfig& c, double v) { c.targets.speed = v; }},
      {"init.phase_noise", [](ScenarioConfig& c, double v) { c.init.phase_noise = v; }},
      {"safety.offset", [](ScenarioConfig& c, double v) { c.safety.offset = v; }},
  };
  return m;
}

}  // namespace

std::vector<std::string> sweepable_fields() {
  std::vector<std::string> out;
  for (const auto& [k, v] : setters()) out.push_back(k);
  return out;
}

void set_field(ScenarioConfig& cfg, const std::string& path, double value) {
  auto it = setters().find(path);
  if (it == setters().end()) {
    std::string msg = "unknown sweep field '" + path + "'; sweepable fields:";
    for (const auto& f : sweepable_fields()) msg += " " + f;
    throw std::invalid_argument(msg);
  }
  it->second(cfg, value);
}

const char* to_string(FailureKind k) {
  switch (k) {
    case FailureKind::exit: return "exit";
    case FailureKind::comm_loss: return "comm_loss";
    case FailureKind::link_stall: return "link_stall";
  }
  return "?";
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

}  // namespace pmon
