#include "pmon/trace_io.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace pmon {

namespace {

std::string num(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

nlohmann::json finite_or_null(double v) {
  if (std::isfinite(v)) return v;
  return nullptr;
}

void write_file(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  out << text;
}

}  // namespace

std::vector<std::string> trace_header(int N, const std::vector<std::array<int, 2>>& edges) {
  std::vector<std::string> h{"t"};
  for (int i = 0; i < N; ++i) {
    const auto s = std::to_string(i);
    h.insert(h.end(), {"theta_" + s, "x_" + s, "y_" + s, "z_" + s});
  }
  for (const auto& e : edges) {
    const auto s = std::to_string(e[0]) + "_" + std::to_string(e[1]);
    h.insert(h.end(), {"d_" + s, "cos_" + s, "stale_" + s});
  }
  h.insert(h.end(), {"coverage_pct", "detections", "min_pair_distance"});
  for (int i = 0; i < N; ++i) h.push_back("mode_" + std::to_string(i));
  return h;
}

void write_trace_csv(std::ostream& out, const SimTrace& trace) {
  const auto header = trace_header(trace.N, trace.edges);
  for (size_t k = 0; k < header.size(); ++k) out << (k ? "," : "") << header[k];
  out << '\n';
  for (const auto& r : trace.rows) {
    out << num(r.t);
    for (int i = 0; i < trace.N; ++i)
      out << ',' << num(r.theta[i]) << ',' << num(r.x[i]) << ',' << num(r.y[i]) << ','
          << num(r.z[i]);
    for (size_t e = 0; e < trace.edges.size(); ++e)
      out << ',' << num(r.d[e]) << ',' << num(r.cosdiff[e]) << ',' << num(r.stale[e]);
    out << ',' << num(r.coverage_pct) << ',' << r.detections << ',' << num(r.min_pair_distance);
    for (int i = 0; i < trace.N; ++i) out << ',' << r.mode[i];
    out << '\n';
  }
}

std::string events_json(const SimTrace& trace) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& e : trace.events) {
    nlohmann::json j{{"t", e.t}, {"kind", e.kind}, {"robot", e.robot}};
    if (e.other >= 0) j["other"] = e.other;
    if (!e.detail.empty()) j["detail"] = e.detail;
    arr.push_back(std::move(j));
  }
  return arr.dump(2) + "\n";
}

std::string summary_json(const SimTrace& trace, const ScenarioConfig& cfg) {
  const auto& s = trace.summary;
  nlohmann::json milestones = nlohmann::json::object();
  for (const auto& [k, v] : s.coverage_milestones) milestones[k] = v < 0.0 ? nlohmann::json() : nlohmann::json(v);
  nlohmann::json j{
      {"schema", kTraceSchemaVersion},
      {"name", cfg.name},
      {"seed", cfg.seed},
      {"N", trace.N},
      {"dt", trace.dt},
      {"ticks", s.ticks},
      {"min_pair_distance", finite_or_null(s.min_pair_distance)},
      {"min_adjacent_xy", finite_or_null(s.min_adjacent_xy)},
      {"max_adjacent_xy", s.max_adjacent_xy},
      {"max_cos", s.max_cos},
      {"max_lateral_error", s.max_lateral_error},
      {"targets", s.targets},
      {"detected", s.detected},
      {"max_detection_time", s.max_detection_time},
      {"mean_detection_time", s.mean_detection_time},
      {"all_detected_at", s.all_detected_at < 0.0 ? nlohmann::json() : nlohmann::json(s.all_detected_at)},
      {"final_coverage_pct", s.final_coverage_pct},
      {"coverage_milestones", milestones},
      {"safety_engagements", s.safety_engagements},
      {"failures", s.failures},
      {"rejoins", s.rejoins},
      {"feasible_throughout", s.feasible_throughout},
      {"T_max", s.T_max},
      {"guarantees",
       {{"ok", trace.report.ok()},
        {"violated", trace.report.violated},
        {"coverage_bound", trace.report.coverage_bound},
        {"detection_bound", trace.report.detection_bound},
        {"required_radius", trace.report.required_radius},
        {"collision_bound", trace.report.collision_bound}}},
  };
  return j.dump(2) + "\n";
}

void write_outputs(const SimTrace& trace, const ScenarioConfig& cfg, const std::string& dir) {
  std::filesystem::path root(dir);
  std::filesystem::create_directories(root);
  std::ostringstream csv;
  write_trace_csv(csv, trace);
  write_file(root / "trace.csv", csv.str());
  write_file(root / "events.json", events_json(trace));
  write_file(root / "summary.json", summary_json(trace, cfg));
}

std::string file_hash(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::uint64_t h = 0xcbf29ce484222325ull;
  char buf[65536];
  while (in.read(buf, sizeof buf) || in.gcount() > 0) {
    for (std::streamsize k = 0; k < in.gcount(); ++k) {
      h ^= static_cast<unsigned char>(buf[k]);
      h *= 0x100000001b3ull;
    }
  }
  char out[17];
  std::snprintf(out, sizeof out, "%016llx", static_cast<unsigned long long>(h));
  return out;
}

}  // namespace pmon
