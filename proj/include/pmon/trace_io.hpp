#pragma once

#include "pmon/sim.hpp"

#include <ostream>
#include <string>
#include <vector>

namespace pmon {

/// Bumped whenever trace.csv columns change.
inline constexpr int kTraceSchemaVersion = 1;

/// t; theta_i, x_i, y_i, z_i per robot; d_u_v, cos_u_v, stale_u_v per edge;
/// coverage_pct, detections, min_pair_distance; mode_i per robot.
std::vector<std::string> trace_header(int N, const std::vector<std::array<int, 2>>& edges);

void write_trace_csv(std::ostream& out, const SimTrace& trace);
std::string events_json(const SimTrace& trace);
std::string summary_json(const SimTrace& trace, const ScenarioConfig& cfg);

/// Writes trace.csv, events.json and summary.json into dir (created if needed).
void write_outputs(const SimTrace& trace, const ScenarioConfig& cfg, const std::string& dir);

/// FNV-1a of a file's bytes, hex.
std::string file_hash(const std::string& path);

}  // namespace pmon
