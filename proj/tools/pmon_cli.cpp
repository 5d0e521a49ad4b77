#include "pmon/planning.hpp"
#include "pmon/scenario.hpp"
#include "pmon/sim.hpp"
#include "pmon/trace_io.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <optional>
#include <sstream>
#include <thread>

namespace {

constexpr int kOk = 0;
constexpr int kInvalid = 1;
constexpr int kRefused = 2;

void print_errors(const pmon::ConfigError& e) {
  std::cerr << "config invalid:\n";
  for (const auto& s : e.errors()) std::cerr << "  " << s << '\n';
}

void print_report(const pmon::ScenarioConfig& cfg, const pmon::GuaranteeReport& r) {
  std::printf("scenario        %s\n", cfg.name.c_str());
  std::printf("curve           A=%g B=%g C=%g a=%d b=%d c=%d phi=%g\n", cfg.curve.A, cfg.curve.B,
              cfg.curve.C, cfg.curve.a, cfg.curve.b, cfg.curve.c, cfg.curve.phi);
  std::printf("swarm           N=%d p=%d omega=%g K=%g\n", cfg.swarm.N, cfg.swarm.p,
              cfg.swarm.omega, cfg.swarm.K);
  std::printf("r_s             %.6g\n", cfg.sensing_radius());
  std::printf("coverage bound  %.6g  [%s]\n", r.coverage_bound, r.coverage_ok ? "ok" : "FAIL");
  std::printf("detection bound %.6g (eta: %.6g)  [%s]\n", r.detection_bound, r.required_radius,
              r.detection_ok ? "ok" : "FAIL");
  std::printf("curve           [%s]\n", r.curve_ok ? "ok" : "FAIL");
  std::printf("spacing a+b=N/k [%s]\n", r.spacing_ok ? "ok" : "FAIL");
  std::printf("omega           [%s]\n", r.omega_ok ? "ok" : "FAIL");
  std::printf("collision 2D    %.6g\n", r.collision_bound);
  if (r.collision_bound_3d > 0.0) std::printf("collision 3D    %.6g\n", r.collision_bound_3d);
  std::printf("T_max           %.6g s\n", r.T_max);
  if (r.min_robots > 0) std::printf("min robots      %d\n", r.min_robots);
  std::printf("stable p        ");
  for (int p : r.stable_p) std::printf("%d ", p);
  std::printf("\n");
  for (const auto& v : r.violated) std::printf("violated: %s\n", v.c_str());
}

nlohmann::ordered_json report_json(const pmon::ScenarioConfig& cfg, const pmon::GuaranteeReport& r) {
  nlohmann::ordered_json j;
  j["scenario"] = cfg.name;
  j["r_s"] = cfg.sensing_radius();
  j["coverage_bound"] = r.coverage_bound;
  j["coverage_ok"] = r.coverage_ok;
  j["detection_bound"] = r.detection_bound;
  j["required_radius"] = r.required_radius;
  j["detection_ok"] = r.detection_ok;
  j["curve_ok"] = r.curve_ok;
  j["spacing_ok"] = r.spacing_ok;
  j["omega_ok"] = r.omega_ok;
  j["collision_bound"] = r.collision_bound;
  j["collision_bound_3d"] = r.collision_bound_3d;
  j["T_max"] = r.T_max;
  j["min_robots"] = r.min_robots;
  j["stable_p"] = r.stable_p;
  j["violated"] = r.violated;
  j["ok"] = r.ok();
  return j;
}

// Output directory must be writable before any simulation time is spent.
bool writable_dir(const std::string& dir, std::string& why) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) {
    why = ec.message();
    return false;
  }
  const auto probe = std::filesystem::path(dir) / ".pmon_write_probe";
  {
    std::ofstream f(probe);
    if (!f) {
      why = "cannot create files";
      return false;
    }
  }
  std::filesystem::remove(probe, ec);
  return true;
}

struct SweepRow {
  double value = 0.0;
  std::uint64_t seed = 0;
  bool ok = false;
  std::string error;
  pmon::SimSummary s;
};

const char* kSweepMetrics[] = {"mean_detection_time", "max_detection_time", "detected",
                               "min_pair_distance",   "min_adjacent_xy",    "max_adjacent_xy",
                               "final_coverage_pct",  "max_lateral_error",  "failures",
                               "rejoins"};

std::vector<double> metrics_of(const pmon::SimSummary& s) {
  return {s.mean_detection_time, s.max_detection_time, double(s.detected),
          s.min_pair_distance,   s.min_adjacent_xy,    s.max_adjacent_xy,
          s.final_coverage_pct,  s.max_lateral_error,  double(s.failures),
          double(s.rejoins)};
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Lissajous swarm monitoring planner and simulator"};
  app.require_subcommand(1);

  std::string config;
  bool plan_json = false, plan_search = false;
  std::vector<int> c_candidates{1, 5, 7, 11, 13};
  auto* plan = app.add_subcommand("plan", "Print planning bounds and guarantee checks");
  plan->add_option("config", config, "Scenario YAML")->required();
  plan->add_flag("--json", plan_json, "Print the report as JSON");
  plan->add_flag("--search", plan_search, "Grid-search (C, c, phi) for the widest 3D separation");
  plan->add_option("--c-candidates", c_candidates, "z frequencies tried by --search");

  auto* validate = app.add_subcommand("validate", "Schema-check a scenario");
  validate->add_option("config", config, "Scenario YAML")->required();

  std::string out_dir;
  std::uint64_t seed = 0;
  auto* run = app.add_subcommand("run", "Simulate a scenario and write trace files");
  run->add_option("config", config, "Scenario YAML")->required();
  run->add_option("--out", out_dir, "Output directory")->required();
  auto* seed_opt = run->add_option("--seed", seed, "Override the scenario seed");

  std::string axis, sweep_out;
  std::vector<double> values;
  std::vector<std::uint64_t> seeds;
  unsigned jobs = std::max(1u, std::thread::hardware_concurrency());
  auto* sweep = app.add_subcommand("sweep", "Run a parameter sweep and write an aggregate CSV");
  sweep->add_option("config", config, "Scenario YAML")->required();
  sweep->add_option("--axis", axis, "Dotted field to sweep")->required();
  sweep->add_option("--values", values, "Values for the axis")->required();
  sweep->add_option("--seeds", seeds, "Seeds per value")->required();
  sweep->add_option("--out", sweep_out, "CSV path (default stdout)");
  sweep->add_option("--jobs", jobs, "Worker threads");

  CLI11_PARSE(app, argc, argv);

  pmon::ScenarioConfig cfg;
  try {
    cfg = pmon::parse_config(config);
  } catch (const pmon::ConfigError& e) {
    print_errors(e);
    return kInvalid;
  }

  if (*validate) {
    std::cout << "ok\n";
    return kOk;
  }

  if (*plan) {
    const auto report = pmon::check_guarantees(cfg.mission_spec(), cfg.curve, cfg.swarm.omega);
    std::optional<pmon::SearchResult> found;
    std::string search_error;
    if (plan_search) {
      pmon::SearchSpace space;
      space.c_candidates = c_candidates;
      try {
        found = pmon::search_3d_params(cfg.curve.A, cfg.curve.B, cfg.curve.a, cfg.curve.b,
                                       cfg.swarm.N, space);
      } catch (const pmon::SearchFailure& e) {
        search_error = e.what();
      }
    }
    if (plan_json) {
      auto j = report_json(cfg, report);
      if (found)
        j["search"] = {{"C", found->C}, {"c", found->c}, {"phi", found->phi},
                       {"encumbrance", found->encumbrance}, {"evaluated", found->evaluated}};
      else if (plan_search)
        j["search"] = {{"error", search_error}};
      std::cout << j.dump(2) << '\n';
    } else {
      print_report(cfg, report);
      if (found)
        std::printf("3D search       C=%g c=%d phi=%g encumbrance %.6g (%d evaluated)\n", found->C,
                    found->c, found->phi, found->encumbrance, found->evaluated);
      else if (plan_search)
        std::printf("3D search       %s\n", search_error.c_str());
    }
    return report.ok() ? kOk : kRefused;
  }

  if (*run) {
    if (*seed_opt) cfg.seed = seed;
    if (std::string why; !writable_dir(out_dir, why)) {
      std::cerr << "output directory " << out_dir << " is not writable: " << why << '\n';
      return kInvalid;
    }
    try {
      const auto trace = pmon::run(cfg);
      pmon::write_outputs(trace, cfg, out_dir);
      const auto& s = trace.summary;
      std::printf("ticks %ld  min_pair %.4g  detected %d/%d  coverage %.2f%%  failures %d  rejoins %d\n",
                  s.ticks, s.min_pair_distance, s.detected, s.targets, s.final_coverage_pct,
                  s.failures, s.rejoins);
      return kOk;
    } catch (const pmon::GuaranteeRefused& e) {
      std::cerr << e.what() << '\n';
      for (const auto& v : e.report().violated) std::cerr << "  " << v << '\n';
      return kRefused;
    } catch (const pmon::ConfigError& e) {
      print_errors(e);
      return kInvalid;
    }
  }

  // sweep
  {
    pmon::ScenarioConfig probe = cfg;
    try {
      pmon::set_field(probe, axis, values.front());
    } catch (const std::invalid_argument& e) {
      std::cerr << e.what() << '\n';
      return kInvalid;
    }
  }
  std::vector<SweepRow> rows;
  for (double v : values)
    for (auto s : seeds) rows.push_back({v, s, false, {}, {}});
  std::atomic<size_t> next{0};
  std::atomic<bool> refused{false};
  auto worker = [&] {
    for (size_t k = next++; k < rows.size(); k = next++) {
      auto c = cfg;
      pmon::set_field(c, axis, rows[k].value);
      c.seed = rows[k].seed;
      try {
        rows[k].s = pmon::run(c).summary;
        rows[k].ok = true;
      } catch (const pmon::GuaranteeRefused& e) {
        rows[k].error = e.what();
        refused = true;
      } catch (const std::exception& e) {
        rows[k].error = e.what();
      }
    }
  };
  std::vector<std::thread> pool;
  for (unsigned j = 0; j < std::max(1u, jobs); ++j) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  std::sort(rows.begin(), rows.end(), [](const SweepRow& a, const SweepRow& b) {
    return a.value != b.value ? a.value < b.value : a.seed < b.seed;
  });

  std::ostringstream csv;
  csv << "kind," << axis << ",seed";
  for (const char* m : kSweepMetrics) csv << ',' << m;
  csv << '\n';
  for (const auto& r : rows) {
    csv << "run," << fmt(r.value) << ',' << r.seed;
    if (r.ok) {
      for (double m : metrics_of(r.s)) csv << ',' << fmt(m);
    } else {
      for (size_t k = 0; k < std::size(kSweepMetrics); ++k) csv << ",nan";
      std::cerr << "value " << r.value << " seed " << r.seed << ": " << r.error << '\n';
    }
    csv << '\n';
  }
  for (double v : values) {
    std::vector<std::vector<double>> ms;
    for (const auto& r : rows)
      if (r.value == v && r.ok) ms.push_back(metrics_of(r.s));
    for (const char* kind : {"mean", "std"}) {
      csv << kind << ',' << fmt(v) << ',' << ms.size();
      for (size_t k = 0; k < std::size(kSweepMetrics); ++k) {
        double mean = 0.0, var = 0.0;
        for (const auto& m : ms) mean += m[k];
        mean = ms.empty() ? NAN : mean / ms.size();
        for (const auto& m : ms) var += (m[k] - mean) * (m[k] - mean);
        const double sd = ms.size() > 1 ? std::sqrt(var / (ms.size() - 1)) : 0.0;
        csv << ',' << fmt(std::string(kind) == "mean" ? mean : sd);
      }
      csv << '\n';
    }
  }
  if (sweep_out.empty()) {
    std::cout << csv.str();
  } else {
    std::ofstream f(sweep_out);
    f << csv.str();
  }
  return refused ? kRefused : kOk;
}
