#pragma once

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <random>
#include <string>
#include <vector>

#include "coedge/coedge.hpp"

namespace coedge::cli {

enum class LogLevel { Error = 0, Warn = 1, Info = 2, Debug = 3 };

inline LogLevel log_level() {
  static const LogLevel level = [] {
    const char* env = std::getenv("COEDGE_LOG");
    if (!env) return LogLevel::Warn;
    const std::string v(env);
    if (v == "error") return LogLevel::Error;
    if (v == "warn") return LogLevel::Warn;
    if (v == "info") return LogLevel::Info;
    if (v == "debug") return LogLevel::Debug;
    return LogLevel::Warn;
  }();
  return level;
}

inline void log(LogLevel level, const std::string& msg) {
  static const char* names[] = {"error", "warn", "info", "debug"};
  if (level <= log_level()) {
    std::cerr << "[" << names[static_cast<int>(level)] << "] " << msg << "\n";
  }
}

struct RunConfig {
  std::string model_path;
  std::string cluster_path;
  std::string scenario_path;
  std::string out_path;
  std::string planner = "coedge";
  double deadline_ms = 0;  // overrides the scenario file when set
  int steps = 11;          // sample points for sweep-ratio
  unsigned long seed = 1;
  int prefix = 0;          // use only the first k devices when > 0
  std::vector<double> deadlines_ms;  // sweep-deadline grid
};

inline PlannerKind parse_planner(const std::string& name) {
  if (name == "coedge") return PlannerKind::Coedge;
  if (name == "modnn") return PlannerKind::Modnn;
  if (name == "musical_chair") return PlannerKind::MusicalChair;
  if (name == "local") return PlannerKind::Local;
  throw InvariantViolation("unknown planner '" + name + "'");
}

// Slices a cluster down to its first k devices (scalability runs).
inline Cluster cluster_prefix(const Cluster& full, int k) {
  if (k < 1 || k > full.size()) {
    throw InvariantViolation("--prefix must be between 1 and the device count");
  }
  Cluster out;
  out.devices.assign(full.devices.begin(), full.devices.begin() + k);
  out.bandwidth = BandwidthMatrix(k, full.bandwidth.at(0, 0));
  for (int i = 0; i < k; ++i) {
    for (int j = 0; j < k; ++j) {
      out.bandwidth.set(i, j, full.bandwidth.at(i, j));
    }
  }
  if (full.master >= k) {
    throw InvariantViolation("--prefix drops the master device");
  }
  out.master = full.master;
  return out;
}

struct LoadedRun {
  Scenario scenario;
  std::optional<EpochSchedule> schedule;
};

inline LoadedRun build_scenario(const RunConfig& config) {
  LoadedRun run;
  run.scenario.model = load_model(config.model_path);
  run.scenario.cluster = load_cluster(config.cluster_path);
  ScenarioConfig sc;
  if (!config.scenario_path.empty()) {
    sc = load_scenario_config(config.scenario_path);
  }
  if (sc.master) run.scenario.cluster.master = *sc.master;
  if (config.prefix > 0) {
    run.scenario.cluster = cluster_prefix(run.scenario.cluster, config.prefix);
  }
  run.scenario.elem_bytes = sc.elem_bytes;
  run.scenario.result_device = sc.result_device;
  run.scenario.result_bytes = sc.result_bytes;
  run.scenario.deadline_s = sc.deadline_s.value_or(0.1);
  if (config.deadline_ms > 0) {
    run.scenario.deadline_s = config.deadline_ms / 1000.0;
  }
  if (run.scenario.result_device >= run.scenario.cluster.size()) {
    throw InvariantViolation("result_device outside the (possibly prefixed) cluster");
  }
  run.schedule = sc.schedule;
  validate_scenario(run.scenario);
  log(LogLevel::Info,
      "scenario: model " + run.scenario.model.name + ", " +
          std::to_string(run.scenario.cluster.size()) + " devices, deadline " +
          detail::fmt(run.scenario.deadline_s * 1000) + " ms");
  return run;
}

inline void write_output(const RunConfig& config, const std::string& body) {
  if (config.out_path.empty()) {
    std::cout << body;
    return;
  }
  std::ofstream out(config.out_path);
  if (!out) throw ParseError("cannot write file: " + config.out_path);
  out << body;
}

inline int cmd_plan(const RunConfig& config) {
  const LoadedRun run = build_scenario(config);
  PartitionPlan plan;
  bool fallback = false;
  if (config.planner == "coedge") {
    PlanOutcome outcome = plan_coedge_detailed(run.scenario);
    plan = std::move(outcome.plan);
    fallback = outcome.fallback;
    log(LogLevel::Debug,
        "coedge recursions: " + std::to_string(outcome.recursions));
  } else {
    plan = run_planner(parse_planner(config.planner), run.scenario);
  }
  write_output(config, plan_to_json(plan).dump(2) + "\n");
  const bool met = plan.predicted_latency_s <= run.scenario.deadline_s;
  std::cerr << "planner: " << to_string(plan.planner) << "\n"
            << "predicted latency: " << detail::fmt(plan.predicted_latency_s * 1000)
            << " ms\n"
            << "predicted energy: " << detail::fmt(plan.objective_energy_j)
            << " J\n"
            << "deadline met: " << (met ? "yes" : "no") << "\n";
  if (fallback) {
    std::cerr << "no feasible partition satisfies the deadline; "
              << "fell back to full offload\n";
    return 2;
  }
  return 0;
}

inline int cmd_simulate(const RunConfig& config) {
  const LoadedRun run = build_scenario(config);
  const PartitionPlan plan =
      run_planner(parse_planner(config.planner), run.scenario);
  const auto [trace, cb] = simulate(run.scenario, plan);
  std::ostringstream csv;
  write_trace_csv(csv, trace);
  write_output(config, csv.str());
  std::cerr << "latency: " << detail::fmt(trace.finish_time * 1000) << " ms\n"
            << "energy: " << detail::fmt(cb.energy_total()) << " J\n"
            << "deadline met: "
            << (trace.finish_time <= run.scenario.deadline_s ? "yes" : "no")
            << "\n";
  return 0;
}

inline int cmd_sweep_ratio(const RunConfig& config) {
  const LoadedRun run = build_scenario(config);
  if (config.steps < 2) {
    throw InvariantViolation("--steps must be at least 2 sample points");
  }
  const auto table = sweep_offloading_ratio(run.scenario, config.steps - 1);
  std::ostringstream csv;
  write_ratio_csv(csv, table);
  write_output(config, csv.str());
  return 0;
}

inline int cmd_sweep_deadline(const RunConfig& config) {
  const LoadedRun run = build_scenario(config);
  std::vector<double> deadlines = config.deadlines_ms;
  if (deadlines.empty()) deadlines = {50, 75, 100, 150, 200, 300, 500};
  std::vector<PlannerKind> planners;
  if (config.planner == "all") {
    planners = {PlannerKind::Local, PlannerKind::Modnn,
                PlannerKind::MusicalChair, PlannerKind::Coedge};
  } else {
    planners = {parse_planner(config.planner)};
  }
  std::vector<DeadlineRow> rows;
  for (double d : deadlines) {
    Scenario scenario = run.scenario;
    scenario.deadline_s = d / 1000.0;
    for (PlannerKind kind : planners) {
      const PartitionPlan plan = run_planner(kind, scenario);
      DeadlineRow row;
      row.deadline_ms = d;
      row.planner = kind;
      row.latency_s = plan.predicted_latency_s;
      row.energy_j = plan.objective_energy_j;
      row.deadline_met = plan.predicted_latency_s <= scenario.deadline_s;
      rows.push_back(row);
    }
  }
  std::ostringstream csv;
  write_deadline_csv(csv, rows);
  write_output(config, csv.str());
  return 0;
}

inline int cmd_epochs(const RunConfig& config) {
  const LoadedRun run = build_scenario(config);
  if (!run.schedule) {
    throw InvariantViolation("epochs command needs a scenario file with an "
                             "'epochs' schedule");
  }
  const PlannerKind kind = parse_planner(config.planner);
  const auto results =
      run_epochs(run.scenario, *run.schedule,
                 [kind](const Scenario& s) { return run_planner(kind, s); });
  std::ostringstream csv;
  write_epochs_csv(csv, results);
  write_output(config, csv.str());
  return 0;
}

// Randomized simulator-vs-formula self-check, driven by --seed.
inline int cmd_fuzz(const RunConfig& config, int cases = 200) {
  std::mt19937_64 rng(config.seed);
  auto uniform = [&](double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
  };
  auto pick = [&](int lo, int hi) {
    return std::uniform_int_distribution<int>(lo, hi)(rng);
  };
  int failures = 0;
  for (int t = 0; t < cases; ++t) {
    Scenario scenario;
    const int n = pick(1, 4);
    const int h = pick(8, 32);
    scenario.model.name = "fuzz";
    scenario.model.input_shape = {h, pick(4, 16), pick(1, 3)};
    int channels = scenario.model.input_shape.c;
    const int conv_layers = pick(1, 4);
    for (int l = 0; l < conv_layers; ++l) {
      LayerConfig layer;
      layer.kind = LayerKind::Conv;
      layer.k = 1 + 2 * pick(0, 2);
      layer.p = layer.k / 2;
      layer.s = 1;
      layer.c_in = channels;
      channels = pick(1, 6);
      layer.c_out = channels;
      scenario.model.layers.push_back(layer);
    }
    if (pick(0, 1) == 1) {
      LayerConfig fc;
      fc.kind = LayerKind::FullyConnected;
      fc.c_in = channels;
      fc.c_out = pick(2, 10);
      scenario.model.layers.push_back(fc);
    }
    scenario.cluster.bandwidth = BandwidthMatrix(n);
    for (int i = 0; i < n; ++i) {
      DeviceProfile d;
      d.id = i;
      d.name = "dev" + std::to_string(i + 1);
      d.rho = uniform(1e5, 1e6);
      d.f_hz = uniform(5e8, 4e9);
      d.m_kb = 1e7;
      d.p_c_watts = uniform(1, 20);
      d.p_x_watts = uniform(0.1, 3);
      scenario.cluster.devices.push_back(std::move(d));
      for (int j = 0; j < n; ++j) {
        if (i != j) scenario.cluster.bandwidth.set(i, j, uniform(1e5, 1e7));
      }
    }
    scenario.cluster.master = pick(0, n - 1);
    scenario.result_device = pick(0, n - 1);
    scenario.deadline_s = 10;
    scenario.elem_bytes = pick(1, 4);

    // Random partition respecting the padding threshold.
    const int threshold = halo_threshold_rows(scenario.model);
    std::vector<double> weights(n);
    for (double& w : weights) w = uniform(0.05, 1);
    const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
    for (double& w : weights) w /= total;
    std::vector<int> rows;
    try {
      rows = round_plan(weights, h, std::vector<int>(n, threshold));
    } catch (const RepairFailed&) {
      continue;
    }
    PartitionPlan plan = manual_plan(rows, select_aggregator(scenario, rows));
    const auto [trace, cb] = simulate(scenario, plan);

    double eq11 = 0;
    for (int l = 0; l < cb.layers; ++l) {
      double step = 0;
      for (int i = 0; i < cb.devices; ++i) {
        step = std::max(step, cb.t_c[l][i] + cb.t_x[l][i]);
      }
      eq11 += step;
    }
    double event_energy = 0;
    for (const TraceEvent& e : trace.events) {
      const DeviceProfile& dev = scenario.cluster.devices[e.device];
      const double span = e.end_s - e.start_s;
      event_energy += (e.kind == EventKind::Compute ? dev.p_c_watts
                                                    : dev.p_x_watts) *
                      span;
    }
    const double total_energy = cb.energy_total();
    if (trace.finish_time != eq11 ||
        std::abs(event_energy - total_energy) >
            1e-9 * std::max(1.0, total_energy)) {
      ++failures;
      log(LogLevel::Error, "fuzz case " + std::to_string(t) + " diverged");
    }
  }
  std::cout << "fuzz: " << (cases - failures) << "/" << cases << " ok\n";
  return failures == 0 ? 0 : 1;
}

}  // namespace coedge::cli
