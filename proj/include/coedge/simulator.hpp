#pragma once

#include <algorithm>
#include <chrono>
#include <functional>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "coedge/partitioner.hpp"

namespace coedge {

enum class EventKind { Distribute, Compute, HaloPull, Aggregate, Result };

inline const char* to_string(EventKind k) {
  switch (k) {
    case EventKind::Distribute: return "distribute";
    case EventKind::Compute: return "compute";
    case EventKind::HaloPull: return "halo_pull";
    case EventKind::Aggregate: return "aggregate";
    case EventKind::Result: return "result";
  }
  return "unknown";
}

struct TraceEvent {
  int device = 0;  // 0-based
  int layer = 0;   // 0-based
  EventKind kind = EventKind::Compute;
  double start_s = 0;
  double end_s = 0;
  double bytes = 0;
};

struct Trace {
  std::vector<TraceEvent> events;
  double finish_time = 0;
  std::vector<double> busy_s;  // per-device
};

// Logical-time replay of the BSP timeline: per layer, every device runs its
// incoming transfer then its compute slice, and a barrier closes the
// superstep.  Times come straight from the cost breakdown, so the finish
// time equals the deadline equation's total bit-for-bit.
inline std::pair<Trace, CostBreakdown> simulate(const Scenario& scenario,
                                                const PartitionPlan& plan) {
  validate_scenario(scenario);
  if (const std::string why = plan_violation(scenario, plan); !why.empty()) {
    throw BadPartition("plan invalid: " + why);
  }
  const CostBreakdown cb = total_costs(scenario, plan);
  Trace trace;
  trace.busy_s.assign(cb.devices, 0.0);

  double clock = 0;
  for (int l = 0; l < cb.layers; ++l) {
    for (int i = 0; i < cb.devices; ++i) {
      double at = clock;
      const bool has_result =
          l == cb.layers - 1 && i == plan.aggregator && cb.result_t > 0;
      const double xfer_in = has_result ? cb.t_x[l][i] - cb.result_t
                                        : cb.t_x[l][i];
      if (cb.xfer_kind[l][i] != TransferKind::None) {
        EventKind kind = EventKind::Distribute;
        if (cb.xfer_kind[l][i] == TransferKind::HaloPull) {
          kind = EventKind::HaloPull;
        } else if (cb.xfer_kind[l][i] == TransferKind::Aggregate) {
          kind = EventKind::Aggregate;
        }
        trace.events.push_back(
            {i, l, kind, at, at + xfer_in, cb.xfer_bytes[l][i]});
        at += xfer_in;
      }
      if (cb.t_c[l][i] > 0) {
        trace.events.push_back(
            {i, l, EventKind::Compute, at, at + cb.t_c[l][i], 0});
        at += cb.t_c[l][i];
      }
      if (has_result) {
        trace.events.push_back({i, l, EventKind::Result, at,
                                at + cb.result_t, cb.result_bytes});
        at += cb.result_t;
      }
      trace.busy_s[i] += at - clock;
    }
    clock += cb.superstep[l];
  }
  trace.finish_time = cb.t_total;
  return {std::move(trace), cb};
}

// Bandwidth settings for one period of the replay: a scalar overrides every
// off-diagonal pair, a matrix replaces the whole thing.
struct Epoch {
  std::variant<double, BandwidthMatrix> bandwidth;
  int repetitions = 1;
};

struct EpochSchedule {
  std::vector<Epoch> epochs;
};

inline void validate_schedule(const EpochSchedule& schedule) {
  if (schedule.epochs.empty()) {
    throw InvariantViolation("schedule: needs at least one epoch");
  }
  for (size_t e = 0; e < schedule.epochs.size(); ++e) {
    const Epoch& epoch = schedule.epochs[e];
    if (epoch.repetitions < 1) {
      throw InvariantViolation("schedule: repetitions must be >= 1");
    }
    if (const double* scalar = std::get_if<double>(&epoch.bandwidth)) {
      if (*scalar <= 0) {
        throw InvariantViolation("schedule: epoch bandwidth must be > 0");
      }
    }
  }
}

struct EpochResult {
  int epoch = 0;
  double bytes_per_s = 0;  // 0 when the epoch carries a full matrix
  PartitionPlan plan;
  double latency_s = 0;
  double energy_j = 0;
  bool deadline_met = false;
  double planning_ms = 0;
};

// Replays the schedule: each epoch overrides the bandwidths, re-runs the
// planner, and simulates once.  Planning wall-clock is measured and reported
// but never added to the simulated latency.
inline std::vector<EpochResult> run_epochs(
    const Scenario& scenario, const EpochSchedule& schedule,
    const std::function<PartitionPlan(const Scenario&)>& planner) {
  validate_schedule(schedule);
  std::vector<EpochResult> results;
  int index = 0;
  for (const Epoch& epoch : schedule.epochs) {
    Scenario current = scenario;
    double scalar_bw = 0;
    if (const double* scalar = std::get_if<double>(&epoch.bandwidth)) {
      scalar_bw = *scalar;
      const int n = current.cluster.size();
      for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
          if (i != j) current.cluster.bandwidth.set(i, j, *scalar);
        }
      }
    } else {
      current.cluster.bandwidth = std::get<BandwidthMatrix>(epoch.bandwidth);
    }
    const auto t0 = std::chrono::steady_clock::now();
    PartitionPlan plan = planner(current);
    const auto t1 = std::chrono::steady_clock::now();
    const double planning_ms =
        std::chrono::duration<double, std::milli>(t1 - t0).count();
    const auto [trace, cb] = simulate(current, plan);
    for (int rep = 0; rep < epoch.repetitions; ++rep) {
      EpochResult r;
      r.epoch = index++;
      r.bytes_per_s = scalar_bw;
      r.plan = plan;
      r.latency_s = trace.finish_time;
      r.energy_j = cb.energy_total();
      r.deadline_met = trace.finish_time <= current.deadline_s;
      r.planning_ms = planning_ms;
      results.push_back(std::move(r));
    }
  }
  return results;
}

struct RatioPoint {
  double ratio = 0;
  double latency_s = 0;
  double energy_j = 0;
};

// Two-device offloading sweep: ratio r fixes the split [(1-r)H, rH].
inline std::vector<RatioPoint> sweep_offloading_ratio(const Scenario& scenario,
                                                      int steps) {
  if (scenario.cluster.size() != 2) {
    throw InvariantViolation("ratio sweep requires exactly 2 devices");
  }
  if (steps < 1) throw InvariantViolation("ratio sweep needs steps >= 1");
  const int h = scenario.model.input_shape.h;
  std::vector<RatioPoint> table;
  for (int k = 0; k <= steps; ++k) {
    const double ratio = static_cast<double>(k) / steps;
    const int offloaded = static_cast<int>(std::llround(ratio * h));
    std::vector<int> rows = {h - offloaded, offloaded};
    PartitionPlan plan =
        manual_plan(rows, select_aggregator(scenario, rows));
    const auto [trace, cb] = simulate(scenario, plan);
    table.push_back({ratio, trace.finish_time, cb.energy_total()});
  }
  return table;
}

struct OracleResult {
  bool feasible = false;
  PartitionPlan plan;
  double energy_j = 0;
  long long evaluated = 0;  // compositions passing the shape constraints
};

namespace detail {

template <typename Fn>
void for_each_composition(int total, int slots, std::vector<int>& current,
                          int index, Fn&& fn) {
  if (index == slots - 1) {
    current[index] = total;
    fn(current);
    return;
  }
  for (int take = 0; take <= total; ++take) {
    current[index] = take;
    for_each_composition(total - take, slots, current, index + 1, fn);
  }
}

}  // namespace detail

// Brute-force P1: enumerate every ordered integer composition of H over the
// devices, keep those passing the partition constraints and the deadline,
// return the minimum-energy survivor.  Bounded to tiny instances.
inline OracleResult ilp_oracle(const Scenario& scenario) {
  validate_scenario(scenario);
  const int n = scenario.cluster.size();
  const int h = scenario.model.input_shape.h;
  if (n > 4 || h > 32) {
    throw InstanceTooLarge("oracle bound is N <= 4 and H <= 32");
  }
  OracleResult best;
  std::vector<int> current(n, 0);
  detail::for_each_composition(h, n, current, 0, [&](const std::vector<int>& rows) {
    ++best.evaluated;
    bool any = false;
    for (int r : rows) any = any || r > 0;
    if (!any) return;
    PartitionPlan trial;
    try {
      trial = manual_plan(rows, select_aggregator(scenario, rows));
      if (!plan_violation(scenario, trial).empty()) return;
      const CostBreakdown cb = total_costs(scenario, trial);
      if (cb.t_total > scenario.deadline_s) return;
      const double energy = cb.energy_total();
      if (!best.feasible || energy < best.energy_j - 1e-15) {
        best.feasible = true;
        best.plan = std::move(trial);
        best.plan.objective_energy_j = energy;
        best.plan.predicted_latency_s = cb.t_total;
        best.energy_j = energy;
      }
    } catch (const Error&) {
      return;  // malformed candidate (halo span, missing bandwidth, ...)
    }
  });
  return best;
}

}  // namespace coedge
