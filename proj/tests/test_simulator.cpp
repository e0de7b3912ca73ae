#include <catch2/catch_amalgamated.hpp>

#include <random>
#include <sstream>

#include "support.hpp"

using namespace coedge;
using Catch::Approx;

namespace {

Scenario three_device_scenario() {
  Scenario s;
  s.model = testsup::model("fig7", 24, 16, 2,
                           {testsup::conv(3, 2, 4), testsup::conv(3, 4, 4),
                            testsup::fc(4, 6)});
  s.cluster = testsup::uniform_cluster(
      {testsup::device("a", 4e5, 1.5e9, 3, 0.5),
       testsup::device("b", 3e5, 2.0e9, 5, 0.5),
       testsup::device("c", 5e5, 1.0e9, 2, 0.5)},
      1e6);
  s.deadline_s = 5;
  s.elem_bytes = 1;
  s.result_device = 2;
  return s;
}

double eq11_total(const CostBreakdown& cb) {
  double total = 0;
  for (int l = 0; l < cb.layers; ++l) {
    double step = 0;
    for (int i = 0; i < cb.devices; ++i) {
      step = std::max(step, cb.t_c[l][i] + cb.t_x[l][i]);
    }
    total += step;
  }
  return total;
}

double event_energy_sum(const Scenario& s, const Trace& trace) {
  double sum = 0;
  for (const TraceEvent& e : trace.events) {
    const DeviceProfile& dev = s.cluster.devices[e.device];
    const double span = e.end_s - e.start_s;
    sum += (e.kind == EventKind::Compute ? dev.p_c_watts : dev.p_x_watts) * span;
  }
  return sum;
}

}  // namespace

TEST_CASE("local plan trace is distribute, computes, result on one device") {
  Scenario s = three_device_scenario();
  s.result_device = 0;
  PartitionPlan plan = manual_plan({24, 0, 0}, 0, PlannerKind::Local);
  const auto [trace, cb] = simulate(s, plan);
  REQUIRE_FALSE(trace.events.empty());
  CHECK(trace.events.front().kind == EventKind::Distribute);
  CHECK(trace.events.back().kind == EventKind::Result);
  int computes = 0;
  for (const auto& e : trace.events) {
    CHECK(e.device == 0);
    CHECK(e.kind != EventKind::HaloPull);
    CHECK(e.kind != EventKind::Aggregate);
    computes += e.kind == EventKind::Compute;
  }
  CHECK(computes == s.model.layer_count());
}

TEST_CASE("three-device trace follows the superstep structure") {
  Scenario s = three_device_scenario();
  std::vector<int> rows = {10, 8, 6};
  PartitionPlan plan = manual_plan(rows, select_aggregator(s, rows));
  const auto [trace, cb] = simulate(s, plan);

  // Layer changes only at superstep barriers: nothing from layer l+1 may
  // start before every layer-l interval has ended.
  std::vector<double> layer_end(cb.layers, 0.0);
  std::vector<double> layer_start(cb.layers,
                                  std::numeric_limits<double>::infinity());
  for (const auto& e : trace.events) {
    layer_end[e.layer] = std::max(layer_end[e.layer], e.end_s);
    layer_start[e.layer] = std::min(layer_start[e.layer], e.start_s);
  }
  for (int l = 1; l < cb.layers; ++l) {
    CHECK(layer_start[l] >= layer_end[l - 1] - 1e-12);
  }

  // Distribution first, then alternating pulls and computes, then the
  // aggregation stage, mirroring the runtime's job breakdown.
  CHECK(trace.events.front().kind == EventKind::Distribute);
  bool saw_halo = false, saw_aggregate = false;
  for (const auto& e : trace.events) {
    saw_halo = saw_halo || e.kind == EventKind::HaloPull;
    saw_aggregate = saw_aggregate || e.kind == EventKind::Aggregate;
    if (e.kind == EventKind::Compute) {
      // a device's compute never overlaps its own transfer
      for (const auto& other : trace.events) {
        if (&other == &e || other.device != e.device ||
            other.layer != e.layer) {
          continue;
        }
        CHECK((other.end_s <= e.start_s + 1e-12 ||
               other.start_s >= e.end_s - 1e-12));
      }
    }
  }
  CHECK(saw_halo);
  CHECK(saw_aggregate);

  // Busy time equals the per-device sum of event durations.
  std::vector<double> busy(3, 0.0);
  for (const auto& e : trace.events) busy[e.device] += e.end_s - e.start_s;
  for (int i = 0; i < 3; ++i) CHECK(trace.busy_s[i] == Approx(busy[i]));
}

TEST_CASE("finish time equals the deadline equation bit-for-bit") {
  Scenario s = three_device_scenario();
  std::vector<int> rows = {10, 8, 6};
  PartitionPlan plan = manual_plan(rows, select_aggregator(s, rows));
  const auto [trace, cb] = simulate(s, plan);
  CHECK(trace.finish_time == eq11_total(cb));
  CHECK(trace.finish_time == cb.t_total);
}

TEST_CASE("fuzzed scenarios keep the simulator and the formulas identical") {
  std::mt19937_64 rng(61);
  int cases = 0;
  while (cases < 200) {
    Scenario s = testsup::random_scenario(rng, 4);
    std::vector<int> rows;
    try {
      rows = testsup::random_rows(rng, s);
    } catch (const RepairFailed&) {
      continue;
    }
    PartitionPlan plan = manual_plan(rows, select_aggregator(s, rows));
    const auto [trace, cb] = simulate(s, plan);
    REQUIRE(trace.finish_time == eq11_total(cb));
    const double events = event_energy_sum(s, trace);
    const double totals = cb.energy_total();
    REQUIRE(std::abs(events - totals) <= 1e-9 * std::max(1.0, totals));
    ++cases;
  }
}

TEST_CASE("identical runs serialize to identical traces") {
  Scenario s = three_device_scenario();
  std::vector<int> rows = {10, 8, 6};
  PartitionPlan plan = manual_plan(rows, select_aggregator(s, rows));
  std::ostringstream a, b;
  write_trace_csv(a, simulate(s, plan).first);
  write_trace_csv(b, simulate(s, plan).first);
  CHECK(a.str() == b.str());
  CHECK(a.str().rfind("device,layer,kind,start_s,end_s,bytes\n", 0) == 0);
}

TEST_CASE("epoch replay overrides bandwidths and replans") {
  Scenario s = three_device_scenario();
  s.deadline_s = 0.5;
  EpochSchedule schedule;
  schedule.epochs = {{5e5, 1}, {1e6, 2}, {2e6, 1}};
  const auto results = run_epochs(s, schedule, plan_coedge);
  REQUIRE(results.size() == 4);  // repetitions expand
  CHECK(results[1].plan.rows == results[2].plan.rows);
  for (const auto& r : results) CHECK(r.planning_ms >= 0);

  SECTION("constant schedules produce identical epochs") {
    EpochSchedule flat;
    flat.epochs = {{1e6, 1}, {1e6, 1}, {1e6, 1}};
    const auto f = run_epochs(s, flat, plan_coedge);
    REQUIRE(f.size() == 3);
    CHECK(f[0].plan.rows == f[1].plan.rows);
    CHECK(f[0].energy_j == f[2].energy_j);
    CHECK(f[0].latency_s == f[1].latency_s);
  }
  SECTION("schedules must be well formed") {
    EpochSchedule bad;
    CHECK_THROWS_AS(validate_schedule(bad), InvariantViolation);
    bad.epochs = {{-1.0, 1}};
    CHECK_THROWS_AS(validate_schedule(bad), InvariantViolation);
    bad.epochs = {{1e6, 0}};
    CHECK_THROWS_AS(validate_schedule(bad), InvariantViolation);
  }
}

TEST_CASE("offloading sweep endpoints match the degenerate plans") {
  Scenario s = three_device_scenario();
  s.cluster.devices.pop_back();
  s.cluster = testsup::uniform_cluster(s.cluster.devices, 1e6);
  s.result_device = 0;
  const auto table = sweep_offloading_ratio(s, 8);
  REQUIRE(table.size() == 9);
  CHECK(table.front().ratio == 0.0);
  CHECK(table.back().ratio == 1.0);

  const auto local = total_costs(s, manual_plan({24, 0}, 0));
  CHECK(table.front().latency_s == Approx(local.t_total));
  CHECK(table.front().energy_j == Approx(local.energy_total()));

  const auto remote = total_costs(s, manual_plan({0, 24}, 1));
  CHECK(table.back().latency_s == Approx(remote.t_total));

  CHECK_THROWS_AS(sweep_offloading_ratio(three_device_scenario(), 4),
                  InvariantViolation);
}

TEST_CASE("oracle enumerates ordered compositions") {
  Scenario s = three_device_scenario();
  s.model.input_shape = {4, 16, 2};
  s.model.layers = {testsup::conv(1, 2, 2), testsup::fc(2, 4)};
  SECTION("single device has one candidate") {
    Scenario solo = s;
    solo.cluster.devices.resize(1);
    solo.cluster = testsup::uniform_cluster(solo.cluster.devices, 1e6);
    solo.result_device = 0;
    const auto result = ilp_oracle(solo);
    REQUIRE(result.feasible);
    CHECK(result.plan.rows == std::vector<int>{4});
  }
  SECTION("H=4 over two devices evaluates five compositions") {
    Scenario duo = s;
    duo.cluster.devices.resize(2);
    duo.cluster = testsup::uniform_cluster(duo.cluster.devices, 1e6);
    duo.result_device = 0;
    const auto result = ilp_oracle(duo);
    CHECK(result.evaluated == 5);
    REQUIRE(result.feasible);
  }
  SECTION("bounds are enforced") {
    Scenario big = three_device_scenario();
    big.model.input_shape.h = 40;
    CHECK_THROWS_AS(ilp_oracle(big), InstanceTooLarge);
  }
}

TEST_CASE("oracle optimum is no worse than any sampled feasible plan") {
  std::mt19937_64 rng(62);
  int cases = 0;
  while (cases < 10) {
    Scenario s = testsup::random_scenario(rng, 3, 20);
    s.deadline_s = 1;
    const auto oracle = ilp_oracle(s);
    if (!oracle.feasible) continue;
    for (int trial = 0; trial < 20; ++trial) {
      std::vector<int> rows;
      try {
        rows = testsup::random_rows(rng, s);
      } catch (const RepairFailed&) {
        continue;
      }
      PartitionPlan plan = manual_plan(rows, select_aggregator(s, rows));
      if (!plan_violation(s, plan).empty()) continue;
      const auto cb = total_costs(s, plan);
      if (cb.t_total > s.deadline_s) continue;
      REQUIRE(oracle.energy_j <= cb.energy_total() + 1e-12);
    }
    ++cases;
  }
}
