#include <catch2/catch_amalgamated.hpp>

#include <numeric>
#include <random>

#include "coedge/cli.hpp"
#include "support.hpp"

using namespace coedge;
using Catch::Approx;

namespace {

Scenario pi_jetson_scenario(double deadline_s) {
  Scenario s;
  s.model = testsup::model(
      "case_study", 64, 64, 3,
      {testsup::conv(3, 3, 16), testsup::conv(3, 16, 16),
       testsup::conv(3, 16, 16), testsup::fc(16, 10)});
  s.cluster = testsup::uniform_cluster(
      {testsup::device("pi", 615e3, 1.2e9, 3, 2.0),
       testsup::device("jetson", 301e3, 2.0e9, 9.5, 2.0)},
      1e6);
  s.deadline_s = deadline_s;
  s.elem_bytes = 1;
  s.result_device = 0;
  return s;
}

}  // namespace

TEST_CASE("build_p2 emits the documented constraint counts") {
  Scenario s = pi_jetson_scenario(0.5);
  std::vector<int> candidates = {0, 1};
  const auto build = build_p2(s, candidates, 0);
  const int k = 2, layers = s.model.layer_count();
  CHECK(build.problem.n == k + layers);
  // epigraph + memory + deadline + sign rows
  CHECK(static_cast<int>(build.problem.a_ub.size()) ==
        k * layers + k * layers + 1 + k);
  CHECK(build.problem.a_eq.size() == 1);
}

TEST_CASE("degenerate single-device relaxation forces lambda to one") {
  Scenario s = pi_jetson_scenario(10.0);
  s.cluster.devices.pop_back();
  s.cluster.bandwidth = BandwidthMatrix(1);
  const auto build = build_p2(s, {0}, 0);
  const auto sol = lp::solve(build.problem);
  REQUIRE(sol.status == lp::Status::Optimal);
  CHECK(sol.x[0] == Approx(1.0));
}

TEST_CASE("a tighter deadline pushes share toward the fast device") {
  Scenario loose = pi_jetson_scenario(1.0);
  Scenario tight = pi_jetson_scenario(0.055);
  const auto jetson_share = [](const Scenario& s) {
    const auto plan = plan_coedge(s);
    REQUIRE(plan.planner == PlannerKind::Coedge);
    return static_cast<double>(plan.rows[1]) / s.model.input_shape.h;
  };
  CHECK(jetson_share(tight) > jetson_share(loose) + 0.05);
}

TEST_CASE("round_plan apportions by largest remainder") {
  CHECK(round_plan({0.5, 0.5}, 10, {0, 0}) == std::vector<int>{5, 5});
  CHECK(round_plan({1.0 / 3, 2.0 / 3}, 10, {0, 0}) == std::vector<int>{3, 7});
  CHECK(round_plan({0.04, 0.96}, 100, {5, 5}) == std::vector<int>{5, 95});
}

TEST_CASE("round_plan preserves the row total") {
  std::mt19937_64 rng(51);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 1000; ++trial) {
    const int n = std::uniform_int_distribution<int>(1, 6)(rng);
    const int h = std::uniform_int_distribution<int>(1, 400)(rng);
    std::vector<double> lambda(n);
    double total = 0;
    for (double& v : lambda) total += (v = u(rng) + 1e-6);
    for (double& v : lambda) v /= total;
    const auto rows = round_plan(lambda, h, std::vector<int>(n, 0));
    CHECK(std::accumulate(rows.begin(), rows.end(), 0) == h);
  }
}

TEST_CASE("round_plan raises RepairFailed when no donor can help") {
  CHECK_THROWS_AS(round_plan({0.5, 0.5}, 3, {3, 3}), RepairFailed);
}

TEST_CASE("local planner keeps everything on the master") {
  Scenario s = pi_jetson_scenario(1.0);
  const auto plan = plan_local(s);
  CHECK(plan.rows == std::vector<int>{64, 0});
  CHECK(plan.planner == PlannerKind::Local);
  CHECK(plan.aggregator == 0);
}

TEST_CASE("MoDNN shares follow computing capability") {
  Scenario s = pi_jetson_scenario(1.0);
  s.cluster.devices[1] = testsup::device("pc", 282e3, 3.6e9, 100, 0.5);
  // f/rho: 1951.2 vs 12766: the PC side gets about 86.7% of the rows.
  s.model.input_shape.h = 1000;
  s.model.input_shape.w = 16;
  const auto plan = plan_modnn(s);
  CHECK(plan.rows[1] == Approx(867).margin(1.0));
  CHECK(plan.rows[0] + plan.rows[1] == 1000);
}

TEST_CASE("equal devices make MoDNN and Musical Chair agree") {
  Scenario s = pi_jetson_scenario(1.0);
  s.cluster.devices[1] = s.cluster.devices[0];
  s.cluster.devices[1].name = "pi2";
  const auto a = plan_modnn(s);
  const auto b = plan_musical_chair(s);
  CHECK(a.rows == std::vector<int>{32, 32});
  CHECK(a.rows == b.rows);
}

TEST_CASE("aggregator selection minimizes latency, ties to the lowest index") {
  Scenario s = pi_jetson_scenario(1.0);
  SECTION("single active device hosts the stage itself") {
    CHECK(select_aggregator(s, {64, 0}) == 0);
    CHECK(select_aggregator(s, {0, 64}) == 1);
  }
  SECTION("equal devices and fragments tie to device 1") {
    Scenario eq = s;
    eq.cluster.devices[1] = eq.cluster.devices[0];
    CHECK(select_aggregator(eq, {32, 32}) == 0);
  }
  SECTION("matches a brute-force argmin over candidates") {
    std::mt19937_64 rng(52);
    for (int trial = 0; trial < 25; ++trial) {
      Scenario r = testsup::random_scenario(rng, 3);
      const auto rows = testsup::random_rows(rng, r);
      const int chosen = select_aggregator(r, rows);
      double chosen_t = total_costs(r, manual_plan(rows, chosen)).t_total;
      for (size_t c = 0; c < rows.size(); ++c) {
        if (rows[c] <= 0) continue;
        const double t = total_costs(r, manual_plan(rows, c)).t_total;
        REQUIRE(chosen_t <= t + 1e-12);
      }
    }
  }
}

TEST_CASE("fallback offloads everything to the latency argmin") {
  Scenario s = pi_jetson_scenario(0.001);
  s.cluster.devices.push_back(testsup::device("pc", 282e3, 3.6e9, 100, 0.5));
  s.cluster = testsup::uniform_cluster(s.cluster.devices, 2e7);  // fast links
  const auto plan = fallback_full_offload(s);
  CHECK(plan.planner == PlannerKind::FallbackFullOffload);
  CHECK(plan.rows[2] == 64);  // the desktop-class device wins
  SECTION("ties break to the lowest index") {
    Scenario tie = s;
    tie.cluster.devices = {testsup::device("a", 1e5, 1e9, 1, 1),
                           testsup::device("b", 1e5, 1e9, 1, 1)};
    tie.cluster = testsup::uniform_cluster(tie.cluster.devices, 12.8e9);
    const auto t = fallback_full_offload(tie);
    CHECK(t.rows[0] == 64);
  }
}

TEST_CASE("coedge planner on a single device uses the whole input") {
  Scenario s = pi_jetson_scenario(10.0);
  s.cluster.devices.pop_back();
  s.cluster.bandwidth = BandwidthMatrix(1);
  const auto outcome = plan_coedge_detailed(s);
  CHECK_FALSE(outcome.fallback);
  CHECK(outcome.plan.rows == std::vector<int>{64});
  CHECK(outcome.plan.lambda[0] == Approx(1.0));
}

TEST_CASE("coedge recursion depth never exceeds the device count") {
  std::mt19937_64 rng(53);
  for (int trial = 0; trial < 30; ++trial) {
    Scenario s = testsup::random_scenario(rng, 4);
    const auto fb = fallback_full_offload(s);
    s.deadline_s = fb.predicted_latency_s *
                   std::uniform_real_distribution<double>(0.4, 1.6)(rng);
    const auto outcome = plan_coedge_detailed(s);
    CHECK(outcome.recursions <= s.cluster.size());
    CHECK(plan_violation(s, outcome.plan).empty());
  }
}

TEST_CASE("an impossible deadline falls back to full offload") {
  Scenario s = pi_jetson_scenario(1e-7);
  const auto outcome = plan_coedge_detailed(s);
  CHECK(outcome.fallback);
  CHECK(outcome.plan.planner == PlannerKind::FallbackFullOffload);
  // The fallback plan is still a complete, valid partition.
  CHECK(plan_violation(s, outcome.plan).empty());
}

TEST_CASE("relaxation optimum lower-bounds the rounded plan's energy") {
  std::mt19937_64 rng(54);
  for (int trial = 0; trial < 30; ++trial) {
    Scenario s = testsup::random_scenario(rng, 3);
    const auto outcome = plan_coedge_detailed(s);
    if (outcome.fallback || std::isnan(outcome.lp_bound_j)) continue;
    CHECK(outcome.lp_bound_j <=
          outcome.plan.objective_energy_j * (1 + 1e-6) + 1e-12);
  }
}

TEST_CASE("relaxation optimum is monotone in the deadline") {
  Scenario s = pi_jetson_scenario(1.0);
  std::vector<int> cand = {0, 1};
  double previous = std::numeric_limits<double>::infinity();
  for (double d : {0.055, 0.06, 0.08, 0.1, 0.2, 0.5}) {
    Scenario sd = s;
    sd.deadline_s = d;
    const auto opt = p2_relaxed_optimum(sd, cand);
    REQUIRE(opt.has_value());
    CHECK(*opt <= previous + 1e-9);
    previous = *opt;
  }
}

TEST_CASE("appending a device never raises the relaxation optimum") {
  Scenario s = pi_jetson_scenario(0.5);
  s.cluster.devices.push_back(testsup::device("pi2", 615e3, 1.2e9, 3, 2.0));
  s.cluster = testsup::uniform_cluster(s.cluster.devices, 1e6);
  double previous = std::numeric_limits<double>::infinity();
  for (int k = 1; k <= 3; ++k) {
    Scenario sk = s;
    sk.cluster = cli::cluster_prefix(s.cluster, k);
    std::vector<int> cand(k);
    std::iota(cand.begin(), cand.end(), 0);
    const auto opt = p2_relaxed_optimum(sk, cand);
    REQUIRE(opt.has_value());
    CHECK(*opt <= previous + 1e-9);
    previous = *opt;
  }
}
