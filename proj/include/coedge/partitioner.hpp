#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <optional>
#include <vector>

#include "coedge/cost_model.hpp"
#include "coedge/lp.hpp"

namespace coedge {

// How the P2 builder prices padding pulls between candidates:
//  - Consecutive: every candidate is presumed active, pulls run along the
//    candidate chain (used while Algorithm 1 searches over device subsets).
//  - IndexAdjacent: pulls priced only between index-neighboring candidates,
//    matching how the integer cost model charges a concrete plan (used for
//    the lower-bound solve on a plan's active set).
enum class HaloPricing { Consecutive, IndexAdjacent };

// The P2 linear program over variables (lambda_1..lambda_K, tau_1..tau_L),
// where tau_l is the per-layer interval expressed as a fraction of the
// deadline.  The normalization keeps every coefficient near unit scale.
struct P2Build {
  lp::LPProblem problem;
  std::vector<int> devices;  // candidate set, ascending original indices
  int aggregator = 0;
  std::vector<double> lambda_energy_coef;  // energy per unit lambda
  double const_energy = 0;  // halo/FC/result terms independent of lambda
  int deadline_row = -1;    // row index of sum(tau) <= 1 in a_ub
  double deadline_s = 0;

  // Expands a solution's lambda block to a full per-device vector.
  std::vector<double> lambda_full(const lp::LPSolution& sol, int n) const {
    std::vector<double> out(n, 0.0);
    for (size_t k = 0; k < devices.size(); ++k) {
      out[devices[k]] = std::max(0.0, sol.x[k]);
    }
    return out;
  }

  // Objective energy at a lambda assignment, epsilon weights excluded.
  double energy_at(const lp::LPSolution& sol) const {
    double e = const_energy;
    for (size_t k = 0; k < devices.size(); ++k) {
      e += lambda_energy_coef[k] * std::max(0.0, sol.x[k]);
    }
    return e;
  }

  // Total relaxed latency at the optimum, in seconds.
  double sum_t_seconds(const lp::LPSolution& sol) const {
    double tau = 0;
    for (size_t j = devices.size(); j < sol.x.size(); ++j) tau += sol.x[j];
    return tau * deadline_s;
  }
};

namespace detail {

inline int first_fc_layer(const ModelDescriptor& model) {
  for (int l = 0; l < model.layer_count(); ++l) {
    if (model.layers[l].kind == LayerKind::FullyConnected) return l;
  }
  return -1;
}

}  // namespace detail

namespace detail {

// Cheapest host for the fully-connected stage plus the result return, under
// either the energy or the time metric.
inline int fc_stage_argmin(const Scenario& scenario,
                           const std::vector<int>& candidates,
                           bool by_energy) {
  const std::vector<Shape> shapes = propagate_shape(scenario.model);
  int best = candidates.front();
  double best_cost = std::numeric_limits<double>::infinity();
  for (int i : candidates) {
    const DeviceProfile& dev = scenario.cluster.devices[i];
    double cost = 0;
    for (int l = 0; l < scenario.model.layer_count(); ++l) {
      if (scenario.model.layers[l].kind != LayerKind::FullyConnected) continue;
      const double r_kb =
          workload_size(shapes[l], shapes[l].h, scenario.elem_bytes);
      const double t = compute_time(r_kb, dev);
      cost += by_energy ? compute_energy(t, dev) : t;
    }
    if (scenario.result_bytes > 0) {
      const double t =
          scenario.result_bytes /
          scenario.cluster.bandwidth.require(i, scenario.result_device);
      cost += by_energy ? dev.p_x_watts * t : t;
    }
    if (cost < best_cost) {
      best_cost = cost;
      best = i;
    }
  }
  return best;
}

}  // namespace detail

// Picks the LP-construction aggregator: the device with the cheapest
// fully-connected stage plus result return, energy-wise.  The final plan
// re-selects by latency (select_aggregator); this only anchors the P2 terms.
inline int provisional_aggregator(const Scenario& scenario,
                                  const std::vector<int>& candidates) {
  return detail::fc_stage_argmin(scenario, candidates, true);
}

// Assembles P2: minimize the relaxed dynamic energy subject to the memory
// rows, the epigraph rows t_l >= T^c + T^x, the deadline row, the sign rows,
// and sum(lambda) = 1.
inline P2Build build_p2(const Scenario& scenario,
                        const std::vector<int>& candidates, int aggregator,
                        HaloPricing pricing = HaloPricing::Consecutive,
                        double deadline_override = 0) {
  const ModelDescriptor& model = scenario.model;
  const Cluster& cluster = scenario.cluster;
  const int k_count = static_cast<int>(candidates.size());
  const int layer_count = model.layer_count();
  const std::vector<Shape> shapes = propagate_shape(model);
  const int master = cluster.master;
  const int first_fc = detail::first_fc_layer(model);
  const double deadline =
      deadline_override > 0 ? deadline_override : scenario.deadline_s;

  P2Build build;
  build.devices = candidates;
  build.aggregator = aggregator;
  build.deadline_s = deadline;

  lp::LPProblem& p = build.problem;
  p.n = k_count + layer_count;
  p.c.assign(p.n, 0.0);

  auto pulls_from_next = [&](int k) {
    if (k + 1 >= k_count) return false;
    return pricing == HaloPricing::Consecutive ||
           candidates[k] + 1 == candidates[k + 1];
  };

  build.lambda_energy_coef.assign(k_count, 0.0);
  build.const_energy = 0;

  // Per-cell time pieces, reused by the epigraph rows and the objective.
  // times[l][k] = {lambda coefficient, constant} of T^c + T^x.
  std::vector<std::vector<std::pair<double, double>>> times(
      layer_count, std::vector<std::pair<double, double>>(k_count, {0, 0}));

  for (int l = 0; l < layer_count; ++l) {
    const LayerConfig& layer = model.layers[l];
    const Shape& shape = shapes[l];
    const double rb = detail::row_bytes(shape, scenario.elem_bytes);
    const int halo = halo_rows(layer);
    for (int k = 0; k < k_count; ++k) {
      const int i = candidates[k];
      const DeviceProfile& dev = cluster.devices[i];
      double coef = 0, cons = 0;
      if (layer.kind == LayerKind::Conv) {
        coef += dev.rho * (shape.h * rb / 1024.0) / dev.f_hz;
        if (l == 0) {
          const double bw = cluster.bandwidth.require(master, i);
          coef += shape.h * rb / bw;
          if (k + 1 < k_count && halo > 0) {
            cons += halo * rb / bw;
          }
        } else if (halo > 0 && pulls_from_next(k)) {
          cons += halo * rb / cluster.bandwidth.require(i, candidates[k + 1]);
        }
      } else {
        if (i == aggregator) {
          const double r_kb = workload_size(shape, shape.h, scenario.elem_bytes);
          cons += compute_time(r_kb, dev);
        } else if (l == first_fc && l > 0) {
          coef += shape.h * rb / cluster.bandwidth.require(i, aggregator);
        }
      }
      if (l == layer_count - 1 && i == aggregator && scenario.result_bytes > 0) {
        cons += scenario.result_bytes /
                cluster.bandwidth.require(i, scenario.result_device);
      }
      times[l][k] = {coef, cons};
    }
  }

  // Energy terms: computation uses P^c, every transfer uses P^x, so the
  // pieces cannot be read back off `times` directly.
  for (int l = 0; l < layer_count; ++l) {
    const LayerConfig& layer = model.layers[l];
    const Shape& shape = shapes[l];
    const double rb = detail::row_bytes(shape, scenario.elem_bytes);
    const int halo = halo_rows(layer);
    for (int k = 0; k < k_count; ++k) {
      const int i = candidates[k];
      const DeviceProfile& dev = cluster.devices[i];
      if (layer.kind == LayerKind::Conv) {
        build.lambda_energy_coef[k] +=
            dev.p_c_watts * dev.rho * (shape.h * rb / 1024.0) / dev.f_hz;
        if (l == 0) {
          const double bw = cluster.bandwidth.require(master, i);
          build.lambda_energy_coef[k] += dev.p_x_watts * shape.h * rb / bw;
          if (k + 1 < k_count && halo > 0) {
            build.const_energy += dev.p_x_watts * halo * rb / bw;
          }
        } else if (halo > 0 && pulls_from_next(k)) {
          build.const_energy +=
              dev.p_x_watts * halo * rb /
              cluster.bandwidth.require(i, candidates[k + 1]);
        }
      } else {
        if (i == aggregator) {
          const double r_kb = workload_size(shape, shape.h, scenario.elem_bytes);
          build.const_energy +=
              compute_energy(compute_time(r_kb, dev), dev);
        } else if (l == first_fc && l > 0) {
          build.lambda_energy_coef[k] +=
              dev.p_x_watts * shape.h * rb /
              cluster.bandwidth.require(i, aggregator);
        }
      }
    }
  }
  if (scenario.result_bytes > 0) {
    const DeviceProfile& agg = cluster.devices[aggregator];
    build.const_energy +=
        agg.p_x_watts * scenario.result_bytes /
        cluster.bandwidth.require(aggregator, scenario.result_device);
  }
  for (int k = 0; k < k_count; ++k) p.c[k] = build.lambda_energy_coef[k];

  // Weight the tau variables just enough that the optimum pins them to the
  // per-layer maxima without disturbing the energy argmin.
  double coef_scale = 0;
  for (double c : build.lambda_energy_coef) {
    coef_scale = std::max(coef_scale, std::abs(c));
  }
  const double tau_weight = std::max(1e-12, 1e-7 * coef_scale);
  for (int l = 0; l < layer_count; ++l) {
    p.c[k_count + l] = tau_weight;
  }

  // Epigraph rows in deadline units: (lambda-part)/D - tau_l <= -const/D.
  for (int l = 0; l < layer_count; ++l) {
    for (int k = 0; k < k_count; ++k) {
      std::vector<double> row(p.n, 0.0);
      row[k] = times[l][k].first / deadline;
      row[k_count + l] = -1.0;
      p.a_ub.push_back(std::move(row));
      p.b_ub.push_back(-times[l][k].second / deadline);
    }
  }
  // Memory rows: r_li(lambda) <= m_i.
  for (int l = 0; l < layer_count; ++l) {
    const LayerConfig& layer = model.layers[l];
    const Shape& shape = shapes[l];
    for (int k = 0; k < k_count; ++k) {
      const int i = candidates[k];
      std::vector<double> row(p.n, 0.0);
      const double m_kb = cluster.devices[i].m_kb;
      double rhs = 1.0;  // normalized by the device's capacity
      if (layer.kind == LayerKind::Conv) {
        row[k] = shape.h * detail::row_bytes(shape, scenario.elem_bytes) /
                 1024.0 / m_kb;
      } else if (i == aggregator) {
        rhs -= workload_size(shape, shape.h, scenario.elem_bytes) / m_kb;
      }
      p.a_ub.push_back(std::move(row));
      p.b_ub.push_back(rhs);
    }
  }
  // Deadline row: sum(tau_l) <= 1.
  {
    std::vector<double> row(p.n, 0.0);
    for (int l = 0; l < layer_count; ++l) row[k_count + l] = 1.0;
    build.deadline_row = static_cast<int>(p.a_ub.size());
    p.a_ub.push_back(std::move(row));
    p.b_ub.push_back(1.0);
  }
  // Sign rows: -lambda_k <= 0.
  for (int k = 0; k < k_count; ++k) {
    std::vector<double> row(p.n, 0.0);
    row[k] = -1.0;
    p.a_ub.push_back(std::move(row));
    p.b_ub.push_back(0.0);
  }
  // sum(lambda) = 1.
  {
    std::vector<double> row(p.n, 0.0);
    for (int k = 0; k < k_count; ++k) row[k] = 1.0;
    p.a_eq.push_back(std::move(row));
    p.b_eq.push_back(1.0);
  }
  return build;
}

// Largest-remainder apportionment of H rows by lambda, then a repair loop
// that tops up any constrained device rounding pushed below its threshold.
inline std::vector<int> round_plan(const std::vector<double>& lambda, int h,
                                   const std::vector<int>& thresholds) {
  const int n = static_cast<int>(lambda.size());
  std::vector<int> rows(n, 0);
  std::vector<double> remainder(n, 0.0);
  long long assigned = 0;
  for (int i = 0; i < n; ++i) {
    const double exact = lambda[i] * h;
    rows[i] = static_cast<int>(std::floor(exact + 1e-9));
    remainder[i] = std::max(0.0, exact - rows[i]);
    assigned += rows[i];
  }
  int leftover = h - static_cast<int>(assigned);
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return remainder[a] > remainder[b];
  });
  for (int idx = 0; leftover > 0 && idx < n; ++idx) {
    ++rows[order[idx]];
    --leftover;
  }
  if (leftover != 0) throw RepairFailed("apportionment could not place rows");

  auto last_active = [&rows, n] {
    for (int i = n - 1; i >= 0; --i) {
      if (rows[i] > 0) return i;
    }
    return -1;
  };
  for (int pass = 0; pass < n; ++pass) {
    const int last = last_active();
    int violator = -1;
    for (int i = 0; i < n; ++i) {
      if (rows[i] > 0 && i != last && rows[i] < thresholds[i]) {
        violator = i;
        break;
      }
    }
    if (violator < 0) return rows;
    const int need = thresholds[violator] - rows[violator];
    int donor = -1;
    for (int j = 0; j < n; ++j) {
      if (j != violator && (donor < 0 || rows[j] > rows[donor])) donor = j;
    }
    if (donor < 0 || rows[donor] - need < 1) {
      throw RepairFailed("no donor can cover the padding threshold");
    }
    rows[donor] -= need;
    rows[violator] += need;
  }
  const int last = last_active();
  for (int i = 0; i < n; ++i) {
    if (rows[i] > 0 && i != last && rows[i] < thresholds[i]) {
      throw RepairFailed("padding threshold unrepaired after N passes");
    }
  }
  return rows;
}

// The aggregator minimizing end-to-end latency under the cost model
// (fragment gather plus the fully-connected stage); ties go to the lowest
// device index.
inline int select_aggregator(const Scenario& scenario,
                             const std::vector<int>& rows) {
  std::vector<int> active;
  for (size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] > 0) active.push_back(static_cast<int>(i));
  }
  if (active.empty()) throw BadPartition("plan has no active device");
  int best = active.front();
  double best_t = std::numeric_limits<double>::infinity();
  for (int c : active) {
    PartitionPlan trial = manual_plan(rows, c);
    const CostBreakdown cb = total_costs(scenario, trial);
    if (cb.t_total < best_t - 1e-15) {
      best_t = cb.t_total;
      best = c;
    }
  }
  return best;
}

namespace detail {

// Finalizes a plan's aggregator and predicted cost fields.
inline PartitionPlan finish_plan(const Scenario& scenario,
                                 std::vector<int> rows,
                                 std::vector<double> lambda,
                                 PlannerKind tag) {
  PartitionPlan plan;
  plan.planner = tag;
  plan.rows = std::move(rows);
  plan.lambda = std::move(lambda);
  plan.aggregator = select_aggregator(scenario, plan.rows);
  const CostBreakdown cb = total_costs(scenario, plan);
  plan.objective_energy_j = cb.energy_total();
  plan.predicted_latency_s = cb.t_total;
  return plan;
}

inline std::vector<double> unit_lambda(int n, int device) {
  std::vector<double> lambda(n, 0.0);
  lambda[device] = 1.0;
  return lambda;
}

}  // namespace detail

// Places the whole workload on the single device with the lowest end-to-end
// latency (the infeasibility fallback).
inline PartitionPlan fallback_full_offload(const Scenario& scenario) {
  const int n = scenario.cluster.size();
  const int h = scenario.model.input_shape.h;
  int best = 0;
  double best_t = std::numeric_limits<double>::infinity();
  for (int i = 0; i < n; ++i) {
    std::vector<int> rows(n, 0);
    rows[i] = h;
    PartitionPlan trial = manual_plan(std::move(rows), i);
    const CostBreakdown cb = total_costs(scenario, trial);
    if (cb.t_total < best_t - 1e-15) {
      best_t = cb.t_total;
      best = i;
    }
  }
  std::vector<int> rows(n, 0);
  rows[best] = h;
  return detail::finish_plan(scenario, std::move(rows),
                             detail::unit_lambda(n, best),
                             PlannerKind::FallbackFullOffload);
}

inline PartitionPlan plan_local(const Scenario& scenario) {
  const int n = scenario.cluster.size();
  std::vector<int> rows(n, 0);
  rows[scenario.cluster.master] = scenario.model.input_shape.h;
  return detail::finish_plan(scenario, std::move(rows),
                             detail::unit_lambda(n, scenario.cluster.master),
                             PlannerKind::Local);
}

namespace detail {

// Shared shape of MoDNN and Musical Chair: a fixed lambda rule rounded to
// rows; when the padding repair fails, the smallest-share device is dropped
// and the shares renormalized.
inline PartitionPlan plan_by_weights(const Scenario& scenario,
                                     std::vector<double> weights,
                                     PlannerKind tag) {
  const int n = scenario.cluster.size();
  const int h = scenario.model.input_shape.h;
  const int threshold = halo_threshold_rows(scenario.model);
  const std::vector<int> thresholds(n, threshold);
  for (int attempt = 0; attempt < n; ++attempt) {
    double total = std::accumulate(weights.begin(), weights.end(), 0.0);
    if (total <= 0) break;
    std::vector<double> lambda(n);
    for (int i = 0; i < n; ++i) lambda[i] = weights[i] / total;
    try {
      std::vector<int> rows = round_plan(lambda, h, thresholds);
      return finish_plan(scenario, std::move(rows), std::move(lambda), tag);
    } catch (const RepairFailed&) {
      int drop = -1;
      for (int i = 0; i < n; ++i) {
        if (weights[i] > 0 && (drop < 0 || weights[i] < weights[drop])) {
          drop = i;
        }
      }
      if (drop < 0) break;
      weights[drop] = 0;
    }
  }
  // Down to one device at most; run everything on the master.
  return plan_local(scenario);
}

}  // namespace detail

// MoDNN: shares proportional to computing capability f/rho, network-blind.
inline PartitionPlan plan_modnn(const Scenario& scenario) {
  std::vector<double> weights;
  for (const DeviceProfile& d : scenario.cluster.devices) {
    weights.push_back(d.f_hz / d.rho);
  }
  return detail::plan_by_weights(scenario, std::move(weights),
                                 PlannerKind::Modnn);
}

// Musical Chair: equal shares across all devices.
inline PartitionPlan plan_musical_chair(const Scenario& scenario) {
  std::vector<double> weights(scenario.cluster.size(), 1.0);
  return detail::plan_by_weights(scenario, std::move(weights),
                                 PlannerKind::MusicalChair);
}

struct PlanOutcome {
  PartitionPlan plan;
  double lp_bound_j = std::numeric_limits<double>::quiet_NaN();
  bool fallback = false;
  int recursions = 0;  // deepest recursion of a single Algorithm-1 pass
  int restarts = 0;    // deadline-tightening reruns after rounding overshoot
};

namespace detail {

inline std::vector<double> snap_lambda(std::vector<double> lambda) {
  for (double& v : lambda) {
    if (v < 1e-9) v = 0.0;
  }
  return lambda;
}

// Threshold check of Algorithm 1: every device with a positive share and a
// later active device must cover the padding threshold.
inline bool satisfies_threshold(const std::vector<double>& lambda, int h,
                                int threshold) {
  int last_active = -1;
  for (int i = static_cast<int>(lambda.size()) - 1; i >= 0; --i) {
    if (lambda[i] > 0) {
      last_active = i;
      break;
    }
  }
  for (int i = 0; i < last_active; ++i) {
    if (lambda[i] > 0 && lambda[i] * h < threshold - 1e-6) return false;
  }
  return true;
}

// Removes zero-share devices and the minimum positive share from the
// candidate set (one recursion step of Algorithm 1).
inline std::vector<int> shrink_candidates(const std::vector<int>& candidates,
                                          const std::vector<double>& lambda) {
  int min_dev = -1;
  for (int i : candidates) {
    if (lambda[i] > 0 && (min_dev < 0 || lambda[i] < lambda[min_dev])) {
      min_dev = i;
    }
  }
  std::vector<int> next;
  for (int i : candidates) {
    if (lambda[i] > 0 && i != min_dev) next.push_back(i);
  }
  return next;
}

}  // namespace detail

namespace detail {

// Solves P2 on a candidate set.  The fully-connected stage needs an anchor
// device; the energy-cheapest and the fastest hosts both get a shot (they
// usually coincide), and the cheaper feasible relaxation wins.  A tight
// deadline can be reachable only under the fast host.
struct P2Solved {
  P2Build build;
  lp::LPSolution solution;
};

inline std::optional<P2Solved> solve_p2(const Scenario& scenario,
                                        const std::vector<int>& candidates,
                                        double budget) {
  const int agg_energy = fc_stage_argmin(scenario, candidates, true);
  const int agg_time = fc_stage_argmin(scenario, candidates, false);
  std::vector<int> anchors = {agg_energy};
  if (agg_time != agg_energy) anchors.push_back(agg_time);
  std::optional<P2Solved> best;
  for (int agg : anchors) {
    P2Build build =
        build_p2(scenario, candidates, agg, HaloPricing::Consecutive, budget);
    lp::LPSolution sol = lp::solve(build.problem);
    if (sol.status != lp::Status::Optimal) continue;
    if (!best ||
        build.energy_at(sol) < best->build.energy_at(best->solution)) {
      best = P2Solved{std::move(build), std::move(sol)};
    }
  }
  return best;
}

}  // namespace detail

// Re-solves the relaxation on a plan's active set, pricing pulls the way the
// integer cost model does.  The optimum lower-bounds the plan's energy.
inline std::optional<double> lp_lower_bound(const Scenario& scenario,
                                            const PartitionPlan& plan) {
  const std::vector<int> active = plan.active();
  if (active.empty()) return std::nullopt;
  const P2Build build = build_p2(scenario, active, plan.aggregator,
                                 HaloPricing::IndexAdjacent);
  const lp::LPSolution sol = lp::solve(build.problem);
  if (sol.status != lp::Status::Optimal) return std::nullopt;
  return build.energy_at(sol);
}

namespace detail {

// Turns rounded rows into the cheapest deadline-respecting plan nearby.
//
// Two integer effects the relaxation cannot see get patched here: the LP's
// anchor aggregator may have been rounded to zero rows (re-activating it
// with a threshold-sized slice often wins back a free result transfer), and
// single rows can sit on the wrong device after apportionment (a bounded
// greedy pass shifts them while the plan stays valid and on time).
inline std::optional<PartitionPlan> finalize_rounded(
    const Scenario& scenario, const std::vector<int>& rounded, int anchor_agg,
    const std::vector<double>& lambda, int threshold) {
  const double deadline = scenario.deadline_s * (1 + 1e-12);
  auto evaluate = [&](const std::vector<int>& rows)
      -> std::optional<PartitionPlan> {
    PartitionPlan plan;
    try {
      plan = finish_plan(scenario, rows, lambda, PlannerKind::Coedge);
    } catch (const Error&) {
      return std::nullopt;
    }
    if (!plan_violation(scenario, plan).empty()) return std::nullopt;
    if (plan.predicted_latency_s > deadline) return std::nullopt;
    return plan;
  };

  std::optional<PartitionPlan> best = evaluate(rounded);
  if (rounded[anchor_agg] == 0) {
    // Variant with the anchor aggregator active at the minimum viable size.
    std::vector<int> variant = rounded;
    const int need = std::max(threshold, 1);
    int donor = -1;
    for (size_t j = 0; j < variant.size(); ++j) {
      if (donor < 0 || variant[j] > variant[donor]) donor = static_cast<int>(j);
    }
    if (donor >= 0 && variant[donor] > need) {
      variant[donor] -= need;
      variant[anchor_agg] += need;
      if (auto alt = evaluate(variant)) {
        if (!best || alt->objective_energy_j < best->objective_energy_j) {
          best = std::move(alt);
        }
      }
    }
  }
  if (!best) return std::nullopt;

  // Greedy one-row polish, bounded to keep planning inside its time budget.
  const int n = static_cast<int>(best->rows.size());
  for (int pass = 0; pass < 2 * n; ++pass) {
    std::optional<PartitionPlan> improved;
    for (int from = 0; from < n; ++from) {
      if (best->rows[from] == 0) continue;
      for (int to = 0; to < n; ++to) {
        if (to == from) continue;
        std::vector<int> rows = best->rows;
        --rows[from];
        ++rows[to];
        PartitionPlan trial;
        trial.planner = PlannerKind::Coedge;
        trial.rows = rows;
        trial.lambda = lambda;
        trial.aggregator = best->aggregator;
        if (rows[trial.aggregator] == 0 ||
            !plan_violation(scenario, trial).empty()) {
          continue;
        }
        CostBreakdown cb;
        try {
          cb = total_costs(scenario, trial);
        } catch (const Error&) {
          continue;
        }
        if (cb.t_total > deadline) continue;
        trial.objective_energy_j = cb.energy_total();
        trial.predicted_latency_s = cb.t_total;
        if (trial.objective_energy_j <
            (improved ? improved->objective_energy_j
                      : best->objective_energy_j) -
                1e-15) {
          improved = std::move(trial);
        }
      }
    }
    if (!improved) break;
    // Re-select the aggregator for the accepted move.
    improved->aggregator = select_aggregator(scenario, improved->rows);
    const CostBreakdown cb = total_costs(scenario, *improved);
    improved->objective_energy_j = cb.energy_total();
    improved->predicted_latency_s = cb.t_total;
    if (improved->predicted_latency_s <= deadline &&
        improved->objective_energy_j < best->objective_energy_j) {
      best = std::move(improved);
    } else {
      break;
    }
  }
  return best;
}

}  // namespace detail

// Algorithm 1: solve P2 on the candidate set, accept when the shares clear
// the padding threshold, otherwise drop the zero and minimum shares and
// recurse; an empty set means no feasible solution and triggers the full
// offload fallback.
//
// Integer rounding can push the recursion's plan past the real deadline
// (strided layers land rows unevenly), so a second stage re-solves on the
// full device set against progressively tightened budgets and lets
// round_plan's repair lift sub-threshold shares instead of dropping devices.
inline PlanOutcome plan_coedge_detailed(const Scenario& scenario) {
  validate_scenario(scenario);
  const int n = scenario.cluster.size();
  const int h = scenario.model.input_shape.h;
  const int threshold = halo_threshold_rows(scenario.model);
  const std::vector<int> thresholds(n, threshold);
  const double deadline = scenario.deadline_s;

  PlanOutcome out;
  auto accept = [&](PartitionPlan plan) {
    out.plan = std::move(plan);
    if (auto bound = lp_lower_bound(scenario, out.plan)) {
      out.lp_bound_j = *bound;
    }
    return out;
  };

  // Stage 1: the threshold-based recursion exactly as written.
  double overshoot_s = 0;
  bool relaxation_feasible = false;
  {
    std::vector<int> candidates(n);
    std::iota(candidates.begin(), candidates.end(), 0);
    while (!candidates.empty()) {
      ++out.recursions;
      const auto solved = detail::solve_p2(scenario, candidates, deadline);
      if (!solved) break;
      relaxation_feasible = true;
      const std::vector<double> lambda =
          detail::snap_lambda(solved->build.lambda_full(solved->solution, n));
      if (!detail::satisfies_threshold(lambda, h, threshold)) {
        candidates = detail::shrink_candidates(candidates, lambda);
        continue;
      }
      try {
        const std::vector<int> rows = round_plan(lambda, h, thresholds);
        if (auto plan = detail::finalize_rounded(
                scenario, rows, solved->build.aggregator, lambda, threshold)) {
          return accept(std::move(*plan));
        }
        overshoot_s = detail::finish_plan(scenario, rows, lambda,
                                          PlannerKind::Coedge)
                          .predicted_latency_s;
      } catch (const RepairFailed&) {
      } catch (const HaloSpanViolation&) {
      }
      break;
    }
  }

  // Stage 2: tightened reruns on the full set, repair-based rounding.
  if (relaxation_feasible) {
    std::vector<int> candidates(n);
    std::iota(candidates.begin(), candidates.end(), 0);
    double budget = deadline;
    for (int k = 0; k < 8; ++k) {
      ++out.restarts;
      if (overshoot_s > 0) {
        budget *= std::clamp(deadline / overshoot_s * 0.998, 0.5, 0.998);
      } else if (k > 0) {
        budget *= 0.97;
      }
      overshoot_s = 0;
      const auto solved = detail::solve_p2(scenario, candidates, budget);
      if (!solved) break;
      const std::vector<double> lambda =
          detail::snap_lambda(solved->build.lambda_full(solved->solution, n));
      try {
        const std::vector<int> rows = round_plan(lambda, h, thresholds);
        if (auto plan = detail::finalize_rounded(
                scenario, rows, solved->build.aggregator, lambda, threshold)) {
          return accept(std::move(*plan));
        }
        overshoot_s = detail::finish_plan(scenario, rows, lambda,
                                          PlannerKind::Coedge)
                          .predicted_latency_s;
      } catch (const RepairFailed&) {
      } catch (const HaloSpanViolation&) {
      }
    }
  }

  out.fallback = true;
  return accept(fallback_full_offload(scenario));
}

inline PartitionPlan plan_coedge(const Scenario& scenario) {
  return plan_coedge_detailed(scenario).plan;
}

// Continuous P2 optimum on a candidate set, reported as the relaxed energy
// of the optimal shares (only transfers between active devices count).
inline std::optional<double> p2_relaxed_optimum(
    const Scenario& scenario, const std::vector<int>& candidates) {
  if (candidates.empty()) return std::nullopt;
  const auto solved = detail::solve_p2(scenario, candidates, 0);
  if (!solved) return std::nullopt;
  const std::vector<double> lambda = detail::snap_lambda(
      solved->build.lambda_full(solved->solution, scenario.cluster.size()));
  const int agg = solved->build.aggregator;
  int agg_eff = agg;
  if (lambda[agg] <= 0) {
    // Keep the FC stage on an active device when the LP zeroes the anchor.
    for (int i = 0; i < scenario.cluster.size(); ++i) {
      if (lambda[i] > 0) {
        agg_eff = i;
        break;
      }
    }
  }
  return relaxed_energy(scenario, lambda, agg_eff);
}

struct Planner {
  PlannerKind kind;
  std::function<PartitionPlan(const Scenario&)> run;
};

inline PartitionPlan run_planner(PlannerKind kind, const Scenario& scenario) {
  switch (kind) {
    case PlannerKind::Coedge: return plan_coedge(scenario);
    case PlannerKind::Modnn: return plan_modnn(scenario);
    case PlannerKind::MusicalChair: return plan_musical_chair(scenario);
    case PlannerKind::Local: return plan_local(scenario);
    default: throw InvariantViolation("planner not runnable");
  }
}

}  // namespace coedge
