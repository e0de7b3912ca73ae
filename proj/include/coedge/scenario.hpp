#pragma once

#include <string>
#include <vector>

#include "coedge/model.hpp"
#include "coedge/resources.hpp"

namespace coedge {

// One inference query: the model, the cluster executing it, and the
// deadline/transfer parameters of the run.
struct Scenario {
  ModelDescriptor model;
  Cluster cluster;
  double deadline_s = 0;
  int elem_bytes = 4;        // bytes per feature-map element
  int result_device = 0;     // where the inference result must end up
  double result_bytes = 4096;  // size of the returned result
};

inline void validate_scenario(const Scenario& scenario) {
  validate_model(scenario.model);
  validate_cluster(scenario.cluster);
  if (scenario.deadline_s <= 0) {
    throw InvariantViolation("scenario: deadline must be > 0");
  }
  if (scenario.elem_bytes < 1) {
    throw InvariantViolation("scenario: elem_bytes must be >= 1");
  }
  if (scenario.result_device < 0 ||
      scenario.result_device >= scenario.cluster.size()) {
    throw InvariantViolation("scenario: result_device out of range");
  }
  if (scenario.result_bytes < 0) {
    throw InvariantViolation("scenario: result_bytes must be >= 0");
  }
}

enum class PlannerKind {
  Coedge,
  Modnn,
  MusicalChair,
  Local,
  FallbackFullOffload,
  Manual,  // fixed row vectors, e.g. offloading-ratio sweeps
};

inline const char* to_string(PlannerKind k) {
  switch (k) {
    case PlannerKind::Coedge: return "coedge";
    case PlannerKind::Modnn: return "modnn";
    case PlannerKind::MusicalChair: return "musical_chair";
    case PlannerKind::Local: return "local";
    case PlannerKind::FallbackFullOffload: return "fallback_full_offload";
    case PlannerKind::Manual: return "manual";
  }
  return "unknown";
}

// The solution pi: per-device fractions and integer layer-1 row counts.
struct PartitionPlan {
  PlannerKind planner = PlannerKind::Manual;
  std::vector<double> lambda;  // sums to 1
  std::vector<int> rows;       // sums to input height H
  int aggregator = 0;          // device running the fully-connected stage
  double objective_energy_j = 0;
  double predicted_latency_s = 0;

  std::vector<int> active() const {
    std::vector<int> out;
    for (size_t i = 0; i < rows.size(); ++i) {
      if (rows[i] > 0) out.push_back(static_cast<int>(i));
    }
    return out;
  }
};

// Builds a plan around fixed row counts; lambda mirrors rows/H.
inline PartitionPlan manual_plan(std::vector<int> rows, int aggregator,
                                 PlannerKind tag = PlannerKind::Manual) {
  PartitionPlan plan;
  plan.planner = tag;
  plan.rows = std::move(rows);
  int total = 0;
  for (int r : plan.rows) total += r;
  plan.lambda.resize(plan.rows.size(), 0.0);
  if (total > 0) {
    for (size_t i = 0; i < plan.rows.size(); ++i) {
      plan.lambda[i] = static_cast<double>(plan.rows[i]) / total;
    }
  }
  plan.aggregator = aggregator;
  return plan;
}

}  // namespace coedge
