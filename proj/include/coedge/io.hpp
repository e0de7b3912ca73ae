#pragma once

#include <charconv>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "coedge/simulator.hpp"

namespace coedge {

namespace detail {

using nlohmann::json;

inline json parse_document(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open file: " + path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ParseError(path + ": " + e.what());
  }
}

inline const json& field(const json& j, const char* key,
                         const std::string& context) {
  auto it = j.find(key);
  if (it == j.end()) {
    throw InvariantViolation(context + ": missing field '" + key + "'");
  }
  return *it;
}

inline double num(const json& j, const char* key, const std::string& context) {
  const json& v = field(j, key, context);
  if (!v.is_number()) {
    throw InvariantViolation(context + ": field '" + key + "' must be a number");
  }
  return v.get<double>();
}

inline int integer(const json& j, const char* key,
                   const std::string& context) {
  const double v = num(j, key, context);
  const int i = static_cast<int>(v);
  if (static_cast<double>(i) != v) {
    throw InvariantViolation(context + ": field '" + key +
                             "' must be an integer");
  }
  return i;
}

// Shortest round-trip decimal form, locale-independent.
inline std::string fmt(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

}  // namespace detail

inline ModelDescriptor load_model(const std::string& path) {
  const auto j = detail::parse_document(path);
  ModelDescriptor model;
  model.name = detail::field(j, "name", path).get<std::string>();
  const auto& shape = detail::field(j, "input_shape", path);
  model.input_shape.h = detail::integer(shape, "h", path + ": input_shape");
  model.input_shape.w = detail::integer(shape, "w", path + ": input_shape");
  model.input_shape.c = detail::integer(shape, "c", path + ": input_shape");
  const auto& layers = detail::field(j, "layers", path);
  if (!layers.is_array() || layers.empty()) {
    throw InvariantViolation(path + ": layers must be a non-empty array");
  }
  for (size_t i = 0; i < layers.size(); ++i) {
    const std::string at = path + ": layers[" + std::to_string(i) + "]";
    const auto& lj = layers[i];
    LayerConfig layer;
    const std::string kind = detail::field(lj, "kind", at).get<std::string>();
    if (kind == "conv") {
      layer.kind = LayerKind::Conv;
    } else if (kind == "fully_connected") {
      layer.kind = LayerKind::FullyConnected;
    } else {
      throw InvariantViolation(at + ": unknown kind '" + kind + "'");
    }
    layer.k = detail::integer(lj, "k", at);
    layer.c_in = detail::integer(lj, "c_in", at);
    layer.c_out = detail::integer(lj, "c_out", at);
    layer.s = detail::integer(lj, "s", at);
    layer.p = detail::integer(lj, "p", at);
    model.layers.push_back(layer);
  }
  validate_model(model);
  return model;
}

inline Cluster load_cluster(const std::string& path) {
  const auto j = detail::parse_document(path);
  Cluster cluster;
  const auto& devices = detail::field(j, "devices", path);
  if (!devices.is_array() || devices.empty()) {
    throw InvariantViolation(path + ": devices must be a non-empty array");
  }
  for (size_t i = 0; i < devices.size(); ++i) {
    const std::string at = path + ": devices[" + std::to_string(i) + "]";
    const auto& dj = devices[i];
    DeviceProfile d;
    d.id = static_cast<int>(i);
    d.name = detail::field(dj, "name", at).get<std::string>();
    d.rho = detail::num(dj, "rho", at);
    d.f_hz = detail::num(dj, "f_hz", at);
    d.m_kb = detail::num(dj, "m_kb", at);
    d.p_c_watts = detail::num(dj, "p_c_watts", at);
    d.p_x_watts = detail::num(dj, "p_x_watts", at);
    cluster.devices.push_back(std::move(d));
  }
  const int n = cluster.size();
  double diagonal = kDefaultMemBandwidth;
  if (j.contains("mem_bandwidth")) {
    diagonal = detail::num(j, "mem_bandwidth", path);
    if (diagonal <= 0) {
      throw InvariantViolation(path + ": mem_bandwidth must be > 0");
    }
  }
  cluster.bandwidth = BandwidthMatrix(n, diagonal);
  if (j.contains("bandwidth")) {
    const auto& entries = j["bandwidth"];
    if (!entries.is_array()) {
      throw InvariantViolation(path + ": bandwidth must be an array");
    }
    for (size_t e = 0; e < entries.size(); ++e) {
      const std::string at = path + ": bandwidth[" + std::to_string(e) + "]";
      const auto& bj = entries[e];
      const int from = detail::integer(bj, "from", at);
      const int to = detail::integer(bj, "to", at);
      const double rate = detail::num(bj, "bytes_per_s", at);
      if (from < 1 || from > n || to < 1 || to > n) {
        throw InvariantViolation(at + ": device index out of range (1.." +
                                 std::to_string(n) + ")");
      }
      if (rate <= 0) {
        throw InvariantViolation(at + ": bytes_per_s must be > 0");
      }
      cluster.bandwidth.set(from - 1, to - 1, rate);
    }
  }
  // Symmetric files may give one triangle; mirror it.
  for (int i = 0; i < n; ++i) {
    for (int k = 0; k < n; ++k) {
      if (i != k && cluster.bandwidth.at(i, k) == 0 &&
          cluster.bandwidth.at(k, i) > 0) {
        cluster.bandwidth.set(i, k, cluster.bandwidth.at(k, i));
      }
    }
  }
  cluster.master = 0;
  if (j.contains("master")) {
    const int master = detail::integer(j, "master", path);
    if (master < 1 || master > n) {
      throw InvariantViolation(path + ": master out of range");
    }
    cluster.master = master - 1;
  }
  validate_cluster(cluster);
  return cluster;
}

inline nlohmann::json cluster_to_json(const Cluster& cluster) {
  nlohmann::json j;
  j["devices"] = nlohmann::json::array();
  for (const DeviceProfile& d : cluster.devices) {
    j["devices"].push_back({{"name", d.name},
                            {"rho", d.rho},
                            {"f_hz", d.f_hz},
                            {"m_kb", d.m_kb},
                            {"p_c_watts", d.p_c_watts},
                            {"p_x_watts", d.p_x_watts}});
  }
  j["bandwidth"] = nlohmann::json::array();
  const int n = cluster.size();
  for (int i = 0; i < n; ++i) {
    for (int k = 0; k < n; ++k) {
      if (i == k) continue;
      const double rate = cluster.bandwidth.at(i, k);
      if (rate > 0) {
        j["bandwidth"].push_back(
            {{"from", i + 1}, {"to", k + 1}, {"bytes_per_s", rate}});
      }
    }
  }
  j["mem_bandwidth"] = cluster.bandwidth.at(0, 0);
  j["master"] = cluster.master + 1;
  return j;
}

// Per-run settings layered over a model and a cluster.
struct ScenarioConfig {
  std::optional<int> master;  // 0-based after parsing
  int result_device = 0;
  int elem_bytes = 4;
  double result_bytes = 4096;
  std::optional<double> deadline_s;
  std::optional<EpochSchedule> schedule;
};

inline ScenarioConfig load_scenario_config(const std::string& path) {
  const auto j = detail::parse_document(path);
  ScenarioConfig cfg;
  if (j.contains("master")) {
    cfg.master = detail::integer(j, "master", path) - 1;
  }
  if (j.contains("result_device")) {
    cfg.result_device = detail::integer(j, "result_device", path) - 1;
  }
  if (j.contains("elem_bytes")) {
    cfg.elem_bytes = detail::integer(j, "elem_bytes", path);
  }
  if (j.contains("result_bytes")) {
    cfg.result_bytes = detail::num(j, "result_bytes", path);
  }
  if (j.contains("deadline_ms")) {
    cfg.deadline_s = detail::num(j, "deadline_ms", path) / 1000.0;
  }
  if (j.contains("epochs")) {
    const auto& epochs = j["epochs"];
    if (!epochs.is_array() || epochs.empty()) {
      throw InvariantViolation(path + ": epochs must be a non-empty array");
    }
    EpochSchedule schedule;
    for (size_t e = 0; e < epochs.size(); ++e) {
      const std::string at = path + ": epochs[" + std::to_string(e) + "]";
      Epoch epoch;
      epoch.bandwidth = detail::num(epochs[e], "bytes_per_s", at);
      if (epochs[e].contains("repetitions")) {
        epoch.repetitions = detail::integer(epochs[e], "repetitions", at);
      }
      schedule.epochs.push_back(epoch);
    }
    validate_schedule(schedule);
    cfg.schedule = std::move(schedule);
  }
  return cfg;
}

inline nlohmann::json plan_to_json(const PartitionPlan& plan) {
  nlohmann::json j;
  j["planner"] = to_string(plan.planner);
  j["lambda"] = plan.lambda;
  j["rows"] = plan.rows;
  j["aggregator"] = plan.aggregator + 1;
  j["objective_energy_j"] = plan.objective_energy_j;
  j["predicted_latency_s"] = plan.predicted_latency_s;
  return j;
}

inline void write_trace_csv(std::ostream& out, const Trace& trace) {
  out << "device,layer,kind,start_s,end_s,bytes\n";
  for (const TraceEvent& e : trace.events) {
    out << (e.device + 1) << ',' << (e.layer + 1) << ',' << to_string(e.kind)
        << ',' << detail::fmt(e.start_s) << ',' << detail::fmt(e.end_s) << ','
        << detail::fmt(e.bytes) << '\n';
  }
}

inline void write_ratio_csv(std::ostream& out,
                            const std::vector<RatioPoint>& table) {
  out << "ratio,latency_s,energy_j\n";
  for (const RatioPoint& p : table) {
    out << detail::fmt(p.ratio) << ',' << detail::fmt(p.latency_s) << ','
        << detail::fmt(p.energy_j) << '\n';
  }
}

struct DeadlineRow {
  double deadline_ms = 0;
  PlannerKind planner = PlannerKind::Coedge;
  double latency_s = 0;
  double energy_j = 0;
  bool deadline_met = false;
};

// Planner/deadline combinations that miss the deadline report an empty
// energy cell.
inline void write_deadline_csv(std::ostream& out,
                               const std::vector<DeadlineRow>& rows) {
  out << "deadline_ms,planner,latency_s,energy_j,deadline_met\n";
  for (const DeadlineRow& r : rows) {
    out << detail::fmt(r.deadline_ms) << ',' << to_string(r.planner) << ','
        << detail::fmt(r.latency_s) << ',';
    if (r.deadline_met) out << detail::fmt(r.energy_j);
    out << ',' << (r.deadline_met ? "yes" : "no") << '\n';
  }
}

inline void write_epochs_csv(std::ostream& out,
                             const std::vector<EpochResult>& results) {
  out << "epoch,bytes_per_s,latency_s,energy_j,deadline_met,planning_ms\n";
  for (const EpochResult& r : results) {
    out << (r.epoch + 1) << ',' << detail::fmt(r.bytes_per_s) << ','
        << detail::fmt(r.latency_s) << ',' << detail::fmt(r.energy_j) << ','
        << (r.deadline_met ? "yes" : "no") << ',' << detail::fmt(r.planning_ms)
        << '\n';
  }
}

}  // namespace coedge
