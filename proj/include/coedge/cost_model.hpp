#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "coedge/scenario.hpp"

namespace coedge {

// Per-layer, per-device input row counts.  Fully-connected layers hold all
// rows on the aggregator; `fragments` keeps the pre-aggregation distribution
// of the first FC layer's input, which prices the gather transfers.
struct RowAssignment {
  std::vector<std::vector<int>> rows;  // [layer][device]
  std::vector<int> fragments;          // empty when the model has no FC stage
  int first_fc = -1;
};

enum class TransferKind { None, Distribute, HaloPull, Aggregate };

struct CostBreakdown {
  int layers = 0;
  int devices = 0;
  // [layer][device]; t_x folds the result-return time into the last layer's
  // aggregator cell, mirroring how the deadline equation accounts it.
  std::vector<std::vector<double>> t_c, t_x, e_c, e_x;
  std::vector<std::vector<double>> xfer_bytes;
  std::vector<std::vector<TransferKind>> xfer_kind;
  double result_t = 0;
  double result_bytes = 0;
  std::vector<double> superstep;  // per-layer max_i(t_c + t_x)
  double e_c_total = 0;
  double e_x_total = 0;
  double t_total = 0;

  double energy_total() const { return e_c_total + e_x_total; }
};

namespace detail {

inline double row_bytes(const Shape& shape, int elem_bytes) {
  return static_cast<double>(shape.w) * shape.c * elem_bytes;
}

// Splits output rows of a conv layer between devices: output row j follows
// the device whose input segment contains anchor row min(j*s, H_in - 1).
inline std::vector<int> anchor_propagate(const std::vector<int>& in_rows,
                                         const LayerConfig& layer,
                                         int h_in, int h_out) {
  const int n = static_cast<int>(in_rows.size());
  std::vector<int> out(n, 0);
  int device = 0;
  int segment_end = in_rows.empty() ? 0 : in_rows[0];
  for (int j = 0; j < h_out; ++j) {
    const int anchor = std::min(j * layer.s, h_in - 1);
    while (device < n - 1 && anchor >= segment_end) {
      ++device;
      segment_end += in_rows[device];
    }
    ++out[device];
  }
  return out;
}

}  // namespace detail

// Workload size r_li in KB for a partition of `rows` rows.
inline double workload_size(const Shape& shape, int rows, int elem_bytes) {
  return rows * detail::row_bytes(shape, elem_bytes) / 1024.0;
}

inline double compute_time(double r_kb, const DeviceProfile& device) {
  return device.rho * r_kb / device.f_hz;
}

inline double compute_energy(double t_c, const DeviceProfile& device) {
  return device.p_c_watts * t_c;
}

inline double transmission_energy(double t_x, const DeviceProfile& device) {
  return device.p_x_watts * t_x;
}

// Carries layer-1 row counts through the network.  `aggregator` receives the
// whole feature map for the fully-connected stage.
inline RowAssignment propagate_rows(const ModelDescriptor& model,
                                    const std::vector<Shape>& shapes,
                                    const std::vector<int>& a,
                                    int aggregator) {
  const int n = static_cast<int>(a.size());
  const int layer_count = model.layer_count();
  long long sum = 0;
  for (int v : a) {
    if (v < 0) throw BadPartition("negative row count in partition");
    sum += v;
  }
  if (sum != shapes[0].h) {
    throw BadPartition("row counts sum to " + std::to_string(sum) +
                       ", expected H=" + std::to_string(shapes[0].h));
  }

  RowAssignment out;
  out.rows.assign(layer_count, std::vector<int>(n, 0));
  out.rows[0] = a;
  for (int l = 0; l < layer_count; ++l) {
    if (model.layers[l].kind == LayerKind::FullyConnected) {
      out.first_fc = l;
      break;
    }
  }

  for (int l = 0; l + 1 < layer_count; ++l) {
    const int next = l + 1;
    if (model.layers[next].kind == LayerKind::FullyConnected) {
      const int h_next = shapes[next].h;
      if (next == out.first_fc) {
        out.fragments = (model.layers[l].kind == LayerKind::Conv)
                            ? detail::anchor_propagate(out.rows[l],
                                                       model.layers[l],
                                                       shapes[l].h, h_next)
                            : out.rows[l];
      }
      out.rows[next][aggregator] = h_next;
    } else {
      out.rows[next] = detail::anchor_propagate(
          out.rows[l], model.layers[l], shapes[l].h, shapes[next].h);
    }
  }
  if (out.first_fc == 0) out.fragments = a;
  return out;
}

// Full cost evaluation of a plan: Eqs. (5)-(8) per cell, Eqs. (9)-(11) as
// totals.  The simulator replays these exact values, so the two stay
// bit-identical by construction.
inline CostBreakdown total_costs(const Scenario& scenario,
                                 const PartitionPlan& plan) {
  const ModelDescriptor& model = scenario.model;
  const Cluster& cluster = scenario.cluster;
  const int n = cluster.size();
  const int layer_count = model.layer_count();
  if (static_cast<int>(plan.rows.size()) != n) {
    throw BadPartition("plan rows length does not match device count");
  }
  const std::vector<Shape> shapes = propagate_shape(model);
  const RowAssignment assign =
      propagate_rows(model, shapes, plan.rows, plan.aggregator);

  CostBreakdown cb;
  cb.layers = layer_count;
  cb.devices = n;
  cb.t_c.assign(layer_count, std::vector<double>(n, 0.0));
  cb.t_x = cb.t_c;
  cb.e_c = cb.t_c;
  cb.e_x = cb.t_c;
  cb.xfer_bytes = cb.t_c;
  cb.xfer_kind.assign(layer_count,
                      std::vector<TransferKind>(n, TransferKind::None));
  cb.superstep.assign(layer_count, 0.0);

  const int master = cluster.master;
  const int last_active = [&] {
    for (int i = n - 1; i >= 0; --i) {
      if (plan.rows[i] > 0) return i;
    }
    return -1;
  }();

  for (int l = 0; l < layer_count; ++l) {
    const LayerConfig& layer = model.layers[l];
    const Shape& shape = shapes[l];
    const double rb = detail::row_bytes(shape, scenario.elem_bytes);
    const int halo = halo_rows(layer);

    for (int i = 0; i < n; ++i) {
      const int rows = assign.rows[l][i];
      const double r_kb = workload_size(shape, rows, scenario.elem_bytes);
      cb.t_c[l][i] = compute_time(r_kb, cluster.devices[i]);

      if (l == 0) {
        // Initial distribution from the master, halo rows included so the
        // first layer needs no separate pull.
        if (rows > 0) {
          int extra = 0;
          if (layer.kind == LayerKind::Conv && i != last_active) {
            int end = 0;
            for (int j = 0; j <= i; ++j) end += assign.rows[0][j];
            extra = std::min(halo, shape.h - end);
          }
          const double bytes = (rows + extra) * rb;
          cb.t_x[l][i] = bytes / cluster.bandwidth.require(master, i);
          cb.xfer_bytes[l][i] = bytes;
          cb.xfer_kind[l][i] = TransferKind::Distribute;
        }
      } else if (layer.kind == LayerKind::Conv) {
        // Padding pull between index neighbors, once per boundary.
        if (halo > 0 && rows > 0 && i + 1 < n && assign.rows[l][i + 1] > 0) {
          if (rows < halo) {
            throw HaloSpanViolation(
                "layer " + std::to_string(l + 1) + ": device " +
                std::to_string(i + 1) + " holds " + std::to_string(rows) +
                " rows, fewer than the " + std::to_string(halo) +
                "-row halo its neighbor pulls");
          }
          const double bytes = halo * rb;
          cb.t_x[l][i] = bytes / cluster.bandwidth.require(i, i + 1);
          cb.xfer_bytes[l][i] = bytes;
          cb.xfer_kind[l][i] = TransferKind::HaloPull;
        }
      } else if (l == assign.first_fc && l > 0) {
        // Feature-map fragments converge on the aggregator.
        if (i != plan.aggregator && assign.fragments[i] > 0) {
          const double bytes = assign.fragments[i] * rb;
          cb.t_x[l][i] = bytes / cluster.bandwidth.require(i, plan.aggregator);
          cb.xfer_bytes[l][i] = bytes;
          cb.xfer_kind[l][i] = TransferKind::Aggregate;
        }
      }
    }
  }

  // Result returned from the aggregator, accounted in the last layer.
  if (scenario.result_bytes > 0) {
    cb.result_t = scenario.result_bytes /
                  cluster.bandwidth.require(plan.aggregator,
                                            scenario.result_device);
    cb.result_bytes = scenario.result_bytes;
    cb.t_x[layer_count - 1][plan.aggregator] += cb.result_t;
  }

  for (int l = 0; l < layer_count; ++l) {
    double step = 0;
    for (int i = 0; i < n; ++i) {
      cb.e_c[l][i] = compute_energy(cb.t_c[l][i], cluster.devices[i]);
      cb.e_x[l][i] = transmission_energy(cb.t_x[l][i], cluster.devices[i]);
      cb.e_c_total += cb.e_c[l][i];
      cb.e_x_total += cb.e_x[l][i];
      step = std::max(step, cb.t_c[l][i] + cb.t_x[l][i]);
    }
    cb.superstep[l] = step;
    cb.t_total += step;
  }
  return cb;
}

// Checks a plan against the partition constraints (padding threshold,
// nonnegative integers, row conservation, memory fit).  Returns an empty
// string when the plan is valid.
inline std::string plan_violation(const Scenario& scenario,
                                  const PartitionPlan& plan) {
  const int n = scenario.cluster.size();
  if (static_cast<int>(plan.rows.size()) != n) return "rows length mismatch";
  if (static_cast<int>(plan.lambda.size()) != n) return "lambda length mismatch";

  long long sum = 0;
  for (int i = 0; i < n; ++i) {
    if (plan.rows[i] < 0) {
      return "rows[" + std::to_string(i) + "] is negative";
    }
    sum += plan.rows[i];
  }
  const std::vector<Shape> shapes = propagate_shape(scenario.model);
  if (sum != shapes[0].h) {
    return "rows sum to " + std::to_string(sum) + ", expected " +
           std::to_string(shapes[0].h);
  }
  double lambda_sum = 0;
  for (double v : plan.lambda) {
    if (v < -1e-9) return "negative lambda entry";
    lambda_sum += v;
  }
  if (std::abs(lambda_sum - 1.0) > 1e-6) return "lambda does not sum to 1";

  const int threshold = halo_threshold_rows(scenario.model);
  int last_active = -1;
  for (int i = n - 1; i >= 0; --i) {
    if (plan.rows[i] > 0) {
      last_active = i;
      break;
    }
  }
  if (last_active < 0) return "no active device";
  for (int i = 0; i < n; ++i) {
    if (plan.rows[i] > 0 && i != last_active && plan.rows[i] < threshold) {
      return "rows[" + std::to_string(i) + "]=" + std::to_string(plan.rows[i]) +
             " is below the padding threshold of " + std::to_string(threshold);
    }
  }
  if (plan.aggregator < 0 || plan.aggregator >= n ||
      plan.rows[plan.aggregator] <= 0) {
    return "aggregator is not an active device";
  }

  // Memory constraint over every layer's workload.
  RowAssignment assign;
  try {
    assign = propagate_rows(scenario.model, shapes, plan.rows, plan.aggregator);
  } catch (const Error& e) {
    return e.what();
  }
  for (int l = 0; l < scenario.model.layer_count(); ++l) {
    for (int i = 0; i < n; ++i) {
      const double r_kb =
          workload_size(shapes[l], assign.rows[l][i], scenario.elem_bytes);
      if (r_kb > scenario.cluster.devices[i].m_kb + 1e-9) {
        return "layer " + std::to_string(l + 1) + " workload of " +
               std::to_string(r_kb) + " KB exceeds memory of device " +
               std::to_string(i + 1);
      }
    }
  }
  return "";
}

// Energy of the continuous relaxation at a fractional assignment: conv rows
// scale as lambda_i * H_l, the FC stage sits on the aggregator, and only
// transfers between active devices are charged.  This is the value reported
// as the P2 objective.
inline double relaxed_energy(const Scenario& scenario,
                             const std::vector<double>& lambda,
                             int aggregator) {
  const ModelDescriptor& model = scenario.model;
  const Cluster& cluster = scenario.cluster;
  const int n = cluster.size();
  const std::vector<Shape> shapes = propagate_shape(model);
  const int master = cluster.master;
  constexpr double kActive = 1e-12;

  int first_fc = -1;
  for (int l = 0; l < model.layer_count(); ++l) {
    if (model.layers[l].kind == LayerKind::FullyConnected) {
      first_fc = l;
      break;
    }
  }
  int last_active = -1;
  for (int i = n - 1; i >= 0; --i) {
    if (lambda[i] > kActive) {
      last_active = i;
      break;
    }
  }

  double energy = 0;
  for (int l = 0; l < model.layer_count(); ++l) {
    const LayerConfig& layer = model.layers[l];
    const Shape& shape = shapes[l];
    const double rb = detail::row_bytes(shape, scenario.elem_bytes);
    const int halo = halo_rows(layer);
    if (layer.kind == LayerKind::FullyConnected) {
      const double r_kb = workload_size(shape, shape.h, scenario.elem_bytes);
      const DeviceProfile& agg = cluster.devices[aggregator];
      energy += compute_energy(compute_time(r_kb, agg), agg);
      if (l == first_fc && l > 0) {
        for (int i = 0; i < n; ++i) {
          if (i == aggregator || lambda[i] <= kActive) continue;
          const double bytes = lambda[i] * shape.h * rb;
          energy += cluster.devices[i].p_x_watts * bytes /
                    cluster.bandwidth.require(i, aggregator);
        }
      }
      continue;
    }
    for (int i = 0; i < n; ++i) {
      if (lambda[i] <= kActive) continue;
      const DeviceProfile& dev = cluster.devices[i];
      const double r_kb = lambda[i] * shape.h * rb / 1024.0;
      energy += compute_energy(compute_time(r_kb, dev), dev);
      if (l == 0) {
        const double extra = (i != last_active) ? halo : 0;
        const double bytes = (lambda[i] * shape.h + extra) * rb;
        energy += dev.p_x_watts * bytes / cluster.bandwidth.require(master, i);
      } else if (halo > 0 && i + 1 < n && lambda[i + 1] > kActive) {
        energy += dev.p_x_watts * halo * rb / cluster.bandwidth.require(i, i + 1);
      }
    }
  }
  if (scenario.result_bytes > 0) {
    energy += cluster.devices[aggregator].p_x_watts * scenario.result_bytes /
              cluster.bandwidth.require(aggregator, scenario.result_device);
  }
  return energy;
}

}  // namespace coedge
