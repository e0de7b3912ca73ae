#pragma once

#include <string>
#include <vector>

#include "coedge/errors.hpp"

namespace coedge {

// Typical DDR3 memory bandwidth, used for a device delivering data to itself.
inline constexpr double kDefaultMemBandwidth = 12.8e9;  // bytes/s

// Resource tuple (rho, f, m, P^c, P^x) collected by offline profiling.
struct DeviceProfile {
  int id = 0;  // position in the cluster's device order
  std::string name;
  double rho = 0;        // computing intensity, cycles per KB of layer input
  double f_hz = 0;       // CPU frequency, cycles/s
  double m_kb = 0;       // memory available to inference workload, KB
  double p_c_watts = 0;  // computation power
  double p_x_watts = 0;  // transmission power
};

// Directional bandwidth matrix in bytes/s.  The diagonal is the memory
// bandwidth; zero means "no entry" and trips MissingBandwidth when used.
struct BandwidthMatrix {
  int n = 0;
  std::vector<double> b;

  BandwidthMatrix() = default;
  explicit BandwidthMatrix(int devices, double diagonal = kDefaultMemBandwidth)
      : n(devices), b(static_cast<size_t>(devices) * devices, 0.0) {
    for (int i = 0; i < devices; ++i) set(i, i, diagonal);
  }

  double at(int i, int j) const { return b[static_cast<size_t>(i) * n + j]; }
  void set(int i, int j, double v) { b[static_cast<size_t>(i) * n + j] = v; }

  double require(int i, int j) const {
    const double v = at(i, j);
    if (v <= 0) {
      throw MissingBandwidth("no bandwidth from device " +
                             std::to_string(i + 1) + " to device " +
                             std::to_string(j + 1));
    }
    return v;
  }
};

// Device order defines the neighbor relation used for halo pulls.
struct Cluster {
  std::vector<DeviceProfile> devices;
  BandwidthMatrix bandwidth;
  int master = 0;  // device index launching queries and distributing input

  int size() const { return static_cast<int>(devices.size()); }
};

inline void validate_cluster(const Cluster& cluster) {
  if (cluster.devices.empty()) {
    throw InvariantViolation("cluster: devices is empty");
  }
  for (size_t i = 0; i < cluster.devices.size(); ++i) {
    const DeviceProfile& d = cluster.devices[i];
    const std::string at = "devices[" + std::to_string(i) + "]";
    if (d.rho <= 0) throw InvariantViolation(at + ".rho must be > 0");
    if (d.f_hz <= 0) throw InvariantViolation(at + ".f_hz must be > 0");
    if (d.m_kb <= 0) throw InvariantViolation(at + ".m_kb must be > 0");
    if (d.p_c_watts < 0) throw InvariantViolation(at + ".p_c_watts must be >= 0");
    if (d.p_x_watts < 0) throw InvariantViolation(at + ".p_x_watts must be >= 0");
  }
  if (cluster.bandwidth.n != cluster.size()) {
    throw InvariantViolation("bandwidth matrix size does not match device count");
  }
  if (cluster.master < 0 || cluster.master >= cluster.size()) {
    throw InvariantViolation("master index out of range");
  }
}

// Inverse of the computation-time equation at single-device scope:
// rho = T * f / size, in cycles per KB.
inline double derive_intensity(double measured_latency_s, double f_hz,
                               double input_size_kb) {
  if (measured_latency_s <= 0 || f_hz <= 0 || input_size_kb <= 0) {
    throw NonPositiveInput("derive_intensity requires positive inputs");
  }
  return measured_latency_s * f_hz / input_size_kb;
}

}  // namespace coedge
