#pragma once

// Shared helpers for the test suites: fixture paths, scenario builders,
// randomized generators, and the brute-force LP oracle used to cross-check
// the simplex implementation.

#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "coedge/coedge.hpp"

namespace testsup {

inline std::string fixture(const std::string& rel) {
  return std::string(FIXTURE_DIR) + "/" + rel;
}

inline coedge::DeviceProfile device(const std::string& name, double rho,
                                    double f_hz, double p_c, double p_x,
                                    double m_kb = 1e7) {
  coedge::DeviceProfile d;
  d.name = name;
  d.rho = rho;
  d.f_hz = f_hz;
  d.m_kb = m_kb;
  d.p_c_watts = p_c;
  d.p_x_watts = p_x;
  return d;
}

inline coedge::Cluster uniform_cluster(std::vector<coedge::DeviceProfile> devs,
                                       double pair_bw) {
  coedge::Cluster cluster;
  cluster.devices = std::move(devs);
  const int n = cluster.size();
  cluster.bandwidth = coedge::BandwidthMatrix(n);
  for (int i = 0; i < n; ++i) {
    cluster.devices[i].id = i;
    for (int j = 0; j < n; ++j) {
      if (i != j) cluster.bandwidth.set(i, j, pair_bw);
    }
  }
  cluster.master = 0;
  return cluster;
}

inline coedge::LayerConfig conv(int k, int c_in, int c_out, int s = 1,
                                int p = -1) {
  coedge::LayerConfig l;
  l.kind = coedge::LayerKind::Conv;
  l.k = k;
  l.c_in = c_in;
  l.c_out = c_out;
  l.s = s;
  l.p = p < 0 ? k / 2 : p;
  return l;
}

inline coedge::LayerConfig fc(int c_in, int c_out) {
  coedge::LayerConfig l;
  l.kind = coedge::LayerKind::FullyConnected;
  l.c_in = c_in;
  l.c_out = c_out;
  return l;
}

inline coedge::ModelDescriptor model(const std::string& name, int h, int w,
                                     int c,
                                     std::vector<coedge::LayerConfig> layers) {
  coedge::ModelDescriptor m;
  m.name = name;
  m.input_shape = {h, w, c};
  m.layers = std::move(layers);
  return m;
}

// Random "same"-convolution stacks with an optional FC head; the anchor rule
// is exact on these, which keeps relaxation-vs-integer comparisons tight.
inline coedge::ModelDescriptor random_same_conv_model(std::mt19937_64& rng,
                                                      int max_h = 32,
                                                      int max_layers = 4) {
  auto pick = [&](int lo, int hi) {
    return std::uniform_int_distribution<int>(lo, hi)(rng);
  };
  const int h = pick(8, max_h);
  const int w = pick(4, 24);
  int channels = pick(1, 3);
  coedge::ModelDescriptor m = model("rand", h, w, channels, {});
  const int conv_layers = pick(1, max_layers);
  for (int l = 0; l < conv_layers; ++l) {
    const int k = 1 + 2 * pick(0, 2);
    const int next = pick(1, 6);
    m.layers.push_back(conv(k, channels, next));
    channels = next;
  }
  if (pick(0, 1) == 1) {
    m.layers.push_back(fc(channels, pick(2, 12)));
  }
  return m;
}

inline coedge::Scenario random_scenario(std::mt19937_64& rng, int max_devices,
                                        int max_h = 32) {
  auto pick = [&](int lo, int hi) {
    return std::uniform_int_distribution<int>(lo, hi)(rng);
  };
  auto uniform = [&](double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
  };
  coedge::Scenario s;
  s.model = random_same_conv_model(rng, max_h);
  const int n = pick(1, max_devices);
  std::vector<coedge::DeviceProfile> devs;
  for (int i = 0; i < n; ++i) {
    devs.push_back(device("dev" + std::to_string(i + 1), uniform(2e5, 5e5),
                          uniform(1.2e9, 2.4e9), uniform(2, 6),
                          uniform(0.1, 0.5)));
  }
  s.cluster = uniform_cluster(std::move(devs), uniform(2e6, 2e7));
  s.cluster.master = pick(0, n - 1);
  s.result_device = pick(0, n - 1);
  s.elem_bytes = pick(0, 1) ? 1 : 4;
  s.result_bytes = 2048;
  s.deadline_s = 10;  // callers tighten when the deadline should bind
  return s;
}

// A random integer partition that clears the padding threshold.
inline std::vector<int> random_rows(std::mt19937_64& rng,
                                    const coedge::Scenario& s) {
  auto uniform = [&](double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
  };
  const int n = s.cluster.size();
  const int h = s.model.input_shape.h;
  const int tau = coedge::halo_threshold_rows(s.model);
  std::vector<double> w(n);
  for (double& v : w) v = uniform(0.05, 1.0);
  const double total = std::accumulate(w.begin(), w.end(), 0.0);
  for (double& v : w) v /= total;
  return coedge::round_plan(w, h, std::vector<int>(n, tau));
}

// ---------------------------------------------------------------------------
// Brute-force LP oracle: enumerate the basic solutions of the standard-form
// system [A_ub | I ; A_eq | 0] x = b and keep the best feasible one.
// Independent of the simplex path it cross-checks.
// ---------------------------------------------------------------------------

struct VertexOracleResult {
  bool feasible = false;
  bool bounded = true;  // meaningful only when feasible
  double objective = 0;
};

inline VertexOracleResult vertex_enumerate(const coedge::lp::LPProblem& p) {
  const int m_ub = static_cast<int>(p.a_ub.size());
  const int m = m_ub + static_cast<int>(p.a_eq.size());
  const int cols = p.n + m_ub;

  auto column = [&](int j, int row) -> double {
    if (j < p.n) {
      return row < m_ub ? p.a_ub[row][j] : p.a_eq[row - m_ub][j];
    }
    return (row < m_ub && j - p.n == row) ? 1.0 : 0.0;
  };
  auto rhs = [&](int row) {
    return row < m_ub ? p.b_ub[row] : p.b_eq[row - m_ub];
  };

  VertexOracleResult best;

  // Iterate over all m-subsets of the columns.
  std::vector<int> idx(m);
  std::iota(idx.begin(), idx.end(), 0);
  bool done = m > cols;
  while (!done) {
    // Solve the m x m system for this basis by Gaussian elimination.
    std::vector<std::vector<double>> a(m, std::vector<double>(m + 1, 0.0));
    for (int r = 0; r < m; ++r) {
      for (int c = 0; c < m; ++c) a[r][c] = column(idx[c], r);
      a[r][m] = rhs(r);
    }
    bool singular = false;
    for (int c = 0; c < m && !singular; ++c) {
      int piv = -1;
      double best_abs = 1e-9;
      for (int r = c; r < m; ++r) {
        if (std::abs(a[r][c]) > best_abs) {
          best_abs = std::abs(a[r][c]);
          piv = r;
        }
      }
      if (piv < 0) {
        singular = true;
        break;
      }
      std::swap(a[c], a[piv]);
      for (int r = 0; r < m; ++r) {
        if (r == c) continue;
        const double f = a[r][c] / a[c][c];
        if (f == 0.0) continue;
        for (int cc = c; cc <= m; ++cc) a[r][cc] -= f * a[c][cc];
      }
    }
    if (!singular) {
      std::vector<double> x(cols, 0.0);
      bool ok = true;
      for (int c = 0; c < m; ++c) {
        const double v = a[c][m] / a[c][c];
        if (v < -1e-7) {
          ok = false;
          break;
        }
        x[idx[c]] = v;
      }
      if (ok) {
        // Inequality rows not in the basis must still hold with slack >= 0.
        for (int r = 0; r < m_ub && ok; ++r) {
          double lhs = 0;
          for (int j = 0; j < p.n; ++j) lhs += p.a_ub[r][j] * x[j];
          if (lhs > p.b_ub[r] + 1e-6) ok = false;
        }
        for (size_t r = 0; r < p.a_eq.size() && ok; ++r) {
          double lhs = 0;
          for (int j = 0; j < p.n; ++j) lhs += p.a_eq[r][j] * x[j];
          if (std::abs(lhs - p.b_eq[r]) > 1e-6) ok = false;
        }
        if (ok) {
          double obj = 0;
          for (int j = 0; j < p.n; ++j) obj += p.c[j] * x[j];
          if (!best.feasible || obj < best.objective) {
            best.feasible = true;
            best.objective = obj;
          }
        }
      }
    }
    // next combination
    int i = m - 1;
    while (i >= 0 && idx[i] == cols - m + i) --i;
    if (i < 0) {
      done = true;
    } else {
      ++idx[i];
      for (int j = i + 1; j < m; ++j) idx[j] = idx[j - 1] + 1;
    }
  }
  return best;
}

// Random feasible, bounded LP: b >= 0 keeps x = 0 feasible, and a box row
// sum(x) <= U keeps any negative objective direction bounded.
inline coedge::lp::LPProblem random_lp(std::mt19937_64& rng, int max_n = 12,
                                       int max_m = 6) {
  auto pick = [&](int lo, int hi) {
    return std::uniform_int_distribution<int>(lo, hi)(rng);
  };
  auto uniform = [&](double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
  };
  coedge::lp::LPProblem p;
  p.n = pick(2, max_n);
  const int m = pick(1, max_m);
  for (int r = 0; r < m; ++r) {
    std::vector<double> row(p.n);
    for (double& v : row) v = uniform(-2, 2);
    p.a_ub.push_back(std::move(row));
    p.b_ub.push_back(uniform(0.5, 4));
  }
  std::vector<double> box(p.n, 1.0);
  p.a_ub.push_back(std::move(box));
  p.b_ub.push_back(uniform(2, 10));
  p.c.resize(p.n);
  for (double& v : p.c) v = uniform(-3, 3);
  return p;
}

}  // namespace testsup
