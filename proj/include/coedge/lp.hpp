#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "coedge/errors.hpp"

namespace coedge::lp {

// All solver tolerances in one place.
struct Tolerances {
  double feasibility = 1e-7;    // residual bound for Optimal status
  double pivot = 1e-11;         // smallest usable pivot element
  double reduced_cost = 1e-9;   // optimality cutoff
  double objective_rel = 1e-6;  // comparison tolerance for tests/oracles
};

inline constexpr Tolerances kDefaultTolerances{};

// min c.x  s.t.  a_ub.x <= b_ub,  a_eq.x = b_eq,  x >= 0
struct LPProblem {
  int n = 0;
  std::vector<std::vector<double>> a_ub;
  std::vector<double> b_ub;
  std::vector<std::vector<double>> a_eq;
  std::vector<double> b_eq;
  std::vector<double> c;

  int rows() const {
    return static_cast<int>(a_ub.size() + a_eq.size());
  }
};

enum class Status { Optimal, Infeasible, Unbounded };

inline const char* to_string(Status s) {
  switch (s) {
    case Status::Optimal: return "optimal";
    case Status::Infeasible: return "infeasible";
    case Status::Unbounded: return "unbounded";
  }
  return "unknown";
}

struct LPSolution {
  Status status = Status::Infeasible;
  std::vector<double> x;
  double objective = 0;
  int iterations = 0;
};

namespace detail {

// Full-tableau two-phase simplex.  Dantzig's rule with lowest-index tie
// breaking; switches to Bland's rule when the objective stalls, which
// guarantees termination on degenerate instances.  Rows whose slack can
// start basic skip phase 1 entirely, which keeps large benign right-hand
// sides (e.g. loose memory limits) out of the arithmetic.
class SimplexTableau {
 public:
  SimplexTableau(const LPProblem& p, const Tolerances& tol)
      : tol_(tol), n_(p.n), m_ub_(static_cast<int>(p.a_ub.size())),
        m_(p.rows()), cols_(p.n + m_ub_ + p.rows() + 1) {
    rows_.assign(m_, std::vector<double>(cols_, 0.0));
    basis_.resize(m_);
    artificial_.assign(m_, false);
    for (int i = 0; i < m_; ++i) {
      const bool is_ub = i < m_ub_;
      const std::vector<double>& src = is_ub ? p.a_ub[i] : p.a_eq[i - m_ub_];
      double rhs = is_ub ? p.b_ub[i] : p.b_eq[i - m_ub_];
      double sign = 1.0;
      if (rhs < 0) {
        sign = -1.0;
        rhs = -rhs;
      }
      for (int j = 0; j < n_; ++j) rows_[i][j] = sign * src[j];
      if (is_ub) rows_[i][n_ + i] = sign;
      rows_[i][cols_ - 1] = rhs;
      if (is_ub && sign > 0) {
        basis_[i] = n_ + i;  // slack starts basic
      } else {
        rows_[i][n_ + m_ub_ + i] = 1.0;
        basis_[i] = n_ + m_ub_ + i;
        artificial_[i] = true;
      }
    }
  }

  LPSolution run(const LPProblem& p) {
    LPSolution sol;

    // Phase 1: minimize the sum of the artificials that were needed.
    z_.assign(cols_, 0.0);
    double infeasibility = 0;
    for (int i = 0; i < m_; ++i) {
      if (!artificial_[i]) continue;
      for (int j = 0; j < cols_; ++j) z_[j] -= rows_[i][j];
      infeasibility += rows_[i][cols_ - 1];
    }
    for (int i = 0; i < m_; ++i) {
      if (artificial_[i]) z_[n_ + m_ub_ + i] = 0.0;
    }
    allow_artificials_ = true;
    const bool any_artificial =
        std::any_of(artificial_.begin(), artificial_.end(),
                    [](bool a) { return a; });
    if (any_artificial && !iterate(sol)) {
      throw NumericalBreakdown("phase-1 simplex did not terminate");
    }
    if (-z_[cols_ - 1] > tol_.feasibility * std::max(1.0, infeasibility)) {
      sol.status = Status::Infeasible;
      return sol;
    }
    drive_out_artificials();
    allow_artificials_ = false;

    // Phase 2: minimize the real objective.
    z_.assign(cols_, 0.0);
    for (int j = 0; j < n_; ++j) z_[j] = p.c[j];
    for (int i = 0; i < m_; ++i) {
      if (basis_[i] < n_ && p.c[basis_[i]] != 0.0) {
        const double cb = p.c[basis_[i]];
        for (int j = 0; j < cols_; ++j) z_[j] -= cb * rows_[i][j];
      }
    }
    stall_ = 0;
    bland_ = false;
    if (!iterate(sol)) {
      sol.status = Status::Unbounded;
      return sol;
    }

    sol.status = Status::Optimal;
    sol.x.assign(n_, 0.0);
    for (int i = 0; i < m_; ++i) {
      if (basis_[i] < n_) sol.x[basis_[i]] = rows_[i][cols_ - 1];
    }
    if (!feasible_within_tolerance(p, sol.x)) {
      refine(p, sol.x);
    }
    sol.objective = 0;
    for (int j = 0; j < n_; ++j) sol.objective += p.c[j] * sol.x[j];
    verify_feasible(p, sol.x);
    return sol;
  }

 private:
  // Returns false when the entering column proves the problem unbounded.
  bool iterate(LPSolution& sol) {
    double last_obj = std::numeric_limits<double>::infinity();
    for (;;) {
      if (++sol.iterations > kMaxIterations) {
        throw NumericalBreakdown("simplex iteration cap exceeded");
      }
      const int limit = allow_artificials_ ? cols_ - 1 : n_ + m_ub_;
      int entering = -1;
      double best = -tol_.reduced_cost;
      for (int j = 0; j < limit; ++j) {
        if (z_[j] < best) {
          entering = j;
          if (bland_) break;  // lowest index wins
          best = z_[j];
        }
      }
      if (entering < 0) return true;  // optimal for this phase

      int leaving = -1;
      double best_ratio = 0;
      double best_pos = 0;
      for (int i = 0; i < m_; ++i) {
        const double a = rows_[i][entering];
        if (a > tol_.pivot) {
          const double ratio = rows_[i][cols_ - 1] / a;
          if (leaving < 0 || ratio < best_ratio - 1e-12) {
            leaving = i;
            best_ratio = ratio;
          } else if (ratio <= best_ratio + 1e-12) {
            // Near-tie: Bland's rule needs the lowest basis index, otherwise
            // prefer the larger pivot element to limit error growth.
            if (bland_ ? basis_[i] < basis_[leaving]
                       : a > rows_[leaving][entering]) {
              leaving = i;
              best_ratio = std::min(best_ratio, ratio);
            }
          }
        } else if (a > best_pos) {
          best_pos = a;
        }
      }
      if (leaving < 0) {
        if (best_pos > 0 && bland_) {
          throw NumericalBreakdown("pivot below tolerance under Bland's rule");
        }
        return false;  // unbounded direction
      }
      pivot(leaving, entering);

      const double obj = -z_[cols_ - 1];
      if (obj < last_obj - 1e-12) {
        stall_ = 0;
        last_obj = obj;
      } else if (++stall_ > kStallLimit) {
        bland_ = true;
      }
    }
  }

  void pivot(int row, int col) {
    const double inv = 1.0 / rows_[row][col];
    for (int j = 0; j < cols_; ++j) rows_[row][j] *= inv;
    rows_[row][col] = 1.0;
    for (int i = 0; i < m_; ++i) {
      if (i == row) continue;
      const double f = rows_[i][col];
      if (f == 0.0) continue;
      for (int j = 0; j < cols_; ++j) rows_[i][j] -= f * rows_[row][j];
      rows_[i][col] = 0.0;
    }
    const double zf = z_[col];
    if (zf != 0.0) {
      for (int j = 0; j < cols_; ++j) z_[j] -= zf * rows_[row][j];
      z_[col] = 0.0;
    }
    basis_[row] = col;
  }

  void drive_out_artificials() {
    for (int i = 0; i < m_; ++i) {
      if (basis_[i] < n_ + m_ub_) continue;
      int col = -1;
      for (int j = 0; j < n_ + m_ub_; ++j) {
        if (std::abs(rows_[i][j]) > tol_.pivot) {
          col = j;
          break;
        }
      }
      // A redundant row keeps its artificial basic at value zero.
      if (col >= 0) pivot(i, col);
    }
  }

  // Re-solves the final basis against the original data with partially
  // pivoted elimination, discarding any drift the pivot chain accumulated.
  void refine(const LPProblem& p, std::vector<double>& x) const {
    auto original = [&](int row, int col) -> double {
      // Column `col` of [A | slacks | artificials] in original orientation.
      if (col < n_) {
        return row < m_ub_ ? p.a_ub[row][col] : p.a_eq[row - m_ub_][col];
      }
      if (col < n_ + m_ub_) {
        return row == col - n_ ? 1.0 : 0.0;
      }
      // Artificials survive only on redundant rows, pinned at zero.
      const int art_row = col - n_ - m_ub_;
      if (row != art_row) return 0.0;
      const double rhs = row < m_ub_ ? p.b_ub[row] : p.b_eq[row - m_ub_];
      return rhs < 0 ? -1.0 : 1.0;
    };
    std::vector<std::vector<double>> a(m_, std::vector<double>(m_ + 1, 0.0));
    for (int r = 0; r < m_; ++r) {
      for (int c = 0; c < m_; ++c) a[r][c] = original(r, basis_[c]);
      a[r][m_] = r < m_ub_ ? p.b_ub[r] : p.b_eq[r - m_ub_];
    }
    for (int c = 0; c < m_; ++c) {
      int piv = -1;
      double best = tol_.pivot;
      for (int r = c; r < m_; ++r) {
        if (std::abs(a[r][c]) > best) {
          best = std::abs(a[r][c]);
          piv = r;
        }
      }
      if (piv < 0) return;  // singular: keep the tableau's solution
      std::swap(a[c], a[piv]);
      for (int r = 0; r < m_; ++r) {
        if (r == c) continue;
        const double f = a[r][c] / a[c][c];
        if (f == 0.0) continue;
        for (int cc = c; cc <= m_; ++cc) a[r][cc] -= f * a[c][cc];
      }
    }
    std::vector<double> values(m_);
    for (int c = 0; c < m_; ++c) values[c] = a[c][m_] / a[c][c];
    std::fill(x.begin(), x.end(), 0.0);
    for (int c = 0; c < m_; ++c) {
      if (basis_[c] < n_) x[basis_[c]] = std::max(0.0, values[c]);
    }
  }

  bool feasible_within_tolerance(const LPProblem& p,
                                 const std::vector<double>& x) const {
    for (double v : x) {
      if (v < -1e-9) return false;
    }
    auto residual = [&](const std::vector<double>& row, double rhs) {
      double lhs = 0;
      double scale = 1.0;
      for (int j = 0; j < p.n; ++j) {
        lhs += row[j] * x[j];
        scale = std::max(scale, std::abs(row[j]));
      }
      return (lhs - rhs) / scale;
    };
    for (size_t i = 0; i < p.a_ub.size(); ++i) {
      if (residual(p.a_ub[i], p.b_ub[i]) > tol_.feasibility) return false;
    }
    for (size_t i = 0; i < p.a_eq.size(); ++i) {
      if (std::abs(residual(p.a_eq[i], p.b_eq[i])) > tol_.feasibility) {
        return false;
      }
    }
    return true;
  }

  void verify_feasible(const LPProblem& p, const std::vector<double>& x) const {
    if (!feasible_within_tolerance(p, x)) {
      throw NumericalBreakdown("solution residual above tolerance");
    }
  }

  static constexpr int kMaxIterations = 200000;
  static constexpr int kStallLimit = 64;

  Tolerances tol_;
  int n_;
  int m_ub_;
  int m_;
  int cols_;
  std::vector<std::vector<double>> rows_;
  std::vector<double> z_;
  std::vector<int> basis_;
  std::vector<bool> artificial_;
  bool allow_artificials_ = true;
  int stall_ = 0;
  bool bland_ = false;
};

}  // namespace detail

inline LPSolution solve(const LPProblem& problem,
                        const Tolerances& tol = kDefaultTolerances) {
  if (problem.n <= 0) throw InvariantViolation("LP has no variables");
  for (const auto& row : problem.a_ub) {
    if (static_cast<int>(row.size()) != problem.n) {
      throw InvariantViolation("LP inequality row width mismatch");
    }
  }
  for (const auto& row : problem.a_eq) {
    if (static_cast<int>(row.size()) != problem.n) {
      throw InvariantViolation("LP equality row width mismatch");
    }
  }
  if (static_cast<int>(problem.c.size()) != problem.n ||
      problem.b_ub.size() != problem.a_ub.size() ||
      problem.b_eq.size() != problem.a_eq.size()) {
    throw InvariantViolation("LP dimension mismatch");
  }
  for (double v : problem.c) {
    if (!std::isfinite(v)) throw InvariantViolation("LP objective not finite");
  }
  detail::SimplexTableau tableau(problem, tol);
  return tableau.run(problem);
}

}  // namespace coedge::lp
