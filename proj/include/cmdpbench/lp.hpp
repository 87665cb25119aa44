#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "cmdpbench/polytope.hpp"

namespace cmdpbench {

// min c^T x  s.t.  eq rows =, le rows <=, 0 <= x <= upper (upper empty: all +inf).
struct LpProblem {
  int n = 0;
  std::vector<double> c;
  std::vector<LinearRow> eq;
  std::vector<LinearRow> le;
  std::vector<double> upper;  // optional per-variable upper bounds
};

struct LpSolution {
  enum class Status { Optimal, Infeasible, Unbounded, IterLimit };
  Status status = Status::IterLimit;
  std::vector<double> x;
  double objective = 0.0;
  double duality_gap = 0.0;
  double max_primal_residual = 0.0;
  double max_dual_residual = 0.0;
  int iterations = 0;
};

// Two-phase bounded-variable revised simplex, dense. The entering rule is
// Dantzig with a largest-pivot tie-break in the ratio test; after a long
// degenerate streak it switches to Bland's rule, which is cycle-free. A
// numerically collapsed basis triggers one deterministic retry in pure
// Bland mode. Sized for desk-scale programs; no sparsity.
class SimplexSolver {
 public:
  explicit SimplexSolver(const LpProblem& prob) : prob_(prob) { build_(); }

  LpSolution solve(int iter_limit = 50000) {
    try {
      return solve_(iter_limit, false);
    } catch (const std::runtime_error&) {
      build_();
      return solve_(iter_limit, true);
    }
  }

 private:
  LpSolution solve_(int iter_limit, bool bland) {
    bland_ = bland;
    LpSolution sol;
    // Phase 1: minimize the sum of artificials.
    std::vector<double> phase1_cost(ncols_, 0.0);
    for (int j = art_begin_; j < ncols_; ++j) phase1_cost[j] = 1.0;
    int it1 = iterate_(phase1_cost, iter_limit);
    if (it1 < 0) {
      sol.status = LpSolution::Status::IterLimit;
      return sol;
    }
    double infeas = 0.0;
    for (int i = 0; i < m_; ++i)
      if (basis_[i] >= art_begin_) infeas += xb_[i];
    if (infeas > 1e-8) {
      sol.status = LpSolution::Status::Infeasible;
      sol.iterations = it1;
      return sol;
    }
    // Artificials are pinned to zero from here on.
    for (int j = art_begin_; j < ncols_; ++j) ub_[j] = 0.0;

    std::vector<double> cost(ncols_, 0.0);
    for (int j = 0; j < prob_.n; ++j) cost[j] = prob_.c[j];
    int it2 = iterate_(cost, iter_limit);
    sol.iterations = it1 + std::abs(it2);
    if (it2 == -1) {
      sol.status = LpSolution::Status::IterLimit;
      return sol;
    }
    if (it2 == -2) {
      sol.status = LpSolution::Status::Unbounded;
      return sol;
    }
    sol.status = LpSolution::Status::Optimal;
    sol.x.assign(prob_.n, 0.0);
    std::vector<double> full = current_x_();
    for (int j = 0; j < prob_.n; ++j) sol.x[j] = full[j];
    sol.objective = 0.0;
    for (int j = 0; j < prob_.n; ++j) sol.objective += prob_.c[j] * sol.x[j];

    // Certificate: duals from the final basis.
    std::vector<double> y = duals_(cost);
    double dual_obj = 0.0;
    for (int i = 0; i < m_; ++i) dual_obj += y[i] * b_[i];
    double max_dual_res = 0.0;
    for (int j = 0; j < ncols_; ++j) {
      double d = cost[j] - dot_col_(y, j);
      if (std::isfinite(ub_[j])) {
        if (d < 0.0) dual_obj += d * ub_[j];
      } else {
        max_dual_res = std::max(max_dual_res, -d);
      }
    }
    sol.duality_gap = std::fabs(sol.objective - dual_obj);
    sol.max_dual_residual = max_dual_res;
    sol.max_primal_residual = primal_residual_(full);
    return sol;
  }

  static constexpr double kTol = 1e-9;
  static constexpr double kPivTol = 1e-8;

  void build_() {
    int n = prob_.n;
    m_ = static_cast<int>(prob_.eq.size() + prob_.le.size());
    int nslack = static_cast<int>(prob_.le.size());
    art_begin_ = n + nslack;
    ncols_ = art_begin_ + m_;
    a_.assign(static_cast<std::size_t>(m_) * ncols_, 0.0);
    b_.assign(m_, 0.0);
    ub_.assign(ncols_, std::numeric_limits<double>::infinity());
    for (int j = 0; j < n && j < static_cast<int>(prob_.upper.size()); ++j)
      ub_[j] = prob_.upper[j];

    int r = 0;
    for (const auto& row : prob_.eq) {
      for (auto& [j, c] : row.terms) at_(r, j) += c;
      b_[r] = row.rhs;
      ++r;
    }
    int s = 0;
    for (const auto& row : prob_.le) {
      for (auto& [j, c] : row.terms) at_(r, j) += c;
      at_(r, n + s) = 1.0;
      b_[r] = row.rhs;
      ++r;
      ++s;
    }
    for (int i = 0; i < m_; ++i) {
      if (b_[i] < 0.0) {
        for (int j = 0; j < art_begin_; ++j) at_(i, j) = -at_(i, j);
        b_[i] = -b_[i];
      }
      at_(i, art_begin_ + i) = 1.0;
    }
    basis_.resize(m_);
    for (int i = 0; i < m_; ++i) basis_[i] = art_begin_ + i;
    at_upper_.assign(ncols_, false);
    binv_.assign(static_cast<std::size_t>(m_) * m_, 0.0);
    for (int i = 0; i < m_; ++i) binv_[static_cast<std::size_t>(i) * m_ + i] = 1.0;
    xb_ = b_;
  }

  double& at_(int i, int j) { return a_[static_cast<std::size_t>(i) * ncols_ + j]; }
  double at_(int i, int j) const { return a_[static_cast<std::size_t>(i) * ncols_ + j]; }

  double dot_col_(const std::vector<double>& y, int j) const {
    double s = 0.0;
    for (int i = 0; i < m_; ++i) s += y[i] * at_(i, j);
    return s;
  }

  std::vector<double> duals_(const std::vector<double>& cost) const {
    std::vector<double> y(m_, 0.0);
    for (int i = 0; i < m_; ++i) {
      double cb = cost[basis_[i]];
      if (cb == 0.0) continue;
      for (int k = 0; k < m_; ++k) y[k] += cb * binv_[static_cast<std::size_t>(i) * m_ + k];
    }
    return y;
  }

  std::vector<double> current_x_() const {
    std::vector<double> x(ncols_, 0.0);
    for (int j = 0; j < ncols_; ++j)
      if (at_upper_[j]) x[j] = ub_[j];
    for (int i = 0; i < m_; ++i) x[basis_[i]] = xb_[i];
    return x;
  }

  double primal_residual_(const std::vector<double>& x) const {
    double worst = 0.0;
    for (int i = 0; i < m_; ++i) {
      double lhs = 0.0;
      for (int j = 0; j < ncols_; ++j) lhs += at_(i, j) * x[j];
      worst = std::max(worst, std::fabs(lhs - b_[i]));
    }
    return worst;
  }

  void recompute_xb_() {
    std::vector<double> rhs = b_;
    for (int j = 0; j < ncols_; ++j) {
      if (!at_upper_[j] || ub_[j] == 0.0) continue;
      for (int i = 0; i < m_; ++i) rhs[i] -= at_(i, j) * ub_[j];
    }
    for (int i = 0; i < m_; ++i) {
      double s = 0.0;
      for (int k = 0; k < m_; ++k) s += binv_[static_cast<std::size_t>(i) * m_ + k] * rhs[k];
      xb_[i] = s;
    }
  }

  // Rebuild binv_ from the basis columns by Gauss-Jordan with partial pivoting.
  void refactorize_() {
    std::vector<double> work(static_cast<std::size_t>(m_) * 2 * m_, 0.0);
    auto w = [&](int i, int j) -> double& { return work[static_cast<std::size_t>(i) * 2 * m_ + j]; };
    for (int i = 0; i < m_; ++i) {
      for (int k = 0; k < m_; ++k) w(i, k) = at_(i, basis_[k]);
      w(i, m_ + i) = 1.0;
    }
    for (int col = 0; col < m_; ++col) {
      int piv = col;
      for (int i = col + 1; i < m_; ++i)
        if (std::fabs(w(i, col)) > std::fabs(w(piv, col))) piv = i;
      if (std::fabs(w(piv, col)) < 1e-14) throw std::runtime_error("singular basis");
      if (piv != col)
        for (int j = 0; j < 2 * m_; ++j) std::swap(w(piv, j), w(col, j));
      double inv = 1.0 / w(col, col);
      for (int j = 0; j < 2 * m_; ++j) w(col, j) *= inv;
      for (int i = 0; i < m_; ++i) {
        if (i == col) continue;
        double f = w(i, col);
        if (f == 0.0) continue;
        for (int j = 0; j < 2 * m_; ++j) w(i, j) -= f * w(col, j);
      }
    }
    for (int i = 0; i < m_; ++i)
      for (int k = 0; k < m_; ++k) binv_[static_cast<std::size_t>(i) * m_ + k] = w(i, m_ + k);
  }

  // Returns pivot count >= 0, or -1 on iteration limit, -2 on unbounded.
  int iterate_(const std::vector<double>& cost, int iter_limit) {
    recompute_xb_();
    std::vector<bool> in_basis(ncols_, false);
    for (int i = 0; i < m_; ++i) in_basis[basis_[i]] = true;
    int pivots = 0;
    int degenerate_streak = 0;
    bool bland = bland_;
    for (int iter = 0; iter < iter_limit; ++iter) {
      std::vector<double> y = duals_(cost);
      int enter = -1;
      int dir = 0;  // +1 entering rises from lower bound, -1 falls from upper
      double best = -kTol;
      for (int j = 0; j < ncols_; ++j) {
        if (in_basis[j]) continue;
        if (ub_[j] == 0.0) continue;  // pinned
        double d = cost[j] - dot_col_(y, j);
        int dj;
        double score;
        if (!at_upper_[j] && d < -kTol) {
          dj = 1;
          score = d;
        } else if (at_upper_[j] && d > kTol) {
          dj = -1;
          score = -d;
        } else {
          continue;
        }
        if (bland) {
          enter = j;
          dir = dj;
          break;
        }
        if (score < best) {
          best = score;
          enter = j;
          dir = dj;
        }
      }
      if (enter < 0) return pivots;  // optimal for this cost

      std::vector<double> w(m_, 0.0);
      for (int i = 0; i < m_; ++i) {
        double s = 0.0;
        for (int k = 0; k < m_; ++k) s += binv_[static_cast<std::size_t>(i) * m_ + k] * at_(k, enter);
        w[i] = dir * s;  // x_B moves by -t*w as the entering var moves by t
      }

      double t_max = std::isfinite(ub_[enter]) ? ub_[enter] : std::numeric_limits<double>::infinity();
      int leave = -1;  // basis position; -1 means bound flip
      for (int i = 0; i < m_; ++i) {
        double bound_t = std::numeric_limits<double>::infinity();
        if (w[i] > kPivTol) {
          bound_t = std::max(0.0, xb_[i]) / w[i];
        } else if (w[i] < -kPivTol && std::isfinite(ub_[basis_[i]])) {
          bound_t = std::max(0.0, ub_[basis_[i]] - xb_[i]) / (-w[i]);
        }
        if (bound_t < t_max - 1e-9) {
          t_max = bound_t;
          leave = i;
        } else if (std::isfinite(bound_t) && bound_t <= t_max + 1e-9 && leave >= 0) {
          // Ties: largest pivot magnitude for stability, smallest variable id
          // in Bland mode for the anti-cycling guarantee.
          bool take = bland ? basis_[i] < basis_[leave]
                            : std::fabs(w[i]) > std::fabs(w[leave]);
          if (take) {
            t_max = std::min(t_max, bound_t);
            leave = i;
          }
        }
      }
      if (!std::isfinite(t_max)) return -2;
      if (t_max < 1e-12) {
        if (++degenerate_streak > 2 * m_ + 100) bland = true;
      } else {
        degenerate_streak = 0;
      }

      if (leave < 0) {
        at_upper_[enter] = !at_upper_[enter];  // bound flip
        recompute_xb_();
        continue;
      }

      int leaving_var = basis_[leave];
      // Leaving variable lands on the bound it ran into; basic vars always
      // carry at_upper_ = false.
      at_upper_[leaving_var] = (w[leave] < 0.0);
      at_upper_[enter] = false;
      in_basis[leaving_var] = false;
      in_basis[enter] = true;
      basis_[leave] = enter;
      // Eta update of binv_ using the undirected column.
      std::vector<double> wu(m_);
      for (int i = 0; i < m_; ++i) wu[i] = dir * w[i];
      double piv = wu[leave];
      if (std::fabs(piv) < kPivTol) {
        refactorize_();
      } else {
        for (int k = 0; k < m_; ++k) binv_[static_cast<std::size_t>(leave) * m_ + k] /= piv;
        for (int i = 0; i < m_; ++i) {
          if (i == leave) continue;
          double f = wu[i];
          if (f == 0.0) continue;
          for (int k = 0; k < m_; ++k)
            binv_[static_cast<std::size_t>(i) * m_ + k] -=
                f * binv_[static_cast<std::size_t>(leave) * m_ + k];
        }
      }
      ++pivots;
      if (pivots % 50 == 0) refactorize_();
      recompute_xb_();
    }
    return -1;
  }

  const LpProblem& prob_;
  int m_ = 0, ncols_ = 0, art_begin_ = 0;
  bool bland_ = false;
  std::vector<double> a_, b_, ub_, binv_, xb_;
  std::vector<int> basis_;
  std::vector<bool> at_upper_;
};

inline LpSolution solve_lp(const LpProblem& prob, int iter_limit = 50000) {
  SimplexSolver solver(prob);
  return solver.solve(iter_limit);
}

// Phase-1 feasibility of a linear system over x >= 0.
inline bool system_feasible(int n, const std::vector<LinearRow>& eq,
                            const std::vector<LinearRow>& le) {
  LpProblem prob;
  prob.n = n;
  prob.c.assign(n, 0.0);
  prob.eq = eq;
  prob.le = le;
  LpSolution sol = solve_lp(prob);
  return sol.status == LpSolution::Status::Optimal;
}

}  // namespace cmdpbench
