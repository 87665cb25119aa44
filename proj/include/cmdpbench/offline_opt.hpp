#pragma once

#include <optional>
#include <vector>

#include "cmdpbench/lp.hpp"
#include "cmdpbench/occupancy.hpp"

namespace cmdpbench {

struct OfflineOptResult {
  enum class Status { Optimal, Infeasible };
  Status status = Status::Infeasible;
  double value = 0.0;
  OccupancyMeasure q;
  double duality_gap = 0.0;
  double max_residual = 0.0;
};

// Offline baseline: min loss^T q over the polytope subject to G^T q <= alpha.
// loss is pair-indexed; G has one pair-indexed column per constraint.
inline OfflineOptResult solve_offline_opt(const std::vector<double>& loss_pairs,
                                          const std::vector<std::vector<double>>& cost_columns,
                                          const std::vector<double>& alpha,
                                          const OccupancyPolytope& polytope) {
  const auto& sp = *polytope.space();
  ConstraintSystem sys = polytope.constraints();
  LpProblem prob;
  prob.n = sys.n;
  prob.c.assign(sys.n, 0.0);
  LinearRow lrow = cost_row(sp, loss_pairs, 0.0);
  for (auto& [j, c] : lrow.terms) prob.c[j] = c;
  prob.eq = sys.eq;
  prob.le = sys.ineq;
  for (std::size_t i = 0; i < alpha.size(); ++i)
    prob.le.push_back(cost_row(sp, cost_columns[i], alpha[i]));

  LpSolution sol = solve_lp(prob);
  OfflineOptResult out;
  if (sol.status == LpSolution::Status::Infeasible) return out;
  if (sol.status != LpSolution::Status::Optimal)
    throw std::runtime_error("offline LP did not converge");
  out.status = OfflineOptResult::Status::Optimal;
  out.value = sol.objective;
  out.q = OccupancyMeasure(polytope.space(), sol.x);
  out.duality_gap = sol.duality_gap;
  out.max_residual = sol.max_primal_residual;
  return out;
}

// Slater margin: max over valid occupancies of min_i [alpha_i - gbar_i^T q],
// solved as an LP with one extra shifted variable. Negative values mean the
// instance is infeasible even in the weak sense.
inline double slater_margin(const std::vector<std::vector<double>>& cost_columns,
                            const std::vector<double>& alpha, const OccupancyPolytope& polytope,
                            OccupancyMeasure* argmax_q = nullptr) {
  const auto& sp = *polytope.space();
  ConstraintSystem sys = polytope.constraints();
  double L = sp.horizon();
  int rho_var = sys.n;  // rho_shifted = rho + L in [0, 2L]
  LpProblem prob;
  prob.n = sys.n + 1;
  prob.c.assign(prob.n, 0.0);
  prob.c[rho_var] = -1.0;
  prob.eq = sys.eq;
  prob.le = sys.ineq;
  for (std::size_t i = 0; i < alpha.size(); ++i) {
    LinearRow row = cost_row(sp, cost_columns[i], alpha[i] + L);
    row.terms.push_back({rho_var, 1.0});
    prob.le.push_back(std::move(row));
  }
  prob.upper.assign(prob.n, std::numeric_limits<double>::infinity());
  prob.upper[rho_var] = 2.0 * L;
  LpSolution sol = solve_lp(prob);
  if (sol.status != LpSolution::Status::Optimal)
    throw std::runtime_error("slater margin LP failed");
  if (argmax_q != nullptr) {
    std::vector<double> q(sol.x.begin(), sol.x.begin() + sys.n);
    *argmax_q = OccupancyMeasure(polytope.space(), std::move(q));
  }
  return sol.x[rho_var] - L;
}

}  // namespace cmdpbench
