#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "cmdpbench/estimation.hpp"
#include "cmdpbench/lp.hpp"
#include "cmdpbench/polytope.hpp"

namespace cmdpbench {

// Unnormalized KL divergence D(q||q') = sum q ln(q/q') - sum(q - q').
inline double unnormalized_kl(std::span<const double> q, std::span<const double> q_ref) {
  double d = 0.0;
  for (std::size_t i = 0; i < q.size(); ++i) {
    if (q[i] > 0.0) d += q[i] * std::log(q[i] / q_ref[i]);
    d -= q[i] - q_ref[i];
  }
  return d;
}

// Multiplicative OMD step: q~(x,a,x') = q(x,a,x') * exp(-eta * loss(x,a)).
inline std::vector<double> omd_weight_update(const OccupancyMeasure& q_hat,
                                             std::span<const double> loss_pairs, double eta) {
  const auto& sp = *q_hat.space;
  std::vector<double> out(q_hat.q);
  for (int x = 0; x < sp.num_states(); ++x) {
    if (sp.layer_of(x) == sp.horizon()) continue;
    for (int a = 0; a < sp.num_actions(); ++a) {
      double f = std::exp(-eta * loss_pairs[sp.pair_id(x, a)]);
      if (f == 1.0) continue;
      int base = sp.triple_base(x, a);
      for (int j = 0; j < sp.succ_count(x); ++j) out[base + j] *= f;
    }
  }
  return out;
}

struct ProjectionResult {
  enum class Status { Feasible, Infeasible, SolverFailure };
  Status status = Status::SolverFailure;
  OccupancyMeasure q;
  double objective = 0.0;
  double max_violation = 0.0;
  double complementarity = 0.0;
  int iterations = 0;
  std::vector<int> boundary_triples;  // coordinates driven to (numerical) zero
};

namespace detail {

constexpr double kFloor = 1e-300;
constexpr double kDeltaCap = 690.0;

// Root of f(d) = sum_j a_j q_j exp(-d a_j) - rhs, which is strictly
// decreasing in d. Returns the capped root; callers re-cycle until residuals
// settle, so a capped step only delays convergence.
inline double row_root(const LinearRow& row, const std::vector<double>& q) {
  auto f = [&](double d) {
    double s = 0.0;
    for (auto& [j, c] : row.terms) s += c * q[j] * std::exp(-d * c);
    return s - row.rhs;
  };
  double f0 = f(0.0);
  if (std::fabs(f0) < 1e-300) return 0.0;
  double lo = 0.0, hi = 0.0;
  if (f0 > 0.0) {
    double step = 1.0;
    hi = step;
    while (f(hi) > 0.0) {
      step *= 2.0;
      hi = step;
      if (hi >= kDeltaCap) return kDeltaCap;
    }
    lo = hi / 2.0 == 0.0 ? 0.0 : hi / 2.0;
    if (f(lo) < 0.0) lo = 0.0;
  } else {
    double step = 1.0;
    lo = -step;
    while (f(lo) < 0.0) {
      step *= 2.0;
      lo = -step;
      if (lo <= -kDeltaCap) return -kDeltaCap;
    }
    hi = lo / 2.0;
    if (f(hi) > 0.0) hi = 0.0;
  }
  // Safeguarded Newton within [lo, hi].
  double d = 0.5 * (lo + hi);
  for (int it = 0; it < 100; ++it) {
    double val = 0.0, slope = 0.0;
    for (auto& [j, c] : row.terms) {
      double e = c * q[j] * std::exp(-d * c);
      val += e;
      slope -= c * e;
    }
    val -= row.rhs;
    if (val > 0.0)
      lo = d;
    else
      hi = d;
    double next = slope != 0.0 ? d - val / slope : d;
    if (!(next > lo) || !(next < hi)) next = 0.5 * (lo + hi);
    if (std::fabs(next - d) < 1e-15 * (1.0 + std::fabs(d))) return next;
    d = next;
  }
  return d;
}

inline void apply_step(const LinearRow& row, double delta, std::vector<double>& q) {
  if (delta == 0.0) return;
  for (auto& [j, c] : row.terms) {
    q[j] *= std::exp(-delta * c);
    if (q[j] < kFloor) q[j] = kFloor;
  }
}

// True when every coefficient is +1 (layer-normalization rows).
inline bool is_scaling_row(const LinearRow& row) {
  for (auto& [j, c] : row.terms)
    if (c != 1.0) return false;
  return true;
}

// True when coefficients are exactly +/-1 (flow rows).
inline bool is_flow_row(const LinearRow& row) {
  for (auto& [j, c] : row.terms)
    if (c != 1.0 && c != -1.0) return false;
  return row.rhs == 0.0;
}

struct DualAscent {
  const std::vector<LinearRow>& eq;
  const std::vector<LinearRow>& ineq;
  std::vector<double> q;
  std::vector<double> mu;  // one dual per inequality, kept >= 0
  int cycles = 0;

  DualAscent(const std::vector<LinearRow>& e, const std::vector<LinearRow>& i,
             std::vector<double> start)
      : eq(e), ineq(i), q(std::move(start)), mu(i.size(), 0.0) {}

  void equality_pass() {
    for (const auto& row : eq) {
      if (is_scaling_row(row)) {
        double v = 0.0;
        for (auto& [j, c] : row.terms) v += q[j];
        if (v <= 0.0 || row.rhs <= 0.0) continue;
        double scale = row.rhs / v;
        for (auto& [j, c] : row.terms) q[j] = std::max(kFloor, q[j] * scale);
      } else if (is_flow_row(row)) {
        double out = 0.0, in = 0.0;
        for (auto& [j, c] : row.terms) (c > 0.0 ? out : in) += q[j];
        if (out <= 0.0 || in <= 0.0) continue;
        double s = std::sqrt(in / out);  // out *= s, in /= s balances the row
        for (auto& [j, c] : row.terms)
          q[j] = std::max(kFloor, c > 0.0 ? q[j] * s : q[j] / s);
      } else {
        apply_step(row, row_root(row, q), q);
      }
    }
  }

  void inequality_pass() {
    for (std::size_t i = 0; i < ineq.size(); ++i) {
      const auto& row = ineq[i];
      double v = row.dot(q);
      if (mu[i] == 0.0 && v <= row.rhs) continue;
      double root = row_root(row, q);
      double delta = std::max(-mu[i], root);
      mu[i] += delta;
      apply_step(row, delta, q);
    }
  }

  double max_violation() const {
    double worst = 0.0;
    for (const auto& row : eq) worst = std::max(worst, std::fabs(row.dot(q) - row.rhs));
    for (const auto& row : ineq) worst = std::max(worst, row.dot(q) - row.rhs);
    return worst;
  }

  double complementarity() const {
    double worst = 0.0;
    for (std::size_t i = 0; i < ineq.size(); ++i)
      worst = std::max(worst, mu[i] * std::max(0.0, ineq[i].rhs - ineq[i].dot(q)));
    return worst;
  }

  bool run(int max_cycles, double feas_tol, double comp_tol) {
    for (cycles = 0; cycles < max_cycles; ++cycles) {
      equality_pass();
      inequality_pass();
      if (cycles % 4 == 3 || cycles + 1 == max_cycles) {
        if (max_violation() <= feas_tol && complementarity() <= comp_tol) return true;
      }
    }
    return max_violation() <= feas_tol && complementarity() <= comp_tol;
  }
};

// Euclidean projection of y onto {eq, ineq, x >= 0} by Dykstra's alternating
// projections; used only as the last-resort primal fallback.
inline bool dykstra_project(const std::vector<LinearRow>& eq, const std::vector<LinearRow>& ineq,
                            std::vector<double>& y, int passes = 4000, double tol = 1e-12) {
  std::size_t n = y.size();
  std::size_t rows = eq.size() + ineq.size() + 1;
  std::vector<std::vector<double>> corr(rows, std::vector<double>(n, 0.0));
  std::vector<double> norms(eq.size() + ineq.size(), 0.0);
  for (std::size_t r = 0; r < eq.size(); ++r)
    for (auto& [j, c] : eq[r].terms) norms[r] += c * c;
  for (std::size_t r = 0; r < ineq.size(); ++r)
    for (auto& [j, c] : ineq[r].terms) norms[eq.size() + r] += c * c;

  for (int pass = 0; pass < passes; ++pass) {
    for (std::size_t r = 0; r < rows; ++r) {
      std::vector<double>& cr = corr[r];
      for (std::size_t j = 0; j < n; ++j) y[j] += cr[j];
      std::fill(cr.begin(), cr.end(), 0.0);
      if (r < eq.size()) {
        const auto& row = eq[r];
        if (norms[r] <= 0.0) continue;
        double shift = (row.dot(y) - row.rhs) / norms[r];
        for (auto& [j, c] : row.terms) {
          double d = -shift * c;
          y[j] += d;
          cr[j] = -d;
        }
      } else if (r < eq.size() + ineq.size()) {
        const auto& row = ineq[r - eq.size()];
        double nr = norms[r];
        if (nr <= 0.0) continue;
        double excess = row.dot(y) - row.rhs;
        if (excess > 0.0) {
          double shift = excess / nr;
          for (auto& [j, c] : row.terms) {
            double d = -shift * c;
            y[j] += d;
            cr[j] = -d;
          }
        }
      } else {
        for (std::size_t j = 0; j < n; ++j) {
          if (y[j] < 0.0) {
            cr[j] = y[j];
            y[j] = 0.0;
          }
        }
      }
    }
    double worst = 0.0;
    for (const auto& row : eq) worst = std::max(worst, std::fabs(row.dot(y) - row.rhs));
    for (const auto& row : ineq) worst = std::max(worst, row.dot(y) - row.rhs);
    for (double v : y) worst = std::max(worst, -v);
    if (worst <= tol) return true;
  }
  return false;
}

// Primal projected-gradient fallback on D(q||q_ref).
inline bool pgd_fallback(const std::vector<double>& q_ref, const std::vector<LinearRow>& eq,
                         const std::vector<LinearRow>& ineq, std::vector<double>& q,
                         int iters = 5000) {
  std::size_t n = q.size();
  auto objective = [&](const std::vector<double>& z) {
    return unnormalized_kl(std::span<const double>(z), std::span<const double>(q_ref));
  };
  if (!dykstra_project(eq, ineq, q)) return false;
  double fq = objective(q);
  double step = 1.0;
  std::vector<double> grad(n), trial(n);
  for (int it = 0; it < iters; ++it) {
    for (std::size_t j = 0; j < n; ++j)
      grad[j] = std::log(std::max(q[j], 1e-15) / q_ref[j]);
    bool moved = false;
    for (int bt = 0; bt < 40; ++bt) {
      for (std::size_t j = 0; j < n; ++j) trial[j] = q[j] - step * grad[j];
      if (!dykstra_project(eq, ineq, trial, 600)) break;
      double ft = objective(trial);
      if (ft < fq - 1e-16) {
        double delta = fq - ft;
        q = trial;
        fq = ft;
        moved = true;
        step *= 1.3;
        if (delta < 1e-13 * (1.0 + std::fabs(fq))) return true;
        break;
      }
      step *= 0.5;
      if (step < 1e-14) break;
    }
    if (!moved) return true;  // stationary within line-search resolution
  }
  return true;
}

inline ProjectionResult kl_minimize(const SpacePtr& space, const std::vector<double>& q_tilde,
                                    const std::vector<LinearRow>& eq,
                                    const std::vector<LinearRow>& ineq, bool check_feasibility,
                                    int max_cycles, double feas_tol, double comp_tol) {
  ProjectionResult result;
  if (check_feasibility &&
      !system_feasible(static_cast<int>(q_tilde.size()), eq, ineq)) {
    result.status = ProjectionResult::Status::Infeasible;
    return result;
  }
  std::vector<double> start(q_tilde);
  for (double& v : start) v = std::max(v, kFloor);

  DualAscent ascent(eq, ineq, start);
  bool ok = ascent.run(max_cycles, feas_tol, comp_tol);
  result.iterations = ascent.cycles;
  std::vector<double> q = ascent.q;
  if (!ok) {
    // Dual ascent stalled; fall back to the primal route.
    if (!pgd_fallback(start, eq, ineq, q)) {
      result.status = ProjectionResult::Status::SolverFailure;
      return result;
    }
    double worst = 0.0;
    for (const auto& row : eq) worst = std::max(worst, std::fabs(row.dot(q) - row.rhs));
    for (const auto& row : ineq) worst = std::max(worst, row.dot(q) - row.rhs);
    if (worst > 1e-7) {
      result.status = ProjectionResult::Status::SolverFailure;
      return result;
    }
    result.max_violation = worst;
  } else {
    result.max_violation = ascent.max_violation();
    result.complementarity = ascent.complementarity();
  }
  for (std::size_t j = 0; j < q.size(); ++j)
    if (q[j] <= 1e-14 && q_tilde[j] > 1e-10) result.boundary_triples.push_back(static_cast<int>(j));
  result.status = ProjectionResult::Status::Feasible;
  result.q = OccupancyMeasure(space, std::move(q));
  result.objective = unnormalized_kl(std::span<const double>(result.q.q),
                                     std::span<const double>(start));
  return result;
}

}  // namespace detail

// PROJ: KL projection of q~ onto the polytope intersected with the optimistic
// cost constraints (G_hat - Xi)^T q <= alpha. Infeasibility of the linear
// system is detected by a phase-1 LP before the projection runs.
inline ProjectionResult kl_project(const std::vector<double>& q_tilde, const CostEstimate& est,
                                   const std::vector<double>& alpha,
                                   const OccupancyPolytope& polytope, int max_cycles = 20000,
                                   double feas_tol = 1e-11, double comp_tol = 1e-9) {
  const auto& sp = *polytope.space();
  ConstraintSystem sys = polytope.constraints();
  for (std::size_t i = 0; i < alpha.size(); ++i) {
    std::vector<double> lower(sp.num_pairs());
    for (int p = 0; p < sp.num_pairs(); ++p) lower[p] = est.lower(p, static_cast<int>(i));
    sys.ineq.push_back(cost_row(sp, lower, alpha[i]));
  }
  return detail::kl_minimize(polytope.space(), q_tilde, sys.eq, sys.ineq, true, max_cycles,
                             feas_tol, comp_tol);
}

// PROJ without the cost rows; the polytope itself is nonempty by construction,
// so only solver failure can be reported.
inline ProjectionResult kl_project_unconstrained(const std::vector<double>& q_tilde,
                                                 const OccupancyPolytope& polytope,
                                                 int max_cycles = 20000, double feas_tol = 1e-11,
                                                 double comp_tol = 1e-9) {
  ConstraintSystem sys = polytope.constraints();
  return detail::kl_minimize(polytope.space(), q_tilde, sys.eq, sys.ineq, false, max_cycles,
                             feas_tol, comp_tol);
}

}  // namespace cmdpbench
