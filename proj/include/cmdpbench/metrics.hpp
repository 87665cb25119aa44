#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "cmdpbench/instance.hpp"
#include "cmdpbench/offline_opt.hpp"

namespace cmdpbench {

// q_t for evaluation is always the exact expected occupancy of the selected
// (possibly non-Markovian) policy under the true kernel.
inline OccupancyMeasure exact_episode_occupancy(const TransitionKernel& kernel,
                                                const AnyPolicy& policy) {
  return occupancy_from_policy(kernel, policy);
}

struct BaselineResult {
  double opt = 0.0;
  OccupancyMeasure q_star;
};

// Best-in-hindsight constraint-satisfying occupancy for the average loss.
inline BaselineResult solve_baseline(const CmdpInstance& inst) {
  std::vector<double> avg_loss = inst.losses.average(inst.horizon);
  std::vector<std::vector<double>> cost_columns;
  for (int i = 0; i < inst.costs.m; ++i) cost_columns.push_back(inst.costs.mean_column(i));
  OfflineOptResult res = solve_offline_opt(avg_loss, cost_columns, inst.alpha,
                                           OccupancyPolytope::exact(inst.kernel));
  if (res.status != OfflineOptResult::Status::Optimal)
    throw std::runtime_error("baseline LP infeasible: instance has no feasible occupancy");
  return {res.value, std::move(res.q)};
}

// R_t = sum_{tau<=t} l_tau^T (q_tau - q*).
inline std::vector<double> compute_regret(const LossSchedule& losses,
                                          const std::vector<OccupancyMeasure>& occupancies,
                                          const OccupancyMeasure& q_star) {
  std::vector<double> cum;
  cum.reserve(occupancies.size());
  double acc = 0.0;
  for (std::size_t t = 0; t < occupancies.size(); ++t) {
    std::vector<double> row = losses.row(static_cast<long>(t) + 1);
    acc += expected_value(occupancies[t], row) - expected_value(q_star, row);
    cum.push_back(acc);
  }
  return cum;
}

// V_t = max_i sum_{tau<=t} [gbar_i^T q_tau - alpha_i]^+; the max stays outside
// the sum.
inline std::vector<double> compute_violation(const std::vector<OccupancyMeasure>& occupancies,
                                             const std::vector<std::vector<double>>& cost_columns,
                                             const std::vector<double>& alpha) {
  std::size_t m = alpha.size();
  std::vector<double> per_i(m, 0.0);
  std::vector<double> out;
  out.reserve(occupancies.size());
  for (const auto& q : occupancies) {
    double worst = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      per_i[i] += std::max(0.0, expected_value(q, cost_columns[i]) - alpha[i]);
      worst = std::max(worst, per_i[i]);
    }
    out.push_back(worst);
  }
  return out;
}

// flag_t = (gbar_i^T q_t <= alpha_i + 1e-9 for all i).
inline std::vector<bool> safety_flags(const std::vector<OccupancyMeasure>& occupancies,
                                      const std::vector<std::vector<double>>& cost_columns,
                                      const std::vector<double>& alpha, double tol = 1e-9) {
  std::vector<bool> out;
  out.reserve(occupancies.size());
  for (const auto& q : occupancies) {
    bool safe = true;
    for (std::size_t i = 0; i < alpha.size(); ++i)
      safe = safe && expected_value(q, cost_columns[i]) <= alpha[i] + tol;
    out.push_back(safe);
  }
  return out;
}

struct GrowthFit {
  double exponent = 0.0;
  double residual = 0.0;
  bool degenerate = false;  // no usable positive values in the fit range
};

// Least-squares slope of ln(value) against ln(t) past a burn-in prefix,
// restricted to strictly positive values.
inline GrowthFit fit_growth_exponent(std::span<const double> series, double burn_in = 0.1) {
  GrowthFit fit;
  std::size_t n = series.size();
  std::size_t first = static_cast<std::size_t>(std::floor(burn_in * static_cast<double>(n)));
  std::vector<double> xs, ys;
  for (std::size_t t = first; t < n; ++t) {
    if (series[t] > 0.0) {
      xs.push_back(std::log(static_cast<double>(t + 1)));
      ys.push_back(std::log(series[t]));
    }
  }
  if (xs.size() < 2) {
    fit.degenerate = true;
    return fit;
  }
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= xs.size();
  my /= ys.size();
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
  }
  if (sxx <= 0.0) {
    fit.degenerate = true;
    return fit;
  }
  fit.exponent = sxy / sxx;
  double rss = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    double pred = my + fit.exponent * (xs[i] - mx);
    rss += (ys[i] - pred) * (ys[i] - pred);
  }
  fit.residual = std::sqrt(rss / static_cast<double>(xs.size()));
  return fit;
}

}  // namespace cmdpbench
