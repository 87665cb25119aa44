#pragma once

#include <stdexcept>
#include <vector>

#include "cmdpbench/instance.hpp"
#include "cmdpbench/offline_opt.hpp"
#include "cmdpbench/rng.hpp"

namespace cmdpbench {

struct RandomInstanceOptions {
  double sparsity = 0.0;       // fraction of kernel entries zeroed (keeps >= 1 per row)
  double rho_min = 0.05;       // required Slater margin
  int m = 1;
  int max_retries = 64;
  long horizon = 1000;
  double alpha_slack = 0.15;   // alpha_i = cost of a reference policy + rho_min + slack * U
  std::uint64_t loss_seed = 7;
};

// Random layered instance with a certified Slater margin >= rho_min; the
// margin is re-verified by solving the Slater LP before returning.
inline CmdpInstance random_instance(const std::vector<int>& layer_sizes, int actions,
                                    SplitRng& rng, RandomInstanceOptions opt = {}) {
  if (layer_sizes.size() < 2 || layer_sizes.front() != 1 || layer_sizes.back() != 1)
    throw std::invalid_argument("random_instance: first/last layer size must be 1");
  for (int s : layer_sizes)
    if (s < 1) throw std::invalid_argument("random_instance: layer sizes must be >= 1");

  auto space = LayeredStateSpace::make(layer_sizes, actions);
  double L = space->horizon();

  for (int attempt = 0; attempt < opt.max_retries; ++attempt) {
    CmdpInstance inst;
    inst.space = space;
    inst.kernel = TransitionKernel(space);
    for (int x = 0; x < space->num_states(); ++x) {
      if (space->layer_of(x) == space->horizon()) continue;
      for (int a = 0; a < space->num_actions(); ++a) {
        int ns = space->succ_count(x);
        std::vector<double> row(ns, 0.0);
        int kept = 0;
        for (int j = 0; j < ns; ++j) {
          bool drop = ns > 1 && rng.next_double() < opt.sparsity;
          row[j] = drop ? 0.0 : 0.05 + rng.next_double();
          if (row[j] > 0.0) ++kept;
        }
        if (kept == 0) row[rng.categorical(std::vector<double>(ns, 1.0))] = 1.0;
        double sum = 0.0;
        for (double v : row) sum += v;
        for (int j = 0; j < ns; ++j) inst.kernel.prob(x, a, j) = row[j] / sum;
      }
    }
    inst.costs = CostDistribution(space, opt.m);
    for (int p = 0; p < space->num_pairs(); ++p)
      for (int i = 0; i < opt.m; ++i) inst.costs.means[p * opt.m + i] = rng.next_double();

    // Thresholds anchored at the uniform policy's cost, so the uniform
    // occupancy is itself a strictly feasible witness (the learners start
    // from it before any projection runs).
    OccupancyMeasure q_ref = occupancy_from_policy(inst.kernel, Policy::uniform(space));
    inst.alpha.resize(opt.m);
    for (int i = 0; i < opt.m; ++i) {
      double cost = expected_value(q_ref, inst.costs.mean_column(i));
      inst.alpha[i] = std::min(L, cost + opt.rho_min + opt.alpha_slack * rng.next_double());
    }
    inst.horizon = opt.horizon;
    std::vector<double> loss_row(space->num_pairs());
    for (double& v : loss_row) v = rng.next_double();
    inst.losses = LossSchedule::constant(loss_row);

    std::vector<std::vector<double>> cost_columns;
    for (int i = 0; i < opt.m; ++i) cost_columns.push_back(inst.costs.mean_column(i));
    double margin =
        slater_margin(cost_columns, inst.alpha, OccupancyPolytope::exact(inst.kernel));
    if (margin >= opt.rho_min) {
      inst.validate();
      return inst;
    }
  }
  throw std::runtime_error("random_instance: no Slater instance found");
}

}  // namespace cmdpbench
