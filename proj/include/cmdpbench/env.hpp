#pragma once

#include <cmath>
#include <stdexcept>
#include <utility>
#include <vector>

#include "cmdpbench/instance.hpp"
#include "cmdpbench/occupancy.hpp"
#include "cmdpbench/rng.hpp"

namespace cmdpbench {

// Bandit feedback for one episode: the visited path with its losses and
// costs. This is the only view of the environment a learner gets.
struct TrajectoryStep {
  int x = 0;
  int a = 0;
  int x_next = 0;
  double loss = 0.0;
  std::vector<double> costs;  // g_{t,1..m}(x,a)
};

struct Trajectory {
  long t = 0;
  std::vector<TrajectoryStep> steps;  // length exactly L
  int mixture_component = -1;         // which component was realized, -1 for pure policies

  double realized_loss() const {
    double s = 0.0;
    for (const auto& st : steps) s += st.loss;
    return s;
  }
};

// One learner-environment interaction. A mixture policy resolves its random
// component once at episode start and follows it for all L steps. Draw order
// per step: action, costs (i = 1..m), next state; the component draw, when
// present, comes first. Losses are read from the schedule at index t.
inline Trajectory run_episode(const CmdpInstance& inst, long t, const AnyPolicy& policy,
                              SplitRng& rng) {
  if (t < 1 || t > inst.horizon) throw std::invalid_argument("run_episode: episode out of range");
  const auto& sp = *inst.space;
  const Policy* pi = nullptr;
  Trajectory traj;
  traj.t = t;
  if (const Policy* p = std::get_if<Policy>(&policy)) {
    pi = p;
  } else {
    const MixturePolicy& mix = std::get<MixturePolicy>(policy);
    int c = rng.categorical(mix.weights);
    traj.mixture_component = c;
    pi = &mix.components[c];
  }
  std::vector<double> loss_row = inst.losses.row(t);
  int x = sp.start_state();
  std::vector<double> action_probs(sp.num_actions());
  for (int k = 0; k < sp.horizon(); ++k) {
    for (int a = 0; a < sp.num_actions(); ++a) action_probs[a] = pi->prob(x, a);
    int a = rng.categorical(action_probs);
    TrajectoryStep step;
    step.x = x;
    step.a = a;
    step.loss = loss_row[sp.pair_id(x, a)];
    step.costs.resize(inst.costs.m);
    for (int i = 0; i < inst.costs.m; ++i) step.costs[i] = inst.costs.sample(x, a, i, rng);
    std::vector<double> succ(sp.succ_count(x));
    for (int j = 0; j < sp.succ_count(x); ++j) succ[j] = inst.kernel.prob(x, a, j);
    int j = rng.categorical(succ);
    step.x_next = sp.succ_state(x, j);
    x = step.x_next;
    traj.steps.push_back(std::move(step));
  }
  return traj;
}

// The two single-state two-action bandit instances behind the regret lower
// bound. Losses are the complements of the deterministic rewards
// (l = 1 - r with r(a1) = 1/2, r(a2) = 0); costs are Bernoulli with one
// constraint and alpha = 1/2. The first instance perturbs g(a1) by
// eps = (1/4) sqrt(2/T); the second leaves it at 1/2.
inline std::pair<CmdpInstance, CmdpInstance> lower_bound_instances(long T, double rho) {
  if (T < 2) throw std::invalid_argument("lower_bound_instances: T must be >= 2");
  if (rho <= 0.0 || rho > 0.5)
    throw std::invalid_argument("lower_bound_instances: rho must be in (0, 1/2]");
  double eps = 0.25 * std::sqrt(2.0 / static_cast<double>(T));
  if (rho < eps)
    throw std::invalid_argument("lower_bound_instances: rho below eps = (1/4)sqrt(2/T)");

  auto make = [&](double g_a1) {
    auto space = std::make_shared<const LayeredStateSpace>(
        std::vector<std::vector<std::string>>{{"x0"}, {"xL"}}, 2);
    CmdpInstance inst;
    inst.space = space;
    inst.kernel = TransitionKernel(space);
    inst.kernel.prob(0, 0, 0) = 1.0;
    inst.kernel.prob(0, 1, 0) = 1.0;
    std::vector<double> loss_row(space->num_pairs(), 0.0);
    loss_row[space->pair_id(0, 0)] = 0.5;  // a1: reward 1/2
    loss_row[space->pair_id(0, 1)] = 1.0;  // a2: reward 0
    inst.losses = LossSchedule::constant(loss_row);
    inst.costs = CostDistribution(space, 1);
    inst.costs.mean(0, 0, 0) = g_a1;
    inst.costs.mean(0, 1, 0) = 0.5 - rho;
    inst.alpha = {0.5};
    inst.horizon = T;
    inst.validate();
    return inst;
  };
  return {make(0.5 + eps), make(0.5)};
}

}  // namespace cmdpbench
