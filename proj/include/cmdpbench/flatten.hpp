#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "cmdpbench/kernel.hpp"

namespace cmdpbench {

// Generic finite episodic MDP with a designated start state; input to the
// loop-free flattening.
struct GenericMdp {
  int n_states = 0;
  int n_actions = 0;
  int start = 0;
  std::vector<std::vector<std::vector<double>>> p;  // p[s][a][s']
  std::vector<std::string> names;                   // optional

  std::string state_name(int s) const {
    if (s < static_cast<int>(names.size())) return names[s];
    return "q" + std::to_string(s);
  }
};

struct FlattenResult {
  SpacePtr space;
  TransitionKernel kernel;
};

namespace detail {

// Depth of each reachable state when the support graph is layered; nullopt if
// any state is reachable at two different depths or depths exceed horizon.
inline std::optional<std::vector<int>> layered_depths(const GenericMdp& mdp, int horizon) {
  std::vector<int> depth(mdp.n_states, -1);
  depth[mdp.start] = 0;
  std::vector<int> frontier{mdp.start};
  for (int k = 0; k < horizon && !frontier.empty(); ++k) {
    std::vector<int> next;
    for (int s : frontier) {
      for (int a = 0; a < mdp.n_actions; ++a) {
        for (int sp = 0; sp < mdp.n_states; ++sp) {
          if (mdp.p[s][a][sp] <= 0.0) continue;
          if (depth[sp] == -1) {
            depth[sp] = k + 1;
            next.push_back(sp);
          } else if (depth[sp] != k + 1) {
            return std::nullopt;
          }
        }
      }
    }
    frontier = std::move(next);
  }
  if (!frontier.empty()) {
    // Mass still flowing past the horizon layer.
    for (int s : frontier)
      for (int a = 0; a < mdp.n_actions; ++a)
        for (int sp = 0; sp < mdp.n_states; ++sp)
          if (mdp.p[s][a][sp] > 0.0) return std::nullopt;
  }
  // Exactly one state at the final depth.
  int terminal = -1;
  for (int s = 0; s < mdp.n_states; ++s) {
    if (depth[s] == horizon) {
      if (terminal != -1) return std::nullopt;
      terminal = s;
    }
  }
  if (terminal == -1) return std::nullopt;
  return depth;
}

}  // namespace detail

// Casts a horizon-H episodic MDP into loop-free layered form. Inputs that are
// already loop-free come back isomorphic (reachable states relabeled by
// depth). Otherwise the state space is duplicated H times between a singleton
// start and a fresh terminal: the H genuine decision steps keep the original
// kernel rows and the final step absorbs deterministically. State count is at
// most H*|S| + 2.
inline FlattenResult flatten_to_loopfree(const GenericMdp& mdp, int horizon) {
  if (horizon < 1) throw std::invalid_argument("flatten_to_loopfree: horizon must be >= 1");
  if (mdp.n_states < 1 || mdp.n_actions < 1)
    throw std::invalid_argument("flatten_to_loopfree: empty MDP");

  if (auto depths = detail::layered_depths(mdp, horizon)) {
    std::vector<std::vector<std::string>> layer_names(horizon + 1);
    std::vector<std::vector<int>> layer_states(horizon + 1);
    for (int s = 0; s < mdp.n_states; ++s) {
      if ((*depths)[s] < 0) continue;  // unreachable
      layer_names[(*depths)[s]].push_back(mdp.state_name(s));
      layer_states[(*depths)[s]].push_back(s);
    }
    auto space = std::make_shared<const LayeredStateSpace>(layer_names, mdp.n_actions);
    TransitionKernel kernel(space);
    for (int k = 0; k < horizon; ++k) {
      for (std::size_t i = 0; i < layer_states[k].size(); ++i) {
        int x = space->layer_first(k) + static_cast<int>(i);
        int s = layer_states[k][i];
        for (int a = 0; a < mdp.n_actions; ++a)
          for (std::size_t j = 0; j < layer_states[k + 1].size(); ++j)
            kernel.prob(x, a, static_cast<int>(j)) = mdp.p[s][a][layer_states[k + 1][j]];
      }
    }
    kernel.validate(1e-9);
    return {space, std::move(kernel)};
  }

  std::vector<std::vector<std::string>> layer_names;
  layer_names.push_back({mdp.state_name(mdp.start) + "@0"});
  for (int k = 1; k <= horizon; ++k) {
    std::vector<std::string> layer;
    for (int s = 0; s < mdp.n_states; ++s)
      layer.push_back(mdp.state_name(s) + "@" + std::to_string(k));
    layer_names.push_back(std::move(layer));
  }
  layer_names.push_back({"end"});
  auto space = std::make_shared<const LayeredStateSpace>(layer_names, mdp.n_actions);

  TransitionKernel kernel(space);
  int x0 = space->start_state();
  for (int a = 0; a < mdp.n_actions; ++a)
    for (int sp = 0; sp < mdp.n_states; ++sp)
      kernel.prob(x0, a, sp) = mdp.p[mdp.start][a][sp];
  for (int k = 1; k < horizon; ++k) {
    for (int s = 0; s < mdp.n_states; ++s) {
      int x = space->layer_first(k) + s;
      for (int a = 0; a < mdp.n_actions; ++a)
        for (int sp = 0; sp < mdp.n_states; ++sp)
          kernel.prob(x, a, sp) = mdp.p[s][a][sp];
    }
  }
  for (int s = 0; s < mdp.n_states; ++s) {
    int x = space->layer_first(horizon) + s;
    for (int a = 0; a < mdp.n_actions; ++a) kernel.prob(x, a, 0) = 1.0;
  }
  kernel.validate(1e-9);
  return {space, std::move(kernel)};
}

}  // namespace cmdpbench
