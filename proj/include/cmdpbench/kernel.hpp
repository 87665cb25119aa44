#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "cmdpbench/layered.hpp"

namespace cmdpbench {

// Transition function over the layered triple support. Rows (x,a) with
// k(x) < L are probability distributions over the next layer.
struct TransitionKernel {
  SpacePtr space;
  std::vector<double> p;  // triple-indexed

  TransitionKernel() = default;
  explicit TransitionKernel(SpacePtr s) : space(std::move(s)), p(space->num_triples(), 0.0) {}

  double prob(int x, int a, int succ_index) const { return p[space->triple_id(x, a, succ_index)]; }
  double& prob(int x, int a, int succ_index) { return p[space->triple_id(x, a, succ_index)]; }

  // Row sums must be 1 within tol and entries in [0,1].
  void validate(double tol = 1e-12) const {
    for (int x = 0; x < space->num_states(); ++x) {
      if (space->layer_of(x) == space->horizon()) continue;
      for (int a = 0; a < space->num_actions(); ++a) {
        double sum = 0.0;
        for (int j = 0; j < space->succ_count(x); ++j) {
          double v = prob(x, a, j);
          if (v < -tol || v > 1.0 + tol)
            throw std::invalid_argument("kernel entry outside [0,1] at " + space->name(x));
          sum += v;
        }
        if (std::fabs(sum - 1.0) > tol)
          throw std::invalid_argument("kernel row does not sum to 1 at " + space->name(x));
      }
    }
  }
};

}  // namespace cmdpbench
