#pragma once

#include <stdexcept>
#include <vector>

#include "cmdpbench/layered.hpp"
#include "cmdpbench/rng.hpp"

namespace cmdpbench {

// Stochastic constraint costs: i.i.d. across episodes, entries in [0,1].
// Bernoulli per entry by default; optionally Beta with matching mean.
struct CostDistribution {
  enum class Family { Bernoulli, Beta };

  SpacePtr space;
  int m = 0;                   // number of constraints
  std::vector<double> means;   // [pair * m + i]
  Family family = Family::Bernoulli;
  double beta_concentration = 4.0;

  CostDistribution() = default;
  CostDistribution(SpacePtr s, int num_constraints)
      : space(std::move(s)), m(num_constraints), means(space->num_pairs() * m, 0.0) {}

  double mean(int x, int a, int i) const { return means[space->pair_id(x, a) * m + i]; }
  double& mean(int x, int a, int i) { return means[space->pair_id(x, a) * m + i]; }

  // Column i of the mean matrix as a pair vector (the vector g-bar_i).
  std::vector<double> mean_column(int i) const {
    std::vector<double> out(space->num_pairs(), 0.0);
    for (int p = 0; p < space->num_pairs(); ++p) out[p] = means[p * m + i];
    return out;
  }

  void validate() const {
    if (m < 1) throw std::invalid_argument("cost distribution: need m >= 1");
    for (double v : means)
      if (v < 0.0 || v > 1.0) throw std::invalid_argument("cost mean outside [0,1]");
  }

  // One fresh draw of g_{t,i}(x,a) for a visited pair.
  double sample(int x, int a, int i, SplitRng& rng) const {
    double mu = mean(x, a, i);
    if (family == Family::Bernoulli) return rng.bernoulli(mu) ? 1.0 : 0.0;
    if (mu <= 0.0) return 0.0;
    if (mu >= 1.0) return 1.0;
    return rng.beta(beta_concentration * mu, beta_concentration * (1.0 - mu));
  }
};

}  // namespace cmdpbench
