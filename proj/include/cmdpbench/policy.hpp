#pragma once

#include <cmath>
#include <stdexcept>
#include <variant>
#include <vector>

#include "cmdpbench/layered.hpp"

namespace cmdpbench {

// Markovian policy: per-state distribution over actions, pair-indexed.
struct Policy {
  SpacePtr space;
  std::vector<double> pi;

  Policy() = default;
  explicit Policy(SpacePtr s) : space(std::move(s)), pi(space->num_pairs(), 0.0) {}

  static Policy uniform(SpacePtr s) {
    Policy out(std::move(s));
    double u = 1.0 / out.space->num_actions();
    for (double& v : out.pi) v = u;
    return out;
  }

  double prob(int x, int a) const { return pi[space->pair_id(x, a)]; }
  double& prob(int x, int a) { return pi[space->pair_id(x, a)]; }

  void validate(double tol = 1e-12) const {
    for (int x = 0; x < space->num_states(); ++x) {
      if (space->layer_of(x) == space->horizon()) continue;
      double sum = 0.0;
      for (int a = 0; a < space->num_actions(); ++a) {
        double v = prob(x, a);
        if (v < -tol || v > 1.0 + tol)
          throw std::invalid_argument("policy entry outside [0,1] at " + space->name(x));
        sum += v;
      }
      if (std::fabs(sum - 1.0) > tol)
        throw std::invalid_argument("policy row does not sum to 1 at " + space->name(x));
    }
  }
};

// Episode-level randomization over Markovian policies. The component is drawn
// once per episode and followed for all L steps.
struct MixturePolicy {
  std::vector<Policy> components;
  std::vector<double> weights;

  void validate(double tol = 1e-12) const {
    if (components.size() != weights.size() || components.empty())
      throw std::invalid_argument("mixture: components/weights mismatch");
    double sum = 0.0;
    for (double w : weights) {
      if (w < 0.0) throw std::invalid_argument("mixture: negative weight");
      sum += w;
    }
    if (std::fabs(sum - 1.0) > tol)
      throw std::invalid_argument("mixture: weights do not sum to 1");
  }
};

using AnyPolicy = std::variant<Policy, MixturePolicy>;

// Two-component mixture {(a, wa), (b, 1-wa)} with zero-weight components dropped.
inline AnyPolicy mix_two(const AnyPolicy& a, double wa, const Policy& b) {
  if (wa <= 0.0) return b;
  MixturePolicy out;
  if (const Policy* pa = std::get_if<Policy>(&a)) {
    if (wa >= 1.0) return *pa;
    out.components = {*pa, b};
    out.weights = {wa, 1.0 - wa};
    return out;
  }
  const MixturePolicy& ma = std::get<MixturePolicy>(a);
  for (std::size_t j = 0; j < ma.components.size(); ++j) {
    out.components.push_back(ma.components[j]);
    out.weights.push_back(wa * ma.weights[j]);
  }
  if (wa < 1.0) {
    out.components.push_back(b);
    out.weights.push_back(1.0 - wa);
  }
  return out;
}

}  // namespace cmdpbench
