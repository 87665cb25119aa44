#pragma once

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "cmdpbench/kernel.hpp"
#include "cmdpbench/policy.hpp"

namespace cmdpbench {

// Occupancy measure over (x,a,x') triples: the common currency of all
// optimization and evaluation. q(x,a) and q(x) are the marginals.
struct OccupancyMeasure {
  SpacePtr space;
  std::vector<double> q;  // triple-indexed

  OccupancyMeasure() = default;
  explicit OccupancyMeasure(SpacePtr s) : space(std::move(s)), q(space->num_triples(), 0.0) {}
  OccupancyMeasure(SpacePtr s, std::vector<double> values) : space(std::move(s)), q(std::move(values)) {}

  static OccupancyMeasure uniform(SpacePtr s) {
    OccupancyMeasure out(std::move(s));
    const auto& sp = *out.space;
    for (int x = 0; x < sp.num_states(); ++x) {
      int k = sp.layer_of(x);
      if (k == sp.horizon()) continue;
      double v = 1.0 / (static_cast<double>(sp.layer_size(k)) * sp.num_actions() * sp.layer_size(k + 1));
      for (int a = 0; a < sp.num_actions(); ++a)
        for (int j = 0; j < sp.succ_count(x); ++j) out.q[sp.triple_id(x, a, j)] = v;
    }
    return out;
  }

  double triple(int x, int a, int j) const { return q[space->triple_id(x, a, j)]; }

  double pair_mass(int x, int a) const {
    if (space->layer_of(x) == space->horizon()) return 0.0;
    double s = 0.0;
    int base = space->triple_base(x, a);
    for (int j = 0; j < space->succ_count(x); ++j) s += q[base + j];
    return s;
  }

  double state_mass(int x) const {
    double s = 0.0;
    for (int a = 0; a < space->num_actions(); ++a) s += pair_mass(x, a);
    return s;
  }

  // Marginal over pairs, sized |X|*|A| (terminal-layer entries zero).
  std::vector<double> pair_vector() const {
    std::vector<double> out(space->num_pairs(), 0.0);
    for (int x = 0; x < space->num_states(); ++x) {
      if (space->layer_of(x) == space->horizon()) continue;
      for (int a = 0; a < space->num_actions(); ++a) out[space->pair_id(x, a)] = pair_mass(x, a);
    }
    return out;
  }
};

struct ValidityViolation {
  enum class Kind { Structure, Normalization, Flow, KernelMismatch };
  Kind kind;
  std::string where;
  double residual;
};

struct ValidityReport {
  bool ok = true;
  std::vector<ValidityViolation> violations;
  void add(ValidityViolation::Kind kind, std::string where, double residual) {
    ok = false;
    violations.push_back({kind, std::move(where), residual});
  }
};

// Per-layer normalization and flow conservation within tol. The induced-kernel
// condition is checked only when a kernel is supplied.
inline ValidityReport validate_occupancy(const OccupancyMeasure& q, double tol = 1e-9,
                                         const TransitionKernel* kernel = nullptr) {
  ValidityReport report;
  const auto& sp = *q.space;
  if (static_cast<int>(q.q.size()) != sp.num_triples()) {
    report.add(ValidityViolation::Kind::Structure, "triple vector size",
               std::fabs(static_cast<double>(q.q.size()) - sp.num_triples()));
    return report;
  }
  for (int i = 0; i < sp.num_triples(); ++i) {
    if (!(q.q[i] >= -tol) || !(q.q[i] <= 1.0 + tol) || std::isnan(q.q[i])) {
      report.add(ValidityViolation::Kind::Structure, "entry " + std::to_string(i),
                 std::isnan(q.q[i]) ? 1.0 : std::max(-q.q[i], q.q[i] - 1.0));
    }
  }
  for (int k = 0; k < sp.horizon(); ++k) {
    double total = 0.0;
    for (int i = 0; i < sp.layer_size(k); ++i) {
      int x = sp.layer_first(k) + i;
      for (int a = 0; a < sp.num_actions(); ++a) total += q.pair_mass(x, a);
    }
    if (std::fabs(total - 1.0) > tol)
      report.add(ValidityViolation::Kind::Normalization, "layer " + std::to_string(k),
                 std::fabs(total - 1.0));
  }
  for (int k = 1; k < sp.horizon(); ++k) {
    for (int i = 0; i < sp.layer_size(k); ++i) {
      int x = sp.layer_first(k) + i;
      double outflow = q.state_mass(x);
      double inflow = 0.0;
      for (int ip = 0; ip < sp.layer_size(k - 1); ++ip) {
        int w = sp.layer_first(k - 1) + ip;
        for (int a = 0; a < sp.num_actions(); ++a)
          inflow += q.q[sp.triple_id(w, a, sp.succ_index(w, x))];
      }
      if (std::fabs(outflow - inflow) > tol)
        report.add(ValidityViolation::Kind::Flow, sp.name(x), std::fabs(outflow - inflow));
    }
  }
  if (kernel != nullptr) {
    for (int x = 0; x < sp.num_states(); ++x) {
      if (sp.layer_of(x) == sp.horizon()) continue;
      for (int a = 0; a < sp.num_actions(); ++a) {
        double mass = q.pair_mass(x, a);
        if (mass <= tol) continue;
        for (int j = 0; j < sp.succ_count(x); ++j) {
          double induced = q.q[sp.triple_id(x, a, j)] / mass;
          double diff = std::fabs(induced - kernel->prob(x, a, j));
          if (diff > tol)
            report.add(ValidityViolation::Kind::KernelMismatch,
                       sp.name(x) + ",a" + std::to_string(a), diff);
        }
      }
    }
  }
  return report;
}

// Exact forward dynamic program: reach(x0)=1, q(x,a,x') = reach(x) pi(a|x) P(x'|x,a).
inline OccupancyMeasure occupancy_from_policy(const TransitionKernel& kernel, const Policy& pi) {
  const auto& sp = *kernel.space;
  OccupancyMeasure out(kernel.space);
  std::vector<double> reach(sp.num_states(), 0.0);
  reach[sp.start_state()] = 1.0;
  for (int k = 0; k < sp.horizon(); ++k) {
    for (int i = 0; i < sp.layer_size(k); ++i) {
      int x = sp.layer_first(k) + i;
      if (reach[x] == 0.0) continue;
      for (int a = 0; a < sp.num_actions(); ++a) {
        double base = reach[x] * pi.prob(x, a);
        if (base == 0.0) continue;
        for (int j = 0; j < sp.succ_count(x); ++j) {
          double v = base * kernel.prob(x, a, j);
          out.q[sp.triple_id(x, a, j)] = v;
          reach[sp.succ_state(x, j)] += v;
        }
      }
    }
  }
  return out;
}

inline OccupancyMeasure occupancy_from_policy(const TransitionKernel& kernel,
                                              const MixturePolicy& mix) {
  OccupancyMeasure out(kernel.space);
  for (std::size_t j = 0; j < mix.components.size(); ++j) {
    OccupancyMeasure part = occupancy_from_policy(kernel, mix.components[j]);
    for (std::size_t i = 0; i < out.q.size(); ++i) out.q[i] += mix.weights[j] * part.q[i];
  }
  return out;
}

inline OccupancyMeasure occupancy_from_policy(const TransitionKernel& kernel,
                                              const AnyPolicy& pi) {
  if (const Policy* p = std::get_if<Policy>(&pi)) return occupancy_from_policy(kernel, *p);
  return occupancy_from_policy(kernel, std::get<MixturePolicy>(pi));
}

struct InducedPolicy {
  Policy policy;
  std::vector<int> zero_mass_states;  // states where the uniform convention applied
};

struct InducedKernel {
  TransitionKernel kernel;
  std::vector<int> zero_mass_pairs;  // pair ids where the uniform convention applied
};

// pi^q(a|x) = q(x,a)/q(x); uniform where q(x) vanishes.
inline InducedPolicy induced_policy(const OccupancyMeasure& q, double zero_tol = 1e-12) {
  const auto& sp = *q.space;
  InducedPolicy out{Policy(q.space), {}};
  for (int x = 0; x < sp.num_states(); ++x) {
    if (sp.layer_of(x) == sp.horizon()) continue;
    double mass = q.state_mass(x);
    if (mass < zero_tol) {
      out.zero_mass_states.push_back(x);
      for (int a = 0; a < sp.num_actions(); ++a)
        out.policy.prob(x, a) = 1.0 / sp.num_actions();
    } else {
      for (int a = 0; a < sp.num_actions(); ++a)
        out.policy.prob(x, a) = q.pair_mass(x, a) / mass;
    }
  }
  return out;
}

// P^q(x'|x,a) = q(x,a,x')/q(x,a); uniform where q(x,a) vanishes.
inline InducedKernel induced_transition(const OccupancyMeasure& q, double zero_tol = 1e-12) {
  const auto& sp = *q.space;
  InducedKernel out{TransitionKernel(q.space), {}};
  for (int x = 0; x < sp.num_states(); ++x) {
    if (sp.layer_of(x) == sp.horizon()) continue;
    for (int a = 0; a < sp.num_actions(); ++a) {
      double mass = q.pair_mass(x, a);
      if (mass < zero_tol) {
        out.zero_mass_pairs.push_back(sp.pair_id(x, a));
        for (int j = 0; j < sp.succ_count(x); ++j)
          out.kernel.prob(x, a, j) = 1.0 / sp.succ_count(x);
      } else {
        for (int j = 0; j < sp.succ_count(x); ++j)
          out.kernel.prob(x, a, j) = q.q[sp.triple_id(x, a, j)] / mass;
      }
    }
  }
  return out;
}

// sum_{x,a} w(x,a) q(x,a) for a pair-indexed w.
inline double expected_value(const OccupancyMeasure& q, std::span<const double> w) {
  const auto& sp = *q.space;
  double total = 0.0;
  for (int x = 0; x < sp.num_states(); ++x) {
    if (sp.layer_of(x) == sp.horizon()) continue;
    for (int a = 0; a < sp.num_actions(); ++a)
      total += w[sp.pair_id(x, a)] * q.pair_mass(x, a);
  }
  return total;
}

}  // namespace cmdpbench
