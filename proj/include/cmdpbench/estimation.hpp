#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "cmdpbench/env.hpp"
#include "cmdpbench/occupancy.hpp"

namespace cmdpbench {

// Visit and transit counters plus running cost sums for visited pairs.
// Invariant: N(x,a) = sum_{x'} M(x,a,x'); one episode adds exactly L to each.
struct Counters {
  SpacePtr space;
  int m = 0;
  std::vector<long> n;           // pair-indexed visit counts
  std::vector<long> transit;     // triple-indexed transit counts
  std::vector<double> cost_sum;  // [pair * m + i]

  Counters() = default;
  Counters(SpacePtr s, int num_constraints)
      : space(std::move(s)),
        m(num_constraints),
        n(space->num_pairs(), 0),
        transit(space->num_triples(), 0),
        cost_sum(space->num_pairs() * m, 0) {}

  long visits(int x, int a) const { return n[space->pair_id(x, a)]; }
};

inline void update_counters(Counters& c, const Trajectory& traj) {
  const auto& sp = *c.space;
  for (const auto& step : traj.steps) {
    int pair = sp.pair_id(step.x, step.a);
    c.n[pair] += 1;
    c.transit[sp.triple_id(step.x, step.a, sp.succ_index(step.x, step.x_next))] += 1;
    for (int i = 0; i < c.m; ++i) c.cost_sum[pair * c.m + i] += step.costs[i];
  }
}

// Running cost means and their Hoeffding widths:
//   g_hat = cost_sum / max{1, N},  xi = min{1, sqrt(4 ln(T|X||A|m/delta) / max{1, N})}.
struct CostEstimate {
  int m = 0;
  std::vector<double> g_hat;  // [pair * m + i]
  std::vector<double> xi;     // pair-indexed

  double lower(int pair, int i) const { return g_hat[pair * m + i] - xi[pair]; }
  double upper(int pair, int i) const { return g_hat[pair * m + i] + xi[pair]; }
};

inline CostEstimate cost_bounds(const Counters& c, long T, double delta) {
  if (delta <= 0.0 || delta >= 1.0) throw std::invalid_argument("cost_bounds: delta in (0,1)");
  const auto& sp = *c.space;
  CostEstimate est;
  est.m = c.m;
  est.g_hat.assign(sp.num_pairs() * c.m, 0.0);
  est.xi.assign(sp.num_pairs(), 1.0);
  double log_term = std::log(static_cast<double>(T) * sp.num_states() * sp.num_actions() * c.m / delta);
  for (int p = 0; p < sp.num_pairs(); ++p) {
    double denom = std::max<long>(1, c.n[p]);
    for (int i = 0; i < c.m; ++i) est.g_hat[p * c.m + i] = c.cost_sum[p * c.m + i] / denom;
    est.xi[p] = std::min(1.0, std::sqrt(4.0 * log_term / denom));
  }
  return est;
}

// Empirical kernel and per-triple interval widths:
//   P_hat = M / max{1, N},
//   eps   = 2 sqrt(P_hat ln(T|X||A|/delta) / max{1, N-1}) + 14 ln(T|X||A|/delta) / (3 max{1, N-1}).
// Rows with N = 0 are all-zero. Intervals are clipped to [0,1] by consumers.
struct TransitionConfidence {
  SpacePtr space;
  std::vector<double> p_hat;  // triple-indexed
  std::vector<double> eps;    // triple-indexed

  double lo(int triple) const { return std::max(0.0, p_hat[triple] - eps[triple]); }
  double hi(int triple) const { return std::min(1.0, p_hat[triple] + eps[triple]); }
};

// Vacuous confidence before any data: all intervals [0,1].
inline TransitionConfidence vacuous_confidence(SpacePtr space) {
  TransitionConfidence conf;
  conf.p_hat.assign(space->num_triples(), 0.0);
  conf.eps.assign(space->num_triples(), 1.0);
  conf.space = std::move(space);
  return conf;
}

// Degenerate confidence around a known kernel (eps = 0); the oracle debug mode.
inline TransitionConfidence exact_confidence(const TransitionKernel& kernel) {
  TransitionConfidence conf;
  conf.space = kernel.space;
  conf.p_hat = kernel.p;
  conf.eps.assign(kernel.p.size(), 0.0);
  return conf;
}

inline TransitionConfidence transition_confidence(const Counters& c, long T, double delta) {
  if (delta <= 0.0 || delta >= 1.0)
    throw std::invalid_argument("transition_confidence: delta in (0,1)");
  const auto& sp = *c.space;
  TransitionConfidence conf;
  conf.space = c.space;
  conf.p_hat.assign(sp.num_triples(), 0.0);
  conf.eps.assign(sp.num_triples(), 0.0);
  double log_term = std::log(static_cast<double>(T) * sp.num_states() * sp.num_actions() / delta);
  for (int x = 0; x < sp.num_states(); ++x) {
    if (sp.layer_of(x) == sp.horizon()) continue;
    for (int a = 0; a < sp.num_actions(); ++a) {
      int pair = sp.pair_id(x, a);
      double denom = std::max<long>(1, c.n[pair]);
      double denom1 = std::max<long>(1, c.n[pair] - 1);
      for (int j = 0; j < sp.succ_count(x); ++j) {
        int tr = sp.triple_id(x, a, j);
        double ph = static_cast<double>(c.transit[tr]) / denom;
        conf.p_hat[tr] = ph;
        conf.eps[tr] = 2.0 * std::sqrt(ph * log_term / denom1) + 14.0 * log_term / (3.0 * denom1);
      }
    }
  }
  return conf;
}

// True-kernel membership in the interval set (used by coverage checks).
inline bool kernel_in_confidence(const TransitionKernel& kernel, const TransitionConfidence& conf) {
  for (std::size_t i = 0; i < kernel.p.size(); ++i)
    if (kernel.p[i] < conf.lo(i) - 1e-12 || kernel.p[i] > conf.hi(i) + 1e-12) return false;
  return true;
}

// Diagnostic dump of the current confidence widths, one row per pair for xi
// and one per triple for the transition intervals.
inline std::string confidence_diagnostics_csv(const CostEstimate& est,
                                              const TransitionConfidence& conf) {
  const auto& sp = *conf.space;
  std::string out = "kind,x,a,xp,value,width,lo,hi\n";
  char buf[160];
  for (int x = 0; x < sp.num_states(); ++x) {
    if (sp.layer_of(x) == sp.horizon()) continue;
    for (int a = 0; a < sp.num_actions(); ++a) {
      int p = sp.pair_id(x, a);
      std::snprintf(buf, sizeof(buf), "xi,%s,%d,,%.12g,%.12g,,\n", sp.name(x).c_str(), a,
                    est.g_hat.empty() ? 0.0 : est.g_hat[p * est.m], est.xi[p]);
      out += buf;
      for (int j = 0; j < sp.succ_count(x); ++j) {
        int tr = sp.triple_id(x, a, j);
        std::snprintf(buf, sizeof(buf), "eps,%s,%d,%s,%.12g,%.12g,%.12g,%.12g\n",
                      sp.name(x).c_str(), a, sp.name(sp.succ_state(x, j)).c_str(),
                      conf.p_hat[tr], conf.eps[tr], conf.lo(tr), conf.hi(tr));
        out += buf;
      }
    }
  }
  return out;
}

// Upper occupancy bound u(x,a) >= max_{P in confidence set} q^{P,pi}(x,a),
// with equality when eps = 0. For each target state the maximal reach
// probability is computed by a backward value recursion over layers; each
// (w,a') row maximizes its linear objective over the interval-constrained
// simplex by greedy mass allocation to the highest-value successors.
inline std::vector<double> upper_occupancy_bound(const Policy& pi, const TransitionConfidence& conf) {
  const auto& sp = *conf.space;
  std::vector<double> u(sp.num_pairs(), 0.0);
  std::vector<double> value(sp.num_states(), 0.0);
  std::vector<double> next_value(sp.num_states(), 0.0);
  std::vector<int> order;

  for (int x_target = 0; x_target < sp.num_states(); ++x_target) {
    int k_target = sp.layer_of(x_target);
    if (k_target == sp.horizon()) continue;
    double reach;
    if (k_target == 0) {
      reach = 1.0;
    } else {
      // value[w] = max over kernels of P[reach x_target | start at w].
      std::fill(value.begin(), value.end(), 0.0);
      value[x_target] = 1.0;
      for (int k = k_target - 1; k >= 0; --k) {
        for (int i = 0; i < sp.layer_size(k); ++i) {
          int w = sp.layer_first(k) + i;
          double vw = 0.0;
          for (int a = 0; a < sp.num_actions(); ++a) {
            double paw = pi.prob(w, a);
            if (paw == 0.0) continue;
            // Greedy max of sum_j row_j * value[succ_j] over the row's
            // box-constrained simplex: start at the lower bounds, then pour
            // the remaining mass into successors by decreasing value.
            int base = sp.triple_base(w, a);
            int ns = sp.succ_count(w);
            order.resize(ns);
            std::iota(order.begin(), order.end(), 0);
            std::sort(order.begin(), order.end(), [&](int ja, int jb) {
              double va = value[sp.succ_state(w, ja)], vb = value[sp.succ_state(w, jb)];
              if (va != vb) return va > vb;
              return ja < jb;
            });
            double remaining = 1.0;
            double row_val = 0.0;
            for (int j = 0; j < ns; ++j) remaining -= conf.lo(base + j);
            for (int j = 0; j < ns; ++j) {
              int idx = order[j];
              double lo = conf.lo(base + idx);
              double add = std::min(remaining, conf.hi(base + idx) - lo);
              if (add < 0.0) add = 0.0;
              row_val += (lo + add) * value[sp.succ_state(w, idx)];
              remaining -= add;
            }
            vw += paw * row_val;
          }
          next_value[w] = vw;
        }
        for (int i = 0; i < sp.layer_size(k); ++i) {
          int w = sp.layer_first(k) + i;
          value[w] = next_value[w];
        }
      }
      reach = value[sp.start_state()];
    }
    for (int a = 0; a < sp.num_actions(); ++a)
      u[sp.pair_id(x_target, a)] = std::clamp(reach * pi.prob(x_target, a), 0.0, 1.0);
  }
  return u;
}

inline std::vector<double> upper_occupancy_bound(const MixturePolicy& mix,
                                                 const TransitionConfidence& conf) {
  std::vector<double> u(conf.space->num_pairs(), 0.0);
  for (std::size_t c = 0; c < mix.components.size(); ++c) {
    auto part = upper_occupancy_bound(mix.components[c], conf);
    for (std::size_t i = 0; i < u.size(); ++i) u[i] += mix.weights[c] * part[i];
  }
  return u;
}

inline std::vector<double> upper_occupancy_bound(const AnyPolicy& pi,
                                                 const TransitionConfidence& conf) {
  if (const Policy* p = std::get_if<Policy>(&pi)) return upper_occupancy_bound(*p, conf);
  return upper_occupancy_bound(std::get<MixturePolicy>(pi), conf);
}

}  // namespace cmdpbench
