#pragma once

#include <cmath>
#include <utility>
#include <vector>

#include "cmdpbench/estimation.hpp"

namespace cmdpbench {

// Sparse linear row: sum_j coef_j * q_j  (= | <=)  rhs.
struct LinearRow {
  std::vector<std::pair<int, double>> terms;
  double rhs = 0.0;

  double dot(const std::vector<double>& q) const {
    double s = 0.0;
    for (auto& [j, c] : terms) s += c * q[j];
    return s;
  }
};

struct ConstraintSystem {
  int n = 0;
  std::vector<LinearRow> eq;
  std::vector<LinearRow> ineq;
};

// The estimated occupancy-measure space: per-layer normalization, flow
// conservation, interval brackets q(x,a,x') in [P_hat -/+ eps] * q(x,a)
// (clipped to [0,1]) and nonnegativity. With eps = 0 this is the set of
// valid occupancies of the point kernel.
class OccupancyPolytope {
 public:
  OccupancyPolytope(SpacePtr space, std::vector<double> lo, std::vector<double> hi)
      : space_(std::move(space)), lo_(std::move(lo)), hi_(std::move(hi)) {}

  static OccupancyPolytope from_confidence(const TransitionConfidence& conf) {
    std::vector<double> lo(conf.space->num_triples()), hi(conf.space->num_triples());
    for (int i = 0; i < conf.space->num_triples(); ++i) {
      lo[i] = conf.lo(i);
      hi[i] = conf.hi(i);
    }
    return OccupancyPolytope(conf.space, std::move(lo), std::move(hi));
  }

  static OccupancyPolytope exact(const TransitionKernel& kernel) {
    return OccupancyPolytope(kernel.space, kernel.p, kernel.p);
  }

  const SpacePtr& space() const { return space_; }
  double lo(int triple) const { return lo_[triple]; }
  double hi(int triple) const { return hi_[triple]; }

  // Linear system over triple variables. Bracket rows that reduce to
  // 0 <= 0 are dropped; nonnegativity stays implicit (variable bounds).
  ConstraintSystem constraints() const {
    const auto& sp = *space_;
    ConstraintSystem sys;
    sys.n = sp.num_triples();
    for (int k = 0; k < sp.horizon(); ++k) {
      LinearRow row;
      row.rhs = 1.0;
      for (int i = 0; i < sp.layer_size(k); ++i) {
        int x = sp.layer_first(k) + i;
        for (int a = 0; a < sp.num_actions(); ++a) {
          int base = sp.triple_base(x, a);
          for (int j = 0; j < sp.succ_count(x); ++j) row.terms.push_back({base + j, 1.0});
        }
      }
      sys.eq.push_back(std::move(row));
    }
    for (int k = 1; k < sp.horizon(); ++k) {
      for (int i = 0; i < sp.layer_size(k); ++i) {
        int x = sp.layer_first(k) + i;
        LinearRow row;
        for (int a = 0; a < sp.num_actions(); ++a) {
          int base = sp.triple_base(x, a);
          for (int j = 0; j < sp.succ_count(x); ++j) row.terms.push_back({base + j, 1.0});
        }
        for (int ip = 0; ip < sp.layer_size(k - 1); ++ip) {
          int w = sp.layer_first(k - 1) + ip;
          for (int a = 0; a < sp.num_actions(); ++a)
            row.terms.push_back({sp.triple_id(w, a, sp.succ_index(w, x)), -1.0});
        }
        sys.eq.push_back(std::move(row));
      }
    }
    for (int x = 0; x < sp.num_states(); ++x) {
      if (sp.layer_of(x) == sp.horizon()) continue;
      for (int a = 0; a < sp.num_actions(); ++a) {
        int base = sp.triple_base(x, a);
        int ns = sp.succ_count(x);
        for (int j = 0; j < ns; ++j) {
          int tr = base + j;
          // q_tr - hi * sum_y q_(x,a,y) <= 0; with hi >= 1 this is implied by
          // nonnegativity of the other coordinates and is dropped.
          if (hi_[tr] < 1.0) {
            LinearRow up;
            for (int y = 0; y < ns; ++y)
              up.terms.push_back({base + y, (y == j ? 1.0 : 0.0) - hi_[tr]});
            sys.ineq.push_back(std::move(up));
          }
          // lo * sum_y q_(x,a,y) - q_tr <= 0; vacuous at lo = 0.
          if (lo_[tr] > 0.0) {
            LinearRow dn;
            for (int y = 0; y < ns; ++y)
              dn.terms.push_back({base + y, lo_[tr] - (y == j ? 1.0 : 0.0)});
            sys.ineq.push_back(std::move(dn));
          }
        }
      }
    }
    return sys;
  }

  // Max violation of the full system (brackets, flow, normalization, sign).
  double max_violation(const std::vector<double>& q) const {
    ConstraintSystem sys = constraints();
    double worst = 0.0;
    for (const auto& row : sys.eq) worst = std::max(worst, std::fabs(row.dot(q) - row.rhs));
    for (const auto& row : sys.ineq) worst = std::max(worst, row.dot(q) - row.rhs);
    for (double v : q) worst = std::max(worst, -v);
    return worst;
  }

 private:
  SpacePtr space_;
  std::vector<double> lo_, hi_;
};

// Pair-indexed cost vector expanded to a triple-coefficient row: w^T q over
// pairs equals sum over triples of w(pair(j)) q_j.
inline LinearRow cost_row(const LayeredStateSpace& sp, const std::vector<double>& w_pairs,
                          double rhs) {
  LinearRow row;
  row.rhs = rhs;
  for (int x = 0; x < sp.num_states(); ++x) {
    if (sp.layer_of(x) == sp.horizon()) continue;
    for (int a = 0; a < sp.num_actions(); ++a) {
      double c = w_pairs[sp.pair_id(x, a)];
      if (c == 0.0) continue;
      int base = sp.triple_base(x, a);
      for (int j = 0; j < sp.succ_count(x); ++j) row.terms.push_back({base + j, c});
    }
  }
  return row;
}

}  // namespace cmdpbench
