#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <stdexcept>
#include <vector>

namespace cmdpbench {

// Euclidean projection onto the probability simplex (sort-and-threshold).
inline std::vector<double> project_to_simplex(std::span<const double> v) {
  std::vector<double> sorted(v.begin(), v.end());
  std::sort(sorted.begin(), sorted.end(), std::greater<double>());
  double cum = 0.0, theta = 0.0;
  int support = 0;
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    cum += sorted[i];
    double cand = (cum - 1.0) / static_cast<double>(i + 1);
    if (sorted[i] - cand > 0.0) {
      theta = cand;
      support = static_cast<int>(i + 1);
    }
  }
  if (support == 0) {
    std::vector<double> out(v.size(), 1.0 / static_cast<double>(v.size()));
    return out;
  }
  std::vector<double> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = std::max(0.0, v[i] - theta);
  return out;
}

// Step size for the dual online gradient descent: sqrt(2) / (G_max sqrt(t)).
inline double ogd_step_size(long t, double g_max) {
  if (t < 1) throw std::invalid_argument("ogd_step_size: t must be >= 1");
  return std::sqrt(2.0) / (g_max * std::sqrt(static_cast<double>(t)));
}

// Gradient-norm bound for the dual losses: L * (1 + max_i alpha_i / L).
inline double dual_gradient_bound(double L, std::span<const double> alpha) {
  double amax = 0.0;
  for (double a : alpha) amax = std::max(amax, a);
  return L * (1.0 + amax / L);
}

// One projected OGD step on the simplex.
inline std::vector<double> simplex_ogd_step(std::span<const double> phi,
                                            std::span<const double> grad, double eta) {
  std::vector<double> moved(phi.size());
  for (std::size_t i = 0; i < phi.size(); ++i) moved[i] = phi[i] - eta * grad[i];
  return project_to_simplex(moved);
}

}  // namespace cmdpbench
