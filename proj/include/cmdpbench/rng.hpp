#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>

namespace cmdpbench {

// Deterministic random stream with an explicit draw counter so that runs can
// be checkpointed and resumed bit-exactly. All distributions are hand-rolled
// on top of next_u64(); std::*_distribution is not used because its output is
// not pinned down by the standard.
class SplitRng {
 public:
  explicit SplitRng(std::uint64_t seed) : eng_(seed) {}

  // Independent stream for (master seed, stream id), splitmix64-mixed.
  static SplitRng derive(std::uint64_t master, std::uint64_t stream) {
    std::uint64_t z = master + 0x9e3779b97f4a7c15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    z = z ^ (z >> 31);
    return SplitRng(z);
  }

  std::uint64_t next_u64() {
    ++draws_;
    return eng_();
  }

  // Uniform in [0, 1) with 53 random bits.
  double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  bool bernoulli(double p) { return next_double() < p; }

  // Index sampled proportionally to w (w need not be normalized).
  int categorical(std::span<const double> w) {
    double total = 0.0;
    for (double v : w) total += v;
    if (total <= 0.0) throw std::invalid_argument("categorical: nonpositive total weight");
    double u = next_double() * total;
    double acc = 0.0;
    for (std::size_t i = 0; i + 1 < w.size(); ++i) {
      acc += w[i];
      if (u < acc) return static_cast<int>(i);
    }
    return static_cast<int>(w.size()) - 1;
  }

  // Beta(a,b) via Johnk for small parameters, Cheng's BB/BC otherwise.
  // Only the uniform stream is consumed, so fast_forward stays valid.
  double beta(double a, double b) {
    if (a <= 0.0 || b <= 0.0) throw std::invalid_argument("beta: parameters must be positive");
    if (a < 1.0 && b < 1.0) {
      for (int guard = 0; guard < 10000; ++guard) {
        double u = next_double(), v = next_double();
        double x = std::pow(u, 1.0 / a), y = std::pow(v, 1.0 / b);
        if (x + y <= 1.0) {
          if (x + y > 0.0) return x / (x + y);
          double lx = std::log(u) / a, ly = std::log(v) / b;
          double m = std::max(lx, ly);
          lx -= m;
          ly -= m;
          return std::exp(lx) / (std::exp(lx) + std::exp(ly));
        }
      }
      return a / (a + b);
    }
    double g1 = gamma_(a), g2 = gamma_(b);
    return g1 / (g1 + g2);
  }

  std::uint64_t draw_count() const { return draws_; }

  void fast_forward(std::uint64_t target) {
    if (target < draws_) throw std::invalid_argument("fast_forward: target behind cursor");
    while (draws_ < target) next_u64();
  }

 private:
  // Marsaglia-Tsang for shape >= 1, boosted for shape < 1.
  double gamma_(double shape) {
    if (shape < 1.0) {
      double u = next_double();
      while (u <= 0.0) u = next_double();
      return gamma_(shape + 1.0) * std::pow(u, 1.0 / shape);
    }
    double d = shape - 1.0 / 3.0;
    double c = 1.0 / std::sqrt(9.0 * d);
    for (int guard = 0; guard < 10000; ++guard) {
      double x = normal_();
      double v = 1.0 + c * x;
      if (v <= 0.0) continue;
      v = v * v * v;
      double u = next_double();
      if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
      if (u > 0.0 && std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
    }
    return shape;
  }

  double normal_() {
    // Box-Muller; consumes exactly two uniforms per call.
    double u1 = next_double(), u2 = next_double();
    while (u1 <= 0.0) u1 = next_double();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925287 * u2);
  }

  std::mt19937_64 eng_;
  std::uint64_t draws_ = 0;
};

}  // namespace cmdpbench
