#pragma once

#include <optional>

#include "cmdpbench/learners/common.hpp"

namespace cmdpbench {

// Pessimistic mixing probability. v_i = (g_hat_i + xi)^T u_hat, clipped at L.
// lambda = 0 when no constraint is optimistically violated; otherwise the max
// over the violated constraints of (min{v_i,L} - alpha_i)/(min{v_i,L} - beta_i),
// which lies in [0,1) whenever beta < alpha.
inline double sops_mixing_probability(const CostEstimate& est, std::span<const double> u_hat,
                                      std::span<const double> alpha, std::span<const double> beta,
                                      double L, std::vector<double>* optimistic_costs = nullptr) {
  int m = est.m;
  int pairs = static_cast<int>(u_hat.size());
  double lambda = 0.0;
  for (int i = 0; i < m; ++i) {
    if (beta[i] >= alpha[i])
      throw std::invalid_argument("sops_mixing_probability: requires beta_i < alpha_i");
    double v = 0.0;
    for (int p = 0; p < pairs; ++p) v += est.upper(p, i) * u_hat[p];
    double clipped = std::min(v, L);
    if (optimistic_costs != nullptr) optimistic_costs->push_back(clipped);
    if (v > alpha[i]) {
      double ratio = (clipped - alpha[i]) / (clipped - beta[i]);
      lambda = std::max(lambda, ratio);
    }
  }
  return lambda;
}

// lambda_0 = max_i (L - alpha_i)/(L - beta_i): safe for any costs and transitions.
inline double sops_initial_lambda(std::span<const double> alpha, std::span<const double> beta,
                                  double L) {
  double lam = 0.0;
  for (std::size_t i = 0; i < alpha.size(); ++i) {
    if (beta[i] >= alpha[i])
      throw std::invalid_argument("sops_initial_lambda: requires beta_i < alpha_i");
    lam = std::max(lam, (L - alpha[i]) / (L - beta[i]));
  }
  return lam;
}

// Upper occupancy bounds of a fixed safe policy, recomputed every
// refresh_interval episodes. A stale bound stays valid under the clean event
// because the true kernel lies in every confidence set along the run.
class DiamondUobCache {
 public:
  DiamondUobCache(AnyPolicy pi, int refresh_interval)
      : pi_(std::move(pi)), refresh_(std::max(1, refresh_interval)) {
    if (std::get_if<Policy>(&pi_) != nullptr) refresh_ = 1;
  }

  const std::vector<double>& get(const TransitionConfidence& conf, long t) {
    if (cached_.empty() || t - last_t_ >= refresh_) {
      cached_ = upper_occupancy_bound(pi_, conf);
      last_t_ = t;
    }
    return cached_;
  }

  const AnyPolicy& policy() const { return pi_; }

  nlohmann::json save_state() const { return {{"last_t", last_t_}, {"cached", cached_}}; }
  void load_state(const nlohmann::json& j) {
    last_t_ = j.at("last_t").get<long>();
    cached_ = j.at("cached").get<std::vector<double>>();
  }

 private:
  AnyPolicy pi_;
  int refresh_;
  long last_t_ = -1;
  std::vector<double> cached_;
};

// Safe optimistic policy search: randomizes between the known strictly
// feasible policy and the SV-OPS choice, with the mixing probability chosen
// pessimistically from upper confidence bounds.
class SopsLearner {
 public:
  SopsLearner(SpacePtr space, std::vector<double> alpha, std::vector<double> beta,
              AnyPolicy pi_diamond, long T, double delta, double eta, double gamma,
              OracleConfidence oracle = {}, int uob_refresh = 25)
      : core_(space, alpha, static_cast<int>(alpha.size()), T, delta, eta, gamma, oracle),
        alpha_(std::move(alpha)),
        beta_(std::move(beta)),
        diamond_(std::move(pi_diamond), uob_refresh),
        L_(space->horizon()) {
    lambda_prev_ = sops_initial_lambda(alpha_, beta_, L_);
  }

  double lambda() const { return lambda_prev_; }

  AnyPolicy policy() const { return mix_two(diamond_.policy(), lambda_prev_, core_.policy()); }

  StepDiagnostics step(const Trajectory& traj) {
    const auto& sp = *core_.q_hat().space;
    // u_t for the mixture actually played: lambda-weighted per-component UOBs.
    std::vector<double> u = upper_occupancy_bound(core_.policy(), core_.confidence());
    if (lambda_prev_ > 0.0) {
      const std::vector<double>& ud = diamond_.get(core_.confidence(), traj.t);
      for (std::size_t p = 0; p < u.size(); ++p)
        u[p] = lambda_prev_ * ud[p] + (1.0 - lambda_prev_) * u[p];
    }
    StepDiagnostics diag = core_.step(u, traj, observations_from_trajectory(sp, traj), true);
    if (diag.proj_feasible) {
      std::vector<double> u_hat = upper_occupancy_bound(core_.policy(), core_.confidence());
      diag.lambda = sops_mixing_probability(core_.cost_estimate(), u_hat, alpha_, beta_, L_,
                                            &diag.optimistic_costs);
    } else {
      diag.lambda = 1.0;
    }
    lambda_prev_ = diag.lambda;
    return diag;
  }

  const SvopsCore& core() const { return core_; }
  const std::vector<double>& beta() const { return beta_; }
  const AnyPolicy& pi_diamond() const { return diamond_.policy(); }
  const Policy& proposal_policy() const { return core_.policy(); }

  nlohmann::json save_state() const {
    return {{"core", core_.save_state()},
            {"lambda_prev", lambda_prev_},
            {"diamond_cache", diamond_.save_state()}};
  }

  void load_state(const nlohmann::json& j) {
    core_.load_state(j.at("core"));
    lambda_prev_ = j.at("lambda_prev").get<double>();
    diamond_.load_state(j.at("diamond_cache"));
  }

 private:
  SvopsCore core_;
  std::vector<double> alpha_;
  std::vector<double> beta_;
  DiamondUobCache diamond_;
  double L_;
  double lambda_prev_;
};

}  // namespace cmdpbench
