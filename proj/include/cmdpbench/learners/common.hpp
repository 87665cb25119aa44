#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "cmdpbench/cost_model.hpp"
#include "cmdpbench/env.hpp"
#include "cmdpbench/estimation.hpp"
#include "cmdpbench/kl_projection.hpp"

namespace cmdpbench {

inline nlohmann::json policy_to_json(const Policy& p) { return p.pi; }

inline Policy policy_from_json(const SpacePtr& space, const nlohmann::json& j) {
  Policy p(space);
  p.pi = j.get<std::vector<double>>();
  return p;
}

inline nlohmann::json mixture_to_json(const MixturePolicy& m) {
  nlohmann::json comps = nlohmann::json::array();
  for (const auto& c : m.components) comps.push_back(policy_to_json(c));
  return {{"components", comps}, {"weights", m.weights}};
}

inline MixturePolicy mixture_from_json(const SpacePtr& space, const nlohmann::json& j) {
  MixturePolicy m;
  for (const auto& c : j.at("components")) m.components.push_back(policy_from_json(space, c));
  m.weights = j.at("weights").get<std::vector<double>>();
  return m;
}

inline nlohmann::json any_policy_to_json(const AnyPolicy& p) {
  if (const Policy* pure = std::get_if<Policy>(&p))
    return {{"type", "pure"}, {"pi", policy_to_json(*pure)}};
  return {{"type", "mixture"}, {"mix", mixture_to_json(std::get<MixturePolicy>(p))}};
}

inline AnyPolicy any_policy_from_json(const SpacePtr& space, const nlohmann::json& j) {
  if (j.at("type").get<std::string>() == "pure")
    return policy_from_json(space, j.at("pi"));
  return mixture_from_json(space, j.at("mix"));
}

struct SolverFailure : std::runtime_error {
  long episode;
  SolverFailure(long t, const std::string& what)
      : std::runtime_error("episode " + std::to_string(t) + ": " + what), episode(t) {}
};

// eta = gamma = sqrt(L ln(L|X||A|/delta) / (T|X||A|)).
inline double default_learning_rate(const LayeredStateSpace& sp, long T, double delta) {
  double L = sp.horizon();
  double xa = static_cast<double>(sp.num_states()) * sp.num_actions();
  return std::sqrt(L * std::log(L * xa / delta) / (static_cast<double>(T) * xa));
}

// Optimistic loss estimator with implicit exploration:
// l_hat(x,a) = l(x,a) / (u(x,a) + gamma) on visited pairs, 0 elsewhere.
// Observations are (pair id, loss value) for the steps that carry feedback.
inline std::vector<double> loss_estimator(const LayeredStateSpace& sp,
                                          const std::vector<std::pair<int, double>>& observed,
                                          std::span<const double> u, double gamma) {
  std::vector<double> lhat(sp.num_pairs(), 0.0);
  for (auto& [pair, loss] : observed) lhat[pair] = loss / (u[pair] + gamma);
  return lhat;
}

inline std::vector<std::pair<int, double>> observations_from_trajectory(
    const LayeredStateSpace& sp, const Trajectory& traj) {
  std::vector<std::pair<int, double>> obs;
  obs.reserve(traj.steps.size());
  for (const auto& step : traj.steps) obs.push_back({sp.pair_id(step.x, step.a), step.loss});
  return obs;
}

// Debug injection: exact transition confidence and true cost means with zero
// widths, separating optimization behavior from estimation noise.
struct OracleConfidence {
  const TransitionKernel* kernel = nullptr;
  const CostDistribution* costs = nullptr;
  bool active() const { return kernel != nullptr; }
};

struct StepDiagnostics {
  bool proj_feasible = true;
  int proj_iterations = 0;
  double proj_violation = 0.0;
  double proj_complementarity = 0.0;
  // Optimistic per-constraint costs min{(g_hat+xi)^T u_hat, L}; empty for SV-OPS.
  std::vector<double> optimistic_costs;
  double lambda = 0.0;
};

// The shared SV-OPS pipeline: optimistic loss estimation, counter and
// confidence updates, the multiplicative OMD step and the projection. Used
// directly by SV-OPS, with a mixture wrapper by S-OPS, and with cost rows
// removed by the anytime primal inside CV-OPS.
class SvopsCore {
 public:
  SvopsCore(SpacePtr space, std::vector<double> alpha, int m, long T, double delta, double eta,
            double gamma, OracleConfidence oracle = {})
      : space_(std::move(space)),
        alpha_(std::move(alpha)),
        m_(m),
        T_(T),
        delta_(delta),
        eta_(eta),
        gamma_(gamma),
        oracle_(oracle),
        counters_(space_, m),
        q_hat_(OccupancyMeasure::uniform(space_)) {
    refresh_estimates_();
    policy_ = induced_policy(q_hat_).policy;
  }

  const Policy& policy() const { return policy_; }
  const OccupancyMeasure& q_hat() const { return q_hat_; }
  const TransitionConfidence& confidence() const { return conf_; }
  const CostEstimate& cost_estimate() const { return cost_est_; }
  const Counters& counters() const { return counters_; }
  double eta() const { return eta_; }
  double gamma() const { return gamma_; }

  // Doubling-trick support: fresh uniform iterate and new step sizes, keeping
  // the accumulated counters and confidence.
  void reset_iterate(double eta, double gamma) {
    eta_ = eta;
    gamma_ = gamma;
    q_hat_ = OccupancyMeasure::uniform(space_);
    policy_ = induced_policy(q_hat_).policy;
  }

  nlohmann::json save_state() const {
    return {{"n", counters_.n},
            {"transit", counters_.transit},
            {"cost_sum", counters_.cost_sum},
            {"q_hat", q_hat_.q},
            {"eta", eta_},
            {"gamma", gamma_}};
  }

  void load_state(const nlohmann::json& j) {
    counters_.n = j.at("n").get<std::vector<long>>();
    counters_.transit = j.at("transit").get<std::vector<long>>();
    counters_.cost_sum = j.at("cost_sum").get<std::vector<double>>();
    q_hat_.q = j.at("q_hat").get<std::vector<double>>();
    eta_ = j.at("eta").get<double>();
    gamma_ = j.at("gamma").get<double>();
    refresh_estimates_();
    policy_ = induced_policy(q_hat_).policy;
  }

  // Executes one update given the upper occupancy bounds for the policy that
  // generated traj and the loss observations to estimate from.
  StepDiagnostics step(std::span<const double> u, const Trajectory& traj,
                       const std::vector<std::pair<int, double>>& observed, bool with_cost_rows) {
    std::vector<double> lhat = loss_estimator(*space_, observed, u, gamma_);
    update_counters(counters_, traj);
    refresh_estimates_();
    OccupancyPolytope polytope = OccupancyPolytope::from_confidence(conf_);
    std::vector<double> q_tilde = omd_weight_update(q_hat_, lhat, eta_);

    StepDiagnostics diag;
    ProjectionResult proj;
    if (with_cost_rows) {
      proj = kl_project(q_tilde, cost_est_, alpha_, polytope);
    } else {
      proj = kl_project_unconstrained(q_tilde, polytope);
    }
    if (proj.status == ProjectionResult::Status::SolverFailure)
      throw SolverFailure(traj.t, "KL projection did not converge");
    if (proj.status == ProjectionResult::Status::Infeasible) {
      diag.proj_feasible = false;
      // Any element of the estimated occupancy space works here; the
      // unconstrained projection of q_tilde is deterministic and closest to
      // the OMD iterate.
      proj = kl_project_unconstrained(q_tilde, polytope);
      if (proj.status != ProjectionResult::Status::Feasible)
        throw SolverFailure(traj.t, "fallback projection did not converge");
    }
    diag.proj_iterations = proj.iterations;
    diag.proj_violation = proj.max_violation;
    diag.proj_complementarity = proj.complementarity;
    q_hat_ = std::move(proj.q);
    policy_ = induced_policy(q_hat_).policy;
    return diag;
  }

 private:
  void refresh_estimates_() {
    if (oracle_.active()) {
      conf_ = exact_confidence(*oracle_.kernel);
    } else {
      // With zero counts the widths exceed 1, so the initial set is vacuous.
      conf_ = transition_confidence(counters_, T_, delta_);
    }
    if (oracle_.active() && oracle_.costs != nullptr && m_ > 0) {
      cost_est_.m = m_;
      cost_est_.g_hat = oracle_.costs->means;
      cost_est_.xi.assign(space_->num_pairs(), 0.0);
    } else {
      cost_est_ = cost_bounds(counters_, T_, delta_);
    }
  }

  SpacePtr space_;
  std::vector<double> alpha_;
  int m_;
  long T_;
  double delta_;
  double eta_;
  double gamma_;
  OracleConfidence oracle_;
  Counters counters_;
  OccupancyMeasure q_hat_;
  Policy policy_;
  TransitionConfidence conf_;
  CostEstimate cost_est_;
};

}  // namespace cmdpbench
