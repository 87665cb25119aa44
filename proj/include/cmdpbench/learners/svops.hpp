#pragma once

#include "cmdpbench/learners/common.hpp"

namespace cmdpbench {

// Sublinear-violation optimistic policy search: plays the policy induced by
// the projected occupancy and keeps the optimistic constraint set up to date.
class SvopsLearner {
 public:
  SvopsLearner(SpacePtr space, std::vector<double> alpha, long T, double delta, double eta,
               double gamma, OracleConfidence oracle = {})
      : core_(std::move(space), alpha, static_cast<int>(alpha.size()), T, delta, eta, gamma,
              oracle) {}

  AnyPolicy policy() const { return core_.policy(); }

  StepDiagnostics step(const Trajectory& traj) {
    const auto& sp = *core_.q_hat().space;
    std::vector<double> u = upper_occupancy_bound(core_.policy(), core_.confidence());
    return core_.step(u, traj, observations_from_trajectory(sp, traj), true);
  }

  const SvopsCore& core() const { return core_; }
  SvopsCore& core() { return core_; }

  nlohmann::json save_state() const { return {{"core", core_.save_state()}}; }
  void load_state(const nlohmann::json& j) { core_.load_state(j.at("core")); }

 private:
  SvopsCore core_;
};

}  // namespace cmdpbench
