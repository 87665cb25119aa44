#pragma once

#include <fstream>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "cmdpbench/cost_model.hpp"
#include "cmdpbench/kernel.hpp"
#include "cmdpbench/loss_schedule.hpp"

namespace cmdpbench {

// Episodic constrained MDP: layered space, ground-truth kernel (hidden from
// learners), loss schedule, stochastic costs, thresholds and horizon.
struct CmdpInstance {
  SpacePtr space;
  TransitionKernel kernel;
  LossSchedule losses;
  CostDistribution costs;
  std::vector<double> alpha;  // m thresholds in [0, L]
  long horizon = 0;           // T

  int num_constraints() const { return static_cast<int>(alpha.size()); }

  void validate() const {
    kernel.validate(1e-9);
    costs.validate();
    if (alpha.empty()) throw std::invalid_argument("instance: need m >= 1 constraints");
    if (horizon < 1) throw std::invalid_argument("instance: need T >= 1");
    for (double a : alpha)
      if (a < 0.0 || a > static_cast<double>(space->horizon()))
        throw std::invalid_argument("instance: alpha outside [0, L]");
    if (static_cast<int>(alpha.size()) != costs.m)
      throw std::invalid_argument("instance: alpha/cost dimension mismatch");
  }
};

using InstancePtr = std::shared_ptr<const CmdpInstance>;

inline nlohmann::json schedule_to_json(const LossSchedule& s) {
  nlohmann::json j;
  switch (s.kind()) {
    case LossSchedule::Kind::FixedSequence:
      j["kind"] = "fixed";
      j["rows"] = s.fixed();
      break;
    case LossSchedule::Kind::PiecewiseStationary:
      j["kind"] = "piecewise";
      j["segment_length"] = s.period();
      j["seed"] = s.seed();
      break;
    case LossSchedule::Kind::AbruptSwitching:
      j["kind"] = "switching";
      j["period"] = s.period();
      j["seed"] = s.seed();
      break;
  }
  return j;
}

inline LossSchedule schedule_from_json(const nlohmann::json& j, int num_pairs,
                                       const std::string& base_dir = "") {
  std::string kind = j.at("kind").get<std::string>();
  if (kind == "fixed")
    return LossSchedule::fixed_rows(j.at("rows").get<std::vector<std::vector<double>>>());
  if (kind == "file") {
    std::string path = j.at("path").get<std::string>();
    if (!base_dir.empty() && !path.empty() && path[0] != '/') path = base_dir + "/" + path;
    return LossSchedule::from_file(path, num_pairs);
  }
  if (kind == "piecewise")
    return LossSchedule::piecewise_stationary(num_pairs, j.at("segment_length").get<int>(),
                                              j.at("seed").get<std::uint64_t>());
  if (kind == "switching")
    return LossSchedule::abrupt_switching(num_pairs, j.at("period").get<int>(),
                                          j.at("seed").get<std::uint64_t>());
  throw std::invalid_argument("unknown loss schedule kind: " + kind);
}

inline nlohmann::json instance_to_json(const CmdpInstance& inst) {
  const auto& sp = *inst.space;
  nlohmann::json j;
  std::vector<std::vector<std::string>> layers;
  for (int k = 0; k < sp.num_layers(); ++k) {
    std::vector<std::string> names;
    for (int i = 0; i < sp.layer_size(k); ++i) names.push_back(sp.name(sp.layer_first(k) + i));
    layers.push_back(std::move(names));
  }
  j["layers"] = layers;
  j["actions"] = sp.num_actions();
  nlohmann::json kernel = nlohmann::json::array();
  for (int x = 0; x < sp.num_states(); ++x) {
    if (sp.layer_of(x) == sp.horizon()) continue;
    for (int a = 0; a < sp.num_actions(); ++a)
      for (int s = 0; s < sp.succ_count(x); ++s) {
        double p = inst.kernel.prob(x, a, s);
        if (p == 0.0) continue;
        kernel.push_back({{"x", sp.name(x)}, {"a", a}, {"xp", sp.name(sp.succ_state(x, s))}, {"p", p}});
      }
  }
  j["kernel"] = kernel;
  j["alpha"] = inst.alpha;
  nlohmann::json cm = nlohmann::json::array();
  for (int x = 0; x < sp.num_states(); ++x)
    for (int a = 0; a < sp.num_actions(); ++a)
      for (int i = 0; i < inst.costs.m; ++i) {
        double mu = inst.costs.mean(x, a, i);
        if (mu == 0.0) continue;
        cm.push_back({{"x", sp.name(x)}, {"a", a}, {"i", i}, {"mean", mu}});
      }
  j["cost_means"] = cm;
  j["cost_family"] = inst.costs.family == CostDistribution::Family::Bernoulli ? "bernoulli" : "beta";
  if (inst.costs.family == CostDistribution::Family::Beta)
    j["beta_concentration"] = inst.costs.beta_concentration;
  j["loss_schedule"] = schedule_to_json(inst.losses);
  j["horizon"] = inst.horizon;
  return j;
}

inline CmdpInstance instance_from_json(const nlohmann::json& j, const std::string& base_dir = "") {
  auto layer_names = j.at("layers").get<std::vector<std::vector<std::string>>>();
  int actions = j.at("actions").get<int>();
  auto space = std::make_shared<const LayeredStateSpace>(layer_names, actions);

  CmdpInstance inst;
  inst.space = space;
  inst.kernel = TransitionKernel(space);
  for (const auto& e : j.at("kernel")) {
    int x = space->state_by_name(e.at("x").get<std::string>());
    int xp = space->state_by_name(e.at("xp").get<std::string>());
    int a = e.at("a").get<int>();
    if (space->layer_of(xp) != space->layer_of(x) + 1)
      throw std::invalid_argument("kernel edge does not respect layers");
    inst.kernel.prob(x, a, space->succ_index(x, xp)) = e.at("p").get<double>();
  }
  inst.alpha = j.at("alpha").get<std::vector<double>>();
  inst.costs = CostDistribution(space, static_cast<int>(inst.alpha.size()));
  if (j.contains("cost_means"))
    for (const auto& e : j.at("cost_means")) {
      int x = space->state_by_name(e.at("x").get<std::string>());
      inst.costs.mean(x, e.at("a").get<int>(), e.at("i").get<int>()) = e.at("mean").get<double>();
    }
  if (j.value("cost_family", std::string("bernoulli")) == "beta") {
    inst.costs.family = CostDistribution::Family::Beta;
    inst.costs.beta_concentration = j.value("beta_concentration", 4.0);
  }
  inst.losses = schedule_from_json(j.at("loss_schedule"), space->num_pairs(), base_dir);
  inst.horizon = j.at("horizon").get<long>();
  inst.validate();
  return inst;
}

inline void save_instance(const CmdpInstance& inst, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << instance_to_json(inst).dump(1) << "\n";
}

inline CmdpInstance load_instance(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  nlohmann::json j;
  in >> j;
  std::string base_dir;
  auto slash = path.find_last_of('/');
  if (slash != std::string::npos) base_dir = path.substr(0, slash);
  return instance_from_json(j, base_dir);
}

}  // namespace cmdpbench
