#pragma once

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <variant>
#include <vector>

#include "cmdpbench/generators.hpp"
#include "cmdpbench/learners/cvops.hpp"
#include "cmdpbench/learners/svops.hpp"
#include "cmdpbench/metrics.hpp"

namespace cmdpbench {

struct ExperimentConfig {
  std::string instance_path;
  InstancePtr instance;  // loaded lazily from instance_path when null
  std::string algo;      // svops | sops | cvops
  long T = 0;            // 0: use the instance horizon
  double delta = 0.05;
  double eta = 0.0;    // 0: default rate from the horizon
  double gamma = 0.0;  // 0: same default
  std::vector<std::uint64_t> seeds{1};
  bool oracle_confidence = false;
  // sops inputs
  std::string pi_diamond_path;
  std::optional<AnyPolicy> pi_diamond;
  std::vector<double> beta;
  // cvops constants
  double cp = 0.0;
  double cd = 0.0;
  double cp_delta = 10.0;
  int uob_refresh = 25;
  std::string out_dir;
  // checkpointing (single-seed runs)
  long checkpoint_at = -1;
  std::string checkpoint_path;
  std::string resume_path;
  bool parallel = true;
  bool log_projections = false;  // per-episode projection diagnostics CSV
};

struct RunResult {
  std::uint64_t seed = 0;
  bool ok = false;
  std::string error;
  double final_regret = 0.0;
  double final_violation = 0.0;
  bool safe_run = false;
  long t_bar = -1;       // cvops transition episode, -1 if none
  double rho_hat = 0.0;  // valid when t_bar >= 0
  GrowthFit p_regret;
  GrowthFit p_violation;
  double wall_time_s = 0.0;
  std::string csv_path;
};

namespace detail {

inline std::string fmt12(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

inline void atomic_write(const std::string& path, const std::string& content) {
  std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + tmp);
    out << content;
  }
  std::filesystem::rename(tmp, path);
}

using LearnerVariant = std::variant<SvopsLearner, SopsLearner, CvopsLearner>;

inline LearnerVariant make_learner(const ExperimentConfig& cfg, const CmdpInstance& inst, long T) {
  double eta = cfg.eta > 0.0 ? cfg.eta : default_learning_rate(*inst.space, T, cfg.delta);
  double gamma = cfg.gamma > 0.0 ? cfg.gamma : default_learning_rate(*inst.space, T, cfg.delta);
  OracleConfidence oracle;
  if (cfg.oracle_confidence) {
    oracle.kernel = &inst.kernel;
    oracle.costs = &inst.costs;
  }
  if (cfg.algo == "svops")
    return SvopsLearner(inst.space, inst.alpha, T, cfg.delta, eta, gamma, oracle);
  if (cfg.algo == "sops") {
    if (!cfg.pi_diamond || cfg.beta.size() != inst.alpha.size())
      throw std::invalid_argument("sops requires pi_diamond and beta of matching dimension");
    return SopsLearner(inst.space, inst.alpha, cfg.beta, *cfg.pi_diamond, T, cfg.delta, eta,
                       gamma, oracle, cfg.uob_refresh);
  }
  if (cfg.algo == "cvops") {
    CvopsParams params;
    params.c_p = cfg.cp;
    params.c_d = cfg.cd;
    params.c_p_delta = cfg.cp_delta;
    params.uob_refresh = cfg.uob_refresh;
    return CvopsLearner(inst.space, inst.alpha, T, cfg.delta, eta, gamma, params, oracle);
  }
  throw std::invalid_argument("unknown algorithm: " + cfg.algo);
}

}  // namespace detail

// Runs one seed of the configured experiment: the full interaction loop with
// exact evaluation against the hidden ground truth, per-episode CSV rows and
// optional checkpoint/resume. Deterministic given (config, seed).
class RunDriver {
 public:
  RunDriver(const ExperimentConfig& cfg, const CmdpInstance& inst, const BaselineResult& baseline,
            std::uint64_t seed)
      : cfg_(cfg),
        inst_(inst),
        baseline_(baseline),
        seed_(seed),
        T_(cfg.T > 0 ? cfg.T : inst.horizon),
        rng_(SplitRng::derive(seed, 0)),
        learner_(detail::make_learner(cfg, inst, cfg.T > 0 ? cfg.T : inst.horizon)) {
    for (int i = 0; i < inst_.costs.m; ++i) cost_columns_.push_back(inst_.costs.mean_column(i));
    viol_sums_.assign(inst_.costs.m, 0.0);
    if (const SopsLearner* s = std::get_if<SopsLearner>(&learner_))
      diamond_occupancy_ = occupancy_from_policy(inst_.kernel, s->pi_diamond());
  }

  RunResult run(long start_t = 1) {
    RunResult res;
    res.seed = seed_;
    auto t0 = std::chrono::steady_clock::now();
    try {
      if (start_t == 1) append_header_();
      for (long t = start_t; t <= T_; ++t) {
        episode_(t);
        if (cfg_.checkpoint_at == t && !cfg_.checkpoint_path.empty()) {
          write_checkpoint_(t);
          break;  // checkpointed partial run stops here
        }
      }
      res.ok = true;
    } catch (const std::exception& e) {
      res.error = e.what();
      res.ok = false;
    }
    res.wall_time_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    finalize_(res);
    return res;
  }

  // Restores learner, RNG cursor and metric accumulators; continues at t+1.
  RunResult resume(const nlohmann::json& ckpt) {
    long t_done = ckpt.at("t_done").get<long>();
    std::visit([&](auto& l) { l.load_state(ckpt.at("learner")); }, learner_);
    rng_.fast_forward(ckpt.at("rng_draws").get<std::uint64_t>());
    cum_regret_ = ckpt.at("cum_regret").get<double>();
    viol_sums_ = ckpt.at("viol_sums").get<std::vector<double>>();
    all_safe_ = ckpt.at("all_safe").get<bool>();
    regret_series_ = ckpt.at("regret_series").get<std::vector<double>>();
    violation_series_ = ckpt.at("violation_series").get<std::vector<double>>();
    if (const CvopsLearner* c = std::get_if<CvopsLearner>(&learner_)) {
      if (c->phase() == CvopsLearner::Phase::Running)
        diamond_occupancy_ = occupancy_from_policy(inst_.kernel, AnyPolicy(*c->pi_diamond()));
    }
    return run(t_done + 1);
  }

  const std::string& csv() const { return csv_; }

 private:
  struct PolicyParts {
    const AnyPolicy* diamond = nullptr;  // safe component, when mixing
    const Policy* proposal = nullptr;
    double lambda = 0.0;
    std::string phase = "-";
  };

  PolicyParts policy_parts_() {
    PolicyParts parts;
    if (SvopsLearner* s = std::get_if<SvopsLearner>(&learner_)) {
      parts.proposal = &s->core().policy();
      return parts;
    }
    if (SopsLearner* s = std::get_if<SopsLearner>(&learner_)) {
      parts.diamond = &s->pi_diamond();
      parts.proposal = &s->proposal_policy();
      parts.lambda = s->lambda();
      return parts;
    }
    CvopsLearner& c = std::get<CvopsLearner>(learner_);
    if (c.phase() == CvopsLearner::Phase::Estimating) {
      parts.proposal = &c.primal().policy();
      parts.phase = "est";
    } else {
      parts.diamond = &c.nested()->pi_diamond();
      parts.proposal = &c.nested()->proposal_policy();
      parts.lambda = c.nested()->lambda();
      parts.phase = "run";
    }
    return parts;
  }

  void episode_(long t) {
    PolicyParts parts = policy_parts_();
    // Resolve the safe-vs-proposal randomization here; an inner mixture
    // (the cvops pi_diamond) resolves inside run_episode.
    bool play_diamond = false;
    if (parts.diamond != nullptr && parts.lambda > 0.0)
      play_diamond = parts.lambda >= 1.0 || rng_.bernoulli(parts.lambda);

    Trajectory traj;
    if (play_diamond) {
      traj = run_episode(inst_, t, *parts.diamond, rng_);
    } else {
      traj = run_episode(inst_, t, AnyPolicy(*parts.proposal), rng_);
    }

    // Exact evaluation occupancy of the selected (mixture) policy.
    OccupancyMeasure q_prop = exact_episode_occupancy(inst_.kernel, AnyPolicy(*parts.proposal));
    OccupancyMeasure q_t = q_prop;
    if (parts.diamond != nullptr && parts.lambda > 0.0) {
      if (!diamond_occupancy_)
        diamond_occupancy_ = exact_episode_occupancy(inst_.kernel, *parts.diamond);
      for (std::size_t i = 0; i < q_t.q.size(); ++i)
        q_t.q[i] = parts.lambda * diamond_occupancy_->q[i] + (1.0 - parts.lambda) * q_prop.q[i];
    }

    std::vector<double> loss_row = inst_.losses.row(t);
    double expected_loss = expected_value(q_t, loss_row);
    cum_regret_ += expected_loss - expected_value(baseline_.q_star, loss_row);
    double v_t = 0.0;
    std::vector<double> costs(inst_.costs.m);
    bool safe = true;
    for (int i = 0; i < inst_.costs.m; ++i) {
      costs[i] = expected_value(q_t, cost_columns_[i]);
      viol_sums_[i] += std::max(0.0, costs[i] - inst_.alpha[i]);
      v_t = std::max(v_t, viol_sums_[i]);
      safe = safe && costs[i] <= inst_.alpha[i] + 1e-9;
    }
    all_safe_ = all_safe_ && safe;
    regret_series_.push_back(cum_regret_);
    violation_series_.push_back(v_t);

    bool was_estimating = parts.phase == "est";
    StepDiagnostics diag = std::visit([&](auto& l) { return l.step(traj); }, learner_);
    if (cfg_.log_projections) {
      char buf[120];
      std::snprintf(buf, sizeof(buf), "%ld,%d,%d,%.6g,%.6g\n", t, diag.proj_feasible ? 1 : 0,
                    diag.proj_iterations, diag.proj_violation, diag.proj_complementarity);
      proj_log_ += buf;
    }
    if (was_estimating) {
      CvopsLearner& c = std::get<CvopsLearner>(learner_);
      if (c.phase() == CvopsLearner::Phase::Running)
        diamond_occupancy_ = occupancy_from_policy(inst_.kernel, AnyPolicy(*c.pi_diamond()));
    }

    append_row_(t, traj.realized_loss(), expected_loss, costs, v_t, parts.lambda,
                diag.proj_feasible, parts.phase);
  }

  void append_header_() {
    csv_ = "t,realized_loss,expected_loss";
    for (int i = 1; i <= inst_.costs.m; ++i) csv_ += ",expected_cost_" + std::to_string(i);
    csv_ += ",cum_regret,cum_violation,lambda,proj_feasible,phase,seed,algo\n";
  }

  void append_row_(long t, double realized, double expected, const std::vector<double>& costs,
                   double v_t, double lambda, bool feasible, const std::string& phase) {
    csv_ += std::to_string(t) + "," + detail::fmt12(realized) + "," + detail::fmt12(expected);
    for (double c : costs) csv_ += "," + detail::fmt12(c);
    csv_ += "," + detail::fmt12(cum_regret_) + "," + detail::fmt12(v_t) + "," +
            detail::fmt12(lambda) + "," + (feasible ? "1" : "0") + "," + phase + "," +
            std::to_string(seed_) + "," + cfg_.algo + "\n";
  }

  void write_checkpoint_(long t) {
    nlohmann::json j;
    j["algo"] = cfg_.algo;
    j["seed"] = seed_;
    j["t_done"] = t;
    j["rng_draws"] = rng_.draw_count();
    j["learner"] = std::visit([](const auto& l) { return l.save_state(); }, learner_);
    j["cum_regret"] = cum_regret_;
    j["viol_sums"] = viol_sums_;
    j["all_safe"] = all_safe_;
    j["regret_series"] = regret_series_;
    j["violation_series"] = violation_series_;
    detail::atomic_write(cfg_.checkpoint_path, j.dump());
  }

  void finalize_(RunResult& res) {
    res.final_regret = regret_series_.empty() ? 0.0 : regret_series_.back();
    res.final_violation = violation_series_.empty() ? 0.0 : violation_series_.back();
    res.safe_run = all_safe_;
    res.p_regret = fit_growth_exponent(regret_series_, 0.5);
    res.p_violation = fit_growth_exponent(violation_series_, 0.5);
    if (const CvopsLearner* c = std::get_if<CvopsLearner>(&learner_)) {
      res.t_bar = c->transition_episode();
      res.rho_hat = c->rho_hat();
    }
  }

  const ExperimentConfig& cfg_;
  const CmdpInstance& inst_;
  const BaselineResult& baseline_;
  std::uint64_t seed_;
  long T_;
  SplitRng rng_;
  detail::LearnerVariant learner_;
  std::vector<std::vector<double>> cost_columns_;
  std::optional<OccupancyMeasure> diamond_occupancy_;
  double cum_regret_ = 0.0;
  std::vector<double> viol_sums_;
  bool all_safe_ = true;
  std::vector<double> regret_series_;
  std::vector<double> violation_series_;
  std::string csv_;
  std::string proj_log_ = "t,proj_feasible,iterations,max_violation,complementarity\n";

 public:
  const std::string& projection_log() const { return proj_log_; }
};

struct ExperimentSummary {
  std::vector<RunResult> runs;
  std::string summary_path;
};

// Self-contained companion script for the emitted CSVs; the core carries no
// graphics dependency.
inline std::string plot_script_template() {
  return R"PY(#!/usr/bin/env python3
"""Plot cumulative regret and violation from the run CSVs in this directory."""
import csv
import glob
import os
import sys

try:
    import matplotlib.pyplot as plt
except ImportError:
    sys.exit("matplotlib is required: pip install matplotlib")

here = os.path.dirname(os.path.abspath(__file__))
fig, (ax_r, ax_v) = plt.subplots(1, 2, figsize=(11, 4))
for path in sorted(glob.glob(os.path.join(here, "run_seed*.csv"))):
    ts, regret, violation = [], [], []
    with open(path) as f:
        for row in csv.DictReader(f):
            ts.append(int(row["t"]))
            regret.append(float(row["cum_regret"]))
            violation.append(float(row["cum_violation"]))
    label = os.path.basename(path).replace(".csv", "")
    ax_r.plot(ts, regret, label=label, linewidth=0.8)
    ax_v.plot(ts, violation, label=label, linewidth=0.8)
ax_r.set_xlabel("episode"); ax_r.set_ylabel("cumulative regret")
ax_v.set_xlabel("episode"); ax_v.set_ylabel("cumulative positive violation")
ax_r.legend(fontsize=6); ax_v.legend(fontsize=6)
fig.tight_layout()
out = os.path.join(here, "runs.png")
fig.savefig(out, dpi=150)
print("wrote", out)
)PY";
}

// Fans seeds out (in parallel when asked), writes one CSV per run atomically
// plus a merged summary.json. A failed seed is recorded and does not abort
// the batch.
inline ExperimentSummary run_experiment(const ExperimentConfig& cfg_in) {
  ExperimentConfig cfg = cfg_in;
  if (!cfg.instance) {
    if (cfg.instance_path.empty()) throw std::invalid_argument("no instance configured");
    cfg.instance = std::make_shared<const CmdpInstance>(load_instance(cfg.instance_path));
  }
  const CmdpInstance& inst = *cfg.instance;
  if (cfg.algo == "sops" && !cfg.pi_diamond && !cfg.pi_diamond_path.empty()) {
    std::ifstream in(cfg.pi_diamond_path);
    if (!in) throw std::runtime_error("cannot open " + cfg.pi_diamond_path);
    nlohmann::json j;
    in >> j;
    cfg.pi_diamond = any_policy_from_json(inst.space, j);
  }
  if (!cfg.out_dir.empty()) std::filesystem::create_directories(cfg.out_dir);
  BaselineResult baseline = solve_baseline(inst);

  std::optional<nlohmann::json> resume_ckpt;
  if (!cfg.resume_path.empty()) {
    if (cfg.seeds.size() != 1)
      throw std::invalid_argument("resume requires a single seed");
    std::ifstream in(cfg.resume_path);
    if (!in) throw std::runtime_error("cannot open " + cfg.resume_path);
    resume_ckpt.emplace();
    in >> *resume_ckpt;
  }

  // Config-level validation up front; per-seed failures are recorded below
  // and never abort the batch.
  if (cfg.algo != "svops" && cfg.algo != "sops" && cfg.algo != "cvops")
    throw std::invalid_argument("unknown algorithm: " + cfg.algo);
  if (cfg.algo == "sops" && (!cfg.pi_diamond || cfg.beta.size() != inst.alpha.size()))
    throw std::invalid_argument("sops requires pi_diamond and beta of matching dimension");
  if (cfg.T > inst.horizon)
    throw std::invalid_argument("configured T exceeds the instance horizon");
  if (cfg.delta <= 0.0 || cfg.delta >= 1.0)
    throw std::invalid_argument("delta must lie in (0,1)");

  ExperimentSummary summary;
  summary.runs.resize(cfg.seeds.size());
  std::mutex io_mutex;

  auto run_one = [&](std::size_t idx) {
    std::uint64_t seed = cfg.seeds[idx];
    RunResult res;
    res.seed = seed;
    try {
      RunDriver driver(cfg, inst, baseline, seed);
      res = resume_ckpt ? driver.resume(*resume_ckpt) : driver.run();
      if (!cfg.out_dir.empty()) {
        std::string name = cfg.out_dir + "/run_seed" + std::to_string(seed) +
                           (resume_ckpt ? "_resumed" : "") + ".csv";
        detail::atomic_write(name, driver.csv());
        res.csv_path = name;
        if (cfg.log_projections)
          detail::atomic_write(cfg.out_dir + "/proj_seed" + std::to_string(seed) + ".csv",
                               driver.projection_log());
      }
    } catch (const std::exception& e) {
      res.ok = false;
      res.error = e.what();
    }
    std::lock_guard<std::mutex> lock(io_mutex);
    summary.runs[idx] = std::move(res);
  };

  unsigned workers = cfg.parallel ? std::max(1u, std::thread::hardware_concurrency()) : 1u;
  if (workers <= 1 || cfg.seeds.size() <= 1) {
    for (std::size_t i = 0; i < cfg.seeds.size(); ++i) run_one(i);
  } else {
    std::vector<std::thread> pool;
    std::size_t next = 0;
    std::mutex next_mutex;
    for (unsigned w = 0; w < std::min<std::size_t>(workers, cfg.seeds.size()); ++w) {
      pool.emplace_back([&]() {
        while (true) {
          std::size_t idx;
          {
            std::lock_guard<std::mutex> lock(next_mutex);
            if (next >= cfg.seeds.size()) return;
            idx = next++;
          }
          run_one(idx);
        }
      });
    }
    for (auto& th : pool) th.join();
  }

  if (!cfg.out_dir.empty()) {
    nlohmann::json j;
    j["config"] = {{"instance", cfg.instance_path},
                   {"algo", cfg.algo},
                   {"T", cfg.T > 0 ? cfg.T : inst.horizon},
                   {"delta", cfg.delta},
                   {"eta", cfg.eta},
                   {"gamma", cfg.gamma},
                   {"oracle_confidence", cfg.oracle_confidence},
                   {"cp", cfg.cp},
                   {"cd", cfg.cd},
                   {"cp_delta", cfg.cp_delta},
                   {"uob_refresh", cfg.uob_refresh},
                   {"beta", cfg.beta},
                   {"seeds", cfg.seeds},
                   {"loss_schedule", schedule_to_json(inst.losses)}};
    nlohmann::json runs = nlohmann::json::array();
    for (const auto& r : summary.runs) {
      runs.push_back({{"seed", r.seed},
                      {"status", r.ok ? "ok" : "error"},
                      {"error", r.error},
                      {"final_regret", r.final_regret},
                      {"final_violation", r.final_violation},
                      {"safe_run", r.safe_run},
                      {"t_bar", r.t_bar},
                      {"rho_hat", r.rho_hat},
                      {"p_regret", r.p_regret.exponent},
                      {"p_regret_degenerate", r.p_regret.degenerate},
                      {"p_violation", r.p_violation.exponent},
                      {"p_violation_degenerate", r.p_violation.degenerate},
                      {"wall_time_s", r.wall_time_s},
                      {"csv", r.csv_path}});
    }
    j["runs"] = runs;
    summary.summary_path = cfg.out_dir + "/summary.json";
    detail::atomic_write(summary.summary_path, j.dump(1));
    detail::atomic_write(cfg.out_dir + "/plot.py", plot_script_template());
  }
  return summary;
}

}  // namespace cmdpbench
