// Command-line harness: run experiments, emit the lower-bound instances and
// solve the offline baseline.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "cmdpbench/env.hpp"
#include "cmdpbench/run.hpp"

namespace {

int cmd_run(const cmdpbench::ExperimentConfig& cfg) {
  cmdpbench::ExperimentSummary summary = cmdpbench::run_experiment(cfg);
  int failures = 0;
  for (const auto& r : summary.runs) {
    if (r.ok) {
      std::printf("seed %llu: R_T=%.6g V_T=%.6g safe=%d", (unsigned long long)r.seed,
                  r.final_regret, r.final_violation, r.safe_run ? 1 : 0);
      if (r.t_bar >= 0) std::printf(" t_bar=%ld rho_hat=%.6g", r.t_bar, r.rho_hat);
      std::printf(" p_R=%.3f p_V=%.3f (%.2fs)\n", r.p_regret.exponent, r.p_violation.exponent,
                  r.wall_time_s);
    } else {
      std::printf("seed %llu: ERROR %s\n", (unsigned long long)r.seed, r.error.c_str());
      ++failures;
    }
  }
  if (!summary.summary_path.empty()) std::printf("summary: %s\n", summary.summary_path.c_str());
  return failures == 0 ? 0 : 1;
}

int cmd_gen_lower_bound(long T, double rho, const std::string& out) {
  auto [i1, i2] = cmdpbench::lower_bound_instances(T, rho);
  std::filesystem::create_directories(out);
  cmdpbench::save_instance(i1, out + "/i1.json");
  cmdpbench::save_instance(i2, out + "/i2.json");
  std::printf("wrote %s/i1.json and %s/i2.json\n", out.c_str(), out.c_str());
  return 0;
}

int cmd_baseline(const std::string& instance_path, const std::string& losses_path) {
  cmdpbench::CmdpInstance inst = cmdpbench::load_instance(instance_path);
  std::vector<double> avg;
  if (!losses_path.empty()) {
    cmdpbench::LossSchedule file_losses =
        cmdpbench::LossSchedule::from_file(losses_path, inst.space->num_pairs());
    long rows = static_cast<long>(file_losses.fixed().size());
    avg = file_losses.average(rows);
  } else {
    avg = inst.losses.average(inst.horizon);
  }
  std::vector<std::vector<double>> cost_columns;
  for (int i = 0; i < inst.costs.m; ++i) cost_columns.push_back(inst.costs.mean_column(i));
  cmdpbench::OfflineOptResult res = cmdpbench::solve_offline_opt(
      avg, cost_columns, inst.alpha, cmdpbench::OccupancyPolytope::exact(inst.kernel));
  if (res.status != cmdpbench::OfflineOptResult::Status::Optimal) {
    std::printf("infeasible\n");
    return 1;
  }
  std::printf("OPT %.12g\n", res.value);
  const auto& sp = *inst.space;
  for (int x = 0; x < sp.num_states(); ++x) {
    if (sp.layer_of(x) == sp.horizon()) continue;
    for (int a = 0; a < sp.num_actions(); ++a) {
      double mass = res.q.pair_mass(x, a);
      if (mass > 1e-12)
        std::printf("q* %s a%d %.12g\n", sp.name(x).c_str(), a, mass);
    }
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Online learning benchmark for episodic constrained MDPs"};
  app.require_subcommand(1);

  cmdpbench::ExperimentConfig cfg;
  std::string seeds_csv = "1";
  std::string beta_csv;

  CLI::App* run = app.add_subcommand("run", "Run a learner over seeded episodes");
  run->add_option("--instance", cfg.instance_path, "instance JSON file")->required();
  run->add_option("--algo", cfg.algo, "svops | sops | cvops")->required();
  run->add_option("--T", cfg.T, "episodes (default: instance horizon)");
  run->add_option("--delta", cfg.delta, "confidence parameter");
  run->add_option("--eta", cfg.eta, "OMD step size (default: horizon-based rate)");
  run->add_option("--gamma", cfg.gamma, "exploration factor (default: horizon-based rate)");
  run->add_option("--seeds", seeds_csv, "comma-separated seeds");
  run->add_flag("--oracle-confidence", cfg.oracle_confidence,
                "inject exact transition/cost knowledge (debug)");
  run->add_option("--pi-diamond", cfg.pi_diamond_path, "strictly feasible policy JSON (sops)");
  run->add_option("--beta", beta_csv, "comma-separated strictly feasible costs (sops)");
  run->add_option("--cp", cfg.cp, "primal regret constant (cvops)");
  run->add_option("--cd", cfg.cd, "dual regret constant (cvops)");
  run->add_option("--uob-refresh", cfg.uob_refresh, "mixture UOB refresh interval");
  run->add_option("--out", cfg.out_dir, "output directory")->required();
  run->add_option("--checkpoint-at", cfg.checkpoint_at, "stop and checkpoint after episode N");
  run->add_option("--checkpoint-file", cfg.checkpoint_path, "checkpoint path");
  run->add_option("--resume-from", cfg.resume_path, "resume from checkpoint");
  run->add_flag("--sequential", [&cfg](std::size_t) { cfg.parallel = false; },
                "run seeds sequentially");
  run->add_flag("--log-projections", cfg.log_projections,
                "emit per-episode projection diagnostics CSVs");

  long gen_T = 1000;
  double gen_rho = 0.1;
  std::string gen_out = ".";
  CLI::App* gen = app.add_subcommand("gen-lower-bound", "Emit the two bandit instances");
  gen->add_option("--T", gen_T, "episodes")->required();
  gen->add_option("--rho", gen_rho, "Slater margin")->required();
  gen->add_option("--out", gen_out, "output directory")->required();

  std::string base_instance, base_losses;
  CLI::App* base = app.add_subcommand("baseline", "Solve the offline baseline LP");
  base->add_option("--instance", base_instance, "instance JSON file")->required();
  base->add_option("--losses", base_losses, "loss rows file (default: instance schedule)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) {
      cfg.seeds.clear();
      for (std::size_t pos = 0; pos < seeds_csv.size();) {
        std::size_t comma = seeds_csv.find(',', pos);
        if (comma == std::string::npos) comma = seeds_csv.size();
        cfg.seeds.push_back(std::stoull(seeds_csv.substr(pos, comma - pos)));
        pos = comma + 1;
      }
      if (!beta_csv.empty()) {
        cfg.beta.clear();
        for (std::size_t pos = 0; pos < beta_csv.size();) {
          std::size_t comma = beta_csv.find(',', pos);
          if (comma == std::string::npos) comma = beta_csv.size();
          cfg.beta.push_back(std::stod(beta_csv.substr(pos, comma - pos)));
          pos = comma + 1;
        }
      }
      return cmd_run(cfg);
    }
    if (gen->parsed()) return cmd_gen_lower_bound(gen_T, gen_rho, gen_out);
    if (base->parsed()) return cmd_baseline(base_instance, base_losses);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
