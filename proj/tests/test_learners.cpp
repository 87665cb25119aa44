#include <catch2/catch.hpp>

#include "cmdpbench/learners/cvops.hpp"
#include "cmdpbench/learners/svops.hpp"
#include "cmdpbench/metrics.hpp"
#include "test_util.hpp"

using namespace cmdpbench;

namespace {

OracleConfidence oracle_for(const CmdpInstance& inst) {
  OracleConfidence o;
  o.kernel = &inst.kernel;
  o.costs = &inst.costs;
  return o;
}

}  // namespace

TEST_CASE("loss estimator values") {
  auto inst = testutil::bandit_instance(0.5, 0.4, 0.5, 10);
  const auto& sp = *inst.space;
  std::vector<double> u(sp.num_pairs(), 0.5);
  std::vector<std::pair<int, double>> obs{{sp.pair_id(0, 0), 1.0}};
  std::vector<double> lhat = loss_estimator(sp, obs, u, 0.0);
  REQUIRE(lhat[sp.pair_id(0, 0)] == Approx(2.0));
  REQUIRE(lhat[sp.pair_id(0, 1)] == 0.0);  // unvisited
  lhat = loss_estimator(sp, obs, u, 0.5);
  REQUIRE(lhat[sp.pair_id(0, 0)] == Approx(1.0));
}

TEST_CASE("svops with oracle confidence is feasible and safe every episode") {
  SplitRng gen(3001);
  auto inst = random_instance({1, 2, 1}, 2, gen);
  long T = 150;
  double rate = default_learning_rate(*inst.space, T, 0.05);
  SvopsLearner learner(inst.space, inst.alpha, T, 0.05, rate, rate, oracle_for(inst));
  SplitRng rng = SplitRng::derive(1, 0);
  std::vector<double> gcol = inst.costs.mean_column(0);
  for (long t = 1; t <= T; ++t) {
    AnyPolicy pi = learner.policy();
    Trajectory traj = run_episode(inst, std::min(t, inst.horizon), pi, rng);
    StepDiagnostics diag = learner.step(traj);
    REQUIRE(diag.proj_feasible);
    REQUIRE(expected_value(learner.core().q_hat(), gcol) <= inst.alpha[0] + 1e-8);
  }
}

TEST_CASE("svops first update from uniform with zero loss stays uniform") {
  auto inst = testutil::bandit_instance(0.5, 0.4, 0.5, 100);
  double rate = default_learning_rate(*inst.space, 100, 0.05);
  SvopsLearner learner(inst.space, inst.alpha, 100, 0.05, rate, rate, oracle_for(inst));
  // Zero losses: feed a trajectory whose observed loss is 0.
  Trajectory traj;
  traj.t = 1;
  TrajectoryStep s;
  s.x = 0;
  s.a = 0;
  s.x_next = 1;
  s.loss = 0.0;
  s.costs = {0.0};
  traj.steps = {s};
  learner.step(traj);
  REQUIRE(learner.core().q_hat().pair_mass(0, 0) == Approx(0.5).margin(1e-8));
  REQUIRE(learner.core().q_hat().pair_mass(0, 1) == Approx(0.5).margin(1e-8));
}

TEST_CASE("svops on the boundary bandit concentrates on the cheap-loss action") {
  // On the second lower-bound instance with oracle confidence the constraint
  // is satisfied by every occupancy, so OMD drives mass to action a1.
  auto inst = testutil::bandit_instance(0.5, 0.4, 0.5, 400);
  SvopsLearner learner(inst.space, inst.alpha, 400, 0.05, 0.1, 0.05, oracle_for(inst));
  SplitRng rng = SplitRng::derive(7, 0);
  for (long t = 1; t <= 400; ++t) {
    Trajectory traj = run_episode(inst, t, learner.policy(), rng);
    StepDiagnostics diag = learner.step(traj);
    REQUIRE(diag.proj_feasible);
  }
  REQUIRE(learner.core().q_hat().pair_mass(0, 0) > 0.9);
}

TEST_CASE("sops mixing probability branches") {
  auto space = LayeredStateSpace::make({1, 1}, 2);
  CostEstimate est;
  est.m = 1;
  est.g_hat.assign(space->num_pairs(), 0.0);
  est.xi.assign(space->num_pairs(), 0.0);
  std::vector<double> u(space->num_pairs(), 0.0);

  // All optimistic costs below alpha: lambda = 0.
  est.g_hat[0] = 0.2;
  u[0] = 1.0;
  REQUIRE(sops_mixing_probability(est, u, std::vector<double>{1.0}, std::vector<double>{0.5},
                                  2.0) == 0.0);

  // Optimistic cost 3 clipped at L = 2, alpha = 1, beta = 0.5: 2/3.
  est.g_hat[0] = 1.0;
  u[0] = 1.0;
  est.g_hat[space->num_pairs() - 1] = 1.0;
  u[space->num_pairs() - 1] = 1.0;
  // (g_hat + xi)^T u = 2 with these entries; push it to 3 with xi.
  est.xi.assign(space->num_pairs(), 0.5);
  REQUIRE(sops_mixing_probability(est, u, std::vector<double>{1.0}, std::vector<double>{0.5},
                                  2.0) == Approx(2.0 / 3.0));
  REQUIRE(sops_initial_lambda(std::vector<double>{1.0}, std::vector<double>{0.5}, 2.0) ==
          Approx(2.0 / 3.0));
}

TEST_CASE("sops mixing probability takes the max over violated constraints") {
  auto space = LayeredStateSpace::make({1, 1}, 1);
  CostEstimate est;
  est.m = 2;
  // One pair; v_1 = 2 (clipped), v_2 = 1.2.
  est.g_hat = {2.5, 1.2};
  est.xi = {0.0};
  std::vector<double> u{1.0};
  std::vector<double> alpha{1.0, 1.0}, beta{0.5, 0.2};
  // i=1: (2-1)/(2-0.5) = 2/3; i=2: (1.2-1)/(1.2-0.2) = 1/5.
  REQUIRE(sops_mixing_probability(est, u, alpha, beta, 2.0) == Approx(2.0 / 3.0));
  REQUIRE_THROWS_AS(
      sops_mixing_probability(est, u, alpha, std::vector<double>{1.0, 0.2}, 2.0),
      std::invalid_argument);
}

TEST_CASE("sops with oracle confidence degenerates to the proposal policy") {
  SplitRng gen(3100);
  auto inst = random_instance({1, 2, 1}, 2, gen);
  Policy pid = testutil::slater3_pi_diamond(inst.space);
  // Use an interior feasible policy as pi_diamond.
  OccupancyMeasure qd = occupancy_from_policy(inst.kernel, pid);
  double bd = expected_value(qd, inst.costs.mean_column(0));
  if (bd >= inst.alpha[0]) return;  // random corpus occasionally unsuitable
  SopsLearner learner(inst.space, inst.alpha, {bd}, AnyPolicy(pid), 200, 0.05, 0.05, 0.05,
                      oracle_for(inst));
  SplitRng rng = SplitRng::derive(11, 0);
  for (long t = 1; t <= 50; ++t) {
    Trajectory traj = run_episode(inst, std::min(t, inst.horizon), learner.policy(), rng);
    StepDiagnostics diag = learner.step(traj);
    REQUIRE(diag.proj_feasible);
    // With exact confidence the optimistic costs are truthful, so the
    // proposal is feasible and no mixing is needed.
    REQUIRE(diag.lambda == 0.0);
  }
}

TEST_CASE("sops pessimism identity and lambda ceiling") {
  auto inst = testutil::slater3_instance(600);
  Policy pid = testutil::slater3_pi_diamond(inst.space);
  double bd = testutil::slater3_beta(inst, pid);
  double L = inst.space->horizon();
  double lambda0 = sops_initial_lambda(inst.alpha, std::vector<double>{bd}, L);
  double rate = default_learning_rate(*inst.space, 600, 0.05);
  SopsLearner learner(inst.space, inst.alpha, {bd}, AnyPolicy(pid), 600, 0.05, rate, rate);
  SplitRng rng = SplitRng::derive(21, 0);
  REQUIRE(learner.lambda() == Approx(lambda0));
  for (long t = 1; t <= 600; ++t) {
    Trajectory traj = run_episode(inst, t, learner.policy(), rng);
    StepDiagnostics diag = learner.step(traj);
    if (diag.proj_feasible) {
      REQUIRE(diag.lambda <= lambda0 + 1e-12);
      for (std::size_t i = 0; i < diag.optimistic_costs.size(); ++i) {
        double mix_cost =
            diag.lambda * bd + (1.0 - diag.lambda) * diag.optimistic_costs[i];
        REQUIRE(mix_cost <= inst.alpha[i] + 1e-9);
      }
    } else {
      REQUIRE(diag.lambda == 1.0);
    }
  }
}

TEST_CASE("cvops stopping threshold matches direct evaluation") {
  // t = 1e4, C_P = C_D = 1, delta = 0.05, L = 2:
  // 2 sqrt(t ln t) + 8L sqrt(2 t ln 20) + 2 sqrt(t) = 4723.35...
  double threshold = cvops_stopping_threshold(10000, 1.0, 1.0, 2.0, 0.05);
  double direct = 2.0 * std::sqrt(1e4 * std::log(1e4)) +
                  16.0 * std::sqrt(2e4 * std::log(20.0)) + 2.0 * std::sqrt(1e4);
  REQUIRE(threshold == Approx(direct).margin(1e-9));
  REQUIRE(threshold == Approx(4723.35).margin(0.5));

  // Per-episode sum -0.5 (alpha = 1, L = 2, g = 0): fires at t = 1e4.
  std::vector<double> S{-0.5 * 10000};
  REQUIRE(cvops_stopping_condition(S, 10000, 1.0, 1.0, 2.0, 0.05));
  // g = alpha/L exactly: the sums vanish and the condition never fires.
  std::vector<double> zero{0.0};
  REQUIRE_FALSE(cvops_stopping_condition(zero, 10000, 1.0, 1.0, 2.0, 0.05));
}

TEST_CASE("cvops stopping cannot fire at t = 1") {
  // Single-episode sums are bounded by L while the threshold already
  // exceeds 8L sqrt(2 ln(1/delta)).
  double L = 2.0;
  REQUIRE(cvops_stopping_threshold(1, 1.0, 0.0, L, 0.05) >=
          8.0 * L * std::sqrt(2.0 * std::log(20.0)));
  std::vector<double> S{-L};
  REQUIRE_FALSE(cvops_stopping_condition(S, 1, 1.0, 1.0, L, 0.05));
}

TEST_CASE("slater estimate matches direct evaluation") {
  // g = 0, L = 2, alpha = 0.5, t = 1000, delta = 0.05.
  std::vector<double> R{-0.5 * 1000};
  double rho = estimate_slater(R, 1000, 2.0, 0.05);
  double direct = 0.5 - (4.0 / 1000.0) * std::sqrt(2000.0 * std::log(20.0));
  REQUIRE(rho == Approx(direct).margin(1e-12));
  REQUIRE(rho == Approx(0.19038).margin(1e-4));

  // The penalty vanishes as t grows.
  std::vector<double> Rbig{-0.5 * 1e9};
  REQUIRE(estimate_slater(Rbig, 1000000000L, 2.0, 0.05) == Approx(0.5).margin(1e-3));

  // The max constraint wins.
  std::vector<double> R2{-100.0, -400.0};
  double with_max = estimate_slater(R2, 1000, 2.0, 0.05);
  double only_first = estimate_slater(std::vector<double>{-100.0}, 1000, 2.0, 0.05);
  REQUIRE(with_max == Approx(only_first));
}

TEST_CASE("uniform mixture of played policies") {
  auto space = LayeredStateSpace::make({1, 1}, 2);
  Policy p1(space), p2(space);
  p1.prob(0, 0) = 1.0;
  p2.prob(0, 1) = 1.0;
  MixturePolicy mix = build_mixture_policy({p1, p2});
  REQUIRE(mix.weights == std::vector<double>{0.5, 0.5});
  auto inst = testutil::bandit_instance(0.5, 0.4, 0.5, 10);
  OccupancyMeasure q = occupancy_from_policy(inst.kernel, mix);
  REQUIRE(q.pair_mass(0, 0) == Approx(0.5));
  MixturePolicy single = build_mixture_policy({p1});
  REQUIRE(occupancy_from_policy(inst.kernel, single).pair_mass(0, 0) == Approx(1.0));
}

TEST_CASE("anytime primal epochs double and reset the rate") {
  auto inst = testutil::slater3_instance(64);
  AnytimePrimal primal(inst.space, 64, 0.05, 0.25);
  SplitRng rng = SplitRng::derive(3, 0);
  std::vector<int> boundaries;
  int last_epoch = 0;
  for (long t = 1; t <= 40; ++t) {
    Trajectory traj = run_episode(inst, t, AnyPolicy(primal.policy()), rng);
    std::vector<std::pair<int, double>> raw;
    for (std::size_t k = 1; k < traj.steps.size(); ++k)
      raw.push_back({inst.space->pair_id(traj.steps[k].x, traj.steps[k].a), 0.3});
    primal.feed(t, traj, raw);
    if (primal.epoch() != last_epoch) {
      boundaries.push_back(static_cast<int>(t + 1));  // next episode starts the epoch
      last_epoch = primal.epoch();
    }
  }
  REQUIRE(boundaries == std::vector<int>{2, 4, 8, 16, 32});
  double expect_eta = std::sqrt(2.0 * std::log(2.0 * 4 * 2 / 0.05) / (32.0 * 4 * 2));
  REQUIRE(primal.core().eta() == Approx(expect_eta));
}

TEST_CASE("cvops feeds the exact primal and dual losses") {
  auto inst = testutil::slater3_instance(200);
  double rate = default_learning_rate(*inst.space, 200, 0.05);
  CvopsParams params;
  params.c_p = 1.0;
  params.c_d = 1.0;
  CvopsLearner learner(inst.space, inst.alpha, 200, 0.05, rate, rate, params);
  REQUIRE(learner.phi() == std::vector<double>{1.0});  // m = 1 simplex is a point
  SplitRng rng = SplitRng::derive(5, 0);
  double expected_S = 0.0;
  for (long t = 1; t <= 30; ++t) {
    Trajectory traj = run_episode(inst, t, learner.policy(), rng);
    for (std::size_t k = 1; k < traj.steps.size(); ++k)
      expected_S += traj.steps[k].costs[0] - inst.alpha[0] / inst.space->horizon();
    learner.step(traj);
    REQUIRE(learner.violation_sums()[0] == Approx(expected_S).margin(1e-12));
    REQUIRE(learner.phi() == std::vector<double>{1.0});
  }
}

TEST_CASE("cvops transitions once and delegates to the nested learner") {
  auto inst = testutil::slater4_instance(20000);
  double rate = default_learning_rate(*inst.space, 20000, 0.05);
  CvopsParams params;
  params.c_p = 0.3;
  params.c_d = 0.3;
  params.uob_refresh = 50;
  CvopsLearner learner(inst.space, inst.alpha, 20000, 0.05, rate, rate, params);
  SplitRng rng = SplitRng::derive(40, 0);
  long transition_seen = -1;
  long T = 12000;
  for (long t = 1; t <= T; ++t) {
    Trajectory traj = run_episode(inst, t, learner.policy(), rng);
    learner.step(traj);
    if (learner.phase() == CvopsLearner::Phase::Running && transition_seen < 0) {
      transition_seen = learner.transition_episode();
      REQUIRE(transition_seen == t);
    }
    if (transition_seen > 0)
      REQUIRE(learner.phase() == CvopsLearner::Phase::Running);  // transitions exactly once
    if (transition_seen > 0 && t > transition_seen + 50) break;
  }
  REQUIRE(transition_seen > 0);
  REQUIRE(learner.rho_hat() > 0.0);
  REQUIRE(learner.pi_diamond()->components.size() == static_cast<std::size_t>(transition_seen));
  REQUIRE(learner.pi_diamond()->weights[0] == Approx(1.0 / transition_seen));
  REQUIRE(learner.nested()->beta()[0] == Approx(inst.alpha[0] - learner.rho_hat()));
}

TEST_CASE("cvops sandwich: rho/2 <= rho_hat <= rho with high probability") {
  // Light-cost variant of the 4-layer instance so the estimation phase ends
  // quickly across all 100 runs.
  auto inst = testutil::slater4_instance(20000);
  inst.costs.mean(1, 1, 0) = 0.10;
  inst.costs.mean(2, 1, 0) = 0.12;
  inst.costs.mean(3, 1, 0) = 0.10;
  inst.costs.mean(4, 1, 0) = 0.12;
  std::vector<std::vector<double>> cols{inst.costs.mean_column(0)};
  double rho = slater_margin(cols, inst.alpha, OccupancyPolytope::exact(inst.kernel));
  double rate = default_learning_rate(*inst.space, 20000, 0.05);
  CvopsParams params;
  params.c_p = 0.5;
  params.c_d = 0.5;
  int ok = 0, transitioned = 0;
  const int runs = 100;
  for (int r = 0; r < runs; ++r) {
    CvopsLearner learner(inst.space, inst.alpha, 20000, 0.05, rate, rate, params);
    SplitRng rng = SplitRng::derive(5000, r);
    for (long t = 1; t <= 8000; ++t) {
      Trajectory traj = run_episode(inst, t, learner.policy(), rng);
      learner.step(traj);
      if (learner.phase() == CvopsLearner::Phase::Running) break;
    }
    if (learner.phase() != CvopsLearner::Phase::Running) continue;
    ++transitioned;
    double rho_hat = learner.rho_hat();
    OccupancyMeasure qd = occupancy_from_policy(inst.kernel, AnyPolicy(*learner.pi_diamond()));
    double margin = inst.alpha[0] - expected_value(qd, cols[0]);
    if (rho_hat >= rho / 2.0 - 1e-9 && rho_hat <= rho + 1e-9 && margin >= rho_hat - 1e-9) ++ok;
  }
  REQUIRE(transitioned >= 95);
  REQUIRE(ok >= static_cast<int>(0.9 * transitioned));
}

TEST_CASE("learner state round-trips through the checkpoint format") {
  auto inst = testutil::slater3_instance(500);
  double rate = default_learning_rate(*inst.space, 500, 0.05);
  SvopsLearner a(inst.space, inst.alpha, 500, 0.05, rate, rate);
  SplitRng rng = SplitRng::derive(8, 0);
  for (long t = 1; t <= 40; ++t) a.step(run_episode(inst, t, a.policy(), rng));
  nlohmann::json saved = a.save_state();
  SvopsLearner b(inst.space, inst.alpha, 500, 0.05, rate, rate);
  b.load_state(saved);
  // Identical continuation from identical state and stream.
  SplitRng ra = SplitRng::derive(9, 0), rb = SplitRng::derive(9, 0);
  for (long t = 41; t <= 60; ++t) {
    Trajectory ta = run_episode(inst, t, a.policy(), ra);
    Trajectory tb = run_episode(inst, t, b.policy(), rb);
    a.step(ta);
    b.step(tb);
  }
  REQUIRE(a.core().q_hat().q == b.core().q_hat().q);
}

TEST_CASE("svops falls back to the estimated space when the projection is infeasible") {
  // Oracle costs make every occupancy violate alpha, so PROJ is infeasible at
  // every episode and the fallback keeps producing valid occupancies.
  auto inst = testutil::bandit_instance(0.6, 0.8, 0.5, 50);
  SvopsLearner learner(inst.space, inst.alpha, 50, 0.05, 0.1, 0.1, oracle_for(inst));
  SplitRng rng = SplitRng::derive(71, 0);
  for (long t = 1; t <= 20; ++t) {
    Trajectory traj = run_episode(inst, t, learner.policy(), rng);
    StepDiagnostics diag = learner.step(traj);
    REQUIRE_FALSE(diag.proj_feasible);
    REQUIRE(validate_occupancy(learner.core().q_hat(), 1e-8).ok);
  }
}

TEST_CASE("sops plays the safe policy exactly when the projection is infeasible") {
  auto inst = testutil::bandit_instance(0.6, 0.8, 0.5, 50);
  Policy pid(inst.space);
  pid.prob(0, 0) = 1.0;
  SopsLearner learner(inst.space, inst.alpha, {0.3}, AnyPolicy(pid), 50, 0.05, 0.1, 0.1,
                      oracle_for(inst));
  SplitRng rng = SplitRng::derive(72, 0);
  for (long t = 1; t <= 10; ++t) {
    Trajectory traj = run_episode(inst, t, learner.policy(), rng);
    StepDiagnostics diag = learner.step(traj);
    REQUIRE_FALSE(diag.proj_feasible);
    REQUIRE(diag.lambda == 1.0);
    // The mixture degenerates to {(pi_diamond, 1)}.
    AnyPolicy pol = learner.policy();
    const Policy* pure = std::get_if<Policy>(&pol);
    REQUIRE(pure != nullptr);
    REQUIRE(pure->prob(0, 0) == 1.0);
  }
}

TEST_CASE("the first update consumes the initial vacuous confidence set") {
  auto inst = testutil::diamond_instance();
  double rate = default_learning_rate(*inst.space, 100, 0.05);
  SvopsLearner learner(inst.space, inst.alpha, 100, 0.05, rate, rate);
  // Before any feedback the intervals are [0,1] everywhere.
  for (int i = 0; i < inst.space->num_triples(); ++i) {
    REQUIRE(learner.core().confidence().lo(i) == 0.0);
    REQUIRE(learner.core().confidence().hi(i) == 1.0);
  }
  SplitRng rng = SplitRng::derive(81, 0);
  Trajectory traj = run_episode(inst, 1, learner.policy(), rng);
  learner.step(traj);
  // After one episode the visited rows have tightened estimates.
  int first_pair = inst.space->pair_id(traj.steps[0].x, traj.steps[0].a);
  int tr = inst.space->triple_base(traj.steps[0].x, traj.steps[0].a) +
           inst.space->succ_index(traj.steps[0].x, traj.steps[0].x_next);
  REQUIRE(learner.core().counters().n[first_pair] == 1);
  REQUIRE(learner.core().confidence().p_hat[tr] == 1.0);
}

TEST_CASE("the initial iterate is the uniform triple measure") {
  auto space = LayeredStateSpace::make({1, 2, 1}, 2);
  OccupancyMeasure q1 = OccupancyMeasure::uniform(space);
  // First layer: 1 state, 2 actions, 2 successors -> 1/4 per triple;
  // second layer: 2 states, 2 actions, 1 successor -> 1/4 per triple.
  for (int i = 0; i < space->num_triples(); ++i) REQUIRE(q1.q[i] == Approx(0.25));
  double rate = default_learning_rate(*space, 100, 0.05);
  auto inst = testutil::diamond_instance();
  SvopsLearner learner(inst.space, inst.alpha, 100, 0.05, rate, rate);
  for (double v : learner.core().q_hat().q) REQUIRE(v == Approx(0.25));
}
