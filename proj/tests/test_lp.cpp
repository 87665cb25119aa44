#include <catch2/catch.hpp>

#include "cmdpbench/generators.hpp"
#include "cmdpbench/metrics.hpp"
#include "cmdpbench/offline_opt.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace cmdpbench;

TEST_CASE("offline LP on the second lower-bound instance") {
  double rho = 0.1;
  auto inst = testutil::bandit_instance(0.5, 0.5 - rho, 0.5, 100);
  std::vector<std::vector<double>> cols{inst.costs.mean_column(0)};
  OfflineOptResult res = solve_offline_opt(inst.losses.row(1), cols, inst.alpha,
                                           OccupancyPolytope::exact(inst.kernel));
  REQUIRE(res.status == OfflineOptResult::Status::Optimal);
  REQUIRE(res.value == Approx(0.5).margin(1e-8));
  REQUIRE(res.q.pair_mass(0, 0) == Approx(1.0).margin(1e-8));
  REQUIRE(res.duality_gap <= 1e-7);
}

TEST_CASE("vacuous thresholds reduce to the shortest-path loss") {
  SplitRng gen(101);
  for (auto& [shape, actions] : testutil::small_shapes()) {
    auto inst = random_instance(shape, actions, gen);
    std::vector<double> loss = inst.losses.row(1);
    std::vector<double> alpha(inst.alpha.size(), static_cast<double>(inst.space->horizon()));
    std::vector<std::vector<double>> cols;
    for (int i = 0; i < inst.costs.m; ++i) cols.push_back(inst.costs.mean_column(i));
    OfflineOptResult res =
        solve_offline_opt(loss, cols, alpha, OccupancyPolytope::exact(inst.kernel));
    REQUIRE(res.status == OfflineOptResult::Status::Optimal);
    REQUIRE(res.value == Approx(oracles::shortest_path_loss(inst.kernel, loss)).margin(1e-8));
  }
}

TEST_CASE("zero thresholds with positive costs are infeasible") {
  auto inst = testutil::bandit_instance(0.5, 0.4, 0.5, 100);
  for (double& v : inst.costs.means) v = std::max(v, 0.1);
  std::vector<std::vector<double>> cols{inst.costs.mean_column(0)};
  OfflineOptResult res = solve_offline_opt(inst.losses.row(1), cols, {0.0},
                                           OccupancyPolytope::exact(inst.kernel));
  REQUIRE(res.status == OfflineOptResult::Status::Infeasible);
}

TEST_CASE("offline LP agrees with exhaustive vertex enumeration") {
  SplitRng gen(2024);
  int checked = 0;
  for (int rep = 0; rep < 18; ++rep) {
    auto shapes = testutil::small_shapes();
    auto& [shape, actions] = shapes[rep % shapes.size()];
    auto inst = random_instance(shape, actions, gen);
    std::vector<double> loss = inst.losses.row(1);
    std::vector<std::vector<double>> cols{inst.costs.mean_column(0)};

    OccupancyPolytope poly = OccupancyPolytope::exact(inst.kernel);
    OfflineOptResult lp = solve_offline_opt(loss, cols, inst.alpha, poly);
    REQUIRE(lp.status == OfflineOptResult::Status::Optimal);

    ConstraintSystem sys = poly.constraints();
    sys.ineq.push_back(cost_row(*inst.space, cols[0], inst.alpha[0]));
    oracles::DenseSystem dense = oracles::densify(sys.n, sys.eq, sys.ineq);
    std::vector<double> c(sys.n, 0.0);
    LinearRow lrow = cost_row(*inst.space, loss, 0.0);
    for (auto& [j, v] : lrow.terms) c[j] = v;
    oracles::VertexEnumResult oracle = oracles::vertex_enumeration_lp(c, dense);
    REQUIRE(oracle.feasible);
    REQUIRE(lp.value == Approx(oracle.value).margin(1e-8));
    ++checked;
  }
  REQUIRE(checked == 18);
}

TEST_CASE("slater margin matches a hand-built instance") {
  // Bandit with g = (0.5, 0.2), alpha = 0.45: the margin is attained at the
  // pure second action, 0.45 - 0.2 = 0.25.
  auto inst = testutil::bandit_instance(0.5, 0.2, 0.45, 10);
  std::vector<std::vector<double>> cols{inst.costs.mean_column(0)};
  OccupancyMeasure qd;
  double margin = slater_margin(cols, inst.alpha, OccupancyPolytope::exact(inst.kernel), &qd);
  REQUIRE(margin == Approx(0.25).margin(1e-8));
  REQUIRE(qd.pair_mass(0, 1) == Approx(1.0).margin(1e-8));
}

TEST_CASE("baseline optimality against sampled feasible occupancies") {
  SplitRng gen(404);
  auto inst = random_instance({1, 2, 1}, 2, gen);
  BaselineResult base = solve_baseline(inst);
  std::vector<double> avg = inst.losses.average(inst.horizon);
  std::vector<double> gcol = inst.costs.mean_column(0);
  int tried = 0;
  for (int rep = 0; rep < 10000; ++rep) {
    Policy pi = testutil::random_policy(inst.space, gen);
    OccupancyMeasure q = occupancy_from_policy(inst.kernel, pi);
    if (expected_value(q, gcol) > inst.alpha[0]) continue;
    ++tried;
    REQUIRE(expected_value(base.q_star, avg) <= expected_value(q, avg) + 1e-8);
  }
  REQUIRE(tried > 100);
}

TEST_CASE("offline LP matches enumeration under sparsity and two constraints") {
  SplitRng gen(7171);
  RandomInstanceOptions opt;
  opt.m = 2;
  opt.sparsity = 0.35;
  for (int rep = 0; rep < 8; ++rep) {
    auto inst = random_instance({1, 2, 1}, 2, gen, opt);
    std::vector<double> loss = inst.losses.row(1);
    std::vector<std::vector<double>> cols{inst.costs.mean_column(0), inst.costs.mean_column(1)};
    OccupancyPolytope poly = OccupancyPolytope::exact(inst.kernel);
    OfflineOptResult lp = solve_offline_opt(loss, cols, inst.alpha, poly);
    REQUIRE(lp.status == OfflineOptResult::Status::Optimal);
    ConstraintSystem sys = poly.constraints();
    sys.ineq.push_back(cost_row(*inst.space, cols[0], inst.alpha[0]));
    sys.ineq.push_back(cost_row(*inst.space, cols[1], inst.alpha[1]));
    oracles::DenseSystem dense = oracles::densify(sys.n, sys.eq, sys.ineq);
    std::vector<double> c(sys.n, 0.0);
    LinearRow lrow = cost_row(*inst.space, loss, 0.0);
    for (auto& [j, v] : lrow.terms) c[j] = v;
    oracles::VertexEnumResult oracle = oracles::vertex_enumeration_lp(c, dense);
    REQUIRE(oracle.feasible);
    REQUIRE(lp.value == Approx(oracle.value).margin(1e-8));
  }
}

TEST_CASE("offline LP on the perturbed lower-bound instance") {
  // Feasible mixes of the two actions form a segment; its best vertex puts
  // weight rho/(rho+eps) on the first action, so OPT = 1 - 0.5 rho/(rho+eps).
  long T = 128;
  double rho = 0.1;
  auto [i1, i2] = lower_bound_instances(T, rho);
  double eps = 0.25 * std::sqrt(2.0 / static_cast<double>(T));
  std::vector<std::vector<double>> cols{i1.costs.mean_column(0)};
  OfflineOptResult res = solve_offline_opt(i1.losses.row(1), cols, i1.alpha,
                                           OccupancyPolytope::exact(i1.kernel));
  REQUIRE(res.status == OfflineOptResult::Status::Optimal);
  double theta = rho / (rho + eps);
  REQUIRE(res.value == Approx(1.0 - 0.5 * theta).margin(1e-8));
  REQUIRE(res.q.pair_mass(0, 0) == Approx(theta).margin(1e-8));
}

TEST_CASE("simplex agrees with enumeration across a randomized stress corpus") {
  SplitRng gen(31337);
  auto shapes = testutil::small_shapes();
  int optimal_checked = 0, infeasible_checked = 0;
  for (int rep = 0; rep < 60; ++rep) {
    auto& [shape, actions] = shapes[rep % shapes.size()];
    RandomInstanceOptions opt;
    opt.sparsity = (rep % 3) * 0.2;
    auto inst = random_instance(shape, actions, gen, opt);
    std::vector<double> loss = inst.losses.row(1);
    std::vector<std::vector<double>> cols{inst.costs.mean_column(0)};
    // Alternate between generous, tight and impossible thresholds.
    double alpha = inst.alpha[0];
    if (rep % 4 == 1) alpha *= 0.6;
    if (rep % 4 == 3) alpha = -0.05;
    OccupancyPolytope poly = OccupancyPolytope::exact(inst.kernel);
    OfflineOptResult lp = solve_offline_opt(loss, cols, {alpha}, poly);

    ConstraintSystem sys = poly.constraints();
    sys.ineq.push_back(cost_row(*inst.space, cols[0], alpha));
    oracles::DenseSystem dense = oracles::densify(sys.n, sys.eq, sys.ineq);
    std::vector<double> c(sys.n, 0.0);
    LinearRow lrow = cost_row(*inst.space, loss, 0.0);
    for (auto& [j, v] : lrow.terms) c[j] = v;
    oracles::VertexEnumResult oracle = oracles::vertex_enumeration_lp(c, dense);

    if (oracle.feasible) {
      REQUIRE(lp.status == OfflineOptResult::Status::Optimal);
      REQUIRE(lp.value == Approx(oracle.value).margin(1e-8));
      ++optimal_checked;
    } else {
      REQUIRE(lp.status == OfflineOptResult::Status::Infeasible);
      ++infeasible_checked;
    }
  }
  REQUIRE(optimal_checked >= 30);
  REQUIRE(infeasible_checked >= 10);
}
