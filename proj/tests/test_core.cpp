#include <catch2/catch.hpp>

#include "cmdpbench/flatten.hpp"
#include "cmdpbench/occupancy.hpp"
#include "cmdpbench/rng.hpp"
#include "test_util.hpp"

using namespace cmdpbench;

TEST_CASE("layered space indexing") {
  auto space = LayeredStateSpace::make({1, 2, 1}, 2);
  REQUIRE(space->num_states() == 4);
  REQUIRE(space->horizon() == 2);
  REQUIRE(space->num_triples() == 1 * 2 * 2 + 2 * 2 * 1);
  REQUIRE(space->layer_of(0) == 0);
  REQUIRE(space->layer_of(3) == 2);
  REQUIRE(space->succ_count(0) == 2);
  REQUIRE(space->succ_count(1) == 1);
  REQUIRE(space->triple_base(3, 0) == -1);
  REQUIRE_THROWS_AS(LayeredStateSpace::make({2, 1}, 1), std::invalid_argument);
}

TEST_CASE("validate_occupancy accepts symmetric normalized flow") {
  auto inst = testutil::bandit_instance(0.5, 0.4, 0.5, 10);
  OccupancyMeasure q(inst.space);
  q.q[inst.space->triple_id(0, 0, 0)] = 0.5;
  q.q[inst.space->triple_id(0, 1, 0)] = 0.5;
  REQUIRE(validate_occupancy(q).ok);
}

TEST_CASE("validate_occupancy flags normalization residual") {
  auto inst = testutil::bandit_instance(0.5, 0.4, 0.5, 10);
  OccupancyMeasure q(inst.space);
  q.q[inst.space->triple_id(0, 0, 0)] = 0.4;
  q.q[inst.space->triple_id(0, 1, 0)] = 0.4;
  ValidityReport rep = validate_occupancy(q);
  REQUIRE_FALSE(rep.ok);
  REQUIRE(rep.violations.size() == 1);
  REQUIRE(rep.violations[0].kind == ValidityViolation::Kind::Normalization);
  REQUIRE(rep.violations[0].residual == Approx(0.2).margin(1e-12));
}

TEST_CASE("validate_occupancy flags flow residual") {
  auto inst = testutil::diamond_instance();
  const auto& sp = *inst.space;
  OccupancyMeasure q(inst.space);
  // inflow 0.5 at u but outflow 0.6; layer mass kept at 1 via v.
  q.q[sp.triple_id(0, 0, 0)] = 0.5;
  q.q[sp.triple_id(0, 1, 1)] = 0.5;
  q.q[sp.triple_id(1, 0, 0)] = 0.6;
  q.q[sp.triple_id(2, 0, 0)] = 0.4;
  ValidityReport rep = validate_occupancy(q);
  REQUIRE_FALSE(rep.ok);
  bool found = false;
  for (const auto& v : rep.violations)
    if (v.kind == ValidityViolation::Kind::Flow && v.residual == Approx(0.1).margin(1e-12))
      found = true;
  REQUIRE(found);
}

TEST_CASE("occupancy_from_policy on deterministic path") {
  auto inst = testutil::diamond_instance();
  Policy pi(inst.space);
  pi.prob(0, 0) = 1.0;
  pi.prob(1, 0) = 1.0;
  pi.prob(2, 0) = 1.0;
  OccupancyMeasure q = occupancy_from_policy(inst.kernel, pi);
  REQUIRE(q.q[inst.space->triple_id(0, 0, 0)] == Approx(1.0));
  REQUIRE(q.q[inst.space->triple_id(1, 0, 0)] == Approx(1.0));
  double total = 0.0;
  for (double v : q.q) total += v;
  REQUIRE(total == Approx(2.0));  // one unit of mass per layer
}

TEST_CASE("occupancy_from_policy splits mass under uniform policy") {
  // Hand forward DP: q(s0,a,u) = 0.5 and all of u's outflow carries 0.5.
  auto inst = testutil::diamond_instance();
  Policy pi = Policy::uniform(inst.space);
  OccupancyMeasure q = occupancy_from_policy(inst.kernel, pi);
  REQUIRE(q.q[inst.space->triple_id(0, 0, 0)] == Approx(0.5));
  REQUIRE(q.state_mass(1) == Approx(0.5));
  double u_out = q.pair_mass(1, 0) + q.pair_mass(1, 1);
  REQUIRE(u_out == Approx(0.5));
}

TEST_CASE("bandit occupancy equals action probability") {
  auto inst = testutil::bandit_instance(0.5, 0.4, 0.5, 10);
  Policy pi(inst.space);
  pi.prob(0, 0) = 0.3;
  pi.prob(0, 1) = 0.7;
  OccupancyMeasure q = occupancy_from_policy(inst.kernel, pi);
  REQUIRE(q.pair_mass(0, 0) == Approx(0.3));
}

TEST_CASE("induced policy and transition round-trip") {
  SplitRng rng(42);
  for (int rep = 0; rep < 20; ++rep) {
    auto inst = random_instance({1, 2, 1}, 2, rng);
    Policy pi = testutil::random_policy(inst.space, rng);
    OccupancyMeasure q = occupancy_from_policy(inst.kernel, pi);
    InducedPolicy back = induced_policy(q);
    InducedKernel kback = induced_transition(q);
    for (int p = 0; p < inst.space->num_pairs(); ++p)
      REQUIRE(back.policy.pi[p] == Approx(pi.pi[p]).margin(1e-9));
    for (int x = 0; x < inst.space->num_states(); ++x) {
      if (inst.space->layer_of(x) == inst.space->horizon()) continue;
      for (int a = 0; a < 2; ++a) {
        if (q.pair_mass(x, a) < 1e-12) continue;
        for (int j = 0; j < inst.space->succ_count(x); ++j)
          REQUIRE(kback.kernel.prob(x, a, j) == Approx(inst.kernel.prob(x, a, j)).margin(1e-9));
      }
    }
    REQUIRE(validate_occupancy(q, 1e-9, &inst.kernel).ok);
  }
}

TEST_CASE("zero-mass states get the uniform convention and are flagged") {
  auto inst = testutil::diamond_instance();
  Policy pi(inst.space);
  pi.prob(0, 0) = 1.0;  // all mass to u; v never visited
  pi.prob(1, 0) = 1.0;
  pi.prob(2, 0) = 1.0;
  OccupancyMeasure q = occupancy_from_policy(inst.kernel, pi);
  InducedPolicy back = induced_policy(q);
  REQUIRE(back.zero_mass_states == std::vector<int>{2});
  REQUIRE(back.policy.prob(2, 0) == Approx(0.5));
  REQUIRE(back.policy.prob(2, 1) == Approx(0.5));
}

TEST_CASE("expected_value basics and linearity") {
  auto inst = testutil::diamond_instance();
  Policy pi = Policy::uniform(inst.space);
  OccupancyMeasure q = occupancy_from_policy(inst.kernel, pi);
  std::vector<double> zero(inst.space->num_pairs(), 0.0);
  std::vector<double> ones(inst.space->num_pairs(), 1.0);
  REQUIRE(expected_value(q, zero) == 0.0);
  REQUIRE(expected_value(q, ones) == Approx(2.0).margin(1e-12));  // L = 2

  SplitRng rng(7);
  std::vector<double> w1(inst.space->num_pairs()), w2(inst.space->num_pairs()), combo(inst.space->num_pairs());
  for (int i = 0; i < inst.space->num_pairs(); ++i) {
    w1[i] = rng.next_double();
    w2[i] = rng.next_double();
    combo[i] = 2.5 * w1[i] - 0.75 * w2[i];
  }
  REQUIRE(expected_value(q, combo) ==
          Approx(2.5 * expected_value(q, w1) - 0.75 * expected_value(q, w2)).margin(1e-12));
}

TEST_CASE("expected cost on the second lower-bound instance") {
  double rho = 0.1;
  auto inst = testutil::bandit_instance(0.5, 0.5 - rho, 0.5, 10);
  Policy pi(inst.space);
  pi.prob(0, 0) = 1.0;
  OccupancyMeasure q = occupancy_from_policy(inst.kernel, pi);
  REQUIRE(expected_value(q, inst.costs.mean_column(0)) == Approx(0.5));
}

TEST_CASE("mixture occupancy is the weighted average of components") {
  SplitRng rng(11);
  auto inst = random_instance({1, 3, 1}, 2, rng);
  MixturePolicy mix;
  mix.components = {testutil::random_policy(inst.space, rng),
                    testutil::random_policy(inst.space, rng),
                    testutil::random_policy(inst.space, rng)};
  mix.weights = {0.2, 0.5, 0.3};
  OccupancyMeasure qm = occupancy_from_policy(inst.kernel, mix);
  for (int i = 0; i < inst.space->num_triples(); ++i) {
    double expect = 0.0;
    for (int c = 0; c < 3; ++c)
      expect += mix.weights[c] * occupancy_from_policy(inst.kernel, mix.components[c]).q[i];
    REQUIRE(qm.q[i] == Approx(expect).margin(1e-12));
  }
}

TEST_CASE("flatten keeps already loop-free inputs isomorphic") {
  auto inst = testutil::diamond_instance();
  GenericMdp mdp;
  mdp.n_states = 4;
  mdp.n_actions = 2;
  mdp.start = 0;
  mdp.p.assign(4, std::vector<std::vector<double>>(2, std::vector<double>(4, 0.0)));
  const auto& sp = *inst.space;
  for (int x = 0; x < 4; ++x) {
    if (sp.layer_of(x) == sp.horizon()) continue;
    for (int a = 0; a < 2; ++a)
      for (int j = 0; j < sp.succ_count(x); ++j)
        mdp.p[x][a][sp.succ_state(x, j)] = inst.kernel.prob(x, a, j);
  }
  FlattenResult flat = flatten_to_loopfree(mdp, 2);
  REQUIRE(flat.space->num_layers() == 3);
  REQUIRE(flat.space->num_states() == 4);
  REQUIRE(flat.space->layer_size(1) == 2);
  for (int j = 0; j < 2; ++j)
    REQUIRE(flat.kernel.prob(0, 0, j) == Approx(inst.kernel.prob(0, 0, j)));
}

TEST_CASE("flatten duplicates a self-loop into a chain of copies") {
  GenericMdp mdp;
  mdp.n_states = 1;
  mdp.n_actions = 1;
  mdp.start = 0;
  mdp.p = {{{1.0}}};
  FlattenResult flat = flatten_to_loopfree(mdp, 3);
  REQUIRE(flat.space->num_states() == 5);  // start + 3 copies + terminal
  for (int k = 0; k < flat.space->num_layers(); ++k) REQUIRE(flat.space->layer_size(k) == 1);
  REQUIRE(validate_occupancy(occupancy_from_policy(flat.kernel, Policy::uniform(flat.space))).ok);
}

TEST_CASE("flatten duplicates a 2-state MDP per step") {
  GenericMdp mdp;
  mdp.n_states = 2;
  mdp.n_actions = 1;
  mdp.start = 0;
  mdp.p = {{{0.3, 0.7}}, {{0.6, 0.4}}};
  FlattenResult flat = flatten_to_loopfree(mdp, 2);
  REQUIRE(flat.space->num_states() == 2 * 2 + 2);
  REQUIRE(flat.space->layer_size(1) == 2);
  REQUIRE(flat.space->layer_size(2) == 2);
  // Kernel entries equal the original per genuine step.
  REQUIRE(flat.kernel.prob(flat.space->layer_first(0), 0, 1) == Approx(0.7));
  int s1 = flat.space->layer_first(1) + 1;  // copy of state 1 at step 1
  REQUIRE(flat.kernel.prob(s1, 0, 0) == Approx(0.6));
}

TEST_CASE("flatten rejects nonpositive horizon") {
  GenericMdp mdp;
  mdp.n_states = 1;
  mdp.n_actions = 1;
  mdp.start = 0;
  mdp.p = {{{1.0}}};
  REQUIRE_THROWS_AS(flatten_to_loopfree(mdp, 0), std::invalid_argument);
}

TEST_CASE("structural violations are a distinct class") {
  auto inst = testutil::bandit_instance(0.5, 0.4, 0.5, 10);
  OccupancyMeasure wrong_size(inst.space);
  wrong_size.q.pop_back();
  ValidityReport rep = validate_occupancy(wrong_size);
  REQUIRE_FALSE(rep.ok);
  REQUIRE(rep.violations[0].kind == ValidityViolation::Kind::Structure);

  OccupancyMeasure negative(inst.space);
  negative.q[0] = -0.2;
  negative.q[1] = 1.2;
  rep = validate_occupancy(negative);
  bool structural = false;
  for (const auto& v : rep.violations)
    structural = structural || v.kind == ValidityViolation::Kind::Structure;
  REQUIRE(structural);
}

TEST_CASE("an invalid occupancy is not reproduced by its induced pair") {
  auto inst = testutil::diamond_instance();
  const auto& sp = *inst.space;
  OccupancyMeasure q(inst.space);
  // Broken flow: inflow at u is 0.5 but outflow 0.6.
  q.q[sp.triple_id(0, 0, 0)] = 0.5;
  q.q[sp.triple_id(0, 1, 1)] = 0.5;
  q.q[sp.triple_id(1, 0, 0)] = 0.6;
  q.q[sp.triple_id(2, 0, 0)] = 0.4;
  REQUIRE_FALSE(validate_occupancy(q).ok);
  OccupancyMeasure rebuilt = occupancy_from_policy(induced_transition(q).kernel,
                                                   induced_policy(q).policy);
  double diff = 0.0;
  for (std::size_t i = 0; i < q.q.size(); ++i) diff = std::max(diff, std::fabs(q.q[i] - rebuilt.q[i]));
  REQUIRE(diff > 1e-3);
  REQUIRE(validate_occupancy(rebuilt).ok);
}
