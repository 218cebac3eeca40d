#include "oracles.hpp"

#include "mvpi/envs.hpp"
#include "mvpi/mdp.hpp"

#include <doctest.h>

#include <array>
#include <cmath>
#include <limits>

using namespace mvpi;

namespace {

FiniteMdp one_state(double gamma) {
  Matrix r(1, 1);
  r << 1.0;
  return FiniteMdp(1, 1, r, {1.0}, Vector::Ones(1), gamma);
}

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an mvpi::Error");
  return ErrorCode::Io;
}

}  // namespace

TEST_CASE("FiniteMdp rejects malformed inputs") {
  Matrix r = Matrix::Zero(2, 1);
  Vector mu = Vector::Constant(2, 0.5);
  CHECK(code_of([&] { FiniteMdp(2, 1, r, {0.5, 0.6, 0.0, 1.0}, mu, 0.9); }) ==
        ErrorCode::InvariantViolation);
  CHECK(code_of([&] { FiniteMdp(2, 1, r, {1.0, 0.0, 0.0, 1.0}, Vector::Constant(2, 0.6), 0.9); }) ==
        ErrorCode::InvariantViolation);
  CHECK(code_of([&] { FiniteMdp(2, 1, r, {1.0, 0.0, 0.0, 1.0}, mu, 1.5); }) ==
        ErrorCode::InvariantViolation);
  CHECK(code_of([&] { FiniteMdp(2, 1, r, {1.0, 0.0}, mu, 0.9); }) == ErrorCode::InvalidArgument);
  Matrix bad = r;
  bad(0, 0) = std::nan("");
  CHECK(code_of([&] { FiniteMdp(2, 1, bad, {1.0, 0.0, 0.0, 1.0}, mu, 0.9); }) ==
        ErrorCode::InvariantViolation);
  CHECK(code_of([&] { FiniteMdp(2, 1, r, {1.2, -0.2, 0.0, 1.0}, mu, 0.9); }) ==
        ErrorCode::InvariantViolation);
}

TEST_CASE("gamma = 1 is refused by discounted operations") {
  const FiniteMdp mdp = one_state(1.0);
  const auto pi = TabularPolicy::uniform(1, 1);
  CHECK(code_of([&] { occupancy_measure(mdp, pi); }) == ErrorCode::InvalidArgument);
  CHECK(code_of([&] { value_functions(mdp, pi); }) == ErrorCode::InvalidArgument);
  CHECK(code_of([&] { return_variance(mdp, pi); }) == ErrorCode::InvalidArgument);
  CHECK(stationary_distribution(mdp, pi)(0) == doctest::Approx(1.0));
}

TEST_CASE("policies validate their rows") {
  Matrix p(1, 2);
  p << 0.7, 0.4;
  CHECK(code_of([&] { TabularPolicy{p}; }) == ErrorCode::InvariantViolation);
  Matrix logits(1, 2);
  logits << 0.0, std::numeric_limits<double>::infinity();
  CHECK(code_of([&] { SoftmaxPolicy{logits}; }) == ErrorCode::InvariantViolation);

  Matrix good(2, 3);
  good << 0.2, 0.3, 0.5, 1.0, 0.0, 0.0;
  const TabularPolicy pi(good);
  CHECK_FALSE(pi.is_deterministic());
  CHECK(pi.greedy_actions() == std::vector<std::size_t>{2, 0});
  const auto round_trip = SoftmaxPolicy::from_tabular(TabularPolicy::uniform(2, 3)).to_tabular();
  CHECK((round_trip.probs() - TabularPolicy::uniform(2, 3).probs()).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("chain2 closed forms") {
  const FiniteMdp mdp = chain2_mdp();
  const auto pi = TabularPolicy::uniform(2, 1);
  const auto occ = occupancy_measure(mdp, pi);
  CHECK(occ.d(0, 0) == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(occ.d(1, 0) == doctest::Approx(0.5).epsilon(1e-14));
  const auto vf = value_functions(mdp, pi);
  CHECK(vf.v(0) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(std::abs(vf.v(1)) < 1e-14);
  CHECK(expected_return(mdp, pi) == doctest::Approx(1.0).epsilon(1e-14));

  const auto rd = reward_distribution(mdp, pi);
  REQUIRE(rd.support.size() == 2);
  CHECK(rd.support[0] == 0.0);
  CHECK(rd.support[1] == 1.0);
  CHECK(rd.pmf[0] == doctest::Approx(0.5));
  CHECK(rd.pmf[1] == doctest::Approx(0.5));
  CHECK(rd.mean == doctest::Approx(0.5));
  CHECK(rd.variance == doctest::Approx(0.25));
  CHECK(std::abs(return_variance(mdp, pi)) < 1e-12);

  const Vector st = stationary_distribution(mdp, pi);
  CHECK(std::abs(st(0)) < 1e-12);
  CHECK(st(1) == doctest::Approx(1.0));
}

TEST_CASE("branch closed forms") {
  const FiniteMdp mdp = branch_mdp();
  const auto pi = TabularPolicy::uniform(3, 1);
  const auto occ = occupancy_measure(mdp, pi);
  CHECK(occ.d(0, 0) == doctest::Approx(0.5));
  CHECK(occ.d(1, 0) == doctest::Approx(0.25));
  CHECK(occ.d(2, 0) == doctest::Approx(0.25));
  const auto rd = reward_distribution(mdp, pi);
  CHECK(rd.mean == doctest::Approx(0.25));
  CHECK(rd.variance == doctest::Approx(0.1875));
  CHECK(return_variance(mdp, pi) == doctest::Approx(0.25).epsilon(1e-12));
  CHECK_THROWS_AS(stationary_distribution(mdp, pi), Error);
  CHECK(code_of([&] { stationary_distribution(mdp, pi); }) == ErrorCode::NonErgodicChain);
}

TEST_CASE("swap chain is uniform in the long run") {
  const FiniteMdp mdp = swap_mdp();
  const Vector st = stationary_distribution(mdp, TabularPolicy::uniform(2, 1));
  CHECK(st(0) == doctest::Approx(0.5));
  CHECK(st(1) == doctest::Approx(0.5));
}

TEST_CASE("constant reward gives c / (1 - gamma) and a point mass") {
  const double c = 0.37, gamma = 0.8;
  const FiniteMdp mdp = constant_reward_mdp(5, 3, c, gamma, 11);
  Rng rng(4);
  const auto pi = oracle::random_policy(5, 3, rng);
  const auto vf = value_functions(mdp, pi);
  for (Eigen::Index s = 0; s < 5; ++s) CHECK(vf.v(s) == doctest::Approx(c / (1 - gamma)).epsilon(1e-12));
  CHECK(expected_return(mdp, pi) == doctest::Approx(c / (1 - gamma)).epsilon(1e-12));
  const auto rd = reward_distribution(mdp, pi);
  REQUIRE(rd.support.size() == 1);
  CHECK(rd.pmf[0] == doctest::Approx(1.0));
  CHECK(std::abs(rd.variance) < 1e-14);
}

TEST_CASE("random MDPs: structural invariants against independent oracles") {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const double gamma = std::array<double, 3>{0.5, 0.9, 0.99}[seed % 3];
    const FiniteMdp mdp = random_mdp(2 + seed % 7, 1 + seed % 4, seed, {}, gamma);
    Rng rng(seed + 1000);
    const auto pi = oracle::random_policy(mdp.n_states(), mdp.n_actions(), rng);
    const auto occ = occupancy_measure(mdp, pi);
    const auto vf = value_functions(mdp, pi);
    CAPTURE(seed);

    CHECK(std::abs(occ.d.sum() - 1.0) < 1e-10);
    CHECK(occ.d.minCoeff() >= 0.0);
    const Vector flow = (1 - gamma) * mdp.initial_dist() +
                        gamma * policy_transition(mdp, pi).transpose() * occ.state_marginal;
    CHECK((flow - occ.state_marginal).cwiseAbs().maxCoeff() < 1e-10);
    CHECK((occ.d - oracle::occupancy_by_series(mdp, pi)).cwiseAbs().maxCoeff() < 1e-10);

    CHECK((vf.q - oracle::q_by_iteration(mdp, pi)).cwiseAbs().maxCoeff() < 1e-8);
    for (std::size_t s = 0; s < mdp.n_states(); ++s) {
      double v = 0.0;
      for (std::size_t a = 0; a < mdp.n_actions(); ++a) v += pi(s, a) * vf.q(s, a);
      CHECK(std::abs(v - vf.v(s)) < 1e-10);
    }

    const double j = expected_return(mdp, pi);
    CHECK(std::abs(j - occ.d.cwiseProduct(mdp.reward()).sum() / (1 - gamma)) < 1e-10);
    const auto rd = reward_distribution(mdp, pi);
    CHECK(std::abs(rd.mean - (1 - gamma) * j) < 1e-10);
    double mass = 0.0;
    for (double p : rd.pmf) mass += p;
    CHECK(std::abs(mass - 1.0) < 1e-10);
    CHECK(std::abs(rd.variance - (rd.second_moment - rd.mean * rd.mean)) < 1e-12);
    const auto direct = oracle::reward_moments(occ.d, mdp.reward());
    CHECK(std::abs(rd.variance - direct.variance) < 1e-12);

    const double vg = return_variance(mdp, pi);
    CHECK(vg >= -1e-10);
    CHECK(vg <= rd.variance / ((1 - gamma) * (1 - gamma)) + 1e-9);

    const Vector st = stationary_distribution(reset_kernel_mdp(mdp), pi);
    CHECK((st - occ.state_marginal).cwiseAbs().maxCoeff() < 1e-9);
  }
}

TEST_CASE("reward shift moves E[R] by c and keeps V(R) and V(G0)") {
  const FiniteMdp mdp = random_mdp(6, 3, 21, {}, 0.9);
  Rng rng(3);
  const auto pi = oracle::random_policy(6, 3, rng);
  const double c = 1.75;
  const FiniteMdp shifted = mdp.with_reward(mdp.reward().array() + c);
  const auto a = reward_distribution(mdp, pi);
  const auto b = reward_distribution(shifted, pi);
  CHECK(std::abs(b.mean - a.mean - c) < 1e-10);
  CHECK(std::abs(b.variance - a.variance) < 1e-10);
  CHECK(std::abs(return_variance(shifted, pi) - return_variance(mdp, pi)) < 1e-9);
}

TEST_CASE("return variance agrees with trajectory enumeration") {
  const FiniteMdp mdp = random_mdp(2, 2, 5, {}, 0.2);
  Rng rng(8);
  const auto pi = oracle::random_policy(2, 2, rng);
  // 0.2^11 is about 2e-8.
  CHECK(return_variance(mdp, pi) ==
        doctest::Approx(oracle::return_variance_by_enumeration(mdp, pi, 11)).epsilon(1e-6));
}

TEST_CASE("value functions agree with a 200-sweep value-iteration oracle on 8 states") {
  const FiniteMdp mdp = random_mdp(8, 3, 77, {}, 0.9);
  Rng rng(2);
  const auto pi = oracle::random_policy(8, 3, rng);
  CHECK((value_functions(mdp, pi).q - oracle::q_by_iteration(mdp, pi)).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("fig3 occupancy matches Monte-Carlo within TV 0.01") {
  const FiniteMdp mdp = fig3_mdp();
  const auto pi = TabularPolicy::uniform(4, 2);
  const Matrix mc = oracle::mc_occupancy(mdp, pi, 100'000, 2024);
  const double tv = 0.5 * (mc - occupancy_measure(mdp, pi).d).cwiseAbs().sum();
  CHECK(tv < 0.01);
}

TEST_CASE("return variance within 3 standard errors of Monte-Carlo on a random MDP") {
  const FiniteMdp mdp = random_mdp(5, 2, 9, {}, 0.9);
  Rng rng(10);
  const auto pi = oracle::random_policy(5, 2, rng);
  const auto est = oracle::mc_return_variance(mdp, pi, 100'000, 31);
  CHECK(std::abs(est.value - return_variance(mdp, pi)) < 3 * est.standard_error);
}

TEST_CASE("reward support groups values equal to 12 significant digits") {
  Matrix r(2, 1);
  r << 0.1 + 0.2, 0.3;
  const FiniteMdp mdp(2, 1, r, {0.5, 0.5, 0.5, 0.5}, Vector::Constant(2, 0.5), 0.5);
  const auto rd = reward_distribution(mdp, TabularPolicy::uniform(2, 1));
  CHECK(rd.support.size() == 1);
  CHECK(rd.pmf[0] == doctest::Approx(1.0));
}
