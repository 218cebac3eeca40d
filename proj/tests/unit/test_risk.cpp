#include "oracles.hpp"

#include "mvpi/augmentation.hpp"
#include "mvpi/envs.hpp"
#include "mvpi/risk.hpp"

#include <doctest.h>

#include <cmath>
#include <vector>

using namespace mvpi;

TEST_CASE("RiskParams rejects negative or non-finite lambda") {
  CHECK_THROWS_AS((RiskParams{-0.1}.validate()), Error);
  CHECK_THROWS_AS((RiskParams{std::nan("")}.validate()), Error);
  CHECK_NOTHROW((RiskParams{0.0}.validate()));
}

TEST_CASE("risk objective closed forms") {
  const auto pi1 = TabularPolicy::uniform(2, 1);
  CHECK(risk_objective(chain2_mdp(), pi1, {1.0}) == doctest::Approx(0.25));
  CHECK(risk_objective(chain2_mdp(), pi1, {0.0}) ==
        doctest::Approx(0.5 * expected_return(chain2_mdp(), pi1)));
  const FiniteMdp constant = constant_reward_mdp(4, 2, -0.6, 0.7, 3);
  for (double lambda : {0.0, 0.5, 3.0}) {
    CHECK(risk_objective(constant, TabularPolicy::uniform(4, 2), {lambda}) ==
          doctest::Approx(-0.6).epsilon(1e-12));
  }
}

TEST_CASE("risk objective is non-increasing in lambda and matches sum d r'") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const FiniteMdp mdp = random_mdp(5, 3, seed, {}, 0.9);
    Rng rng(seed + 50);
    const auto pi = oracle::random_policy(5, 3, rng);
    double previous = risk_objective(mdp, pi, {0.0});
    CHECK(std::abs(previous - 0.1 * expected_return(mdp, pi)) < 1e-10);
    for (double lambda : {0.25, 0.5, 1.0, 2.0}) {
      const double j = risk_objective(mdp, pi, {lambda});
      CHECK(j <= previous + 1e-15);
      previous = j;
      const Matrix rp = policy_dependent_reward(mdp, pi, {lambda});
      CHECK(std::abs(occupancy_measure(mdp, pi).d.cwiseProduct(rp).sum() - j) < 1e-10);
    }
  }
}

TEST_CASE("average risk objective closed forms") {
  const auto swap = average_risk_objective(swap_mdp(1.0, 0.0), TabularPolicy::uniform(2, 1), {1.0});
  CHECK(swap.j_bar == doctest::Approx(0.5));
  CHECK(swap.lambda_risk == doctest::Approx(0.25));
  CHECK(swap.objective == doctest::Approx(0.25));
  const auto c = average_risk_objective(constant_reward_mdp(3, 2, 2.5, 0.9, 1),
                                        TabularPolicy::uniform(3, 2), {4.0});
  CHECK(c.j_bar == doctest::Approx(2.5));
  CHECK(std::abs(c.lambda_risk) < 1e-12);
  CHECK(c.objective == doctest::Approx(2.5));
  CHECK_THROWS_AS(average_risk_objective(branch_mdp(), TabularPolicy::uniform(3, 1), {1.0}), Error);
}

TEST_CASE("long-run variance within 3 standard errors of a long rollout") {
  const FiniteMdp mdp = random_mdp(4, 2, 13, {}, 0.9);
  Rng rng(14);
  const auto pi = oracle::random_policy(4, 2, rng);
  const auto est = oracle::mc_long_run_variance(mdp, pi, 1'000'000, 1000, 100, 99);
  const double exact = average_risk_objective(mdp, pi, {1.0}).lambda_risk;
  CHECK(std::abs(est.value - exact) < 3 * est.standard_error);
}

TEST_CASE("episode stats") {
  const std::vector<double> flat{1, 1, 1};
  const auto a = episode_stats(flat, {1.0});
  CHECK(a.mean == 1.0);
  CHECK(a.variance == 0.0);
  CHECK(a.j_algo == 1.0);
  CHECK_FALSE(a.sharpe.has_value());
  CHECK_THROWS_AS(a.sharpe_or_throw(), Error);

  const std::vector<double> two{0, 2};
  const auto b = episode_stats(two, {1.0});
  CHECK(b.mean == 1.0);
  CHECK(b.variance == 1.0);
  CHECK(b.j_algo == 0.0);
  CHECK(b.sharpe_or_throw() == 1.0);

  const std::vector<double> one{3.0};
  try {
    episode_stats(one, {1.0});
    FAIL("expected DegenerateSample");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::DegenerateSample);
  }
}

TEST_CASE("normalized deltas") {
  const std::vector<double> r{0.5, 1.5, 2.0, 4.0};
  const auto s = episode_stats(r, {0.5});
  const auto self = normalized_deltas(s, s);
  CHECK(self.j_algo == 0.0);
  CHECK(self.mean == 0.0);
  CHECK(self.variance == 0.0);
  REQUIRE(self.sharpe.has_value());
  CHECK(*self.sharpe == 0.0);

  const std::vector<double> r2{1.0, 3.0};
  const auto other = episode_stats(r2, {0.5});
  const auto d = normalized_deltas(other, s);
  CHECK(d.mean == doctest::Approx((other.mean - s.mean) / std::abs(s.mean)));
  CHECK(d.variance == doctest::Approx((other.variance - s.variance) / std::abs(s.variance)));
}
