#include "oracles.hpp"

#include "mvpi/engine.hpp"
#include "mvpi/envs.hpp"

#include <doctest.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

using namespace mvpi;

namespace {

// Fixed by exact rational arithmetic on the fig3 chain: x0 = 0.3/0.51 under
// either s0 action, E[R] = 0.7/1.7 (a0) or 0.63/1.7 (a1).
constexpr double kFig3MeanA0 = 0.41176470588235298;
constexpr double kFig3VarA0 = 0.65397923875432529;
constexpr double kFig3MeanA1 = 0.37058823529411766;
constexpr double kFig3VarA1 = 0.19619377162629759;
constexpr double kFig3Crossover = 17.0 / 189.0;

TabularPolicy fig3_choice(std::size_t a) {
  const std::array<std::size_t, 4> acts{a, 0, 0, 0};
  return TabularPolicy::deterministic(acts, 2);
}

double best_by_enumeration(const FiniteMdp& mdp, double lambda) {
  double best = -std::numeric_limits<double>::infinity();
  for (const auto& pi : oracle::all_deterministic_policies(mdp.n_states(), mdp.n_actions())) {
    best = std::max(best, risk_objective(mdp, pi, {lambda}));
  }
  return best;
}

MvpiConfig exact(double lambda) {
  MvpiConfig c;
  c.params.lambda = lambda;
  return c;
}

MvpiConfig softmax(double lambda, double step = 0.1, int outer = 100) {
  MvpiConfig c;
  c.params.lambda = lambda;
  c.improver = SoftmaxGradient{step, 1000, 1e-6};
  c.max_outer_iterations = outer;
  return c;
}

}  // namespace

TEST_CASE("fig3 constants from an independent occupancy route") {
  const FiniteMdp mdp = fig3_mdp();
  const auto m0 = oracle::reward_moments(oracle::occupancy_by_series(mdp, fig3_choice(0)), mdp.reward());
  const auto m1 = oracle::reward_moments(oracle::occupancy_by_series(mdp, fig3_choice(1)), mdp.reward());
  CHECK(m0.mean == doctest::Approx(kFig3MeanA0).epsilon(1e-13));
  CHECK(m0.variance == doctest::Approx(kFig3VarA0).epsilon(1e-13));
  CHECK(m1.mean == doctest::Approx(kFig3MeanA1).epsilon(1e-13));
  CHECK(m1.variance == doctest::Approx(kFig3VarA1).epsilon(1e-13));
  CHECK((m0.mean - m1.mean) / (m0.variance - m1.variance) == doctest::Approx(kFig3Crossover).epsilon(1e-12));
  CHECK(risk_objective(mdp, fig3_choice(0), {kFig3Crossover}) ==
        doctest::Approx(risk_objective(mdp, fig3_choice(1), {kFig3Crossover})).epsilon(1e-13));
  CHECK(risk_objective(mdp, fig3_choice(0), {0.0}) > risk_objective(mdp, fig3_choice(1), {0.0}));
  CHECK(risk_objective(mdp, fig3_choice(0), {2.0}) < risk_objective(mdp, fig3_choice(1), {2.0}));
}

TEST_CASE("config validation") {
  MvpiConfig c = softmax(1.0);
  std::get<SoftmaxGradient>(c.improver).step_size = 0.0;
  CHECK_THROWS_AS(c.validate(), Error);
  c = exact(1.0);
  c.max_outer_iterations = 0;
  CHECK_THROWS_AS(c.validate(), Error);
  c = exact(1.0);
  c.objective_tolerance = 0.0;
  CHECK_THROWS_AS(c.validate(), Error);
}

TEST_CASE("policy evaluation step") {
  CHECK(policy_evaluation_step(chain2_mdp(), TabularPolicy::uniform(2, 1), Setting::Discounted) ==
        doctest::Approx(0.5));
  CHECK(policy_evaluation_step(constant_reward_mdp(3, 2, 1.3, 0.9, 2), TabularPolicy::uniform(3, 2),
                               Setting::Discounted) == doctest::Approx(1.3).epsilon(1e-12));
  const FiniteMdp mdp = fig3_mdp();
  const auto pi = TabularPolicy::uniform(4, 2);
  CHECK(std::abs(policy_evaluation_step(mdp, pi, Setting::Discounted) -
                 (1 - mdp.discount()) * expected_return(mdp, pi)) < 1e-12);
  CHECK(policy_evaluation_step(swap_mdp(1.0, 0.0), TabularPolicy::uniform(2, 1),
                               Setting::AverageReward) == doctest::Approx(0.5));
}

TEST_CASE("policy iteration finds the value-iteration optimum") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const FiniteMdp mdp = random_mdp(6, 3, seed, {}, 0.9);
    const TabularPolicy pi = policy_iteration(mdp, TabularPolicy::uniform(6, 3));
    CHECK(pi.is_deterministic());
    const Matrix q_star = oracle::optimal_q_by_iteration(mdp);
    const Vector v = value_functions(mdp, pi).v;
    CHECK((v - q_star.rowwise().maxCoeff()).cwiseAbs().maxCoeff() < 1e-8);
  }
}

TEST_CASE("greedy ties go to the lowest action index") {
  const FiniteMdp mdp = constant_reward_mdp(3, 4, 1.0, 0.9, 5);
  const TabularPolicy pi = policy_iteration(mdp, TabularPolicy::uniform(3, 4));
  CHECK(pi.greedy_actions() == std::vector<std::size_t>{0, 0, 0});
}

TEST_CASE("exact improvement at lambda = 0 is risk-neutral optimal") {
  const FiniteMdp mdp = random_mdp(5, 3, 12, {}, 0.9);
  const auto warm = TabularPolicy::uniform(5, 3);
  const double y = policy_evaluation_step(mdp, warm, Setting::Discounted);
  const auto next = as_tabular(policy_improvement_step(mdp, y, exact(0.0), warm));
  CHECK(std::abs(expected_return(mdp, next) - expected_return(mdp, policy_iteration(mdp, warm))) <
        1e-12);
}

TEST_CASE("fig3 exact MVPI picks a0 below the crossover and a1 above it") {
  const FiniteMdp mdp = fig3_mdp();
  for (double lambda : {0.0, 0.05, 0.08, 0.1, 0.5, 2.0, 10.0}) {
    CAPTURE(lambda);
    const auto trace = run_mvpi(mdp, exact(lambda), TabularPolicy::uniform(4, 2));
    const auto pi = as_tabular(trace.final_policy);
    CHECK(trace.converged);
    CHECK(pi(0, lambda < kFig3Crossover ? 0 : 1) == 1.0);
    CHECK(trace.records.back().objective == doctest::Approx(best_by_enumeration(mdp, lambda)).epsilon(1e-12));
  }
}

TEST_CASE("trace bookkeeping") {
  const FiniteMdp mdp = random_mdp(4, 2, 3, {}, 0.9);
  const auto trace = run_mvpi(mdp, exact(1.0), TabularPolicy::uniform(4, 2));
  REQUIRE(trace.records.size() >= 2);
  CHECK(std::isnan(trace.records[0].y));
  CHECK(std::isnan(trace.records[0].gradient_norm));
  CHECK(trace.reason == StopReason::PolicyStable);
  for (std::size_t k = 1; k < trace.records.size(); ++k) {
    CHECK(trace.records[k].y == doctest::Approx(trace.records[k - 1].expected_reward).epsilon(1e-14));
    const auto& r = trace.records[k];
    CHECK(r.expected_reward == doctest::Approx((1 - mdp.discount()) * r.J).epsilon(1e-12));
    CHECK(r.objective == doctest::Approx(r.expected_reward - r.reward_variance).epsilon(1e-12));
  }
}

TEST_CASE("exact MVPI is monotone and reaches a fixed point") {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const double gamma = std::array<double, 3>{0.5, 0.9, 0.99}[seed % 3];
    const FiniteMdp mdp = random_mdp(3 + seed % 8, 1 + seed % 4, seed + 300, {}, gamma);
    for (double lambda : {0.0, 0.5, 1.0, 2.0}) {
      CAPTURE(seed);
      CAPTURE(lambda);
      const auto trace = run_mvpi(mdp, exact(lambda),
                                  TabularPolicy::uniform(mdp.n_states(), mdp.n_actions()));
      for (std::size_t k = 1; k < trace.records.size(); ++k) {
        CHECK(trace.records[k].objective >= trace.records[k - 1].objective - 1e-10);
      }
      const auto pi = as_tabular(trace.final_policy);
      const double y = policy_evaluation_step(mdp, pi, Setting::Discounted);
      const auto again = as_tabular(policy_improvement_step(mdp, y, exact(lambda), pi));
      CHECK(again.probs() == pi.probs());
    }
  }
}

TEST_CASE("lambda = 0 MVPI equals risk-neutral policy iteration") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const FiniteMdp mdp = random_mdp(6, 3, seed + 40, {}, 0.9);
    const auto start = TabularPolicy::uniform(6, 3);
    const auto trace = run_mvpi(mdp, exact(0.0), start);
    const auto pi = as_tabular(trace.final_policy);
    const auto pi_star = policy_iteration(mdp, start);
    CHECK(std::abs(expected_return(mdp, pi) - expected_return(mdp, pi_star)) < 1e-12);
    CHECK(pi.greedy_actions() == pi_star.greedy_actions());
  }
}

TEST_CASE("softmax improvement never lowers the step-2 objective") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const FiniteMdp mdp = random_mdp(5, 3, seed + 90, {}, 0.9);
    Rng rng(seed);
    Matrix logits(5, 3);
    for (Eigen::Index i = 0; i < logits.size(); ++i) logits(i) = rng.uniform(-2.0, 2.0);
    const SoftmaxPolicy warm(logits);
    const double y = rng.uniform(-1.0, 1.0);
    const auto cfg = softmax(1.0, 5.0);
    const auto next = policy_improvement_step(mdp, y, cfg, warm);
    CHECK(step2_objective(mdp, as_tabular(next), y, cfg.params, Setting::Discounted) >=
          step2_objective(mdp, warm.to_tabular(), y, cfg.params, Setting::Discounted));
  }
}

TEST_CASE("softmax improvement reaches the exact step-2 optimum on 6 states") {
  const FiniteMdp mdp = random_mdp(6, 3, 17, {}, 0.9);
  const double y = 0.1;
  const RiskParams params{1.0};
  MvpiConfig cfg = softmax(1.0, 10.0);
  std::get<SoftmaxGradient>(cfg.improver).inner_iterations = 100000;
  std::get<SoftmaxGradient>(cfg.improver).gradient_tolerance = 1e-9;
  const auto soft = as_tabular(policy_improvement_step(mdp, y, cfg, SoftmaxPolicy::uniform(6, 3)));
  const auto best = as_tabular(policy_improvement_step(mdp, y, exact(1.0), TabularPolicy::uniform(6, 3)));
  CHECK(std::abs(step2_objective(mdp, soft, y, params, Setting::Discounted) -
                 step2_objective(mdp, best, y, params, Setting::Discounted)) < 1e-4);
}

TEST_CASE("softmax MVPI on fig3: monotone trace, vanishing gradient, lambda ordering") {
  const FiniteMdp mdp = fig3_mdp();
  double previous_pi = 2.0;
  for (int i = 0; i <= 20; ++i) {
    const double lambda = 0.1 * i;
    CAPTURE(lambda);
    MvpiConfig cfg = softmax(lambda, 1.0, 400);
    cfg.objective_tolerance = 1e-7;
    const auto trace = run_mvpi(mdp, cfg, SoftmaxPolicy::uniform(4, 2));
    double min_grad = std::numeric_limits<double>::infinity();
    for (std::size_t k = 1; k < trace.records.size(); ++k) {
      CHECK(trace.records[k].objective >= trace.records[k - 1].objective - 1e-12);
      min_grad = std::min(min_grad, trace.records[k].gradient_norm);
    }
    CHECK(trace.reason == StopReason::ObjectiveConverged);
    CHECK(min_grad < 10 * 1e-6);
    CHECK(trace.records.back().objective == doctest::Approx(best_by_enumeration(mdp, lambda)).epsilon(1e-3));
    const double p = as_tabular(trace.final_policy)(0, 0);
    CHECK(p <= previous_pi);
    previous_pi = p;
  }
}

TEST_CASE("exact policy gradient matches central differences") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const FiniteMdp mdp = random_mdp(4, 3, seed + 500, {}, 0.8);
    Rng rng(seed);
    Matrix theta(4, 3);
    for (Eigen::Index i = 0; i < theta.size(); ++i) theta(i) = rng.uniform(-1.5, 1.5);
    const double y = rng.uniform(-0.5, 0.5);
    const RiskParams params{rng.uniform(0.0, 2.0)};
    const Matrix g = exact_policy_gradient(mdp, SoftmaxPolicy(theta), y, params);
    const Matrix fd = oracle::central_difference(
        [&](const Matrix& t) {
          return step2_objective(mdp, SoftmaxPolicy(t).to_tabular(), y, params, Setting::Discounted);
        },
        theta, 1e-5);
    CHECK((g - fd).cwiseAbs().maxCoeff() / fd.cwiseAbs().maxCoeff() < 1e-5);
  }
}

TEST_CASE("average-reward policy gradient matches central differences") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const FiniteMdp mdp = random_mdp(4, 2, seed + 600, {}, 0.9);
    Rng rng(seed);
    Matrix theta(4, 2);
    for (Eigen::Index i = 0; i < theta.size(); ++i) theta(i) = rng.uniform(-1.0, 1.0);
    const double y = 0.2;
    const RiskParams params{0.7};
    const Matrix g = exact_policy_gradient_average(mdp, SoftmaxPolicy(theta), y, params);
    const Matrix fd = oracle::central_difference(
        [&](const Matrix& t) {
          return step2_objective(mdp, SoftmaxPolicy(t).to_tabular(), y, params, Setting::AverageReward);
        },
        theta, 1e-5);
    CHECK((g - fd).cwiseAbs().maxCoeff() / fd.cwiseAbs().maxCoeff() < 1e-5);
  }
}

TEST_CASE("gradient vanishes for constant rewards and at saturated optimal logits") {
  const FiniteMdp c = constant_reward_mdp(3, 2, 0.5, 0.9, 8);
  CHECK(exact_policy_gradient(c, SoftmaxPolicy::uniform(3, 2), 0.0, {0.0}).cwiseAbs().maxCoeff() < 1e-12);

  const FiniteMdp mdp = random_mdp(5, 3, 33, {}, 0.9);
  const RiskParams params{1.0};
  const auto trace = run_mvpi(mdp, exact(1.0), TabularPolicy::uniform(5, 3));
  const auto pi = as_tabular(trace.final_policy);
  Matrix theta = Matrix::Zero(5, 3);
  for (std::size_t s = 0; s < 5; ++s) theta(s, pi.greedy_actions()[s]) = 20.0;
  const double y = policy_evaluation_step(mdp, pi, Setting::Discounted);
  CHECK(exact_policy_gradient(mdp, SoftmaxPolicy(theta), y, params).norm() <= 1e-6);
}

TEST_CASE("relative value iteration and average-reward MVPI on fig3") {
  const FiniteMdp mdp = fig3_mdp();
  const auto a0 = average_risk_objective(mdp, fig3_choice(0), {1.0});
  const auto a1 = average_risk_objective(mdp, fig3_choice(1), {1.0});
  CHECK(a0.j_bar == doctest::Approx(0.5));
  CHECK(a0.lambda_risk == doctest::Approx(0.75));
  CHECK(a1.j_bar == doctest::Approx(0.45));
  CHECK(a1.lambda_risk == doctest::Approx(0.2025));

  const auto neutral = relative_value_iteration(mdp);
  CHECK(neutral(0, 0) == 1.0);

  MvpiConfig cfg = exact(1.0);
  cfg.setting = Setting::AverageReward;
  const auto trace = run_mvpi(mdp, cfg, TabularPolicy::uniform(4, 2));
  CHECK(as_tabular(trace.final_policy)(0, 1) == 1.0);
  CHECK(std::isnan(trace.records.back().return_variance));
  for (std::size_t k = 1; k < trace.records.size(); ++k) {
    CHECK(trace.records[k].objective >= trace.records[k - 1].objective - 1e-10);
  }
}

TEST_CASE("relative value iteration agrees with brute force on random unichain MDPs") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const FiniteMdp mdp = random_mdp(4, 2, seed + 700, {}, 0.9);
    const auto pi = relative_value_iteration(mdp);
    double best = -1e300;
    for (const auto& cand : oracle::all_deterministic_policies(4, 2)) {
      best = std::max(best, average_risk_objective(mdp, cand, {0.0}).j_bar);
    }
    CHECK(average_risk_objective(mdp, pi, {0.0}).j_bar == doctest::Approx(best).epsilon(1e-9));
  }
}
