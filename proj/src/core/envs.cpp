#include "mvpi/envs.hpp"

#include <cmath>

namespace mvpi {

namespace {

std::vector<double> zero_kernel(std::size_t ns, std::size_t na) {
  return std::vector<double>(ns * na * ns, 0.0);
}

void set(std::vector<double>& kernel, std::size_t ns, std::size_t na, std::size_t s, std::size_t a,
         std::size_t next, double p) {
  kernel[(s * na + a) * ns + next] = p;
}

Vector delta(std::size_t n, std::size_t at) {
  Vector v = Vector::Zero(static_cast<Eigen::Index>(n));
  v(static_cast<Eigen::Index>(at)) = 1.0;
  return v;
}

}  // namespace

FiniteMdp fig3_mdp(const Fig3Rewards& rewards) {
  constexpr std::size_t ns = 4, na = 2;
  auto kernel = zero_kernel(ns, na);
  set(kernel, ns, na, 0, 0, 1, 0.5);
  set(kernel, ns, na, 0, 0, 2, 0.5);
  set(kernel, ns, na, 0, 1, 3, 1.0);
  for (std::size_t s = 1; s < ns; ++s) {
    for (std::size_t a = 0; a < na; ++a) set(kernel, ns, na, s, a, 0, 1.0);
  }
  Matrix reward(ns, na);
  reward << 0.0, 0.0,
            rewards.s1, rewards.s1,
            rewards.s2, rewards.s2,
            rewards.s3, rewards.s3;
  return FiniteMdp(ns, na, std::move(reward), std::move(kernel), delta(ns, 0), 0.7);
}

Matrix fig3_sampling_distribution() {
  Matrix d(4, 2);
  d << 0.2, 0.2,
       0.1, 0.1,
       0.1, 0.1,
       0.1, 0.1;
  return d;
}

FiniteMdp chain2_mdp(double gamma) {
  auto kernel = zero_kernel(2, 1);
  set(kernel, 2, 1, 0, 0, 1, 1.0);
  set(kernel, 2, 1, 1, 0, 1, 1.0);
  Matrix reward(2, 1);
  reward << 1.0, 0.0;
  return FiniteMdp(2, 1, std::move(reward), std::move(kernel), delta(2, 0), gamma);
}

FiniteMdp branch_mdp(double gamma) {
  auto kernel = zero_kernel(3, 1);
  set(kernel, 3, 1, 0, 0, 1, 0.5);
  set(kernel, 3, 1, 0, 0, 2, 0.5);
  set(kernel, 3, 1, 1, 0, 1, 1.0);
  set(kernel, 3, 1, 2, 0, 2, 1.0);
  Matrix reward(3, 1);
  reward << 0.0, 1.0, 0.0;
  return FiniteMdp(3, 1, std::move(reward), std::move(kernel), delta(3, 0), gamma);
}

FiniteMdp swap_mdp(double r0, double r1, double gamma) {
  auto kernel = zero_kernel(2, 1);
  set(kernel, 2, 1, 0, 0, 1, 1.0);
  set(kernel, 2, 1, 1, 0, 0, 1.0);
  Matrix reward(2, 1);
  reward << r0, r1;
  return FiniteMdp(2, 1, std::move(reward), std::move(kernel), delta(2, 0), gamma);
}

FiniteMdp constant_reward_mdp(std::size_t n_states, std::size_t n_actions, double c, double gamma,
                              std::uint64_t seed) {
  const FiniteMdp base = random_mdp(n_states, n_actions, seed, {0.0, 1.0}, gamma);
  return base.with_reward(Matrix::Constant(static_cast<Eigen::Index>(n_states),
                                           static_cast<Eigen::Index>(n_actions), c));
}

FiniteMdp random_mdp(std::size_t n_states, std::size_t n_actions, std::uint64_t seed,
                     RewardRange reward_range, double gamma) {
  require(n_states >= 1 && n_actions >= 1, ErrorCode::InvalidArgument,
          "random_mdp needs at least one state and one action");
  require(reward_range.lo <= reward_range.hi, ErrorCode::InvalidArgument,
          "reward range is empty");
  Rng rng(seed);
  std::vector<double> kernel;
  kernel.reserve(n_states * n_actions * n_states);
  for (std::size_t s = 0; s < n_states; ++s) {
    for (std::size_t a = 0; a < n_actions; ++a) {
      const auto row = rng.simplex(n_states);
      kernel.insert(kernel.end(), row.begin(), row.end());
    }
  }
  Matrix reward(static_cast<Eigen::Index>(n_states), static_cast<Eigen::Index>(n_actions));
  for (Eigen::Index s = 0; s < reward.rows(); ++s) {
    for (Eigen::Index a = 0; a < reward.cols(); ++a) {
      reward(s, a) = rng.uniform(reward_range.lo, reward_range.hi);
    }
  }
  const auto mu0 = rng.simplex(n_states);
  Vector initial = Eigen::Map<const Vector>(mu0.data(), static_cast<Eigen::Index>(n_states));
  return FiniteMdp(n_states, n_actions, std::move(reward), std::move(kernel), std::move(initial),
                   gamma);
}

std::size_t truncation_horizon(double gamma) {
  require(gamma >= 0.0 && gamma < 1.0, ErrorCode::InvalidArgument,
          "truncation horizon needs 0 <= gamma < 1");
  std::size_t t = 1;
  double g = gamma;
  while (!(g < 1e-8)) {
    g *= gamma;
    ++t;
  }
  return t;
}

std::size_t sample_initial_state(const FiniteMdp& mdp, Rng& rng) {
  return rng.categorical({mdp.initial_dist().data(), mdp.n_states()});
}

std::size_t sample_action(const TabularPolicy& policy, std::size_t s, Rng& rng) {
  const std::size_t na = policy.n_actions();
  double buf[64];
  if (na <= 64) {
    for (std::size_t a = 0; a < na; ++a) buf[a] = policy(s, a);
    return rng.categorical({buf, na});
  }
  std::vector<double> row(na);
  for (std::size_t a = 0; a < na; ++a) row[a] = policy(s, a);
  return rng.categorical(row);
}

std::size_t sample_next_state(const FiniteMdp& mdp, std::size_t s, std::size_t a, Rng& rng) {
  return rng.categorical(mdp.kernel_row(s, a));
}

EpisodicRollout rollout(const FiniteMdp& mdp, const TabularPolicy& policy, Rng& rng,
                        std::size_t horizon) {
  check_policy_shape(mdp, policy);
  EpisodicRollout out;
  out.steps.reserve(horizon);
  std::size_t s = sample_initial_state(mdp, rng);
  double weight = 1.0;
  for (std::size_t t = 0; t < horizon; ++t) {
    const std::size_t a = sample_action(policy, s, rng);
    const double r = mdp.reward(s, a);
    out.steps.push_back({s, a, r});
    out.return_g0 += weight * r;
    weight *= mdp.discount();
    s = sample_next_state(mdp, s, a, rng);
  }
  return out;
}

RolloutSampler::RolloutSampler(const FiniteMdp& mdp, const TabularPolicy& policy,
                               std::uint64_t seed, std::size_t horizon)
    : mdp_(mdp),
      policy_(policy),
      rng_(seed),
      horizon_(horizon == 0 ? truncation_horizon(mdp.discount()) : horizon) {
  check_policy_shape(mdp_, policy_);
}

}  // namespace mvpi
