#pragma once

#include "mvpi/mdp.hpp"
#include "mvpi/rng.hpp"

#include <cstdint>
#include <utility>
#include <vector>

namespace mvpi {

/// Reward values chosen for the four-state off-line benchmark. Only s0 has a
/// real choice; s1..s3 carry two identical actions so the table stays dense.
struct Fig3Rewards {
  double s1 = 2.0;
  double s2 = 0.0;
  double s3 = 0.9;
};

/// s0 --a0--> {s1, s2} w.p. 0.5 each, s0 --a1--> s3; s1, s2, s3 return to s0.
/// gamma = 0.7, mu0 = delta(s0), r(s0, .) = 0.
FiniteMdp fig3_mdp(const Fig3Rewards& rewards = {});

/// Behavior-agnostic sampling distribution for fig3_mdp: 0.2 on each of
/// (s0,a0), (s0,a1), s1, s2, s3, split evenly over the duplicated actions.
Matrix fig3_sampling_distribution();

/// s0 -> s1, s1 -> s1, one action, mu0 = delta(s0), r = (1, 0).
FiniteMdp chain2_mdp(double gamma = 0.5);

/// s0 (r = 0) -> s1 or s2 w.p. 0.5; s1 self-loop r = 1; s2 self-loop r = 0.
FiniteMdp branch_mdp(double gamma = 0.5);

/// Deterministic swap s0 <-> s1 with rewards (r0, r1).
FiniteMdp swap_mdp(double r0 = 1.0, double r1 = 0.0, double gamma = 0.5);

/// r == c everywhere on a random kernel.
FiniteMdp constant_reward_mdp(std::size_t n_states, std::size_t n_actions, double c, double gamma,
                              std::uint64_t seed);

struct RewardRange {
  double lo = -1.0;
  double hi = 1.0;
};

/// Kernel rows and mu0 uniform on the simplex, rewards uniform in range.
/// A pure function of its arguments.
FiniteMdp random_mdp(std::size_t n_states, std::size_t n_actions, std::uint64_t seed,
                     RewardRange reward_range = {}, double gamma = 0.9);

/// Smallest T with gamma^T < 1e-8 (1 for gamma == 0).
std::size_t truncation_horizon(double gamma);

struct Step {
  std::size_t state;
  std::size_t action;
  double reward;
};

struct EpisodicRollout {
  std::vector<Step> steps;
  double return_g0 = 0.0;  ///< discounted sum of the listed rewards
};

std::size_t sample_initial_state(const FiniteMdp& mdp, Rng& rng);
std::size_t sample_action(const TabularPolicy& policy, std::size_t s, Rng& rng);
std::size_t sample_next_state(const FiniteMdp& mdp, std::size_t s, std::size_t a, Rng& rng);

/// One trajectory of `horizon` steps from mu0.
EpisodicRollout rollout(const FiniteMdp& mdp, const TabularPolicy& policy, Rng& rng,
                        std::size_t horizon);

/// Seeded stream of truncated trajectories.
class RolloutSampler {
 public:
  /// horizon == 0 selects truncation_horizon(gamma).
  RolloutSampler(const FiniteMdp& mdp, const TabularPolicy& policy, std::uint64_t seed,
                 std::size_t horizon = 0);

  EpisodicRollout next() { return rollout(mdp_, policy_, rng_, horizon_); }
  std::size_t horizon() const noexcept { return horizon_; }

 private:
  const FiniteMdp& mdp_;
  TabularPolicy policy_;
  Rng rng_;
  std::size_t horizon_;
};

}  // namespace mvpi
