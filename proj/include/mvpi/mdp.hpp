#pragma once

#include "mvpi/errors.hpp"
#include "mvpi/linalg.hpp"

#include <cstddef>
#include <span>
#include <vector>

namespace mvpi {

/// Tolerance on probability rows (kernel, initial distribution, policies).
inline constexpr double kProbabilityTolerance = 1e-12;

/// Exact tabular MDP: rewards r(s,a), kernel p(s'|s,a), initial distribution
/// mu0 and discount gamma. Immutable after construction.
///
/// gamma is accepted on [0, 1]; operations on the discounted objective reject
/// gamma == 1, average-reward operations ignore gamma.
class FiniteMdp {
 public:
  /// `kernel` is laid out as [state][action][next_state].
  FiniteMdp(std::size_t n_states, std::size_t n_actions, Matrix reward,
            std::vector<double> kernel, Vector initial_dist, double discount);

  std::size_t n_states() const noexcept { return n_states_; }
  std::size_t n_actions() const noexcept { return n_actions_; }
  double discount() const noexcept { return discount_; }
  const Matrix& reward() const noexcept { return reward_; }
  double reward(std::size_t s, std::size_t a) const { return reward_(s, a); }
  const Vector& initial_dist() const noexcept { return initial_; }

  double p(std::size_t s, std::size_t a, std::size_t next) const {
    return kernel_[(s * n_actions_ + a) * n_states_ + next];
  }
  std::span<const double> kernel_row(std::size_t s, std::size_t a) const {
    return {kernel_.data() + (s * n_actions_ + a) * n_states_, n_states_};
  }
  const std::vector<double>& kernel() const noexcept { return kernel_; }

  /// Same dynamics, different reward table.
  FiniteMdp with_reward(Matrix reward) const;

  /// Throws InvalidArgument unless gamma < 1.
  void require_discounted(const char* operation) const;

 private:
  std::size_t n_states_;
  std::size_t n_actions_;
  Matrix reward_;
  std::vector<double> kernel_;
  Vector initial_;
  double discount_;
};

/// pi(a|s) as an explicit table.
class TabularPolicy {
 public:
  explicit TabularPolicy(Matrix probs);

  static TabularPolicy uniform(std::size_t n_states, std::size_t n_actions);
  static TabularPolicy deterministic(std::span<const std::size_t> actions,
                                     std::size_t n_actions);

  std::size_t n_states() const noexcept { return static_cast<std::size_t>(probs_.rows()); }
  std::size_t n_actions() const noexcept { return static_cast<std::size_t>(probs_.cols()); }
  const Matrix& probs() const noexcept { return probs_; }
  double operator()(std::size_t s, std::size_t a) const { return probs_(s, a); }

  /// True when every row puts all its mass on one action.
  bool is_deterministic() const;
  /// Highest-probability action per state, lowest index on ties.
  std::vector<std::size_t> greedy_actions() const;

 private:
  Matrix probs_;
};

/// Softmax policy over tabular logits theta(s,a).
class SoftmaxPolicy {
 public:
  explicit SoftmaxPolicy(Matrix logits);

  static SoftmaxPolicy uniform(std::size_t n_states, std::size_t n_actions);
  /// Logits log pi(a|s); every probability must be positive.
  static SoftmaxPolicy from_tabular(const TabularPolicy& policy);

  const Matrix& logits() const noexcept { return logits_; }
  Matrix& mutable_logits() noexcept { return logits_; }
  std::size_t n_states() const noexcept { return static_cast<std::size_t>(logits_.rows()); }
  std::size_t n_actions() const noexcept { return static_cast<std::size_t>(logits_.cols()); }

  Vector action_probs(std::size_t s) const;
  TabularPolicy to_tabular() const;

 private:
  Matrix logits_;
};

/// Normalized discounted state-action distribution d_pi.
struct OccupancyMeasure {
  Matrix d;            ///< (state, action) mass, sums to 1
  Vector state_marginal;
};

struct ValueFunctions {
  Vector v;
  Matrix q;
};

/// Law of the per-step reward R under d_pi.
struct RewardDistribution {
  std::vector<double> support;
  std::vector<double> pmf;
  double mean = 0.0;
  double second_moment = 0.0;
  double variance = 0.0;
};

/// Policy-induced state transition matrix P_pi(s, s').
Matrix policy_transition(const FiniteMdp& mdp, const TabularPolicy& policy);
/// Policy-averaged reward r_pi(s).
Vector policy_reward(const FiniteMdp& mdp, const TabularPolicy& policy);

OccupancyMeasure occupancy_measure(const FiniteMdp& mdp, const TabularPolicy& policy);
ValueFunctions value_functions(const FiniteMdp& mdp, const TabularPolicy& policy);
/// J(pi) = sum_s mu0(s) v_pi(s).
double expected_return(const FiniteMdp& mdp, const TabularPolicy& policy);
RewardDistribution reward_distribution(const FiniteMdp& mdp, const TabularPolicy& policy);
/// Exact variance of the discounted return G0 from the second-moment
/// Bellman equation.
double return_variance(const FiniteMdp& mdp, const TabularPolicy& policy);
/// Stationary distribution of the policy-induced chain; NonErgodicChain when
/// the chain is not unichain.
Vector stationary_distribution(const FiniteMdp& mdp, const TabularPolicy& policy);

/// MDP with kernel gamma * p + (1 - gamma) * mu0 (the reset kernel). Its
/// stationary distribution under pi is the state marginal of d_pi.
FiniteMdp reset_kernel_mdp(const FiniteMdp& mdp);

void check_policy_shape(const FiniteMdp& mdp, const TabularPolicy& policy);

}  // namespace mvpi
