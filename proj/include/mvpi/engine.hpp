#pragma once

#include "mvpi/augmentation.hpp"
#include "mvpi/mdp.hpp"
#include "mvpi/risk.hpp"

#include <optional>
#include <variant>
#include <vector>

namespace mvpi {

enum class Setting { Discounted, AverageReward };

/// Step 2 solved exactly: policy iteration (discounted) or relative value
/// iteration (average reward) on the augmented MDP.
struct ExactPolicyIteration {};

/// Step 2 solved approximately by gradient ascent on softmax logits from the
/// warm start. Backtracks on any decrease, so the step never lowers the
/// Step-2 objective.
struct SoftmaxGradient {
  double step_size = 0.1;
  int inner_iterations = 1000;
  double gradient_tolerance = 1e-6;
};

using Improver = std::variant<ExactPolicyIteration, SoftmaxGradient>;

struct MvpiConfig {
  RiskParams params;
  Improver improver = ExactPolicyIteration{};
  Setting setting = Setting::Discounted;
  int max_outer_iterations = 100;
  double objective_tolerance = 1e-10;

  void validate() const;
};

/// Policy as carried between iterations: a table for the exact improver,
/// logits for the gradient improver.
using PolicyParameters = std::variant<TabularPolicy, SoftmaxPolicy>;

TabularPolicy as_tabular(const PolicyParameters& policy);

struct MvpiRecord {
  int k = 0;
  double y = 0.0;                ///< dual used to produce pi_k (NaN for k = 0)
  double J = 0.0;                ///< J(pi_k), or the average reward
  double expected_reward = 0.0;  ///< E[R]
  double reward_variance = 0.0;  ///< V(R), or the long-run variance
  double return_variance = 0.0;  ///< V(G0), NaN in the average-reward setting
  double objective = 0.0;        ///< J_lambda(pi_k)
  double gradient_norm = 0.0;    ///< ||grad J_lambda(theta_k)||, NaN for tabular policies
};

enum class StopReason { PolicyStable, ObjectiveConverged, IterationCap };

const char* to_string(StopReason reason) noexcept;

struct MvpiTrace {
  std::vector<MvpiRecord> records;
  PolicyParameters final_policy;
  bool converged = false;
  StopReason reason = StopReason::IterationCap;
};

/// Step 1: the maximizer of the dual objective in y. E[R] = (1 - gamma) J(pi)
/// in the discounted setting, the average reward otherwise.
double policy_evaluation_step(const FiniteMdp& mdp, const TabularPolicy& policy, Setting setting);

/// Step 2.
PolicyParameters policy_improvement_step(const FiniteMdp& mdp, double y, const MvpiConfig& config,
                                         const PolicyParameters& warm_start);

/// Algorithm 1: alternate Steps 1 and 2 until the policy is stable (exact
/// improver), the objective stalls (gradient improver), or the cap is hit.
MvpiTrace run_mvpi(const FiniteMdp& mdp, const MvpiConfig& config,
                   const PolicyParameters& initial_policy);

/// J_lambda(pi) in either setting.
double risk_value(const FiniteMdp& mdp, const TabularPolicy& policy, const RiskParams& params,
                  Setting setting);

/// sum d r_hat(.;y) - lambda y^2 with d the occupancy (discounted) or the
/// stationary state-action distribution (average reward).
double step2_objective(const FiniteMdp& mdp, const TabularPolicy& policy, double y,
                       const RiskParams& params, Setting setting);

/// Gradient of sum d_theta r_hat(.;y) - lambda y^2 with respect to the logits:
/// sum_{s,a} d_theta(s,a) grad log pi(a|s) q_hat(s,a), from exact solves.
Matrix exact_policy_gradient(const FiniteMdp& mdp, const SoftmaxPolicy& policy, double y,
                             const RiskParams& params);

/// Average-reward counterpart using the differential action values.
Matrix exact_policy_gradient_average(const FiniteMdp& mdp, const SoftmaxPolicy& policy, double y,
                                     const RiskParams& params);

/// Risk-neutral policy iteration. Greedy steps break ties toward the lowest
/// action index; stops when the greedy policy repeats.
TabularPolicy policy_iteration(const FiniteMdp& mdp, const TabularPolicy& warm_start);

/// Gain-optimal deterministic policy of a unichain MDP by relative value
/// iteration on the aperiodic transform 0.5 I + 0.5 P, stopping when the span
/// of successive differences drops below `span_tolerance`.
TabularPolicy relative_value_iteration(const FiniteMdp& mdp, double span_tolerance = 1e-10,
                                       long max_iterations = 200'000);

}  // namespace mvpi
