#pragma once

#include "mvpi/envs.hpp"
#include "mvpi/mdp.hpp"
#include "mvpi/risk.hpp"

#include <cstdint>
#include <vector>

namespace mvpi {

/// Total-return mean-variance baseline: stochastic coordinate ascent on
///   L3(theta, y) = 2 y (E[G0] + 1/(2 lambda)) - y^2 - E[G0^2]
/// with discounted trajectories truncated at gamma^T < 1e-8.
struct MvpSchedule {
  int iterations = 300;
  int rollouts_per_iteration = 32;
  double step_size = 0.05;
  std::size_t horizon = 0;  ///< 0 selects truncation_horizon(gamma)
  double logit_bound = 1e6;  ///< divergence guard on |theta|
  std::uint64_t seed = 0;

  void validate() const;
};

struct MvpRecord {
  int iteration = 0;
  Matrix theta;
  double y = 0.0;
  double mean_return_estimate = 0.0;  ///< sample mean of G0 this iteration
  double objective = 0.0;             ///< exact per-step J_lambda of pi_theta
  double return_variance = 0.0;       ///< exact V(G0) of pi_theta
  double pi_a0_s0 = 0.0;
};

struct MvpTrace {
  std::vector<MvpRecord> records;
  SoftmaxPolicy final_policy;
};

/// Exact maximizer of L3 in y: E[G0] + 1/(2 lambda).
double mvp_y_update(double mean_return, double lambda);

/// L3 from the first two moments of G0.
double mvp_objective(double mean_return, double second_moment, double y, double lambda);

/// Single-trajectory ascent direction G0 (2y - G0) sum_t grad log pi(a_t|s_t).
Matrix mvp_direction(const EpisodicRollout& trajectory, const SoftmaxPolicy& policy, double y);

MvpTrace mvp_baseline(const FiniteMdp& mdp, const RiskParams& params, const MvpSchedule& schedule);

}  // namespace mvpi
