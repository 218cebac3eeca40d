#pragma once

#include "mvpi/mdp.hpp"
#include "mvpi/risk.hpp"

namespace mvpi {

/// r_hat(r; y) = r - lambda r^2 + 2 lambda r y.
inline double augmented_reward(double r, double y, double lambda) {
  return r - lambda * r * r + 2.0 * lambda * r * y;
}

/// The MDP solved in the policy-improvement step: base dynamics with the
/// stationary reward r_hat(s, a; y).
struct AugmentedMdp {
  FiniteMdp mdp;       ///< base kernel, mu0 and gamma with r_hat as reward
  Matrix base_reward;  ///< r
  double y = 0.0;
  double lambda = 0.0;
};

AugmentedMdp build_augmented_mdp(const FiniteMdp& mdp, double y, const RiskParams& params);

/// r'(s,a) = r - lambda (r - (1 - gamma) J(pi))^2. Depends on the policy, so
/// it is only a diagnostic; the solver never optimizes it.
Matrix policy_dependent_reward(const FiniteMdp& mdp, const TabularPolicy& policy,
                               const RiskParams& params);

/// sum_{s,a} d_pi(s,a) r_hat(s,a;y) - lambda y^2. Concave in y with maximum
/// J_lambda(pi) attained at y = E[R].
double dual_objective(const FiniteMdp& mdp, const TabularPolicy& policy, double y,
                      const RiskParams& params);

}  // namespace mvpi
