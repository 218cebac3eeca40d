#include "mvpi/augmentation.hpp"

#include <cmath>

namespace mvpi {

AugmentedMdp build_augmented_mdp(const FiniteMdp& mdp, double y, const RiskParams& params) {
  params.validate();
  require(std::isfinite(y), ErrorCode::InvalidArgument, "dual variable y must be finite");
  Matrix augmented = mdp.reward();
  for (Eigen::Index s = 0; s < augmented.rows(); ++s) {
    for (Eigen::Index a = 0; a < augmented.cols(); ++a) {
      augmented(s, a) = augmented_reward(augmented(s, a), y, params.lambda);
    }
  }
  return AugmentedMdp{mdp.with_reward(std::move(augmented)), mdp.reward(), y, params.lambda};
}

Matrix policy_dependent_reward(const FiniteMdp& mdp, const TabularPolicy& policy,
                               const RiskParams& params) {
  params.validate();
  const double mean_reward = (1.0 - mdp.discount()) * expected_return(mdp, policy);
  return (mdp.reward().array() -
          params.lambda * (mdp.reward().array() - mean_reward).square())
      .matrix();
}

double dual_objective(const FiniteMdp& mdp, const TabularPolicy& policy, double y,
                      const RiskParams& params) {
  const AugmentedMdp aug = build_augmented_mdp(mdp, y, params);
  const OccupancyMeasure occ = occupancy_measure(mdp, policy);
  return occ.d.cwiseProduct(aug.mdp.reward()).sum() - params.lambda * y * y;
}

}  // namespace mvpi
