#include "mvpi/baselines.hpp"

#include <cmath>

namespace mvpi {

void MvpSchedule::validate() const {
  require(iterations >= 1 && rollouts_per_iteration >= 1, ErrorCode::InvalidArgument,
          "MVP schedule counts must be at least 1");
  require(step_size > 0.0 && logit_bound > 0.0, ErrorCode::InvalidArgument,
          "MVP step size and logit bound must be positive");
}

double mvp_y_update(double mean_return, double lambda) {
  require(lambda > 0.0, ErrorCode::InvalidArgument, "MVP needs lambda > 0");
  return mean_return + 1.0 / (2.0 * lambda);
}

double mvp_objective(double mean_return, double second_moment, double y, double lambda) {
  return 2.0 * y * (mean_return + 1.0 / (2.0 * lambda)) - y * y - second_moment;
}

Matrix mvp_direction(const EpisodicRollout& trajectory, const SoftmaxPolicy& policy, double y) {
  Matrix score = Matrix::Zero(policy.logits().rows(), policy.logits().cols());
  for (const Step& step : trajectory.steps) {
    const Vector probs = policy.action_probs(step.state);
    const auto s = static_cast<Eigen::Index>(step.state);
    for (Eigen::Index b = 0; b < probs.size(); ++b) {
      score(s, b) += (b == static_cast<Eigen::Index>(step.action) ? 1.0 : 0.0) - probs(b);
    }
  }
  const double g0 = trajectory.return_g0;
  return g0 * (2.0 * y - g0) * score;
}

MvpTrace mvp_baseline(const FiniteMdp& mdp, const RiskParams& params, const MvpSchedule& schedule) {
  params.validate();
  schedule.validate();
  require(params.lambda > 0.0, ErrorCode::InvalidArgument, "MVP needs lambda > 0");
  mdp.require_discounted("mvp_baseline");
  const std::size_t horizon =
      schedule.horizon == 0 ? truncation_horizon(mdp.discount()) : schedule.horizon;

  Rng rng(schedule.seed);
  SoftmaxPolicy theta = SoftmaxPolicy::uniform(mdp.n_states(), mdp.n_actions());
  MvpTrace trace{{}, theta};
  std::vector<EpisodicRollout> batch(static_cast<std::size_t>(schedule.rollouts_per_iteration));

  for (int it = 1; it <= schedule.iterations; ++it) {
    const TabularPolicy pi = theta.to_tabular();
    double mean = 0.0;
    for (auto& traj : batch) {
      traj = rollout(mdp, pi, rng, horizon);
      mean += traj.return_g0;
    }
    mean /= static_cast<double>(batch.size());

    // y block: exact maximizer for the current estimate of E[G0].
    const double y = mvp_y_update(mean, params.lambda);

    // theta block: one stochastic ascent step.
    Matrix direction = Matrix::Zero(theta.logits().rows(), theta.logits().cols());
    for (const auto& traj : batch) direction += mvp_direction(traj, theta, y);
    direction /= static_cast<double>(batch.size());
    theta.mutable_logits() += schedule.step_size * direction;
    if (!theta.logits().allFinite() || theta.logits().cwiseAbs().maxCoeff() > schedule.logit_bound) {
      fail(ErrorCode::Divergence, "MVP logits diverged");
    }

    const TabularPolicy updated = theta.to_tabular();
    MvpRecord rec;
    rec.iteration = it;
    rec.theta = theta.logits();
    rec.y = y;
    rec.mean_return_estimate = mean;
    rec.objective = risk_objective(mdp, updated, params);
    rec.return_variance = return_variance(mdp, updated);
    rec.pi_a0_s0 = updated(0, 0);
    trace.records.push_back(std::move(rec));
  }
  trace.final_policy = theta;
  return trace;
}

}  // namespace mvpi
