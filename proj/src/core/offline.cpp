#include "mvpi/offline.hpp"

#include "mvpi/augmentation.hpp"
#include "mvpi/envs.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace mvpi {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kMassFloor = 1e-14;

std::string pair_name(std::size_t s, std::size_t a) {
  return "(" + std::to_string(s) + ", " + std::to_string(a) + ")";
}

}  // namespace

TransitionBatch::TransitionBatch(std::vector<Transition> records, std::optional<Matrix> assumed_d)
    : records_(std::move(records)), assumed_d_(std::move(assumed_d)) {
  require(!records_.empty(), ErrorCode::InvalidArgument, "transition batch is empty");
  for (const auto& t : records_) {
    require(std::isfinite(t.r), ErrorCode::InvalidArgument, "batch reward is not finite");
  }
}

std::pair<std::size_t, std::size_t> TransitionBatch::inferred_shape() const {
  std::size_t ns = 0, na = 0;
  for (const auto& t : records_) {
    ns = std::max({ns, t.s + 1, t.s_next + 1});
    na = std::max(na, t.a + 1);
  }
  if (assumed_d_) {
    ns = std::max(ns, static_cast<std::size_t>(assumed_d_->rows()));
    na = std::max(na, static_cast<std::size_t>(assumed_d_->cols()));
  }
  return {ns, na};
}

void TransitionBatch::validate(std::size_t n_states, std::size_t n_actions) const {
  for (const auto& t : records_) {
    require(t.s < n_states && t.s_next < n_states && t.a < n_actions, ErrorCode::InvalidArgument,
            "batch record " + pair_name(t.s, t.a) + " -> " + std::to_string(t.s_next) +
                " is outside the MDP's index ranges");
  }
  if (!assumed_d_) return;
  const Matrix& d = *assumed_d_;
  require(static_cast<std::size_t>(d.rows()) == n_states &&
              static_cast<std::size_t>(d.cols()) == n_actions,
          ErrorCode::InvalidArgument, "sampling distribution shape does not match (states, actions)");
  require(d.allFinite() && (d.array() >= 0.0).all(), ErrorCode::InvariantViolation,
          "sampling distribution has negative or non-finite entries");
  require(std::abs(d.sum() - 1.0) <= 1e-10, ErrorCode::InvariantViolation,
          "sampling distribution does not sum to 1");
  for (const auto& t : records_) {
    require(d(static_cast<Eigen::Index>(t.s), static_cast<Eigen::Index>(t.a)) > 0.0,
            ErrorCode::InvariantViolation,
            "sampling distribution assigns zero mass to batch pair " + pair_name(t.s, t.a));
  }
}

Matrix TransitionBatch::sampling_distribution(std::size_t n_states, std::size_t n_actions) const {
  if (assumed_d_) return *assumed_d_;
  Matrix counts = Matrix::Zero(static_cast<Eigen::Index>(n_states),
                               static_cast<Eigen::Index>(n_actions));
  for (const auto& t : records_) {
    counts(static_cast<Eigen::Index>(t.s), static_cast<Eigen::Index>(t.a)) += 1.0;
  }
  return counts / static_cast<double>(records_.size());
}

TransitionBatch sample_batch(const FiniteMdp& mdp, const Matrix& d, std::size_t size, Rng& rng) {
  require(size >= 1, ErrorCode::InvalidArgument, "batch size must be at least 1");
  require(static_cast<std::size_t>(d.rows()) == mdp.n_states() &&
              static_cast<std::size_t>(d.cols()) == mdp.n_actions(),
          ErrorCode::InvalidArgument, "sampling distribution shape does not match the MDP");
  // Row-major flattening so index = s * n_actions + a.
  std::vector<double> flat(mdp.n_states() * mdp.n_actions());
  for (std::size_t s = 0; s < mdp.n_states(); ++s) {
    for (std::size_t a = 0; a < mdp.n_actions(); ++a) {
      flat[s * mdp.n_actions() + a] = d(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(a));
    }
  }
  std::vector<Transition> records;
  records.reserve(size);
  for (std::size_t i = 0; i < size; ++i) {
    const std::size_t idx = rng.categorical(flat);
    const std::size_t s = idx / mdp.n_actions();
    const std::size_t a = idx % mdp.n_actions();
    records.push_back({s, a, mdp.reward(s, a), sample_next_state(mdp, s, a, rng)});
  }
  TransitionBatch batch(std::move(records), d);
  batch.validate(mdp.n_states(), mdp.n_actions());
  return batch;
}

EstimatedModel estimate_model(const TransitionBatch& batch, std::size_t n_states,
                              std::size_t n_actions, double gamma, const Vector& initial_dist) {
  batch.validate(n_states, n_actions);
  const std::size_t pairs = n_states * n_actions;
  std::vector<double> counts(pairs * n_states, 0.0);
  std::vector<double> visits(pairs, 0.0);
  std::vector<double> reward_sum(pairs, 0.0);
  std::vector<double> first_reward(pairs, 0.0);
  std::vector<bool> constant_reward(pairs, true);
  for (const auto& t : batch.records()) {
    const std::size_t idx = t.s * n_actions + t.a;
    counts[idx * n_states + t.s_next] += 1.0;
    if (visits[idx] == 0.0) first_reward[idx] = t.r;
    constant_reward[idx] = constant_reward[idx] && t.r == first_reward[idx];
    visits[idx] += 1.0;
    reward_sum[idx] += t.r;
  }

  std::vector<bool> covered(pairs, false);
  std::vector<double> kernel(pairs * n_states, 0.0);
  Matrix reward = Matrix::Zero(static_cast<Eigen::Index>(n_states),
                               static_cast<Eigen::Index>(n_actions));
  for (std::size_t s = 0; s < n_states; ++s) {
    for (std::size_t a = 0; a < n_actions; ++a) {
      const std::size_t idx = s * n_actions + a;
      if (visits[idx] == 0.0) {
        if (batch.assumed_d() &&
            (*batch.assumed_d())(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(a)) > 0.0) {
          fail(ErrorCode::UncoveredStateAction,
               "pair " + pair_name(s, a) + " has assumed mass but never appears in the batch");
        }
        kernel[idx * n_states + s] = 1.0;
        continue;
      }
      covered[idx] = true;
      for (std::size_t t = 0; t < n_states; ++t) {
        kernel[idx * n_states + t] = counts[idx * n_states + t] / visits[idx];
      }
      reward(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(a)) =
          constant_reward[idx] ? first_reward[idx] : reward_sum[idx] / visits[idx];
    }
  }
  Vector mu0 = initial_dist.size() == 0
                   ? Vector::Constant(static_cast<Eigen::Index>(n_states), 1.0 / static_cast<double>(n_states))
                   : initial_dist;
  return {FiniteMdp(n_states, n_actions, std::move(reward), std::move(kernel), std::move(mu0), gamma),
          std::move(covered)};
}

EstimatedModel exact_model(const FiniteMdp& mdp) {
  return {mdp, std::vector<bool>(mdp.n_states() * mdp.n_actions(), true)};
}

DensityRatio density_ratio(const EstimatedModel& model, const TabularPolicy& policy,
                           const TransitionBatch& batch) {
  const std::size_t ns = model.mdp.n_states();
  const std::size_t na = model.mdp.n_actions();
  const Matrix d = batch.sampling_distribution(ns, na);
  const Matrix d_pi = occupancy_measure(model.mdp, policy).d;

  Matrix rho = Matrix::Zero(d.rows(), d.cols());
  for (std::size_t s = 0; s < ns; ++s) {
    for (std::size_t a = 0; a < na; ++a) {
      const auto i = static_cast<Eigen::Index>(s);
      const auto j = static_cast<Eigen::Index>(a);
      if (d_pi(i, j) <= kMassFloor) continue;
      if (!model.is_covered(s, a)) {
        fail(ErrorCode::UncoveredStateAction,
             "target policy reaches pair " + pair_name(s, a) + " which the batch never covers");
      }
      if (d(i, j) <= 0.0) {
        fail(ErrorCode::ZeroDenominator,
             "sampling distribution is zero at " + pair_name(s, a) + " where d_pi is positive");
      }
      rho(i, j) = d_pi(i, j) / d(i, j);
    }
  }
  const double total = d.cwiseProduct(rho).sum();
  require(total > 0.0 && std::abs(total - 1.0) <= 1e-8, ErrorCode::InvariantViolation,
          "density ratio normalization sum d rho = " + std::to_string(total));
  rho /= total;
  return {std::move(rho)};
}

OffPolicyEstimate offline_evaluate_y(const TransitionBatch& batch, const DensityRatio& rho) {
  double total = 0.0;
  bool any_weight = false;
  for (const auto& t : batch.records()) {
    const double w = rho.rho(static_cast<Eigen::Index>(t.s), static_cast<Eigen::Index>(t.a));
    if (w != 0.0) any_weight = true;
    total += w * t.r;
  }
  if (!any_weight) return {0.0, true};
  return {total / static_cast<double>(batch.size()), false};
}

Matrix td0_fit_q(std::span<const AugmentedTransition> batch, double gamma, Matrix q,
                 double step_size, int epochs, Rng* shuffle) {
  require(gamma >= 0.0 && gamma < 1.0, ErrorCode::InvalidArgument, "TD(0) needs 0 <= gamma < 1");
  require(step_size > 0.0, ErrorCode::InvalidArgument, "TD(0) step size must be positive");
  double max_reward = 0.0;
  for (const auto& t : batch) max_reward = std::max(max_reward, std::abs(t.r_hat));
  const double bound = 10.0 * max_reward / (1.0 - gamma);

  std::vector<std::size_t> order(batch.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (int epoch = 0; epoch < epochs; ++epoch) {
    if (shuffle) {
      // Fisher-Yates with the portable generator.
      for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[shuffle->below(i)]);
    }
    for (std::size_t idx : order) {
      const auto& t = batch[idx];
      double& cell = q(static_cast<Eigen::Index>(t.s), static_cast<Eigen::Index>(t.a));
      const double target =
          t.r_hat + gamma * q(static_cast<Eigen::Index>(t.s_next), static_cast<Eigen::Index>(t.a_next));
      cell += step_size * (target - cell);
    }
    const double largest = q.cwiseAbs().maxCoeff();
    if (!std::isfinite(largest) || largest > bound) {
      fail(ErrorCode::Divergence, "TD(0) critic diverged: max|q| = " + std::to_string(largest) +
                                      " exceeds bound " + std::to_string(bound));
    }
  }
  return q;
}

SoftmaxPolicy offline_actor_step(const SoftmaxPolicy& policy, const DensityRatio& rho,
                                 const Matrix& q, const Transition& record, double step_size) {
  const auto s = static_cast<Eigen::Index>(record.s);
  const auto a = static_cast<Eigen::Index>(record.a);
  const double scale = step_size * rho.rho(s, a) * q(s, a);
  if (scale == 0.0) return policy;
  SoftmaxPolicy next = policy;
  const Vector probs = policy.action_probs(record.s);
  for (Eigen::Index b = 0; b < probs.size(); ++b) {
    next.mutable_logits()(s, b) += scale * ((b == a ? 1.0 : 0.0) - probs(b));
  }
  require(next.logits().allFinite(), ErrorCode::Divergence, "actor logits became non-finite");
  return next;
}

void OfflineSchedule::validate() const {
  require(outer_iterations >= 1 && actor_steps >= 1 && critic_epochs >= 1,
          ErrorCode::InvalidArgument, "offline schedule counts must be at least 1");
  require(actor_step_size > 0.0 && critic_step_size > 0.0, ErrorCode::InvalidArgument,
          "offline step sizes must be positive");
}

OfflineTrace run_offline_mvpi(const TransitionBatch& batch, std::size_t n_states,
                              std::size_t n_actions, const OfflineConfig& config,
                              const FiniteMdp* eval_mdp, const FiniteMdp* model) {
  config.params.validate();
  config.schedule.validate();
  batch.validate(n_states, n_actions);
  const double lambda = config.params.lambda;
  const OfflineSchedule& sched = config.schedule;

  const EstimatedModel estimate =
      model ? exact_model(*model)
            : estimate_model(batch, n_states, n_actions, config.gamma, config.initial_dist);
  require(estimate.mdp.n_states() == n_states && estimate.mdp.n_actions() == n_actions,
          ErrorCode::InvalidArgument, "model shape does not match the batch shape");
  const double gamma = estimate.mdp.discount();
  estimate.mdp.require_discounted("run_offline_mvpi");

  const TransitionBatch ratio_batch =
      sched.empirical_ratio_denominator ? TransitionBatch(batch.records()) : batch;

  Rng rng(sched.seed);
  SoftmaxPolicy theta = SoftmaxPolicy::uniform(n_states, n_actions);
  Matrix q = Matrix::Zero(static_cast<Eigen::Index>(n_states), static_cast<Eigen::Index>(n_actions));
  const auto& records = batch.records();
  std::vector<AugmentedTransition> augmented(records.size());

  auto log_row = [&](int iteration, double y) {
    const TabularPolicy pi = theta.to_tabular();
    OfflineRecord rec;
    rec.iteration = iteration;
    rec.y = y;
    rec.pi_a0_s0 = pi(0, 0);
    rec.objective = eval_mdp ? risk_objective(*eval_mdp, pi, config.params) : kNaN;
    return rec;
  };
  auto resample_next_actions = [&](const TabularPolicy& pi) {
    for (auto& t : augmented) t.a_next = sample_action(pi, t.s_next, rng);
  };

  OfflineTrace trace{{}, theta, false};
  trace.records.push_back(log_row(0, kNaN));

  for (int outer = 1; outer <= sched.outer_iterations; ++outer) {
    TabularPolicy pi = theta.to_tabular();
    DensityRatio rho = density_ratio(estimate, pi, ratio_batch);
    const OffPolicyEstimate est = offline_evaluate_y(ratio_batch, rho);
    trace.coverage_warning = trace.coverage_warning || est.coverage_warning;
    const double y = est.y;

    for (std::size_t i = 0; i < records.size(); ++i) {
      const auto& t = records[i];
      augmented[i] = {t.s, t.a, augmented_reward(t.r, y, lambda), t.s_next, 0};
    }
    resample_next_actions(pi);

    for (int j = 0; j < sched.actor_steps; ++j) {
      for (int e = 0; e < sched.critic_epochs; ++e) {
        if (sched.resample_next_actions_each_epoch && (j > 0 || e > 0)) {
          resample_next_actions(theta.to_tabular());
        }
        q = td0_fit_q(augmented, gamma, std::move(q), sched.critic_step_size, 1,
                      sched.shuffle_critic_sweeps ? &rng : nullptr);
      }
      if (j > 0) rho = density_ratio(estimate, theta.to_tabular(), ratio_batch);
      const Transition& record = records[rng.below(records.size())];
      theta = offline_actor_step(theta, rho, q, record, sched.actor_step_size);
    }
    trace.records.push_back(log_row(outer, y));
  }
  trace.final_policy = theta;
  return trace;
}

}  // namespace mvpi
