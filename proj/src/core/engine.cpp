#include "mvpi/engine.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace mvpi {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

// Lowest index among actions within a relative 1e-12 of the row maximum.
std::vector<std::size_t> greedy_lowest_index(const Matrix& q) {
  std::vector<std::size_t> out(static_cast<std::size_t>(q.rows()));
  for (Eigen::Index s = 0; s < q.rows(); ++s) {
    const double best = q.row(s).maxCoeff();
    const double slack = 1e-12 * std::max(1.0, std::abs(best));
    for (Eigen::Index a = 0; a < q.cols(); ++a) {
      if (q(s, a) >= best - slack) {
        out[static_cast<std::size_t>(s)] = static_cast<std::size_t>(a);
        break;
      }
    }
  }
  return out;
}

Matrix stationary_state_action(const FiniteMdp& mdp, const TabularPolicy& policy) {
  const Vector stationary = stationary_distribution(mdp, policy);
  return policy.probs().array().colwise() * stationary.array();
}

// d(s) pi(b|s) (Q(s,b) - sum_a pi(a|s) Q(s,a)), the softmax chain rule.
Matrix softmax_gradient_from(const Vector& state_weight, const TabularPolicy& pi, const Matrix& q) {
  Matrix grad(q.rows(), q.cols());
  for (Eigen::Index s = 0; s < q.rows(); ++s) {
    const double baseline = pi.probs().row(s).dot(q.row(s));
    for (Eigen::Index b = 0; b < q.cols(); ++b) {
      grad(s, b) = state_weight(s) * pi.probs()(s, b) * (q(s, b) - baseline);
    }
  }
  return grad;
}

SoftmaxPolicy softmax_gradient_ascent(const FiniteMdp& mdp, double y, const RiskParams& params,
                                      Setting setting, const SoftmaxGradient& opts,
                                      const SoftmaxPolicy& warm_start) {
  auto objective = [&](const SoftmaxPolicy& p) {
    return step2_objective(mdp, p.to_tabular(), y, params, setting);
  };
  auto gradient = [&](const SoftmaxPolicy& p) {
    return setting == Setting::Discounted ? exact_policy_gradient(mdp, p, y, params)
                                          : exact_policy_gradient_average(mdp, p, y, params);
  };

  const double start_value = objective(warm_start);
  SoftmaxPolicy theta = warm_start;
  double value = start_value;
  double eta = opts.step_size;
  const double min_eta = opts.step_size * 1e-12;

  for (int it = 0; it < opts.inner_iterations; ++it) {
    const Matrix g = gradient(theta);
    if (g.norm() < opts.gradient_tolerance) break;
    bool accepted = false;
    while (eta >= min_eta) {
      SoftmaxPolicy candidate(theta.logits() + eta * g);
      const double candidate_value = objective(candidate);
      if (candidate_value >= value) {
        theta = std::move(candidate);
        value = candidate_value;
        accepted = true;
        eta = std::min(2.0 * eta, opts.step_size);
        break;
      }
      eta *= 0.5;
    }
    if (!accepted) break;
  }
  // Monotone safeguard.
  if (value < start_value) return warm_start;
  return theta;
}

}  // namespace

void MvpiConfig::validate() const {
  params.validate();
  require(max_outer_iterations >= 1, ErrorCode::InvalidArgument,
          "max_outer_iterations must be at least 1");
  require(objective_tolerance > 0.0, ErrorCode::InvalidArgument,
          "objective_tolerance must be positive");
  if (const auto* g = std::get_if<SoftmaxGradient>(&improver)) {
    require(g->step_size > 0.0 && std::isfinite(g->step_size), ErrorCode::InvalidArgument,
            "step_size must be positive");
    require(g->inner_iterations >= 1, ErrorCode::InvalidArgument,
            "inner_iterations must be at least 1");
    require(g->gradient_tolerance > 0.0, ErrorCode::InvalidArgument,
            "gradient_tolerance must be positive");
  }
}

const char* to_string(StopReason reason) noexcept {
  switch (reason) {
    case StopReason::PolicyStable: return "policy-stable";
    case StopReason::ObjectiveConverged: return "objective-converged";
    case StopReason::IterationCap: return "iteration-cap";
  }
  return "unknown";
}

TabularPolicy as_tabular(const PolicyParameters& policy) {
  return std::visit(overloaded{[](const TabularPolicy& p) { return p; },
                               [](const SoftmaxPolicy& p) { return p.to_tabular(); }},
                    policy);
}

double policy_evaluation_step(const FiniteMdp& mdp, const TabularPolicy& policy, Setting setting) {
  if (setting == Setting::Discounted) {
    return occupancy_measure(mdp, policy).d.cwiseProduct(mdp.reward()).sum();
  }
  return stationary_state_action(mdp, policy).cwiseProduct(mdp.reward()).sum();
}

double risk_value(const FiniteMdp& mdp, const TabularPolicy& policy, const RiskParams& params,
                  Setting setting) {
  if (setting == Setting::Discounted) return risk_objective(mdp, policy, params);
  return average_risk_objective(mdp, policy, params).objective;
}

double step2_objective(const FiniteMdp& mdp, const TabularPolicy& policy, double y,
                       const RiskParams& params, Setting setting) {
  if (setting == Setting::Discounted) return dual_objective(mdp, policy, y, params);
  const AugmentedMdp aug = build_augmented_mdp(mdp, y, params);
  return stationary_state_action(mdp, policy).cwiseProduct(aug.mdp.reward()).sum() -
         params.lambda * y * y;
}

Matrix exact_policy_gradient(const FiniteMdp& mdp, const SoftmaxPolicy& policy, double y,
                             const RiskParams& params) {
  mdp.require_discounted("exact_policy_gradient");
  const TabularPolicy pi = policy.to_tabular();
  const AugmentedMdp aug = build_augmented_mdp(mdp, y, params);
  const OccupancyMeasure occ = occupancy_measure(mdp, pi);
  const ValueFunctions vf = value_functions(aug.mdp, pi);
  return softmax_gradient_from(occ.state_marginal, pi, vf.q);
}

Matrix exact_policy_gradient_average(const FiniteMdp& mdp, const SoftmaxPolicy& policy, double y,
                                     const RiskParams& params) {
  const TabularPolicy pi = policy.to_tabular();
  const AugmentedMdp aug = build_augmented_mdp(mdp, y, params);
  const Vector stationary = stationary_distribution(mdp, pi);
  const Vector r_pi = policy_reward(aug.mdp, pi);
  const double gain = stationary.dot(r_pi);
  const auto n = static_cast<Eigen::Index>(mdp.n_states());

  // Differential values: (I - P + 1 d^T) h = r_pi - gain, with d^T h = 0.
  const Matrix system = Matrix::Identity(n, n) - policy_transition(mdp, pi) +
                        Vector::Ones(n) * stationary.transpose();
  const Vector h = solve_dense(system, r_pi - Vector::Constant(n, gain), "differential values");

  Matrix q = aug.mdp.reward().array() - gain;
  for (std::size_t s = 0; s < mdp.n_states(); ++s) {
    for (std::size_t a = 0; a < mdp.n_actions(); ++a) {
      const auto row = mdp.kernel_row(s, a);
      double next = 0.0;
      for (std::size_t t = 0; t < mdp.n_states(); ++t) next += row[t] * h(static_cast<Eigen::Index>(t));
      q(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(a)) += next;
    }
  }
  return softmax_gradient_from(stationary, pi, q);
}

TabularPolicy policy_iteration(const FiniteMdp& mdp, const TabularPolicy& warm_start) {
  mdp.require_discounted("policy_iteration");
  check_policy_shape(mdp, warm_start);
  TabularPolicy current = warm_start;
  const long cap = 10'000 + 10L * static_cast<long>(mdp.n_states() * mdp.n_actions());
  for (long it = 0; it < cap; ++it) {
    const ValueFunctions vf = value_functions(mdp, current);
    TabularPolicy next = TabularPolicy::deterministic(greedy_lowest_index(vf.q), mdp.n_actions());
    if (next.probs() == current.probs()) return next;
    current = std::move(next);
  }
  fail(ErrorCode::ConvergenceFailure, "policy iteration did not stabilize");
}

TabularPolicy relative_value_iteration(const FiniteMdp& mdp, double span_tolerance,
                                       long max_iterations) {
  const std::size_t ns = mdp.n_states();
  const std::size_t na = mdp.n_actions();
  const auto n = static_cast<Eigen::Index>(ns);
  constexpr double kStay = 0.5;

  auto backup = [&](const Vector& h) {
    Matrix q(n, static_cast<Eigen::Index>(na));
    for (std::size_t s = 0; s < ns; ++s) {
      for (std::size_t a = 0; a < na; ++a) {
        const auto row = mdp.kernel_row(s, a);
        double next = 0.0;
        for (std::size_t t = 0; t < ns; ++t) next += row[t] * h(static_cast<Eigen::Index>(t));
        q(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(a)) =
            mdp.reward(s, a) + kStay * h(static_cast<Eigen::Index>(s)) + (1.0 - kStay) * next;
      }
    }
    return q;
  };

  Vector h = Vector::Zero(n);
  for (long it = 0; it < max_iterations; ++it) {
    const Matrix q = backup(h);
    Vector next = q.rowwise().maxCoeff();
    next.array() -= next(0);
    const Vector diff = next - h;
    h = std::move(next);
    if (diff.maxCoeff() - diff.minCoeff() < span_tolerance) {
      const TabularPolicy policy =
          TabularPolicy::deterministic(greedy_lowest_index(backup(h)), na);
      // Surface non-unichain optima instead of returning an ill-defined gain.
      (void)stationary_distribution(mdp, policy);
      return policy;
    }
  }
  fail(ErrorCode::ConvergenceFailure,
       "relative value iteration did not reach span tolerance within " +
           std::to_string(max_iterations) + " iterations");
}

PolicyParameters policy_improvement_step(const FiniteMdp& mdp, double y, const MvpiConfig& config,
                                         const PolicyParameters& warm_start) {
  const AugmentedMdp aug = build_augmented_mdp(mdp, y, config.params);
  return std::visit(
      overloaded{
          [&](const ExactPolicyIteration&) -> PolicyParameters {
            if (config.setting == Setting::Discounted) {
              return policy_iteration(aug.mdp, as_tabular(warm_start));
            }
            return relative_value_iteration(aug.mdp);
          },
          [&](const SoftmaxGradient& opts) -> PolicyParameters {
            const SoftmaxPolicy start =
                std::holds_alternative<SoftmaxPolicy>(warm_start)
                    ? std::get<SoftmaxPolicy>(warm_start)
                    : SoftmaxPolicy::from_tabular(std::get<TabularPolicy>(warm_start));
            return softmax_gradient_ascent(mdp, y, config.params, config.setting, opts, start);
          }},
      config.improver);
}

MvpiTrace run_mvpi(const FiniteMdp& mdp, const MvpiConfig& config,
                   const PolicyParameters& initial_policy) {
  config.validate();
  const bool exact = std::holds_alternative<ExactPolicyIteration>(config.improver);
  const bool discounted = config.setting == Setting::Discounted;
  if (discounted) mdp.require_discounted("run_mvpi");

  PolicyParameters current = initial_policy;
  if (!exact && std::holds_alternative<TabularPolicy>(current)) {
    current = SoftmaxPolicy::from_tabular(std::get<TabularPolicy>(current));
  }
  check_policy_shape(mdp, as_tabular(current));

  auto record_for = [&](int k, double y, const PolicyParameters& params) {
    const TabularPolicy pi = as_tabular(params);
    MvpiRecord rec;
    rec.k = k;
    rec.y = y;
    if (discounted) {
      const RewardDistribution dist = reward_distribution(mdp, pi);
      rec.J = expected_return(mdp, pi);
      rec.expected_reward = dist.mean;
      rec.reward_variance = dist.variance;
      rec.return_variance = return_variance(mdp, pi);
      rec.objective = dist.mean - config.params.lambda * dist.variance;
    } else {
      const AverageRiskObjective avg = average_risk_objective(mdp, pi, config.params);
      rec.J = avg.j_bar;
      rec.expected_reward = avg.j_bar;
      rec.reward_variance = avg.lambda_risk;
      rec.return_variance = kNaN;
      rec.objective = avg.objective;
    }
    rec.gradient_norm = kNaN;
    if (const auto* theta = std::get_if<SoftmaxPolicy>(&params)) {
      // Envelope: grad J_lambda(theta) = grad_theta J_lambda(theta, y*(theta)).
      const double y_star = rec.expected_reward;
      rec.gradient_norm =
          (discounted ? exact_policy_gradient(mdp, *theta, y_star, config.params)
                      : exact_policy_gradient_average(mdp, *theta, y_star, config.params))
              .norm();
    }
    return rec;
  };

  MvpiTrace trace{{}, current, false, StopReason::IterationCap};
  trace.records.push_back(record_for(0, kNaN, current));

  for (int k = 1; k <= config.max_outer_iterations; ++k) {
    const TabularPolicy pi = as_tabular(current);
    const double y = policy_evaluation_step(mdp, pi, config.setting);
    PolicyParameters next = policy_improvement_step(mdp, y, config, current);
    trace.records.push_back(record_for(k, y, next));

    if (exact) {
      if (as_tabular(next).probs() == pi.probs()) {
        trace.converged = true;
        trace.reason = StopReason::PolicyStable;
        current = std::move(next);
        break;
      }
    } else {
      const double delta = trace.records[trace.records.size() - 1].objective -
                           trace.records[trace.records.size() - 2].objective;
      if (std::abs(delta) < config.objective_tolerance) {
        trace.converged = true;
        trace.reason = StopReason::ObjectiveConverged;
        current = std::move(next);
        break;
      }
    }
    current = std::move(next);
  }
  trace.final_policy = std::move(current);
  return trace;
}

}  // namespace mvpi
