#include "mvpi/mdp.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>
#include <string>

namespace mvpi {

namespace {

bool is_probability(double x) { return std::isfinite(x) && x >= 0.0 && x <= 1.0; }

void check_distribution(std::span<const double> row, double tol, const std::string& what) {
  double total = 0.0;
  for (double x : row) {
    require(is_probability(x), ErrorCode::InvariantViolation,
            what + ": entry outside [0, 1]");
    total += x;
  }
  if (std::abs(total - 1.0) > tol) {
    std::ostringstream msg;
    msg.precision(17);
    msg << what << ": sums to " << total << ", expected 1";
    fail(ErrorCode::InvariantViolation, msg.str());
  }
}

std::string where(const char* prefix, std::size_t s) {
  return std::string(prefix) + " " + std::to_string(s);
}

std::string where(const char* prefix, std::size_t s, std::size_t a) {
  return std::string(prefix) + " (" + std::to_string(s) + ", " + std::to_string(a) + ")";
}

// Rounds to 12 significant digits for support grouping.
double support_key(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.11e", x);
  return std::strtod(buf, nullptr);
}

}  // namespace

FiniteMdp::FiniteMdp(std::size_t n_states, std::size_t n_actions, Matrix reward,
                     std::vector<double> kernel, Vector initial_dist, double discount)
    : n_states_(n_states),
      n_actions_(n_actions),
      reward_(std::move(reward)),
      kernel_(std::move(kernel)),
      initial_(std::move(initial_dist)),
      discount_(discount) {
  require(n_states_ >= 1 && n_actions_ >= 1, ErrorCode::InvalidArgument,
          "MDP needs at least one state and one action");
  require(static_cast<std::size_t>(reward_.rows()) == n_states_ &&
              static_cast<std::size_t>(reward_.cols()) == n_actions_,
          ErrorCode::InvalidArgument, "reward table shape does not match (states, actions)");
  require(kernel_.size() == n_states_ * n_actions_ * n_states_, ErrorCode::InvalidArgument,
          "kernel size does not match states * actions * states");
  require(static_cast<std::size_t>(initial_.size()) == n_states_, ErrorCode::InvalidArgument,
          "initial distribution length does not match states");
  require(std::isfinite(discount_) && discount_ >= 0.0 && discount_ <= 1.0,
          ErrorCode::InvariantViolation, "discount must lie in [0, 1]");
  require(reward_.allFinite(), ErrorCode::InvariantViolation, "rewards must be finite");
  for (std::size_t s = 0; s < n_states_; ++s) {
    for (std::size_t a = 0; a < n_actions_; ++a) {
      check_distribution(kernel_row(s, a), kProbabilityTolerance, where("kernel row", s, a));
    }
  }
  check_distribution({initial_.data(), n_states_}, kProbabilityTolerance,
                     "initial distribution");
}

FiniteMdp FiniteMdp::with_reward(Matrix reward) const {
  return FiniteMdp(n_states_, n_actions_, std::move(reward), kernel_, initial_, discount_);
}

void FiniteMdp::require_discounted(const char* operation) const {
  if (!(discount_ < 1.0)) {
    fail(ErrorCode::InvalidArgument,
         std::string(operation) + " requires discount < 1 (discounted mode)");
  }
}

TabularPolicy::TabularPolicy(Matrix probs) : probs_(std::move(probs)) {
  require(probs_.rows() >= 1 && probs_.cols() >= 1, ErrorCode::InvalidArgument,
          "policy table is empty");
  for (Eigen::Index s = 0; s < probs_.rows(); ++s) {
    std::vector<double> row(probs_.row(s).begin(), probs_.row(s).end());
    check_distribution(row, kProbabilityTolerance,
                       where("policy row", static_cast<std::size_t>(s)));
  }
}

TabularPolicy TabularPolicy::uniform(std::size_t n_states, std::size_t n_actions) {
  return TabularPolicy(Matrix::Constant(static_cast<Eigen::Index>(n_states),
                                        static_cast<Eigen::Index>(n_actions),
                                        1.0 / static_cast<double>(n_actions)));
}

TabularPolicy TabularPolicy::deterministic(std::span<const std::size_t> actions,
                                           std::size_t n_actions) {
  Matrix probs = Matrix::Zero(static_cast<Eigen::Index>(actions.size()),
                              static_cast<Eigen::Index>(n_actions));
  for (std::size_t s = 0; s < actions.size(); ++s) {
    require(actions[s] < n_actions, ErrorCode::InvalidArgument, "action index out of range");
    probs(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(actions[s])) = 1.0;
  }
  return TabularPolicy(std::move(probs));
}

bool TabularPolicy::is_deterministic() const {
  for (Eigen::Index s = 0; s < probs_.rows(); ++s) {
    if (probs_.row(s).maxCoeff() != 1.0) return false;
  }
  return true;
}

std::vector<std::size_t> TabularPolicy::greedy_actions() const {
  std::vector<std::size_t> out(n_states());
  for (Eigen::Index s = 0; s < probs_.rows(); ++s) {
    Eigen::Index best = 0;
    for (Eigen::Index a = 1; a < probs_.cols(); ++a) {
      if (probs_(s, a) > probs_(s, best)) best = a;
    }
    out[static_cast<std::size_t>(s)] = static_cast<std::size_t>(best);
  }
  return out;
}

SoftmaxPolicy::SoftmaxPolicy(Matrix logits) : logits_(std::move(logits)) {
  require(logits_.rows() >= 1 && logits_.cols() >= 1, ErrorCode::InvalidArgument,
          "logit table is empty");
  require(logits_.allFinite(), ErrorCode::InvariantViolation, "logits must be finite");
}

SoftmaxPolicy SoftmaxPolicy::uniform(std::size_t n_states, std::size_t n_actions) {
  return SoftmaxPolicy(
      Matrix::Zero(static_cast<Eigen::Index>(n_states), static_cast<Eigen::Index>(n_actions)));
}

SoftmaxPolicy SoftmaxPolicy::from_tabular(const TabularPolicy& policy) {
  require((policy.probs().array() > 0.0).all(), ErrorCode::InvalidArgument,
          "softmax parameterization needs strictly positive probabilities");
  return SoftmaxPolicy(policy.probs().array().log().matrix());
}

Vector SoftmaxPolicy::action_probs(std::size_t s) const {
  const auto row = logits_.row(static_cast<Eigen::Index>(s));
  const double top = row.maxCoeff();
  Vector p = (row.array() - top).exp().transpose();
  return p / p.sum();
}

TabularPolicy SoftmaxPolicy::to_tabular() const {
  Matrix probs(logits_.rows(), logits_.cols());
  for (Eigen::Index s = 0; s < logits_.rows(); ++s) {
    probs.row(s) = action_probs(static_cast<std::size_t>(s)).transpose();
  }
  return TabularPolicy(std::move(probs));
}

void check_policy_shape(const FiniteMdp& mdp, const TabularPolicy& policy) {
  require(policy.n_states() == mdp.n_states() && policy.n_actions() == mdp.n_actions(),
          ErrorCode::InvalidArgument, "policy shape does not match the MDP");
}

Matrix policy_transition(const FiniteMdp& mdp, const TabularPolicy& policy) {
  check_policy_shape(mdp, policy);
  const std::size_t n = mdp.n_states();
  Matrix out = Matrix::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (std::size_t s = 0; s < n; ++s) {
    for (std::size_t a = 0; a < mdp.n_actions(); ++a) {
      const double w = policy(s, a);
      if (w == 0.0) continue;
      const auto row = mdp.kernel_row(s, a);
      for (std::size_t t = 0; t < n; ++t) {
        out(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(t)) += w * row[t];
      }
    }
  }
  return out;
}

Vector policy_reward(const FiniteMdp& mdp, const TabularPolicy& policy) {
  check_policy_shape(mdp, policy);
  return mdp.reward().cwiseProduct(policy.probs()).rowwise().sum();
}

OccupancyMeasure occupancy_measure(const FiniteMdp& mdp, const TabularPolicy& policy) {
  mdp.require_discounted("occupancy_measure");
  const double gamma = mdp.discount();
  const Matrix p_pi = policy_transition(mdp, policy);
  const auto n = static_cast<Eigen::Index>(mdp.n_states());
  const Matrix system = Matrix::Identity(n, n) - gamma * p_pi.transpose();
  Vector marginal = solve_dense(system, (1.0 - gamma) * mdp.initial_dist(), "occupancy measure");
  for (Eigen::Index i = 0; i < n; ++i) marginal(i) = std::max(marginal(i), 0.0);
  Matrix d = policy.probs().array().colwise() * marginal.array();
  return {std::move(d), std::move(marginal)};
}

ValueFunctions value_functions(const FiniteMdp& mdp, const TabularPolicy& policy) {
  mdp.require_discounted("value_functions");
  const double gamma = mdp.discount();
  const auto n = static_cast<Eigen::Index>(mdp.n_states());
  const Matrix system = Matrix::Identity(n, n) - gamma * policy_transition(mdp, policy);
  Vector v = solve_dense(system, policy_reward(mdp, policy), "value functions");

  Matrix q = mdp.reward();
  for (std::size_t s = 0; s < mdp.n_states(); ++s) {
    for (std::size_t a = 0; a < mdp.n_actions(); ++a) {
      const auto row = mdp.kernel_row(s, a);
      double next = 0.0;
      for (std::size_t t = 0; t < mdp.n_states(); ++t) next += row[t] * v(static_cast<Eigen::Index>(t));
      q(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(a)) += gamma * next;
    }
  }
  return {std::move(v), std::move(q)};
}

double expected_return(const FiniteMdp& mdp, const TabularPolicy& policy) {
  return mdp.initial_dist().dot(value_functions(mdp, policy).v);
}

RewardDistribution reward_distribution(const FiniteMdp& mdp, const TabularPolicy& policy) {
  const OccupancyMeasure occ = occupancy_measure(mdp, policy);
  RewardDistribution out;
  std::map<double, double> grouped;
  for (std::size_t s = 0; s < mdp.n_states(); ++s) {
    for (std::size_t a = 0; a < mdp.n_actions(); ++a) {
      const double mass = occ.d(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(a));
      const double r = mdp.reward(s, a);
      out.mean += mass * r;
      out.second_moment += mass * r * r;
      if (mass > 0.0) grouped[support_key(r)] += mass;
    }
  }
  for (const auto& [value, mass] : grouped) {
    out.support.push_back(value);
    out.pmf.push_back(mass);
  }
  out.variance = out.second_moment - out.mean * out.mean;
  if (out.variance < 0.0 && out.variance > -1e-12) out.variance = 0.0;
  return out;
}

double return_variance(const FiniteMdp& mdp, const TabularPolicy& policy) {
  mdp.require_discounted("return_variance");
  const double gamma = mdp.discount();
  const ValueFunctions vf = value_functions(mdp, policy);
  const auto n = static_cast<Eigen::Index>(mdp.n_states());

  // M(s) = sum_a pi(a|s) [r^2 + 2 gamma r E v(s') + gamma^2 E M(s')]
  Vector rhs = Vector::Zero(n);
  for (std::size_t s = 0; s < mdp.n_states(); ++s) {
    for (std::size_t a = 0; a < mdp.n_actions(); ++a) {
      const double w = policy(s, a);
      if (w == 0.0) continue;
      const double r = mdp.reward(s, a);
      const auto row = mdp.kernel_row(s, a);
      double next_v = 0.0;
      for (std::size_t t = 0; t < mdp.n_states(); ++t) next_v += row[t] * vf.v(static_cast<Eigen::Index>(t));
      rhs(static_cast<Eigen::Index>(s)) += w * (r * r + 2.0 * gamma * r * next_v);
    }
  }
  const Matrix system =
      Matrix::Identity(n, n) - gamma * gamma * policy_transition(mdp, policy);
  const Vector second = solve_dense(system, rhs, "return second moment");
  const double mean = mdp.initial_dist().dot(vf.v);
  const double var = mdp.initial_dist().dot(second) - mean * mean;
  return var < 0.0 && var > -1e-10 ? 0.0 : var;
}

Vector stationary_distribution(const FiniteMdp& mdp, const TabularPolicy& policy) {
  return stationary_of(policy_transition(mdp, policy));
}

FiniteMdp reset_kernel_mdp(const FiniteMdp& mdp) {
  const double gamma = mdp.discount();
  std::vector<double> kernel(mdp.kernel().size());
  const std::size_t n = mdp.n_states();
  for (std::size_t s = 0; s < n; ++s) {
    for (std::size_t a = 0; a < mdp.n_actions(); ++a) {
      const auto row = mdp.kernel_row(s, a);
      double* out = kernel.data() + (s * mdp.n_actions() + a) * n;
      for (std::size_t t = 0; t < n; ++t) {
        out[t] = gamma * row[t] + (1.0 - gamma) * mdp.initial_dist()(static_cast<Eigen::Index>(t));
      }
    }
  }
  return FiniteMdp(n, mdp.n_actions(), mdp.reward(), std::move(kernel), mdp.initial_dist(), gamma);
}

}  // namespace mvpi
