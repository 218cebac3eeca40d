#include "mvpi/online.hpp"

#include "mvpi/augmentation.hpp"
#include "mvpi/envs.hpp"
#include "mvpi/rng.hpp"

#include <algorithm>
#include <cmath>

namespace mvpi {

RewardWindow::RewardWindow(std::size_t capacity) : buffer_(capacity, 0.0) {
  require(capacity >= 1, ErrorCode::InvalidArgument, "reward window needs K >= 1");
}

void RewardWindow::push(double reward) {
  if (size_ == buffer_.size()) {
    sum_ -= buffer_[head_];
  } else {
    ++size_;
  }
  buffer_[head_] = reward;
  sum_ += reward;
  head_ = (head_ + 1) % buffer_.size();
  // Re-sum periodically so cancellation error cannot accumulate.
  if (++pushes_since_resum_ >= buffer_.size()) {
    sum_ = 0.0;
    for (double r : contents()) sum_ += r;
    pushes_since_resum_ = 0;
  }
}

double RewardWindow::average() const {
  return size_ == 0 ? 0.0 : sum_ / static_cast<double>(size_);
}

std::vector<double> RewardWindow::contents() const {
  std::vector<double> out;
  out.reserve(size_);
  const std::size_t start = (head_ + buffer_.size() - size_) % buffer_.size();
  for (std::size_t i = 0; i < size_; ++i) out.push_back(buffer_[(start + i) % buffer_.size()]);
  return out;
}

void OnlineConfig::validate() const {
  params.validate();
  require(window >= 1, ErrorCode::InvalidArgument, "window K must be at least 1");
  require(actor_step_size > 0.0 && critic_step_size > 0.0, ErrorCode::InvalidArgument,
          "online step sizes must be positive");
  require(total_steps >= 1 && log_every >= 1, ErrorCode::InvalidArgument,
          "total_steps and log_every must be at least 1");
}

OnlineTrace run_online_mvpi(const FiniteMdp& mdp, const OnlineConfig& config) {
  config.validate();
  mdp.require_discounted("run_online_mvpi");
  const double gamma = mdp.discount();
  const double lambda = config.params.lambda;
  const std::size_t ns = mdp.n_states();
  const std::size_t na = mdp.n_actions();

  Rng rng(config.seed);
  RewardWindow window(config.window);
  SoftmaxPolicy theta = SoftmaxPolicy::uniform(ns, na);
  Matrix q = Matrix::Zero(static_cast<Eigen::Index>(ns), static_cast<Eigen::Index>(na));
  double max_abs_r_hat = 0.0;

  auto policy_at = [&](std::size_t s) { return theta.action_probs(s); };
  auto draw = [&](const Vector& probs) {
    return rng.categorical({probs.data(), static_cast<std::size_t>(probs.size())});
  };
  auto step_env = [&](std::size_t s, std::size_t a) {
    if (config.discounted_weighting && rng.uniform() >= gamma) {
      return sample_initial_state(mdp, rng);
    }
    return sample_next_state(mdp, s, a, rng);
  };

  OnlineTrace trace{{}, theta};
  std::size_t s = sample_initial_state(mdp, rng);
  std::size_t a = draw(policy_at(s));
  double y = 0.0;

  for (long step = 1; step <= config.total_steps; ++step) {
    const double r = mdp.reward(s, a);
    window.push(r);
    y = window.average();
    const double r_hat = augmented_reward(r, y, lambda);
    max_abs_r_hat = std::max(max_abs_r_hat, std::abs(r_hat));

    const std::size_t s_next = step_env(s, a);
    const Vector next_probs = policy_at(s_next);
    const std::size_t a_next = draw(next_probs);

    const auto si = static_cast<Eigen::Index>(s);
    const auto ai = static_cast<Eigen::Index>(a);
    q(si, ai) += config.critic_step_size *
                 (r_hat + gamma * q(static_cast<Eigen::Index>(s_next), static_cast<Eigen::Index>(a_next)) -
                  q(si, ai));
    if (!std::isfinite(q(si, ai)) ||
        std::abs(q(si, ai)) > 10.0 * max_abs_r_hat / (1.0 - gamma) + 1e-12) {
      fail(ErrorCode::Divergence, "online critic diverged");
    }

    // Actor: grad log pi(a|s) scaled by the critic's q(s, a), no baseline.
    const Vector probs = policy_at(s);
    const double scale = config.actor_step_size * q(si, ai);
    for (Eigen::Index b = 0; b < probs.size(); ++b) {
      theta.mutable_logits()(si, b) += scale * ((b == ai ? 1.0 : 0.0) - probs(b));
    }

    if (step % config.log_every == 0 || step == config.total_steps) {
      const TabularPolicy pi = theta.to_tabular();
      trace.records.push_back({step, y, risk_objective(mdp, pi, config.params), pi(0, 0)});
    }
    s = s_next;
    a = a_next;
  }
  trace.final_policy = theta;
  return trace;
}

}  // namespace mvpi
