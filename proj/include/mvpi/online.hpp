#pragma once

#include "mvpi/mdp.hpp"
#include "mvpi/risk.hpp"

#include <cstdint>
#include <vector>

namespace mvpi {

/// The K most recent rewards with a running sum.
class RewardWindow {
 public:
  explicit RewardWindow(std::size_t capacity);

  void push(double reward);
  /// Mean of the current contents; 0 when empty.
  double average() const;
  std::size_t size() const noexcept { return size_; }
  std::size_t capacity() const noexcept { return buffer_.size(); }
  /// Contents, oldest first.
  std::vector<double> contents() const;

 private:
  std::vector<double> buffer_;
  std::size_t head_ = 0;  // next slot to overwrite
  std::size_t size_ = 0;
  std::size_t pushes_since_resum_ = 0;
  double sum_ = 0.0;
};

struct OnlineConfig {
  RiskParams params;
  std::size_t window = 1000;  ///< K
  double actor_step_size = 0.05;
  double critic_step_size = 0.1;
  long total_steps = 100'000;
  long log_every = 1000;
  /// Sample transitions from gamma p + (1 - gamma) mu0 so the window average
  /// estimates the discounted E[R] instead of the undiscounted average.
  bool discounted_weighting = false;
  std::uint64_t seed = 0;

  void validate() const;
};

struct OnlineRecord {
  long step = 0;
  double y = 0.0;
  double objective = 0.0;  ///< exact J_lambda of the current policy
  double pi_a0_s0 = 0.0;
};

struct OnlineTrace {
  std::vector<OnlineRecord> records;
  SoftmaxPolicy final_policy;
};

/// Tabular actor-critic on the per-sample augmented reward, with y the
/// average of the last K rewards.
OnlineTrace run_online_mvpi(const FiniteMdp& mdp, const OnlineConfig& config);

}  // namespace mvpi
