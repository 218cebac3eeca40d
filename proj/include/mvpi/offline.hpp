#pragma once

#include "mvpi/mdp.hpp"
#include "mvpi/risk.hpp"
#include "mvpi/rng.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace mvpi {

struct Transition {
  std::size_t s = 0;
  std::size_t a = 0;
  double r = 0.0;
  std::size_t s_next = 0;
};

/// Fixed batch of transitions with an optional assumed sampling distribution
/// d(s, a). Without one, d is the empirical (s, a) frequency.
class TransitionBatch {
 public:
  explicit TransitionBatch(std::vector<Transition> records,
                           std::optional<Matrix> assumed_d = std::nullopt);

  const std::vector<Transition>& records() const noexcept { return records_; }
  std::size_t size() const noexcept { return records_.size(); }
  const std::optional<Matrix>& assumed_d() const noexcept { return assumed_d_; }

  /// Throws InvalidArgument on out-of-range indices or a mis-shaped d, and
  /// InvariantViolation when d is not a distribution or misses a batch pair.
  void validate(std::size_t n_states, std::size_t n_actions) const;

  /// The assumed d, or empirical counts / K.
  Matrix sampling_distribution(std::size_t n_states, std::size_t n_actions) const;

  /// Largest state and action index + 1.
  std::pair<std::size_t, std::size_t> inferred_shape() const;

 private:
  std::vector<Transition> records_;
  std::optional<Matrix> assumed_d_;
};

/// Draws K i.i.d. transitions with (s, a) ~ d, s' ~ p(.|s, a). The returned
/// batch carries d as its assumed sampling distribution.
TransitionBatch sample_batch(const FiniteMdp& mdp, const Matrix& d, std::size_t size, Rng& rng);

/// Tabular model fitted from a batch: empirical next-state frequencies and
/// observed rewards (their mean when a pair's rewards differ). Pairs absent
/// from the batch get a self-loop with zero reward and are flagged uncovered.
struct EstimatedModel {
  FiniteMdp mdp;
  std::vector<bool> covered;  ///< indexed s * n_actions + a

  bool is_covered(std::size_t s, std::size_t a) const {
    return covered[s * mdp.n_actions() + a];
  }
};

/// gamma and mu0 are not observable from transitions and must be supplied.
EstimatedModel estimate_model(const TransitionBatch& batch, std::size_t n_states,
                              std::size_t n_actions, double gamma, const Vector& initial_dist);

/// Wraps a known model as a fully covered estimate.
EstimatedModel exact_model(const FiniteMdp& mdp);

struct DensityRatio {
  Matrix rho;  ///< d_pi(s, a) / d(s, a), zero where d_pi vanishes
};

/// rho = d_pi^model / d with sum d rho = 1 enforced.
DensityRatio density_ratio(const EstimatedModel& model, const TabularPolicy& policy,
                           const TransitionBatch& batch);

struct OffPolicyEstimate {
  double y = 0.0;
  bool coverage_warning = false;  ///< set when rho is zero on every batch pair
};

/// y = (1/K) sum_i rho(s_i, a_i) r_i.
OffPolicyEstimate offline_evaluate_y(const TransitionBatch& batch, const DensityRatio& rho);

struct AugmentedTransition {
  std::size_t s = 0;
  std::size_t a = 0;
  double r_hat = 0.0;
  std::size_t s_next = 0;
  std::size_t a_next = 0;
};

/// `epochs` sweeps of q(s,a) += alpha (r_hat + gamma q(s',a') - q(s,a)),
/// starting from `q`. Sweeps run in batch order, or in a fresh random order
/// per sweep when `shuffle` is given. Throws Divergence once max|q| exceeds
/// 10 max|r_hat| / (1 - gamma).
Matrix td0_fit_q(std::span<const AugmentedTransition> batch, double gamma, Matrix q,
                 double step_size, int epochs, Rng* shuffle = nullptr);

/// theta(s_i, .) += alpha rho(s_i, a_i) grad log pi(a_i | s_i) q(s_i, a_i).
SoftmaxPolicy offline_actor_step(const SoftmaxPolicy& policy, const DensityRatio& rho,
                                 const Matrix& q, const Transition& record, double step_size);

struct OfflineSchedule {
  int outer_iterations = 200;
  int actor_steps = 100;  ///< T, actor updates per outer iteration
  double actor_step_size = 0.01;
  double critic_step_size = 0.1;
  int critic_epochs = 1;  ///< TD(0) sweeps before each actor update
  bool shuffle_critic_sweeps = true;
  bool resample_next_actions_each_epoch = false;
  /// Divide by the batch's empirical (s, a) frequencies instead of its
  /// assumed d, so ratio-weighted batch sums are exact model expectations.
  bool empirical_ratio_denominator = true;
  std::uint64_t seed = 0;

  void validate() const;
};

struct OfflineConfig {
  RiskParams params;
  OfflineSchedule schedule;
  double gamma = 0.7;
  Vector initial_dist;  ///< empty selects the uniform distribution
};

struct OfflineRecord {
  int iteration = 0;
  double y = 0.0;          ///< NaN for the initial row
  double pi_a0_s0 = 0.0;
  double objective = 0.0;  ///< exact J_lambda under the evaluation MDP, NaN without one
};

struct OfflineTrace {
  std::vector<OfflineRecord> records;
  SoftmaxPolicy final_policy;
  bool coverage_warning = false;
};

/// Off-line MVPI from a fixed batch. `eval_mdp` only feeds the logged
/// objective; `model` replaces the estimated model when given.
OfflineTrace run_offline_mvpi(const TransitionBatch& batch, std::size_t n_states,
                              std::size_t n_actions, const OfflineConfig& config,
                              const FiniteMdp* eval_mdp = nullptr,
                              const FiniteMdp* model = nullptr);

}  // namespace mvpi
