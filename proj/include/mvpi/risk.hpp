#pragma once

#include "mvpi/mdp.hpp"

#include <optional>
#include <span>

namespace mvpi {

/// Variance-penalty weight lambda >= 0.
struct RiskParams {
  double lambda = 0.0;

  void validate() const;
};

/// J_lambda(pi) = E[R] - lambda V(R) under the discounted occupancy measure.
double risk_objective(const FiniteMdp& mdp, const TabularPolicy& policy, const RiskParams& params);

struct AverageRiskObjective {
  double j_bar = 0.0;        ///< long-run average reward
  double lambda_risk = 0.0;  ///< long-run variance of the per-step reward
  double objective = 0.0;    ///< j_bar - lambda * lambda_risk
};

/// Average-reward counterpart under the stationary distribution.
AverageRiskObjective average_risk_objective(const FiniteMdp& mdp, const TabularPolicy& policy,
                                            const RiskParams& params);

/// Statistics of evaluation returns: population mean and variance,
/// j_algo = mean - lambda * variance, Sharpe ratio mean / sqrt(variance).
struct EpisodeStats {
  double mean = 0.0;
  double variance = 0.0;
  double j_algo = 0.0;
  std::optional<double> sharpe;  ///< absent when variance == 0

  /// Throws DegenerateSample when the variance is zero.
  double sharpe_or_throw() const;
};

EpisodeStats episode_stats(std::span<const double> returns, const RiskParams& params);

/// (x_algo - x_ref) / |x_ref| for each statistic.
struct NormalizedDeltas {
  double j_algo = 0.0;
  double mean = 0.0;
  double variance = 0.0;
  std::optional<double> sharpe;
};

NormalizedDeltas normalized_deltas(const EpisodeStats& algo, const EpisodeStats& reference);

}  // namespace mvpi
