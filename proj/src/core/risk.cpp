#include "mvpi/risk.hpp"

#include <cmath>

namespace mvpi {

namespace {

double relative_delta(double value, double reference, const char* what) {
  if (value == reference) return 0.0;
  if (reference == 0.0) {
    fail(ErrorCode::DegenerateSample,
         std::string("normalized delta of ") + what + " against a zero reference");
  }
  return (value - reference) / std::abs(reference);
}

}  // namespace

void RiskParams::validate() const {
  require(std::isfinite(lambda) && lambda >= 0.0, ErrorCode::InvalidArgument,
          "lambda must be finite and non-negative");
}

double risk_objective(const FiniteMdp& mdp, const TabularPolicy& policy, const RiskParams& params) {
  params.validate();
  const RewardDistribution dist = reward_distribution(mdp, policy);
  return dist.mean - params.lambda * dist.variance;
}

AverageRiskObjective average_risk_objective(const FiniteMdp& mdp, const TabularPolicy& policy,
                                            const RiskParams& params) {
  params.validate();
  const Vector stationary = stationary_distribution(mdp, policy);
  const Matrix d = policy.probs().array().colwise() * stationary.array();
  AverageRiskObjective out;
  out.j_bar = d.cwiseProduct(mdp.reward()).sum();
  out.lambda_risk = d.cwiseProduct((mdp.reward().array() - out.j_bar).square().matrix()).sum();
  out.objective = out.j_bar - params.lambda * out.lambda_risk;
  return out;
}

double EpisodeStats::sharpe_or_throw() const {
  if (!sharpe) fail(ErrorCode::DegenerateSample, "Sharpe ratio undefined for zero variance");
  return *sharpe;
}

EpisodeStats episode_stats(std::span<const double> returns, const RiskParams& params) {
  params.validate();
  require(returns.size() >= 2, ErrorCode::DegenerateSample,
          "episode statistics need at least two returns");
  const double n = static_cast<double>(returns.size());
  double mean = 0.0;
  for (double g : returns) mean += g;
  mean /= n;
  double variance = 0.0;
  for (double g : returns) variance += (g - mean) * (g - mean);
  variance /= n;

  EpisodeStats out;
  out.mean = mean;
  out.variance = variance;
  out.j_algo = mean - params.lambda * variance;
  if (variance > 0.0) out.sharpe = mean / std::sqrt(variance);
  return out;
}

NormalizedDeltas normalized_deltas(const EpisodeStats& algo, const EpisodeStats& reference) {
  NormalizedDeltas out;
  out.j_algo = relative_delta(algo.j_algo, reference.j_algo, "J");
  out.mean = relative_delta(algo.mean, reference.mean, "mean");
  out.variance = relative_delta(algo.variance, reference.variance, "variance");
  if (algo.sharpe && reference.sharpe) {
    out.sharpe = relative_delta(*algo.sharpe, *reference.sharpe, "Sharpe ratio");
  }
  return out;
}

}  // namespace mvpi
