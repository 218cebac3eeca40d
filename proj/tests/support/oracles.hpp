#pragma once

// Independent reference computations for the test suites. Nothing here calls
// the library's solvers; each oracle takes a different route (iteration,
// simulation, enumeration, differencing) to the quantity under test.

#include "mvpi/mdp.hpp"
#include "mvpi/rng.hpp"

#include <cstdint>
#include <functional>
#include <vector>

namespace oracle {

using mvpi::FiniteMdp;
using mvpi::Matrix;
using mvpi::TabularPolicy;
using mvpi::Vector;

TabularPolicy random_policy(std::size_t ns, std::size_t na, mvpi::Rng& rng);

/// Every deterministic policy of the MDP, in lexicographic action order.
std::vector<TabularPolicy> all_deterministic_policies(std::size_t ns, std::size_t na);

/// d_pi as the truncated series (1 - gamma) sum_t gamma^t Pr(S_t, A_t).
Matrix occupancy_by_series(const FiniteMdp& mdp, const TabularPolicy& pi, double tol = 1e-15);

/// q_pi by iterating q <- r + gamma P v until the sup-norm change is below tol.
Matrix q_by_iteration(const FiniteMdp& mdp, const TabularPolicy& pi, double tol = 1e-14);

/// Optimal q* by value iteration.
Matrix optimal_q_by_iteration(const FiniteMdp& mdp, double tol = 1e-13);

/// Per-step reward law evaluated directly from d: mean and variance.
struct Moments {
  double mean = 0.0;
  double variance = 0.0;
};
Moments reward_moments(const Matrix& d, const Matrix& reward);

/// Exact V(G0) by summing over enumerated trajectories of length `horizon`.
/// Feasible only for tiny MDPs.
double return_variance_by_enumeration(const FiniteMdp& mdp, const TabularPolicy& pi,
                                      std::size_t horizon);

struct Estimate {
  double value = 0.0;
  double standard_error = 0.0;
};

/// Monte-Carlo d_pi from `episodes` trajectories truncated at gamma^T < 1e-8,
/// weighting step t by (1 - gamma) gamma^t.
Matrix mc_occupancy(const FiniteMdp& mdp, const TabularPolicy& pi, std::size_t episodes,
                    std::uint64_t seed);

/// Sample variance of G0 with the delta-method standard error
/// sqrt((m4 - s^4) / n).
Estimate mc_return_variance(const FiniteMdp& mdp, const TabularPolicy& pi, std::size_t episodes,
                            std::uint64_t seed);

/// Long-run per-step reward variance from one trajectory of `steps` steps
/// after `burn_in`, standard error from `batches` batch means.
Estimate mc_long_run_variance(const FiniteMdp& mdp, const TabularPolicy& pi, std::size_t steps,
                              std::size_t burn_in, std::size_t batches, std::uint64_t seed);

/// Central differences of f at x with step h.
Matrix central_difference(const std::function<double(const Matrix&)>& f, const Matrix& x, double h);

/// Exact gradient of E[G0 (2y - G0)] with respect to the logits for
/// trajectories of exactly `horizon` steps, by enumerating every path.
Matrix mvp_surrogate_gradient_by_enumeration(const FiniteMdp& mdp, const Matrix& logits, double y,
                                             std::size_t horizon);

/// Discounted reward of a path of length `horizon` drawn with our own loop,
/// used to check rollout bookkeeping.
double discounted_sum(const std::vector<double>& rewards, double gamma);

/// Softmax probabilities of one logit row.
Vector softmax_row(const Matrix& logits, std::size_t s);

}  // namespace oracle
