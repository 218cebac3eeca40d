#include "mvpi/mvpi.h"

#include "mvpi/baselines.hpp"
#include "mvpi/engine.hpp"
#include "mvpi/envs.hpp"
#include "mvpi/io.hpp"
#include "mvpi/offline.hpp"
#include "mvpi/online.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <exception>
#include <new>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

struct mvpi_mdp {
  mvpi::FiniteMdp mdp;
  std::optional<mvpi::Matrix> sampling_d;
};

struct mvpi_batch {
  mvpi::TransitionBatch batch;
};

struct mvpi_result {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;
  mvpi::TabularPolicy policy;
  bool policy_block = false;
  std::string stop_reason;
};

namespace {

thread_local std::string last_error;

mvpi_status status_of(mvpi::ErrorCode code) {
  using mvpi::ErrorCode;
  switch (code) {
    case ErrorCode::InvalidArgument: return MVPI_E_INVALID_ARGUMENT;
    case ErrorCode::InvariantViolation: return MVPI_E_INVARIANT;
    case ErrorCode::NumericFailure: return MVPI_E_NUMERIC;
    case ErrorCode::NonErgodicChain: return MVPI_E_NON_ERGODIC;
    case ErrorCode::UncoveredStateAction: return MVPI_E_UNCOVERED;
    case ErrorCode::ZeroDenominator: return MVPI_E_ZERO_DENOMINATOR;
    case ErrorCode::DegenerateSample: return MVPI_E_DEGENERATE_SAMPLE;
    case ErrorCode::Divergence: return MVPI_E_DIVERGENCE;
    case ErrorCode::ConvergenceFailure: return MVPI_E_CONVERGENCE;
    case ErrorCode::Io: return MVPI_E_IO;
    case ErrorCode::Parse: return MVPI_E_PARSE;
  }
  return MVPI_E_INTERNAL;
}

mvpi_status failure(mvpi_status status, std::string message) {
  last_error = std::move(message);
  return status;
}

template <class F>
mvpi_status guarded(F&& body) {
  try {
    body();
    last_error.clear();
    return MVPI_OK;
  } catch (const mvpi::Error& e) {
    return failure(status_of(e.code()), e.what());
  } catch (const std::bad_alloc&) {
    return failure(MVPI_E_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return failure(MVPI_E_INTERNAL, e.what());
  }
}

void need(const void* p, const char* what) {
  if (!p) mvpi::fail(mvpi::ErrorCode::InvalidArgument, std::string(what) + " is null");
}

mvpi::Matrix read_matrix(const double* data, std::size_t rows, std::size_t cols) {
  mvpi::Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < cols; ++j) m(i, j) = data[i * cols + j];
  }
  return m;
}

mvpi_mdp* builtin(const std::string& name) {
  if (name == "fig3") return new mvpi_mdp{mvpi::fig3_mdp(), mvpi::fig3_sampling_distribution()};
  if (name == "chain2") return new mvpi_mdp{mvpi::chain2_mdp(), std::nullopt};
  if (name == "branch") return new mvpi_mdp{mvpi::branch_mdp(), std::nullopt};
  if (name == "swap") return new mvpi_mdp{mvpi::swap_mdp(), std::nullopt};
  mvpi::fail(mvpi::ErrorCode::InvalidArgument, "unknown builtin MDP '" + name + "'");
}

}  // namespace

extern "C" {

const char* mvpi_version(void) { return "0.1.0"; }

const char* mvpi_status_name(mvpi_status status) {
  switch (status) {
    case MVPI_OK: return "ok";
    case MVPI_E_INVALID_ARGUMENT: return "invalid-argument";
    case MVPI_E_INVARIANT: return "invariant-violation";
    case MVPI_E_NUMERIC: return "numeric-failure";
    case MVPI_E_NON_ERGODIC: return "non-ergodic-chain";
    case MVPI_E_UNCOVERED: return "uncovered-state-action";
    case MVPI_E_ZERO_DENOMINATOR: return "zero-denominator";
    case MVPI_E_DEGENERATE_SAMPLE: return "degenerate-sample";
    case MVPI_E_DIVERGENCE: return "divergence";
    case MVPI_E_CONVERGENCE: return "convergence-failure";
    case MVPI_E_IO: return "io";
    case MVPI_E_PARSE: return "parse";
    case MVPI_E_INTERNAL: return "internal";
  }
  return "unknown";
}

const char* mvpi_last_error(void) { return last_error.c_str(); }

mvpi_status mvpi_mdp_load(const char* source, mvpi_mdp** out) {
  return guarded([&] {
    need(source, "source");
    need(out, "out");
    const std::string text(source);
    const std::string prefix = "builtin:";
    if (text.rfind(prefix, 0) == 0) {
      *out = builtin(text.substr(prefix.size()));
      return;
    }
    mvpi::MdpDocument doc = mvpi::load_mdp_json(text);
    *out = new mvpi_mdp{std::move(doc.mdp), std::move(doc.sampling_d)};
  });
}

mvpi_status mvpi_mdp_random(size_t n_states, size_t n_actions, uint64_t seed, double gamma,
                            mvpi_mdp** out) {
  return guarded([&] {
    need(out, "out");
    *out = new mvpi_mdp{mvpi::random_mdp(n_states, n_actions, seed, {}, gamma), std::nullopt};
  });
}

mvpi_status mvpi_mdp_save(const mvpi_mdp* mdp, const char* path) {
  return guarded([&] {
    need(mdp, "mdp");
    need(path, "path");
    mvpi::write_file(path, mvpi::mdp_to_json(mdp->mdp, mdp->sampling_d));
  });
}

mvpi_status mvpi_mdp_shape(const mvpi_mdp* mdp, size_t* n_states, size_t* n_actions,
                           double* gamma) {
  return guarded([&] {
    need(mdp, "mdp");
    if (n_states) *n_states = mdp->mdp.n_states();
    if (n_actions) *n_actions = mdp->mdp.n_actions();
    if (gamma) *gamma = mdp->mdp.discount();
  });
}

int mvpi_mdp_has_sampling_distribution(const mvpi_mdp* mdp) {
  return mdp && mdp->sampling_d ? 1 : 0;
}

void mvpi_mdp_free(mvpi_mdp* mdp) { delete mdp; }

void mvpi_solve_options_init(mvpi_solve_options* options) {
  if (!options) return;
  const mvpi::MvpiConfig config;
  const mvpi::SoftmaxGradient gradient;
  options->lambda = config.params.lambda;
  options->improver = MVPI_IMPROVER_EXACT;
  options->setting = MVPI_SETTING_DISCOUNTED;
  options->max_outer_iterations = config.max_outer_iterations;
  options->objective_tolerance = config.objective_tolerance;
  options->step_size = gradient.step_size;
  options->inner_iterations = gradient.inner_iterations;
  options->gradient_tolerance = gradient.gradient_tolerance;
}

mvpi_status mvpi_solve(const mvpi_mdp* mdp, const mvpi_solve_options* options,
                       mvpi_result** out) {
  return guarded([&] {
    need(mdp, "mdp");
    need(options, "options");
    need(out, "out");
    mvpi::MvpiConfig config;
    config.params.lambda = options->lambda;
    config.max_outer_iterations = options->max_outer_iterations;
    config.objective_tolerance = options->objective_tolerance;
    config.setting = options->setting == MVPI_SETTING_AVERAGE ? mvpi::Setting::AverageReward
                                                               : mvpi::Setting::Discounted;
    const std::size_t ns = mdp->mdp.n_states(), na = mdp->mdp.n_actions();
    mvpi::PolicyParameters start = mvpi::TabularPolicy::uniform(ns, na);
    if (options->improver == MVPI_IMPROVER_SOFTMAX) {
      config.improver = mvpi::SoftmaxGradient{options->step_size, options->inner_iterations,
                                              options->gradient_tolerance};
      start = mvpi::SoftmaxPolicy::uniform(ns, na);
    } else if (options->improver != MVPI_IMPROVER_EXACT) {
      mvpi::fail(mvpi::ErrorCode::InvalidArgument, "unknown improver");
    }
    const mvpi::MvpiTrace trace = mvpi::run_mvpi(mdp->mdp, config, start);

    auto result = new mvpi_result{{"iter", "y", "J", "ER", "VR", "VG0", "J_lambda"},
                                  {},
                                  mvpi::as_tabular(trace.final_policy),
                                  true,
                                  mvpi::to_string(trace.reason)};
    for (const auto& r : trace.records) {
      result->rows.push_back({static_cast<double>(r.k), r.y, r.J, r.expected_reward,
                              r.reward_variance, r.return_variance, r.objective});
    }
    *out = result;
  });
}

mvpi_status mvpi_batch_sample(const mvpi_mdp* mdp, const double* d, size_t size, uint64_t seed,
                              mvpi_batch** out) {
  return guarded([&] {
    need(mdp, "mdp");
    need(out, "out");
    const std::size_t ns = mdp->mdp.n_states(), na = mdp->mdp.n_actions();
    mvpi::Matrix dist;
    if (d) {
      dist = read_matrix(d, ns, na);
    } else if (mdp->sampling_d) {
      dist = *mdp->sampling_d;
    } else {
      mvpi::fail(mvpi::ErrorCode::InvalidArgument,
                 "no sampling distribution given and the MDP carries none");
    }
    mvpi::Rng rng(seed);
    *out = new mvpi_batch{mvpi::sample_batch(mdp->mdp, dist, size, rng)};
  });
}

mvpi_status mvpi_batch_load(const char* csv_path, const char* d_path, mvpi_batch** out) {
  return guarded([&] {
    need(csv_path, "csv_path");
    need(out, "out");
    std::optional<mvpi::Matrix> d;
    if (d_path) d = mvpi::load_sampling_distribution_json(d_path);
    *out = new mvpi_batch{mvpi::load_batch_csv(csv_path, std::move(d))};
  });
}

mvpi_status mvpi_batch_save(const mvpi_batch* batch, const char* csv_path, const char* d_path) {
  return guarded([&] {
    need(batch, "batch");
    need(csv_path, "csv_path");
    mvpi::write_file(csv_path, mvpi::batch_to_csv(batch->batch));
    if (d_path && batch->batch.assumed_d()) {
      mvpi::write_file(d_path, mvpi::sampling_distribution_to_json(*batch->batch.assumed_d()));
    }
  });
}

size_t mvpi_batch_size(const mvpi_batch* batch) { return batch ? batch->batch.size() : 0; }

void mvpi_batch_free(mvpi_batch* batch) { delete batch; }

void mvpi_offline_options_init(mvpi_offline_options* options) {
  if (!options) return;
  const mvpi::OfflineConfig config;
  const mvpi::OfflineSchedule& s = config.schedule;
  options->lambda = config.params.lambda;
  options->outer_iterations = s.outer_iterations;
  options->actor_steps = s.actor_steps;
  options->actor_step_size = s.actor_step_size;
  options->critic_step_size = s.critic_step_size;
  options->critic_epochs = s.critic_epochs;
  options->empirical_ratio_denominator = s.empirical_ratio_denominator ? 1 : 0;
  options->use_true_model = 0;
  options->gamma = config.gamma;
  options->seed = s.seed;
}

mvpi_status mvpi_offline(const mvpi_batch* batch, const mvpi_mdp* mdp,
                         const mvpi_offline_options* options, mvpi_result** out) {
  return guarded([&] {
    need(batch, "batch");
    need(options, "options");
    need(out, "out");
    if (options->use_true_model && !mdp) {
      mvpi::fail(mvpi::ErrorCode::InvalidArgument, "use_true_model needs an MDP");
    }
    mvpi::OfflineConfig config;
    config.params.lambda = options->lambda;
    config.schedule.outer_iterations = options->outer_iterations;
    config.schedule.actor_steps = options->actor_steps;
    config.schedule.actor_step_size = options->actor_step_size;
    config.schedule.critic_step_size = options->critic_step_size;
    config.schedule.critic_epochs = options->critic_epochs;
    config.schedule.empirical_ratio_denominator = options->empirical_ratio_denominator != 0;
    config.schedule.seed = options->seed;

    std::size_t ns = 0, na = 0;
    if (mdp) {
      ns = mdp->mdp.n_states();
      na = mdp->mdp.n_actions();
      config.gamma = mdp->mdp.discount();
      config.initial_dist = mdp->mdp.initial_dist();
    } else {
      std::tie(ns, na) = batch->batch.inferred_shape();
      config.gamma = options->gamma;
    }
    const mvpi::FiniteMdp* eval = mdp ? &mdp->mdp : nullptr;
    const mvpi::FiniteMdp* model = options->use_true_model ? eval : nullptr;
    const mvpi::OfflineTrace trace =
        mvpi::run_offline_mvpi(batch->batch, ns, na, config, eval, model);

    auto result = new mvpi_result{{"iter", "y", "pi_a0_s0", "J_lambda"},
                                  {},
                                  trace.final_policy.to_tabular(),
                                  false,
                                  trace.coverage_warning ? "coverage-warning" : ""};
    for (const auto& r : trace.records) {
      result->rows.push_back({static_cast<double>(r.iteration), r.y, r.pi_a0_s0, r.objective});
    }
    *out = result;
  });
}

void mvpi_online_options_init(mvpi_online_options* options) {
  if (!options) return;
  const mvpi::OnlineConfig config;
  options->lambda = config.params.lambda;
  options->window = config.window;
  options->actor_step_size = config.actor_step_size;
  options->critic_step_size = config.critic_step_size;
  options->total_steps = config.total_steps;
  options->log_every = config.log_every;
  options->discounted_weighting = config.discounted_weighting ? 1 : 0;
  options->seed = config.seed;
}

mvpi_status mvpi_online(const mvpi_mdp* mdp, const mvpi_online_options* options,
                        mvpi_result** out) {
  return guarded([&] {
    need(mdp, "mdp");
    need(options, "options");
    need(out, "out");
    mvpi::OnlineConfig config;
    config.params.lambda = options->lambda;
    config.window = options->window;
    config.actor_step_size = options->actor_step_size;
    config.critic_step_size = options->critic_step_size;
    config.total_steps = options->total_steps;
    config.log_every = options->log_every;
    config.discounted_weighting = options->discounted_weighting != 0;
    config.seed = options->seed;
    const mvpi::OnlineTrace trace = mvpi::run_online_mvpi(mdp->mdp, config);

    auto result = new mvpi_result{{"step", "y", "pi_a0_s0", "J_lambda"},
                                  {},
                                  trace.final_policy.to_tabular(),
                                  false,
                                  ""};
    for (const auto& r : trace.records) {
      result->rows.push_back({static_cast<double>(r.step), r.y, r.pi_a0_s0, r.objective});
    }
    *out = result;
  });
}

void mvpi_baseline_options_init(mvpi_baseline_options* options) {
  if (!options) return;
  const mvpi::MvpSchedule s;
  options->lambda = 1.0;
  options->iterations = s.iterations;
  options->rollouts_per_iteration = s.rollouts_per_iteration;
  options->step_size = s.step_size;
  options->horizon = s.horizon;
  options->seed = s.seed;
}

mvpi_status mvpi_baseline(const mvpi_mdp* mdp, const mvpi_baseline_options* options,
                          mvpi_result** out) {
  return guarded([&] {
    need(mdp, "mdp");
    need(options, "options");
    need(out, "out");
    mvpi::MvpSchedule s;
    s.iterations = options->iterations;
    s.rollouts_per_iteration = options->rollouts_per_iteration;
    s.step_size = options->step_size;
    s.horizon = options->horizon;
    s.seed = options->seed;
    const mvpi::MvpTrace trace = mvpi::mvp_baseline(mdp->mdp, {options->lambda}, s);

    auto result = new mvpi_result{{"iter", "y", "mean_G0", "J_lambda", "VG0", "pi_a0_s0"},
                                  {},
                                  trace.final_policy.to_tabular(),
                                  false,
                                  ""};
    for (const auto& r : trace.records) {
      result->rows.push_back({static_cast<double>(r.iteration), r.y, r.mean_return_estimate,
                              r.objective, r.return_variance, r.pi_a0_s0});
    }
    *out = result;
  });
}

size_t mvpi_result_rows(const mvpi_result* result) { return result ? result->rows.size() : 0; }

size_t mvpi_result_cols(const mvpi_result* result) { return result ? result->columns.size() : 0; }

const char* mvpi_result_column_name(const mvpi_result* result, size_t col) {
  if (!result || col >= result->columns.size()) return nullptr;
  return result->columns[col].c_str();
}

mvpi_status mvpi_result_value(const mvpi_result* result, size_t row, size_t col, double* out) {
  return guarded([&] {
    need(result, "result");
    need(out, "out");
    if (row >= result->rows.size() || col >= result->columns.size()) {
      mvpi::fail(mvpi::ErrorCode::InvalidArgument, "result index out of range");
    }
    *out = result->rows[row][col];
  });
}

mvpi_status mvpi_result_policy(const mvpi_result* result, size_t s, size_t a, double* out) {
  return guarded([&] {
    need(result, "result");
    need(out, "out");
    if (s >= result->policy.n_states() || a >= result->policy.n_actions()) {
      mvpi::fail(mvpi::ErrorCode::InvalidArgument, "policy index out of range");
    }
    *out = result->policy(s, a);
  });
}

const char* mvpi_result_stop_reason(const mvpi_result* result) {
  return result ? result->stop_reason.c_str() : "";
}

mvpi_status mvpi_result_write_csv(const mvpi_result* result, const char* path) {
  return guarded([&] {
    need(result, "result");
    need(path, "path");
    std::string text;
    for (std::size_t c = 0; c < result->columns.size(); ++c) {
      if (c) text += ',';
      text += result->columns[c];
    }
    text += '\n';
    for (const auto& row : result->rows) {
      for (std::size_t c = 0; c < row.size(); ++c) {
        if (c) text += ',';
        text += mvpi::format_double(row[c]);
      }
      text += '\n';
    }
    if (result->policy_block) {
      text += "state,action,prob\n";
      for (std::size_t s = 0; s < result->policy.n_states(); ++s) {
        for (std::size_t a = 0; a < result->policy.n_actions(); ++a) {
          text += std::to_string(s) + ',' + std::to_string(a) + ',' +
                  mvpi::format_double(result->policy(s, a)) + '\n';
        }
      }
    }
    mvpi::write_file(path, text);
  });
}

void mvpi_result_free(mvpi_result* result) { delete result; }

mvpi_status mvpi_evaluate_episodes(const mvpi_mdp* mdp, const mvpi_result* result, double lambda,
                                   size_t episodes, uint64_t seed, mvpi_episode_stats* out) {
  return guarded([&] {
    need(mdp, "mdp");
    need(result, "result");
    need(out, "out");
    mvpi::check_policy_shape(mdp->mdp, result->policy);
    mvpi::RolloutSampler sampler(mdp->mdp, result->policy, seed);
    std::vector<double> returns(episodes);
    for (auto& g : returns) g = sampler.next().return_g0;
    const mvpi::EpisodeStats stats = mvpi::episode_stats(returns, {lambda});
    out->mean = stats.mean;
    out->variance = stats.variance;
    out->j_algo = stats.j_algo;
    out->has_sharpe = stats.sharpe ? 1 : 0;
    out->sharpe = stats.sharpe.value_or(std::nan(""));
  });
}

size_t mvpi_format_double(double x, char* buf, size_t size) {
  const std::string text = mvpi::format_double(x);
  if (buf && size > 0) {
    const std::size_t n = std::min(size - 1, text.size());
    std::memcpy(buf, text.data(), n);
    buf[n] = '\0';
  }
  return text.size();
}

}  // extern "C"
