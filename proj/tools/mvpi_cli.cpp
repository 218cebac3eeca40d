// Experiment harness over the mvpi C interface.

#include "mvpi/mvpi.h"

#include <CLI11.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <memory>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace {

constexpr int kUsageError = 1;
constexpr int kDataError = 2;

struct Failure {
  mvpi_status status;
  std::string message;
};

void check(mvpi_status status) {
  if (status != MVPI_OK) throw Failure{status, mvpi_last_error()};
}

struct MdpDeleter { void operator()(mvpi_mdp* p) const { mvpi_mdp_free(p); } };
struct BatchDeleter { void operator()(mvpi_batch* p) const { mvpi_batch_free(p); } };
struct ResultDeleter { void operator()(mvpi_result* p) const { mvpi_result_free(p); } };
using MdpPtr = std::unique_ptr<mvpi_mdp, MdpDeleter>;
using BatchPtr = std::unique_ptr<mvpi_batch, BatchDeleter>;
using ResultPtr = std::unique_ptr<mvpi_result, ResultDeleter>;

MdpPtr load_mdp(const std::string& source) {
  mvpi_mdp* raw = nullptr;
  check(mvpi_mdp_load(source.c_str(), &raw));
  return MdpPtr(raw);
}

std::string fmt(double x) {
  char buf[64];
  mvpi_format_double(x, buf, sizeof buf);
  return buf;
}

double parse_number(const std::string& text) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(text, &used);
  } catch (const std::exception&) {
    throw CLI::ValidationError("not a number: '" + text + "'");
  }
  if (used != text.size()) throw CLI::ValidationError("not a number: '" + text + "'");
  return v;
}

std::vector<std::string> split(const std::string& text, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : text) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

// "0,0.1,...,2" expands the arithmetic run; values are rounded to 12
// significant digits so the grid matches its decimal spelling.
std::vector<double> parse_lambdas(const std::string& text) {
  const auto parts = split(text, ',');
  std::vector<double> out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (parts[i] != "...") {
      out.push_back(parse_number(parts[i]));
      continue;
    }
    if (out.size() < 2 || i + 1 >= parts.size()) {
      throw CLI::ValidationError("'...' needs two values before it and one after");
    }
    const double a = out[out.size() - 2];
    const double step = out.back() - a;
    const double end = parse_number(parts[++i]);
    if (!(step > 0.0) || end < out.back()) throw CLI::ValidationError("'...' needs an increasing run");
    const long count = std::lround((end - a) / step);
    if (std::abs(a + count * step - end) > 1e-9 * std::max(1.0, std::abs(end))) {
      throw CLI::ValidationError("'...' end is not on the grid");
    }
    for (long k = 2; k <= count; ++k) {
      char buf[64];
      std::snprintf(buf, sizeof buf, "%.12g", a + static_cast<double>(k) * step);
      out.push_back(std::strtod(buf, nullptr));
    }
  }
  return out;
}

// "0..29" or "1,5,7".
std::vector<std::uint64_t> parse_seeds(const std::string& text) {
  std::vector<std::uint64_t> out;
  auto to_seed = [](const std::string& s) {
    if (s.empty() || s.find_first_not_of("0123456789") != std::string::npos) {
      throw CLI::ValidationError("bad seed '" + s + "'");
    }
    return static_cast<std::uint64_t>(std::stoull(s));
  };
  const auto dots = text.find("..");
  if (dots != std::string::npos) {
    const auto lo = to_seed(text.substr(0, dots));
    const auto hi = to_seed(text.substr(dots + 2));
    if (hi < lo) throw CLI::ValidationError("empty seed range");
    for (auto s = lo; s <= hi; ++s) out.push_back(s);
    return out;
  }
  for (const auto& part : split(text, ',')) out.push_back(to_seed(part));
  return out;
}

mvpi_improver improver_of(const std::string& name) {
  return name == "softmax" ? MVPI_IMPROVER_SOFTMAX : MVPI_IMPROVER_EXACT;
}

mvpi_setting setting_of(const std::string& name) {
  return name == "average" ? MVPI_SETTING_AVERAGE : MVPI_SETTING_DISCOUNTED;
}

struct SolveArgs {
  std::string mdp;
  std::string improver = "exact";
  std::string setting = "discounted";
  std::uint64_t seed = 0;
  std::string out;
  mvpi_solve_options opt{};
};

struct OfflineArgs {
  std::string batch;
  std::string d_path;
  std::string mdp;
  std::string out;
  bool true_model = false;
  bool assumed_denominator = false;
  mvpi_offline_options opt{};
};

struct OnlineArgs {
  std::string mdp;
  std::string out;
  bool discounted_weighting = false;
  mvpi_online_options opt{};
};

struct BaselineArgs {
  std::string mdp;
  std::string out;
  mvpi_baseline_options opt{};
};

struct GenBatchArgs {
  std::string mdp;
  std::size_t size = 1000;
  std::uint64_t seed = 0;
  std::string out;
  std::string d_out;
};

struct SweepArgs {
  std::string mdp = "builtin:fig3";
  std::string mode = "solve";
  std::string improver = "softmax";
  std::string lambdas = "0,0.1,...,2";
  std::string seeds = "0..29";
  unsigned parallel = 0;
  std::size_t episodes = 1000;
  std::size_t batch_size = 1000;
  std::string out_dir = "sweep";
};

ResultPtr run_solve(const mvpi_mdp* mdp, mvpi_solve_options opt, const std::string& improver,
                    const std::string& setting) {
  opt.improver = improver_of(improver);
  opt.setting = setting_of(setting);
  mvpi_result* raw = nullptr;
  check(mvpi_solve(mdp, &opt, &raw));
  return ResultPtr(raw);
}

int cmd_solve(SolveArgs& a) {
  const MdpPtr mdp = load_mdp(a.mdp);
  const ResultPtr result = run_solve(mdp.get(), a.opt, a.improver, a.setting);
  check(mvpi_result_write_csv(result.get(), a.out.c_str()));
  return 0;
}

int cmd_offline(OfflineArgs& a) {
  mvpi_batch* raw_batch = nullptr;
  check(mvpi_batch_load(a.batch.c_str(), a.d_path.empty() ? nullptr : a.d_path.c_str(), &raw_batch));
  const BatchPtr batch(raw_batch);
  MdpPtr mdp;
  if (!a.mdp.empty()) mdp = load_mdp(a.mdp);
  a.opt.use_true_model = a.true_model ? 1 : 0;
  a.opt.empirical_ratio_denominator = a.assumed_denominator ? 0 : 1;
  mvpi_result* raw = nullptr;
  check(mvpi_offline(batch.get(), mdp.get(), &a.opt, &raw));
  const ResultPtr result(raw);
  check(mvpi_result_write_csv(result.get(), a.out.c_str()));
  return 0;
}

int cmd_online(OnlineArgs& a) {
  const MdpPtr mdp = load_mdp(a.mdp);
  a.opt.discounted_weighting = a.discounted_weighting ? 1 : 0;
  mvpi_result* raw = nullptr;
  check(mvpi_online(mdp.get(), &a.opt, &raw));
  const ResultPtr result(raw);
  check(mvpi_result_write_csv(result.get(), a.out.c_str()));
  return 0;
}

int cmd_baseline(BaselineArgs& a) {
  const MdpPtr mdp = load_mdp(a.mdp);
  mvpi_result* raw = nullptr;
  check(mvpi_baseline(mdp.get(), &a.opt, &raw));
  const ResultPtr result(raw);
  check(mvpi_result_write_csv(result.get(), a.out.c_str()));
  return 0;
}

int cmd_gen_batch(GenBatchArgs& a) {
  const MdpPtr mdp = load_mdp(a.mdp);
  mvpi_batch* raw = nullptr;
  check(mvpi_batch_sample(mdp.get(), nullptr, a.size, a.seed, &raw));
  const BatchPtr batch(raw);
  check(mvpi_batch_save(batch.get(), a.out.c_str(), a.d_out.empty() ? nullptr : a.d_out.c_str()));
  return 0;
}

struct Cell {
  double lambda = 0.0;
  std::uint64_t seed = 0;
  bool done = false;
  std::string error;
  mvpi_episode_stats stats{};
  double pi_a0_s0 = 0.0;
};

ResultPtr run_cell(const mvpi_mdp* mdp, const SweepArgs& a, const Cell& cell) {
  mvpi_result* raw = nullptr;
  if (a.mode == "solve") {
    mvpi_solve_options opt;
    mvpi_solve_options_init(&opt);
    opt.lambda = cell.lambda;
    return run_solve(mdp, opt, a.improver, "discounted");
  }
  if (a.mode == "offline") {
    mvpi_batch* raw_batch = nullptr;
    check(mvpi_batch_sample(mdp, nullptr, a.batch_size, cell.seed, &raw_batch));
    const BatchPtr batch(raw_batch);
    mvpi_offline_options opt;
    mvpi_offline_options_init(&opt);
    opt.lambda = cell.lambda;
    opt.seed = cell.seed;
    check(mvpi_offline(batch.get(), mdp, &opt, &raw));
  } else if (a.mode == "online") {
    mvpi_online_options opt;
    mvpi_online_options_init(&opt);
    opt.lambda = cell.lambda;
    opt.seed = cell.seed;
    check(mvpi_online(mdp, &opt, &raw));
  } else {
    mvpi_baseline_options opt;
    mvpi_baseline_options_init(&opt);
    opt.lambda = cell.lambda;
    opt.seed = cell.seed;
    check(mvpi_baseline(mdp, &opt, &raw));
  }
  return ResultPtr(raw);
}

std::string cell_name(double lambda, std::uint64_t seed) {
  char buf[96];
  std::snprintf(buf, sizeof buf, "cell_lambda%.12g_seed%llu.csv", lambda,
                static_cast<unsigned long long>(seed));
  return buf;
}

int cmd_sweep(SweepArgs& a) {
  const auto lambdas = parse_lambdas(a.lambdas);
  const auto seeds = parse_seeds(a.seeds);
  const MdpPtr mdp = load_mdp(a.mdp);
  std::filesystem::create_directories(a.out_dir);

  std::vector<Cell> cells;
  for (double l : lambdas) {
    for (auto s : seeds) {
      Cell c;
      c.lambda = l;
      c.seed = s;
      cells.push_back(c);
    }
  }

  unsigned workers = a.parallel ? a.parallel : std::max(1u, std::thread::hardware_concurrency());
  workers = std::min<unsigned>(workers, static_cast<unsigned>(cells.size()));
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next++; i < cells.size(); i = next++) {
      Cell& cell = cells[i];
      try {
        const ResultPtr result = run_cell(mdp.get(), a, cell);
        const std::string path = (std::filesystem::path(a.out_dir) / cell_name(cell.lambda, cell.seed)).string();
        check(mvpi_result_write_csv(result.get(), path.c_str()));
        check(mvpi_evaluate_episodes(mdp.get(), result.get(), cell.lambda, a.episodes, cell.seed,
                                     &cell.stats));
        check(mvpi_result_policy(result.get(), 0, 0, &cell.pi_a0_s0));
        cell.done = true;
      } catch (const Failure& f) {
        cell.error = std::string(mvpi_status_name(f.status)) + ": " + f.message;
      }
    }
  };
  std::vector<std::thread> pool;
  for (unsigned w = 1; w < workers; ++w) pool.emplace_back(work);
  work();
  for (auto& t : pool) t.join();

  std::string summary = "lambda,seed,mean,variance,j_algo,sharpe,pi_a0_s0\n";
  int failed = 0;
  for (const Cell& c : cells) {
    if (!c.done) {
      ++failed;
      std::fprintf(stderr, "mvpi: cell lambda=%s seed=%llu failed: %s\n", fmt(c.lambda).c_str(),
                   static_cast<unsigned long long>(c.seed), c.error.c_str());
      continue;
    }
    summary += fmt(c.lambda) + ',' + std::to_string(c.seed) + ',' + fmt(c.stats.mean) + ',' +
               fmt(c.stats.variance) + ',' + fmt(c.stats.j_algo) + ',' +
               (c.stats.has_sharpe ? fmt(c.stats.sharpe) : std::string("NA")) + ',' +
               fmt(c.pi_a0_s0) + '\n';
  }
  std::ofstream out(std::filesystem::path(a.out_dir) / "summary.csv", std::ios::binary);
  out << summary;
  if (!out) throw Failure{MVPI_E_IO, "cannot write summary.csv in " + a.out_dir};
  return failed ? kDataError : 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Mean-variance policy iteration experiments"};
  app.require_subcommand(1);

  SolveArgs solve;
  mvpi_solve_options_init(&solve.opt);
  auto* s = app.add_subcommand("solve", "Exact or gradient MVPI on a known MDP");
  s->add_option("--mdp", solve.mdp, "MDP JSON file or builtin:<name>")->required();
  s->add_option("--lambda", solve.opt.lambda)->check(CLI::NonNegativeNumber);
  s->add_option("--improver", solve.improver)->check(CLI::IsMember({"exact", "softmax"}));
  s->add_option("--setting", solve.setting)->check(CLI::IsMember({"discounted", "average"}));
  s->add_option("--seed", solve.seed, "accepted for uniformity; the solver is deterministic");
  s->add_option("--max-iter", solve.opt.max_outer_iterations)->check(CLI::PositiveNumber);
  s->add_option("--step-size", solve.opt.step_size)->check(CLI::PositiveNumber);
  s->add_option("--inner-iter", solve.opt.inner_iterations)->check(CLI::PositiveNumber);
  s->add_option("--out", solve.out)->required();

  OfflineArgs off;
  mvpi_offline_options_init(&off.opt);
  auto* o = app.add_subcommand("offline", "Off-line MVPI from a transition batch");
  o->add_option("--batch", off.batch, "CSV with header s,a,r,s_next")->required();
  o->add_option("--d", off.d_path, "sidecar JSON with the assumed sampling distribution");
  o->add_option("--mdp", off.mdp, "MDP for shape, gamma, mu0 and exact J_lambda logging");
  o->add_option("--lambda", off.opt.lambda)->check(CLI::NonNegativeNumber);
  o->add_option("--seed", off.opt.seed);
  o->add_option("--gamma", off.opt.gamma, "discount when no --mdp is given");
  o->add_option("--outer", off.opt.outer_iterations)->check(CLI::PositiveNumber);
  o->add_option("--actor-steps", off.opt.actor_steps)->check(CLI::PositiveNumber);
  o->add_option("--actor-step", off.opt.actor_step_size)->check(CLI::PositiveNumber);
  o->add_option("--critic-step", off.opt.critic_step_size)->check(CLI::PositiveNumber);
  o->add_option("--critic-epochs", off.opt.critic_epochs)->check(CLI::PositiveNumber);
  o->add_flag("--true-model", off.true_model, "use --mdp instead of the estimated model");
  o->add_flag("--assumed-d-ratio", off.assumed_denominator,
              "divide density ratios by the assumed d instead of batch frequencies");
  o->add_option("--out", off.out)->required();

  OnlineArgs on;
  mvpi_online_options_init(&on.opt);
  auto* n = app.add_subcommand("online", "Online MVPI actor-critic");
  n->add_option("--mdp", on.mdp)->required();
  n->add_option("--lambda", on.opt.lambda)->check(CLI::NonNegativeNumber);
  n->add_option("--window", on.opt.window)->check(CLI::PositiveNumber);
  n->add_option("--steps", on.opt.total_steps)->check(CLI::PositiveNumber);
  n->add_option("--log-every", on.opt.log_every)->check(CLI::PositiveNumber);
  n->add_option("--actor-step", on.opt.actor_step_size)->check(CLI::PositiveNumber);
  n->add_option("--critic-step", on.opt.critic_step_size)->check(CLI::PositiveNumber);
  n->add_flag("--discounted-weighting", on.discounted_weighting);
  n->add_option("--seed", on.opt.seed);
  n->add_option("--out", on.out)->required();

  BaselineArgs base;
  mvpi_baseline_options_init(&base.opt);
  auto* b = app.add_subcommand("baseline", "MVP stochastic coordinate ascent");
  b->add_option("--mdp", base.mdp)->required();
  b->add_option("--lambda", base.opt.lambda)->check(CLI::PositiveNumber);
  b->add_option("--iterations", base.opt.iterations)->check(CLI::PositiveNumber);
  b->add_option("--rollouts", base.opt.rollouts_per_iteration)->check(CLI::PositiveNumber);
  b->add_option("--step-size", base.opt.step_size)->check(CLI::PositiveNumber);
  b->add_option("--seed", base.opt.seed);
  b->add_option("--out", base.out)->required();

  GenBatchArgs gen;
  auto* g = app.add_subcommand("gen-batch", "Sample a transition batch from an MDP's d");
  g->add_option("--mdp", gen.mdp)->required();
  g->add_option("--size", gen.size)->check(CLI::PositiveNumber);
  g->add_option("--seed", gen.seed);
  g->add_option("--out", gen.out)->required();
  g->add_option("--d-out", gen.d_out, "write the sampling distribution sidecar here");

  SweepArgs sweep;
  auto* w = app.add_subcommand("sweep", "Lambda x seed grid with a summary CSV");
  w->add_option("--mdp", sweep.mdp);
  w->add_option("--mode", sweep.mode)->check(CLI::IsMember({"solve", "offline", "online", "baseline"}));
  w->add_option("--improver", sweep.improver)->check(CLI::IsMember({"exact", "softmax"}));
  w->add_option("--lambdas", sweep.lambdas, "e.g. 0,0.1,...,2");
  w->add_option("--seeds", sweep.seeds, "e.g. 0..29 or 1,2,3");
  w->add_option("--parallel", sweep.parallel, "worker threads, 0 = hardware threads");
  w->add_option("--episodes", sweep.episodes)->check(CLI::Range(std::size_t{2}, std::size_t{100'000'000}));
  w->add_option("--batch-size", sweep.batch_size)->check(CLI::PositiveNumber);
  w->add_option("--out-dir", sweep.out_dir);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kUsageError;
  }

  try {
    if (*s) return cmd_solve(solve);
    if (*o) return cmd_offline(off);
    if (*n) return cmd_online(on);
    if (*b) return cmd_baseline(base);
    if (*g) return cmd_gen_batch(gen);
    return cmd_sweep(sweep);
  } catch (const CLI::ValidationError& e) {
    std::fprintf(stderr, "mvpi: usage error: %s\n", e.what());
    return kUsageError;
  } catch (const Failure& f) {
    std::fprintf(stderr, "mvpi: error: %s: %s\n", mvpi_status_name(f.status), f.message.c_str());
    return kDataError;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "mvpi: error: %s\n", e.what());
    return kDataError;
  }
}
