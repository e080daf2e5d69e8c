// prosumer_game: solve a follower game, run a leader price search, or run one
// of the experiment sweeps.
//
// Exit codes: 0 success, 1 usage or configuration error, 2 a solver did not
// converge somewhere (output is still written).

#include <cstdio>
#include <exception>
#include <fstream>
#include <ios>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "prosumer/experiments/config.hpp"
#include "prosumer/experiments/sweeps.hpp"
#include "prosumer/followers.hpp"
#include "prosumer/stackelberg.hpp"

namespace {

using namespace prosumer;
using namespace prosumer::experiments;

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitNoConvergence = 2;

struct Options {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::string model = "pt";
  std::string solver;
  double epsilon = 1e-3;
  std::optional<double> tol;
  std::optional<std::size_t> max_iters;
  std::size_t jobs = 1;
  bool gnuplot = false;
  std::string sweep_kind;
  std::optional<double> from, to, step;
};

void add_common(CLI::App* app, Options& o) {
  app->add_option("--config", o.config, "Scenario config file (default scenario if omitted)");
  app->add_option("--seed", o.seed, "Override the generator seed");
  app->add_option("--tol", o.tol, "Solver stopping tolerance");
  app->add_option("--max-iters", o.max_iters, "Iteration (or sweep) cap");
}

void add_model(CLI::App* app, Options& o) {
  app->add_option("--model", o.model, "Follower model")
      ->check(CLI::IsMember({"cgt", "pt"}));
  app->add_option("--solver", o.solver,
                  "Follower solver (default: relaxation for cgt, sequential for pt)")
      ->check(CLI::IsMember({"relaxation", "sequential"}));
}

ScenarioConfig load_config(const Options& o) {
  ScenarioConfig cfg = o.config.empty() ? ScenarioConfig{} : read_config_file(o.config);
  if (o.seed) {
    if (!cfg.generator) throw ConfigError("--seed needs a [generator] block");
    cfg.generator->seed = *o.seed;
  }
  return cfg;
}

FollowerSettings follower_settings(const Options& o) {
  const FollowerModel model = o.model == "cgt" ? FollowerModel::Cgt : FollowerModel::Pt;
  FollowerSettings f = FollowerSettings::defaults_for(model);
  if (o.solver == "relaxation") f.algorithm = FollowerAlgorithm::Relaxation;
  if (o.solver == "sequential") f.algorithm = FollowerAlgorithm::Sequential;
  const SweepSpec defaults;
  f.relaxation.tol = o.tol.value_or(defaults.relaxation_tol);
  f.search.step_tol = o.tol.value_or(defaults.sequential_tol);
  if (o.max_iters) {
    f.relaxation.max_iters = *o.max_iters;
    f.search.max_sweeps = *o.max_iters;
  }
  return f;
}

void print_profile(const ActionProfile& x) {
  for (std::size_t n = 0; n < x.size(); ++n)
    std::printf("x[%zu] = %.10g\n", n, x[n]);
  std::printf("total_load_kwh = %.10g\n", total(x));
}

int run_solve(const Options& o) {
  const Scenario s = build_scenario(load_config(o));
  const FollowerSettings f = follower_settings(o);
  const EquilibriumReport rep = solve_followers(s, f);

  std::printf("model = %s\nsolver = %s\nprosumers = %zu\n", to_string(f.model),
              to_string(f.algorithm), s.size());
  print_profile(rep.profile);
  std::printf("iterations = %zu\n", rep.iterations);
  std::printf("%s = %.6g\n",
              f.algorithm == FollowerAlgorithm::Relaxation ? "final_residual"
                                                           : "final_step",
              rep.final_residual);
  const double eps = follower_deviation_gain(rep.profile, s, f, rep.epsilon);
  std::printf("epsilon = %.6g\n", eps);
  if (rep.concavity_guaranteed)
    std::printf("concavity_guaranteed = %s\n", *rep.concavity_guaranteed ? "yes" : "no");
  if (f.model == FollowerModel::Cgt) {
    const KKTCertificate k = kkt_verify(rep.profile, s, 1e-6);
    std::printf("kkt stationarity = %.3g complementarity = %.3g duality_gap = %.3g -> %s\n",
                k.stationarity_residual, k.complementarity_residual,
                k.duality_gap, k.passed ? "pass" : "FAIL");
  }
  std::printf("converged = %s\n", rep.converged ? "yes" : "no");

  if (!o.out.empty()) {
    std::ofstream out(o.out, std::ios::binary);
    if (!out) throw std::ios_base::failure("cannot write '" + o.out + "'");
    out << "t,residual\n";
    for (const auto& p : rep.residual_trace)
      out << p.t << ',' << format_number(p.residual) << '\n';
  }
  return rep.converged ? kExitOk : kExitNoConvergence;
}

int run_stackelberg(const Options& o) {
  const Scenario s = build_scenario(load_config(o));
  const FollowerSettings f = follower_settings(o);
  const StackelbergResult r = epsilon_se_grid(s, o.epsilon, f, o.jobs);
  const SeVerification v = verify_se(r, s, f, o.epsilon);

  std::printf("model = %s\nsolver = %s\nepsilon = %g\ngrid_points = %zu\n",
              to_string(f.model), to_string(f.algorithm), o.epsilon, r.grid.size());
  std::printf("rho_star = %.10g\nleader_profit = %.10g\n", r.rho_star, r.leader_profit);
  print_profile(r.follower_profile);
  std::printf("follower_iterations = %zu\nfailed_points = %zu\n",
              r.total_follower_iterations, r.failed_points);
  std::printf("verify follower_gain = %.3g leader_regret = %.3g -> %s\n",
              v.follower_gain, v.leader_regret, v.passed ? "pass" : "FAIL");

  if (!o.out.empty()) {
    std::ofstream out(o.out, std::ios::binary);
    if (!out) throw std::ios_base::failure("cannot write '" + o.out + "'");
    out << "rho_base_usd_per_kwh,profit_usd,follower_epsilon_usd,converged\n";
    for (const auto& g : r.grid)
      out << format_number(g.rho_base) << ',' << format_number(g.profit) << ','
          << format_number(g.follower_epsilon) << ',' << (g.converged ? 1 : 0) << '\n';
  }
  return r.failed_points == 0 ? kExitOk : kExitNoConvergence;
}

int run_sweep_cmd(const Options& o) {
  SweepSpec spec;
  spec.kind = parse_sweep_kind(o.sweep_kind);
  spec.epsilon = o.epsilon;
  spec.jobs = o.jobs;
  if (o.tol) spec.relaxation_tol = spec.sequential_tol = *o.tol;
  if (o.max_iters) spec.max_iters = spec.max_sweeps = *o.max_iters;
  if (o.from || o.to || o.step) {
    const auto def = SweepSpec::default_axis(spec.kind);
    const double step = o.step.value_or(def.size() > 1 ? def[1] - def[0] : 1.0);
    spec.axis = GridRange{o.from.value_or(def.front()), o.to.value_or(def.back()), step}
                    .values();
  }
  const SweepTable t = run_sweep(spec, load_config(o));

  const std::string path =
      o.out.empty() ? std::string(to_string(spec.kind)) + ".csv" : o.out;
  write_csv(t, path);
  if (o.gnuplot) {
    std::ofstream gp(path + ".gp", std::ios::binary);
    if (!gp) throw std::ios_base::failure("cannot write '" + path + ".gp'");
    gp << gnuplot_script(spec.kind, path);
  }
  for (const auto& f : t.failures) std::fprintf(stderr, "warning: %s\n", f.c_str());
  std::printf("%s: %zu rows -> %s\n", to_string(spec.kind), t.rows(), path.c_str());
  return t.all_converged() ? kExitOk : kExitNoConvergence;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Prosumer energy-trading games: follower equilibria, leader "
               "pricing and experiment sweeps"};
  app.require_subcommand(1);
  Options o;

  auto* solve = app.add_subcommand("solve", "Solve the follower game once");
  add_common(solve, o);
  add_model(solve, o);
  solve->add_option("--out", o.out, "Write the residual trace as CSV");

  auto* sweep = app.add_subcommand("sweep", "Run an experiment sweep to CSV");
  sweep->add_option("kind", o.sweep_kind, "Sweep kind")
      ->required()
      ->check(CLI::IsMember({"reference", "lambda", "profit-gap", "population",
                             "price-response", "convergence"}));
  add_common(sweep, o);
  sweep->add_option("--out", o.out, "CSV output path (default <kind>.csv)");
  sweep->add_option("--epsilon", o.epsilon, "Leader price resolution ($/kWh)")
      ->check(CLI::PositiveNumber);
  sweep->add_option("--jobs", o.jobs, "Worker threads")->check(CLI::PositiveNumber);
  sweep->add_flag("--gnuplot", o.gnuplot, "Also write <out>.gp");
  sweep->add_option("--from", o.from, "First value of the sweep axis");
  sweep->add_option("--to", o.to, "Last value of the sweep axis");
  sweep->add_option("--step", o.step, "Sweep axis step")->check(CLI::PositiveNumber);

  auto* stack = app.add_subcommand("stackelberg", "Epsilon-grid leader price search");
  add_common(stack, o);
  add_model(stack, o);
  stack->add_option("--out", o.out, "Write the leader grid as CSV");
  stack->add_option("--epsilon", o.epsilon, "Leader price resolution ($/kWh)")
      ->check(CLI::PositiveNumber);
  stack->add_option("--jobs", o.jobs, "Worker threads")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*solve) return run_solve(o);
    if (*sweep) return run_sweep_cmd(o);
    return run_stackelberg(o);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitUsage;
  } catch (const std::ios_base::failure& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitUsage;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitUsage;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitNoConvergence;
  }
}
