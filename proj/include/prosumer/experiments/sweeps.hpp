#pragma once

// The six experiment sweeps. Each produces a table whose rows follow the
// sweep grid; grid points are independent and may run on several threads.

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <limits>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "prosumer/experiments/config.hpp"
#include "prosumer/followers.hpp"
#include "prosumer/stackelberg.hpp"

namespace prosumer::experiments {

enum class SweepKind {
  Reference,
  Lambda,
  ProfitGap,
  Population,
  PriceResponse,
  Convergence
};

[[nodiscard]] inline const char* to_string(SweepKind k) {
  switch (k) {
    case SweepKind::Reference: return "reference";
    case SweepKind::Lambda: return "lambda";
    case SweepKind::ProfitGap: return "profit-gap";
    case SweepKind::Population: return "population";
    case SweepKind::PriceResponse: return "price-response";
    case SweepKind::Convergence: return "convergence";
  }
  return "?";
}

[[nodiscard]] inline SweepKind parse_sweep_kind(const std::string& s) {
  for (SweepKind k : {SweepKind::Reference, SweepKind::Lambda,
                      SweepKind::ProfitGap, SweepKind::Population,
                      SweepKind::PriceResponse, SweepKind::Convergence})
    if (s == to_string(k)) return k;
  throw std::invalid_argument("unknown sweep kind '" + s + "'");
}

/// Inclusive arithmetic grid; values are rounded to 12 significant digits so
/// that e.g. 0.3 prints as 0.3.
struct GridRange {
  double from = 0.0;
  double to = 0.0;
  double step = 1.0;

  [[nodiscard]] std::vector<double> values() const {
    if (!(step > 0.0)) throw std::invalid_argument("grid step must be > 0");
    if (!(from <= to)) throw std::invalid_argument("grid range is empty");
    const auto n = static_cast<std::size_t>(std::floor((to - from) / step + 1e-9));
    std::vector<double> out;
    out.reserve(n + 1);
    for (std::size_t i = 0; i <= n; ++i) {
      char buf[32];
      std::snprintf(buf, sizeof buf, "%.12g", from + step * static_cast<double>(i));
      out.push_back(std::stod(buf));
    }
    return out;
  }
};

struct SweepSpec {
  SweepKind kind = SweepKind::Reference;
  /// Main axis; empty means the kind's default (see default_axis).
  std::vector<double> axis{};
  /// Loss-aversion levels for the lambda sweep.
  std::vector<double> lambdas{2.0, 3.0, 4.0, 5.0, 6.0};
  std::optional<std::uint64_t> seed{};
  /// Leader price resolution for profit-gap.
  double epsilon = 1e-3;
  /// Stopping tolerances: NI residual for relaxation, sup-norm step for
  /// sequential best response.
  double relaxation_tol = 1e-18;
  double sequential_tol = 1e-9;
  std::size_t max_iters = 1'000'000;
  std::size_t max_sweeps = 500;
  std::size_t jobs = 1;

  void validate() const {
    const auto ax = axis_values();
    for (std::size_t i = 1; i < ax.size(); ++i)
      if (!(ax[i] > ax[i - 1]))
        throw std::invalid_argument("sweep axis must be strictly increasing");
    if (kind == SweepKind::Lambda) {
      if (lambdas.empty()) throw std::invalid_argument("lambda list is empty");
      for (std::size_t i = 1; i < lambdas.size(); ++i)
        if (!(lambdas[i] > lambdas[i - 1]))
          throw std::invalid_argument("lambda list must be strictly increasing");
    }
    if (kind == SweepKind::Population || kind == SweepKind::Convergence)
      for (double n : ax)
        if (!(n >= 1.0) || n != std::floor(n))
          throw std::invalid_argument("population sizes must be positive integers");
    if (!(epsilon > 0.0)) throw std::invalid_argument("epsilon must be > 0");
    if (!(relaxation_tol > 0.0) || !(sequential_tol > 0.0))
      throw std::invalid_argument("tolerances must be > 0");
  }

  [[nodiscard]] std::vector<double> axis_values() const {
    return axis.empty() ? default_axis(kind) : axis;
  }

  [[nodiscard]] static std::vector<double> default_axis(SweepKind k) {
    switch (k) {
      case SweepKind::Reference: return GridRange{-4.0, 8.0, 0.1}.values();
      case SweepKind::Lambda: return GridRange{-4.0, 8.0, 0.25}.values();
      case SweepKind::ProfitGap: return GridRange{-4.0, 8.0, 0.5}.values();
      case SweepKind::Population:
      case SweepKind::Convergence: return GridRange{10.0, 70.0, 10.0}.values();
      // Base price in $/kWh, -10 to 10 cents.
      case SweepKind::PriceResponse: return GridRange{-0.10, 0.10, 0.01}.values();
    }
    return {};
  }
};

struct SweepTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> numeric;
  /// Optional text column inserted at text_column (price-response groups).
  std::vector<std::string> text;
  std::optional<std::size_t> text_column{};
  /// Rows whose solver did not converge, with a short description each.
  std::vector<std::string> failures;

  [[nodiscard]] std::size_t rows() const { return numeric.size(); }
  [[nodiscard]] bool all_converged() const { return failures.empty(); }
};

/// Shortest round-trip decimal form; independent of locale.
[[nodiscard]] inline std::string format_number(double v) {
  if (v == 0.0) return "0";
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

inline void write_csv(const SweepTable& t, std::ostream& out) {
  for (std::size_t c = 0; c < t.header.size(); ++c)
    out << (c ? "," : "") << t.header[c];
  out << '\n';
  for (std::size_t r = 0; r < t.rows(); ++r) {
    std::size_t num = 0;
    for (std::size_t c = 0; c < t.header.size(); ++c) {
      if (c) out << ',';
      if (t.text_column && c == *t.text_column)
        out << t.text[r];
      else
        out << format_number(t.numeric[r][num++]);
    }
    out << '\n';
  }
}

inline void write_csv(const SweepTable& t, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::ios_base::failure("cannot write '" + path + "'");
  write_csv(t, out);
}

/// Plain gnuplot script plotting the CSV at csv_path.
[[nodiscard]] inline std::string gnuplot_script(SweepKind k,
                                                const std::string& csv_path) {
  std::string s = "set datafile separator ','\nset key autotitle columnhead\n";
  s += "set grid\n";
  const std::string f = "'" + csv_path + "'";
  switch (k) {
    case SweepKind::Reference:
    case SweepKind::Population:
      s += std::string("set xlabel '") +
           (k == SweepKind::Reference ? "reference point ($)" : "prosumers") +
           "'\nset ylabel 'total load (kWh)'\n";
      s += "plot " + f + " using 1:2 with linespoints, '' using 1:3 with linespoints\n";
      break;
    case SweepKind::Lambda:
      s += "set xlabel 'reference point ($)'\nset ylabel 'total load (kWh)'\n";
      s += "set cblabel 'lambda'\n";
      s += "plot " + f + " using 2:3:1 with points palette pointtype 7 notitle\n";
      break;
    case SweepKind::ProfitGap:
      s += "set xlabel 'reference point ($)'\nset ylabel 'profit ($)'\n";
      s += "plot " + f + " using 1:2 with linespoints, '' using 1:3 with linespoints\n";
      break;
    case SweepKind::PriceResponse:
      s += "set xlabel 'base price ($/kWh)'\nset ylabel 'group load (kWh)'\n";
      s += "plot for [g in 'cgt r1 r3'] " + f +
           " using 1:(stringcolumn(2) eq g ? $3 : 1/0) with linespoints title g\n";
      break;
    case SweepKind::Convergence:
      s += "set xlabel 'prosumers'\nset ylabel 'iterations'\n";
      s += "plot " + f + " using 1:2 with linespoints\n";
      break;
  }
  return s;
}

namespace detail {

inline FollowerSettings sweep_followers(const SweepSpec& spec,
                                        FollowerModel model) {
  FollowerSettings f = FollowerSettings::defaults_for(model);
  f.relaxation.tol = spec.relaxation_tol;
  f.relaxation.max_iters = spec.max_iters;
  f.search.step_tol = spec.sequential_tol;
  f.search.max_sweeps = spec.max_sweeps;
  return f;
}

inline Scenario with_reference(Scenario s, double r) {
  for (auto& p : s.prosumers) p.prospect.reference = r;
  return s;
}

inline Scenario with_lambda(Scenario s, double lambda) {
  for (auto& p : s.prosumers) p.prospect.lambda = lambda;
  return s;
}

struct PointResult {
  std::vector<std::vector<double>> rows;
  std::vector<std::string> text;
  std::string failure;
};

}  // namespace detail

/// Scenario for the population-type sweeps: the configured generator with n
/// prosumers. Explicit prosumer lists cannot be resized.
[[nodiscard]] inline Scenario scenario_with_population(ScenarioConfig cfg,
                                                       std::size_t n) {
  if (!cfg.generator)
    throw ConfigError("population sweeps need a [generator] block");
  cfg.generator->n = n;
  return build_scenario(cfg);
}

/// Runs one sweep over the configured scenario. Non-converged points are
/// still tabulated and listed in SweepTable::failures.
[[nodiscard]] inline SweepTable run_sweep(const SweepSpec& spec,
                                          ScenarioConfig cfg) {
  spec.validate();
  if (spec.seed) {
    if (!cfg.generator)
      throw ConfigError("--seed needs a [generator] block");
    cfg.generator->seed = *spec.seed;
  }
  const std::vector<double> axis = spec.axis_values();
  const FollowerSettings cgt = detail::sweep_followers(spec, FollowerModel::Cgt);
  const FollowerSettings pt = detail::sweep_followers(spec, FollowerModel::Pt);

  SweepTable table;
  std::vector<std::function<detail::PointResult()>> tasks;
  const Scenario base = (spec.kind == SweepKind::Population ||
                         spec.kind == SweepKind::Convergence)
                            ? Scenario{}
                            : build_scenario(cfg);

  auto fmt_fail = [](const std::string& what, const std::string& where) {
    return what + " did not converge at " + where;
  };

  switch (spec.kind) {
    case SweepKind::Reference: {
      table.header = {"r", "total_load_cgt_kwh", "total_load_pt_kwh"};
      const EquilibriumReport c = solve_followers(base, cgt);
      const double cgt_load = total(c.profile);
      if (!c.converged) table.failures.push_back("cgt equilibrium did not converge");
      for (double r : axis)
        tasks.push_back([&, r, cgt_load] {
          const EquilibriumReport p =
              solve_followers(detail::with_reference(base, r), pt);
          detail::PointResult out;
          out.rows.push_back({r, cgt_load, total(p.profile)});
          if (!p.converged) out.failure = fmt_fail("pt", "r=" + format_number(r));
          return out;
        });
      break;
    }
    case SweepKind::Lambda: {
      table.header = {"lambda", "r", "total_load_kwh"};
      for (double lam : spec.lambdas)
        for (double r : axis)
          tasks.push_back([&, lam, r] {
            const EquilibriumReport p = solve_followers(
                detail::with_reference(detail::with_lambda(base, lam), r), pt);
            detail::PointResult out;
            out.rows.push_back({lam, r, total(p.profile)});
            if (!p.converged)
              out.failure = fmt_fail("pt", "lambda=" + format_number(lam) +
                                               " r=" + format_number(r));
            return out;
          });
      break;
    }
    case SweepKind::ProfitGap: {
      table.header = {"r", "profit_pt_aware_usd", "profit_cgt_assuming_usd"};
      // The CGT leader ignores R, so its price is fixed across the sweep.
      const StackelbergResult cgt_leader = epsilon_se_grid(base, spec.epsilon, cgt);
      const double cgt_price = cgt_leader.rho_star;
      if (cgt_leader.failed_points)
        table.failures.push_back("cgt leader grid had non-converged points");
      for (double r : axis)
        tasks.push_back([&, r, cgt_price] {
          const Scenario at = detail::with_reference(base, r);
          const StackelbergResult aware = epsilon_se_grid(at, spec.epsilon, pt);
          // Same grid, same evaluation path: look the CGT price up.
          double naive = std::numeric_limits<double>::quiet_NaN();
          bool naive_ok = false;
          for (const auto& g : aware.grid)
            if (g.rho_base == cgt_price) {
              naive = g.profit;
              naive_ok = g.converged;
            }
          detail::PointResult out;
          out.rows.push_back({r, aware.leader_profit, naive});
          if (aware.failed_points || !naive_ok)
            out.failure = fmt_fail("pt followers", "r=" + format_number(r));
          return out;
        });
      break;
    }
    case SweepKind::Population: {
      table.header = {"n", "total_load_cgt_kwh", "total_load_pt_kwh"};
      for (double nd : axis)
        tasks.push_back([&, nd] {
          const Scenario s =
              scenario_with_population(cfg, static_cast<std::size_t>(nd));
          const EquilibriumReport c = solve_followers(s, cgt);
          const EquilibriumReport p = solve_followers(s, pt);
          detail::PointResult out;
          out.rows.push_back({nd, total(c.profile), total(p.profile)});
          if (!c.converged || !p.converged)
            out.failure = fmt_fail("follower game", "n=" + format_number(nd));
          return out;
        });
      break;
    }
    case SweepKind::PriceResponse: {
      table.header = {"rho_base_usd_per_kwh", "group", "group_load_kwh"};
      table.text_column = 1;
      // Three equal groups by index: expected-utility, R = $1, R = $3.
      Scenario grouped = base;
      const std::size_t n = grouped.size();
      std::vector<int> group(n);
      for (std::size_t i = 0; i < n; ++i) {
        group[i] = static_cast<int>(3 * i / n);
        auto& pp = grouped.prosumers[i].prospect;
        if (group[i] == 0) {
          pp.lambda = 1.0;
          pp.beta_plus = pp.beta_minus = 1.0;
          pp.reference = 0.0;
        } else {
          pp.reference = group[i] == 1 ? 1.0 : 3.0;
        }
      }
      for (double rho : axis)
        tasks.push_back([&, rho, group, grouped] {
          const EquilibriumReport p =
              solve_followers(grouped.with_base_price(rho), pt);
          double load[3] = {0.0, 0.0, 0.0};
          for (std::size_t i = 0; i < p.profile.size(); ++i)
            load[group[i]] += p.profile[i];
          detail::PointResult out;
          const char* names[3] = {"cgt", "r1", "r3"};
          for (int g = 0; g < 3; ++g) {
            out.rows.push_back({rho, load[g]});
            out.text.emplace_back(names[g]);
          }
          if (!p.converged)
            out.failure = fmt_fail("pt", "rho_base=" + format_number(rho));
          return out;
        });
      break;
    }
    case SweepKind::Convergence: {
      table.header = {"n", "iterations", "converged"};
      for (double nd : axis)
        tasks.push_back([&, nd] {
          const Scenario s =
              scenario_with_population(cfg, static_cast<std::size_t>(nd));
          const EquilibriumReport p = solve_followers(s, pt);
          detail::PointResult out;
          out.rows.push_back({nd, static_cast<double>(p.iterations),
                              p.converged ? 1.0 : 0.0});
          if (!p.converged) out.failure = fmt_fail("pt", "n=" + format_number(nd));
          return out;
        });
      break;
    }
  }

  std::vector<detail::PointResult> results(tasks.size());
  prosumer::detail::parallel_for(tasks.size(), spec.jobs,
                                 [&](std::size_t i) { results[i] = tasks[i](); });
  for (auto& r : results) {
    for (auto& row : r.rows) table.numeric.push_back(std::move(row));
    for (auto& t : r.text) table.text.push_back(std::move(t));
    if (!r.failure.empty()) table.failures.push_back(r.failure);
  }
  return table;
}

}  // namespace prosumer::experiments
