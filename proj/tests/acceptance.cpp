// Acceptance checks 1-13. Prints one line per criterion and exits non-zero
// if any fails.

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "prosumer/cgt.hpp"
#include "prosumer/experiments/config.hpp"
#include "prosumer/experiments/sweeps.hpp"
#include "prosumer/followers.hpp"
#include "prosumer/prospect.hpp"
#include "prosumer/pt_solver.hpp"
#include "prosumer/stackelberg.hpp"

using namespace prosumer;
using namespace prosumer::experiments;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

double sup_diff(const ActionProfile& a, const ActionProfile& b) {
  double d = 0;
  for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
  return d;
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

struct Outcome {
  bool pass;
  std::string detail;
};

int failures = 0;

void report(int id, const Outcome& o) {
  std::printf("criterion %2d %s  %s\n", id, o.pass ? "PASS" : "FAIL", o.detail.c_str());
  std::fflush(stdout);
  if (!o.pass) ++failures;
}

// Converged CGT equilibria from criteria 1-4, re-certified in criterion 5.
std::vector<std::pair<Scenario, ActionProfile>> cgt_equilibria;

RelaxationSettings tight() {
  RelaxationSettings s;
  s.tol = 1e-20;
  return s;
}

void keep(const Scenario& s, const EquilibriumReport& r) {
  if (r.converged) cgt_equilibria.emplace_back(s, r.profile);
}

Outcome c1_closed_form() {
  const Scenario s = oracle::symmetric_pair();
  const auto t0 = Clock::now();
  const EquilibriumReport r = relaxation_solve(s, tight());
  const double secs = seconds_since(t0);
  keep(s, r);
  const double err = std::max(std::abs(r.profile[0] + 0.1), std::abs(r.profile[1] + 0.1));
  return {err <= 1e-8 && secs < 1.0,
          "max |x + 0.1| = " + fmt("%.2e", err) + ", " + fmt("%.4f", secs) + " s"};
}

Outcome c2_uniqueness() {
  std::mt19937_64 gen(2002);
  std::uniform_real_distribution<double> u(0, 1);
  double worst = 0;
  for (int sc = 0; sc < 10; ++sc) {
    const Scenario s = oracle::random_scenario(gen, 2 + sc % 8);
    std::vector<ActionProfile> found;
    for (int init = 0; init < 20; ++init) {
      RelaxationSettings st = tight();
      ActionProfile x0;
      for (const auto& b : feasible_bounds(s)) x0.push_back(b.lo + u(gen) * b.width());
      st.initial_profile = x0;
      const EquilibriumReport r = relaxation_solve(s, st);
      keep(s, r);
      found.push_back(r.profile);
    }
    for (std::size_t i = 0; i < found.size(); ++i)
      for (std::size_t j = i + 1; j < found.size(); ++j)
        worst = std::max(worst, sup_diff(found[i], found[j]));
  }
  return {worst <= 1e-6, "max pairwise sup-norm gap " + fmt("%.2e", worst) +
                             " over 10 scenarios x 20 starts"};
}

Outcome c3_rate() {
  std::mt19937_64 gen(3003);
  const Scenario s = oracle::random_scenario(gen, 9);
  RelaxationSettings st;
  st.tol = 1e-300;
  st.max_iters = 100'000;
  const EquilibriumReport r = relaxation_solve(s, st);
  keep(s, r);
  double r100 = -1;
  for (const auto& p : r.residual_trace)
    if (p.t == 100) r100 = p.residual;
  if (r100 < 0) return {false, "trace ended before t = 100"};
  std::size_t checked = 0, violations = 0;
  for (const auto& p : r.residual_trace) {
    if (p.t < 100 || p.t > 100'000) continue;
    ++checked;
    const double bound = r100 * std::pow(static_cast<double>(p.t) / 100.0, -0.25);
    if (p.residual > bound) ++violations;
  }
  return {violations == 0,
          "residual(100) = " + fmt("%.3e", r100) + ", " + std::to_string(checked) +
              " logged t checked, " + std::to_string(violations) + " above bound"};
}

Outcome c4_brute_force() {
  std::mt19937_64 gen(4004);
  const auto t0 = Clock::now();
  double worst_cells = 0;
  for (int rep = 0; rep < 5; ++rep) {
    const Scenario s = oracle::random_scenario(gen, 2);
    const GridEquilibrium g = brute_force_ne(s, 501);
    const EquilibriumReport r = relaxation_solve(s, tight());
    keep(s, r);
    const double h = 25.0 / 500.0;
    worst_cells = std::max(worst_cells, sup_diff(g.profile, r.profile) / h);
  }
  const double secs = seconds_since(t0);
  return {worst_cells <= 1.0 + 1e-9 && secs < 30.0,
          "max distance " + fmt("%.3f", worst_cells) + " grid cells, " +
              fmt("%.1f", secs) + " s"};
}

Outcome c5_kkt() {
  double worst = 0;
  std::size_t passed = 0;
  for (const auto& [s, x] : cgt_equilibria) {
    const KKTCertificate k = kkt_verify(x, s, 1e-6);
    worst = std::max({worst, k.stationarity_residual, k.complementarity_residual,
                      std::abs(k.duality_gap)});
    if (k.passed) ++passed;
  }
  return {passed == cgt_equilibria.size() && worst <= 1e-6 && !cgt_equilibria.empty(),
          std::to_string(passed) + "/" + std::to_string(cgt_equilibria.size()) +
              " certified, worst residual " + fmt("%.2e", worst)};
}

Outcome c6_pt_closed_form() {
  std::mt19937_64 gen(6006);
  std::uniform_real_distribution<double> u(0, 1);
  std::array<int, 4> branches{};
  int misses = 0;
  double worst_z = 0;
  for (int rep = 0; rep < 100; ++rep) {
    ProsumerParams p;
    p.l = 10 + 20 * u(gen);
    p.w = 10 + 20 * u(gen);
    p.q = 10 * u(gen);
    p.prospect.lambda = 1 + 4 * u(gen);
    p.prospect.beta_plus = 0.3 + 0.7 * u(gen);
    p.prospect.beta_minus = 0.3 + 0.7 * u(gen);
    MarketParams m;
    m.alpha = 0.02 + 0.2 * u(gen);
    m.rho_min = 0.05 * u(gen);
    m.rho_max = m.rho_min + 0.02 + 0.1 * u(gen);
    m.rho_base = 0.12 * u(gen);
    const Bounds b = feasible_bounds(p);
    // Every tenth configuration sells everything (no stored energy left).
    const double x = rep % 10 == 0 ? b.lo : b.lo + u(gen) * b.width();
    const double xbar = -20 + 40 * u(gen);
    const PtUtilityTerms t = pt_terms(p, x, xbar, m);
    const double lo = t.c * m.rho_min + t.d, hi = t.c * m.rho_max + t.d;
    const double span = std::max(hi - lo, 0.1);
    // Cycle the reference through gain, mixed and loss placements.
    const double pos[] = {-0.5 - u(gen), u(gen), 1.5 + u(gen)};
    p.prospect.reference = lo + span * pos[rep % 3];
    ++branches[static_cast<int>(pt_branch(t, m, p.prospect))];
    const double closed = pt_expected_utility(p, x, xbar, m);
    const MonteCarloEstimate mc =
        pt_expected_utility_mc(p, x, xbar, m, 1'000'000, 6000 + rep);
    if (mc.std_error == 0.0) {
      if (closed != mc.value) ++misses;
      continue;
    }
    const double z = std::abs(closed - mc.value) / mc.std_error;
    worst_z = std::max(worst_z, z);
    if (z > 3.0) ++misses;
  }
  // Branch-boundary continuity.
  double jump = 0;
  for (int rep = 0; rep < 100; ++rep) {
    MarketParams m;
    m.rho_min = 0.0;
    m.rho_max = 0.1;
    const double c = 0.1 + 30 * u(gen), d = -2 + 4 * u(gen);
    ProspectParams pp;
    pp.lambda = 1 + 4 * u(gen);
    pp.beta_plus = 0.2 + 0.8 * u(gen);
    pp.beta_minus = 0.2 + 0.8 * u(gen);
    for (double rho : {m.rho_min, m.rho_max}) {
      const double edge = c * rho + d;
      ProspectParams a = pp, bb = pp;
      a.reference = std::nextafter(edge, -INFINITY);
      bb.reference = std::nextafter(edge, INFINITY);
      const PtUtilityTerms t{c, d, m.price_spread()};
      jump = std::max(jump, std::abs(pt_expected_utility(t, m, a) -
                                     pt_expected_utility(t, m, bb)));
    }
  }
  const bool all_branches = branches[0] && branches[1] && branches[2] && branches[3];
  return {misses == 0 && jump <= 1e-9 && all_branches,
          std::to_string(misses) + "/100 outside 3 SE (max z " + fmt("%.2f", worst_z) +
              "), branches gain/mixed/loss/c=0 = " + std::to_string(branches[0]) + "/" +
              std::to_string(branches[1]) + "/" + std::to_string(branches[2]) + "/" +
              std::to_string(branches[3]) + ", max boundary jump " + fmt("%.1e", jump)};
}

Outcome c7_reductions() {
  // Pointwise identity.
  std::mt19937_64 gen(7007);
  std::uniform_real_distribution<double> u(0, 1);
  double worst_identity = 0;
  for (int rep = 0; rep < 1000; ++rep) {
    Scenario s = oracle::random_scenario(gen, 3);
    ProsumerParams p = s.prosumers[0];
    p.prospect = {1.0, 1.0, 1.0, -5 + 10 * u(gen)};
    const Bounds b = feasible_bounds(p);
    const double x = rep % 10 == 0 ? b.lo : b.lo + u(gen) * b.width();
    const double xbar = -20 + 40 * u(gen);
    worst_identity = std::max(
        worst_identity, std::abs(pt_expected_utility(p, x, xbar, s.market) -
                                 (cgt_expected_utility(p, x, xbar, s.market) -
                                  p.prospect.reference)));
  }
  // Three solvers on the default scenario with neutral framing.
  Scenario s = load_scenario();
  for (auto& p : s.prosumers) p.prospect = {1.0, 1.0, 1.0, 1.0};
  const EquilibriumReport cgt = relaxation_solve(s, tight());
  RelaxationSettings rs;
  rs.tol = 1e-14;
  const EquilibriumReport ptr = relaxation_solve_pt(s, rs);
  const EquilibriumReport seq = sequential_best_response(s);
  const double solvers = std::max(sup_diff(cgt.profile, ptr.profile),
                                  sup_diff(cgt.profile, seq.profile));
  // Extreme references with the default curved framing.
  double tails = 0;
  for (double r : {-1e6, 1e6}) {
    Scenario t = load_scenario();
    for (auto& p : t.prosumers) p.prospect.reference = r;
    tails = std::max(tails, sup_diff(sequential_best_response(t).profile,
                                     relaxation_solve(t, tight()).profile));
  }
  return {worst_identity <= 1e-10 && solvers <= 1e-6 && tails <= 1e-6 &&
              ptr.converged && seq.converged,
          "identity " + fmt("%.1e", worst_identity) + ", solver spread " +
              fmt("%.1e", solvers) + ", R = +-1e6 gap " + fmt("%.1e", tails)};
}

Outcome c8_classifier() {
  std::mt19937_64 gen(8008);
  std::uniform_real_distribution<double> u(0, 1);
  std::array<int, 3> by_case{};
  double worst = -INFINITY;
  int classified = 0;
  for (int rep = 0; rep < 20000 && classified < 50; ++rep) {
    Scenario s = oracle::random_scenario(gen, 3);
    ProsumerParams p = s.prosumers[0];
    p.prospect = {1.5 + 3 * u(gen), 1.0, 1.0, 0.0};
    const double xbar = -20 + 40 * u(gen);
    // All gains, all losses, or a reference inside the payoff range.
    const double pick[] = {-500 + 300 * u(gen), 30 + 60 * u(gen), -3 + 6 * u(gen)};
    p.prospect.reference = pick[rep % 3];
    const Bounds b = feasible_bounds(p);
    const ConcavityCaseReport r = classify_concavity(p, xbar, s.market, b);
    if (r.case_id == ConcavityCase::Unclassified) continue;
    ++classified;
    ++by_case[static_cast<int>(r.case_id)];
    const std::size_t n = 1000;
    const double h = b.width() / static_cast<double>(n - 1);
    auto f = [&](double x) { return pt_expected_utility(p, x, xbar, s.market); };
    for (std::size_t i = 1; i + 1 < n; ++i) {
      const double x = b.lo + h * static_cast<double>(i);
      worst = std::max(worst, f(x - h) - 2 * f(x) + f(x + h));
    }
  }
  return {classified == 50 && worst <= 1e-6,
          std::to_string(classified) + " instances (case1/2/3 = " +
              std::to_string(by_case[0]) + "/" + std::to_string(by_case[1]) + "/" +
              std::to_string(by_case[2]) + "), max second difference " +
              fmt("%.2e", worst)};
}

Outcome c9_monopoly() {
  const Scenario s = oracle::monopoly();
  FollowerSettings f = FollowerSettings::defaults_for(FollowerModel::Cgt);
  f.relaxation.tol = 1e-20;
  const StackelbergResult r = epsilon_se_grid(s, 1e-3, f);
  const SeVerification v = verify_se(r, s, f, 1e-3);
  const bool ok = std::abs(r.rho_star - 0.03) <= 1e-3 &&
                  std::abs(r.leader_profit - 0.001) <= 1e-5 && v.passed;
  return {ok, "rho* = " + fmt("%.4f", r.rho_star) + ", profit = " +
                  fmt("%.7f", r.leader_profit) + ", verify " + (v.passed ? "pass" : "fail")};
}

SweepTable reference_sweep;

double argmin_reference = 0;

Outcome c10_reference_shape() {
  SweepSpec spec;
  spec.kind = SweepKind::Reference;
  reference_sweep = run_sweep(spec, ScenarioConfig{});
  const auto& rows = reference_sweep.numeric;
  const double cgt = rows.front()[1];
  double lo = INFINITY, hi = -INFINITY;
  for (std::size_t i = 1; i + 1 < rows.size(); ++i) {
    if (rows[i][2] < lo) {
      lo = rows[i][2];
      argmin_reference = rows[i][0];
    }
    hi = std::max(hi, rows[i][2]);
  }
  const double end0 = (rows.front()[2] - cgt) / std::abs(cgt);
  const double end1 = (rows.back()[2] - cgt) / std::abs(cgt);
  const double dip = (lo - cgt) / std::abs(cgt);
  const double rise = (hi - cgt) / std::abs(cgt);
  const bool ok = reference_sweep.all_converged() && std::abs(end0) <= 0.02 &&
                  std::abs(end1) <= 0.02 && dip <= -0.05 && hi > cgt;
  return {ok, "CGT load " + fmt("%.4f", cgt) + " kWh; ends " + fmt("%+.2f%%", 100 * end0) +
                  " / " + fmt("%+.2f%%", 100 * end1) + "; min " + fmt("%+.1f%%", 100 * dip) +
                  " at R = " + fmt("%g", argmin_reference) + "; max " +
                  fmt("%+.1f%%", 100 * rise)};
}

Outcome c11_profit_gap() {
  SweepSpec spec;
  spec.kind = SweepKind::ProfitGap;
  std::vector<double> axis = SweepSpec::default_axis(spec.kind);
  if (std::find(axis.begin(), axis.end(), argmin_reference) == axis.end()) {
    axis.push_back(argmin_reference);
    std::sort(axis.begin(), axis.end());
  }
  spec.axis = axis;
  const SweepTable t = run_sweep(spec, ScenarioConfig{});
  double worst = INFINITY, gap_at_min = 0;
  for (const auto& row : t.numeric) {
    worst = std::min(worst, row[1] - row[2]);
    if (row[0] == argmin_reference) gap_at_min = (row[1] - row[2]) / std::abs(row[1]);
  }
  return {t.all_converged() && worst >= -1e-9 && gap_at_min > 0.01,
          std::to_string(t.rows()) + " R values, min(aware - naive) = " +
              fmt("%.2e", worst) + ", gap at R = " + fmt("%g", argmin_reference) + ": " +
              fmt("%.1f%%", 100 * gap_at_min)};
}

Outcome c12_population() {
  const auto t0 = Clock::now();
  std::ostringstream detail;
  bool ok = true;
  for (std::size_t n : {10, 30, 50, 70}) {
    const Scenario s = scenario_with_population(ScenarioConfig{}, n);
    const EquilibriumReport r = sequential_best_response(s);
    const double eps = r.epsilon.value_or(INFINITY);
    ok = ok && r.converged && r.iterations <= 500 && eps <= 1e-4;
    detail << "N=" << n << ": ";
    if (r.converged) {
      detail << r.iterations << " sweeps, eps " << fmt("%.1e", eps) << "; ";
    } else {
      // Report how many sweeps it actually takes.
      PtSearchSettings uncapped;
      uncapped.max_sweeps = 100'000;
      const EquilibriumReport u = sequential_best_response(s, uncapped);
      detail << "not within " << r.iterations << " sweeps (needs " << u.iterations
             << ", eps " << fmt("%.1e", u.epsilon.value_or(INFINITY)) << "); ";
    }
  }
  const double secs = seconds_since(t0);
  detail << fmt("%.1f", secs) << " s";
  return {ok && secs < 300.0, detail.str()};
}

std::string csv_text(const SweepTable& t) {
  std::ostringstream out;
  write_csv(t, out);
  return out.str();
}

Outcome c13_determinism() {
  int identical = 0, total = 0;
  // The full default reference sweep, rerun with threads.
  {
    SweepSpec spec;
    spec.kind = SweepKind::Reference;
    spec.jobs = 3;
    ++total;
    identical += csv_text(run_sweep(spec, ScenarioConfig{})) == csv_text(reference_sweep);
  }
  // Every kind on a short axis, serial versus threaded, fixed seed.
  const std::vector<std::pair<SweepKind, std::vector<double>>> kinds = {
      {SweepKind::Reference, {-2, 0, 2, 4}},
      {SweepKind::Lambda, {0, 1, 2}},
      {SweepKind::ProfitGap, {0, 1}},
      {SweepKind::Population, {4, 8}},
      {SweepKind::PriceResponse, {-0.1, 0, 0.1}},
      {SweepKind::Convergence, {5, 10}},
  };
  for (const auto& [kind, axis] : kinds) {
    SweepSpec spec;
    spec.kind = kind;
    spec.axis = axis;
    spec.lambdas = {2, 6};
    spec.epsilon = 0.01;
    spec.seed = 1234;
    const std::string a = csv_text(run_sweep(spec, ScenarioConfig{}));
    spec.jobs = 2;
    const std::string b = csv_text(run_sweep(spec, ScenarioConfig{}));
    ++total;
    identical += a == b;
  }
  return {identical == total,
          std::to_string(identical) + "/" + std::to_string(total) + " sweeps byte-identical"};
}

}  // namespace

int main() {
  const std::vector<std::function<Outcome()>> checks = {
      c1_closed_form, c2_uniqueness,   c3_rate,           c4_brute_force,
      c5_kkt,         c6_pt_closed_form, c7_reductions,   c8_classifier,
      c9_monopoly,    c10_reference_shape, c11_profit_gap, c12_population,
      c13_determinism};
  for (std::size_t i = 0; i < checks.size(); ++i) {
    Outcome o;
    try {
      o = checks[i]();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    report(static_cast<int>(i + 1), o);
  }
  std::printf("%d of 13 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
