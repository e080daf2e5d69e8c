#pragma once

// Follower equilibria when prosumers frame payoffs prospect-theoretically.
// No closed-form best response exists; the objective is maximized piecewise
// between the points where the reference crosses the payoff range.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "prosumer/cgt.hpp"
#include "prosumer/golden.hpp"
#include "prosumer/market.hpp"
#include "prosumer/prospect.hpp"

namespace prosumer {

enum class FollowerModel { Cgt, Pt };

[[nodiscard]] inline const char* to_string(FollowerModel m) {
  return m == FollowerModel::Cgt ? "cgt" : "pt";
}

struct PtSearchSettings {
  std::size_t coarse_points = 512;
  double refine_tol = 1e-9;
  std::size_t max_sweeps = 500;
  double step_tol = 1e-9;
  /// Grid size per player for the post-hoc epsilon-NE certificate.
  std::size_t certificate_points = 10'000;
  std::optional<ActionProfile> initial_profile{};

  void validate() const {
    if (coarse_points < 64)
      throw std::invalid_argument("coarse_points must be >= 64");
    if (!(refine_tol > 0.0) || !(step_tol > 0.0))
      throw std::invalid_argument("tolerances must be > 0");
    if (max_sweeps < 1) throw std::invalid_argument("max_sweeps must be >= 1");
    if (certificate_points < 2)
      throw std::invalid_argument("certificate_points must be >= 2");
  }
};

/// Payoff of player n choosing y while the others sum to xbar.
[[nodiscard]] inline double follower_utility(FollowerModel model,
                                             const Scenario& s, std::size_t n,
                                             double y, double xbar) {
  return model == FollowerModel::Cgt
             ? cgt_expected_utility(s.prosumers[n], y, xbar, s.market)
             : pt_expected_utility(s.prosumers[n], y, xbar, s.market);
}

/// Points strictly inside the box where R = c rho_min + d or
/// R = c rho_max + d, i.e. where the closed form switches regime.
[[nodiscard]] inline std::vector<double> pt_breakpoints(
    const ProsumerParams& pr, double others_sum, const MarketParams& m,
    Bounds bounds) {
  std::vector<double> out;
  const double a = m.alpha;
  const double k = pr.net_position();
  const double r = pr.prospect.reference;
  for (double rho : {m.rho_min, m.rho_max}) {
    const double lin = rho - m.rho_base - a * others_sum;
    const double disc = lin * lin + 4.0 * a * (k * rho - r);
    if (disc < 0.0) continue;
    const double sq = std::sqrt(disc);
    for (double root : {(lin - sq) / (2.0 * a), (lin + sq) / (2.0 * a)})
      if (root > bounds.lo && root < bounds.hi) out.push_back(root);
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

/// U(to) - U(from) for one prosumer. A plain difference loses everything to
/// cancellation once the payoffs dwarf the change, so small changes are
/// integrated from the analytic slope instead, piecewise between breakpoints.
[[nodiscard]] inline double pt_utility_change(const ProsumerParams& pr,
                                              double from, double to,
                                              double others_sum,
                                              const MarketParams& m) {
  if (from == to) return 0.0;
  const double u_to = pt_expected_utility(pr, to, others_sum, m);
  const double u_from = pt_expected_utility(pr, from, others_sum, m);
  const double direct = u_to - u_from;
  if (std::abs(direct) >= 1e-6 * (std::abs(u_to) + std::abs(u_from)))
    return direct;

  static constexpr double node[] = {0.1834346424956498, 0.5255324099163290,
                                    0.7966664774136267, 0.9602898564975363};
  static constexpr double weight[] = {0.3626837833783620, 0.3137066458778873,
                                      0.2223810344533745, 0.1012285362903763};
  const double a = std::min(from, to), b = std::max(from, to);
  std::vector<double> cuts{a};
  for (double x : pt_breakpoints(pr, others_sum, m, {a, b})) cuts.push_back(x);
  cuts.push_back(b);
  double sum = 0.0;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    const double mid = 0.5 * (cuts[i] + cuts[i + 1]);
    const double half = 0.5 * (cuts[i + 1] - cuts[i]);
    for (int k = 0; k < 4; ++k)
      sum += half * weight[k] *
             (pt_expected_utility_slope(pr, mid - half * node[k], others_sum, m) +
              pt_expected_utility_slope(pr, mid + half * node[k], others_sum, m));
  }
  return to > from ? sum : -sum;
}

/// Global maximizer of the framed utility over the box. Each smooth segment
/// gets a coarse grid; every coarse local maximum is refined by golden
/// section and then polished by bisection on the analytic slope. Exact ties
/// go to the smaller action.
[[nodiscard]] inline double best_response_pt(const ProsumerParams& pr,
                                             double others_sum,
                                             const MarketParams& m,
                                             Bounds bounds,
                                             const PtSearchSettings& settings = {}) {
  if (!(bounds.lo <= bounds.hi))
    throw std::invalid_argument("best_response_pt: empty bounds");
  if (bounds.width() == 0.0) return bounds.lo;

  auto f = [&](double x) { return pt_expected_utility(pr, x, others_sum, m); };
  auto slope = [&](double x) {
    return pt_expected_utility_slope(pr, x, others_sum, m);
  };

  std::vector<double> cuts{bounds.lo};
  for (double b : pt_breakpoints(pr, others_sum, m, bounds)) cuts.push_back(b);
  cuts.push_back(bounds.hi);

  double best_x = bounds.lo;
  double best_f = f(bounds.lo);
  auto offer = [&](double x, double v) {
    if (v > best_f || (v == best_f && x < best_x)) {
      best_x = x;
      best_f = v;
    }
  };

  const double box = bounds.width();
  std::vector<double> xs, fs;
  for (std::size_t seg = 0; seg + 1 < cuts.size(); ++seg) {
    const double a = cuts[seg], b = cuts[seg + 1];
    if (!(b > a)) continue;
    const auto points = std::max<std::size_t>(
        8, static_cast<std::size_t>(std::ceil(
               static_cast<double>(settings.coarse_points) * (b - a) / box)));
    xs = linspace(a, b, points);
    fs.resize(points);
    for (std::size_t i = 0; i < points; ++i) {
      fs[i] = f(xs[i]);
      offer(xs[i], fs[i]);
    }
    for (std::size_t i = 0; i < points; ++i) {
      const bool left_ok = i == 0 || fs[i] >= fs[i - 1];
      const bool right_ok = i + 1 == points || fs[i] >= fs[i + 1];
      if (!left_ok || !right_ok) continue;
      const double lo = xs[i == 0 ? 0 : i - 1];
      const double hi = xs[i + 1 == points ? i : i + 1];
      if (!(hi > lo)) continue;
      const ScalarOptimum g =
          golden_section_maximize(f, lo, hi, settings.refine_tol);
      // Function values resolve the optimum only to ~sqrt(eps), and near it
      // they differ by rounding noise; the slope root replaces the golden
      // estimate whenever it is bracketed.
      const double w = std::max(settings.refine_tol, 1e-6 * (hi - lo));
      const double pl = std::max(lo, g.x - w), pr_ = std::min(hi, g.x + w);
      if (slope(pl) > 0.0 && slope(pr_) < 0.0) {
        const double xb = bisect_slope(slope, pl, pr_);
        offer(xb, f(xb));
      } else if (slope(lo) > 0.0 && slope(hi) < 0.0) {
        const double xb = bisect_slope(slope, lo, hi);
        offer(xb, f(xb));
      } else {
        offer(g.x, g.value);
      }
    }
  }
  return best_x;
}

[[nodiscard]] inline double best_response(FollowerModel model,
                                          const Scenario& s, std::size_t n,
                                          double xbar,
                                          const PtSearchSettings& settings) {
  const ProsumerParams& p = s.prosumers[n];
  return model == FollowerModel::Cgt
             ? best_response_cgt(xbar, s.market, feasible_bounds(p))
             : best_response_pt(p, xbar, s.market, feasible_bounds(p), settings);
}

/// Nikaido-Isoda function with framed utilities in place of expectations.
[[nodiscard]] inline double nikaido_isoda_pt(std::span<const double> x,
                                             std::span<const double> y,
                                             const Scenario& s) {
  if (x.size() != y.size() || x.size() != s.size())
    throw std::invalid_argument("profile lengths do not match scenario");
  const double sum = total(x);
  double psi = 0.0;
  for (std::size_t n = 0; n < x.size(); ++n) {
    const double xbar = sum - x[n];
    psi += pt_utility_change(s.prosumers[n], x[n], y[n], xbar, s.market);
  }
  return psi;
}

/// Largest gain any single player finds on a uniform grid of its box
/// (its current action included), never negative.
[[nodiscard]] inline double grid_deviation_epsilon(std::span<const double> x,
                                                   const Scenario& s,
                                                   FollowerModel model,
                                                   std::size_t points) {
  const double sum = total(x);
  double eps = 0.0;
  for (std::size_t n = 0; n < x.size(); ++n) {
    const double xbar = sum - x[n];
    const double here = follower_utility(model, s, n, x[n], xbar);
    const Bounds b = feasible_bounds(s.prosumers[n]);
    const double h = b.width() / static_cast<double>(points - 1);
    for (std::size_t i = 0; i < points; ++i) {
      const double y = i + 1 == points ? b.hi : b.lo + h * static_cast<double>(i);
      eps = std::max(eps, follower_utility(model, s, n, y, xbar) - here);
    }
  }
  return eps;
}

/// The relaxation dynamics of relaxation_solve, driven by the numerical PT
/// best response.
/// Concavity is checked at every visited profile and recorded in the report.
[[nodiscard]] inline EquilibriumReport relaxation_solve_pt(
    const Scenario& s, const RelaxationSettings& settings = {},
    const PtSearchSettings& search = {}) {
  s.validate();
  settings.validate();
  search.validate();
  EquilibriumReport report;
  ActionProfile x = detail::initial_profile(s, settings);
  const std::vector<Bounds> boxes = feasible_bounds(s);
  ActionProfile br(x.size());
  bool concave_everywhere = true;

  for (std::size_t t = 1;; ++t) {
    const double sum = total(x);
    for (std::size_t n = 0; n < x.size(); ++n) {
      const ProsumerParams& p = s.prosumers[n];
      const Bounds b = feasible_bounds(p);
      br[n] = best_response_pt(p, sum - x[n], s.market, b, search);
      if (concave_everywhere &&
          !classify_concavity(p, sum - x[n], s.market, b).concave())
        concave_everywhere = false;
    }
    const double residual = nikaido_isoda_pt(x, br, s);
    detail::record_trace(report.residual_trace, t, residual,
                         settings.trace_stride);
    report.final_residual = residual;
    if (residual <= settings.tol) {
      report.converged = true;
      break;
    }
    if (t > settings.max_iters) break;
    const double step = 1.0 / std::sqrt(static_cast<double>(t));
    for (std::size_t n = 0; n < x.size(); ++n)
      x[n] = boxes[n].clamp((1.0 - step) * x[n] + step * br[n]);
    report.iterations = t;
  }
  if (report.residual_trace.back().t != report.iterations + 1)
    report.residual_trace.push_back({report.iterations + 1,
                                     report.final_residual});
  report.concavity_guaranteed = concave_everywhere;
  report.profile = std::move(x);
  return report;
}

/// Round-robin best responses in ascending index order; one iteration is one
/// full sweep. The trace records the sup-norm profile change of each sweep.
/// Converged profiles carry a grid epsilon-NE certificate.
[[nodiscard]] inline EquilibriumReport sequential_best_response(
    const Scenario& s, const PtSearchSettings& settings = {},
    FollowerModel model = FollowerModel::Pt) {
  s.validate();
  settings.validate();
  EquilibriumReport report;
  ActionProfile x = box_midpoint(s);
  if (settings.initial_profile) {
    if (settings.initial_profile->size() != s.size())
      throw std::invalid_argument("initial profile length does not match");
    x = project_onto_box(*settings.initial_profile, s);
  }

  double sum = total(x);
  for (std::size_t sweep = 1; sweep <= settings.max_sweeps; ++sweep) {
    double change = 0.0;
    for (std::size_t n = 0; n < x.size(); ++n) {
      const double y = best_response(model, s, n, sum - x[n], settings);
      change = std::max(change, std::abs(y - x[n]));
      sum += y - x[n];
      x[n] = y;
    }
    // Re-sum to keep rounding drift out of the running total.
    sum = total(x);
    report.iterations = sweep;
    report.residual_trace.push_back({sweep, change});
    report.final_residual = change;
    if (change <= settings.step_tol) {
      report.converged = true;
      break;
    }
  }
  if (report.converged)
    report.epsilon =
        grid_deviation_epsilon(x, s, model, settings.certificate_points);
  report.profile = std::move(x);
  return report;
}

}  // namespace prosumer
