#pragma once

// Followers' equilibrium under expected-utility (CGT) behaviour: closed-form
// best responses, the relaxation learning dynamics, Nikaido-Isoda residuals,
// a KKT certificate and an exhaustive grid oracle for small games.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "prosumer/market.hpp"

namespace prosumer {

struct RelaxationSettings {
  std::size_t max_iters = 1'000'000;
  double tol = 1e-8;
  /// Starting profile; box midpoints when empty.
  std::optional<ActionProfile> initial_profile{};
  /// Record every trace_stride-th residual (the first and last are always
  /// recorded).
  std::size_t trace_stride = 1;

  void validate() const {
    if (max_iters < 1) throw std::invalid_argument("max_iters must be >= 1");
    if (!(tol > 0.0)) throw std::invalid_argument("tol must be > 0");
    if (trace_stride < 1)
      throw std::invalid_argument("trace_stride must be >= 1");
  }
};

struct TracePoint {
  std::size_t t = 0;
  double residual = 0.0;
};

struct EquilibriumReport {
  ActionProfile profile;
  /// Profile updates performed (relaxation steps or full sweeps).
  std::size_t iterations = 0;
  std::vector<TracePoint> residual_trace;
  bool converged = false;
  double final_residual = std::numeric_limits<double>::infinity();
  /// Largest unilateral grid-deviation gain at the returned profile, when a
  /// deviation certificate was computed.
  std::optional<double> epsilon{};
  /// PT relaxation only: every visited best response fell in a concavity case.
  std::optional<bool> concavity_guaranteed{};
};

/// Unconstrained maximizer -theta/(2 alpha) - xbar/2 clamped into the box.
[[nodiscard]] inline double best_response_cgt(double others_sum,
                                              const MarketParams& m,
                                              Bounds bounds) {
  return bounds.clamp(-m.theta() / (2.0 * m.alpha) - 0.5 * others_sum);
}

[[nodiscard]] inline ActionProfile project_onto_box(std::span<const double> x,
                                                    const Scenario& s) {
  if (x.size() != s.size())
    throw std::invalid_argument("profile length does not match scenario");
  ActionProfile out(x.size());
  for (std::size_t n = 0; n < x.size(); ++n)
    out[n] = feasible_bounds(s.prosumers[n]).clamp(x[n]);
  return out;
}

[[nodiscard]] inline ActionProfile box_midpoint(const Scenario& s) {
  ActionProfile out;
  out.reserve(s.size());
  for (const auto& p : s.prosumers) {
    const Bounds b = feasible_bounds(p);
    out.push_back(0.5 * (b.lo + b.hi));
  }
  return out;
}

/// Simultaneous best responses of all players to x.
[[nodiscard]] inline ActionProfile best_response_profile_cgt(
    std::span<const double> x, const Scenario& s) {
  const double sum = total(x);
  ActionProfile out(x.size());
  for (std::size_t n = 0; n < x.size(); ++n)
    out[n] = best_response_cgt(sum - x[n], s.market,
                               feasible_bounds(s.prosumers[n]));
  return out;
}

/// Psi(x, y) = sum_n [U_n(y_n, x_-n) - U_n(x_n, x_-n)], evaluated in the
/// factored form sum_n (x_n - y_n)(alpha (x_n + y_n) + theta + alpha xbar_n)
/// so that Psi(x, x) is exactly zero.
[[nodiscard]] inline double nikaido_isoda(std::span<const double> x,
                                          std::span<const double> y,
                                          const Scenario& s) {
  if (x.size() != y.size() || x.size() != s.size())
    throw std::invalid_argument("profile lengths do not match scenario");
  const MarketParams& m = s.market;
  const double sum = total(x);
  double psi = 0.0;
  for (std::size_t n = 0; n < x.size(); ++n) {
    const double xbar = sum - x[n];
    psi += (x[n] - y[n]) * (m.alpha * (x[n] + y[n]) + m.theta() + m.alpha * xbar);
  }
  return psi;
}

/// Psi(x, x^r(x)): zero exactly at the equilibrium, positive elsewhere.
[[nodiscard]] inline double ni_residual(std::span<const double> x,
                                        const Scenario& s) {
  const ActionProfile br = best_response_profile_cgt(x, s);
  return nikaido_isoda(x, br, s);
}

namespace detail {

/// Appends (t, r) if the stride asks for it.
inline void record_trace(std::vector<TracePoint>& trace, std::size_t t,
                         double r, std::size_t stride) {
  if (t == 1 || t % stride == 0) trace.push_back({t, r});
}

inline ActionProfile initial_profile(const Scenario& s,
                                     const RelaxationSettings& settings) {
  if (!settings.initial_profile) return box_midpoint(s);
  if (settings.initial_profile->size() != s.size())
    throw std::invalid_argument("initial profile length does not match");
  return project_onto_box(*settings.initial_profile, s);
}

}  // namespace detail

/// Relaxation learning: x(t+1) = (1 - 1/sqrt t) x(t) + (1/sqrt t) x^r(t),
/// all players updating simultaneously from t = 1. Stops once the
/// Nikaido-Isoda residual of the current iterate is at most tol.
[[nodiscard]] inline EquilibriumReport relaxation_solve(
    const Scenario& s, const RelaxationSettings& settings = {}) {
  s.validate();
  settings.validate();
  EquilibriumReport report;
  ActionProfile x = detail::initial_profile(s, settings);
  const std::vector<Bounds> boxes = feasible_bounds(s);

  for (std::size_t t = 1;; ++t) {
    const ActionProfile br = best_response_profile_cgt(x, s);
    const double residual = nikaido_isoda(x, br, s);
    detail::record_trace(report.residual_trace, t, residual,
                         settings.trace_stride);
    report.final_residual = residual;
    if (residual <= settings.tol) {
      report.converged = true;
      break;
    }
    if (t > settings.max_iters) break;
    const double step = 1.0 / std::sqrt(static_cast<double>(t));
    // The mix stays in the box exactly; clamping removes rounding drift,
    // which would otherwise give negative residual terms at active bounds.
    for (std::size_t n = 0; n < x.size(); ++n)
      x[n] = boxes[n].clamp((1.0 - step) * x[n] + step * br[n]);
    report.iterations = t;
  }
  if (report.residual_trace.empty() ||
      report.residual_trace.back().t != report.iterations + 1)
    report.residual_trace.push_back({report.iterations + 1,
                                     report.final_residual});
  report.profile = std::move(x);
  return report;
}

struct KKTCertificate {
  std::vector<double> mu;  ///< upper-bound multipliers
  std::vector<double> nu;  ///< lower-bound multipliers
  double stationarity_residual = 0.0;
  double complementarity_residual = 0.0;
  double duality_gap = 0.0;
  bool passed = false;
};

/// Per-player KKT certificate at a candidate equilibrium. Multipliers come
/// from the active set in closed form; the duality gap is measured on the
/// equivalent projection problem min ||z - (a + A x)||^2 over the box, whose
/// multipliers are the game multipliers divided by alpha.
[[nodiscard]] inline KKTCertificate kkt_verify(std::span<const double> x,
                                               const Scenario& s, double tol) {
  if (x.size() != s.size())
    throw std::invalid_argument("profile length does not match scenario");
  const MarketParams& m = s.market;
  const std::size_t n_players = x.size();
  const double sum = total(x);
  const double active_tol = std::max(tol, 1e-12);

  KKTCertificate cert;
  cert.mu.assign(n_players, 0.0);
  cert.nu.assign(n_players, 0.0);

  double dual_value = 0.0;
  double primal_value = 0.0;
  for (std::size_t n = 0; n < n_players; ++n) {
    const Bounds b = feasible_bounds(s.prosumers[n]);
    const double xbar = sum - x[n];
    const double grad = -2.0 * m.alpha * x[n] - m.theta() - m.alpha * xbar;
    if (std::abs(x[n] - b.hi) <= active_tol) cert.mu[n] = std::max(0.0, grad);
    if (std::abs(x[n] - b.lo) <= active_tol) cert.nu[n] = std::max(0.0, -grad);

    cert.stationarity_residual =
        std::max(cert.stationarity_residual,
                 std::abs(grad + cert.nu[n] - cert.mu[n]));
    cert.complementarity_residual =
        std::max({cert.complementarity_residual,
                  std::abs(cert.mu[n] * (x[n] - b.hi)),
                  std::abs(cert.nu[n] * (x[n] - b.lo))});

    const double target = -m.theta() / (2.0 * m.alpha) - 0.5 * xbar;
    const double w = (cert.mu[n] - cert.nu[n]) / m.alpha;
    dual_value += -0.25 * w * w + w * target - cert.mu[n] / m.alpha * b.hi +
                  cert.nu[n] / m.alpha * b.lo;
    primal_value += (x[n] - target) * (x[n] - target);
  }
  cert.duality_gap = std::abs(dual_value - primal_value);
  cert.passed = cert.stationarity_residual <= tol &&
                cert.complementarity_residual <= tol &&
                cert.duality_gap <= tol;
  return cert;
}

/// Uniform grid of `points` values spanning [lo, hi] inclusive.
[[nodiscard]] inline std::vector<double> linspace(double lo, double hi,
                                                  std::size_t points) {
  std::vector<double> out(points);
  if (points == 1) {
    out[0] = lo;
    return out;
  }
  const double h = (hi - lo) / static_cast<double>(points - 1);
  for (std::size_t i = 0; i < points; ++i)
    out[i] = lo + h * static_cast<double>(i);
  out.back() = hi;
  return out;
}

struct GridEquilibrium {
  ActionProfile profile;
  /// Worst unilateral gain over grid deviations at `profile`.
  double max_gain = 0.0;
  /// Discretization allowance 2 alpha h (h + D) with the coarsest h and
  /// the widest box D.
  double grid_bound = 0.0;
  bool accepted = false;
};

/// Exhaustive search over the product grid for the profile minimizing the
/// largest unilateral grid-deviation gain. `utility(n, y, others_sum)` is the
/// payoff of player n deviating to y. Only for up to three players.
template <class Utility>
[[nodiscard]] GridEquilibrium brute_force_grid_ne(const Scenario& s,
                                                  std::size_t points,
                                                  Utility&& utility) {
  const std::size_t n_players = s.size();
  if (n_players == 0 || n_players > 3)
    throw std::invalid_argument(
        "brute-force oracle supports 1 to 3 prosumers, got " +
        std::to_string(n_players));
  if (points < 11)
    throw std::invalid_argument("brute-force oracle needs >= 11 grid points");

  std::vector<std::vector<double>> grid;
  double h_max = 0.0, d_max = 0.0;
  for (const auto& p : s.prosumers) {
    const Bounds b = feasible_bounds(p);
    grid.push_back(linspace(b.lo, b.hi, points));
    h_max = std::max(h_max, b.width() / static_cast<double>(points - 1));
    d_max = std::max(d_max, b.width());
  }

  // Profiles are enumerated by a flat index; index digit n is player n's
  // grid position. best[n][j] caches player n's best grid payoff against
  // the others' configuration j (player n's own digit removed).
  std::size_t stride[3] = {1, 1, 1};
  std::size_t total_profiles = 1;
  for (std::size_t n = 0; n < n_players; ++n) {
    stride[n] = total_profiles;
    total_profiles *= points;
  }
  const std::size_t others_count = total_profiles / points;

  auto digit = [&](std::size_t flat, std::size_t n) {
    return (flat / stride[n]) % points;
  };
  auto others_index = [&](std::size_t flat, std::size_t n) {
    return (flat / (stride[n] * points)) * stride[n] + flat % stride[n];
  };
  auto fill = [&](std::size_t flat, std::array<double, 3>& x) {
    double sum = 0.0;
    for (std::size_t n = 0; n < n_players; ++n) {
      x[n] = grid[n][digit(flat, n)];
      sum += x[n];
    }
    return sum;
  };

  std::vector<std::vector<double>> best(n_players,
                                        std::vector<double>(others_count));
  for (std::size_t n = 0; n < n_players; ++n) {
    for (std::size_t j = 0; j < others_count; ++j) {
      // Reinsert a zero digit for player n to recover a flat index.
      const std::size_t flat =
          (j / stride[n]) * stride[n] * points + j % stride[n];
      std::array<double, 3> x{};
      const double xbar = fill(flat, x) - x[n];
      double v = -std::numeric_limits<double>::infinity();
      for (double y : grid[n]) v = std::max(v, utility(n, y, xbar));
      best[n][j] = v;
    }
  }

  GridEquilibrium out;
  out.max_gain = std::numeric_limits<double>::infinity();
  std::size_t best_flat = 0;
  for (std::size_t flat = 0; flat < total_profiles; ++flat) {
    std::array<double, 3> x{};
    const double sum = fill(flat, x);
    double gain = 0.0;
    for (std::size_t n = 0; n < n_players; ++n) {
      gain = std::max(gain, best[n][others_index(flat, n)] -
                                utility(n, x[n], sum - x[n]));
      if (gain >= out.max_gain) break;
    }
    if (gain < out.max_gain) {
      out.max_gain = gain;
      best_flat = flat;
    }
  }
  std::array<double, 3> xb{};
  fill(best_flat, xb);
  out.profile.assign(xb.begin(), xb.begin() + static_cast<long>(n_players));
  out.grid_bound = 2.0 * s.market.alpha * h_max * (h_max + d_max);
  out.accepted = out.max_gain <= out.grid_bound;
  return out;
}

/// Grid oracle for the CGT game.
[[nodiscard]] inline GridEquilibrium brute_force_ne(const Scenario& s,
                                                    std::size_t points) {
  s.validate();
  return brute_force_grid_ne(s, points,
                             [&](std::size_t n, double y, double xbar) {
                               return cgt_expected_utility(s.prosumers[n], y,
                                                           xbar, s.market);
                             });
}

/// Largest gain any single player obtains by switching to its exact best
/// response (zero at the equilibrium).
[[nodiscard]] inline double max_deviation_gain_cgt(std::span<const double> x,
                                                   const Scenario& s) {
  const double sum = total(x);
  double gain = 0.0;
  for (std::size_t n = 0; n < x.size(); ++n) {
    const ProsumerParams& p = s.prosumers[n];
    const double xbar = sum - x[n];
    const double y = best_response_cgt(xbar, s.market, feasible_bounds(p));
    gain = std::max(gain, cgt_expected_utility(p, y, xbar, s.market) -
                              cgt_expected_utility(p, x[n], xbar, s.market));
  }
  return gain;
}

}  // namespace prosumer
