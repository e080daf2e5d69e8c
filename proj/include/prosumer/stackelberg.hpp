#pragma once

// Leader side of the game: the company announces every base price on an
// epsilon grid of its admissible interval, lets the followers settle, and
// keeps the most profitable price.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <thread>
#include <vector>

#include "prosumer/followers.hpp"
#include "prosumer/market.hpp"

namespace prosumer {

struct LeaderGridPoint {
  double rho_base = 0.0;
  double profit = 0.0;
  double follower_epsilon = 0.0;
  bool converged = false;
  std::size_t iterations = 0;
  ActionProfile profile;
};

struct StackelbergResult {
  double rho_star = 0.0;
  ActionProfile follower_profile;
  double leader_profit = 0.0;
  std::vector<LeaderGridPoint> grid;
  double epsilon = 0.0;
  /// Follower iterations summed over the grid.
  std::size_t total_follower_iterations = 0;
  std::size_t failed_points = 0;
};

/// lo, lo + eps, lo + 2 eps, ... up to hi, with hi itself always included.
[[nodiscard]] inline std::vector<double> leader_price_grid(double lo, double hi,
                                                           double epsilon) {
  if (!(epsilon > 0.0)) throw std::invalid_argument("epsilon must be > 0");
  if (!(lo <= hi)) throw std::invalid_argument("empty leader interval");
  std::vector<double> out;
  const auto steps = static_cast<std::size_t>(std::floor((hi - lo) / epsilon + 1e-9));
  for (std::size_t k = 0; k <= steps; ++k)
    out.push_back(lo + static_cast<double>(k) * epsilon);
  if (hi - out.back() > 1e-12 * std::max(1.0, std::abs(hi))) out.push_back(hi);
  return out;
}

namespace detail {

/// Runs body(i) for i in [0, count) on up to `jobs` threads.
template <class Body>
void parallel_for(std::size_t count, std::size_t jobs, Body&& body) {
  jobs = std::max<std::size_t>(1, std::min(jobs, count));
  if (jobs == 1) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> workers;
  workers.reserve(jobs);
  for (std::size_t j = 0; j < jobs; ++j)
    workers.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) body(i);
    });
  for (auto& w : workers) w.join();
}

}  // namespace detail

[[nodiscard]] inline LeaderGridPoint evaluate_leader_price(
    const Scenario& s, double rho_base, const FollowerSettings& followers) {
  const Scenario at = s.with_base_price(rho_base);
  EquilibriumReport rep = solve_followers(at, followers);
  LeaderGridPoint pt;
  pt.rho_base = rho_base;
  pt.converged = rep.converged;
  pt.iterations = rep.iterations;
  pt.profit = company_utility(rep.profile, at.market);
  pt.follower_epsilon = follower_deviation_gain(rep.profile, at, followers, rep.epsilon);
  pt.profile = std::move(rep.profile);
  return pt;
}

/// Epsilon-Stackelberg equilibrium by exhaustive search over the leader grid.
/// Non-converged follower solves are kept in the grid but never selected;
/// ties go to the smallest price.
[[nodiscard]] inline StackelbergResult epsilon_se_grid(
    const Scenario& s, double epsilon, const FollowerSettings& followers,
    std::size_t jobs = 1) {
  s.validate();
  const std::vector<double> prices =
      leader_price_grid(s.market.leader_lo, s.market.leader_hi, epsilon);

  StackelbergResult result;
  result.epsilon = epsilon;
  result.grid.resize(prices.size());
  detail::parallel_for(prices.size(), jobs, [&](std::size_t i) {
    result.grid[i] = evaluate_leader_price(s, prices[i], followers);
  });

  std::size_t best = prices.size();
  for (std::size_t i = 0; i < result.grid.size(); ++i) {
    const LeaderGridPoint& g = result.grid[i];
    result.total_follower_iterations += g.iterations;
    if (!g.converged) {
      ++result.failed_points;
      continue;
    }
    if (best == prices.size() || g.profit > result.grid[best].profit) best = i;
  }
  if (best == prices.size())
    throw std::runtime_error(
        "epsilon_se_grid: follower solver failed at every leader price");
  result.rho_star = result.grid[best].rho_base;
  result.follower_profile = result.grid[best].profile;
  result.leader_profit = result.grid[best].profit;
  return result;
}

struct SeVerification {
  bool passed = false;
  bool followers_ok = false;
  bool leader_ok = false;
  /// Largest unilateral follower gain at rho_star.
  double follower_gain = 0.0;
  /// Best grid profit minus the profit recomputed at rho_star.
  double leader_regret = 0.0;
};

/// Checks both equilibrium conditions at grid resolution: the stored follower
/// profile is an epsilon-NE at rho_star, and no grid price beats the profit
/// obtained by re-solving the followers at rho_star by more than epsilon.
[[nodiscard]] inline SeVerification verify_se(const StackelbergResult& result,
                                              const Scenario& s,
                                              const FollowerSettings& followers,
                                              double epsilon) {
  SeVerification v;
  const Scenario at = s.with_base_price(result.rho_star);
  v.follower_gain =
      follower_deviation_gain(result.follower_profile, at, followers);
  v.followers_ok = v.follower_gain <= epsilon;

  const EquilibriumReport rep = solve_followers(at, followers);
  const double profit_star = company_utility(rep.profile, at.market);
  double best = -std::numeric_limits<double>::infinity();
  for (const auto& g : result.grid)
    if (g.converged) best = std::max(best, g.profit);
  v.leader_regret = best - profit_star;
  v.leader_ok = rep.converged && v.leader_regret <= epsilon;
  v.passed = v.followers_ok && v.leader_ok;
  return v;
}

}  // namespace prosumer
