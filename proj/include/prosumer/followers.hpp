#pragma once

// One entry point for "solve the followers' game at the current leader
// price", whatever the behavioural model and algorithm.

#include <algorithm>
#include <cstddef>
#include <optional>
#include <span>

#include "prosumer/cgt.hpp"
#include "prosumer/pt_solver.hpp"

namespace prosumer {

enum class FollowerAlgorithm { Relaxation, Sequential };

[[nodiscard]] inline const char* to_string(FollowerAlgorithm a) {
  return a == FollowerAlgorithm::Relaxation ? "relaxation" : "sequential";
}

struct FollowerSettings {
  FollowerModel model = FollowerModel::Cgt;
  FollowerAlgorithm algorithm = FollowerAlgorithm::Relaxation;
  RelaxationSettings relaxation{};
  PtSearchSettings search{};

  /// CGT followers through relaxation, PT followers through sequential best
  /// response.
  static FollowerSettings defaults_for(FollowerModel model) {
    FollowerSettings s;
    s.model = model;
    s.algorithm = model == FollowerModel::Cgt ? FollowerAlgorithm::Relaxation
                                              : FollowerAlgorithm::Sequential;
    return s;
  }
};

[[nodiscard]] inline EquilibriumReport solve_followers(
    const Scenario& s, const FollowerSettings& settings) {
  if (settings.algorithm == FollowerAlgorithm::Sequential)
    return sequential_best_response(s, settings.search, settings.model);
  if (settings.model == FollowerModel::Cgt)
    return relaxation_solve(s, settings.relaxation);
  return relaxation_solve_pt(s, settings.relaxation, settings.search);
}

/// Largest unilateral gain available at x. CGT uses the exact best response;
/// PT takes the larger of the grid certificate and the numerical best
/// response. A grid certificate already computed for x can be passed in.
[[nodiscard]] inline double follower_deviation_gain(
    std::span<const double> x, const Scenario& s,
    const FollowerSettings& settings,
    std::optional<double> known_grid_epsilon = std::nullopt) {
  if (settings.model == FollowerModel::Cgt) return max_deviation_gain_cgt(x, s);
  double gain = known_grid_epsilon
                    ? *known_grid_epsilon
                    : grid_deviation_epsilon(x, s, FollowerModel::Pt,
                                             settings.search.certificate_points);
  const double sum = total(x);
  for (std::size_t n = 0; n < x.size(); ++n) {
    const double xbar = sum - x[n];
    const double y = best_response(FollowerModel::Pt, s, n, xbar, settings.search);
    gain = std::max(gain, pt_expected_utility(s.prosumers[n], y, xbar, s.market) -
                              pt_expected_utility(s.prosumers[n], x[n], xbar,
                                                  s.market));
  }
  return gain;
}

}  // namespace prosumer
