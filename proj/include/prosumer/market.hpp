#pragma once

// Domain types and the raw economics of the prosumer energy-trading game:
// linear pricing, realized and expected prosumer utilities, and the power
// company's profit. Energy is in kWh, money in $, prices in $/kWh.

#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace prosumer {

/// Framing parameters of one prosumer: loss aversion, gain/loss curvature
/// and the reference payoff separating perceived gains from losses.
struct ProspectParams {
  double lambda = 2.25;
  double beta_plus = 0.88;
  double beta_minus = 0.88;
  double reference = 1.0;

  void validate() const {
    if (!(lambda >= 1.0))
      throw std::invalid_argument("lambda must be >= 1");
    if (!(beta_plus > 0.0 && beta_plus <= 1.0))
      throw std::invalid_argument("beta_plus must lie in (0, 1]");
    if (!(beta_minus > 0.0 && beta_minus <= 1.0))
      throw std::invalid_argument("beta_minus must lie in (0, 1]");
    if (!std::isfinite(reference))
      throw std::invalid_argument("reference must be finite");
  }
};

struct ProsumerParams {
  double w = 0.0;       ///< PV production
  double q = 0.0;       ///< initial stored energy
  double l = 0.0;       ///< load
  double q_max = 25.0;  ///< storage capacity
  ProspectParams prospect{};

  /// Net energy position before trading, W + Q - L.
  [[nodiscard]] double net_position() const { return w + q - l; }

  void validate() const {
    if (!(w >= 0.0)) throw std::invalid_argument("w must be >= 0");
    if (!(q >= 0.0)) throw std::invalid_argument("q must be >= 0");
    if (!(l >= 0.0)) throw std::invalid_argument("l must be >= 0");
    if (!(q_max > 0.0)) throw std::invalid_argument("q_max must be > 0");
    if (!(q <= q_max)) throw std::invalid_argument("q must not exceed q_max");
    prospect.validate();
  }
};

struct MarketParams {
  double alpha = 0.1;      ///< price slope per kWh of aggregate demand
  double rho_base = 0.04;  ///< leader's base price
  double rho_min = 0.0;    ///< lower end of the future-price support
  double rho_max = 0.1;    ///< upper end of the future-price support
  double rho_mar = 0.06;   ///< market clearing price paid by the company
  double leader_lo = 0.0;  ///< admissible base-price interval of the leader
  double leader_hi = 0.1;

  [[nodiscard]] double mid_price() const { return 0.5 * (rho_max + rho_min); }
  [[nodiscard]] double price_spread() const { return rho_max - rho_min; }
  /// Base price measured from the mean future price.
  [[nodiscard]] double theta() const { return rho_base - mid_price(); }

  void validate() const {
    if (!(alpha > 0.0)) throw std::invalid_argument("alpha must be > 0");
    if (!(rho_min < rho_max))
      throw std::invalid_argument("rho_min must be < rho_max");
    if (!std::isfinite(rho_base) || !std::isfinite(rho_mar))
      throw std::invalid_argument("rho_base and rho_mar must be finite");
    if (!(leader_lo <= leader_hi))
      throw std::invalid_argument("leader_lo must be <= leader_hi");
  }
};

/// Closed action interval [lo, hi] of one prosumer.
struct Bounds {
  double lo = 0.0;
  double hi = 0.0;

  [[nodiscard]] double width() const { return hi - lo; }
  [[nodiscard]] double clamp(double x) const {
    return x < lo ? lo : (x > hi ? hi : x);
  }
  [[nodiscard]] bool contains(double x) const { return x >= lo && x <= hi; }
};

/// Declared energy per prosumer; positive buys, negative sells.
using ActionProfile = std::vector<double>;

struct Scenario {
  std::vector<ProsumerParams> prosumers;
  MarketParams market;

  [[nodiscard]] std::size_t size() const { return prosumers.size(); }

  void validate() const {
    if (prosumers.empty())
      throw std::invalid_argument("scenario needs at least one prosumer");
    market.validate();
    for (std::size_t n = 0; n < prosumers.size(); ++n) {
      try {
        prosumers[n].validate();
      } catch (const std::invalid_argument& e) {
        throw std::invalid_argument("prosumer " + std::to_string(n) + ": " +
                                    e.what());
      }
    }
  }

  /// Copy of this scenario with a different leader price.
  [[nodiscard]] Scenario with_base_price(double rho_base) const {
    Scenario s = *this;
    s.market.rho_base = rho_base;
    return s;
  }
};

/// x_min = L - W - Q (all storage and production sold), x_max = x_min + Q_max.
[[nodiscard]] inline Bounds feasible_bounds(const ProsumerParams& p) {
  // Negated net position, so that selling everything leaves c = 0 exactly.
  const double lo = -p.net_position();
  return {lo, lo + p.q_max};
}

[[nodiscard]] inline std::vector<Bounds> feasible_bounds(const Scenario& s) {
  std::vector<Bounds> out;
  out.reserve(s.size());
  for (const auto& p : s.prosumers) out.push_back(feasible_bounds(p));
  return out;
}

[[nodiscard]] inline double total(std::span<const double> x) {
  return std::accumulate(x.begin(), x.end(), 0.0);
}

/// Sum of all components except the n-th.
[[nodiscard]] inline double others_sum(std::span<const double> x,
                                       std::size_t n) {
  double s = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k)
    if (k != n) s += x[k];
  return s;
}

/// rho_base + alpha * sum(x). Deliberately unclamped.
[[nodiscard]] inline double unit_price(std::span<const double> x,
                                       const MarketParams& m) {
  return m.rho_base + m.alpha * total(x);
}

/// Deterministic trade revenue of a prosumer declaring x_n while the others
/// declare others_sum in total.
[[nodiscard]] inline double trade_revenue(double x_n, double others_sum,
                                          const MarketParams& m) {
  return -(m.rho_base + m.alpha * (x_n + others_sum)) * x_n;
}

/// Realized utility for a given future price: trade revenue plus the value
/// of the energy left in storage.
[[nodiscard]] inline double realized_utility(const ProsumerParams& p,
                                             double x_n, double others_sum,
                                             const MarketParams& m,
                                             double rho_f) {
  return trade_revenue(x_n, others_sum, m) + (p.net_position() + x_n) * rho_f;
}

[[nodiscard]] inline double realized_utility(const Scenario& s, std::size_t n,
                                             std::span<const double> x,
                                             double rho_f) {
  return realized_utility(s.prosumers[n], x[n], others_sum(x, n), s.market,
                          rho_f);
}

/// Expected utility under a uniform future price:
/// -alpha x^2 - (theta + alpha xbar) x + k * mid_price.
[[nodiscard]] inline double cgt_expected_utility(const ProsumerParams& p,
                                                 double x_n, double others_sum,
                                                 const MarketParams& m) {
  const double delta = p.net_position() * m.mid_price();
  return -m.alpha * x_n * x_n - (m.theta() + m.alpha * others_sum) * x_n +
         delta;
}

[[nodiscard]] inline double cgt_expected_utility(const Scenario& s,
                                                 std::size_t n,
                                                 std::span<const double> x) {
  return cgt_expected_utility(s.prosumers[n], x[n], others_sum(x, n),
                              s.market);
}

/// Company profit: resale price times aggregate minus market cost.
[[nodiscard]] inline double company_utility(std::span<const double> x,
                                            const MarketParams& m) {
  const double sum = total(x);
  return (m.rho_base + m.alpha * sum) * sum - m.rho_mar * sum;
}

}  // namespace prosumer
