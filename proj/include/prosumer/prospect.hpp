#pragma once

// Prospect-theoretic valuation of a prosumer's uncertain payoff. The payoff
// c * rho_f + d is affine in the uniform future price, so its framed
// expectation has a closed form with three regimes: every outcome a gain,
// outcomes straddling the reference point, every outcome a loss.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>

#include "prosumer/market.hpp"
#include "prosumer/rng.hpp"

namespace prosumer {

/// Gain/loss framing around the reference point; zero at the reference.
[[nodiscard]] inline double framing_value(double u, const ProspectParams& p) {
  if (u > p.reference) return std::pow(u - p.reference, p.beta_plus);
  if (u < p.reference) return -p.lambda * std::pow(p.reference - u, p.beta_minus);
  return 0.0;
}

struct PtUtilityTerms {
  double c = 0.0;      ///< energy left in storage, W + Q + x - L
  double d = 0.0;      ///< deterministic trade revenue
  double rho_d = 0.0;  ///< rho_max - rho_min
};

[[nodiscard]] inline PtUtilityTerms pt_terms(const ProsumerParams& p,
                                             double x_n, double others_sum,
                                             const MarketParams& m) {
  return {p.net_position() + x_n, trade_revenue(x_n, others_sum, m),
          m.price_spread()};
}

enum class PtBranch { Gain, Mixed, Loss, Degenerate };

/// Regime of the closed form: compares R with [c rho_min + d, c rho_max + d].
[[nodiscard]] inline PtBranch pt_branch(const PtUtilityTerms& t,
                                        const MarketParams& m,
                                        const ProspectParams& p) {
  if (t.c <= 0.0) return PtBranch::Degenerate;
  const double lo = t.c * m.rho_min + t.d - p.reference;
  const double hi = t.c * m.rho_max + t.d - p.reference;
  if (lo > 0.0) return PtBranch::Gain;
  if (hi < 0.0) return PtBranch::Loss;
  return PtBranch::Mixed;
}

namespace detail {

/// Mean of u^beta for u uniform on [lo, hi], 0 <= lo <= hi. Equal to
/// (hi^(beta+1) - lo^(beta+1)) / ((beta+1)(hi - lo)), evaluated without the
/// cancellation that form suffers when hi - lo is small.
[[nodiscard]] inline double mean_power(double lo, double hi, double beta) {
  const double p = beta + 1.0;
  const double width = hi - lo;
  if (width <= 0.0) return std::pow(lo, beta);
  if (lo <= 0.0) return std::pow(hi, beta) / p;
  return std::pow(lo, p) * std::expm1(p * std::log1p(width / lo)) /
         (p * width);
}

/// Antiderivative of the framing value (measured from the reference point).
[[nodiscard]] inline double framing_integral(double u, const ProspectParams& p) {
  if (u >= 0.0) return std::pow(u, p.beta_plus + 1.0) / (p.beta_plus + 1.0);
  return p.lambda * std::pow(-u, p.beta_minus + 1.0) / (p.beta_minus + 1.0);
}

[[nodiscard]] inline double centred_value(double u, const ProspectParams& p) {
  if (u > 0.0) return std::pow(u, p.beta_plus);
  if (u < 0.0) return -p.lambda * std::pow(-u, p.beta_minus);
  return 0.0;
}

}  // namespace detail

/// Framed expectation E[V(c rho_f + d)] with rho_f ~ U[rho_min, rho_max].
/// c = 0 is a deterministic payoff and evaluates to V(d).
[[nodiscard]] inline double pt_expected_utility(const PtUtilityTerms& t,
                                                const MarketParams& m,
                                                const ProspectParams& p) {
  if (t.c <= 0.0) return framing_value(t.d, p);
  const double lo = t.c * m.rho_min + t.d - p.reference;
  const double hi = t.c * m.rho_max + t.d - p.reference;
  if (lo > 0.0) return detail::mean_power(lo, hi, p.beta_plus);
  if (hi < 0.0) return -p.lambda * detail::mean_power(-hi, -lo, p.beta_minus);
  // Straddling the reference point.
  const double gain = std::pow(hi, p.beta_plus + 1.0) / (p.beta_plus + 1.0);
  const double loss =
      p.lambda * std::pow(-lo, p.beta_minus + 1.0) / (p.beta_minus + 1.0);
  return (gain - loss) / (t.c * t.rho_d);
}

[[nodiscard]] inline double pt_expected_utility(const ProsumerParams& pr,
                                                double x_n, double others_sum,
                                                const MarketParams& m) {
  return pt_expected_utility(pt_terms(pr, x_n, others_sum, m), m, pr.prospect);
}

[[nodiscard]] inline double pt_expected_utility(const Scenario& s,
                                                std::size_t n,
                                                std::span<const double> x) {
  return pt_expected_utility(s.prosumers[n], x[n], others_sum(x, n), s.market);
}

/// Derivative of pt_expected_utility in the prosumer's own action. Uses
/// d/dx [G(hi) - G(lo)] / (c rho_d) with G' = V; near c = 0 the closed form
/// cancels, so a central difference is used there instead.
[[nodiscard]] inline double pt_expected_utility_slope(const ProsumerParams& pr,
                                                      double x_n,
                                                      double others_sum,
                                                      const MarketParams& m) {
  const ProspectParams& p = pr.prospect;
  const PtUtilityTerms t = pt_terms(pr, x_n, others_sum, m);
  const double scale = 1.0 + std::abs(x_n) + std::abs(pr.net_position());
  if (t.c < 1e-6 * scale) {
    const double h = 1e-7 * scale;
    const double left = std::max(x_n - h, -pr.net_position());
    const double right = x_n + h;
    return (pt_expected_utility(pr, right, others_sum, m) -
            pt_expected_utility(pr, left, others_sum, m)) /
           (right - left);
  }
  const double d_slope = -(m.rho_base + m.alpha * others_sum) - 2.0 * m.alpha * x_n;
  const double lo = t.c * m.rho_min + t.d - p.reference;
  const double hi = t.c * m.rho_max + t.d - p.reference;
  const double value = pt_expected_utility(t, m, p);
  const double boundary =
      (detail::centred_value(hi, p) * (m.rho_max + d_slope) -
       detail::centred_value(lo, p) * (m.rho_min + d_slope)) /
      t.rho_d;
  return (boundary - value) / t.c;
}

struct MonteCarloEstimate {
  double value = 0.0;
  double std_error = 0.0;
};

/// Sample mean of V(U_n(rho_f)) over i.i.d. uniform future prices drawn from
/// a 64-bit Mersenne Twister seeded with `seed`.
[[nodiscard]] inline MonteCarloEstimate pt_expected_utility_mc(
    const ProsumerParams& pr, double x_n, double others_sum,
    const MarketParams& m, std::size_t samples, std::uint64_t seed) {
  if (samples < 10'000)
    throw std::invalid_argument("Monte Carlo oracle needs >= 10^4 samples");
  Rng rng(seed);
  double mean = 0.0, m2 = 0.0;
  for (std::size_t i = 0; i < samples; ++i) {
    const double rho_f = rng.uniform(m.rho_min, m.rho_max);
    const double v =
        framing_value(realized_utility(pr, x_n, others_sum, m, rho_f),
                      pr.prospect);
    const double delta = v - mean;
    mean += delta / static_cast<double>(i + 1);
    m2 += delta * (v - mean);
  }
  const double var = m2 / static_cast<double>(samples - 1);
  return {mean, std::sqrt(var / static_cast<double>(samples))};
}

enum class ConcavityCase { Case1, Case2, Case3, Unclassified };

[[nodiscard]] inline const char* to_string(ConcavityCase c) {
  switch (c) {
    case ConcavityCase::Case1: return "case1";
    case ConcavityCase::Case2: return "case2";
    case ConcavityCase::Case3: return "case3";
    case ConcavityCase::Unclassified: return "unclassified";
  }
  return "unclassified";
}

struct ConcavityCaseReport {
  ConcavityCase case_id = ConcavityCase::Unclassified;
  double delta1 = 0.0;
  double delta2 = 0.0;
  /// Roots of c rho_min + d = R (r1 <= r2) and c rho_max + d = R (r3 <= r4).
  std::optional<double> r1, r2, r3, r4;
  double k = 0.0;
  double m1 = 0.0;
  double a1 = 0.0;
  double b = 0.0;
  /// 1 - b / a1; absent when a1 = 0 (lambda = 1), where the bound is vacuous.
  std::optional<double> case3_threshold;
  /// lambda = 1 with unit exponents: the objective is the expected utility
  /// shifted by R, concave whatever the case tests say.
  bool affine_reduction = false;
  /// The case analysis assumes beta+ = beta- = 1; otherwise it abstains.
  bool beta_not_unit = false;
  std::string note;

  [[nodiscard]] bool concave() const {
    return affine_reduction || case_id != ConcavityCase::Unclassified;
  }
};

/// Sufficient conditions for concavity of the framed utility in the player's
/// own action over its whole box (unit exponents only).
[[nodiscard]] inline ConcavityCaseReport classify_concavity(
    const ProsumerParams& pr, double others_sum, const MarketParams& m,
    Bounds bounds) {
  const ProspectParams& p = pr.prospect;
  ConcavityCaseReport rep;
  rep.k = pr.net_position();
  if (p.beta_plus != 1.0 || p.beta_minus != 1.0) {
    rep.beta_not_unit = true;
    rep.note = "case analysis requires beta+ = beta- = 1";
    return rep;
  }

  const double a = m.alpha;
  // R < c rho + d  <=>  -a x^2 + (rho - rho_base - a xbar) x + (k rho - R) > 0.
  const double lin_min = m.rho_min - m.rho_base - a * others_sum;
  const double lin_max = m.rho_max - m.rho_base - a * others_sum;
  rep.delta1 = lin_min * lin_min + 4.0 * a * (rep.k * m.rho_min - p.reference);
  rep.delta2 = lin_max * lin_max + 4.0 * a * (rep.k * m.rho_max - p.reference);
  if (rep.delta1 >= 0.0) {
    const double sq = std::sqrt(rep.delta1);
    rep.r1 = (-sq + lin_min) / (2.0 * a);
    rep.r2 = (sq + lin_min) / (2.0 * a);
  }
  if (rep.delta2 >= 0.0) {
    const double sq = std::sqrt(rep.delta2);
    rep.r3 = (-sq + lin_max) / (2.0 * a);
    rep.r4 = (sq + lin_max) / (2.0 * a);
  }

  rep.m1 = 64.0 * rep.k;
  rep.a1 = 48.0 * a * a * (1.0 - p.lambda);
  rep.b = (176.0 * a * a * rep.k +
           32.0 * a * (m.rho_base - m.rho_max + a * others_sum)) *
          (1.0 - p.lambda);
  if (rep.a1 != 0.0) rep.case3_threshold = 1.0 - rep.b / rep.a1;
  rep.affine_reduction = p.lambda == 1.0;

  const double lo = bounds.lo, hi = bounds.hi;
  const bool case1 = rep.delta1 > 0.0 && *rep.r1 < lo && hi < *rep.r2;
  const bool case2 = rep.delta2 < 0.0 || (rep.r3 && hi < *rep.r3) ||
                     (rep.r4 && *rep.r4 < lo);
  const bool straddle_max = rep.delta2 > 0.0 && *rep.r3 < lo && hi < *rep.r4;
  const bool below_min = rep.delta1 < 0.0 || (rep.r1 && hi < *rep.r1) ||
                         (rep.r2 && *rep.r2 < lo);
  const bool threshold_ok =
      !rep.case3_threshold || hi < *rep.case3_threshold;

  if (case1)
    rep.case_id = ConcavityCase::Case1;
  else if (case2)
    rep.case_id = ConcavityCase::Case2;
  else if (straddle_max && below_min && threshold_ok)
    rep.case_id = ConcavityCase::Case3;

  if (rep.affine_reduction)
    rep.note = "lambda = 1: expected utility shifted by R, concave";
  else if (!rep.case3_threshold)
    rep.note = "case-3 threshold vacuous";
  return rep;
}

}  // namespace prosumer
