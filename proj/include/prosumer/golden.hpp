#pragma once

#include <cmath>
#include <cstddef>

namespace prosumer {

struct ScalarOptimum {
  double x = 0.0;
  double value = 0.0;
};

/// Golden-section search for the maximum of f on [a, b]. Assumes f is
/// unimodal on the bracket; stops when the bracket is narrower than tol or
/// after max_iters reductions.
template <class F>
[[nodiscard]] ScalarOptimum golden_section_maximize(F&& f, double a, double b,
                                                    double tol,
                                                    std::size_t max_iters = 200) {
  constexpr double inv_phi = 0.6180339887498949;  // (sqrt(5) - 1) / 2
  double c = b - inv_phi * (b - a);
  double d = a + inv_phi * (b - a);
  double fc = f(c), fd = f(d);
  for (std::size_t i = 0; i < max_iters && (b - a) > tol; ++i) {
    if (fc >= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - inv_phi * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + inv_phi * (b - a);
      fd = f(d);
    }
  }
  return fc >= fd ? ScalarOptimum{c, fc} : ScalarOptimum{d, fd};
}

/// Bisection for a sign change of a decreasing-through-zero slope on [a, b]
/// (slope(a) > 0 > slope(b)); returns the crossing.
template <class G>
[[nodiscard]] double bisect_slope(G&& slope, double a, double b,
                                  std::size_t max_iters = 200) {
  for (std::size_t i = 0; i < max_iters; ++i) {
    const double mid = 0.5 * (a + b);
    if (mid <= a || mid >= b) break;
    if (slope(mid) > 0.0)
      a = mid;
    else
      b = mid;
  }
  return 0.5 * (a + b);
}

}  // namespace prosumer
