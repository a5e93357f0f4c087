#pragma once

// Reference implementations used only by the tests. Each one computes the
// same quantity as a library routine by a different method, so agreement
// between the two is evidence rather than tautology.

#include <cmath>
#include <cstdint>
#include <functional>
#include <numbers>
#include <vector>

namespace oracle {

// erf(x) = 2/sqrt(pi) * exp(-x^2) * sum_n 2^n x^(2n+1) / (1*3*...*(2n+1)).
// Every term is positive, so there is no cancellation at large |x|.
inline long double erf_series(long double x) {
  if (x < 0) return -erf_series(-x);
  long double term = x;
  long double sum = x;
  for (int n = 1; n < 2000; ++n) {
    term *= 2.0L * x * x / (2.0L * n + 1.0L);
    sum += term;
    if (term < sum * 1e-21L) break;
  }
  return 2.0L / std::sqrt(std::numbers::pi_v<long double>) * std::exp(-x * x) * sum;
}

inline double phi(double x) {
  return static_cast<double>(0.5L * (1.0L + erf_series(static_cast<long double>(x) / std::sqrt(2.0L))));
}

// Bisection on the series CDF.
inline double phi_inv(double p) {
  double lo = -40.0, hi = 40.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (phi(mid) < p ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

inline double simpson_rec(const std::function<double(double)>& f, double a, double b, double fa, double fm,
                          double fb, double whole, double tol, int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  const double flm = f(lm), frm = f(rm);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  if (depth <= 0 || std::fabs(left + right - whole) <= 15.0 * tol) {
    return left + right + (left + right - whole) / 15.0;
  }
  return simpson_rec(f, a, m, fa, flm, fm, left, tol / 2, depth - 1) +
         simpson_rec(f, m, b, fm, frm, fb, right, tol / 2, depth - 1);
}

inline double adaptive_simpson(const std::function<double(double)>& f, double a, double b, double tol) {
  const double fa = f(a), fb = f(b), fm = f(0.5 * (a + b));
  const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  return simpson_rec(f, a, b, fa, fm, fb, whole, tol, 50);
}

inline double beta_cdf_by_quadrature(double x, double a, double b) {
  const double log_norm = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b);
  auto density = [&](double t) {
    if (t <= 0.0 || t >= 1.0) return 0.0;
    return std::exp(log_norm + (a - 1.0) * std::log(t) + (b - 1.0) * std::log1p(-t));
  };
  return adaptive_simpson(density, 0.0, x, 1e-13);
}

// P(Bin(n, p) <= s) by direct summation of the PMF.
inline double binom_cdf(std::uint64_t s, std::uint64_t n, double p) {
  double total = 0.0;
  for (std::uint64_t i = 0; i <= s; ++i) {
    const double log_pmf = std::lgamma(n + 1.0) - std::lgamma(i + 1.0) - std::lgamma(n - i + 1.0) +
                           (i ? i * std::log(p) : 0.0) + (n - i ? (n - i) * std::log1p(-p) : 0.0);
    total += std::exp(log_pmf);
  }
  return total;
}

// Smallest p on a grid of step h with P(Bin(n,p) <= s) <= 1 - conf.
inline double clopper_pearson_grid(std::uint64_t s, std::uint64_t n, double conf, double h = 1e-6) {
  if (s >= n) return 1.0;
  for (double p = 0.0; p <= 1.0; p += h) {
    if (binom_cdf(s, n, p) <= 1.0 - conf) return p;
  }
  return 1.0;
}

// sup |F_n - F| evaluated at, and just left of, every sample point.
inline double ks_by_enumeration(std::vector<double> xs, const std::function<double(double)>& cdf) {
  double best = 0.0;
  const double n = static_cast<double>(xs.size());
  for (double x : xs) {
    std::size_t below = 0, at_or_below = 0;
    for (double y : xs) {
      below += y < x;
      at_or_below += y <= x;
    }
    best = std::max(best, std::fabs(at_or_below / n - cdf(x)));
    best = std::max(best, std::fabs(below / n - cdf(x)));
  }
  return best;
}

// E|Phi(t/s0) - Phi((t + s z)/s0)| by plain Simpson on a fine grid
// split at the kink z = 0.
inline double rpp_exact_simpson(double t, double sigma0, double sigma) {
  const double base = phi(t / sigma0);
  auto g = [&](double z) {
    return std::fabs(base - phi((t + sigma * z) / sigma0)) * std::exp(-0.5 * z * z) /
           std::sqrt(2.0 * std::numbers::pi);
  };
  return adaptive_simpson(g, -9.0, 0.0, 1e-12) + adaptive_simpson(g, 0.0, 9.0, 1e-12);
}

}  // namespace oracle
