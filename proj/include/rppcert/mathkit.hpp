#pragma once

// Scalar statistics kernels: normal CDF and its inverse, exact binomial
// upper confidence bounds, the Beta distribution, and the one-sample KS
// statistic. Everything here is a pure function.

#include <cstdint>
#include <functional>
#include <span>

namespace rppcert {

/// Standard normal CDF, Phi(x) = erfc(-x/sqrt(2))/2.
double norm_cdf(double x);

/// Standard normal density.
double norm_pdf(double x);

/// Phi^-1(p) for p in (0,1), Wichura's AS241 (PPND16) rational
/// approximation. Throws DomainError outside the open interval.
double inv_norm_cdf(double p);

/// Regularized incomplete beta I_x(a, b). Throws DomainError on
/// non-positive shapes or x outside [0,1].
double beta_cdf(double x, double a, double b);

/// Inverse of beta_cdf in x, by bisection (|x - x*| <= 1e-12).
double beta_quantile(double prob, double a, double b);

/// One-sided Clopper-Pearson upper confidence bound on a binomial success
/// probability after `successes` out of `trials`: the smallest p with
/// P(Bin(trials, p) <= successes) <= 1 - confidence. Returns 1 when
/// successes == trials.
double binom_upper_conf(std::uint64_t successes, std::uint64_t trials, double confidence);

/// sup_x |F_n(x) - cdf(x)| for an ascending sample. Throws DomainError on an
/// empty sample and InvalidArgument if the sample is not sorted.
double ks_statistic(std::span<const double> sorted_samples,
                    const std::function<double(double)>& cdf);

/// Asymptotic one-sample KS critical value c(level)/sqrt(n) from the
/// standard table (level 0.01 -> 1.63, 0.05 -> 1.36, 0.10 -> 1.22).
double ks_critical_value(std::size_t n, double level);

/// ceil(alpha * (n + 1)) with a tolerance for floating-point products that
/// land a few ulps above an integer.
std::size_t conformal_rank(double alpha, std::size_t n);

}  // namespace rppcert
