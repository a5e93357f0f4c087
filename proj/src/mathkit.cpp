#include "rppcert/mathkit.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "rppcert/error.hpp"

namespace rppcert {

double norm_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

double norm_pdf(double x) {
  return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
}

double inv_norm_cdf(double p) {
  if (!(p > 0.0 && p < 1.0)) {
    throw DomainError("inv_norm_cdf: p = " + std::to_string(p) + " is outside (0, 1)");
  }
  const double q = p - 0.5;
  double r;
  double val;

  if (std::fabs(q) <= 0.425) {
    r = 0.180625 - q * q;
    val = q *
          (((((((r * 2509.0809287301226727 + 33430.575583588128105) * r +
                67265.770927008700853) * r +
               45921.953931549871457) * r +
              13731.693765509461125) * r +
             1971.5909503065514427) * r +
            133.14166789178437745) * r +
           3.387132872796366608) /
          (((((((r * 5226.495278852545925 + 28729.085735721942674) * r +
                39307.89580009271061) * r +
               21213.794301586595867) * r +
              5394.1960214247511077) * r +
             687.1870074920579083) * r +
            42.313330701600911252) * r +
           1.0);
    return val;
  }

  r = q < 0 ? p : 1.0 - p;
  r = std::sqrt(-std::log(r));
  if (r <= 5.0) {
    r -= 1.6;
    val = (((((((r * 7.7454501427834140764e-4 + 0.0227238449892691845833) * r +
                0.24178072517745061177) * r +
               1.27045825245236838258) * r +
              3.64784832476320460504) * r +
             5.7694972214606914055) * r +
            4.6303378461565452959) * r +
           1.42343711074968357734) /
          (((((((r * 1.05075007164441684324e-9 + 5.475938084995344946e-4) * r +
                0.0151986665636164571966) * r +
               0.14810397642748007459) * r +
              0.68976733498510000455) * r +
             1.6763848301838038494) * r +
            2.05319162663775882187) * r +
           1.0);
  } else {
    r -= 5.0;
    val = (((((((r * 2.01033439929228813265e-7 + 2.71155556874348757815e-5) * r +
                0.0012426609473880784386) * r +
               0.026532189526576123093) * r +
              0.29656057182850489123) * r +
             1.7848265399172913358) * r +
            5.4637849111641143699) * r +
           6.6579046435011037772) /
          (((((((r * 2.04426310338993978564e-15 + 1.4215117583164458887e-7) * r +
                1.8463183175100546818e-5) * r +
               7.868691311456132591e-4) * r +
              0.0148753612908506148525) * r +
             0.13692988092273580531) * r +
            0.59983220655588793769) * r +
           1.0);
  }
  return q < 0.0 ? -val : val;
}

namespace {

// Continued fraction for the incomplete beta, modified Lentz.
double beta_continued_fraction(double x, double a, double b) {
  constexpr int kMaxIter = 10000;
  constexpr double kEps = 1e-16;
  constexpr double kTiny = 1e-300;

  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::fabs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < kEps) return h;
  }
  throw Error(ErrorKind::Internal, "beta_cdf: continued fraction did not converge");
}

}  // namespace

double beta_cdf(double x, double a, double b) {
  if (!(a > 0.0) || !(b > 0.0) || !std::isfinite(a) || !std::isfinite(b)) {
    throw DomainError("beta_cdf: shape parameters must be positive and finite");
  }
  if (!(x >= 0.0 && x <= 1.0)) {
    throw DomainError("beta_cdf: x = " + std::to_string(x) + " is outside [0, 1]");
  }
  if (x == 0.0) return 0.0;
  if (x == 1.0) return 1.0;

  const double log_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                           a * std::log(x) + b * std::log1p(-x);
  const double front = std::exp(log_front);
  // The continued fraction converges quickly only on this side of the mean.
  if (x < (a + 1.0) / (a + b + 2.0)) {
    return front * beta_continued_fraction(x, a, b) / a;
  }
  return 1.0 - front * beta_continued_fraction(1.0 - x, b, a) / b;
}

double beta_quantile(double prob, double a, double b) {
  if (!(prob >= 0.0 && prob <= 1.0)) {
    throw DomainError("beta_quantile: probability outside [0, 1]");
  }
  if (!(a > 0.0) || !(b > 0.0)) {
    throw DomainError("beta_quantile: shape parameters must be positive");
  }
  if (prob == 0.0) return 0.0;
  if (prob == 1.0) return 1.0;
  double lo = 0.0;
  double hi = 1.0;
  while (hi - lo > 1e-15) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    if (beta_cdf(mid, a, b) < prob) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

double binom_upper_conf(std::uint64_t successes, std::uint64_t trials, double confidence) {
  if (trials == 0) throw DomainError("binom_upper_conf: trials must be >= 1");
  if (successes > trials) throw DomainError("binom_upper_conf: successes exceed trials");
  if (!(confidence > 0.0 && confidence < 1.0)) {
    throw DomainError("binom_upper_conf: confidence must lie in (0, 1)");
  }
  if (successes == trials) return 1.0;
  // Clopper-Pearson: P(Bin(J, p) <= k) = 1 - I_p(k + 1, J - k).
  return beta_quantile(confidence, static_cast<double>(successes) + 1.0,
                       static_cast<double>(trials - successes));
}

double ks_statistic(std::span<const double> sorted_samples,
                    const std::function<double(double)>& cdf) {
  if (sorted_samples.empty()) throw DomainError("ks_statistic: empty sample");
  const double n = static_cast<double>(sorted_samples.size());
  double stat = 0.0;
  for (std::size_t i = 0; i < sorted_samples.size(); ++i) {
    if (i > 0 && sorted_samples[i] < sorted_samples[i - 1]) {
      throw InvalidArgument("ks_statistic: sample is not sorted ascending");
    }
    const double f = cdf(sorted_samples[i]);
    const double above = static_cast<double>(i + 1) / n - f;
    const double below = f - static_cast<double>(i) / n;
    stat = std::max({stat, above, below});
  }
  return stat;
}

double ks_critical_value(std::size_t n, double level) {
  if (n == 0) throw DomainError("ks_critical_value: n must be positive");
  double c;
  if (level == 0.01) {
    c = 1.63;
  } else if (level == 0.05) {
    c = 1.36;
  } else if (level == 0.10) {
    c = 1.22;
  } else if (level > 0.0 && level < 1.0) {
    c = std::sqrt(-0.5 * std::log(level / 2.0));
  } else {
    throw DomainError("ks_critical_value: level must lie in (0, 1)");
  }
  return c / std::sqrt(static_cast<double>(n));
}

std::size_t conformal_rank(double alpha, std::size_t n) {
  const double x = alpha * static_cast<double>(n + 1);
  const double nearest = std::round(x);
  if (std::fabs(x - nearest) <= 1e-9 * std::max(1.0, x)) {
    return static_cast<std::size_t>(nearest);
  }
  return static_cast<std::size_t>(std::ceil(x));
}

}  // namespace rppcert
