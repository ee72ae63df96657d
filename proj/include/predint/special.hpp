#pragma once

// Special functions used by every distribution kernel.
//
// log-gamma, digamma and trigamma use upward recurrence into the asymptotic
// (Stirling / Bernoulli) regime at x >= 10. The regularized incomplete gamma
// and beta functions use the power series below the transition point and a
// modified-Lentz continued fraction above it; the x^a e^-x / Gamma(a) style
// prefactors are assembled in log space and exponentiated once.

#include <cmath>
#include <limits>
#include <numbers>

#include "predint/errors.hpp"

namespace predint::special {

inline constexpr double kEps = std::numeric_limits<double>::epsilon();
inline constexpr double kTiny = 1e-300;
inline constexpr double kInf = std::numeric_limits<double>::infinity();
inline constexpr double kSqrt2 = std::numbers::sqrt2;
inline constexpr double kLogSqrt2Pi = 0.91893853320467274178032973640562;

namespace detail {

inline constexpr double kAsymptoticStart = 10.0;

inline double stirling_tail(double x) {
  // sum_k B_2k / (2k (2k-1) x^(2k-1)), k = 1..8
  const double r = 1.0 / x;
  const double r2 = r * r;
  return r * (1.0 / 12.0 +
              r2 * (-1.0 / 360.0 +
                    r2 * (1.0 / 1260.0 +
                          r2 * (-1.0 / 1680.0 +
                                r2 * (1.0 / 1188.0 +
                                      r2 * (-691.0 / 360360.0 +
                                            r2 * (1.0 / 156.0 + r2 * (-3617.0 / 122400.0))))))));
}

}  // namespace detail

/// Natural log of Gamma(x) for x > 0.
inline double log_gamma(double x) {
  if (!(x > 0.0)) {
    throw invalid_parameter("log_gamma: argument must be positive");
  }
  if (x == kInf) return kInf;
  double shift = 0.0;
  if (x < detail::kAsymptoticStart) {
    double prod = 1.0;
    while (x < detail::kAsymptoticStart) {
      prod *= x;
      x += 1.0;
    }
    shift = std::log(prod);
  }
  return (x - 0.5) * std::log(x) - x + kLogSqrt2Pi + detail::stirling_tail(x) - shift;
}

inline double log_beta(double a, double b) { return log_gamma(a) + log_gamma(b) - log_gamma(a + b); }

/// log of the binomial coefficient C(n, k) for real n >= k >= 0.
inline double log_choose(double n, double k) {
  if (k < 0.0 || k > n) return -kInf;
  if (k == 0.0 || k == n) return 0.0;
  return log_gamma(n + 1.0) - log_gamma(k + 1.0) - log_gamma(n - k + 1.0);
}

inline double digamma(double x) {
  if (!(x > 0.0)) {
    throw invalid_parameter("digamma: argument must be positive");
  }
  double acc = 0.0;
  while (x < detail::kAsymptoticStart) {
    acc -= 1.0 / x;
    x += 1.0;
  }
  const double r2 = 1.0 / (x * x);
  const double series =
      r2 * (1.0 / 12.0 -
            r2 * (1.0 / 120.0 -
                  r2 * (1.0 / 252.0 -
                        r2 * (1.0 / 240.0 -
                              r2 * (1.0 / 132.0 - r2 * (691.0 / 32760.0 - r2 * (1.0 / 12.0)))))));
  return acc + std::log(x) - 0.5 / x - series;
}

inline double trigamma(double x) {
  if (!(x > 0.0)) {
    throw invalid_parameter("trigamma: argument must be positive");
  }
  double acc = 0.0;
  while (x < detail::kAsymptoticStart) {
    acc += 1.0 / (x * x);
    x += 1.0;
  }
  const double r = 1.0 / x;
  const double r2 = r * r;
  const double series =
      r * (1.0 + r * (0.5 +
                      r * (1.0 / 6.0 +
                           r2 * (-1.0 / 30.0 +
                                 r2 * (1.0 / 42.0 +
                                       r2 * (-1.0 / 30.0 +
                                             r2 * (5.0 / 66.0 +
                                                   r2 * (-691.0 / 2730.0 + r2 * (7.0 / 6.0)))))))));
  return acc + series;
}

namespace detail {

inline constexpr int kMaxIter = 200000;

// P(a, x) by power series; valid and efficient for x < a + 1.
inline double gamma_p_series(double a, double x, double log_prefactor) {
  double ap = a;
  double del = 1.0 / a;
  double sum = del;
  for (int i = 0; i < kMaxIter; ++i) {
    ap += 1.0;
    del *= x / ap;
    sum += del;
    if (std::fabs(del) < std::fabs(sum) * kEps) break;
  }
  return sum * std::exp(log_prefactor);
}

// Q(a, x) by continued fraction; valid for x >= a + 1.
inline double gamma_q_fraction(double a, double x, double log_prefactor) {
  double b = x + 1.0 - a;
  double c = 1.0 / kTiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i < kMaxIter; ++i) {
    const double an = -i * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = b + an / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < kEps) break;
  }
  return std::exp(log_prefactor) * h;
}

inline double gamma_log_prefactor(double a, double x) { return a * std::log(x) - x - log_gamma(a); }

// Continued fraction for I_x(a, b) (without prefactor).
inline double beta_fraction(double a, double b, double x) {
  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::fabs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m < kMaxIter; ++m) {
    const int m2 = 2 * m;
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
    if (std::fabs(del - 1.0) < kEps) break;
  }
  return h;
}

}  // namespace detail

/// Regularized lower incomplete gamma P(a, x).
inline double gamma_p(double a, double x) {
  if (!(a > 0.0) || x < 0.0 || std::isnan(x)) {
    throw invalid_parameter("gamma_p: requires a > 0 and x >= 0");
  }
  if (x == 0.0) return 0.0;
  if (x == kInf) return 1.0;
  const double lp = detail::gamma_log_prefactor(a, x);
  if (x < a + 1.0) return detail::gamma_p_series(a, x, lp);
  return 1.0 - detail::gamma_q_fraction(a, x, lp);
}

/// Regularized upper incomplete gamma Q(a, x) = 1 - P(a, x).
inline double gamma_q(double a, double x) {
  if (!(a > 0.0) || x < 0.0 || std::isnan(x)) {
    throw invalid_parameter("gamma_q: requires a > 0 and x >= 0");
  }
  if (x == 0.0) return 1.0;
  if (x == kInf) return 0.0;
  const double lp = detail::gamma_log_prefactor(a, x);
  if (x < a + 1.0) return 1.0 - detail::gamma_p_series(a, x, lp);
  return detail::gamma_q_fraction(a, x, lp);
}

/// Regularized incomplete beta I_x(a, b).
inline double beta_inc(double a, double b, double x) {
  if (!(a > 0.0) || !(b > 0.0) || !(x >= 0.0 && x <= 1.0)) {
    throw invalid_parameter("beta_inc: requires a, b > 0 and x in [0, 1]");
  }
  if (x == 0.0) return 0.0;
  if (x == 1.0) return 1.0;
  const double log_front = a * std::log(x) + b * std::log1p(-x) - log_beta(a, b);
  if (x < (a + 1.0) / (a + b + 2.0)) {
    return std::exp(log_front) * detail::beta_fraction(a, b, x) / a;
  }
  return 1.0 - std::exp(log_front) * detail::beta_fraction(b, a, 1.0 - x) / b;
}

/// Complement 1 - I_x(a, b) computed without cancellation.
inline double beta_inc_complement(double a, double b, double x) {
  if (!(a > 0.0) || !(b > 0.0) || !(x >= 0.0 && x <= 1.0)) {
    throw invalid_parameter("beta_inc_complement: requires a, b > 0 and x in [0, 1]");
  }
  if (x == 0.0) return 1.0;
  if (x == 1.0) return 0.0;
  const double log_front = a * std::log(x) + b * std::log1p(-x) - log_beta(a, b);
  if (x < (a + 1.0) / (a + b + 2.0)) {
    return 1.0 - std::exp(log_front) * detail::beta_fraction(a, b, x) / a;
  }
  return std::exp(log_front) * detail::beta_fraction(b, a, 1.0 - x) / b;
}

// ---------------------------------------------------------------------------
// Standard normal

inline double norm_cdf(double z) { return 0.5 * std::erfc(-z / kSqrt2); }
inline double norm_sf(double z) { return 0.5 * std::erfc(z / kSqrt2); }
inline double norm_log_pdf(double z) { return -0.5 * z * z - kLogSqrt2Pi; }
inline double norm_pdf(double z) { return std::exp(norm_log_pdf(z)); }

/// log Phi(z), finite for every finite z.
inline double norm_log_cdf(double z) {
  if (z > -30.0) return std::log(norm_cdf(z));
  // Asymptotic Mills-ratio series; relative error below 1e-16 for z <= -30.
  const double r = 1.0 / (z * z);
  const double series = 1.0 - r * (1.0 - 3.0 * r * (1.0 - 5.0 * r * (1.0 - 7.0 * r)));
  return norm_log_pdf(z) - std::log(-z) + std::log(series);
}

inline double norm_log_sf(double z) { return norm_log_cdf(-z); }

/// Standard normal quantile (Wichura's AS 241, PPND16).
inline double norm_quantile(double p) {
  if (!(p >= 0.0 && p <= 1.0)) {
    throw invalid_probability("norm_quantile: probability outside [0, 1]");
  }
  if (p == 0.0) return -kInf;
  if (p == 1.0) return kInf;
  const double q = p - 0.5;
  if (std::fabs(q) <= 0.425) {
    const double r = 0.180625 - q * q;
    return q *
           (((((((2.5090809287301226727e+3 * r + 3.3430575583588128105e+4) * r +
                 6.7265770927008700853e+4) * r + 4.5921953931549871457e+4) * r +
               1.3731693765509461125e+4) * r + 1.9715909503065514427e+3) * r +
             1.3314166789178437745e+2) * r + 3.3871328727963666080e0) /
           (((((((5.2264952788528545610e+3 * r + 2.8729085735721942674e+4) * r +
                 3.9307895800092710610e+4) * r + 2.1213794301586595867e+4) * r +
               5.3941960214247511077e+3) * r + 6.8718700749205790830e+2) * r +
             4.2313330701600911252e+1) * r + 1.0);
  }
  double r = q < 0.0 ? p : 1.0 - p;
  r = std::sqrt(-std::log(r));
  double val;
  if (r <= 5.0) {
    r -= 1.6;
    val = (((((((7.74545014278341407640e-4 * r + 2.27238449892691845833e-2) * r +
                2.41780725177450611770e-1) * r + 1.27045825245236838258e0) * r +
              3.64784832476320460504e0) * r + 5.76949722146069140550e0) * r +
            4.63033784615654529590e0) * r + 1.42343711074968357734e0) /
          (((((((1.05075007164441684324e-9 * r + 5.47593808499534494600e-4) * r +
                1.51986665636164571966e-2) * r + 1.48103976427480074590e-1) * r +
              6.89767334985100004550e-1) * r + 1.67638483018380384940e0) * r +
            2.05319162663775882187e0) * r + 1.0);
  } else {
    r -= 5.0;
    val = (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r +
                1.24266094738807843860e-3) * r + 2.65321895265761230930e-2) * r +
              2.96560571828504891230e-1) * r + 1.78482653991729133580e0) * r +
            5.46378491116411436990e0) * r + 6.65790464350110377720e0) /
          (((((((2.04426310338993978564e-15 * r + 1.42151175831644588870e-7) * r +
                1.84631831751005468180e-5) * r + 7.86869131145613259100e-4) * r +
              1.48753612908506148525e-2) * r + 1.36929880922735805310e-1) * r +
            5.99832206555887937690e-1) * r + 1.0);
  }
  return q < 0.0 ? -val : val;
}

/// z such that norm_sf(z) = q; exact mirror of norm_quantile.
inline double norm_isf(double q) { return -norm_quantile(q); }

/// log(1 + exp(x)) without overflow.
inline double log1pexp(double x) {
  if (x > 35.0) return x;
  if (x < -35.0) return std::exp(x);
  return std::log1p(std::exp(x));
}

/// log(exp(a) + exp(b)).
inline double log_add_exp(double a, double b) {
  if (a == -kInf) return b;
  if (b == -kInf) return a;
  const double hi = a > b ? a : b;
  const double lo = a > b ? b : a;
  return hi + std::log1p(std::exp(lo - hi));
}

}  // namespace predint::special
