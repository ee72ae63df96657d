#pragma once

// Maximum likelihood estimation.
//
//  * normal, complete data: closed form (divisor-n variance).
//  * normal/logistic/sev otherwise: Newton on (mu, log sigma) with
//    backtracking line search, started from a least-squares fit of the
//    event order statistics on standardized plotting positions. Type-II
//    censored units contribute log S(z_(r)).
//  * gamma: the profiled shape equation log(a) - digamma(a) = log(mean/geomean)
//    solved by bracketed Newton; rate = shape / mean.
//  * inverse Gaussian: closed form.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "predint/dist.hpp"
#include "predint/errors.hpp"
#include "predint/sample.hpp"
#include "predint/special.hpp"

namespace predint {

struct FitResult {
  ModelSpec estimate;
  double loglik = 0.0;
  bool converged = false;
  int iterations = 0;
  /// Score norm in scale-free coordinates, divided by the event count.
  double gradient_norm = 0.0;
};

inline constexpr int kFitIterationCap = 200;
inline constexpr double kFitGradientTolerance = 1e-8;

namespace detail {

struct LsTerms {
  double value;  // g(z) or k(z)
  double d1;
  double d2;
};

// log density of the standard kernel and its z-derivatives.
inline LsTerms ls_event_terms(Family f, double z) {
  switch (f) {
    case Family::normal: return {special::norm_log_pdf(z), -z, -1.0};
    case Family::logistic: {
      const double F = 1.0 / (1.0 + std::exp(-z));
      return {-z - 2.0 * special::log1pexp(-z), 1.0 - 2.0 * F, -2.0 * F * (1.0 - F)};
    }
    default: {
      const double ez = std::exp(z);
      return {z - ez, 1.0 - ez, -ez};
    }
  }
}

// log survival of the standard kernel and its z-derivatives.
inline LsTerms ls_censored_terms(Family f, double z) {
  switch (f) {
    case Family::normal: {
      const double log_s = special::norm_log_sf(z);
      const double h = std::exp(special::norm_log_pdf(z) - log_s);
      return {log_s, -h, -h * (h - z)};
    }
    case Family::logistic: {
      const double F = 1.0 / (1.0 + std::exp(-z));
      return {-special::log1pexp(z), -F, -F * (1.0 - F)};
    }
    default: {
      const double ez = std::exp(z);
      return {-ez, -ez, -ez};
    }
  }
}

struct LsEval {
  double loglik;
  double d_mu;   // d loglik / d mu
  double d_tau;  // d loglik / d log sigma
  double h_mumu;
  double h_mutau;
  double h_tautau;
};

inline LsEval ls_evaluate(Family f, const Sample& s, double mu, double tau) {
  const double sigma = std::exp(tau);
  const auto events = s.events();
  const double r = static_cast<double>(events.size());
  double sum_g = 0.0, sum_d1 = 0.0, sum_d1z = 0.0, sum_d2 = 0.0, sum_d2z = 0.0, sum_d2zz = 0.0;
  for (double x : events) {
    const double z = (x - mu) / sigma;
    const LsTerms t = ls_event_terms(f, z);
    sum_g += t.value;
    sum_d1 += t.d1;
    sum_d1z += t.d1 * z;
    sum_d2 += t.d2;
    sum_d2z += t.d2 * z;
    sum_d2zz += t.d2 * z * z;
  }
  double loglik = -r * tau + sum_g;
  const double c = static_cast<double>(s.n() - events.size());
  if (c > 0.0) {
    const double z = (events.back() - mu) / sigma;
    const LsTerms t = ls_censored_terms(f, z);
    loglik += c * t.value;
    sum_d1 += c * t.d1;
    sum_d1z += c * t.d1 * z;
    sum_d2 += c * t.d2;
    sum_d2z += c * t.d2 * z;
    sum_d2zz += c * t.d2 * z * z;
  }
  LsEval e{};
  e.loglik = loglik;
  e.d_mu = -sum_d1 / sigma;
  e.d_tau = -r - sum_d1z;
  e.h_mumu = sum_d2 / (sigma * sigma);
  e.h_mutau = (sum_d2z + sum_d1) / sigma;
  e.h_tautau = sum_d2zz + sum_d1z;
  return e;
}

inline double ls_gradient_norm(const LsEval& e, double sigma, double r) {
  return std::hypot(sigma * e.d_mu, e.d_tau) / r;
}

// Least squares of event order statistics on standardized plotting
// positions (i - 0.3) / (n + 0.4).
inline std::pair<double, double> ls_start(Family f, const Sample& s) {
  const auto events = s.events();
  std::vector<double> x(events.begin(), events.end());
  std::sort(x.begin(), x.end());
  const double n = static_cast<double>(s.n());
  const std::size_t r = x.size();
  double mq = 0.0, mx = 0.0;
  std::vector<double> q(r);
  for (std::size_t i = 0; i < r; ++i) {
    q[i] = detail::std_quantile(f, (static_cast<double>(i + 1) - 0.3) / (n + 0.4));
    mq += q[i];
    mx += x[i];
  }
  mq /= static_cast<double>(r);
  mx /= static_cast<double>(r);
  double sqq = 0.0, sqx = 0.0;
  for (std::size_t i = 0; i < r; ++i) {
    sqq += (q[i] - mq) * (q[i] - mq);
    sqx += (q[i] - mq) * (x[i] - mx);
  }
  double slope = sqx / sqq;
  if (!(slope > 0.0)) {
    // Fall back to the event standard deviation.
    double v = 0.0;
    for (double xi : x) v += (xi - mx) * (xi - mx);
    slope = std::sqrt(v / static_cast<double>(r));
  }
  return {mx - slope * mq, slope};
}

inline FitResult fit_location_scale(Family f, const Sample& input) {
  if (input.r() < 2) throw invalid_parameter("location-scale fitting needs at least 2 events");
  // Uncensored data are processed in sorted order so that a Type-II sample
  // with r = n (stored sorted) gives bit-identical results.
  Sample sorted_complete;
  if (!input.censored()) {
    std::vector<double> v(input.values().begin(), input.values().end());
    std::sort(v.begin(), v.end());
    sorted_complete = Sample::complete(std::move(v));
  }
  const Sample& s = input.censored() ? input : sorted_complete;
  const auto events = s.events();
  const auto [mn, mx] = std::minmax_element(events.begin(), events.end());
  if (*mn == *mx) throw degenerate_sample("all event values are identical; scale estimate undefined");

  if (f == Family::normal && !s.censored()) {
    const double n = static_cast<double>(s.n());
    double mean = 0.0;
    for (double x : events) mean += x;
    mean /= n;
    double ss = 0.0;
    for (double x : events) ss += (x - mean) * (x - mean);
    const double sigma = std::sqrt(ss / n);
    if (!(sigma > 0.0)) throw degenerate_sample("zero sample variance");
    const LsEval e = ls_evaluate(f, s, mean, std::log(sigma));
    return FitResult{Kernel::normal(mean, sigma), e.loglik, true, 0, ls_gradient_norm(e, sigma, n)};
  }

  const double r = static_cast<double>(s.r());
  auto [mu, sigma0] = ls_start(f, s);
  double tau = std::log(sigma0);
  LsEval e = ls_evaluate(f, s, mu, tau);
  for (int it = 0; it <= kFitIterationCap; ++it) {
    const double gn = ls_gradient_norm(e, std::exp(tau), r);
    if (gn <= kFitGradientTolerance) {
      // A few pure Newton steps take the tolerance-level optimum to machine
      // precision, so fits of transformed data agree to ~1e-15.
      for (int k = 0; k < 4; ++k) {
        const double det = e.h_mumu * e.h_tautau - e.h_mutau * e.h_mutau;
        if (!(e.h_mumu < 0.0 && det > 0.0)) break;
        const double step_mu = -(e.h_tautau * e.d_mu - e.h_mutau * e.d_tau) / det;
        const double step_tau = -(-e.h_mutau * e.d_mu + e.h_mumu * e.d_tau) / det;
        if (std::fabs(step_mu) / std::exp(tau) + std::fabs(step_tau) <= 1e-15) break;
        const LsEval trial = ls_evaluate(f, s, mu + step_mu, tau + step_tau);
        if (!std::isfinite(trial.loglik) ||
            ls_gradient_norm(trial, std::exp(tau + step_tau), r) > kFitGradientTolerance) {
          break;
        }
        mu += step_mu;
        tau += step_tau;
        e = trial;
      }
      return FitResult{Kernel::location_scale(f, mu, std::exp(tau)), e.loglik, true, it,
                       ls_gradient_norm(e, std::exp(tau), r)};
    }
    if (it == kFitIterationCap) break;
    double step_mu;
    double step_tau;
    const double det = e.h_mumu * e.h_tautau - e.h_mutau * e.h_mutau;
    if (e.h_mumu < 0.0 && det > 0.0) {
      step_mu = -(e.h_tautau * e.d_mu - e.h_mutau * e.d_tau) / det;
      step_tau = -(-e.h_mutau * e.d_mu + e.h_mumu * e.d_tau) / det;
    } else {
      const double sigma = std::exp(tau);
      step_mu = e.d_mu * sigma * sigma / r;
      step_tau = e.d_tau / r;
    }
    double t = 1.0;
    bool accepted = false;
    const double floor_ll = e.loglik - 1e-13 * (1.0 + std::fabs(e.loglik));
    for (int k = 0; k < 60; ++k) {
      const double mu_new = mu + t * step_mu;
      const double tau_new = tau + t * step_tau;
      const LsEval trial = ls_evaluate(f, s, mu_new, tau_new);
      if (std::isfinite(trial.loglik) && trial.loglik >= floor_ll) {
        mu = mu_new;
        tau = tau_new;
        e = trial;
        accepted = true;
        break;
      }
      t *= 0.5;
    }
    if (!accepted) break;
  }
  std::ostringstream msg;
  msg << family_name(f) << " ML did not converge within " << kFitIterationCap
      << " iterations (mu=" << mu << ", sigma=" << std::exp(tau)
      << ", scaled gradient=" << ls_gradient_norm(e, std::exp(tau), r) << ")";
  throw convergence_error(msg.str());
}

inline void require_positive_complete(const Sample& s, const char* family) {
  if (s.censored()) {
    throw invalid_parameter(std::string(family) + " fitting supports complete data only");
  }
  for (double x : s.values()) {
    if (!(x >= 0.0) || !std::isfinite(x)) {
      throw invalid_parameter(std::string(family) + " data must be positive and finite");
    }
    // Zero is in the closure of the support (e.g. an underflowed draw) but
    // makes the likelihood unbounded.
    if (x == 0.0) throw degenerate_sample(std::string(family) + ": zero observation");
  }
  if (s.n() < 2) throw invalid_parameter(std::string(family) + " fitting needs n >= 2");
  const auto v = s.values();
  if (std::all_of(v.begin(), v.end(), [&](double x) { return x == v.front(); })) {
    throw degenerate_sample(std::string(family) + ": all values identical");
  }
}

/// log(arithmetic mean / geometric mean) of positive data.
inline double log_mean_ratio(std::span<const double> x) {
  double sum = 0.0, sum_log = 0.0;
  for (double v : x) {
    sum += v;
    sum_log += std::log(v);
  }
  const double n = static_cast<double>(x.size());
  return std::log(sum / n) - sum_log / n;
}

inline FitResult fit_gamma(const Sample& s) {
  require_positive_complete(s, "gamma");
  const auto x = s.values();
  const double n = static_cast<double>(x.size());
  double sum = 0.0;
  for (double v : x) sum += v;
  const double mean = sum / n;
  const double lr = log_mean_ratio(x);
  if (!(lr > 0.0)) throw degenerate_sample("gamma: arithmetic and geometric means coincide");

  // f(a) = log(a) - digamma(a) - lr is strictly decreasing from +inf to -lr.
  auto f = [&](double a) { return std::log(a) - special::digamma(a) - lr; };
  auto df = [&](double a) { return 1.0 / a - special::trigamma(a); };
  double a = (3.0 - lr + std::sqrt((lr - 3.0) * (lr - 3.0) + 24.0 * lr)) / (12.0 * lr);
  double lo = a, hi = a;
  while (f(lo) <= 0.0) lo *= 0.5;
  while (f(hi) >= 0.0) hi *= 2.0;
  int it = 0;
  for (; it < kFitIterationCap; ++it) {
    const double fa = f(a);
    if (fa > 0.0) {
      lo = a;
    } else if (fa < 0.0) {
      hi = a;
    } else {
      break;
    }
    double next = a - fa / df(a);
    if (!(next > lo && next < hi)) next = std::sqrt(lo * hi);
    if (std::fabs(next - a) <= 4.0 * special::kEps * a) {
      a = next;
      break;
    }
    a = next;
  }
  const double rate = a / mean;
  const ModelSpec est = Kernel::gamma(a, rate);
  double ll = 0.0;
  for (double v : x) ll += est.log_pdf(v);
  const double d_shape = n * f(a);
  const double d_rate = n * a / rate - sum;
  const double gn = std::hypot(a * d_shape, rate * d_rate) / n;
  if (gn > kFitGradientTolerance) {
    std::ostringstream msg;
    msg << "gamma ML did not converge (alpha=" << a << ", scaled gradient=" << gn << ")";
    throw convergence_error(msg.str());
  }
  return FitResult{est, ll, true, it, gn};
}

inline FitResult fit_inverse_gaussian(const Sample& s) {
  require_positive_complete(s, "inverse_gaussian");
  const auto x = s.values();
  const double n = static_cast<double>(x.size());
  double sum = 0.0;
  for (double v : x) sum += v;
  const double mean = sum / n;
  double denom = 0.0;
  for (double v : x) denom += 1.0 / v - 1.0 / mean;
  if (!(denom > 0.0) || !std::isfinite(denom)) {
    throw degenerate_sample("inverse_gaussian: sum of (1/x - 1/mean) is not positive");
  }
  const double lam = n / denom;
  const ModelSpec est = Kernel::inverse_gaussian(mean, lam);
  double ll = 0.0;
  double d_mu = 0.0;
  double d_lam = n / (2.0 * lam);
  for (double v : x) {
    ll += est.log_pdf(v);
    d_mu += lam * (v - mean) / (mean * mean * mean);
    d_lam -= (v - mean) * (v - mean) / (2.0 * mean * mean * v);
  }
  return FitResult{est, ll, true, 0, std::hypot(mean * d_mu, lam * d_lam) / n};
}

}  // namespace detail

/// Log-likelihood of `model` for `sample` (Type-II censoring honoured for
/// location-scale families).
inline double log_likelihood(const ModelSpec& model, const Sample& sample) {
  const Family f = model.family();
  if (is_location_scale(f)) {
    return detail::ls_evaluate(f, sample, model.param(0), std::log(model.param(1))).loglik;
  }
  if (sample.censored()) throw invalid_parameter("censored likelihood needs a location-scale family");
  double ll = 0.0;
  for (double x : sample.values()) ll += model.log_pdf(x);
  return ll;
}

/// Score vector with respect to the stored parameters: (mu, sigma),
/// (alpha, lambda) or (mu, lambda).
inline std::vector<double> score(const ModelSpec& model, const Sample& sample) {
  const Family f = model.family();
  if (is_location_scale(f)) {
    const double sigma = model.param(1);
    const auto e = detail::ls_evaluate(f, sample, model.param(0), std::log(sigma));
    return {e.d_mu, e.d_tau / sigma};
  }
  const auto x = sample.values();
  const double n = static_cast<double>(x.size());
  if (f == Family::gamma) {
    const double a = model.param(0);
    const double rate = model.param(1);
    double sum = 0.0, sum_log = 0.0;
    for (double v : x) {
      sum += v;
      sum_log += std::log(v);
    }
    return {n * std::log(rate) + sum_log - n * special::digamma(a), n * a / rate - sum};
  }
  if (f == Family::inverse_gaussian) {
    const double mu = model.param(0);
    const double lam = model.param(1);
    double d_mu = 0.0, d_lam = n / (2.0 * lam);
    for (double v : x) {
      d_mu += lam * (v - mu) / (mu * mu * mu);
      d_lam -= (v - mu) * (v - mu) / (2.0 * mu * mu * v);
    }
    return {d_mu, d_lam};
  }
  throw unsupported_family("score: unsupported family " + std::string(family_name(f)));
}

inline bool fit_supported(Family f) {
  return is_location_scale(f) || f == Family::gamma || f == Family::inverse_gaussian;
}

/// Maximum likelihood fit. Throws degenerate_sample for samples where the
/// estimate is undefined and convergence_error after the iteration cap.
inline FitResult fit_ml(Family family, const Sample& sample) {
  if (sample.n() == 0) throw invalid_parameter("fit_ml: empty sample");
  for (double x : sample.values()) {
    if (!std::isfinite(x)) throw invalid_parameter("fit_ml: non-finite observation");
  }
  if (is_location_scale(family)) return detail::fit_location_scale(family, sample);
  if (family == Family::gamma) return detail::fit_gamma(sample);
  if (family == Family::inverse_gaussian) return detail::fit_inverse_gaussian(sample);
  throw unsupported_family("fit_ml: no ML fitting for family " + std::string(family_name(family)));
}

}  // namespace predint
