#pragma once

// Fiducial predictive distributions.
//
// Gamma: approximate fiducial law of the shape from W = 2 n alpha log(xbar /
// geomean) ~ c chi^2_v, with c and v matched to the first two moments of W
// at the ML shape; then lambda_b = chi^2_{2 n alpha_b} / (2 sum x).
//
// Inverse Gaussian: lambda_b = chi^2_{n-1} / sum(1/x - 1/xbar). Given
// lambda_b and u_b ~ U(0,1), mu_b inverts the structural equation
// xbar / lambda = Q(u; mu / lambda, n), using Xbar / lambda ~ IG(mu / lambda, n).
// When xbar / lambda_b is at or beyond the mu -> infinity quantile there is
// no finite solution and mu_b = +inf.

#include <cmath>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "predint/dist.hpp"
#include "predint/errors.hpp"
#include "predint/fit.hpp"
#include "predint/parallel.hpp"
#include "predint/predict_core.hpp"
#include "predint/rng.hpp"
#include "predint/sample.hpp"
#include "predint/special.hpp"

namespace predint {

inline constexpr std::size_t kDefaultFiducialB = 10000;

struct FiducialDraws {
  Family family = Family::gamma;
  /// (alpha_b, lambda_b) for gamma; (mu_b, lambda_b) for inverse Gaussian,
  /// where mu_b may be +inf.
  std::vector<std::pair<double, double>> draws;

  std::size_t size() const { return draws.size(); }

  Kernel kernel(std::size_t b) const {
    const auto [a, l] = draws.at(b);
    return family == Family::gamma ? Kernel::gamma(a, l) : Kernel::inverse_gaussian(a, l);
  }
};

/// Moment-matched (c, v) with W ~ c chi^2_v at shape `alpha` and size n.
inline std::pair<double, double> gamma_fiducial_moments(double alpha, double n) {
  const double e_s1 = special::digamma(n * alpha) - std::log(n) - special::digamma(alpha);
  const double var_s1 = special::trigamma(alpha) / n - special::trigamma(n * alpha);
  const double e_w = 2.0 * n * alpha * e_s1;
  const double var_w = 4.0 * n * n * alpha * alpha * var_s1;
  if (!(e_w > 0.0) || !(var_w > 0.0)) {
    throw numerical_failure("gamma fiducial: nonpositive moment of W");
  }
  const double v = 2.0 * e_w * e_w / var_w;
  return {e_w / v, v};
}

inline FiducialDraws gamma_fiducial_draws(const Sample& sample, std::size_t B, const RngPolicy& policy,
                                          unsigned threads = 0) {
  if (B == 0) throw invalid_parameter("fiducial: B must be >= 1");
  const FitResult fit = fit_ml(Family::gamma, sample);  // validates and rejects degenerate data
  const auto x = sample.values();
  const double n = static_cast<double>(x.size());
  const double lr = detail::log_mean_ratio(x);
  if (!(lr > 0.0)) throw degenerate_sample("gamma fiducial: geometric mean equals arithmetic mean");
  double sum = 0.0;
  for (double v : x) sum += v;
  const auto [c, v] = gamma_fiducial_moments(fit.estimate.param(0), n);

  FiducialDraws out;
  out.family = Family::gamma;
  out.draws.resize(B);
  parallel_for(
      B,
      [&](std::size_t b) {
        Rng rng = policy.substream(b, StreamPurpose::fiducial);
        const double chi_v = 2.0 * Kernel::standard_gamma(rng, 0.5 * v);
        const double a = c * chi_v / (2.0 * n * lr);
        const double l = Kernel::standard_gamma(rng, n * a) / sum;
        if (!(a > 0.0 && l > 0.0 && std::isfinite(a) && std::isfinite(l))) {
          throw numerical_failure("gamma fiducial: non-positive draw");
        }
        out.draws[b] = {a, l};
      },
      threads);
  return out;
}

namespace detail {

// Solves IG_cdf(x; m, n) = u for m on (0, 1e12 x]; the cdf decreases in m.
// Log-scale bisection to full double precision.
inline double invgauss_structural_mean(double x, double u, double n) {
  auto F = [&](double log_m) { return Kernel::inverse_gaussian(std::exp(log_m), n).cdf(x); };
  double hi = std::log(x) + std::log(1e12);
  if (!(F(hi) < u)) throw root_not_bracketed("inverse Gaussian fiducial: mean exceeds 1e12 * xbar");
  double lo = std::log(x) - 5.0;
  for (int i = 0; i < 200 && F(lo) < u; ++i) lo -= 5.0;
  if (F(lo) < u) throw root_not_bracketed("inverse Gaussian fiducial: no lower bracket");
  for (int i = 0; i < 4000; ++i) {
    const double mid = lo + 0.5 * (hi - lo);
    if (mid <= lo || mid >= hi) break;
    if (F(mid) >= u) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return std::exp(lo + 0.5 * (hi - lo));
}

}  // namespace detail

inline FiducialDraws invgauss_fiducial_draws(const Sample& sample, std::size_t B, const RngPolicy& policy,
                                             unsigned threads = 0) {
  if (B == 0) throw invalid_parameter("fiducial: B must be >= 1");
  fit_ml(Family::inverse_gaussian, sample);  // validates and rejects degenerate data
  const auto x = sample.values();
  const double n = static_cast<double>(x.size());
  double sum = 0.0;
  for (double v : x) sum += v;
  const double mean = sum / n;
  double denom = 0.0;
  for (double v : x) denom += 1.0 / v - 1.0 / mean;

  const Kernel limit = Kernel::inverse_gaussian_limit(n);
  FiducialDraws out;
  out.family = Family::inverse_gaussian;
  out.draws.resize(B);
  parallel_for(
      B,
      [&](std::size_t b) {
        Rng rng = policy.substream(b, StreamPurpose::fiducial);
        const double lambda = 2.0 * Kernel::standard_gamma(rng, 0.5 * (n - 1.0)) / denom;
        const double u = rng.uniform();
        const double ratio = mean / lambda;
        if (ratio >= limit.quantile(u)) {
          out.draws[b] = {special::kInf, lambda};
        } else {
          out.draws[b] = {detail::invgauss_structural_mean(ratio, u, n) * lambda, lambda};
        }
      },
      threads);
  return out;
}

/// F_p(y) = (1/B) sum_b G(y; theta_b); infinite-mean inverse Gaussian draws
/// use the limit kernel.
inline PredictiveCdf fiducial_predictive_cdf(const FiducialDraws& draws) {
  if (draws.draws.empty()) throw empty_batch("fiducial predictive cdf: no draws");
  std::vector<Kernel> parts;
  parts.reserve(draws.size());
  for (std::size_t b = 0; b < draws.size(); ++b) parts.push_back(draws.kernel(b));
  Kernel reference = parts.front();
  return mixture_cdf(Construction::fiducial, std::move(parts), std::move(reference));
}

inline PredictionBound fiducial_bound(const FiducialDraws& draws, double alpha, Side side) {
  auto b = bound_from_cdf(fiducial_predictive_cdf(draws), alpha, side, "fiducial");
  b.diagnostics = BoundDiagnostics{draws.size(), 0, std::nullopt};
  return b;
}

/// Fiducial draws for a gamma or inverse Gaussian sample.
inline FiducialDraws fiducial_draws(Family family, const Sample& sample, std::size_t B,
                                    const RngPolicy& policy, unsigned threads = 0) {
  if (family == Family::gamma) return gamma_fiducial_draws(sample, B, policy, threads);
  if (family == Family::inverse_gaussian) return invgauss_fiducial_draws(sample, B, policy, threads);
  throw unsupported_family("fiducial predictive distributions exist for gamma and inverse_gaussian only");
}

}  // namespace predint
