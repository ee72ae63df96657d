#pragma once

// Location-scale specializations: generalized pivotal quantities built from
// bootstrap refits, and the Student-t bound for complete normal samples.

#include <cmath>
#include <vector>

#include "predint/boot.hpp"
#include "predint/dist.hpp"
#include "predint/errors.hpp"
#include "predint/fit.hpp"
#include "predint/predict_core.hpp"
#include "predint/sample.hpp"

namespace predint {

struct GpqDraw {
  double mu_ss;
  double sigma_ss;
};

/// mu** = mu + sigma (mu - mu*) / sigma*,  sigma** = sigma^2 / sigma*.
inline GpqDraw gpq_transform(double mu, double sigma, double mu_star, double sigma_star) {
  if (!(sigma > 0.0)) throw invalid_parameter("gpq_transform: sigma must be positive");
  if (!(sigma_star > 0.0)) throw degenerate_sample("gpq_transform: bootstrap scale is not positive");
  return {mu + sigma * (mu - mu_star) / sigma_star, sigma * sigma / sigma_star};
}

inline std::vector<GpqDraw> gpq_draws(const FitResult& fit, const BootstrapBatch& batch) {
  if (!is_location_scale(fit.estimate.family())) {
    throw unsupported_family("GPQ draws need a location-scale family");
  }
  const double mu = fit.estimate.param(0), sigma = fit.estimate.param(1);
  std::vector<GpqDraw> out;
  out.reserve(batch.size());
  for (const auto& e : batch.estimates) out.push_back(gpq_transform(mu, sigma, e.param(0), e.param(1)));
  return out;
}

/// F_p(y) = (1/B) sum_b Phi((y - mu**_b) / sigma**_b).
inline PredictiveCdf gpq_predictive_cdf(const FitResult& fit, const BootstrapBatch& batch) {
  if (batch.estimates.empty()) throw empty_batch("GPQ predictive cdf: batch is empty");
  const Family f = fit.estimate.family();
  std::vector<Kernel> parts;
  parts.reserve(batch.size());
  for (const auto& d : gpq_draws(fit, batch)) parts.push_back(Kernel::location_scale(f, d.mu_ss, d.sigma_ss));
  return mixture_cdf(Construction::gpq, std::move(parts), fit.estimate);
}

inline PredictionBound gpq_bound(const FitResult& fit, const BootstrapBatch& batch, double alpha,
                                 Side side) {
  auto b = bound_from_cdf(gpq_predictive_cdf(fit, batch), alpha, side, "gpq");
  b.diagnostics = BoundDiagnostics{batch.B, batch.failures, std::nullopt};
  return b;
}

/// xbar +/- t_{1-alpha, n-1} s sqrt(1 + 1/n), s with divisor n - 1.
inline PredictionBound normal_exact_bound(const Sample& sample, double alpha, Side side) {
  if (sample.censored()) throw invalid_parameter("normal_exact_bound needs complete data");
  const auto x = sample.values();
  const std::size_t n = x.size();
  if (n < 2) throw invalid_parameter("normal_exact_bound needs n >= 2");
  const double p = bound_probability(alpha, side);
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= static_cast<double>(n);
  double ss = 0.0;
  for (double v : x) ss += (v - mean) * (v - mean);
  const double s = std::sqrt(ss / static_cast<double>(n - 1));
  if (!(s > 0.0)) throw degenerate_sample("normal_exact_bound: zero sample variance");
  const double t = Kernel::student_t(static_cast<double>(n - 1)).quantile(p);
  PredictionBound b;
  b.side = side;
  b.level = 1.0 - alpha;
  b.endpoint = mean + t * s * std::sqrt(1.0 + 1.0 / static_cast<double>(n));
  b.method = "normal_exact";
  return b;
}

}  // namespace predint
