#pragma once

// Parametric bootstrap: resample from the fitted model, refit, and collect
// the calibration variables u* = G(y*; theta*).

#include <cmath>
#include <cstddef>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "predint/dist.hpp"
#include "predint/errors.hpp"
#include "predint/fit.hpp"
#include "predint/parallel.hpp"
#include "predint/rng.hpp"
#include "predint/sample.hpp"

namespace predint {

inline constexpr std::size_t kDefaultIntervalB = 5000;
inline constexpr std::size_t kDefaultCoverageB = 2000;
inline constexpr double kMaxBootstrapFailureRate = 0.1;

struct BootstrapBatch {
  std::size_t B = 0;
  /// Refitted estimates of the surviving replicates, in replicate order.
  std::vector<ModelSpec> estimates;
  /// Replicate index b of each surviving estimate.
  std::vector<std::size_t> replicate_index;
  std::size_t failures = 0;
  std::optional<std::vector<double>> u_values;

  std::size_t size() const { return estimates.size(); }
};

/// Batch whose every replicate equals the fit; the bootstrap collapses to
/// plug-in. Useful as a reference point.
inline BootstrapBatch identity_batch(const FitResult& fit, std::size_t B) {
  if (B == 0) throw invalid_parameter("bootstrap: B must be >= 1");
  BootstrapBatch batch;
  batch.B = B;
  batch.estimates.assign(B, fit.estimate);
  batch.replicate_index.resize(B);
  for (std::size_t b = 0; b < B; ++b) batch.replicate_index[b] = b;
  return batch;
}

/// Draws one bootstrap data set of the given shape from `model`. Type-II
/// shapes draw n lifetimes and censor at the r-th order statistic.
inline Sample draw_sample(const ModelSpec& model, const SampleShape& shape, Rng& rng) {
  std::vector<double> x = model.draw(rng, shape.n);
  if (shape.censoring == Censoring::type2) return Sample::type2(std::move(x), shape.r);
  return Sample::complete(std::move(x));
}

/// B parametric bootstrap refits. Replicate b uses substream
/// (b, bootstrap_sample) of `policy`, so the batch is identical for any
/// thread count. Degenerate or non-converging refits are dropped and counted.
inline BootstrapBatch parametric_bootstrap(const FitResult& fit, const SampleShape& shape,
                                           std::size_t B, const RngPolicy& policy,
                                           unsigned threads = 0) {
  const Family family = fit.estimate.family();
  if (!fit_supported(family)) {
    throw unsupported_family("parametric bootstrap is not defined for family " +
                             std::string(family_name(family)));
  }
  if (!fit.converged) throw invalid_parameter("parametric bootstrap requires a converged fit");
  if (B == 0) throw invalid_parameter("bootstrap: B must be >= 1");
  if (shape.n == 0) throw invalid_parameter("bootstrap: sample size must be >= 1");

  std::vector<std::optional<ModelSpec>> refits(B);
  parallel_for(
      B,
      [&](std::size_t b) {
        Rng rng = policy.substream(b, StreamPurpose::bootstrap_sample);
        try {
          refits[b] = fit_ml(family, draw_sample(fit.estimate, shape, rng)).estimate;
        } catch (const numerical_failure&) {
          refits[b].reset();
        }
      },
      threads);

  BootstrapBatch batch;
  batch.B = B;
  batch.estimates.reserve(B);
  batch.replicate_index.reserve(B);
  for (std::size_t b = 0; b < B; ++b) {
    if (refits[b]) {
      batch.estimates.push_back(*refits[b]);
      batch.replicate_index.push_back(b);
    } else {
      ++batch.failures;
    }
  }
  if (static_cast<double>(batch.failures) > kMaxBootstrapFailureRate * static_cast<double>(B) ||
      batch.estimates.empty()) {
    std::ostringstream msg;
    msg << "bootstrap: " << batch.failures << " of " << B << " replicates failed for "
        << family_name(family) << " at n=" << shape.n;
    throw excessive_failures(msg.str());
  }
  return batch;
}

/// u*_b = G(y*_b; theta*_b) with y*_b drawn from G(.; theta_hat) on substream
/// (b, bootstrap_predictand). Returned in batch order.
inline std::vector<double> calibration_u_values(const FitResult& fit, const BootstrapBatch& batch,
                                                const RngPolicy& policy) {
  if (batch.estimates.empty()) throw empty_batch("calibration: bootstrap batch is empty");
  std::vector<double> u(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    Rng rng = policy.substream(batch.replicate_index[i], StreamPurpose::bootstrap_predictand);
    const double y = fit.estimate.draw(rng);
    const double v = batch.estimates[i].cdf(y);
    if (!(v >= 0.0 && v <= 1.0)) throw numerical_failure("calibration: u* outside [0, 1]");
    u[i] = v;
  }
  return u;
}

}  // namespace predint
