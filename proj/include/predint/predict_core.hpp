#pragma once

// Family-generic continuous prediction: plug-in bounds, calibration
// bootstrap, direct bootstrap, and the bootstrap form of the calibration
// predictive cdf
//
//   F_p(y) = (1/B) sum_b G(G^{-1}(G(y; theta_hat); theta*_b); theta_hat).
//
// The composition is evaluated through survival functions whenever
// G(y; theta_hat) > 0.5, so upper tails keep full relative precision.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "predint/boot.hpp"
#include "predint/dist.hpp"
#include "predint/errors.hpp"
#include "predint/fit.hpp"
#include "predint/roots.hpp"

namespace predint {

enum class Side { lower, upper };

inline std::string_view side_name(Side s) { return s == Side::lower ? "lower" : "upper"; }

inline Side parse_side(std::string_view s) {
  if (s == "lower") return Side::lower;
  if (s == "upper") return Side::upper;
  throw invalid_parameter("side must be 'lower' or 'upper', got '" + std::string(s) + "'");
}

enum class Construction { plugin, direct_bootstrap, calibration, gpq, fiducial };

inline std::string_view construction_name(Construction c) {
  switch (c) {
    case Construction::plugin: return "plugin";
    case Construction::direct_bootstrap: return "direct_bootstrap";
    case Construction::calibration: return "calibration";
    case Construction::gpq: return "gpq";
    case Construction::fiducial: return "fiducial";
  }
  return "unknown";
}

struct BoundDiagnostics {
  std::size_t B = 0;
  std::size_t failures = 0;
  /// Calibrated probability level u~ (calibration methods only).
  std::optional<double> u_tilde;
};

struct PredictionBound {
  Side side = Side::upper;
  double level = 0.95;  // 1 - alpha
  double endpoint = 0.0;
  std::string method;
  std::optional<BoundDiagnostics> diagnostics;
};

/// Equal-tailed two-sided interval: each side at level 1 - alpha/2.
struct PredictionInterval {
  PredictionBound lower;
  PredictionBound upper;
};

inline void check_alpha(double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw invalid_probability("alpha must lie in (0, 1)");
}

/// Probability level whose quantile is the bound: 1 - alpha (upper) or alpha (lower).
inline double bound_probability(double alpha, Side side) {
  check_alpha(alpha);
  return side == Side::upper ? 1.0 - alpha : alpha;
}

namespace detail {

// Running mean; exact when all terms are equal.
struct RunningMean {
  double value = 0.0;
  std::size_t count = 0;
  void add(double x) {
    ++count;
    value += (x - value) / static_cast<double>(count);
  }
};

}  // namespace detail

/// Evaluable predictive distribution with quantile inversion. The reference
/// kernel (typically the plug-in fit) supplies the support and a starting
/// point for root finding.
class PredictiveCdf {
 public:
  using Fn = std::function<double(double)>;

  PredictiveCdf(Construction construction, Fn cdf, Fn sf, Fn pdf, Kernel reference)
      : construction_(construction),
        cdf_(std::move(cdf)),
        sf_(std::move(sf)),
        pdf_(std::move(pdf)),
        reference_(std::move(reference)) {}

  Construction construction() const { return construction_; }
  const Kernel& reference() const { return reference_; }

  double cdf(double y) const { return std::clamp(cdf_(y), 0.0, 1.0); }
  double sf(double y) const { return std::clamp(sf_ ? sf_(y) : 1.0 - cdf_(y), 0.0, 1.0); }
  bool has_pdf() const { return static_cast<bool>(pdf_); }
  double pdf(double y) const {
    if (!pdf_) throw invalid_parameter("predictive cdf has no density");
    return pdf_(y);
  }

  /// inf{y : F_p(y) >= p}. Brackets from the reference quantile, then runs
  /// safeguarded Newton when a density is available and bisection otherwise.
  /// Probabilities above 1/2 are solved on the survival scale.
  double quantile(double p) const {
    if (!(p > 0.0 && p < 1.0)) throw invalid_probability("predictive quantile: p must lie in (0, 1)");
    const bool upper_half = p > 0.5;
    const double target = upper_half ? -(1.0 - p) : p;
    auto f = [&](double y) { return upper_half ? -sf(y) : cdf(y); };

    double guess = reference_.quantile(p);
    const bool positive = reference_.support_lower() == 0.0;
    double step = 1.0;
    if (is_location_scale(reference_.family())) {
      step = reference_.param(1);
    } else if (std::isfinite(guess) && guess != 0.0) {
      step = std::fabs(guess);
    }
    if (!std::isfinite(guess)) guess = positive ? 1.0 : 0.0;
    const auto [lo, hi] = roots::bracket_increasing(
        f, target, guess, step, positive ? roots::Domain::positive : roots::Domain::real_line);
    if (pdf_) {
      auto h = [&](double y) { return f(y) - target; };
      auto dh = [&](double y) { return pdf_(y); };
      return roots::newton_increasing(h, dh, lo, hi, guess);
    }
    return roots::bisect_increasing(f, target, lo, hi);
  }

 private:
  Construction construction_;
  Fn cdf_;
  Fn sf_;
  Fn pdf_;
  Kernel reference_;
};

/// Equal-weight mixture (1/B) sum_b G(y; theta_b).
inline PredictiveCdf mixture_cdf(Construction construction, std::vector<Kernel> components,
                                 Kernel reference) {
  if (components.empty()) throw empty_batch("predictive mixture needs at least one component");
  auto parts = std::make_shared<const std::vector<Kernel>>(std::move(components));
  auto cdf = [parts](double y) {
    detail::RunningMean m;
    for (const auto& k : *parts) m.add(k.cdf(y));
    return m.value;
  };
  auto sf = [parts](double y) {
    detail::RunningMean m;
    for (const auto& k : *parts) m.add(k.sf(y));
    return m.value;
  };
  auto pdf = [parts](double y) {
    detail::RunningMean m;
    for (const auto& k : *parts) m.add(k.pdf(y));
    return m.value;
  };
  return PredictiveCdf(construction, cdf, sf, pdf, std::move(reference));
}

inline PredictionBound bound_from_cdf(const PredictiveCdf& F, double alpha, Side side,
                                      std::string method) {
  PredictionBound b;
  b.side = side;
  b.level = 1.0 - alpha;
  b.endpoint = F.quantile(bound_probability(alpha, side));
  b.method = std::move(method);
  return b;
}

/// Equal-tailed two-sided interval from a predictive cdf.
inline PredictionInterval interval_from_cdf(const PredictiveCdf& F, double alpha, std::string method) {
  check_alpha(alpha);
  return {bound_from_cdf(F, 0.5 * alpha, Side::lower, method),
          bound_from_cdf(F, 0.5 * alpha, Side::upper, method)};
}

// ---------------------------------------------------------------------------
// Plug-in

inline PredictiveCdf plugin_cdf(const FitResult& fit) {
  return mixture_cdf(Construction::plugin, {fit.estimate}, fit.estimate);
}

inline PredictionBound plugin_bound(const FitResult& fit, double alpha, Side side) {
  PredictionBound b;
  b.side = side;
  b.level = 1.0 - alpha;
  b.endpoint = fit.estimate.quantile(bound_probability(alpha, side));
  b.method = "plugin";
  return b;
}

// ---------------------------------------------------------------------------
// Calibration bootstrap

enum class CalibrationQuantile {
  /// Type-1 empirical quantile of the u* values.
  empirical,
  /// Root of Hbar(u) = (1/B) sum_b G(G^{-1}(u; theta*_b); theta_hat), which
  /// needs no u* draws and matches the predictive-cdf quantile.
  smoothed,
};

/// inf{u : Fhat(u) >= p} over a sample (type-1 empirical quantile).
inline double empirical_quantile(std::vector<double> values, double p) {
  if (values.empty()) throw empty_batch("empirical quantile of an empty set");
  if (!(p > 0.0 && p < 1.0)) throw invalid_probability("empirical quantile: p must lie in (0, 1)");
  std::sort(values.begin(), values.end());
  const double n = static_cast<double>(values.size());
  // Smallest k with k / n >= p; the guard absorbs representation error in p*n.
  std::size_t k = static_cast<std::size_t>(std::ceil(p * n - 1e-9));
  k = std::clamp<std::size_t>(k, 1, values.size());
  return values[k - 1];
}

namespace detail {

// G(G^{-1}(u; star); hat), exact when star == hat.
inline double calibration_map(const Kernel& hat, const Kernel& star, double u) {
  if (star == hat) return u;
  if (u <= 0.5) return hat.cdf(star.quantile(u));
  return 1.0 - hat.sf(star.isf(1.0 - u));
}

// Hbar(u): averaged calibration map.
inline double calibration_h(const Kernel& hat, const std::vector<Kernel>& stars, double u) {
  RunningMean m;
  for (const auto& s : stars) m.add(calibration_map(hat, s, u));
  return m.value;
}

}  // namespace detail

/// Calibration bound from an existing bootstrap batch.
inline PredictionBound calibration_bound_from_batch(
    const FitResult& fit, const BootstrapBatch& batch, double alpha, Side side,
    const RngPolicy& policy, CalibrationQuantile mode = CalibrationQuantile::empirical) {
  if (fit.estimate.discrete()) throw unsupported_family("calibration bootstrap needs a continuous family");
  if (batch.estimates.empty()) throw empty_batch("calibration: bootstrap batch is empty");
  const double p = bound_probability(alpha, side);
  double u_tilde;
  if (mode == CalibrationQuantile::empirical) {
    u_tilde = empirical_quantile(calibration_u_values(fit, batch, policy), p);
  } else {
    auto h = [&](double u) { return detail::calibration_h(fit.estimate, batch.estimates, u); };
    // Full-precision bisection; with identity replicates Hbar(u) = u and the
    // result is exactly p.
    u_tilde = roots::bisect_increasing(h, p, 0.0, 1.0);
  }
  PredictionBound b;
  b.side = side;
  b.level = 1.0 - alpha;
  b.endpoint = fit.estimate.quantile(u_tilde);
  b.method = mode == CalibrationQuantile::empirical ? "calibration" : "calibration_smoothed";
  b.diagnostics = BoundDiagnostics{batch.B, batch.failures, u_tilde};
  return b;
}

/// Runs the parametric bootstrap (substreams of `policy`) and calibrates.
inline PredictionBound calibration_bootstrap_bound(
    const Sample& sample, const FitResult& fit, std::size_t B, double alpha, Side side,
    const RngPolicy& policy, CalibrationQuantile mode = CalibrationQuantile::empirical,
    unsigned threads = 0) {
  check_alpha(alpha);
  const auto batch = parametric_bootstrap(fit, sample.shape(), B, policy, threads);
  return calibration_bound_from_batch(fit, batch, alpha, side, policy, mode);
}

// ---------------------------------------------------------------------------
// Direct bootstrap and the calibration predictive cdf

inline PredictiveCdf direct_bootstrap_cdf(const FitResult& fit, const BootstrapBatch& batch) {
  if (batch.estimates.empty()) throw empty_batch("direct bootstrap: batch is empty");
  return mixture_cdf(Construction::direct_bootstrap, batch.estimates, fit.estimate);
}

inline PredictiveCdf calibration_predictive_cdf(const FitResult& fit, const BootstrapBatch& batch) {
  if (fit.estimate.discrete()) throw unsupported_family("calibration cdf needs a continuous family");
  if (batch.estimates.empty()) throw empty_batch("calibration cdf: batch is empty");
  auto stars = std::make_shared<const std::vector<Kernel>>(batch.estimates);
  const Kernel hat = fit.estimate;
  // Returns {lower-tail mass, upper-tail mass}; only the side that was
  // averaged directly is accurate to full relative precision.
  auto eval = [stars, hat](double y) -> std::pair<double, double> {
    const double g = hat.cdf(y);
    if (g <= 0.5) {
      detail::RunningMean m;
      for (const auto& s : *stars) m.add(s == hat ? g : hat.cdf(s.quantile(g)));
      return {m.value, 1.0 - m.value};
    }
    const double q = hat.sf(y);
    detail::RunningMean m;
    for (const auto& s : *stars) m.add(s == hat ? q : hat.sf(s.isf(q)));
    return {1.0 - m.value, m.value};
  };
  auto cdf = [eval](double y) { return eval(y).first; };
  auto sf = [eval](double y) { return eval(y).second; };
  // d/dy G(y_b; hat) with y_b = G^{-1}(G(y; hat); star): g_hat(y_b) g_hat(y) / g_star(y_b).
  auto pdf = [stars, hat](double y) {
    const double g = hat.cdf(y);
    const double log_gy = hat.log_pdf(y);
    detail::RunningMean m;
    for (const auto& s : *stars) {
      if (s == hat) {
        m.add(std::exp(log_gy));
        continue;
      }
      const double yb = g <= 0.5 ? s.quantile(g) : s.isf(hat.sf(y));
      m.add(std::isfinite(yb) ? std::exp(hat.log_pdf(yb) + log_gy - s.log_pdf(yb)) : 0.0);
    }
    return m.value;
  };
  return PredictiveCdf(Construction::calibration, cdf, sf, pdf, hat);
}

inline PredictionBound direct_bootstrap_bound(const FitResult& fit, const BootstrapBatch& batch,
                                              double alpha, Side side) {
  auto b = bound_from_cdf(direct_bootstrap_cdf(fit, batch), alpha, side, "direct_bootstrap");
  b.diagnostics = BoundDiagnostics{batch.B, batch.failures, std::nullopt};
  return b;
}

}  // namespace predint
