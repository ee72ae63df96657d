#pragma once

// Coverage-probability harness: Monte Carlo estimation for any method at a
// configured truth, and exact enumeration for the discrete suites.

#include <charconv>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <ctime>
#include <functional>
#include <iomanip>
#include <limits>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "predint/boot.hpp"
#include "predint/dist.hpp"
#include "predint/errors.hpp"
#include "predint/fit.hpp"
#include "predint/npar.hpp"
#include "predint/parallel.hpp"
#include "predint/predict_core.hpp"
#include "predint/predict_disc.hpp"
#include "predint/predict_fid.hpp"
#include "predint/predict_ls.hpp"
#include "predint/rng.hpp"
#include "predint/sample.hpp"

namespace predint {

enum class MethodKind {
  oracle,  // quantile of the true model
  plugin,
  calibration,
  calibration_smoothed,
  direct_bootstrap,
  gpq,
  normal_exact,
  fiducial,
  order_stat,
  conformal,
  discrete,
};

inline constexpr std::array kAllMethodKinds = {
    MethodKind::oracle,      MethodKind::plugin,    MethodKind::calibration,
    MethodKind::calibration_smoothed, MethodKind::direct_bootstrap, MethodKind::gpq,
    MethodKind::normal_exact, MethodKind::fiducial, MethodKind::order_stat,
    MethodKind::conformal,   MethodKind::discrete,
};

inline std::string_view method_kind_name(MethodKind k) {
  switch (k) {
    case MethodKind::oracle: return "oracle";
    case MethodKind::plugin: return "plugin";
    case MethodKind::calibration: return "calibration";
    case MethodKind::calibration_smoothed: return "calibration_smoothed";
    case MethodKind::direct_bootstrap: return "direct_bootstrap";
    case MethodKind::gpq: return "gpq";
    case MethodKind::normal_exact: return "normal_exact";
    case MethodKind::fiducial: return "fiducial";
    case MethodKind::order_stat: return "order_stat";
    case MethodKind::conformal: return "conformal";
    case MethodKind::discrete: return "discrete";
  }
  return "unknown";
}

inline MethodKind parse_method_kind(std::string_view s) {
  for (MethodKind k : kAllMethodKinds) {
    if (method_kind_name(k) == s) return k;
  }
  throw invalid_parameter("unknown method '" + std::string(s) + "'");
}

enum class CoverageSide { lower, upper, two_sided };

inline std::string_view coverage_side_name(CoverageSide s) {
  switch (s) {
    case CoverageSide::lower: return "lower";
    case CoverageSide::upper: return "upper";
    case CoverageSide::two_sided: return "two_sided";
  }
  return "unknown";
}

inline CoverageSide parse_coverage_side(std::string_view s) {
  if (s == "lower") return CoverageSide::lower;
  if (s == "upper") return CoverageSide::upper;
  if (s == "two_sided") return CoverageSide::two_sided;
  throw invalid_parameter("side must be lower, upper or two_sided, got '" + std::string(s) + "'");
}

struct MethodConfig {
  MethodKind kind = MethodKind::plugin;
  std::size_t B = kDefaultCoverageB;
  std::size_t fiducial_B = kDefaultFiducialB;
  // discrete
  DiscreteMethod discrete = DiscreteMethod::conservative;
  std::size_t discrete_fiducial_B = 100000;
  bool kp_substitute_candidate = true;
  // order statistics; s = 0 means s = n
  std::size_t r = 1;
  std::size_t s = 0;
  // conformal
  std::string measure = "mean";
  bool randomize = false;

  /// Identifier used in reports, e.g. "gpq" or "discrete:conservative".
  std::string id() const {
    std::string out(method_kind_name(kind));
    if (kind == MethodKind::discrete) out += ":" + std::string(discrete_method_name(discrete));
    if (kind == MethodKind::conformal) out += ":" + measure + (randomize ? ":randomized" : "");
    return out;
  }
};

inline constexpr std::size_t kDefaultCoverageNsim = 10000;
inline constexpr double kMaxCoverageFailureRate = 0.01;

struct CoverageConfig {
  MethodConfig method;
  /// Continuous: the data distribution. Binomial: Kernel::binomial(n, p).
  /// Poisson: Kernel::poisson(lambda), the rate per unit of exposure.
  ModelSpec truth = Kernel::normal(0.0, 1.0);
  double n = 10;
  double m = 1;  // predictand size (discrete problems only)
  double alpha = 0.05;
  CoverageSide side = CoverageSide::upper;
  std::size_t n_sim = kDefaultCoverageNsim;
  std::uint64_t seed = 1;
  unsigned threads = 0;
  /// Type-II event count (continuous location-scale methods only).
  std::optional<std::size_t> r;

  bool discrete() const { return method.kind == MethodKind::discrete; }

  DiscreteKind discrete_kind() const {
    if (truth.family() == Family::binomial) return DiscreteKind::binomial;
    if (truth.family() == Family::poisson) return DiscreteKind::poisson;
    throw unsupported_family("discrete methods need a binomial or Poisson truth");
  }

  void validate() const {
    check_alpha(alpha);
    if (n_sim < 100) throw invalid_parameter("n_sim must be at least 100");
    if (discrete()) {
      const DiscreteKind kind = discrete_kind();
      if (!method_applies(kind, method.discrete)) {
        throw invalid_parameter(std::string(discrete_method_name(method.discrete)) +
                                " does not apply to Poisson problems");
      }
      if (kind == DiscreteKind::binomial && truth.param(0) != n) {
        throw invalid_parameter("binomial truth must have n trials equal to the configured n");
      }
      DiscretePredictionProblem probe{kind, 0.0, n, m, side == CoverageSide::two_sided ? 0.5 * alpha : alpha};
      probe.validate();
      return;
    }
    if (truth.discrete()) throw unsupported_family("continuous methods need a continuous truth");
    if (!(n >= 1.0) || std::floor(n) != n) throw invalid_parameter("n must be a positive integer");
    const auto nn = static_cast<std::size_t>(n);
    if (r && method.kind != MethodKind::oracle) {
      SampleShape::type2(nn, *r);
      if (method.kind == MethodKind::normal_exact || method.kind == MethodKind::fiducial ||
          method.kind == MethodKind::order_stat || method.kind == MethodKind::conformal) {
        throw invalid_parameter(std::string(method_kind_name(method.kind)) + " needs complete data");
      }
    }
    switch (method.kind) {
      case MethodKind::order_stat: {
        const std::size_t s = method.s == 0 ? nn : method.s;
        if (!(method.r >= 1 && method.r < s && s <= nn)) {
          throw index_range_error("order statistics need 1 <= r < s <= n");
        }
        [[fallthrough]];
      }
      case MethodKind::conformal:
        if (side != CoverageSide::two_sided) {
          throw invalid_parameter(std::string(method_kind_name(method.kind)) + " intervals are two-sided");
        }
        if (method.kind == MethodKind::conformal) NonconformityMeasure::by_name(method.measure);
        break;
      case MethodKind::gpq:
        if (!is_location_scale(truth.family())) throw unsupported_family("gpq needs a location-scale family");
        break;
      case MethodKind::fiducial:
        if (truth.family() != Family::gamma && truth.family() != Family::inverse_gaussian) {
          throw unsupported_family("fiducial needs a gamma or inverse_gaussian family");
        }
        break;
      case MethodKind::normal_exact:
        if (nn < 2) throw invalid_parameter("normal_exact needs n >= 2");
        break;
      case MethodKind::calibration:
      case MethodKind::calibration_smoothed:
      case MethodKind::direct_bootstrap:
        if (method.B == 0) throw invalid_parameter("B must be >= 1");
        break;
      default: break;
    }
  }
};

struct CoverageReport {
  std::string method;
  ModelSpec truth;
  double n = 0, m = 0, alpha = 0;
  CoverageSide side = CoverageSide::upper;
  std::size_t n_sim = 0;
  std::size_t failures = 0;
  std::size_t used = 0;  // n_sim - failures
  double coverage = 0.0;
  double se = 0.0;
  double wall_seconds = 0.0;
  std::uint64_t seed = 0;
  std::string timestamp;
};

/// sqrt(p (1 - p) / N).
inline double coverage_se(double p, std::size_t N) {
  return std::sqrt(p * (1.0 - p) / static_cast<double>(N));
}

namespace detail {

struct Range {
  double lower = -std::numeric_limits<double>::infinity();
  double upper = std::numeric_limits<double>::infinity();
  bool contains(double y) const { return lower <= y && y <= upper; }
};

inline std::string utc_timestamp() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

// Continuous-method bound(s) for one sample; one-sided ranges are open on
// the far side.
inline Range continuous_range(const CoverageConfig& c, const Sample& sample, const RngPolicy& policy) {
  const MethodKind kind = c.method.kind;
  const bool two = c.side == CoverageSide::two_sided;
  const double a = two ? 0.5 * c.alpha : c.alpha;
  Range out;
  auto apply = [&](auto&& endpoint) {
    if (c.side != CoverageSide::upper) out.lower = endpoint(Side::lower);
    if (c.side != CoverageSide::lower) out.upper = endpoint(Side::upper);
  };

  if (kind == MethodKind::oracle) {
    apply([&](Side s) { return c.truth.quantile(bound_probability(a, s)); });
    return out;
  }
  if (kind == MethodKind::normal_exact) {
    apply([&](Side s) { return normal_exact_bound(sample, a, s).endpoint; });
    return out;
  }
  if (kind == MethodKind::fiducial) {
    const auto draws = fiducial_draws(c.truth.family(), sample, c.method.fiducial_B, policy, 1);
    const auto F = fiducial_predictive_cdf(draws);
    apply([&](Side s) { return F.quantile(bound_probability(a, s)); });
    return out;
  }
  const FitResult fit = fit_ml(c.truth.family(), sample);
  switch (kind) {
    case MethodKind::plugin:
      apply([&](Side s) { return plugin_bound(fit, a, s).endpoint; });
      break;
    case MethodKind::calibration:
    case MethodKind::calibration_smoothed: {
      const auto batch = parametric_bootstrap(fit, sample.shape(), c.method.B, policy, 1);
      const auto mode = kind == MethodKind::calibration ? CalibrationQuantile::empirical
                                                        : CalibrationQuantile::smoothed;
      apply([&](Side s) { return calibration_bound_from_batch(fit, batch, a, s, policy, mode).endpoint; });
      break;
    }
    case MethodKind::direct_bootstrap: {
      const auto batch = parametric_bootstrap(fit, sample.shape(), c.method.B, policy, 1);
      const auto F = direct_bootstrap_cdf(fit, batch);
      apply([&](Side s) { return F.quantile(bound_probability(a, s)); });
      break;
    }
    case MethodKind::gpq: {
      const auto batch = parametric_bootstrap(fit, sample.shape(), c.method.B, policy, 1);
      const auto F = gpq_predictive_cdf(fit, batch);
      apply([&](Side s) { return F.quantile(bound_probability(a, s)); });
      break;
    }
    default: throw invalid_parameter("continuous_range: unexpected method");
  }
  return out;
}

inline DiscreteOptions discrete_options(const CoverageConfig& c, const RngPolicy& policy) {
  DiscreteOptions o;
  o.fiducial_B = c.method.discrete_fiducial_B;
  o.policy = policy;
  o.threads = 1;
  o.kp_substitute_candidate = c.method.kp_substitute_candidate;
  return o;
}

inline DiscreteBound discrete_bound_at(const CoverageConfig& c, double x, const RngPolicy& policy) {
  const double a = c.side == CoverageSide::two_sided ? 0.5 * c.alpha : c.alpha;
  DiscretePredictionProblem pr{c.discrete_kind(), x, c.n, c.m, a};
  return discrete_bounds(pr, c.method.discrete, discrete_options(c, policy));
}

inline bool discrete_contains(const DiscreteBound& b, CoverageSide side, double y) {
  const bool lo = y >= static_cast<double>(b.lower);
  const bool hi = y <= static_cast<double>(b.upper);
  return side == CoverageSide::lower ? lo : side == CoverageSide::upper ? hi : lo && hi;
}

// Bounds that depend on x only are computed once per distinct x.
class DiscreteBoundCache {
 public:
  explicit DiscreteBoundCache(const CoverageConfig& c) : c_(c) {}

  DiscreteBound get(double x, const RngPolicy& replicate_policy) {
    if (c_.method.discrete == DiscreteMethod::fiducial) return discrete_bound_at(c_, x, replicate_policy);
    {
      std::lock_guard lock(mu_);
      if (auto it = cache_.find(x); it != cache_.end()) return it->second;
    }
    const DiscreteBound b = discrete_bound_at(c_, x, replicate_policy);
    std::lock_guard lock(mu_);
    cache_.emplace(x, b);
    return b;
  }

 private:
  const CoverageConfig& c_;
  std::mutex mu_;
  std::map<double, DiscreteBound> cache_;
};

}  // namespace detail

/// Monte Carlo coverage. Replicate i draws its data from substream
/// (i, data), its predictand from (i, predictand), and runs the method on
/// the child policy i; failed replicates (numerical failures) are excluded
/// and counted.
inline CoverageReport estimate_coverage(const CoverageConfig& c) {
  c.validate();
  const auto start = std::chrono::steady_clock::now();
  const RngPolicy policy{c.seed};
  std::vector<signed char> hit(c.n_sim, -1);  // -1 failure, 0 miss, 1 hit

  if (c.discrete()) {
    const DiscreteKind kind = c.discrete_kind();
    const Kernel x_law = kind == DiscreteKind::binomial ? c.truth : Kernel::poisson(c.n * c.truth.param(0));
    const Kernel y_law = kind == DiscreteKind::binomial ? Kernel::binomial(c.m, c.truth.param(1))
                                                        : Kernel::poisson(c.m * c.truth.param(0));
    detail::DiscreteBoundCache cache(c);
    parallel_for(
        c.n_sim,
        [&](std::size_t i) {
          Rng data = policy.substream(i, StreamPurpose::data);
          const double x = x_law.draw(data);
          Rng pred = policy.substream(i, StreamPurpose::predictand);
          const double y = y_law.draw(pred);
          try {
            hit[i] = detail::discrete_contains(cache.get(x, policy.child(i)), c.side, y) ? 1 : 0;
          } catch (const numerical_failure&) {
            hit[i] = -1;
          }
        },
        c.threads);
  } else {
    const auto n = static_cast<std::size_t>(c.n);
    const SampleShape shape =
        c.r && c.method.kind != MethodKind::oracle ? SampleShape::type2(n, *c.r) : SampleShape::complete(n);
    const auto measure = c.method.kind == MethodKind::conformal ? NonconformityMeasure::by_name(c.method.measure)
                                                                : NonconformityMeasure{};
    parallel_for(
        c.n_sim,
        [&](std::size_t i) {
          Rng data = policy.substream(i, StreamPurpose::data);
          const Sample sample = draw_sample(c.truth, shape, data);
          Rng pred = policy.substream(i, StreamPurpose::predictand);
          const double y = c.truth.draw(pred);
          try {
            bool in;
            if (c.method.kind == MethodKind::order_stat) {
              const auto iv = order_stat_interval(sample, c.method.r, c.method.s == 0 ? n : c.method.s);
              in = iv.lower <= y && y <= iv.upper;
            } else if (c.method.kind == MethodKind::conformal) {
              Rng ur = policy.substream(i, StreamPurpose::randomization);
              in = conformal_region(sample.values(), measure, c.alpha, c.method.randomize, ur).contains(y);
            } else {
              in = detail::continuous_range(c, sample, policy.child(i)).contains(y);
            }
            hit[i] = in ? 1 : 0;
          } catch (const numerical_failure&) {
            hit[i] = -1;
          }
        },
        c.threads);
  }

  CoverageReport rep;
  rep.method = c.method.id();
  rep.truth = c.truth;
  rep.n = c.n;
  rep.m = c.discrete() ? c.m : 1.0;
  rep.alpha = c.alpha;
  rep.side = c.side;
  rep.n_sim = c.n_sim;
  rep.seed = c.seed;
  std::size_t hits = 0;
  for (signed char h : hit) {
    if (h < 0) {
      ++rep.failures;
    } else {
      hits += static_cast<std::size_t>(h);
    }
  }
  if (static_cast<double>(rep.failures) > kMaxCoverageFailureRate * static_cast<double>(c.n_sim)) {
    throw excessive_failures(rep.method + ": " + std::to_string(rep.failures) + " of " +
                             std::to_string(c.n_sim) + " replicates failed (limit 1%)");
  }
  rep.used = c.n_sim - rep.failures;
  rep.coverage = static_cast<double>(hits) / static_cast<double>(rep.used);
  rep.se = coverage_se(rep.coverage, rep.used);
  rep.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  rep.timestamp = detail::utc_timestamp();
  return rep;
}

// ---------------------------------------------------------------------------
// Exact enumeration

struct ExactCoverage {
  double coverage = 0.0;
  /// P(X = x) summed over x whose bound could not be computed (e.g. nelson
  /// at x in {0, n}); the coverage is renormalized over the remaining mass.
  double excluded_mass = 0.0;
  /// Largest x enumerated (n for binomial).
  double truncation_point = 0.0;
};

inline constexpr double kPoissonTailBound = 1e-12;
inline constexpr double kMaxEnumeratedCount = 1e7;

using DiscreteBoundFunction = std::function<DiscreteBound(double x)>;

/// sum_x P(X = x) P(Y in bound(x)) for X ~ Binom(n, p), Y ~ Binom(m, p)
/// (`truth_param` = p) or X ~ Poi(n lambda), Y ~ Poi(m lambda)
/// (`truth_param` = lambda); Poisson x is truncated where P(X > x) < 1e-12.
inline ExactCoverage exact_discrete_coverage(const DiscreteBoundFunction& bound, DiscreteKind kind,
                                             double truth_param, double n, double m, CoverageSide side) {
  const Kernel x_law = kind == DiscreteKind::binomial ? Kernel::binomial(n, truth_param)
                                                      : Kernel::poisson(n * truth_param);
  const Kernel y_law = kind == DiscreteKind::binomial ? Kernel::binomial(m, truth_param)
                                                      : Kernel::poisson(m * truth_param);
  double x_max = n;
  if (kind == DiscreteKind::poisson) {
    x_max = x_law.quantile(1.0 - 1e-13);
    while (x_law.sf(x_max) >= kPoissonTailBound && x_max < kMaxEnumeratedCount) x_max += 1.0;
    if (x_max > kMaxEnumeratedCount || x_law.sf(x_max) >= kPoissonTailBound) {
      throw truncation_insufficient("exact coverage: Poisson tail bound 1e-12 not reached by x = 1e7");
    }
  }
  double covered = 0.0, excluded = 0.0;
  for (double x = 0.0; x <= x_max; x += 1.0) {
    const double px = std::exp(x_law.log_pdf(x));
    if (px == 0.0) continue;
    DiscreteBound b;
    try {
      b = bound(x);
    } catch (const numerical_failure&) {
      excluded += px;
      continue;
    }
    const double lo = static_cast<double>(b.lower), hi = static_cast<double>(b.upper);
    double py;
    switch (side) {
      case CoverageSide::lower: py = y_law.sf(lo - 1.0); break;
      case CoverageSide::upper: py = y_law.cdf(hi); break;
      default: py = hi < lo ? 0.0 : y_law.cdf(hi) - y_law.cdf(lo - 1.0); break;
    }
    covered += px * py;
  }
  ExactCoverage out;
  out.excluded_mass = excluded;
  out.truncation_point = x_max;
  const double kept = 1.0 - excluded;
  if (!(kept > 0.0)) throw numerical_failure("exact coverage: every x was excluded");
  out.coverage = std::min(1.0, covered / kept);
  return out;
}

/// Exact coverage of a configured discrete method. Fiducial bounds use the
/// configured seed's stream for every x.
inline ExactCoverage exact_discrete_coverage(const CoverageConfig& c) {
  if (!c.discrete()) throw invalid_parameter("exact coverage needs a discrete method");
  c.validate();
  const DiscreteKind kind = c.discrete_kind();
  const RngPolicy policy{c.seed};
  const double param = kind == DiscreteKind::binomial ? c.truth.param(1) : c.truth.param(0);
  return exact_discrete_coverage([&](double x) { return detail::discrete_bound_at(c, x, policy); }, kind,
                                 param, c.n, c.m, c.side);
}

// ---------------------------------------------------------------------------
// Output

namespace detail {

// Shortest representation that round-trips exactly.
inline std::string fmt17(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline std::string params_string(const Kernel& k) {
  std::string out;
  for (double p : k.params()) {
    if (!out.empty()) out += ';';
    out += fmt17(p);
  }
  return out;
}

}  // namespace detail

/// CSV columns; all numeric fields are deterministic except the trailing
/// timestamp (wall-clock time is reported in JSON only).
inline std::string coverage_csv_header() {
  return "method,family,truth_params,n,m,alpha,side,n_sim,seed,coverage,se,failures,used,timestamp";
}

inline std::string coverage_csv_row(const CoverageReport& r) {
  std::ostringstream os;
  os << r.method << ',' << family_name(r.truth.family()) << ',' << detail::params_string(r.truth) << ','
     << detail::fmt17(r.n) << ',' << detail::fmt17(r.m) << ',' << detail::fmt17(r.alpha) << ','
     << coverage_side_name(r.side) << ',' << r.n_sim << ',' << r.seed << ',' << detail::fmt17(r.coverage)
     << ',' << detail::fmt17(r.se) << ',' << r.failures << ',' << r.used << ',' << r.timestamp;
  return os.str();
}

inline nlohmann::json coverage_json(const CoverageReport& r) {
  nlohmann::json truth{{"family", family_name(r.truth.family())},
                       {"params", std::vector<double>(r.truth.params().begin(), r.truth.params().end())}};
  return {{"method", r.method}, {"truth", truth},         {"n", r.n},
          {"m", r.m},           {"alpha", r.alpha},       {"side", coverage_side_name(r.side)},
          {"n_sim", r.n_sim},   {"seed", r.seed},         {"coverage", r.coverage},
          {"se", r.se},         {"failures", r.failures}, {"used", r.used},
          {"wall_seconds", r.wall_seconds}, {"timestamp", r.timestamp}};
}

}  // namespace predint
