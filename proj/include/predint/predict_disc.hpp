#pragma once

// Prediction bounds for a future binomial or Poisson count Y given an
// observed count X = x:
//
//   binomial  X ~ Binom(n, p),   Y ~ Binom(m, p)
//   poisson   X ~ Poi(n lambda), Y ~ Poi(m lambda)
//
// Lower and upper are one-sided bounds, each at level 1 - alpha.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "predint/dist.hpp"
#include "predint/errors.hpp"
#include "predint/parallel.hpp"
#include "predint/rng.hpp"
#include "predint/special.hpp"

namespace predint {

enum class DiscreteKind { binomial, poisson };

enum class DiscreteMethod { conservative, nelson, kp, wang, jeffreys, fiducial, hinkley };

inline constexpr std::array kAllDiscreteMethods = {
    DiscreteMethod::conservative, DiscreteMethod::nelson,   DiscreteMethod::kp,
    DiscreteMethod::wang,         DiscreteMethod::jeffreys, DiscreteMethod::fiducial,
    DiscreteMethod::hinkley,
};

inline std::string_view discrete_method_name(DiscreteMethod m) {
  switch (m) {
    case DiscreteMethod::conservative: return "conservative";
    case DiscreteMethod::nelson: return "nelson";
    case DiscreteMethod::kp: return "kp";
    case DiscreteMethod::wang: return "wang";
    case DiscreteMethod::jeffreys: return "jeffreys";
    case DiscreteMethod::fiducial: return "fiducial";
    case DiscreteMethod::hinkley: return "hinkley";
  }
  return "unknown";
}

inline DiscreteMethod parse_discrete_method(std::string_view s) {
  for (DiscreteMethod m : kAllDiscreteMethods) {
    if (discrete_method_name(m) == s) return m;
  }
  throw invalid_parameter("unknown discrete method '" + std::string(s) + "'");
}

inline bool method_applies(DiscreteKind kind, DiscreteMethod m) {
  return !(kind == DiscreteKind::poisson && m == DiscreteMethod::wang);
}

struct DiscretePredictionProblem {
  DiscreteKind kind = DiscreteKind::binomial;
  double x = 0;
  double n = 1;  // integer trials (binomial) or positive exposure (Poisson)
  double m = 1;
  double alpha = 0.05;

  void validate() const {
    auto is_count = [](double v) { return v >= 0.0 && std::isfinite(v) && std::floor(v) == v; };
    if (!(alpha > 0.0 && alpha <= 0.5)) throw invalid_problem("alpha must lie in (0, 0.5]");
    if (!is_count(x)) throw invalid_problem("x must be a nonnegative integer");
    if (kind == DiscreteKind::binomial) {
      if (!is_count(n) || n < 1) throw invalid_problem("binomial n must be a positive integer");
      if (!is_count(m) || m < 1) throw invalid_problem("binomial m must be a positive integer");
      if (x > n) throw invalid_problem("binomial x cannot exceed n");
    } else {
      if (!(n > 0.0) || !std::isfinite(n)) throw invalid_problem("Poisson n must be positive");
      if (!(m > 0.0) || !std::isfinite(m)) throw invalid_problem("Poisson m must be positive");
    }
  }
};

struct DiscreteBound {
  std::int64_t lower = 0;
  std::int64_t upper = 0;
  DiscreteMethod method = DiscreteMethod::conservative;
};

struct DiscreteOptions {
  std::size_t fiducial_B = 100000;
  RngPolicy policy{};
  unsigned threads = 0;
  /// Krishnamoorthy-Peng: substitute each candidate y into (x + y) / (n + m)
  /// (default). When false the estimate is evaluated at the point
  /// prediction y = m x / n.
  bool kp_substitute_candidate = true;
};

namespace detail {

inline constexpr std::int64_t kPoissonScanCap = 100000000;

// Largest y in [0, cap] with pred(y), scanning upward from 0 until pred
// fails for a decreasing predicate (true then false).
template <class Pred>
std::int64_t last_true(Pred&& pred, std::int64_t cap) {
  std::int64_t y = 0;
  if (!pred(0)) throw numerical_failure("prediction bound: defining set is empty");
  while (y < cap && pred(y + 1)) ++y;
  if (y >= kPoissonScanCap) throw numerical_failure("prediction bound: scan did not terminate");
  return y;
}

// Smallest y in [0, cap] with pred(y) for an increasing predicate.
template <class Pred>
std::int64_t first_true(Pred&& pred, std::int64_t cap) {
  for (std::int64_t y = 0; y <= cap; ++y) {
    if (pred(y)) return y;
  }
  throw numerical_failure("prediction bound: defining set is empty");
}

// ---- approximate pivots ----------------------------------------------------

// q(y) = (y - m x / n) / sd(y); upper = max{y : q <= z}, lower = min{y : q >= -z}.
template <class Q>
DiscreteBound pivot_bounds_binomial(Q&& q, double m, double z, DiscreteMethod method) {
  const auto cap = static_cast<std::int64_t>(m);
  std::int64_t upper = -1, lower = -1;
  for (std::int64_t y = 0; y <= cap; ++y) {
    const double v = q(static_cast<double>(y));
    if (v <= z) upper = y;
    if (lower < 0 && v >= -z) lower = y;
  }
  if (upper < 0 || lower < 0) throw numerical_failure("approximate pivot: no admissible y");
  return {lower, upper, method};
}

// Poisson pivots are increasing in y, so both scans stop early.
template <class Q>
DiscreteBound pivot_bounds_poisson(Q&& q, double z, DiscreteMethod method) {
  const std::int64_t upper = last_true([&](std::int64_t y) { return q(static_cast<double>(y)) <= z; },
                                       kPoissonScanCap);
  const std::int64_t lower =
      first_true([&](std::int64_t y) { return q(static_cast<double>(y)) >= -z; }, kPoissonScanCap);
  return {lower, upper, method};
}

// ---- fiducial --------------------------------------------------------------

// Smallest integer y >= 0 with F(y) >= prob for nondecreasing F, F -> 1.
template <class F>
std::int64_t integer_quantile(F&& cdf, double prob, std::int64_t cap) {
  if (cdf(0) >= prob) return 0;
  std::int64_t lo = 0, hi = 1;
  while (hi < cap && cdf(hi) < prob) {
    lo = hi;
    hi = std::min(cap, hi * 2);
  }
  if (cdf(hi) < prob) return cap;
  while (hi - lo > 1) {
    const std::int64_t mid = lo + (hi - lo) / 2;
    (cdf(mid) >= prob ? hi : lo) = mid;
  }
  return hi;
}

inline double binom_cdf(double y, double m, double p) {
  if (y < 0.0) return 0.0;
  if (y >= m) return 1.0;
  if (p <= 0.0) return 1.0;
  if (p >= 1.0) return 0.0;
  return special::beta_inc(m - y, y + 1.0, 1.0 - p);
}

inline double pois_cdf(double y, double mean) {
  if (y < 0.0) return 0.0;
  if (mean <= 0.0) return 1.0;
  return special::gamma_q(y + 1.0, mean);
}

inline constexpr double kSpacingLimit = 1000.0;

// R_p = U_(x) + D (U_(x+1) - U_(x)) from exponential spacings. Up to
// kSpacingLimit the order statistics are built from n + 1 explicit
// spacings, which makes R_p nondecreasing in x for a fixed stream.
inline std::vector<double> binomial_fiducial_draws(double x, double n, const DiscreteOptions& opt) {
  std::vector<double> r(opt.fiducial_B);
  parallel_for(
      opt.fiducial_B,
      [&](std::size_t b) {
        Rng rng = opt.policy.substream(b, StreamPurpose::fiducial);
        const double d = rng.uniform();
        double before = 0.0, gap = 0.0, after = 0.0;
        if (n <= kSpacingLimit) {
          for (double k = 0; k <= n; k += 1.0) {
            const double e = -std::log(rng.uniform());
            if (k < x) {
              before += e;
            } else if (k == x) {
              gap = e;
            } else {
              after += e;
            }
          }
        } else {
          before = x > 0 ? Kernel::standard_gamma(rng, x) : 0.0;
          gap = -std::log(rng.uniform());
          after = n - x > 0 ? Kernel::standard_gamma(rng, n - x) : 0.0;
        }
        r[b] = (before + d * gap) / (before + gap + after);
      },
      opt.threads);
  return r;
}

// lambda ~ chi^2_{2x+1} / (2n) = Gamma(x + 1/2) / n; Gamma(x + 1/2) is built
// as Gamma(1/2) plus x exponentials (up to kSpacingLimit), so draws are
// nondecreasing in x for a fixed stream.
inline std::vector<double> poisson_fiducial_draws(double x, double n, const DiscreteOptions& opt) {
  std::vector<double> lam(opt.fiducial_B);
  parallel_for(
      opt.fiducial_B,
      [&](std::size_t b) {
        Rng rng = opt.policy.substream(b, StreamPurpose::fiducial);
        double g;
        if (x <= kSpacingLimit) {
          g = Kernel::standard_gamma(rng, 0.5);
          for (double k = 0; k < x; k += 1.0) g += -std::log(rng.uniform());
        } else {
          g = Kernel::standard_gamma(rng, x + 0.5);
        }
        lam[b] = g / n;
      },
      opt.threads);
  return lam;
}

// ---- Hinkley (binomial) ----------------------------------------------------

inline std::vector<double> hinkley_binomial_cdf(double x, double n, double m) {
  const auto cap = static_cast<std::size_t>(m);
  std::vector<double> logl(cap + 1);
  double norm = -special::kInf;
  for (std::size_t y = 0; y <= cap; ++y) {
    const double yy = static_cast<double>(y);
    logl[y] = special::log_choose(n, x) + special::log_choose(m, yy) - special::log_choose(n + m, x + yy);
    norm = special::log_add_exp(norm, logl[y]);
  }
  std::vector<double> cdf(cap + 1);
  double acc = -special::kInf;
  for (std::size_t y = 0; y <= cap; ++y) {
    acc = special::log_add_exp(acc, logl[y]);
    cdf[y] = std::min(1.0, std::exp(acc - norm));
  }
  cdf[cap] = 1.0;
  return cdf;
}

}  // namespace detail

/// Hinkley predictive likelihood L(y; x) = C(n,x) C(m,y) / C(n+m, x+y),
/// unnormalized; symmetric under (n, x) <-> (m, y).
inline double hinkley_binomial_likelihood(double x, double n, double y, double m) {
  return std::exp(special::log_choose(n, x) + special::log_choose(m, y) - special::log_choose(n + m, x + y));
}

/// Normalized Hinkley predictive likelihood for the binomial case,
/// C(n,x) C(m,y) / C(n+m, x+y), as a pmf over y = 0..m.
inline std::vector<double> hinkley_binomial_pmf(double x, double n, double m) {
  const auto cdf = detail::hinkley_binomial_cdf(x, n, m);
  std::vector<double> pmf(cdf.size());
  for (std::size_t y = 0; y < cdf.size(); ++y) pmf[y] = cdf[y] - (y ? cdf[y - 1] : 0.0);
  return pmf;
}

inline DiscreteBound binom_bounds(const DiscretePredictionProblem& pr, DiscreteMethod method,
                                  const DiscreteOptions& opt = {}) {
  if (pr.kind != DiscreteKind::binomial) throw invalid_problem("binom_bounds needs a binomial problem");
  pr.validate();
  const double x = pr.x, n = pr.n, m = pr.m, alpha = pr.alpha;
  const auto cap = static_cast<std::int64_t>(m);
  const double z = special::norm_isf(alpha);

  switch (method) {
    case DiscreteMethod::conservative: {
      // X | X + Y = x + y ~ Hyper(x + y red among n + m, n drawn).
      auto hyper = [&](std::int64_t y) {
        return Kernel::hypergeometric(x + static_cast<double>(y), n, n + m);
      };
      std::int64_t upper = 0;
      for (std::int64_t y = 0; y <= cap; ++y) {
        if (hyper(y).cdf(x) > alpha) upper = y;
      }
      const std::int64_t lower =
          detail::first_true([&](std::int64_t y) { return hyper(y).sf(x - 1.0) > alpha; }, cap);
      return {lower, upper, method};
    }
    case DiscreteMethod::nelson: {
      if (x == 0.0 || x == n) {
        throw degenerate_estimate("nelson: p_hat = x/n is 0 or 1; the pivot variance vanishes");
      }
      const double p = x / n;
      const double sd = std::sqrt((n + m) * (m / n) * p * (1.0 - p));
      return detail::pivot_bounds_binomial([&](double y) { return (y - m * x / n) / sd; }, m, z, method);
    }
    case DiscreteMethod::kp: {
      const double xa = x == 0.0 ? 0.5 : (x == n ? n - 0.5 : x);
      auto q = [&](double y) {
        const double yp = opt.kp_substitute_candidate ? y : m * xa / n;
        const double p = (xa + yp) / (n + m);
        return (y - m * xa / n) / std::sqrt((n + m) * (m / n) * p * (1.0 - p));
      };
      return detail::pivot_bounds_binomial(q, m, z, method);
    }
    case DiscreteMethod::wang: {
      auto q = [&](double y) {
        const double p = (x + y + 0.5 * z * z) / (n + m + z * z);
        return (y - m * x / n) / std::sqrt((n + m) * (m / n) * p * (1.0 - p));
      };
      return detail::pivot_bounds_binomial(q, m, z, method);
    }
    case DiscreteMethod::jeffreys: {
      const Kernel bb = Kernel::beta_binomial(m, x + 0.5, n - x + 0.5);
      return {static_cast<std::int64_t>(bb.quantile(alpha)),
              static_cast<std::int64_t>(bb.quantile(1.0 - alpha)), method};
    }
    case DiscreteMethod::fiducial: {
      const auto r = detail::binomial_fiducial_draws(x, n, opt);
      auto cdf = [&](std::int64_t y) {
        double acc = 0.0;
        for (double p : r) acc += detail::binom_cdf(static_cast<double>(y), m, p);
        return acc / static_cast<double>(r.size());
      };
      return {detail::integer_quantile(cdf, alpha, cap), detail::integer_quantile(cdf, 1.0 - alpha, cap),
              method};
    }
    case DiscreteMethod::hinkley: {
      const auto F = detail::hinkley_binomial_cdf(x, n, m);
      // upper = inf{y : F(y) >= 1 - alpha}; lower = sup{y : F(y - 1) <= alpha}.
      std::int64_t upper = cap;
      for (std::int64_t y = 0; y <= cap; ++y) {
        if (F[y] >= 1.0 - alpha) {
          upper = y;
          break;
        }
      }
      std::int64_t lower = 0;
      for (std::int64_t y = 0; y <= cap; ++y) {
        if ((y == 0 ? 0.0 : F[y - 1]) <= alpha) lower = y;
      }
      return {lower, upper, method};
    }
  }
  throw invalid_parameter("binom_bounds: unknown method");
}

inline DiscreteBound pois_bounds(const DiscretePredictionProblem& pr, DiscreteMethod method,
                                 const DiscreteOptions& opt = {}) {
  if (pr.kind != DiscreteKind::poisson) throw invalid_problem("pois_bounds needs a Poisson problem");
  pr.validate();
  const double x = pr.x, n = pr.n, m = pr.m, alpha = pr.alpha;
  const double z = special::norm_isf(alpha);
  const double pi = n / (n + m);

  switch (method) {
    case DiscreteMethod::conservative: {
      // X | X + Y = x + y ~ Binom(x + y, n / (n + m)).
      const std::int64_t upper = detail::last_true(
          [&](std::int64_t y) { return detail::binom_cdf(x, x + static_cast<double>(y), pi) > alpha; },
          detail::kPoissonScanCap);
      const std::int64_t lower = detail::first_true(
          [&](std::int64_t y) {
            return 1.0 - detail::binom_cdf(x - 1.0, x + static_cast<double>(y), pi) > alpha;
          },
          detail::kPoissonScanCap);
      return {lower, upper, method};
    }
    case DiscreteMethod::nelson: {
      if (x == 0.0) throw degenerate_estimate("nelson: lambda_hat = x/n is 0; the pivot variance vanishes");
      const double sd = std::sqrt((m + m * m / n) * (x / n));
      return detail::pivot_bounds_poisson([&](double y) { return (y - m * x / n) / sd; }, z, method);
    }
    case DiscreteMethod::kp: {
      const double xa = x == 0.0 ? 0.5 : x;
      auto q = [&](double y) {
        const double yp = opt.kp_substitute_candidate ? y : m * xa / n;
        return (y - m * xa / n) / std::sqrt((m + m * m / n) * (xa + yp) / (n + m));
      };
      return detail::pivot_bounds_poisson(q, z, method);
    }
    case DiscreteMethod::wang:
      throw invalid_parameter("wang's method is defined for the binomial case only");
    case DiscreteMethod::jeffreys: {
      const Kernel nb = Kernel::negative_binomial(x + 0.5, pi);
      return {static_cast<std::int64_t>(nb.quantile(alpha)),
              static_cast<std::int64_t>(nb.quantile(1.0 - alpha)), method};
    }
    case DiscreteMethod::fiducial: {
      const auto lam = detail::poisson_fiducial_draws(x, n, opt);
      auto cdf = [&](std::int64_t y) {
        double acc = 0.0;
        for (double l : lam) acc += detail::pois_cdf(static_cast<double>(y), m * l);
        return acc / static_cast<double>(lam.size());
      };
      return {detail::integer_quantile(cdf, alpha, detail::kPoissonScanCap),
              detail::integer_quantile(cdf, 1.0 - alpha, detail::kPoissonScanCap), method};
    }
    case DiscreteMethod::hinkley: {
      const Kernel nb = Kernel::negative_binomial(x + 1.0, pi);
      return {static_cast<std::int64_t>(nb.quantile(alpha)),
              static_cast<std::int64_t>(nb.quantile(1.0 - alpha)), method};
    }
  }
  throw invalid_parameter("pois_bounds: unknown method");
}

inline DiscreteBound discrete_bounds(const DiscretePredictionProblem& pr, DiscreteMethod method,
                                     const DiscreteOptions& opt = {}) {
  return pr.kind == DiscreteKind::binomial ? binom_bounds(pr, method, opt) : pois_bounds(pr, method, opt);
}

}  // namespace predint
