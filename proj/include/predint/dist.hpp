#pragma once

// Distribution kernels: density, cdf, survival function, quantile and
// sampling for every family used by the prediction methods.
//
// Location-scale members use the standard cdfs
//   normal    Phi(z)
//   logistic  1 / (1 + exp(-z))
//   sev       1 - exp(-exp(z))   (smallest extreme value; log-Weibull)
// with z = (x - mu) / sigma.
//
// Discrete cdfs are exact: binomial, Poisson and negative binomial go through
// the regularized incomplete beta/gamma functions, hypergeometric and
// beta-binomial sum their log-pmf with log-sum-exp and exponentiate once.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "predint/errors.hpp"
#include "predint/rng.hpp"
#include "predint/roots.hpp"
#include "predint/special.hpp"

namespace predint {

enum class Family {
  normal,
  logistic,
  sev,
  gamma,
  inverse_gaussian,
  inverse_gaussian_limit,
  binomial,
  poisson,
  hypergeometric,
  beta_binomial,
  negative_binomial,
  chi_square,
  student_t,
  uniform01,
};

inline constexpr std::string_view family_name(Family f) {
  switch (f) {
    case Family::normal: return "normal";
    case Family::logistic: return "logistic";
    case Family::sev: return "sev";
    case Family::gamma: return "gamma";
    case Family::inverse_gaussian: return "inverse_gaussian";
    case Family::inverse_gaussian_limit: return "inverse_gaussian_limit";
    case Family::binomial: return "binomial";
    case Family::poisson: return "poisson";
    case Family::hypergeometric: return "hypergeometric";
    case Family::beta_binomial: return "beta_binomial";
    case Family::negative_binomial: return "negative_binomial";
    case Family::chi_square: return "chi_square";
    case Family::student_t: return "student_t";
    case Family::uniform01: return "uniform01";
  }
  return "unknown";
}

inline constexpr std::array kAllFamilies = {
    Family::normal,         Family::logistic,       Family::sev,
    Family::gamma,          Family::inverse_gaussian, Family::inverse_gaussian_limit,
    Family::binomial,       Family::poisson,        Family::hypergeometric,
    Family::beta_binomial,  Family::negative_binomial, Family::chi_square,
    Family::student_t,      Family::uniform01,
};

inline Family parse_family(std::string_view name) {
  for (Family f : kAllFamilies) {
    if (family_name(f) == name) return f;
  }
  throw unsupported_family("unknown distribution family '" + std::string(name) + "'");
}

inline constexpr bool is_location_scale(Family f) {
  return f == Family::normal || f == Family::logistic || f == Family::sev;
}

inline constexpr bool is_discrete(Family f) {
  return f == Family::binomial || f == Family::poisson || f == Family::hypergeometric ||
         f == Family::beta_binomial || f == Family::negative_binomial;
}

/// Parameter names in storage order.
inline std::vector<std::string_view> parameter_names(Family f) {
  switch (f) {
    case Family::normal:
    case Family::logistic:
    case Family::sev: return {"mu", "sigma"};
    case Family::gamma: return {"alpha", "lambda"};
    case Family::inverse_gaussian: return {"mu", "lambda"};
    case Family::inverse_gaussian_limit: return {"lambda"};
    case Family::binomial: return {"n", "p"};
    case Family::poisson: return {"lambda"};
    case Family::hypergeometric: return {"K", "n", "N"};
    case Family::beta_binomial: return {"m", "a", "b"};
    case Family::negative_binomial: return {"r", "p"};
    case Family::chi_square:
    case Family::student_t: return {"df"};
    case Family::uniform01: return {};
  }
  return {};
}

namespace detail {

inline bool is_count(double v) { return v >= 0.0 && std::floor(v) == v && std::isfinite(v); }

// Standard location-scale kernels, z-scale.
inline double std_cdf(Family f, double z) {
  switch (f) {
    case Family::normal: return special::norm_cdf(z);
    case Family::logistic: return 1.0 / (1.0 + std::exp(-z));
    default: return -std::expm1(-std::exp(z));
  }
}

inline double std_sf(Family f, double z) {
  switch (f) {
    case Family::normal: return special::norm_sf(z);
    case Family::logistic: return 1.0 / (1.0 + std::exp(z));
    default: return std::exp(-std::exp(z));
  }
}

inline double std_log_pdf(Family f, double z) {
  switch (f) {
    case Family::normal: return special::norm_log_pdf(z);
    case Family::logistic: return -z - 2.0 * special::log1pexp(-z);
    default: return z - std::exp(z);
  }
}

inline double std_quantile(Family f, double p) {
  switch (f) {
    case Family::normal: return special::norm_quantile(p);
    case Family::logistic: return std::log(p) - std::log1p(-p);
    default: return std::log(-std::log1p(-p));
  }
}

inline double std_isf(Family f, double q) {
  switch (f) {
    case Family::normal: return special::norm_isf(q);
    case Family::logistic: return std::log1p(-q) - std::log(q);
    default: return std::log(-std::log(q));
  }
}

}  // namespace detail

/// A fully specified distribution: family plus parameter vector. Also plays
/// the role of a model specification (a family with its parameter values).
class Kernel {
 public:
  Kernel() : Kernel(Family::uniform01, {}) {}

  static Kernel normal(double mu, double sigma) { return make(Family::normal, {mu, sigma}); }
  static Kernel logistic(double mu, double sigma) { return make(Family::logistic, {mu, sigma}); }
  static Kernel sev(double mu, double sigma) { return make(Family::sev, {mu, sigma}); }
  static Kernel location_scale(Family f, double mu, double sigma) { return make(f, {mu, sigma}); }
  /// Gamma with shape alpha and rate lambda.
  static Kernel gamma(double shape, double rate) { return make(Family::gamma, {shape, rate}); }
  /// Inverse Gaussian with mean mu and shape lambda; mu = +inf gives the
  /// mu -> infinity limit kernel.
  static Kernel inverse_gaussian(double mean, double shape) {
    if (mean == special::kInf) return inverse_gaussian_limit(shape);
    return make(Family::inverse_gaussian, {mean, shape});
  }
  static Kernel inverse_gaussian_limit(double shape) {
    return make(Family::inverse_gaussian_limit, {shape});
  }
  static Kernel binomial(double trials, double p) { return make(Family::binomial, {trials, p}); }
  static Kernel poisson(double mean) { return make(Family::poisson, {mean}); }
  /// Number of successes in `draws` draws without replacement from a
  /// population of `population` items of which `successes` are successes.
  static Kernel hypergeometric(double successes, double draws, double population) {
    return make(Family::hypergeometric, {successes, draws, population});
  }
  static Kernel beta_binomial(double trials, double a, double b) {
    return make(Family::beta_binomial, {trials, a, b});
  }
  /// Failures before the r-th success, success probability p (r real > 0).
  static Kernel negative_binomial(double size, double p) {
    return make(Family::negative_binomial, {size, p});
  }
  static Kernel chi_square(double df) { return make(Family::chi_square, {df}); }
  static Kernel student_t(double df) { return make(Family::student_t, {df}); }
  static Kernel uniform01() { return make(Family::uniform01, {}); }

  static Kernel make(Family f, std::initializer_list<double> params) {
    return Kernel(f, std::span<const double>(params.begin(), params.size()));
  }
  static Kernel make(Family f, std::span<const double> params) { return Kernel(f, params); }

  Family family() const { return family_; }
  std::span<const double> params() const { return {params_.data(), arity_}; }
  double param(std::size_t i) const { return params_.at(i); }
  bool discrete() const { return is_discrete(family_); }

  double support_lower() const {
    switch (family_) {
      case Family::normal:
      case Family::logistic:
      case Family::sev:
      case Family::student_t: return -special::kInf;
      case Family::hypergeometric: return std::max(0.0, p(1) + p(0) - p(2));
      default: return 0.0;
    }
  }

  double support_upper() const {
    switch (family_) {
      case Family::binomial:
      case Family::beta_binomial: return p(0);
      case Family::hypergeometric: return std::min(p(0), p(1));
      case Family::uniform01: return 1.0;
      default: return special::kInf;
    }
  }

  double mean() const {
    switch (family_) {
      case Family::normal:
      case Family::logistic: return p(0);
      case Family::sev: return p(0) - std::numbers::egamma * p(1);
      case Family::gamma: return p(0) / p(1);
      case Family::inverse_gaussian: return p(0);
      case Family::inverse_gaussian_limit: return special::kInf;
      case Family::binomial: return p(0) * p(1);
      case Family::poisson: return p(0);
      case Family::hypergeometric: return p(1) * p(0) / p(2);
      case Family::beta_binomial: return p(0) * p(1) / (p(1) + p(2));
      case Family::negative_binomial: return p(0) * (1.0 - p(1)) / p(1);
      case Family::chi_square: return p(0);
      case Family::student_t: return 0.0;
      case Family::uniform01: return 0.5;
    }
    return 0.0;
  }

  /// Log density (continuous) or log probability mass (discrete).
  double log_pdf(double x) const {
    constexpr double ninf = -special::kInf;
    switch (family_) {
      case Family::normal:
      case Family::logistic:
      case Family::sev:
        return detail::std_log_pdf(family_, (x - p(0)) / p(1)) - std::log(p(1));
      case Family::gamma:
        if (x < 0.0) return ninf;
        if (x == 0.0) return p(0) < 1.0 ? special::kInf : (p(0) == 1.0 ? std::log(p(1)) : ninf);
        return p(0) * std::log(p(1)) + (p(0) - 1.0) * std::log(x) - p(1) * x -
               special::log_gamma(p(0));
      case Family::chi_square: return Kernel::gamma(0.5 * p(0), 0.5).log_pdf(x);
      case Family::inverse_gaussian: {
        if (x <= 0.0) return ninf;
        const double mu = p(0);
        const double lam = p(1);
        return 0.5 * (std::log(lam) - std::log(2.0 * std::numbers::pi) - 3.0 * std::log(x)) -
               lam * (x - mu) * (x - mu) / (2.0 * mu * mu * x);
      }
      case Family::inverse_gaussian_limit: {
        if (x <= 0.0) return ninf;
        const double lam = p(0);
        return 0.5 * (std::log(lam) - std::log(2.0 * std::numbers::pi) - 3.0 * std::log(x)) -
               lam / (2.0 * x);
      }
      case Family::student_t: {
        const double nu = p(0);
        return special::log_gamma(0.5 * (nu + 1.0)) - special::log_gamma(0.5 * nu) -
               0.5 * std::log(nu * std::numbers::pi) - 0.5 * (nu + 1.0) * std::log1p(x * x / nu);
      }
      case Family::uniform01: return (x >= 0.0 && x <= 1.0) ? 0.0 : ninf;
      default: return discrete_log_pmf(x);
    }
  }

  double pdf(double x) const { return std::exp(log_pdf(x)); }

  double cdf(double x) const {
    if (std::isnan(x)) throw invalid_parameter("cdf: argument is NaN");
    switch (family_) {
      case Family::normal:
      case Family::logistic:
      case Family::sev: return detail::std_cdf(family_, (x - p(0)) / p(1));
      case Family::gamma: return x <= 0.0 ? 0.0 : special::gamma_p(p(0), p(1) * x);
      case Family::chi_square: return x <= 0.0 ? 0.0 : special::gamma_p(0.5 * p(0), 0.5 * x);
      case Family::inverse_gaussian: return ig_cdf(x);
      case Family::inverse_gaussian_limit:
        return x <= 0.0 ? 0.0 : (x == special::kInf ? 1.0 : std::erfc(std::sqrt(p(0) / (2.0 * x))));
      case Family::student_t: return t_cdf(x);
      case Family::uniform01: return std::clamp(x, 0.0, 1.0);
      default: return discrete_cdf(std::floor(x));
    }
  }

  double sf(double x) const {
    if (std::isnan(x)) throw invalid_parameter("sf: argument is NaN");
    switch (family_) {
      case Family::normal:
      case Family::logistic:
      case Family::sev: return detail::std_sf(family_, (x - p(0)) / p(1));
      case Family::gamma: return x <= 0.0 ? 1.0 : special::gamma_q(p(0), p(1) * x);
      case Family::chi_square: return x <= 0.0 ? 1.0 : special::gamma_q(0.5 * p(0), 0.5 * x);
      case Family::inverse_gaussian: return ig_sf(x);
      case Family::inverse_gaussian_limit:
        return x <= 0.0 ? 1.0 : (x == special::kInf ? 0.0 : std::erf(std::sqrt(p(0) / (2.0 * x))));
      case Family::student_t: return t_cdf(-x);
      case Family::uniform01: return 1.0 - std::clamp(x, 0.0, 1.0);
      default: return discrete_sf(std::floor(x));
    }
  }

  /// inf{x : cdf(x) >= prob}. Continuous kernels need prob in (0, 1) except
  /// that the endpoints map to the support bounds; discrete kernels accept
  /// [0, 1].
  double quantile(double prob) const {
    if (!(prob >= 0.0 && prob <= 1.0)) {
      throw invalid_probability("quantile: probability outside [0, 1]");
    }
    if (discrete()) return discrete_quantile(prob);
    if (prob == 0.0) return support_lower();
    if (prob == 1.0) return support_upper();
    switch (family_) {
      case Family::normal:
      case Family::logistic:
      case Family::sev: return p(0) + p(1) * detail::std_quantile(family_, prob);
      case Family::uniform01: return prob;
      case Family::inverse_gaussian_limit: {
        const double z = special::norm_isf(0.5 * prob);
        return p(0) / (z * z);
      }
      case Family::student_t:
        if (p(0) == 1.0) return std::tan(std::numbers::pi * (prob - 0.5));
        if (p(0) == 2.0) return (2.0 * prob - 1.0) / std::sqrt(2.0 * prob * (1.0 - prob));
        break;
      default: break;
    }
    return numeric_inverse(prob, false);
  }

  /// x with sf(x) = q, accurate when q is tiny.
  double isf(double q) const {
    if (!(q >= 0.0 && q <= 1.0)) {
      throw invalid_probability("isf: probability outside [0, 1]");
    }
    if (discrete()) return discrete_quantile(1.0 - q);
    if (q == 0.0) return support_upper();
    if (q == 1.0) return support_lower();
    switch (family_) {
      case Family::normal:
      case Family::logistic:
      case Family::sev: return p(0) + p(1) * detail::std_isf(family_, q);
      case Family::uniform01: return 1.0 - q;
      default: break;
    }
    return numeric_inverse(q, true);
  }

  /// One variate.
  double draw(Rng& rng) const {
    switch (family_) {
      case Family::normal:
      case Family::logistic:
      case Family::sev: return p(0) + p(1) * detail::std_quantile(family_, rng.uniform());
      case Family::uniform01: return rng.uniform();
      case Family::gamma: return standard_gamma(rng, p(0)) / p(1);
      case Family::chi_square: return 2.0 * standard_gamma(rng, 0.5 * p(0));
      case Family::student_t: {
        const double z = special::norm_quantile(rng.uniform());
        const double v = 2.0 * standard_gamma(rng, 0.5 * p(0));
        return z / std::sqrt(v / p(0));
      }
      case Family::inverse_gaussian: return draw_inverse_gaussian(rng);
      case Family::inverse_gaussian_limit: {
        const double z = special::norm_quantile(rng.uniform());
        return p(0) / (z * z);
      }
      case Family::binomial: return draw_binomial(rng);
      case Family::poisson: return draw_poisson(rng);
      default: return discrete_quantile(rng.uniform());
    }
  }

  std::vector<double> draw(Rng& rng, std::size_t count) const {
    if (count == 0) throw invalid_parameter("draw: count must be positive");
    std::vector<double> out(count);
    for (auto& v : out) v = draw(rng);
    return out;
  }

  /// Marsaglia-Tsang gamma(shape, 1) variate.
  static double standard_gamma(Rng& rng, double shape) {
    if (!(shape > 0.0)) throw invalid_parameter("standard_gamma: shape must be positive");
    if (shape < 1.0) {
      const double g = standard_gamma(rng, shape + 1.0);
      return g * std::exp(std::log(rng.uniform()) / shape);
    }
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
      double x;
      double v;
      do {
        x = special::norm_quantile(rng.uniform());
        v = 1.0 + c * x;
      } while (v <= 0.0);
      v = v * v * v;
      const double u = rng.uniform();
      if (u < 1.0 - 0.0331 * (x * x) * (x * x)) return d * v;
      if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
    }
  }

  friend bool operator==(const Kernel& a, const Kernel& b) {
    return a.family_ == b.family_ && a.arity_ == b.arity_ && a.params_ == b.params_;
  }

 private:
  Kernel(Family f, std::span<const double> params) : family_(f), arity_(params.size()) {
    if (params.size() > params_.size()) throw invalid_parameter("too many kernel parameters");
    std::copy(params.begin(), params.end(), params_.begin());
    validate();
  }

  double p(std::size_t i) const { return params_[i]; }

  void require_arity(std::size_t k) const {
    if (arity_ != k) {
      throw invalid_parameter(std::string(family_name(family_)) + " kernel expects " +
                              std::to_string(k) + " parameter(s)");
    }
  }

  void fail(const char* what) const {
    throw invalid_parameter(std::string(family_name(family_)) + ": " + what);
  }

  void validate() const {
    for (std::size_t i = 0; i < arity_; ++i) {
      if (std::isnan(params_[i])) fail("parameter is NaN");
    }
    switch (family_) {
      case Family::normal:
      case Family::logistic:
      case Family::sev:
        require_arity(2);
        if (!std::isfinite(p(0))) fail("location must be finite");
        if (!(p(1) > 0.0) || !std::isfinite(p(1))) fail("scale must be positive and finite");
        break;
      case Family::gamma:
        require_arity(2);
        if (!(p(0) > 0.0) || !std::isfinite(p(0))) fail("shape must be positive and finite");
        if (!(p(1) > 0.0) || !std::isfinite(p(1))) fail("rate must be positive and finite");
        break;
      case Family::inverse_gaussian:
        require_arity(2);
        if (!(p(0) > 0.0) || !std::isfinite(p(0))) fail("mean must be positive");
        if (!(p(1) > 0.0) || !std::isfinite(p(1))) fail("shape must be positive and finite");
        break;
      case Family::inverse_gaussian_limit:
        require_arity(1);
        if (!(p(0) > 0.0) || !std::isfinite(p(0))) fail("shape must be positive and finite");
        break;
      case Family::binomial:
        require_arity(2);
        if (!detail::is_count(p(0))) fail("trials must be a nonnegative integer");
        if (!(p(1) > 0.0 && p(1) < 1.0)) fail("probability must lie in (0, 1)");
        break;
      case Family::poisson:
        require_arity(1);
        if (!(p(0) > 0.0) || !std::isfinite(p(0))) fail("mean must be positive and finite");
        break;
      case Family::hypergeometric:
        require_arity(3);
        if (!detail::is_count(p(0)) || !detail::is_count(p(1)) || !detail::is_count(p(2))) {
          fail("counts must be nonnegative integers");
        }
        if (p(0) > p(2) || p(1) > p(2)) fail("successes and draws cannot exceed the population");
        break;
      case Family::beta_binomial:
        require_arity(3);
        if (!detail::is_count(p(0))) fail("trials must be a nonnegative integer");
        if (!(p(1) > 0.0) || !(p(2) > 0.0) || !std::isfinite(p(1)) || !std::isfinite(p(2))) {
          fail("shape parameters must be positive and finite");
        }
        break;
      case Family::negative_binomial:
        require_arity(2);
        if (!(p(0) > 0.0) || !std::isfinite(p(0))) fail("size must be positive and finite");
        if (!(p(1) > 0.0 && p(1) < 1.0)) fail("probability must lie in (0, 1)");
        break;
      case Family::chi_square:
      case Family::student_t:
        require_arity(1);
        if (!(p(0) > 0.0) || !std::isfinite(p(0))) fail("degrees of freedom must be positive");
        break;
      case Family::uniform01: require_arity(0); break;
    }
  }

  // ---- continuous helpers -------------------------------------------------

  double ig_cdf(double x) const {
    if (x <= 0.0) return 0.0;
    if (x == special::kInf) return 1.0;
    const double mu = p(0);
    const double lam = p(1);
    const double r = std::sqrt(lam / x);
    const double t1 = special::norm_cdf(r * (x / mu - 1.0));
    const double t2 = std::exp(2.0 * lam / mu + special::norm_log_cdf(-r * (x / mu + 1.0)));
    return std::min(1.0, t1 + t2);
  }

  double ig_sf(double x) const {
    if (x <= 0.0) return 1.0;
    if (x == special::kInf) return 0.0;
    const double mu = p(0);
    const double lam = p(1);
    const double r = std::sqrt(lam / x);
    const double t1 = special::norm_sf(r * (x / mu - 1.0));
    const double t2 = std::exp(2.0 * lam / mu + special::norm_log_cdf(-r * (x / mu + 1.0)));
    return std::max(0.0, t1 - t2);
  }

  double t_cdf(double x) const {
    if (x == special::kInf) return 1.0;
    if (x == -special::kInf) return 0.0;
    const double nu = p(0);
    const double t2 = x * x;
    if (t2 < nu) {
      const double half = 0.5 * special::beta_inc(0.5, 0.5 * nu, t2 / (nu + t2));
      return x >= 0.0 ? 0.5 + half : 0.5 - half;
    }
    const double tail = 0.5 * special::beta_inc(0.5 * nu, 0.5, nu / (nu + t2));
    return x >= 0.0 ? 1.0 - tail : tail;
  }

  double initial_guess(double prob, bool upper) const {
    const double z = upper ? special::norm_isf(prob) : special::norm_quantile(prob);
    switch (family_) {
      case Family::gamma:
      case Family::chi_square: {
        const double shape = family_ == Family::gamma ? p(0) : 0.5 * p(0);
        const double rate = family_ == Family::gamma ? p(1) : 0.5;
        const double c = 1.0 - 1.0 / (9.0 * shape) + z / (3.0 * std::sqrt(shape));
        const double g = c > 0.0 ? shape * c * c * c / rate : shape / rate * 1e-3;
        return std::isfinite(g) && g > 0.0 ? g : shape / rate;
      }
      case Family::inverse_gaussian: {
        const double mu = p(0);
        const double g = mu * std::exp(z * std::sqrt(mu / p(1)) - 0.5 * mu / p(1));
        return std::isfinite(g) && g > 0.0 ? g : mu;
      }
      case Family::inverse_gaussian_limit: {
        const double zz = upper ? special::norm_quantile(0.5 + 0.5 * prob) : special::norm_isf(0.5 * prob);
        const double g = p(0) / (zz * zz);
        return std::isfinite(g) && g > 0.0 ? g : p(0);
      }
      case Family::student_t: return z;
      default: return z;
    }
  }

  // Solves cdf(x) = prob (upper == false) or sf(x) = prob (upper == true),
  // working on whichever side of the distribution keeps full precision.
  double numeric_inverse(double prob, bool upper) const {
    const bool use_sf = upper ? prob < 0.5 : prob > 0.5;
    const double target = upper == use_sf ? prob : 1.0 - prob;
    auto h = [&](double x) { return use_sf ? target - sf(x) : cdf(x) - target; };
    auto dh = [&](double x) { return pdf(x); };
    const double guess = initial_guess(prob, upper);
    const auto domain = support_lower() == 0.0 ? roots::Domain::positive : roots::Domain::real_line;
    const double step = 1.0 + std::fabs(guess);
    auto [lo, hi] = roots::bracket_increasing(h, 0.0, guess, step, domain);
    return roots::newton_increasing(h, dh, lo, hi, guess);
  }

  // ---- discrete helpers ---------------------------------------------------

  double discrete_log_pmf(double x) const {
    const double ninf = -special::kInf;
    if (std::floor(x) != x) return ninf;
    if (x < support_lower() || x > support_upper()) return ninf;
    switch (family_) {
      case Family::binomial: {
        const double n = p(0);
        const double pr = p(1);
        return special::log_choose(n, x) + x * std::log(pr) + (n - x) * std::log1p(-pr);
      }
      case Family::poisson: return x * std::log(p(0)) - p(0) - special::log_gamma(x + 1.0);
      case Family::hypergeometric: {
        const double big_k = p(0);
        const double n = p(1);
        const double big_n = p(2);
        return special::log_choose(big_k, x) + special::log_choose(big_n - big_k, n - x) -
               special::log_choose(big_n, n);
      }
      case Family::beta_binomial: {
        const double m = p(0);
        const double a = p(1);
        const double b = p(2);
        return special::log_choose(m, x) + special::log_beta(x + a, m - x + b) - special::log_beta(a, b);
      }
      case Family::negative_binomial: {
        const double r = p(0);
        const double pr = p(1);
        return special::log_gamma(x + r) - special::log_gamma(r) - special::log_gamma(x + 1.0) +
               r * std::log(pr) + x * std::log1p(-pr);
      }
      default: return ninf;
    }
  }

  double log_sum_pmf(double from, double to) const {
    double acc = -special::kInf;
    for (double k = from; k <= to; k += 1.0) acc = special::log_add_exp(acc, discrete_log_pmf(k));
    return acc;
  }

  double discrete_cdf(double k) const {
    if (k < support_lower()) return 0.0;
    if (k >= support_upper()) return 1.0;
    switch (family_) {
      case Family::binomial: return special::beta_inc(p(0) - k, k + 1.0, 1.0 - p(1));
      case Family::poisson: return special::gamma_q(k + 1.0, p(0));
      case Family::negative_binomial: return special::beta_inc(p(0), k + 1.0, p(1));
      default: return std::min(1.0, std::exp(log_sum_pmf(support_lower(), k)));
    }
  }

  double discrete_sf(double k) const {
    if (k < support_lower()) return 1.0;
    if (k >= support_upper()) return 0.0;
    switch (family_) {
      case Family::binomial: return special::beta_inc(k + 1.0, p(0) - k, p(1));
      case Family::poisson: return special::gamma_p(k + 1.0, p(0));
      case Family::negative_binomial: return special::beta_inc_complement(p(0), k + 1.0, p(1));
      default: return std::min(1.0, std::exp(log_sum_pmf(k + 1.0, support_upper())));
    }
  }

  double discrete_quantile(double prob) const {
    const double lo_support = support_lower();
    if (prob == 0.0 || discrete_cdf(lo_support) >= prob) return lo_support;
    if (prob == 1.0 && support_upper() == special::kInf) return special::kInf;
    // Integer search for the smallest k with cdf(k) >= prob; cdf(lo) < prob.
    double lo = lo_support;
    double hi;
    const double hi_support = support_upper();
    if (std::isfinite(hi_support)) {
      hi = hi_support;
    } else {
      double step = std::max(1.0, std::ceil(mean()));
      hi = lo + step;
      while (discrete_cdf(hi) < prob) {
        lo = hi;
        step *= 2.0;
        hi = lo + step;
        if (hi > 1e15) throw root_not_bracketed("discrete quantile search diverged");
      }
    }
    while (hi - lo > 1.0) {
      const double mid = std::floor(lo + 0.5 * (hi - lo));
      if (discrete_cdf(mid) >= prob) {
        hi = mid;
      } else {
        lo = mid;
      }
    }
    return hi;
  }

  double draw_binomial(Rng& rng) const {
    const double n = p(0);
    const double pr = p(1);
    const double log_p0 = n * std::log1p(-pr);
    if (log_p0 < -600.0) return discrete_quantile(rng.uniform());
    const double u = rng.uniform();
    const double ratio = pr / (1.0 - pr);
    double k = 0.0;
    double f = std::exp(log_p0);
    double acc = f;
    while (u > acc && k < n) {
      f *= (n - k) / (k + 1.0) * ratio;
      k += 1.0;
      acc += f;
    }
    return k;
  }

  double draw_poisson(Rng& rng) const {
    const double mu = p(0);
    if (mu > 600.0) return discrete_quantile(rng.uniform());
    const double u = rng.uniform();
    double k = 0.0;
    double f = std::exp(-mu);
    double acc = f;
    while (u > acc) {
      k += 1.0;
      f *= mu / k;
      acc += f;
      if (f == 0.0 && acc < u) return discrete_quantile(u);
    }
    return k;
  }

  double draw_inverse_gaussian(Rng& rng) const {
    // Michael, Schucany and Haas transformation with one uniform accept step.
    const double mu = p(0);
    const double lam = p(1);
    const double z = special::norm_quantile(rng.uniform());
    const double y = z * z;
    const double x = mu + mu * mu * y / (2.0 * lam) -
                     mu / (2.0 * lam) * std::sqrt(4.0 * mu * lam * y + mu * mu * y * y);
    const double u = rng.uniform();
    if (u <= mu / (mu + x)) return x;
    return mu * mu / x;
  }

  Family family_;
  std::size_t arity_;
  std::array<double, 3> params_{};
};

/// A family with its parameter values.
using ModelSpec = Kernel;

}  // namespace predint
