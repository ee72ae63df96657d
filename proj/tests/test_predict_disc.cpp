#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "predint/dist.hpp"
#include "predint/predict_disc.hpp"

using namespace predint;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

long double log_fact(long double k) { return std::lgamma(k + 1.0L); }

// P(X <= x) for X ~ Hyper(K successes, N population, d draws), by direct
// factorial-ratio summation.
long double hyper_cdf(int x, int K, int N, int d) {
  long double s = 0.0L;
  for (int k = std::max(0, d - (N - K)); k <= std::min(x, std::min(K, d)); ++k) {
    s += std::exp(log_fact(K) - log_fact(k) - log_fact(K - k) + log_fact(N - K) - log_fact(d - k) -
                  log_fact(N - K - d + k) - log_fact(N) + log_fact(d) + log_fact(N - d));
  }
  return s;
}

long double binom_cdf_ref(int x, int trials, long double p) {
  long double s = 0.0L;
  for (int k = 0; k <= std::min(x, trials); ++k) {
    s += std::exp(log_fact(trials) - log_fact(k) - log_fact(trials - k) + k * std::log(p) +
                  (trials - k) * std::log1p(-p));
  }
  return s;
}

DiscretePredictionProblem binom(double x, double n, double m, double alpha = 0.05) {
  return {DiscreteKind::binomial, x, n, m, alpha};
}
DiscretePredictionProblem pois(double x, double n, double m, double alpha = 0.05) {
  return {DiscreteKind::poisson, x, n, m, alpha};
}

DiscreteOptions fast_fiducial(std::uint64_t seed = 1) {
  DiscreteOptions o;
  o.fiducial_B = 20000;
  o.policy = RngPolicy{seed};
  return o;
}

}  // namespace

TEST_CASE("problem validation") {
  CHECK_THROWS_AS(binom_bounds(binom(21, 20, 5), DiscreteMethod::conservative), invalid_problem);
  CHECK_THROWS_AS(binom_bounds(binom(2.5, 20, 5), DiscreteMethod::conservative), invalid_problem);
  CHECK_THROWS_AS(binom_bounds(binom(2, 20, 0), DiscreteMethod::conservative), invalid_problem);
  CHECK_THROWS_AS(binom_bounds(binom(2, 20, 5, 0.7), DiscreteMethod::conservative), invalid_problem);
  CHECK_THROWS_AS(pois_bounds(pois(2, 0, 5), DiscreteMethod::conservative), invalid_problem);
  CHECK_THROWS_AS(pois_bounds(binom(2, 20, 5), DiscreteMethod::conservative), invalid_problem);
  CHECK_THROWS_AS(pois_bounds(pois(2, 1, 1), DiscreteMethod::wang), invalid_parameter);
  CHECK_THROWS_AS(parse_discrete_method("faulkenberry"), invalid_parameter);
  CHECK(parse_discrete_method("kp") == DiscreteMethod::kp);
}

TEST_CASE("conservative binomial bounds") {
  for (double n : {5.0, 20.0}) {
    for (double m : {1.0, 7.0, 20.0}) {
      for (double a : {0.01, 0.05, 0.5}) {
        CHECK(binom_bounds(binom(0, n, m, a), DiscreteMethod::conservative).lower == 0);
      }
    }
  }
  // Enumeration oracle: X | X+Y = x+y is hypergeometric.
  const int n = 20, m = 20, x = 5;
  int upper = -1, lower = -1;
  for (int y = 0; y <= m; ++y) {
    if (hyper_cdf(x, x + y, n + m, n) > 0.05L) upper = y;
    if (lower < 0 && 1.0L - hyper_cdf(x - 1, x + y, n + m, n) > 0.05L) lower = y;
  }
  const auto b = binom_bounds(binom(x, n, m), DiscreteMethod::conservative);
  CHECK(b.upper == upper);
  CHECK(b.lower == lower);
  CHECK(b.upper <= m);
}

TEST_CASE("conservative Poisson bounds") {
  // n = m = 1: conditional success probability 1/2.
  const int x = 3;
  int upper = 0;
  for (int y = 0; y < 200; ++y) {
    if (binom_cdf_ref(x, x + y, 0.5L) > 0.05L) upper = y;
  }
  int lower = 0;
  while (!(1.0L - binom_cdf_ref(x - 1, x + lower, 0.5L) > 0.05L)) ++lower;
  const auto b = pois_bounds(pois(x, 1, 1), DiscreteMethod::conservative);
  CHECK(b.upper == upper);
  CHECK(b.lower == lower);
  CHECK(pois_bounds(pois(0, 2.5, 0.7), DiscreteMethod::conservative).lower == 0);
}

TEST_CASE("Hinkley binomial") {
  const auto pmf = hinkley_binomial_pmf(1, 1, 1);
  CHECK_THAT(pmf[0], WithinAbs(1.0 / 3.0, 1e-15));
  CHECK_THAT(pmf[1], WithinAbs(2.0 / 3.0, 1e-15));
  CHECK_THAT(hinkley_binomial_likelihood(1, 1, 0, 1), WithinAbs(0.5, 1e-15));
  CHECK_THAT(hinkley_binomial_likelihood(1, 1, 1, 1), WithinAbs(1.0, 1e-15));
  const auto b = binom_bounds(binom(1, 1, 1), DiscreteMethod::hinkley);
  CHECK(b.upper == 1);
  CHECK(b.lower == 0);
  // (n, x) and (m, y) are interchangeable.
  for (double n : {3.0, 8.0}) {
    for (double m : {2.0, 5.0}) {
      for (double x = 0; x <= n; ++x) {
        for (double y = 0; y <= m; ++y) {
          CHECK_THAT(hinkley_binomial_likelihood(x, n, y, m),
                     WithinRel(hinkley_binomial_likelihood(y, m, x, n), 1e-13));
        }
      }
    }
  }
  double total = 0.0;
  for (double p : hinkley_binomial_pmf(4, 12, 9)) total += p;
  CHECK_THAT(total, WithinAbs(1.0, 1e-13));
}

TEST_CASE("Jeffreys and Hinkley closed forms") {
  for (double x : {0.0, 3.0, 11.0}) {
    const auto bb = Kernel::beta_binomial(15, x + 0.5, 20 - x + 0.5);
    const auto b = binom_bounds(binom(x, 20, 15, 0.1), DiscreteMethod::jeffreys);
    CHECK(b.lower == static_cast<std::int64_t>(bb.quantile(0.1)));
    CHECK(b.upper == static_cast<std::int64_t>(bb.quantile(0.9)));
    const double med = bb.quantile(0.5);
    CHECK(b.lower <= med);
    CHECK(med <= b.upper);
  }
  for (double x : {0.0, 2.0, 9.0}) {
    const double pi = 4.0 / (4.0 + 2.5);
    const auto jb = pois_bounds(pois(x, 4, 2.5), DiscreteMethod::jeffreys);
    const auto nb = Kernel::negative_binomial(x + 0.5, pi);
    CHECK(jb.lower == static_cast<std::int64_t>(nb.quantile(0.05)));
    CHECK(jb.upper == static_cast<std::int64_t>(nb.quantile(0.95)));
    const auto hb = pois_bounds(pois(x, 4, 2.5), DiscreteMethod::hinkley);
    const auto nh = Kernel::negative_binomial(x + 1.0, pi);
    CHECK(hb.lower == static_cast<std::int64_t>(nh.quantile(0.05)));
    CHECK(hb.upper == static_cast<std::int64_t>(nh.quantile(0.95)));
  }
  for (double a : {0.01, 0.2, 0.5}) CHECK(pois_bounds(pois(0, 3, 3, a), DiscreteMethod::jeffreys).lower == 0);
  // Hinkley Poisson predictive mass is a proper distribution.
  const auto nh = Kernel::negative_binomial(4.0, 0.5);
  double total = 0.0;
  double y = 0.0;
  for (; nh.sf(y) >= 1e-12; y += 1.0) total += nh.pdf(y);
  total += nh.pdf(y);
  CHECK_THAT(total, WithinAbs(1.0, 2e-12));
}

TEST_CASE("approximate pivots") {
  CHECK_THROWS_AS(binom_bounds(binom(0, 20, 20), DiscreteMethod::nelson), degenerate_estimate);
  CHECK_THROWS_AS(binom_bounds(binom(20, 20, 20), DiscreteMethod::nelson), degenerate_estimate);
  CHECK_THROWS_AS(pois_bounds(pois(0, 2, 2), DiscreteMethod::nelson), degenerate_estimate);
  const auto kp0 = pois_bounds(pois(0, 2, 2), DiscreteMethod::kp);
  CHECK(kp0.upper >= kp0.lower);
  CHECK(kp0.upper < 100);
  const auto kpb = binom_bounds(binom(0, 20, 20), DiscreteMethod::kp);
  CHECK(kpb.upper >= kpb.lower);

  // Nelson upper bound is the largest y with the pivot below z.
  const double z = special::norm_isf(0.05);
  const double x = 7, n = 20, m = 15, p = x / n;
  std::int64_t want = -1;
  for (int y = 0; y <= 15; ++y) {
    if ((y - m * p) / std::sqrt((n + m) * (m / n) * p * (1 - p)) <= z) want = y;
  }
  CHECK(binom_bounds(binom(x, n, m), DiscreteMethod::nelson).upper == want);

  // Fixed-estimate KP variant is a valid bound too.
  DiscreteOptions fixed;
  fixed.kp_substitute_candidate = false;
  const auto a = binom_bounds(binom(4, 20, 20), DiscreteMethod::kp, fixed);
  CHECK(a.lower <= a.upper);
  CHECK(a.upper <= 20);
}

TEST_CASE("bounds are ordered and within range") {
  for (auto method : kAllDiscreteMethods) {
    CAPTURE(discrete_method_name(method));
    for (double x : {1.0, 6.0, 19.0}) {
      const auto b = binom_bounds(binom(x, 20, 20), method, fast_fiducial());
      CHECK(0 <= b.lower);
      CHECK(b.lower <= b.upper);
      CHECK(b.upper <= 20);
      if (method_applies(DiscreteKind::poisson, method)) {
        const auto c = pois_bounds(pois(x, 20, 20), method, fast_fiducial());
        CHECK(0 <= c.lower);
        CHECK(c.lower <= c.upper);
      }
    }
  }
}

TEST_CASE("upper bounds are monotone in x and m") {
  for (auto method : kAllDiscreteMethods) {
    CAPTURE(discrete_method_name(method));
    const bool nelson = method == DiscreteMethod::nelson;
    std::int64_t prev = -1;
    for (double x = nelson ? 1 : 0; x <= (nelson ? 19 : 20); ++x) {
      const auto b = binom_bounds(binom(x, 20, 20), method, fast_fiducial());
      CAPTURE(x);
      CHECK(b.upper >= prev);
      prev = b.upper;
    }
    for (double x : {1.0, 5.0, 10.0, 19.0}) {
      prev = -1;
      for (double m = 1; m <= 20; ++m) {
        const auto b = binom_bounds(binom(x, 20, m), method, fast_fiducial());
        CAPTURE(x, m);
        CHECK(b.upper >= prev);
        prev = b.upper;
      }
    }
    if (!method_applies(DiscreteKind::poisson, method)) continue;
    prev = -1;
    for (double x = nelson ? 1 : 0; x <= 30; ++x) {
      const auto b = pois_bounds(pois(x, 20, 20), method, fast_fiducial());
      CAPTURE(x);
      CHECK(b.upper >= prev);
      prev = b.upper;
    }
    for (double x : {1.0, 8.0}) {
      prev = -1;
      for (double m = 1; m <= 20; ++m) {
        const auto b = pois_bounds(pois(x, 20, m), method, fast_fiducial());
        CAPTURE(x, m);
        CHECK(b.upper >= prev);
        prev = b.upper;
      }
    }
  }
}

TEST_CASE("fiducial bounds agree with an independent sampler") {
  // Binomial: R_p = U_(x) + D (U_(x+1) - U_(x)) from sorted uniforms.
  const int n = 20, m = 15, x = 6;
  std::mt19937_64 eng(2718);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const int B = 40000;
  std::vector<double> r(B);
  for (auto& v : r) {
    std::vector<double> u(n);
    for (auto& w : u) w = unif(eng);
    std::sort(u.begin(), u.end());
    const double lo = x == 0 ? 0.0 : u[x - 1], hi = x == n ? 1.0 : u[x];
    v = lo + unif(eng) * (hi - lo);
  }
  auto ref_cdf = [&](int y) {
    double s = 0.0;
    for (double p : r) s += static_cast<double>(binom_cdf_ref(y, m, p));
    return s / B;
  };
  DiscreteOptions opt;
  opt.policy = RngPolicy{5};
  const auto b = binom_bounds(binom(x, n, m), DiscreteMethod::fiducial, opt);
  // The reference cdf brackets the same quantiles up to Monte Carlo error.
  CHECK(ref_cdf(static_cast<int>(b.upper)) >= 0.95 - 0.01);
  CHECK(ref_cdf(static_cast<int>(b.upper) - 1) < 0.95 + 0.01);
  CHECK(ref_cdf(static_cast<int>(b.lower)) >= 0.05 - 0.01);
  if (b.lower > 0) CHECK(ref_cdf(static_cast<int>(b.lower) - 1) < 0.05 + 0.01);

  // Poisson: lambda ~ chi^2_{2x+1} / (2n).
  const double pn = 3.0, pm = 2.0;
  const int px = 4;
  std::chi_squared_distribution<double> chi(2.0 * px + 1.0);
  std::vector<double> lam(B);
  for (auto& l : lam) l = chi(eng) / (2.0 * pn);
  auto pref = [&](int y) {
    double s = 0.0;
    for (double l : lam) s += special::gamma_q(y + 1.0, pm * l);
    return s / B;
  };
  const auto pb = pois_bounds(pois(px, pn, pm), DiscreteMethod::fiducial, opt);
  CHECK(pref(static_cast<int>(pb.upper)) >= 0.95 - 0.01);
  CHECK(pref(static_cast<int>(pb.upper) - 1) < 0.95 + 0.01);

  // Same seed, same bounds.
  const auto again = binom_bounds(binom(x, n, m), DiscreteMethod::fiducial, opt);
  CHECK(again.lower == b.lower);
  CHECK(again.upper == b.upper);
}
