#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numbers>
#include <vector>

#include "predint/boot.hpp"
#include "predint/coverage.hpp"
#include "predint/dist.hpp"
#include "predint/fit.hpp"
#include "predint/predict_core.hpp"
#include "predint/predict_ls.hpp"
#include "predint/rng.hpp"

using namespace predint;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

Sample seeded(const Kernel& k, std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  return Sample::complete(k.draw(rng, n));
}

}  // namespace

TEST_CASE("GPQ transform arithmetic") {
  auto d = gpq_transform(0.0, 1.0, 0.0, 1.0);
  CHECK(d.mu_ss == 0.0);
  CHECK(d.sigma_ss == 1.0);
  d = gpq_transform(1.0, 2.0, 0.0, 1.0);
  CHECK(d.mu_ss == 3.0);
  CHECK(d.sigma_ss == 4.0);
  d = gpq_transform(0.0, 1.0, 0.5, 2.0);
  CHECK(d.mu_ss == -0.25);
  CHECK(d.sigma_ss == 0.5);
  CHECK_THROWS_AS(gpq_transform(0.0, 1.0, 0.0, 0.0), degenerate_sample);
}

TEST_CASE("GPQ with identity replicates is the plug-in cdf") {
  const auto s = seeded(Kernel::normal(2.0, 0.5), 9, 1);
  const auto fit = fit_ml(Family::normal, s);
  const auto F = gpq_predictive_cdf(fit, identity_batch(fit, 20));
  for (double y : {0.0, 1.5, 2.0, 2.3, 4.0}) CHECK_THAT(F.cdf(y), WithinAbs(fit.estimate.cdf(y), 1e-15));
  CHECK_THROWS_AS(gpq_predictive_cdf(fit, BootstrapBatch{}), empty_batch);
  const FitResult g{Kernel::gamma(2.0, 1.0), 0.0, true, 0, 0.0};
  CHECK_THROWS_AS(gpq_draws(g, identity_batch(g, 2)), unsupported_family);
}

TEST_CASE("GPQ and calibration predictive cdfs coincide with shared draws") {
  for (Family f : {Family::normal, Family::logistic, Family::sev}) {
    CAPTURE(family_name(f));
    const auto s = seeded(Kernel::location_scale(f, 1.0, 2.0), 10, 31);
    const auto fit = fit_ml(f, s);
    const auto batch = parametric_bootstrap(fit, s.shape(), 400, RngPolicy{32});
    const auto G = gpq_predictive_cdf(fit, batch);
    const auto C = calibration_predictive_cdf(fit, batch);
    const double lo = fit.estimate.quantile(0.001), hi = fit.estimate.quantile(0.999);
    double worst = 0.0;
    for (int k = 0; k < 1000; ++k) {
      const double y = lo + (hi - lo) * k / 999.0;
      worst = std::max(worst, std::fabs(G.cdf(y) - C.cdf(y)));
    }
    CHECK(worst <= 1e-12);
  }
}

TEST_CASE("GPQ bound matches the normal t-interval") {
  const auto s = seeded(Kernel::normal(5.0, 1.5), 10, 77);
  const auto fit = fit_ml(Family::normal, s);
  const auto batch = parametric_bootstrap(fit, s.shape(), 5000, RngPolicy{78});
  const auto b = gpq_bound(fit, batch, 0.05, Side::upper);
  const auto exact = normal_exact_bound(s, 0.05, Side::upper);
  CHECK_THAT(b.endpoint, WithinAbs(exact.endpoint, 0.02 * fit.estimate.param(1)));
}

TEST_CASE("normal exact bound") {
  const auto s = seeded(Kernel::normal(0.0, 1.0), 7, 3);
  double mean = 0.0;
  for (double v : s.values()) mean += v;
  mean /= 7.0;
  CHECK_THAT(normal_exact_bound(s, 0.5, Side::upper).endpoint, WithinAbs(mean, 1e-15));

  const auto two = Sample::complete({-1.0, 1.0});
  const double t = std::tan(std::numbers::pi * 0.45);
  CHECK_THAT(normal_exact_bound(two, 0.05, Side::upper).endpoint,
             WithinRel(t * std::sqrt(2.0) * std::sqrt(1.5), 1e-12));
  CHECK_THAT(normal_exact_bound(two, 0.05, Side::lower).endpoint,
             WithinRel(-t * std::sqrt(2.0) * std::sqrt(1.5), 1e-12));
  CHECK_THROWS_AS(normal_exact_bound(Sample::complete({1.0, 1.0, 1.0}), 0.05, Side::upper), degenerate_sample);
  CHECK_THROWS_AS(normal_exact_bound(Sample::complete({1.0}), 0.05, Side::upper), invalid_parameter);
}

TEST_CASE("normal exact bound coverage") {
  CoverageConfig c;
  c.method.kind = MethodKind::normal_exact;
  c.n = 10;
  c.n_sim = 100000;
  c.seed = 5;
  const auto r = estimate_coverage(c);
  CHECK(std::fabs(r.coverage - 0.95) <= 3.0 * std::sqrt(0.95 * 0.05 / 1e5));
}

TEST_CASE("GPQ bound is affine equivariant with paired seeds") {
  const auto s = seeded(Kernel::sev(0.0, 1.0), 12, 8);
  const double a = -3.0, b = 2.5;
  std::vector<double> moved;
  for (double v : s.values()) moved.push_back(a + b * v);
  const auto t = Sample::complete(moved);
  const RngPolicy policy{9};
  const auto f1 = fit_ml(Family::sev, s);
  const auto f2 = fit_ml(Family::sev, t);
  const auto b1 = parametric_bootstrap(f1, s.shape(), 300, policy);
  const auto b2 = parametric_bootstrap(f2, t.shape(), 300, policy);
  for (Side side : {Side::lower, Side::upper}) {
    const double e1 = gpq_bound(f1, b1, 0.05, side).endpoint;
    const double e2 = gpq_bound(f2, b2, 0.05, side).endpoint;
    CHECK_THAT(e2, WithinAbs(a + b * e1, 1e-10 * std::max(1.0, std::fabs(e2))));
  }
}

TEST_CASE("GPQ with Type-II r = n reproduces the complete path") {
  const auto s = seeded(Kernel::logistic(0.0, 1.0), 9, 44);
  const auto c = Sample::type2(std::vector<double>(s.values().begin(), s.values().end()), 9);
  const RngPolicy policy{45};
  const auto f1 = fit_ml(Family::logistic, s);
  const auto f2 = fit_ml(Family::logistic, c);
  const auto b1 = gpq_bound(f1, parametric_bootstrap(f1, s.shape(), 200, policy), 0.1, Side::upper);
  const auto b2 = gpq_bound(f2, parametric_bootstrap(f2, c.shape(), 200, policy), 0.1, Side::upper);
  CHECK(b1.endpoint == b2.endpoint);
}

TEST_CASE("GPQ on Type-II censored data") {
  Rng rng(12);
  const auto s = Sample::type2(Kernel::sev(2.0, 0.5).draw(rng, 15), 10);
  const auto fit = fit_ml(Family::sev, s);
  const auto batch = parametric_bootstrap(fit, s.shape(), 300, RngPolicy{13});
  const auto lo = gpq_bound(fit, batch, 0.05, Side::lower);
  const auto hi = gpq_bound(fit, batch, 0.05, Side::upper);
  CHECK(lo.endpoint < hi.endpoint);
  CHECK(std::isfinite(hi.endpoint));
}

TEST_CASE("GPQ bootstrap is exact for location-scale kernels") {
  // Small but nontrivial budget; the acceptance run uses the full one.
  for (Family f : {Family::normal, Family::sev}) {
    for (double n : {5.0, 10.0}) {
      CoverageConfig c;
      c.method.kind = MethodKind::gpq;
      c.method.B = 200;
      c.truth = Kernel::location_scale(f, 0.0, 1.0);
      c.n = n;
      c.n_sim = 2000;
      c.seed = 1000 + static_cast<std::uint64_t>(n);
      const auto r = estimate_coverage(c);
      CAPTURE(family_name(f), n, r.coverage);
      CHECK(std::fabs(r.coverage - 0.95) <= 3.0 * std::sqrt(0.95 * 0.05 / 2000.0));
    }
  }
}
