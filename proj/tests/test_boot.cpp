#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <vector>

#include "predint/boot.hpp"

using namespace predint;
using Catch::Matchers::WithinAbs;

namespace {

FitResult fit_of(Family f, const std::vector<double>& x) { return fit_ml(f, Sample::complete(x)); }

std::vector<double> seeded(const Kernel& k, std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  return k.draw(rng, n);
}

// Sup distance between the sorted u* sets (quantile-function distance).
double sorted_sup_distance(std::vector<double> a, std::vector<double> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::fabs(a[i] - b[i]));
  return d;
}

}  // namespace

TEST_CASE("bootstrap is deterministic") {
  const auto fit = fit_of(Family::normal, seeded(Kernel::normal(0, 1), 10, 3));
  const auto a = parametric_bootstrap(fit, SampleShape::complete(10), 1, RngPolicy{123});
  const auto b = parametric_bootstrap(fit, SampleShape::complete(10), 1, RngPolicy{123});
  REQUIRE(a.size() == 1);
  CHECK(a.estimates == b.estimates);
  const auto c = parametric_bootstrap(fit, SampleShape::complete(10), 1, RngPolicy{124});
  CHECK(!(a.estimates == c.estimates));
}

TEST_CASE("bootstrap batch identical across thread counts") {
  const auto fit = fit_of(Family::sev, seeded(Kernel::sev(0, 1), 12, 5));
  const auto shape = SampleShape::type2(12, 8);
  const auto one = parametric_bootstrap(fit, shape, 300, RngPolicy{9}, 1);
  const auto many = parametric_bootstrap(fit, shape, 300, RngPolicy{9}, 7);
  CHECK(one.estimates == many.estimates);
  CHECK(one.replicate_index == many.replicate_index);
  CHECK(one.failures == many.failures);
}

TEST_CASE("bootstrap mean of mu* obeys the CLT bound") {
  FitResult fit{Kernel::normal(0, 1), 0.0, true, 0, 0.0};
  const auto batch = parametric_bootstrap(fit, SampleShape::complete(10), 2000, RngPolicy{2024});
  CHECK(batch.failures == 0);
  double mean = 0.0;
  for (const auto& e : batch.estimates) mean += e.param(0);
  mean /= 2000.0;
  CHECK(std::fabs(mean) <= 4.0 * (1.0 / std::sqrt(10.0)) / std::sqrt(2000.0));
}

TEST_CASE("discrete families do not bootstrap") {
  FitResult fit{Kernel::binomial(10, 0.3), 0.0, true, 0, 0.0};
  CHECK_THROWS_AS(parametric_bootstrap(fit, SampleShape::complete(10), 10, RngPolicy{1}),
                  unsupported_family);
}

TEST_CASE("too many degenerate refits is an error") {
  // Tiny gamma shapes underflow to exact zeros, which makes refits degenerate.
  FitResult fit{Kernel::gamma(0.002, 1), 0.0, true, 0, 0.0};
  CHECK_THROWS_AS(parametric_bootstrap(fit, SampleShape::complete(3), 200, RngPolicy{1}),
                  excessive_failures);
}

TEST_CASE("identity replicates give uniform u*") {
  const auto fit = fit_of(Family::normal, seeded(Kernel::normal(5, 2), 10, 8));
  const auto batch = identity_batch(fit, 20000);
  const auto u = calibration_u_values(fit, batch, RngPolicy{77});
  std::vector<double> sorted = u;
  std::sort(sorted.begin(), sorted.end());
  double d = 0.0;
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    d = std::max({d, (i + 1.0) / sorted.size() - sorted[i], sorted[i] - static_cast<double>(i) / sorted.size()});
  }
  CHECK(d < 1.9495 / std::sqrt(20000.0));
  // u* = Phi(z) of the standard draw behind y*.
  Rng rng = RngPolicy{77}.substream(0, StreamPurpose::bootstrap_predictand);
  const double y = fit.estimate.draw(rng);
  CHECK(u[0] == fit.estimate.cdf(y));
}

TEST_CASE("u* quantile matches the normal pivotal closed form") {
  const std::size_t n = 10;
  const auto fit = fit_of(Family::normal, seeded(Kernel::normal(0, 1), n, 100));
  const auto batch = parametric_bootstrap(fit, SampleShape::complete(n), 5000, RngPolicy{55});
  auto u = calibration_u_values(fit, batch, RngPolicy{55});
  for (double v : u) CHECK((v >= 0.0 && v <= 1.0));
  std::sort(u.begin(), u.end());
  const double emp = u[static_cast<std::size_t>(std::ceil(0.95 * u.size())) - 1];
  // (Y - mu_hat)/sigma_hat = T * sqrt((n+1)/(n-1)) with T ~ t_{n-1}.
  const double t = Kernel::student_t(n - 1).quantile(0.95);
  const double closed = special::norm_cdf(t * std::sqrt((n + 1.0) / (n - 1.0)));
  CHECK_THAT(emp, WithinAbs(closed, 0.01));
}

TEST_CASE("u* is invariant under affine maps of the data") {
  for (Family f : {Family::normal, Family::logistic, Family::sev}) {
    const auto x = seeded(Kernel::location_scale(f, 0, 1), 10, 31);
    std::vector<double> y(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) y[i] = 4.0 + 0.3 * x[i];
    const auto fx = fit_of(f, x);
    const auto fy = fit_of(f, y);
    const auto bx = parametric_bootstrap(fx, SampleShape::complete(10), 500, RngPolicy{6});
    const auto by = parametric_bootstrap(fy, SampleShape::complete(10), 500, RngPolicy{6});
    const auto ux = calibration_u_values(fx, bx, RngPolicy{6});
    const auto uy = calibration_u_values(fy, by, RngPolicy{6});
    REQUIRE(ux.size() == uy.size());
    double worst = 0.0;
    for (std::size_t i = 0; i < ux.size(); ++i) worst = std::max(worst, std::fabs(ux[i] - uy[i]));
    CHECK(worst <= 1e-12);
    CHECK(sorted_sup_distance(ux, uy) <= 1e-12);
  }
}
