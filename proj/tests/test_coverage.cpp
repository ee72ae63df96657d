#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include "predint/coverage.hpp"
#include "predint/dist.hpp"

using namespace predint;
using Catch::Matchers::WithinAbs;

namespace {

CoverageConfig discrete_config(DiscreteKind kind, DiscreteMethod method, double n, double m, double param) {
  CoverageConfig c;
  c.method.kind = MethodKind::discrete;
  c.method.discrete = method;
  c.truth = kind == DiscreteKind::binomial ? Kernel::binomial(n, param) : Kernel::poisson(param);
  c.n = n;
  c.m = m;
  c.alpha = 0.05;
  c.side = CoverageSide::upper;
  return c;
}

// E[Phi(z sigma_hat / (sigma sqrt(1 + 1/n)))] with n sigma_hat^2 / sigma^2 ~
// chi^2_{n-1}, by Simpson quadrature in the chi-square variate.
double plugin_normal_coverage(int n, double alpha) {
  const double z = 1.6448536269514722;  // Phi^{-1}(0.95)
  REQUIRE(alpha == 0.05);
  const double k = n - 1.0;
  const auto dens = [&](double q) {
    return std::exp((0.5 * k - 1.0) * std::log(q) - 0.5 * q - 0.5 * k * std::log(2.0) - std::lgamma(0.5 * k));
  };
  const auto phi = [](double t) { return 0.5 * std::erfc(-t / std::sqrt(2.0)); };
  const double hi = k + 60.0 * std::sqrt(2.0 * k) + 60.0;
  const int steps = 200000;
  const double h = hi / steps;
  double sum = 0.0;
  for (int i = 0; i <= steps; ++i) {
    const double q = i * h;
    const double f = q == 0.0 ? (k == 2.0 ? 0.5 * phi(0.0) : 0.0)
                              : dens(q) * phi(z * std::sqrt(q / n) / std::sqrt(1.0 + 1.0 / n));
    sum += f * (i == 0 || i == steps ? 1.0 : (i % 2 ? 4.0 : 2.0));
  }
  return sum * h / 3.0;
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  return out;
}

}  // namespace

TEST_CASE("oracle and exact normal bounds reach nominal coverage") {
  CoverageConfig c;
  c.truth = Kernel::normal(3.0, 2.0);
  c.n = 8;
  c.n_sim = 40000;
  c.seed = 5;
  for (MethodKind k : {MethodKind::oracle, MethodKind::normal_exact}) {
    c.method.kind = k;
    for (CoverageSide side : {CoverageSide::lower, CoverageSide::upper, CoverageSide::two_sided}) {
      c.side = side;
      const auto r = estimate_coverage(c);
      CAPTURE(r.method, coverage_side_name(side), r.coverage);
      CHECK(r.failures == 0);
      CHECK(r.used == c.n_sim);
      CHECK_THAT(r.se, WithinAbs(coverage_se(r.coverage, c.n_sim), 1e-15));
      CHECK(std::fabs(r.coverage - 0.95) <= 3.0 * coverage_se(0.95, c.n_sim));
    }
  }
}

TEST_CASE("plug-in coverage matches the chi-square quadrature") {
  CoverageConfig c;
  c.method.kind = MethodKind::plugin;
  c.truth = Kernel::normal(0.0, 1.0);
  c.n_sim = 40000;
  c.seed = 6;
  for (int n : {5, 10, 20}) {
    c.n = n;
    const auto r = estimate_coverage(c);
    const double exact = plugin_normal_coverage(n, 0.05);
    CAPTURE(n, r.coverage, exact);
    CHECK(exact < 0.95);
    CHECK(std::fabs(r.coverage - exact) <= 4.0 * coverage_se(exact, c.n_sim));
  }
}

TEST_CASE("results do not depend on the thread count") {
  CoverageConfig c;
  c.method.kind = MethodKind::calibration;
  c.method.B = 50;
  c.truth = Kernel::sev(1.5, 2.0);
  c.n = 10;
  c.n_sim = 400;
  c.seed = 77;
  c.threads = 1;
  const auto a = estimate_coverage(c);
  c.threads = 4;
  const auto b = estimate_coverage(c);
  CHECK(a.coverage == b.coverage);
  CHECK(a.failures == b.failures);
  c.seed = 78;
  const auto d = estimate_coverage(c);
  CHECK(d.n_sim == a.n_sim);
}

TEST_CASE("configuration validation") {
  CoverageConfig c;
  c.method.kind = MethodKind::gpq;
  c.truth = Kernel::gamma(2.0, 1.0);
  CHECK_THROWS_AS(c.validate(), unsupported_family);
  c.method.kind = MethodKind::order_stat;
  c.truth = Kernel::normal(0.0, 1.0);
  c.side = CoverageSide::upper;
  CHECK_THROWS_AS(c.validate(), invalid_parameter);
  c.side = CoverageSide::two_sided;
  c.method.r = 5;
  c.method.s = 3;
  CHECK_THROWS_AS(c.validate(), index_range_error);
  c.method.kind = MethodKind::plugin;
  c.n_sim = 10;
  CHECK_THROWS_AS(c.validate(), invalid_parameter);
  c.n_sim = 1000;
  c.alpha = 1.5;
  CHECK_THROWS_AS(c.validate(), invalid_probability);
  auto d = discrete_config(DiscreteKind::poisson, DiscreteMethod::wang, 10, 5, 1.0);
  CHECK_THROWS_AS(d.validate(), invalid_parameter);
  auto e = discrete_config(DiscreteKind::binomial, DiscreteMethod::jeffreys, 10, 5, 0.3);
  e.n = 12;
  CHECK_THROWS_AS(e.validate(), invalid_parameter);
  CHECK(parse_method_kind("calibration_smoothed") == MethodKind::calibration_smoothed);
  CHECK_THROWS_AS(parse_method_kind("nope"), invalid_parameter);
  CHECK(parse_coverage_side("two_sided") == CoverageSide::two_sided);
}

TEST_CASE("exact enumeration oracles") {
  SECTION("an always-[0, m] bound covers with probability one") {
    const auto all = [](double) { return DiscreteBound{0, 7, DiscreteMethod::conservative}; };
    for (double p : {0.01, 0.4, 0.99}) {
      CHECK_THAT(exact_discrete_coverage(all, DiscreteKind::binomial, p, 12, 7, CoverageSide::two_sided).coverage,
                 WithinAbs(1.0, 1e-12));
    }
    const auto wide = [](double) { return DiscreteBound{0, 1000000, DiscreteMethod::conservative}; };
    const auto e = exact_discrete_coverage(wide, DiscreteKind::poisson, 2.0, 5, 3, CoverageSide::upper);
    CHECK_THAT(e.coverage, WithinAbs(1.0, 1e-11));
    CHECK(Kernel::poisson(10.0).sf(e.truncation_point) < kPoissonTailBound);
  }

  SECTION("conservative binomial never undercovers") {
    double lowest = 1.0;
    for (int k = 1; k <= 19; ++k) {
      auto c = discrete_config(DiscreteKind::binomial, DiscreteMethod::conservative, 20, 10, 0.05 * k);
      for (CoverageSide side : {CoverageSide::lower, CoverageSide::upper}) {
        c.side = side;
        lowest = std::min(lowest, exact_discrete_coverage(c).coverage);
      }
    }
    CHECK(lowest >= 0.95);
  }

  SECTION("Jeffreys Poisson coverage curve stays near nominal") {
    for (double lam : {0.5, 1.0, 2.0, 5.0, 10.0}) {
      auto c = discrete_config(DiscreteKind::poisson, DiscreteMethod::jeffreys, 10, 5, lam);
      const double cov = exact_discrete_coverage(c).coverage;
      CAPTURE(lam, cov);
      CHECK(cov >= 0.93);
      CHECK(cov <= 1.0);
    }
  }

  SECTION("undefined x values are excluded and reported") {
    auto c = discrete_config(DiscreteKind::binomial, DiscreteMethod::nelson, 10, 5, 0.2);
    const auto e = exact_discrete_coverage(c);
    const Kernel x = Kernel::binomial(10, 0.2);
    CHECK_THAT(e.excluded_mass, WithinAbs(x.cdf(0.0) + (1.0 - x.cdf(9.0)), 1e-14));
    CHECK(e.truncation_point == 10.0);
  }

  SECTION("Poisson truncation beyond the enumeration cap") {
    const auto b = [](double) { return DiscreteBound{0, 0, DiscreteMethod::conservative}; };
    CHECK_THROWS_AS(exact_discrete_coverage(b, DiscreteKind::poisson, 1e7, 10, 1, CoverageSide::upper),
                    truncation_insufficient);
  }
}

TEST_CASE("Monte Carlo and exact coverage agree") {
  struct Case {
    DiscreteKind kind;
    DiscreteMethod method;
    double n, m, param;
    CoverageSide side;
  };
  const std::vector<Case> cases{
      {DiscreteKind::binomial, DiscreteMethod::conservative, 20, 20, 0.3, CoverageSide::upper},
      {DiscreteKind::binomial, DiscreteMethod::wang, 30, 10, 0.4, CoverageSide::lower},
      {DiscreteKind::binomial, DiscreteMethod::hinkley, 15, 8, 0.5, CoverageSide::two_sided},
      {DiscreteKind::poisson, DiscreteMethod::kp, 4, 2, 3.0, CoverageSide::upper},
      {DiscreteKind::poisson, DiscreteMethod::jeffreys, 10, 10, 0.7, CoverageSide::two_sided},
  };
  for (const auto& k : cases) {
    auto c = discrete_config(k.kind, k.method, k.n, k.m, k.param);
    c.side = k.side;
    c.n_sim = 40000;
    c.seed = 11;
    const auto mc = estimate_coverage(c);
    const auto ex = exact_discrete_coverage(c);
    CAPTURE(mc.method, mc.coverage, ex.coverage);
    CHECK(std::fabs(mc.coverage - ex.coverage) <= 4.0 * coverage_se(ex.coverage, c.n_sim) + 1e-12);
  }
  auto c = discrete_config(DiscreteKind::binomial, DiscreteMethod::conservative, 20, 20, 0.3);
  c.n_sim = 40000;
  c.seed = 12;
  CHECK(estimate_coverage(c).coverage >= 0.95 - 3.0 * coverage_se(0.95, c.n_sim));
}

TEST_CASE("too many failed replicates abort the run") {
  auto c = discrete_config(DiscreteKind::binomial, DiscreteMethod::nelson, 20, 5, 0.01);
  c.n_sim = 1000;
  CHECK_THROWS_AS(estimate_coverage(c), excessive_failures);
  // At p = 0.5 undefined x are rare enough to be dropped and counted.
  auto ok = discrete_config(DiscreteKind::binomial, DiscreteMethod::nelson, 8, 5, 0.5);
  ok.n_sim = 20000;
  const auto r = estimate_coverage(ok);
  CHECK(r.failures > 0);
  CHECK(r.used + r.failures == r.n_sim);
}

TEST_CASE("report serialization") {
  CoverageConfig c;
  c.method.kind = MethodKind::gpq;
  c.method.B = 100;
  c.truth = Kernel::normal(1.0, 2.0);
  c.n = 6;
  c.n_sim = 200;
  c.seed = 99;
  const auto r = estimate_coverage(c);
  const auto header = split(coverage_csv_header());
  const auto row = split(coverage_csv_row(r));
  REQUIRE(header.size() == row.size());
  CHECK(header.back() == "timestamp");
  CHECK(row[0] == "gpq");
  CHECK(row[1] == "normal");
  CHECK(row[2] == "1;2");
  CHECK(row[8] == "99");
  CHECK(std::stod(row[9]) == r.coverage);
  const auto j = coverage_json(r);
  for (const auto& h : header) CHECK(j.contains(h == "family" || h == "truth_params" ? "truth" : h));
  CHECK(j.contains("wall_seconds"));
  CHECK(j["truth"]["params"][1].get<double>() == 2.0);
  // Reruns differ only in the timestamp column.
  const auto r2 = estimate_coverage(c);
  auto a = row, b = split(coverage_csv_row(r2));
  a.pop_back();
  b.pop_back();
  CHECK(a == b);
}
