#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "predint/coverage.hpp"
#include "predint/dist.hpp"
#include "predint/npar.hpp"
#include "predint/rng.hpp"

using namespace predint;
using Catch::Matchers::WithinAbs;

namespace {

std::vector<double> normal_sample(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  return Kernel::normal(0.0, 1.0).draw(rng, n);
}

// Hand-ranked membership: y is kept unless at least ceil((1 - alpha)(n+1))
// leave-one-out scores fall strictly below d(X, y).
bool hand_member(const std::vector<double>& x, double alpha, double y) {
  const std::size_t n = x.size();
  double sx = 0.0;
  for (double v : x) sx += v;
  const double ty = std::fabs(y - sx / n);
  std::size_t less = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double center = (sx - x[i] + y) / static_cast<double>(n);
    if (std::fabs(x[i] - center) < ty) ++less;
  }
  return static_cast<double>(less) / static_cast<double>(n + 1) < 1.0 - alpha;
}

}  // namespace

TEST_CASE("order-statistic intervals") {
  std::vector<double> x(19);
  for (int i = 0; i < 19; ++i) x[i] = 19 - i;
  const auto iv = order_stat_interval(x, 1, 19);
  CHECK(iv.lower == 1.0);
  CHECK(iv.upper == 19.0);
  CHECK_THAT(iv.coverage, WithinAbs(0.9, 1e-15));
  CHECK_FALSE(iv.ties);
  const std::vector<double> nine{3, 1, 4, 1.5, 9, 2, 6, 5, 3.5};
  CHECK_THAT(order_stat_interval(nine, 1, 9).coverage, WithinAbs(0.8, 1e-15));
  CHECK(order_stat_interval(nine, 2, 5).upper == 3.5);
  CHECK(order_stat_interval(std::vector<double>{1, 1, 2}, 1, 3).ties);
  CHECK_THROWS_AS(order_stat_interval(nine, 0, 9), index_range_error);
  CHECK_THROWS_AS(order_stat_interval(nine, 5, 5), index_range_error);
  CHECK_THROWS_AS(order_stat_interval(nine, 1, 10), index_range_error);
}

TEST_CASE("order-statistic interval coverage") {
  CoverageConfig c;
  c.method.kind = MethodKind::order_stat;
  c.method.r = 1;
  c.method.s = 19;
  c.truth = Kernel::uniform01();
  c.n = 19;
  c.side = CoverageSide::two_sided;
  c.n_sim = 100000;
  c.seed = 8;
  const auto r = estimate_coverage(c);
  CHECK(std::fabs(r.coverage - 0.9) <= 3.0 * std::sqrt(0.9 * 0.1 / 1e5));
}

TEST_CASE("conformal rank extremes") {
  const std::vector<double> one{3.0};
  const auto mean = NonconformityMeasure::mean_deviation();
  // alpha < 1/(n+1): the whole search window.
  const auto all = conformal_region(one, mean, 0.4);
  REQUIRE(all.pieces.size() == 1);
  CHECK(all.pieces[0].lower == all.window_lower);
  CHECK(all.pieces[0].upper == all.window_upper);
  // alpha >= n/(n+1) with a randomization draw at or above 1 - alpha: empty.
  ConformalOptions opt;
  opt.randomize = true;
  CHECK(conformal_region(one, mean, 0.5, opt, 0.6).empty());
  CHECK_FALSE(conformal_region(one, mean, 0.5, opt, 0.2).empty());
  CHECK_THROWS_AS(conformal_region(std::vector<double>{}, mean, 0.1), invalid_parameter);
  CHECK_THROWS_AS(conformal_region(one, mean, 0.5, opt), invalid_parameter);
}

TEST_CASE("conformal region for {0, 2} matches hand ranking") {
  const std::vector<double> x{0.0, 2.0};
  const auto region = conformal_region(x, NonconformityMeasure::mean_deviation(), 0.5);
  REQUIRE(region.pieces.size() == 1);
  CHECK_THAT(region.pieces[0].lower, WithinAbs(-2.0, 1e-12));
  CHECK_THAT(region.pieces[0].upper, WithinAbs(4.0, 1e-12));
  // Exhaustive evaluation over a fine grid.
  for (int k = 0; k <= 14000; ++k) {
    const double y = -6.0 + 14.0 * k / 14000.0;
    if (std::fabs(y + 2.0) < 1e-9 || std::fabs(y - 4.0) < 1e-9) continue;
    CAPTURE(y);
    CHECK(region.contains(y) == hand_member(x, 0.5, y));
  }
}

TEST_CASE("analytic and grid regions agree") {
  for (std::uint64_t seed : {1, 2, 3}) {
    const auto x = normal_sample(11, seed);
    for (const auto& m : {NonconformityMeasure::mean_deviation(), NonconformityMeasure::median_deviation()}) {
      CAPTURE(seed, m.id);
      const auto exact = conformal_region(x, m, 0.2);
      ConformalOptions g;
      g.force_grid = true;
      const auto grid = conformal_region(x, m, 0.2, g);
      const double step = (grid.window_upper - grid.window_lower) / (kConformalGridPoints - 1);
      REQUIRE(exact.pieces.size() >= 1);
      CHECK(exact.analytic);
      CHECK_FALSE(grid.analytic);
      CHECK_THAT(grid.pieces.front().lower, WithinAbs(exact.pieces.front().lower, step));
      CHECK_THAT(grid.pieces.back().upper, WithinAbs(exact.pieces.back().upper, step));
      if (m.builtin == NonconformityMeasure::Builtin::mean) CHECK(exact.pieces.size() == 1);
      // Custom measures take the grid path.
      const auto custom = NonconformityMeasure::custom("mean_copy", m.distance);
      const auto cg = conformal_region(x, custom, 0.2);
      CHECK(cg.pieces.size() == grid.pieces.size());
      CHECK(cg.pieces.front().lower == grid.pieces.front().lower);
    }
  }
}

TEST_CASE("conformal region is permutation invariant") {
  auto x = normal_sample(9, 44);
  const auto m = NonconformityMeasure::median_deviation();
  ConformalOptions opt;
  opt.randomize = true;
  const auto base = conformal_region(x, m, 0.15, opt, 0.37);
  std::mt19937_64 eng(3);
  for (int t = 0; t < 10; ++t) {
    std::shuffle(x.begin(), x.end(), eng);
    const auto r = conformal_region(x, m, 0.15, opt, 0.37);
    REQUIRE(r.pieces.size() == base.pieces.size());
    for (std::size_t i = 0; i < r.pieces.size(); ++i) {
      CHECK(r.pieces[i].lower == base.pieces[i].lower);
      CHECK(r.pieces[i].upper == base.pieces[i].upper);
    }
  }
}

TEST_CASE("conformal regions nest in alpha") {
  const auto x = normal_sample(14, 9);
  for (const auto& m : {NonconformityMeasure::mean_deviation(), NonconformityMeasure::median_deviation()}) {
    const std::vector<double> alphas{0.05, 0.1, 0.2, 0.4, 0.6};
    for (std::size_t i = 0; i + 1 < alphas.size(); ++i) {
      const auto wide = conformal_region(x, m, alphas[i]);
      const auto narrow = conformal_region(x, m, alphas[i + 1]);
      for (int k = 0; k <= 4000; ++k) {
        const double y = wide.window_lower + (wide.window_upper - wide.window_lower) * k / 4000.0;
        if (narrow.contains(y)) CHECK(wide.contains(y));
      }
    }
  }
}

TEST_CASE("conformal coverage") {
  CoverageConfig c;
  c.method.kind = MethodKind::conformal;
  c.truth = Kernel::normal(0.0, 1.0);
  c.n = 19;
  c.alpha = 0.1;
  c.side = CoverageSide::two_sided;
  c.n_sim = 10000;
  c.seed = 19;
  const double se = std::sqrt(0.9 * 0.1 / 1e4);
  const auto plain = estimate_coverage(c);
  CHECK(plain.coverage >= 0.9 - 3.0 * se);
  c.method.randomize = true;
  const auto rnd = estimate_coverage(c);
  CHECK(std::fabs(rnd.coverage - 0.9) <= 3.0 * se);
  // alpha where (1 - alpha)(n + 1) is not an integer: randomization matters.
  c.alpha = 0.13;
  const auto rnd13 = estimate_coverage(c);
  CHECK(std::fabs(rnd13.coverage - 0.87) <= 3.0 * std::sqrt(0.87 * 0.13 / 1e4));
  c.method.randomize = false;
  const auto plain13 = estimate_coverage(c);
  CHECK(plain13.coverage >= 0.87 - 3.0 * std::sqrt(0.87 * 0.13 / 1e4));
}
