#pragma once

// Distribution-free prediction: order-statistic intervals and full
// (transductive) conformal regions.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "predint/errors.hpp"
#include "predint/rng.hpp"
#include "predint/sample.hpp"

namespace predint {

// ---------------------------------------------------------------------------
// Order statistics

struct OrderStatInterval {
  double lower = 0.0;
  double upper = 0.0;
  std::size_t r = 0;
  std::size_t s = 0;
  /// Exact coverage (s - r) / (n + 1) for continuous data.
  double coverage = 0.0;
  /// Tied values were found in the sample; the coverage is then only a bound.
  bool ties = false;
};

/// (X_(r), X_(s)) with 1 <= r < s <= n.
inline OrderStatInterval order_stat_interval(std::span<const double> sample, std::size_t r,
                                             std::size_t s) {
  const std::size_t n = sample.size();
  if (!(r >= 1 && r < s && s <= n)) {
    throw index_range_error("order statistics need 1 <= r < s <= n (r = " + std::to_string(r) +
                            ", s = " + std::to_string(s) + ", n = " + std::to_string(n) + ")");
  }
  std::vector<double> x(sample.begin(), sample.end());
  std::sort(x.begin(), x.end());
  OrderStatInterval out;
  out.lower = x[r - 1];
  out.upper = x[s - 1];
  out.r = r;
  out.s = s;
  out.coverage = static_cast<double>(s - r) / static_cast<double>(n + 1);
  out.ties = std::adjacent_find(x.begin(), x.end()) != x.end();
  return out;
}

inline OrderStatInterval order_stat_interval(const Sample& sample, std::size_t r, std::size_t s) {
  if (sample.censored()) throw invalid_parameter("order-statistic intervals need complete data");
  return order_stat_interval(sample.values(), r, s);
}

// ---------------------------------------------------------------------------
// Conformal prediction

/// d(A, z) >= 0, symmetric in the ordering of A. Built-in measures are
/// |z - center(A)| with center the mean or the median; they carry a signed
/// form z - center(A) that the analytic region assembly uses.
struct NonconformityMeasure {
  enum class Builtin { none, mean, median };

  std::string id;
  std::function<double(std::span<const double>, double)> distance;
  Builtin builtin = Builtin::none;

  static double mean_of(std::span<const double> a) {
    double s = 0.0;
    for (double v : a) s += v;
    return s / static_cast<double>(a.size());
  }

  static double median_of(std::span<const double> a) {
    std::vector<double> v(a.begin(), a.end());
    std::sort(v.begin(), v.end());
    const std::size_t k = v.size();
    return k % 2 ? v[k / 2] : 0.5 * (v[k / 2 - 1] + v[k / 2]);
  }

  static NonconformityMeasure mean_deviation() {
    return {"mean", [](std::span<const double> a, double z) { return std::fabs(z - mean_of(a)); },
            Builtin::mean};
  }

  static NonconformityMeasure median_deviation() {
    return {"median", [](std::span<const double> a, double z) { return std::fabs(z - median_of(a)); },
            Builtin::median};
  }

  static NonconformityMeasure custom(std::string id,
                                     std::function<double(std::span<const double>, double)> d) {
    if (!d) throw invalid_parameter("nonconformity measure needs a distance function");
    return {std::move(id), std::move(d), Builtin::none};
  }

  static NonconformityMeasure by_name(const std::string& name) {
    if (name == "mean") return mean_deviation();
    if (name == "median") return median_deviation();
    throw invalid_parameter("unknown nonconformity measure '" + name + "' (expected mean or median)");
  }

  double signed_distance(std::span<const double> a, double z) const {
    switch (builtin) {
      case Builtin::mean: return z - mean_of(a);
      case Builtin::median: return z - median_of(a);
      case Builtin::none: break;
    }
    return distance(a, z);
  }
};

struct RegionPiece {
  double lower = 0.0;
  double upper = 0.0;
  bool lower_closed = true;
  bool upper_closed = true;

  bool contains(double y) const {
    return (lower < y || (lower_closed && lower == y)) && (y < upper || (upper_closed && upper == y));
  }
};

struct ConformalRegion {
  std::vector<RegionPiece> pieces;
  double window_lower = 0.0;
  double window_upper = 0.0;
  std::optional<double> u;  // shared randomization draw
  bool analytic = false;

  bool empty() const { return pieces.empty(); }
  bool contains(double y) const {
    return std::any_of(pieces.begin(), pieces.end(), [&](const RegionPiece& p) { return p.contains(y); });
  }
  /// Total length of the pieces.
  double length() const {
    double s = 0.0;
    for (const auto& p : pieces) s += p.upper - p.lower;
    return s;
  }
};

inline constexpr std::size_t kConformalGridPoints = 10000;

struct ConformalOptions {
  bool randomize = false;
  /// Grid resolution for measures without an analytic path.
  std::size_t grid_points = kConformalGridPoints;
  /// Force the grid scan even for built-in measures.
  bool force_grid = false;
};

namespace detail {

// Scores of the augmented sample Z = (x_1..x_n, y): the first n are
// d(Z_{-i}, x_i), the last is d(X_n, y).
inline std::vector<double> conformal_scores(std::span<const double> x, const NonconformityMeasure& d,
                                            double y, bool signed_form) {
  const std::size_t n = x.size();
  std::vector<double> scores(n + 1);
  std::vector<double> rest(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t k = 0;
    for (std::size_t j = 0; j < n; ++j) {
      if (j != i) rest[k++] = x[j];
    }
    rest[k] = y;
    scores[i] = signed_form ? d.signed_distance(rest, x[i]) : d.distance(rest, x[i]);
  }
  scores[n] = signed_form ? d.signed_distance(x, y) : d.distance(x, y);
  return scores;
}

// Conformal rank criterion: y is in the region when
//   Ghat(t-) + u [Ghat(t) - Ghat(t-)] < 1 - alpha,  t = d(X_n, y),
// with Ghat the empirical cdf of the n + 1 scores (u = 0: non-randomized).
inline bool conformal_accepts(const std::vector<double>& abs_scores, double alpha, double u) {
  const std::size_t n1 = abs_scores.size();
  const double t = abs_scores.back();
  std::size_t less = 0, equal = 0;
  for (double s : abs_scores) {
    if (s < t) {
      ++less;
    } else if (s == t) {
      ++equal;
    }
  }
  const double g = (static_cast<double>(less) + u * static_cast<double>(equal)) / static_cast<double>(n1);
  return g < 1.0 - alpha;
}

inline bool conformal_accepts_at(std::span<const double> x, const NonconformityMeasure& d, double alpha,
                                 double u, double y) {
  auto s = conformal_scores(x, d, y, false);
  for (double& v : s) v = std::fabs(v);
  return conformal_accepts(s, alpha, u);
}

inline std::pair<double, double> conformal_window(std::span<const double> x) {
  const auto [lo, hi] = std::minmax_element(x.begin(), x.end());
  double w = *hi - *lo;
  // A single distinct value has no range; fall back to its magnitude.
  if (!(w > 0.0)) w = std::max(1.0, std::fabs(*lo));
  return {*lo - 3.0 * w, *hi + 3.0 * w};
}

// Assembles pieces from sorted candidate points p_0 < ... < p_K (window ends
// included): membership is evaluated at every point and every midpoint.
template <class Accept>
std::vector<RegionPiece> assemble(const std::vector<double>& pts, Accept&& accept) {
  std::vector<RegionPiece> out;
  bool open = false;
  RegionPiece cur;
  auto extend = [&](double lo, bool lo_closed, double hi, bool hi_closed) {
    if (open && cur.upper == lo && (cur.upper_closed || lo_closed)) {
      cur.upper = hi;
      cur.upper_closed = hi_closed;
    } else {
      if (open) out.push_back(cur);
      cur = {lo, hi, lo_closed, hi_closed};
      open = true;
    }
  };
  bool bridge = false;  // the open gap before pts[k] holds no doubles
  for (std::size_t k = 0; k < pts.size(); ++k) {
    if (accept(pts[k])) {
      if (bridge && open && cur.upper == pts[k - 1] && cur.upper_closed) cur.upper = pts[k];
      extend(pts[k], true, pts[k], true);
    }
    bridge = false;
    if (k + 1 < pts.size()) {
      const double mid = 0.5 * (pts[k] + pts[k + 1]);
      if (mid > pts[k] && mid < pts[k + 1]) {
        if (accept(mid)) extend(pts[k], false, pts[k + 1], false);
      } else {
        bridge = true;
      }
    }
  }
  if (open) out.push_back(cur);
  return out;
}

// Candidate breakpoints for built-in measures. Every signed score is affine
// in y between consecutive data values, so the comparisons |s_i| vs |s_y|
// change only at data values and at roots of s_i = +/- s_y.
inline std::vector<double> conformal_breakpoints(std::span<const double> x, const NonconformityMeasure& d,
                                                 double wlo, double whi) {
  std::vector<double> knots(x.begin(), x.end());
  knots.push_back(wlo);
  knots.push_back(whi);
  std::sort(knots.begin(), knots.end());
  knots.erase(std::unique(knots.begin(), knots.end()), knots.end());
  knots.erase(std::remove_if(knots.begin(), knots.end(), [&](double v) { return v < wlo || v > whi; }),
              knots.end());

  std::vector<double> pts = knots;
  for (std::size_t k = 0; k + 1 < knots.size(); ++k) {
    const double a = knots[k], b = knots[k + 1];
    const double y0 = a + 0.25 * (b - a), y1 = a + 0.75 * (b - a);
    const auto s0 = conformal_scores(x, d, y0, true);
    const auto s1 = conformal_scores(x, d, y1, true);
    const std::size_t n = x.size();
    const double by = (s1[n] - s0[n]) / (y1 - y0);
    const double ay = s0[n] - by * y0;
    for (std::size_t i = 0; i < n; ++i) {
      const double bi = (s1[i] - s0[i]) / (y1 - y0);
      const double ai = s0[i] - bi * y0;
      for (double sign : {1.0, -1.0}) {
        const double slope = bi - sign * by;
        if (slope == 0.0) continue;
        const double root = -(ai - sign * ay) / slope;
        if (root > a && root < b) pts.push_back(root);
      }
    }
  }
  std::sort(pts.begin(), pts.end());
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  return pts;
}

}  // namespace detail

/// Conformal region {y : Ghat_y(t-) < 1 - alpha} (or its randomized blend)
/// restricted to the window [min - 3 range, max + 3 range].
inline ConformalRegion conformal_region(std::span<const double> sample, const NonconformityMeasure& measure,
                                        double alpha, const ConformalOptions& opt = {},
                                        std::optional<double> u = std::nullopt) {
  if (sample.empty()) throw invalid_parameter("conformal region needs n >= 1");
  if (!(alpha > 0.0 && alpha < 1.0)) throw invalid_probability("alpha must lie in (0, 1)");
  if (!measure.distance) throw invalid_parameter("nonconformity measure has no distance function");
  if (opt.randomize && !u) throw invalid_parameter("randomized conformal region needs a uniform draw");
  if (u && !(*u >= 0.0 && *u < 1.0)) throw invalid_probability("randomization draw must lie in [0, 1)");

  std::vector<double> x(sample.begin(), sample.end());
  std::sort(x.begin(), x.end());  // permutation invariance by construction
  const double uu = opt.randomize ? *u : 0.0;
  const auto [wlo, whi] = detail::conformal_window(x);
  auto accept = [&](double y) { return detail::conformal_accepts_at(x, measure, alpha, uu, y); };

  ConformalRegion region;
  region.window_lower = wlo;
  region.window_upper = whi;
  if (opt.randomize) region.u = uu;

  if (measure.builtin != NonconformityMeasure::Builtin::none && !opt.force_grid) {
    region.analytic = true;
    region.pieces = detail::assemble(detail::conformal_breakpoints(x, measure, wlo, whi), accept);
    return region;
  }
  if (opt.grid_points < 2) throw invalid_parameter("conformal grid needs at least 2 points");
  std::vector<double> grid(opt.grid_points);
  const double step = (whi - wlo) / static_cast<double>(opt.grid_points - 1);
  for (std::size_t k = 0; k < grid.size(); ++k) grid[k] = wlo + step * static_cast<double>(k);
  grid.back() = whi;
  // Runs of accepted grid points, reported as closed intervals between them.
  for (std::size_t k = 0; k < grid.size();) {
    if (!accept(grid[k])) {
      ++k;
      continue;
    }
    std::size_t j = k;
    while (j + 1 < grid.size() && accept(grid[j + 1])) ++j;
    region.pieces.push_back({grid[k], grid[j], true, true});
    k = j + 1;
  }
  return region;
}

/// Draws the shared randomization uniform from `rng` when requested.
inline ConformalRegion conformal_region(std::span<const double> sample, const NonconformityMeasure& measure,
                                        double alpha, bool randomize, Rng& rng) {
  ConformalOptions opt;
  opt.randomize = randomize;
  std::optional<double> u;
  if (randomize) u = rng.uniform();
  return conformal_region(sample, measure, alpha, opt, u);
}

}  // namespace predint
