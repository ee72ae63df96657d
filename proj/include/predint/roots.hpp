#pragma once

// One-dimensional root finding for monotone functions.

#include <cmath>
#include <limits>
#include <utility>

#include "predint/errors.hpp"

namespace predint::roots {

inline constexpr int kMaxExpand = 2100;
inline constexpr int kMaxBisect = 2200;

/// Support of a monotone function: the whole line or the positive half-line.
enum class Domain { real_line, positive };

/// Finds lo < hi with f(lo) < target <= f(hi) for nondecreasing f, starting
/// from `guess` and expanding outward by doubling `step` (real line) or by
/// halving/doubling (positive half-line).
template <class F>
std::pair<double, double> bracket_increasing(F&& f, double target, double guess, double step,
                                             Domain domain) {
  if (domain == Domain::positive) {
    double lo = guess > 0.0 && std::isfinite(guess) ? guess : 1.0;
    double hi = lo;
    if (f(lo) >= target) {
      for (int i = 0; i < kMaxExpand && f(lo) >= target; ++i) {
        hi = lo;
        lo *= 0.5;
        if (lo == 0.0) throw root_not_bracketed("bracket_increasing: target not reached above zero");
      }
    } else {
      for (int i = 0; i < kMaxExpand && f(hi) < target; ++i) {
        lo = hi;
        hi *= 2.0;
        if (!std::isfinite(hi)) throw root_not_bracketed("bracket_increasing: target not reached");
      }
    }
    if (!(f(lo) < target && f(hi) >= target)) {
      throw root_not_bracketed("bracket_increasing: expansion limit reached");
    }
    return {lo, hi};
  }
  if (!(step > 0.0) || !std::isfinite(step)) step = 1.0;
  double lo = std::isfinite(guess) ? guess : 0.0;
  double hi = lo;
  if (f(lo) >= target) {
    double s = step;
    for (int i = 0; i < kMaxExpand && f(lo) >= target; ++i) {
      hi = lo;
      lo -= s;
      s *= 2.0;
      if (!std::isfinite(lo)) throw root_not_bracketed("bracket_increasing: target not reached");
    }
  } else {
    double s = step;
    for (int i = 0; i < kMaxExpand && f(hi) < target; ++i) {
      lo = hi;
      hi += s;
      s *= 2.0;
      if (!std::isfinite(hi)) throw root_not_bracketed("bracket_increasing: target not reached");
    }
  }
  if (!(f(lo) < target && f(hi) >= target)) {
    throw root_not_bracketed("bracket_increasing: expansion limit reached");
  }
  return {lo, hi};
}

/// Bisection to full double precision for nondecreasing f with
/// f(lo) < target <= f(hi). Returns the smallest representable point found
/// with f >= target, i.e. the generalized inverse inf{x : f(x) >= target}.
template <class F>
double bisect_increasing(F&& f, double target, double lo, double hi) {
  for (int i = 0; i < kMaxBisect; ++i) {
    const double mid = lo + 0.5 * (hi - lo);
    if (mid <= lo || mid >= hi) break;
    if (f(mid) >= target) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  return hi;
}

/// Safeguarded Newton iteration for an increasing function h with a root in
/// [lo, hi], h(lo) < 0 <= h(hi). `dh` is the derivative of h.
template <class H, class D>
double newton_increasing(H&& h, D&& dh, double lo, double hi, double x0) {
  double x = (x0 > lo && x0 < hi) ? x0 : lo + 0.5 * (hi - lo);
  for (int i = 0; i < 400; ++i) {
    const double hx = h(x);
    if (hx == 0.0) return x;
    if (hx < 0.0) {
      lo = x;
    } else {
      hi = x;
    }
    const double d = dh(x);
    double next = x - hx / d;
    if (!(d > 0.0) || !std::isfinite(next) || next <= lo || next >= hi) {
      next = lo + 0.5 * (hi - lo);
    }
    const double scale = std::fabs(next) > 1e-300 ? std::fabs(next) : 1e-300;
    if (std::fabs(next - x) <= 4.0 * std::numeric_limits<double>::epsilon() * scale ||
        hi - lo <= 4.0 * std::numeric_limits<double>::epsilon() * scale) {
      return next;
    }
    x = next;
  }
  return x;
}

}  // namespace predint::roots
