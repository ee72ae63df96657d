#pragma once

#include <algorithm>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "predint/errors.hpp"

namespace predint {

enum class Censoring { complete, type2 };

/// Size and censoring scheme of a sample; what a bootstrap must reproduce.
struct SampleShape {
  std::size_t n = 0;
  Censoring censoring = Censoring::complete;
  std::size_t r = 0;  // event count; equals n for complete data

  static SampleShape complete(std::size_t n) { return {n, Censoring::complete, n}; }
  static SampleShape type2(std::size_t n, std::size_t r) {
    if (r < 2 || r > n) throw invalid_parameter("Type-II censoring requires 2 <= r <= n");
    return {n, Censoring::type2, r};
  }
};

/// Observations with a censoring descriptor. For Type-II censoring the
/// values are sorted ascending; the first r are event times and the
/// remaining n - r units are censored at the r-th order statistic (their
/// stored value equals values[r - 1]).
class Sample {
 public:
  Sample() = default;

  static Sample complete(std::vector<double> values) {
    if (values.empty()) throw invalid_parameter("sample must be nonempty");
    Sample s;
    s.values_ = std::move(values);
    s.r_ = s.values_.size();
    return s;
  }

  /// `values` holds all n units (any order); only the r smallest are events.
  static Sample type2(std::vector<double> values, std::size_t r) {
    if (values.empty()) throw invalid_parameter("sample must be nonempty");
    if (r < 2 || r > values.size()) {
      throw invalid_parameter("Type-II censoring requires 2 <= r <= n (r = " + std::to_string(r) +
                              ", n = " + std::to_string(values.size()) + ")");
    }
    std::sort(values.begin(), values.end());
    const double cut = values[r - 1];
    for (std::size_t i = r; i < values.size(); ++i) values[i] = cut;
    Sample s;
    s.values_ = std::move(values);
    s.censoring_ = Censoring::type2;
    s.r_ = r;
    return s;
  }

  std::size_t n() const { return values_.size(); }
  /// Number of events (n for complete data).
  std::size_t r() const { return r_; }
  Censoring censoring() const { return censoring_; }
  bool censored() const { return censoring_ == Censoring::type2 && r_ < values_.size(); }
  std::span<const double> values() const { return values_; }
  /// Event values: all values for complete data, the r smallest otherwise.
  std::span<const double> events() const { return std::span<const double>(values_).first(r_); }
  SampleShape shape() const {
    return censoring_ == Censoring::complete ? SampleShape::complete(n())
                                             : SampleShape{n(), Censoring::type2, r_};
  }

 private:
  std::vector<double> values_;
  Censoring censoring_ = Censoring::complete;
  std::size_t r_ = 0;
};

}  // namespace predint
