#pragma once

#include <stdexcept>
#include <string>

namespace predint {

// Caller-side contract violations. The CLI maps these to exit status 2.
struct invalid_parameter : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct invalid_probability : invalid_parameter {
  using invalid_parameter::invalid_parameter;
};

struct unsupported_family : invalid_parameter {
  using invalid_parameter::invalid_parameter;
};

struct invalid_problem : invalid_parameter {
  using invalid_parameter::invalid_parameter;
};

struct index_range_error : invalid_parameter {
  using invalid_parameter::invalid_parameter;
};

struct empty_batch : invalid_parameter {
  using invalid_parameter::invalid_parameter;
};

// Failures that depend on the data or on numerics. The CLI maps these to
// exit status 3.
struct numerical_failure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct degenerate_sample : numerical_failure {
  using numerical_failure::numerical_failure;
};

struct degenerate_estimate : numerical_failure {
  using numerical_failure::numerical_failure;
};

struct convergence_error : numerical_failure {
  using numerical_failure::numerical_failure;
};

struct excessive_failures : numerical_failure {
  using numerical_failure::numerical_failure;
};

struct root_not_bracketed : numerical_failure {
  using numerical_failure::numerical_failure;
};

struct truncation_insufficient : numerical_failure {
  using numerical_failure::numerical_failure;
};

}  // namespace predint
