#pragma once

#include <stdexcept>
#include <string>

namespace tlpo {

/// Unreadable, malformed, or inconsistent input files and configs.
class io_error : public std::runtime_error {
 public:
  explicit io_error(const std::string& what_arg) : std::runtime_error(what_arg) {}
};

/// Numerical failure: singular systems, non-positive quadratic forms,
/// divergent iterations.
class numerical_error : public std::runtime_error {
 public:
  explicit numerical_error(const std::string& what_arg) : std::runtime_error(what_arg) {}
};

/// A payoff series has zero sample variance, so its Sharpe ratio is
/// undefined rather than merely hard to compute.
class zero_variance_error : public numerical_error {
 public:
  explicit zero_variance_error(const std::string& what_arg) : numerical_error(what_arg) {}
};

}  // namespace tlpo
