#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace pucci {

// Bad numeric input: non-finite entries, out-of-range values, violated call preconditions.
class input_error : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Invalid configuration: bad keys, inconsistent options, impossible grids.
class config_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Runtime numerical failure: NaN in a step, non-convergence. Carries the diagnostic
// sequence that was being monitored when the failure was declared.
class numeric_error : public std::runtime_error {
 public:
  explicit numeric_error(const std::string& what, std::vector<double> diagnostics = {})
      : std::runtime_error(what), diagnostics(std::move(diagnostics)) {}

  std::vector<double> diagnostics;
};

}  // namespace pucci
