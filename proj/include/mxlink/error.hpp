// Error taxonomy. The CLI maps these onto its exit codes:
// UsageError -> 1, DataError -> 2, NumericError -> 3.
#pragma once

#include <stdexcept>
#include <string>

namespace mxlink {

/// Bad invocation, configuration, or argument contract violation.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Malformed or structurally inconsistent input data.
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Non-finite values, overflow, or a failed numeric invariant.
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace mxlink
