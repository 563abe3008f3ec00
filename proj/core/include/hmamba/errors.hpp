#pragma once

#include <stdexcept>

namespace hmamba {

/// Unreadable, malformed or incompatible input/output artifacts. The CLI
/// maps these to exit code 3.
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Training aborted on a numerical check (non-finite loss or gradient).
/// The CLI maps these to exit code 1.
struct TrainAbort : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace hmamba
