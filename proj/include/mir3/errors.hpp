#pragma once

#include <stdexcept>
#include <string>

namespace mir3 {

/// Invalid configuration or CLI usage; maps to exit code 1.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// A required run artifact (checkpoint, CSV, directory) is absent; exit 2.
struct MissingArtifactError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Training or evaluation produced non-finite values; exit 3.
struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace mir3
