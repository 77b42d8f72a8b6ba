#pragma once

#include <stdexcept>
#include <string>

namespace fosr {

// Error taxonomy; the CLI maps each class to a distinct exit code.
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Ingestion, schema and validation failures (exit code 3).
struct DataError : std::runtime_error {
  explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

// Numerical failures: singular fits, non-PSD matrices, nonconvergence (exit code 4).
struct NumericError : std::runtime_error {
  explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

struct FitError : NumericError {
  explicit FitError(const std::string& msg) : NumericError(msg) {}
};

}  // namespace fosr
