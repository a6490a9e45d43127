#pragma once

#include <stdexcept>
#include <string>

namespace spsqkd {

// Configuration file / parameter validation failures. CLI maps these to exit code 2.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Filesystem and CSV schema failures. CLI exit code 3.
struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Estimator failures (non-convergence, unidentifiable data, too few peaks). CLI exit code 4.
struct FitError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace spsqkd
