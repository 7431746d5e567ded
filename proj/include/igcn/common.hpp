#pragma once

#include <stdexcept>
#include <string>

namespace igcn {

// Invalid inputs, malformed files, broken preconditions. CLI maps this to exit code 2.
struct ValidationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Numerical failures: training divergence, non-finite gradients, failed checks.
// CLI maps this to exit code 3.
struct NumericalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

} // namespace igcn
