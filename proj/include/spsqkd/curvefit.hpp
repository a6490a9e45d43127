#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace spsqkd::fit {

// Fills `residuals` (size fixed by the problem) for the given parameter
// vector. Residual convention: data - model.
using ResidualFn = std::function<void(std::span<const double> params, std::span<double> residuals)>;

struct Options {
    int max_iterations = 200;
    double step_tol = 1e-8;  // converged when the relative step falls below this
    double initial_damping = 1e-3;
};

struct Result {
    std::vector<double> params;
    double residual_norm = 0.0;  // sqrt(sum of squared residuals) at the optimum
    int iterations = 0;
    bool converged = false;
    // Row-major p x p covariance estimate (J^T J)^-1 * s^2, empty when the
    // problem has no residual degrees of freedom.
    std::vector<double> covariance;
};

// Damped least squares (Levenberg-Marquardt). Jacobian by central finite
// differences; damping grows on rejected steps and shrinks on accepted ones.
Result levenberg_marquardt(const ResidualFn& fn, std::size_t residual_count,
                           std::vector<double> initial, const Options& opts = {});

}  // namespace spsqkd::fit
