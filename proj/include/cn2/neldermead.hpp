#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace cn2 {

struct NelderMeadOptions {
    std::size_t max_iterations = 6000;
    double f_tol = 1e-12;           // simplex value spread, relative to 1+|best|
    double x_tol = 1e-9;            // max coordinate spread of the simplex
    double initial_step = 0.5;
};

struct NelderMeadResult {
    std::vector<double> x;
    double fx = 0.0;
    std::size_t iterations = 0;
    bool converged = false;
};

/// Downhill simplex minimizer with box constraints enforced by projection.
/// Deterministic: no internal randomness; the simplex is seeded from x0
/// plus per-coordinate steps.
NelderMeadResult nelder_mead(const std::function<double(std::span<const double>)>& f,
                             std::span<const double> x0,
                             std::span<const double> lower,
                             std::span<const double> upper,
                             const NelderMeadOptions& options = {});

} // namespace cn2
