#pragma once

#include <functional>

namespace gle {

/// Adaptive Gauss-Kronrod (61 point) integral of f over [a, b].
/// Bisection continues until the error estimate is below abs_tol or the
/// depth limit is hit. Infinite bounds are allowed.
double integrate(const std::function<double(double)>& f, double a, double b,
                 double abs_tol = 1e-10, double* error_estimate = nullptr);

}  // namespace gle
