#pragma once

#include <functional>

namespace rppcert::detail {

/// Adaptive Gauss-Kronrod (7/15) on [a, b]. Subdivides until the summed
/// error estimate is below abs_tol or max_intervals is reached.
double integrate_gk15(const std::function<double(double)>& f, double a, double b, double abs_tol,
                      int max_intervals = 2000);

}  // namespace rppcert::detail
