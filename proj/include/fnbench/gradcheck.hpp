#pragma once

#include "fnbench/matrix.hpp"

#include <functional>

namespace fnbench {

/// Central-difference check of an analytic gradient. f must be a pure,
/// deterministic scalar function of x. Returns the maximum over coordinates
/// of |fd - analytic| / max(1, |fd|, |analytic|).
/// Throws numeric_error if any probed value of f is non-finite.
double grad_check(const std::function<double(const Matrix&)>& f, const Matrix& x,
                  const Matrix& analytic, double step = 1e-5);

} // namespace fnbench
