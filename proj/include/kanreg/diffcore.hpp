#pragma once

#include <functional>

#include "kanreg/types.hpp"

namespace kanreg {

// Max over parameters of |analytic - central difference| / (|cd| + 1e-12),
// central differences taken one parameter at a time with the given step.
double grad_check(const std::function<double(const Vec&)>& value,
                  const std::function<Vec(const Vec&)>& analytic_grad,
                  const Vec& params, double step);

}  // namespace kanreg
