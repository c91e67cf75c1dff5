#include "kanreg/diffcore.hpp"

#include <cmath>
#include <stdexcept>

namespace kanreg {

double grad_check(const std::function<double(const Vec&)>& value,
                  const std::function<Vec(const Vec&)>& analytic_grad,
                  const Vec& params, double step) {
  if (!(step > 0.0)) throw std::invalid_argument("grad_check: step must be positive");
  const Vec analytic = analytic_grad(params);
  if (analytic.size() != params.size())
    throw std::invalid_argument("grad_check: gradient length mismatch");
  double worst = 0.0;
  Vec p = params;
  for (int i = 0; i < params.size(); ++i) {
    const double keep = p[i];
    p[i] = keep + step;
    const double hi = value(p);
    p[i] = keep - step;
    const double lo = value(p);
    p[i] = keep;
    const double cd = (hi - lo) / (2.0 * step);
    const double rel = std::abs(analytic[i] - cd) / (std::abs(cd) + 1e-12);
    worst = std::max(worst, rel);
  }
  return worst;
}

}  // namespace kanreg
