#pragma once

#include <Eigen/Dense>

namespace kanreg {

template <class S>
using DenseMatrix = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;

using Mat = DenseMatrix<double>;
using Vec = Eigen::VectorXd;

// Chebyshev inputs are clamped to [-1 + kUnitClamp, 1 - kUnitClamp] before
// arccos; the arccos derivative is singular at the endpoints.
inline constexpr double kUnitClamp = 1e-7;

}  // namespace kanreg
