#pragma once

#include <Eigen/Dense>

namespace langevin {

// Spatial dimension is capped at 3 so that every per-particle vector and
// matrix lives on the stack.
inline constexpr int kMaxDim = 3;

using Vec = Eigen::Matrix<double, Eigen::Dynamic, 1, Eigen::ColMajor, kMaxDim, 1>;
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::ColMajor,
                          kMaxDim, kMaxDim>;

}  // namespace langevin
