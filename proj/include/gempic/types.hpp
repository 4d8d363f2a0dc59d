#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstddef>

namespace gempic {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Vector = Eigen::VectorXd;

using Index3 = std::array<int, 3>;

}  // namespace gempic
