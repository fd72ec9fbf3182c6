#pragma once

#include <Eigen/Core>

#include <vector>

namespace aftexp {

using Index = Eigen::Index;

template <class Scalar>
using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <class Scalar>
using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

using IndexSet = std::vector<Index>;

} // namespace aftexp
