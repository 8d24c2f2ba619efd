#pragma once

#include <Eigen/Core>

namespace vulaste {

// Row-major so that one token's vector is a contiguous row.
template <typename T>
using Matrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename T>
using RowVector = Eigen::Matrix<T, 1, Eigen::Dynamic>;

}  // namespace vulaste
