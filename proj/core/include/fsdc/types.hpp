#pragma once

#include <cstdint>

#include <Eigen/Core>

namespace fsdc {

// All computation is double precision; storage is f32 (see features_io).
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using ClassId = std::uint32_t;

}  // namespace fsdc
