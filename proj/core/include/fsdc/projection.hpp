#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fsdc/types.hpp"

namespace fsdc {

struct Projection2d {
  RowMatrix points;      // n x 2
  Vector eigenvalues;    // all d covariance eigenvalues, descending
  Matrix components;     // d x 2, unit columns
  Vector center;
};

/// Projects rows onto the top two principal axes of their covariance
/// (1/(n-1) normalization). Each axis is signed so that its
/// largest-magnitude loading is positive. Needs n >= 2, d >= 2 and nonzero
/// variance.
Projection2d project_2d(const RowMatrix& features);

// One row of the projection CSV.
struct ProjectedPoint {
  double x;
  double y;
  std::uint32_t label;
  std::string role;  // support, query or generated
};

std::string projection_to_csv(const std::vector<ProjectedPoint>& points);

}  // namespace fsdc
