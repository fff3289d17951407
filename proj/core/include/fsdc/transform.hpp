#pragma once

#include <span>

#include "fsdc/types.hpp"

namespace fsdc {

struct TukeyParams {
  double lambda = 0.5;
  // Added inside the log for exact zeros when lambda == 0.
  double log_epsilon = 1e-6;

  void validate() const;
};

/// Tukey's ladder of powers, component-wise: x^lambda for lambda != 0 and
/// log(x) for lambda == 0 (zeros shifted by log_epsilon first).
///
/// Throws domain error on a negative component and data error on a
/// non-finite one. lambda == 1 returns the input unchanged.
Vector tukey_transform(const Vector& x, const TukeyParams& params);

// Same transform applied to every entry of a matrix of row features.
RowMatrix tukey_transform(const RowMatrix& rows, const TukeyParams& params);

/// Adjusted Fisher-Pearson sample skewness, g1 * sqrt(n(n-1)) / (n-2).
/// Requires n >= 3 and nonzero variance (undefined_skewness otherwise).
double sample_skewness(std::span<const double> values);

}  // namespace fsdc
