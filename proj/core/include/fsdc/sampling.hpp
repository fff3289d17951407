#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "fsdc/calibration.hpp"
#include "fsdc/types.hpp"

namespace fsdc {

struct CholeskyFactor {
  Matrix lower;         // L with L * L^T = sigma + jitter * I
  double jitter = 0.0;  // the diagonal shift that made factorization succeed
};

/// Cholesky factor of a symmetric matrix, repaired by diagonal jitter.
///
/// Tries c = 0, then c = jitter, 10 * jitter, ... up to 1e6 * jitter, and
/// returns the first factorization that succeeds together with the c used.
/// Throws not_factorizable once the cap is passed.
CholeskyFactor cholesky_psd(const Matrix& sigma, double jitter);

// A Gaussian held by its Cholesky factor, ready for sampling and densities.
struct FactoredGaussian {
  Vector mean;
  CholeskyFactor factor;

  double log_density(const Vector& x) const;
};

FactoredGaussian factorize(const CalibratedDistribution& dist, double jitter);

struct SamplerConfig {
  std::size_t total_per_class = 750;
  std::uint64_t seed = 0;
  double jitter = 1e-6;

  void validate() const;
};

struct JitterRecord {
  std::uint32_t label;
  std::size_t distribution_index;
  double jitter;
};

struct SampledFeatures {
  RowMatrix features;
  std::vector<std::uint32_t> labels;
  std::vector<JitterRecord> jitter_log;  // one entry per distribution
};

/// Draws total_per_class features for every label, split as evenly as
/// possible over that label's distributions (the remainder goes to the
/// earliest ones). Distribution j of label y uses its own stream derived
/// from (seed, y, j), so output does not depend on evaluation order.
SampledFeatures sample_features(const CalibratedSet& dists, const SamplerConfig& cfg);

}  // namespace fsdc
