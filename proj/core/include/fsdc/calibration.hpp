#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include "fsdc/features_io.hpp"
#include "fsdc/statistics.hpp"
#include "fsdc/types.hpp"

namespace fsdc {

// How the dispersion constant enters the calibrated covariance.
enum class AlphaMode {
  elementwise,  // alpha added to every entry of the matrix
  diagonal,     // alpha * I
};

struct CalibrationParams {
  std::size_t k = 2;
  double alpha = 0.21;
  bool use_novel_feature = true;
  AlphaMode alpha_mode = AlphaMode::elementwise;

  void validate(std::size_t num_base_classes) const;
};

struct CalibratedDistribution {
  Vector mean;
  Matrix covariance;
  std::size_t source_support_index = 0;
  std::vector<ClassId> neighbor_class_ids;  // nearest first
};

/// The k base classes whose means are closest (squared Euclidean) to `x`,
/// nearest first. Equal distances are ordered by ascending class id.
std::vector<ClassId> nearest_base_classes(const Vector& x, const BaseStatsTable& table,
                                          std::size_t k);

/// Transfers statistics of the k nearest base classes to one support feature:
///   mean' = (sum of neighbor means + x) / (k + 1)
///   cov'  = (sum of neighbor covariances) / k + alpha
/// Without the novel feature the mean is the plain neighbor average.
CalibratedDistribution calibrate(const Vector& x, const BaseStatsTable& table,
                                 const CalibrationParams& params,
                                 std::size_t source_support_index = 0);

using CalibratedSet = std::map<std::uint32_t, std::vector<CalibratedDistribution>>;

// One calibrated distribution per support row, grouped by label. `support`
// rows are already transformed.
CalibratedSet calibrate_support_set(const RowMatrix& support, std::span<const std::uint32_t> labels,
                                    const BaseStatsTable& table, const CalibrationParams& params);

/// Base-class features in the same space as a BaseStatsTable, for the
/// nearest-class retrieval baseline.
class BaseFeaturePool {
 public:
  BaseFeaturePool(const Dataset& ds, const SplitManifest& split,
                  const std::optional<TukeyParams>& transform = std::nullopt);

  const RowMatrix& features(ClassId id) const;

 private:
  std::map<ClassId, RowMatrix> by_class_;
};

// `m` features drawn uniformly without replacement from the single base class
// nearest to `x`. Throws insufficient_samples when that class is too small.
RowMatrix retrieve_nearest_class_features(const Vector& x, const BaseFeaturePool& pool,
                                          const BaseStatsTable& table, std::size_t m,
                                          std::uint64_t seed);

}  // namespace fsdc
