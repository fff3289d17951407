#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <vector>

#include "fsdc/features_io.hpp"
#include "fsdc/transform.hpp"
#include "fsdc/types.hpp"

namespace fsdc {

struct ClassStatistics {
  ClassId class_id = 0;
  Vector mean;
  Matrix covariance;  // exactly symmetric
  // Samples the statistics were computed from; 0 when read back from a
  // stats file, which does not carry counts.
  std::size_t count = 0;
};

// Per-dimension arithmetic mean of the rows. Throws empty_class on no rows.
Vector class_mean(const RowMatrix& features);

// Unbiased covariance, 1/(n-1) normalization, about `mean`. Needs n >= 2.
Matrix class_covariance(const RowMatrix& features, const Vector& mean);

ClassStatistics compute_class_statistics(ClassId id, const RowMatrix& features);

/// Mean and covariance of every base class, ordered by class id.
class BaseStatsTable {
 public:
  BaseStatsTable(std::size_t dim, std::vector<ClassStatistics> entries);

  std::size_t dim() const noexcept { return dim_; }
  std::size_t size() const noexcept { return entries_.size(); }
  const std::vector<ClassStatistics>& entries() const noexcept { return entries_; }
  const ClassStatistics& entry(std::size_t position) const { return entries_.at(position); }
  const ClassStatistics& at(ClassId id) const;
  // Row i holds the mean of entries()[i].
  const RowMatrix& means() const noexcept { return means_; }

 private:
  std::size_t dim_;
  std::vector<ClassStatistics> entries_;
  RowMatrix means_;
};

struct BaseStatsOptions {
  // When set, base features are transformed before the statistics are taken.
  std::optional<TukeyParams> transform;
};

BaseStatsTable build_base_stats(const Dataset& ds, const SplitManifest& split,
                                const BaseStatsOptions& options = {});

struct ClassSimilarity {
  double mean_sim;
  double var_sim;
};

// Cosine similarity of the means and of the covariance diagonals.
ClassSimilarity class_similarity(const ClassStatistics& a, const ClassStatistics& b);

void save_base_stats(const BaseStatsTable& table, const std::filesystem::path& path);
BaseStatsTable load_base_stats(const std::filesystem::path& path);

}  // namespace fsdc
