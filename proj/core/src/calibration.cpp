#include "fsdc/calibration.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "fsdc/error.hpp"
#include "fsdc/rng.hpp"

namespace fsdc {

void CalibrationParams::validate(std::size_t num_base_classes) const {
  if (k == 0) throw Error(ErrorKind::spec, "calibration k must be positive");
  if (k > num_base_classes) {
    throw Error(ErrorKind::spec, "calibration k=" + std::to_string(k) + " exceeds " +
                                     std::to_string(num_base_classes) + " base classes");
  }
  if (!(alpha >= 0) || !std::isfinite(alpha)) throw Error(ErrorKind::spec, "alpha must be >= 0");
}

std::vector<ClassId> nearest_base_classes(const Vector& x, const BaseStatsTable& table,
                                          std::size_t k) {
  if (static_cast<std::size_t>(x.size()) != table.dim()) {
    throw Error(ErrorKind::dimension, "feature has dim " + std::to_string(x.size()) +
                                          ", base statistics have dim " + std::to_string(table.dim()));
  }
  if (k == 0 || k > table.size()) {
    throw Error(ErrorKind::spec, "k=" + std::to_string(k) + " outside [1, " +
                                     std::to_string(table.size()) + "]");
  }
  const Vector dist = (table.means().rowwise() - x.transpose()).rowwise().squaredNorm();
  std::vector<std::size_t> order(table.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  // Entries are sorted by class id, so position order is class-id order.
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(),
                    [&](std::size_t a, std::size_t b) {
                      const double da = dist(static_cast<Eigen::Index>(a));
                      const double db = dist(static_cast<Eigen::Index>(b));
                      return da < db || (da == db && a < b);
                    });
  std::vector<ClassId> ids(k);
  for (std::size_t i = 0; i < k; ++i) ids[i] = table.entry(order[i]).class_id;
  return ids;
}

CalibratedDistribution calibrate(const Vector& x, const BaseStatsTable& table,
                                 const CalibrationParams& params, std::size_t source_support_index) {
  params.validate(table.size());
  CalibratedDistribution out;
  out.source_support_index = source_support_index;
  out.neighbor_class_ids = nearest_base_classes(x, table, params.k);

  const Eigen::Index d = x.size();
  Vector mean_sum = Vector::Zero(d);
  Matrix cov_sum = Matrix::Zero(d, d);
  for (ClassId id : out.neighbor_class_ids) {
    const auto& s = table.at(id);
    mean_sum += s.mean;
    cov_sum += s.covariance;
  }
  const double k = static_cast<double>(params.k);
  out.mean = params.use_novel_feature ? Vector((mean_sum + x) / (k + 1.0)) : Vector(mean_sum / k);
  out.covariance = cov_sum / k;
  if (params.alpha_mode == AlphaMode::elementwise) {
    out.covariance.array() += params.alpha;
  } else {
    out.covariance.diagonal().array() += params.alpha;
  }
  return out;
}

CalibratedSet calibrate_support_set(const RowMatrix& support, std::span<const std::uint32_t> labels,
                                    const BaseStatsTable& table, const CalibrationParams& params) {
  if (support.rows() == 0) throw Error(ErrorKind::precondition, "empty support set");
  if (static_cast<std::size_t>(support.rows()) != labels.size()) {
    throw Error(ErrorKind::dimension, "support rows and labels differ in length");
  }
  CalibratedSet out;
  for (Eigen::Index i = 0; i < support.rows(); ++i) {
    const Vector x = support.row(i).transpose();
    out[labels[static_cast<std::size_t>(i)]].push_back(
        calibrate(x, table, params, static_cast<std::size_t>(i)));
  }
  return out;
}

BaseFeaturePool::BaseFeaturePool(const Dataset& ds, const SplitManifest& split,
                                 const std::optional<TukeyParams>& transform) {
  for (ClassId id : split.base_classes) {
    RowMatrix rows = ds.class_rows(id);
    if (transform) rows = tukey_transform(rows, *transform);
    by_class_.emplace(id, std::move(rows));
  }
}

const RowMatrix& BaseFeaturePool::features(ClassId id) const {
  auto it = by_class_.find(id);
  if (it == by_class_.end()) {
    throw Error(ErrorKind::missing_class, "class " + std::to_string(id) + " not in base feature pool");
  }
  return it->second;
}

RowMatrix retrieve_nearest_class_features(const Vector& x, const BaseFeaturePool& pool,
                                          const BaseStatsTable& table, std::size_t m,
                                          std::uint64_t seed) {
  if (m == 0) throw Error(ErrorKind::spec, "retrieval count must be positive");
  const ClassId nearest = nearest_base_classes(x, table, 1).front();
  const RowMatrix& rows = pool.features(nearest);
  const auto n = static_cast<std::size_t>(rows.rows());
  if (n < m) {
    throw Error(ErrorKind::insufficient_samples, "nearest base class " + std::to_string(nearest) +
                                                     " has " + std::to_string(n) + " samples, " +
                                                     std::to_string(m) + " requested");
  }
  // Partial Fisher-Yates: the first m slots become a uniform sample.
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  Rng rng(seed);
  for (std::size_t i = 0; i < m; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.below(n - i));
    std::swap(idx[i], idx[j]);
  }
  RowMatrix out(static_cast<Eigen::Index>(m), rows.cols());
  for (std::size_t i = 0; i < m; ++i) out.row(static_cast<Eigen::Index>(i)) = rows.row(static_cast<Eigen::Index>(idx[i]));
  return out;
}

}  // namespace fsdc
