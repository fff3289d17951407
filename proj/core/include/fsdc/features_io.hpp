#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "fsdc/types.hpp"

namespace fsdc {

struct FeatureVector {
  std::vector<float> values;
  ClassId class_id = 0;
};

/// A labeled feature collection with uniform dimension.
///
/// Construction validates every record (length == dim, finite values) and
/// rejects an empty record list, so a Dataset that exists is always valid.
/// `nonneg()` is true iff every stored value is >= 0.
class Dataset {
 public:
  Dataset(std::size_t dim, std::vector<FeatureVector> records);

  std::size_t dim() const noexcept { return dim_; }
  std::size_t size() const noexcept { return records_.size(); }
  bool nonneg() const noexcept { return nonneg_; }
  const std::vector<FeatureVector>& records() const noexcept { return records_; }

  // Distinct class ids in ascending order.
  std::vector<ClassId> classes() const;
  bool has_class(ClassId id) const { return index_.count(id) != 0; }
  // Record indices of one class, in file order. Throws missing_class.
  const std::vector<std::size_t>& class_indices(ClassId id) const;
  std::size_t class_size(ClassId id) const { return class_indices(id).size(); }

  // Row i of the result is record `indices[i]` widened to double.
  RowMatrix rows(const std::vector<std::size_t>& indices) const;
  RowMatrix class_rows(ClassId id) const { return rows(class_indices(id)); }
  Vector row(std::size_t index) const;

 private:
  std::size_t dim_;
  std::vector<FeatureVector> records_;
  bool nonneg_ = true;
  std::map<ClassId, std::vector<std::size_t>> index_;
};

struct SplitManifest {
  std::set<ClassId> base_classes;
  std::set<ClassId> val_classes;
  std::set<ClassId> novel_classes;

  // Throws spec error unless the three sets are pairwise disjoint.
  void validate() const;
};

enum class FeatureFormat { binary, csv };

// ".csv" (case-insensitive) selects csv; everything else is binary.
FeatureFormat format_from_path(const std::filesystem::path& path);

Dataset load_dataset(const std::filesystem::path& path, FeatureFormat format);
void save_dataset(const Dataset& ds, const std::filesystem::path& path, FeatureFormat format);

// Size in bytes of the binary container holding `records` vectors of `dim`.
std::size_t binary_dataset_size(std::size_t records, std::size_t dim) noexcept;

nlohmann::json split_to_json(const SplitManifest& split);
SplitManifest split_from_json(const nlohmann::json& j);
SplitManifest load_split(const std::filesystem::path& path);
void save_split(const SplitManifest& split, const std::filesystem::path& path);

// Writes `contents` to a sibling temporary file and renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, const std::string& contents);
std::string read_file(const std::filesystem::path& path);

}  // namespace fsdc
