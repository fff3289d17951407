#include "fsdc/statistics.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>

#include "fsdc/error.hpp"

namespace fsdc {

namespace {

constexpr char kStatsMagic[4] = {'F', 'S', 'S', 'T'};
constexpr std::uint32_t kStatsVersion = 1;

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
}

void put_f64(std::string& out, double v) {
  const auto bits = std::bit_cast<std::uint64_t>(v);
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xffu));
}

std::uint64_t get_le(const std::string& bytes, std::size_t& pos, int width) {
  if (bytes.size() - pos < static_cast<std::size_t>(width)) {
    throw Error(ErrorKind::format, "truncated stats file");
  }
  std::uint64_t v = 0;
  for (int i = 0; i < width; ++i) {
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes[pos + i])) << (8 * i);
  }
  pos += width;
  return v;
}

double cosine(const Vector& a, const Vector& b, const char* what) {
  const double na = a.norm();
  const double nb = b.norm();
  if (!(na > 0) || !(nb > 0)) {
    throw Error(ErrorKind::undefined_similarity, std::string("zero-norm ") + what + " vector");
  }
  return std::clamp(a.dot(b) / (na * nb), -1.0, 1.0);
}

}  // namespace

Vector class_mean(const RowMatrix& features) {
  if (features.rows() == 0) throw Error(ErrorKind::empty_class, "cannot average zero features");
  return features.colwise().mean().transpose();
}

Matrix class_covariance(const RowMatrix& features, const Vector& mean) {
  const Eigen::Index n = features.rows();
  if (n < 2) {
    throw Error(ErrorKind::insufficient_samples,
                "covariance needs at least 2 samples, got " + std::to_string(n));
  }
  if (mean.size() != features.cols()) {
    throw Error(ErrorKind::dimension, "mean length does not match feature dimension");
  }
  const RowMatrix centered = features.rowwise() - mean.transpose();
  Matrix cov = (centered.transpose() * centered) / static_cast<double>(n - 1);
  cov.triangularView<Eigen::StrictlyUpper>() = cov.transpose();
  return cov;
}

ClassStatistics compute_class_statistics(ClassId id, const RowMatrix& features) {
  ClassStatistics s;
  s.class_id = id;
  s.mean = class_mean(features);
  s.covariance = class_covariance(features, s.mean);
  s.count = static_cast<std::size_t>(features.rows());
  return s;
}

BaseStatsTable::BaseStatsTable(std::size_t dim, std::vector<ClassStatistics> entries)
    : dim_(dim), entries_(std::move(entries)) {
  if (entries_.empty()) throw Error(ErrorKind::data, "base statistics table is empty");
  std::sort(entries_.begin(), entries_.end(),
            [](const auto& a, const auto& b) { return a.class_id < b.class_id; });
  means_.resize(static_cast<Eigen::Index>(entries_.size()), static_cast<Eigen::Index>(dim_));
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    const auto& e = entries_[i];
    if (i > 0 && entries_[i - 1].class_id == e.class_id) {
      throw Error(ErrorKind::data, "duplicate base class " + std::to_string(e.class_id));
    }
    if (static_cast<std::size_t>(e.mean.size()) != dim_ ||
        static_cast<std::size_t>(e.covariance.rows()) != dim_ ||
        static_cast<std::size_t>(e.covariance.cols()) != dim_) {
      throw Error(ErrorKind::dimension, "class " + std::to_string(e.class_id) +
                                            " statistics do not match dim " + std::to_string(dim_));
    }
    means_.row(static_cast<Eigen::Index>(i)) = e.mean.transpose();
  }
}

const ClassStatistics& BaseStatsTable::at(ClassId id) const {
  auto it = std::lower_bound(entries_.begin(), entries_.end(), id,
                             [](const ClassStatistics& s, ClassId v) { return s.class_id < v; });
  if (it == entries_.end() || it->class_id != id) {
    throw Error(ErrorKind::missing_class, "class " + std::to_string(id) + " not in base table");
  }
  return *it;
}

BaseStatsTable build_base_stats(const Dataset& ds, const SplitManifest& split,
                                const BaseStatsOptions& options) {
  split.validate();
  if (split.base_classes.empty()) throw Error(ErrorKind::spec, "split has no base classes");
  std::vector<ClassStatistics> entries;
  entries.reserve(split.base_classes.size());
  for (ClassId id : split.base_classes) {
    if (!ds.has_class(id)) {
      throw Error(ErrorKind::missing_class, "base class " + std::to_string(id) + " absent from dataset");
    }
    if (ds.class_size(id) < 2) {
      throw Error(ErrorKind::insufficient_samples,
                  "base class " + std::to_string(id) + " has " + std::to_string(ds.class_size(id)) +
                      " sample(s), needs at least 2");
    }
    RowMatrix rows = ds.class_rows(id);
    if (options.transform) rows = tukey_transform(rows, *options.transform);
    entries.push_back(compute_class_statistics(id, rows));
  }
  return BaseStatsTable(ds.dim(), std::move(entries));
}

ClassSimilarity class_similarity(const ClassStatistics& a, const ClassStatistics& b) {
  if (a.mean.size() != b.mean.size()) throw Error(ErrorKind::dimension, "similarity of different dims");
  return {cosine(a.mean, b.mean, "mean"),
          cosine(a.covariance.diagonal(), b.covariance.diagonal(), "variance")};
}

void save_base_stats(const BaseStatsTable& table, const std::filesystem::path& path) {
  const std::size_t d = table.dim();
  std::string out;
  out.reserve(16 + table.size() * (4 + 8 * d + 8 * d * d));
  out.append(kStatsMagic, 4);
  put_u32(out, kStatsVersion);
  put_u32(out, static_cast<std::uint32_t>(table.size()));
  put_u32(out, static_cast<std::uint32_t>(d));
  for (const auto& e : table.entries()) {
    put_u32(out, e.class_id);
    for (Eigen::Index i = 0; i < e.mean.size(); ++i) put_f64(out, e.mean(i));
    for (Eigen::Index r = 0; r < e.covariance.rows(); ++r) {
      for (Eigen::Index c = 0; c < e.covariance.cols(); ++c) put_f64(out, e.covariance(r, c));
    }
  }
  write_file_atomic(path, out);
}

BaseStatsTable load_base_stats(const std::filesystem::path& path) {
  const std::string bytes = read_file(path);
  try {
    if (bytes.size() < 4 || std::memcmp(bytes.data(), kStatsMagic, 4) != 0) {
      throw Error(ErrorKind::format, "bad magic bytes, expected \"FSST\"");
    }
    std::size_t pos = 4;
    const auto version = get_le(bytes, pos, 4);
    if (version != kStatsVersion) {
      throw Error(ErrorKind::format, "unsupported stats version " + std::to_string(version));
    }
    const auto count = get_le(bytes, pos, 4);
    const auto dim = static_cast<Eigen::Index>(get_le(bytes, pos, 4));
    if (dim == 0) throw Error(ErrorKind::format, "header declares dim 0");
    const std::size_t expected = count * (4 + 8 * static_cast<std::size_t>(dim) * (1 + dim));
    if (bytes.size() - pos != expected) throw Error(ErrorKind::format, "payload size does not match header");
    std::vector<ClassStatistics> entries(count);
    for (auto& e : entries) {
      e.class_id = static_cast<ClassId>(get_le(bytes, pos, 4));
      e.mean.resize(dim);
      e.covariance.resize(dim, dim);
      for (Eigen::Index i = 0; i < dim; ++i) e.mean(i) = std::bit_cast<double>(get_le(bytes, pos, 8));
      for (Eigen::Index r = 0; r < dim; ++r) {
        for (Eigen::Index c = 0; c < dim; ++c) e.covariance(r, c) = std::bit_cast<double>(get_le(bytes, pos, 8));
      }
    }
    return BaseStatsTable(static_cast<std::size_t>(dim), std::move(entries));
  } catch (const Error& e) {
    rethrow_with_context(e, path.string());
  }
}

}  // namespace fsdc
