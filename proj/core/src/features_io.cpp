#include "fsdc/features_io.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <optional>
#include <sstream>
#include <system_error>
#include <unistd.h>

#include "fsdc/error.hpp"

namespace fsdc {

namespace {

constexpr std::array<char, 4> kDatasetMagic = {'F', 'S', 'D', 'C'};
constexpr std::uint32_t kDatasetVersion = 1;
constexpr std::size_t kDatasetHeaderBytes = 16;

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
}

class ByteReader {
 public:
  explicit ByteReader(const std::string& bytes) : bytes_(bytes) {}

  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) {
      v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    }
    pos_ += 4;
    return v;
  }

  float f32() { return std::bit_cast<float>(u32()); }

  void magic(const std::array<char, 4>& expected) {
    need(4);
    if (std::memcmp(bytes_.data() + pos_, expected.data(), 4) != 0) {
      throw Error(ErrorKind::format, "bad magic bytes, expected \"" +
                                         std::string(expected.data(), 4) + "\"");
    }
    pos_ += 4;
  }

  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  void need(std::size_t n) const {
    if (remaining() < n) throw Error(ErrorKind::format, "truncated file");
  }

  const std::string& bytes_;
  std::size_t pos_ = 0;
};

Dataset load_binary(const std::string& bytes) {
  ByteReader in(bytes);
  in.magic(kDatasetMagic);
  const std::uint32_t version = in.u32();
  if (version != kDatasetVersion) {
    throw Error(ErrorKind::format, "unsupported dataset version " + std::to_string(version));
  }
  const std::uint32_t count = in.u32();
  const std::uint32_t dim = in.u32();
  if (dim == 0) throw Error(ErrorKind::format, "header declares dim 0");
  const std::size_t expected = static_cast<std::size_t>(count) * (4 + 4 * static_cast<std::size_t>(dim));
  if (in.remaining() != expected) {
    throw Error(ErrorKind::format, "payload is " + std::to_string(in.remaining()) +
                                       " bytes, header implies " + std::to_string(expected));
  }
  std::vector<FeatureVector> records(count);
  for (auto& r : records) {
    r.class_id = in.u32();
    r.values.resize(dim);
    for (auto& v : r.values) v = in.f32();
  }
  return Dataset(dim, std::move(records));
}

std::string encode_binary(const Dataset& ds) {
  std::string out;
  out.reserve(binary_dataset_size(ds.size(), ds.dim()));
  out.append(kDatasetMagic.data(), 4);
  put_u32(out, kDatasetVersion);
  put_u32(out, static_cast<std::uint32_t>(ds.size()));
  put_u32(out, static_cast<std::uint32_t>(ds.dim()));
  for (const auto& r : ds.records()) {
    put_u32(out, r.class_id);
    for (float v : r.values) put_u32(out, std::bit_cast<std::uint32_t>(v));
  }
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

Dataset load_csv(const std::string& text) {
  std::vector<FeatureVector> records;
  std::size_t dim = 0;
  std::size_t line_no = 0;
  std::istringstream lines(text);
  std::string line;
  while (std::getline(lines, line)) {
    ++line_no;
    std::string_view rest = trim(line);
    if (rest.empty()) continue;
    const std::string where = "line " + std::to_string(line_no);

    std::vector<std::string_view> cells;
    for (;;) {
      const auto comma = rest.find(',');
      cells.push_back(trim(rest.substr(0, comma)));
      if (comma == std::string_view::npos) break;
      rest.remove_prefix(comma + 1);
    }
    if (cells.size() < 2) throw Error(ErrorKind::format, where + ": expected class id and values");

    FeatureVector r;
    const auto id_cell = cells.front();
    auto [id_end, id_ec] = std::from_chars(id_cell.data(), id_cell.data() + id_cell.size(), r.class_id);
    if (id_ec != std::errc{} || id_end != id_cell.data() + id_cell.size()) {
      throw Error(ErrorKind::format, where + ": bad class id \"" + std::string(id_cell) + "\"");
    }
    for (std::size_t c = 1; c < cells.size(); ++c) {
      double v = 0;
      const auto cell = cells[c];
      auto [end, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
      if (ec != std::errc{} || end != cell.data() + cell.size()) {
        throw Error(ErrorKind::format, where + ": bad value \"" + std::string(cell) + "\"");
      }
      if (!std::isfinite(v) || !std::isfinite(static_cast<float>(v))) {
        throw Error(ErrorKind::data, where + ": non-finite value");
      }
      r.values.push_back(static_cast<float>(v));
    }
    if (dim == 0) {
      dim = r.values.size();
    } else if (r.values.size() != dim) {
      throw Error(ErrorKind::dimension, where + ": " + std::to_string(r.values.size()) +
                                            " values, expected " + std::to_string(dim));
    }
    records.push_back(std::move(r));
  }
  if (records.empty()) throw Error(ErrorKind::data, "csv contains no records");
  return Dataset(dim, std::move(records));
}

std::string encode_csv(const Dataset& ds) {
  std::string out;
  char buf[64];
  for (const auto& r : ds.records()) {
    out += std::to_string(r.class_id);
    for (float v : r.values) {
      // Shortest representation that parses back to the same float.
      auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
      out.push_back(',');
      out.append(buf, end);
    }
    out.push_back('\n');
  }
  return out;
}

}  // namespace

Dataset::Dataset(std::size_t dim, std::vector<FeatureVector> records)
    : dim_(dim), records_(std::move(records)) {
  if (dim_ == 0) throw Error(ErrorKind::dimension, "dataset dimension must be positive");
  if (records_.empty()) throw Error(ErrorKind::data, "dataset has zero records");
  for (std::size_t i = 0; i < records_.size(); ++i) {
    const auto& r = records_[i];
    if (r.values.size() != dim_) {
      throw Error(ErrorKind::dimension, "record " + std::to_string(i) + " has length " +
                                            std::to_string(r.values.size()) + ", expected " +
                                            std::to_string(dim_));
    }
    for (float v : r.values) {
      if (!std::isfinite(v)) {
        throw Error(ErrorKind::data, "record " + std::to_string(i) + " has a non-finite value");
      }
      if (v < 0) nonneg_ = false;
    }
    index_[r.class_id].push_back(i);
  }
}

std::vector<ClassId> Dataset::classes() const {
  std::vector<ClassId> ids;
  ids.reserve(index_.size());
  for (const auto& [id, _] : index_) ids.push_back(id);
  return ids;
}

const std::vector<std::size_t>& Dataset::class_indices(ClassId id) const {
  auto it = index_.find(id);
  if (it == index_.end()) {
    throw Error(ErrorKind::missing_class, "class " + std::to_string(id) + " not present in dataset");
  }
  return it->second;
}

RowMatrix Dataset::rows(const std::vector<std::size_t>& indices) const {
  RowMatrix out(static_cast<Eigen::Index>(indices.size()), static_cast<Eigen::Index>(dim_));
  for (std::size_t i = 0; i < indices.size(); ++i) {
    const auto& vals = records_.at(indices[i]).values;
    for (std::size_t j = 0; j < dim_; ++j) out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = vals[j];
  }
  return out;
}

Vector Dataset::row(std::size_t index) const {
  const auto& vals = records_.at(index).values;
  Vector v(static_cast<Eigen::Index>(dim_));
  for (std::size_t j = 0; j < dim_; ++j) v(static_cast<Eigen::Index>(j)) = vals[j];
  return v;
}

void SplitManifest::validate() const {
  auto overlap = [](const std::set<ClassId>& a, const std::set<ClassId>& b) -> std::optional<ClassId> {
    for (ClassId id : a) {
      if (b.count(id)) return id;
    }
    return std::nullopt;
  };
  const std::pair<const char*, std::optional<ClassId>> checks[] = {
      {"base/val", overlap(base_classes, val_classes)},
      {"base/novel", overlap(base_classes, novel_classes)},
      {"val/novel", overlap(val_classes, novel_classes)},
  };
  for (const auto& [name, hit] : checks) {
    if (hit) {
      throw Error(ErrorKind::spec, std::string("split sets ") + name + " share class " +
                                       std::to_string(*hit));
    }
  }
}

FeatureFormat format_from_path(const std::filesystem::path& path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext == ".csv" ? FeatureFormat::csv : FeatureFormat::binary;
}

Dataset load_dataset(const std::filesystem::path& path, FeatureFormat format) {
  const std::string bytes = read_file(path);
  try {
    return format == FeatureFormat::binary ? load_binary(bytes) : load_csv(bytes);
  } catch (const Error& e) {
    rethrow_with_context(e, path.string());
  }
}

void save_dataset(const Dataset& ds, const std::filesystem::path& path, FeatureFormat format) {
  write_file_atomic(path, format == FeatureFormat::binary ? encode_binary(ds) : encode_csv(ds));
}

std::size_t binary_dataset_size(std::size_t records, std::size_t dim) noexcept {
  return kDatasetHeaderBytes + records * (4 + 4 * dim);
}

nlohmann::json split_to_json(const SplitManifest& split) {
  return nlohmann::json{{"base", split.base_classes},
                        {"val", split.val_classes},
                        {"novel", split.novel_classes}};
}

SplitManifest split_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw Error(ErrorKind::format, "split manifest must be a JSON object");
  SplitManifest split;
  auto read_set = [&](const char* key, std::set<ClassId>& out) {
    if (!j.contains(key)) return;
    const auto& arr = j.at(key);
    if (!arr.is_array()) throw Error(ErrorKind::format, std::string("split key \"") + key + "\" must be an array");
    for (const auto& v : arr) {
      if (!v.is_number_unsigned()) {
        throw Error(ErrorKind::format, std::string("split key \"") + key + "\" holds a non class id");
      }
      out.insert(v.get<ClassId>());
    }
  };
  for (const auto& [key, _] : j.items()) {
    if (key != "base" && key != "val" && key != "novel") {
      throw Error(ErrorKind::format, "unknown split key \"" + key + "\"");
    }
  }
  read_set("base", split.base_classes);
  read_set("val", split.val_classes);
  read_set("novel", split.novel_classes);
  split.validate();
  return split;
}

SplitManifest load_split(const std::filesystem::path& path) {
  try {
    return split_from_json(nlohmann::json::parse(read_file(path)));
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorKind::format, path.string() + ": " + e.what());
  } catch (const Error& e) {
    rethrow_with_context(e, path.string());
  }
}

void save_split(const SplitManifest& split, const std::filesystem::path& path) {
  write_file_atomic(path, split_to_json(split).dump(2) + "\n");
}

void write_file_atomic(const std::filesystem::path& path, const std::string& contents) {
  std::filesystem::path tmp = path;
  tmp += ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::io, "cannot open " + tmp.string() + " for writing");
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    out.flush();
    if (!out) {
      std::error_code ignored;
      std::filesystem::remove(tmp, ignored);
      throw Error(ErrorKind::io, "write failed for " + tmp.string());
    }
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw Error(ErrorKind::io, "cannot rename into " + path.string());
  }
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::io, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace fsdc
