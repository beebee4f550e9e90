#pragma once

#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "glpp/core.hpp"
#include "glpp/error.hpp"

namespace glpp {

/// On-disk embedding/distance container. The binary format is bit-exact:
/// magic "GLPP", u16 version, u64 n, u64 d (little-endian), then n*d
/// row-major f32. CSV carries ids and labels as well.
struct FeatureFile {
  Matrix features;         // converted to/from f32 on the binary path
  std::vector<int> ids;    // optional, CSV only
  std::vector<int> labels; // optional, CSV only
};

enum class FeatureFormat { binary, csv };

namespace detail {

constexpr char kMagic[4] = {'G', 'L', 'P', 'P'};
constexpr std::uint16_t kVersion = 1;

template <typename T>
void write_le(std::ostream& out, T value) {
  unsigned char bytes[sizeof(T)];
  for (std::size_t i = 0; i < sizeof(T); ++i)
    bytes[i] = static_cast<unsigned char>((static_cast<std::uint64_t>(value) >> (8 * i)) & 0xff);
  out.write(reinterpret_cast<const char*>(bytes), sizeof(T));
}

template <typename T>
bool read_le(std::istream& in, T& value) {
  unsigned char bytes[sizeof(T)];
  if (!in.read(reinterpret_cast<char*>(bytes), sizeof(T))) return false;
  std::uint64_t v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i)
    v |= static_cast<std::uint64_t>(bytes[i]) << (8 * i);
  value = static_cast<T>(v);
  return true;
}

inline void write_f32_le(std::ostream& out, float value) {
  std::uint32_t bits;
  std::memcpy(&bits, &value, sizeof(bits));
  write_le(out, bits);
}

inline bool read_f32_le(std::istream& in, float& value) {
  std::uint32_t bits;
  if (!read_le(in, bits)) return false;
  std::memcpy(&value, &bits, sizeof(value));
  return true;
}

}  // namespace detail

inline void save_features_binary(const std::string& path, const Matrix& features) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::IoFailure, "save_features: cannot open " + path);
  out.write(detail::kMagic, 4);
  detail::write_le(out, detail::kVersion);
  detail::write_le(out, static_cast<std::uint64_t>(features.rows()));
  detail::write_le(out, static_cast<std::uint64_t>(features.cols()));
  for (double v : features.data()) detail::write_f32_le(out, static_cast<float>(v));
  if (!out) fail(ErrorCode::IoFailure, "save_features: write failed for " + path);
}

inline Matrix load_features_binary(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::IoFailure, "load_features: cannot open " + path);
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, detail::kMagic, 4) != 0)
    fail(ErrorCode::BadMagic, "load_features: bad magic in " + path);
  std::uint16_t version = 0;
  std::uint64_t n = 0, d = 0;
  if (!detail::read_le(in, version) || version != detail::kVersion)
    fail(ErrorCode::BadMagic, "load_features: unsupported version in " + path);
  if (!detail::read_le(in, n) || !detail::read_le(in, d))
    fail(ErrorCode::TruncatedPayload, "load_features: truncated header in " + path);
  Matrix m(static_cast<std::size_t>(n), static_cast<std::size_t>(d));
  for (std::size_t i = 0; i < m.size(); ++i) {
    float v;
    if (!detail::read_f32_le(in, v))
      fail(ErrorCode::TruncatedPayload,
           "load_features: payload truncated at byte offset " +
               std::to_string(4 + 2 + 16 + i * 4) + " in " + path);
    m.data()[i] = static_cast<double>(v);
  }
  return m;
}

inline void save_features_csv(const std::string& path, const FeatureFile& file) {
  std::ofstream out(path);
  if (!out) fail(ErrorCode::IoFailure, "save_features: cannot open " + path);
  out << "id,label";
  for (std::size_t k = 0; k < file.features.cols(); ++k) out << ",f" << k;
  out << "\n";
  char buf[64];
  for (std::size_t i = 0; i < file.features.rows(); ++i) {
    const int id = i < file.ids.size() ? file.ids[i] : static_cast<int>(i);
    const int label = i < file.labels.size() ? file.labels[i] : 0;
    out << id << ',' << label;
    for (std::size_t k = 0; k < file.features.cols(); ++k) {
      // %.9g round-trips f32 exactly.
      std::snprintf(buf, sizeof(buf), "%.9g", static_cast<float>(file.features(i, k)));
      out << ',' << buf;
    }
    out << "\n";
  }
  if (!out) fail(ErrorCode::IoFailure, "save_features: write failed for " + path);
}

inline FeatureFile load_features_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::IoFailure, "load_features: cannot open " + path);
  std::string header;
  if (!std::getline(in, header))
    fail(ErrorCode::MalformedCsvRow, "load_features: missing header in " + path);
  std::size_t d = 0;
  {
    std::stringstream ss(header);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() < 2 || cells[0] != "id" || cells[1] != "label")
      fail(ErrorCode::MalformedCsvRow, "load_features: bad header in " + path);
    d = cells.size() - 2;
    for (std::size_t k = 0; k < d; ++k)
      if (cells[2 + k] != "f" + std::to_string(k))
        fail(ErrorCode::MalformedCsvRow, "load_features: bad header in " + path);
  }
  FeatureFile file;
  std::vector<double> values;
  std::string line;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() != d + 2)
      fail(ErrorCode::MalformedCsvRow,
           "load_features: line " + std::to_string(line_no) + " has " +
               std::to_string(cells.size()) + " cells, expected " + std::to_string(d + 2));
    try {
      file.ids.push_back(std::stoi(cells[0]));
      file.labels.push_back(std::stoi(cells[1]));
      for (std::size_t k = 0; k < d; ++k) values.push_back(std::stod(cells[2 + k]));
    } catch (const std::exception&) {
      fail(ErrorCode::MalformedCsvRow,
           "load_features: unparsable cell on line " + std::to_string(line_no));
    }
  }
  file.features = Matrix(file.ids.size(), d);
  file.features.data() = std::move(values);
  return file;
}

}  // namespace glpp
