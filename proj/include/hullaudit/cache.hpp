#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>

#include "hullaudit/ingest.hpp"
#include "hullaudit/schema_io.hpp"

namespace hullaudit {

/// Encoded matrix cache. Blob: "HAUD1", n and d as little-endian u64, then
/// n*d little-endian f64 in row-major order. The layout (schema and scaler
/// parameters) and row ids go to a JSON sidecar at <blob>.json.
inline constexpr std::array<char, 5> kCacheMagic{'H', 'A', 'U', 'D', '1'};

namespace detail {

template <class T>
void put_le(std::ostream& os, T v) {
  std::uint64_t bits;
  static_assert(sizeof(T) == 8);
  std::memcpy(&bits, &v, 8);
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(bits >> (8 * i));
  os.write(reinterpret_cast<const char*>(b), 8);
}

template <class T>
T get_le(std::istream& is) {
  unsigned char b[8];
  if (!is.read(reinterpret_cast<char*>(b), 8)) throw Error(ErrorCode::ParseError, "cache blob is truncated");
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  T v;
  std::memcpy(&v, &bits, 8);
  return v;
}

}  // namespace detail

inline json layout_to_json(const EncodingLayout& layout) {
  json params = json::array();
  for (const auto& nc : layout.numerics()) {
    params.push_back(json{{"feature", layout.schema().features[nc.feature].name}, {"offset", nc.offset}, {"scale", nc.scale}});
  }
  std::vector<std::string> labels;
  for (std::size_t c = 0; c < layout.width(); ++c) labels.push_back(layout.column_label(c));
  return json{{"schema", to_json(layout.schema())},
              {"scaler", to_string(layout.scaler())},
              {"scaler_parameters", params},
              {"columns", labels}};
}

inline std::shared_ptr<const EncodingLayout> layout_from_json(const json& j) {
  try {
    auto schema = schema_from_json(j.at("schema"));
    std::vector<std::pair<double, double>> params;
    for (const auto& p : j.at("scaler_parameters")) params.emplace_back(p.at("offset").get<double>(), p.at("scale").get<double>());
    return std::make_shared<const EncodingLayout>(
        layout_from_parameters(schema, parse_scaler(j.at("scaler").get<std::string>()), params));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("bad layout sidecar: ") + e.what());
  }
}

inline void write_cache(const std::string& path, const EncodedDataset& ds) {
  {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw Error(ErrorCode::IoError, "cannot write " + path);
    os.write(kCacheMagic.data(), kCacheMagic.size());
    detail::put_le<std::uint64_t>(os, ds.size());
    detail::put_le<std::uint64_t>(os, ds.width());
    for (Eigen::Index i = 0; i < ds.matrix.rows(); ++i) {
      for (Eigen::Index c = 0; c < ds.matrix.cols(); ++c) detail::put_le<double>(os, ds.matrix(i, c));
    }
    if (!os) throw Error(ErrorCode::IoError, "write failed for " + path);
  }
  json side = layout_to_json(*ds.layout);
  side["schema_version"] = "1";
  side["format"] = "HAUD1";
  side["n"] = ds.size();
  side["d"] = ds.width();
  side["row_ids"] = ds.row_ids;
  std::ofstream js(path + ".json");
  if (!js) throw Error(ErrorCode::IoError, "cannot write " + path + ".json");
  js << side.dump(1) << '\n';
}

inline EncodedDataset read_cache(const std::string& path) {
  std::ifstream js(path + ".json");
  if (!js) throw Error(ErrorCode::IoError, "cannot open " + path + ".json");
  json side;
  try {
    side = json::parse(js);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("bad cache sidecar: ") + e.what());
  }
  EncodedDataset ds;
  ds.layout = layout_from_json(side);
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error(ErrorCode::IoError, "cannot open " + path);
  std::array<char, 5> magic{};
  if (!is.read(magic.data(), magic.size()) || magic != kCacheMagic) throw Error(ErrorCode::ParseError, path + " is not a HAUD1 blob");
  auto n = detail::get_le<std::uint64_t>(is);
  auto d = detail::get_le<std::uint64_t>(is);
  if (d != ds.layout->width()) throw Error(ErrorCode::DimensionMismatch, "cache width does not match its layout");
  ds.matrix.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  for (Eigen::Index i = 0; i < ds.matrix.rows(); ++i) {
    for (Eigen::Index c = 0; c < ds.matrix.cols(); ++c) ds.matrix(i, c) = detail::get_le<double>(is);
  }
  ds.row_ids = side.value("row_ids", std::vector<std::size_t>{});
  if (ds.row_ids.size() != n) throw Error(ErrorCode::ParseError, "cache sidecar row_ids do not match n");
  ds.profile_index = build_profile_index(*ds.layout, ds.matrix, all_groups(*ds.layout));
  return ds;
}

}  // namespace hullaudit
