#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "hullaudit/csv.hpp"
#include "hullaudit/schema.hpp"

namespace hullaudit {

enum class DatasetRole { Train, Test };

/// CSV dialect and dataset-specific quirks.
struct LoaderOptions {
  std::string preset = "none";
  bool header = true;
  /// Column names for headerless files.
  std::vector<std::string> columns;
  std::string na_token = "?";
  char delimiter = ',';
  bool trim = false;
  std::string skip_prefix;
  /// Stripped from the end of every field (the Adult test file ends labels with ".").
  std::string strip_suffix;
  /// Column holding stable row ids; empty means the 0-based data row index.
  std::string id_column;
  /// Numeric values treated as missing (FICO -7/-8/-9 when enabled).
  std::vector<double> special_codes;
  bool special_codes_as_missing = false;

  /// Built-in presets. "adult": raw UCI files (no header, ", " separators,
  /// "|" comment line and trailing "." labels in the test file). "fico":
  /// HELOC csv split by tools/fetch_datasets.sh.
  static LoaderOptions from_preset(const std::string& name) {
    LoaderOptions opt;
    opt.preset = name;
    if (name == "adult") {
      opt.header = false;
      opt.columns = {"age", "workclass", "fnlwgt", "education", "education-num", "marital-status",
                     "occupation", "relationship", "race", "sex", "capital-gain", "capital-loss",
                     "hours-per-week", "native-country", "income"};
      opt.trim = true;
      opt.skip_prefix = "|";
      opt.strip_suffix = ".";
    } else if (name == "fico") {
      opt.id_column = "row";
      opt.special_codes = {-7, -8, -9};
    } else if (name != "none") {
      throw Error(ErrorCode::ConfigError, "unknown loader preset '" + name + "'");
    }
    return opt;
  }
};

struct IngestStats {
  std::size_t rows_read = 0;
  std::size_t rows_kept = 0;
  std::size_t rows_dropped_missing = 0;
  std::size_t rows_unknown_level = 0;
  /// Training rows dropped for violating an enforced bound.
  std::size_t rows_out_of_bounds = 0;
  /// Test rows outside an enforced bound (kept; they are extrapolation).
  std::size_t rows_flagged_out_of_bounds = 0;
  /// Missing values resolved to the missing level (AsLevel).
  std::size_t values_as_level = 0;
  std::size_t special_code_values = 0;
  bool special_codes_as_missing = false;
  std::string na_token;
  std::string preset;
};

/// Level index per categorical group in layout order; -1 marks an empty
/// optional group, kWildcard a group excluded from the key.
using CategoricalProfile = std::vector<int>;
inline constexpr int kWildcard = -2;

/// Rows sharing each categorical profile, keyed on a subset of groups.
struct ProfileIndex {
  std::vector<std::size_t> groups;
  std::map<CategoricalProfile, std::vector<std::size_t>> rows;

  const std::vector<std::size_t>* find(const CategoricalProfile& key) const {
    auto it = rows.find(key);
    return it == rows.end() ? nullptr : &it->second;
  }
};

struct EncodedDataset {
  RowMatrix matrix;
  std::vector<std::size_t> row_ids;
  std::shared_ptr<const EncodingLayout> layout;
  /// Keyed on every categorical group.
  ProfileIndex profile_index;

  std::size_t size() const { return static_cast<std::size_t>(matrix.rows()); }
  std::size_t width() const { return static_cast<std::size_t>(matrix.cols()); }
};

/// Level index per group of an encoded point; NonPureProfile when a block
/// of one of `groups` (all groups when empty) is fractional.
inline CategoricalProfile profile_of(const EncodingLayout& layout, std::span<const double> point,
                                     std::span<const std::size_t> groups = {}) {
  if (point.size() != layout.width()) throw Error(ErrorCode::DimensionMismatch, "point width mismatch");
  const auto& spans = layout.groups();
  CategoricalProfile profile(spans.size(), kWildcard);
  auto fill = [&](std::size_t g) {
    auto level = EncodingLayout::pure_level(point.subspan(spans[g].begin, spans[g].size), 1e-9);
    if (!level) {
      throw Error(ErrorCode::NonPureProfile,
                  "fractional block for '" + layout.schema().features[spans[g].feature].name + "'");
    }
    profile[g] = static_cast<int>(*level);
  };
  if (groups.empty()) {
    for (std::size_t g = 0; g < spans.size(); ++g) fill(g);
  } else {
    for (std::size_t g : groups) fill(g);
  }
  return profile;
}

inline ProfileIndex build_profile_index(const EncodingLayout& layout, const RowMatrix& matrix,
                                        std::vector<std::size_t> groups) {
  ProfileIndex index;
  index.groups = std::move(groups);
  for (Eigen::Index i = 0; i < matrix.rows(); ++i) {
    std::span<const double> row(matrix.row(i).data(), static_cast<std::size_t>(matrix.cols()));
    index.rows[profile_of(layout, row, index.groups)].push_back(static_cast<std::size_t>(i));
  }
  return index;
}

inline std::vector<std::size_t> all_groups(const EncodingLayout& layout) {
  std::vector<std::size_t> g(layout.groups().size());
  for (std::size_t i = 0; i < g.size(); ++i) g[i] = i;
  return g;
}

struct RawTable {
  std::vector<Row> rows;
  std::vector<std::size_t> row_ids;
  std::vector<std::size_t> lines;
};

namespace detail {

inline std::string strip(std::string s, const std::string& suffix) {
  if (!suffix.empty() && s.size() >= suffix.size() &&
      s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0) {
    s.erase(s.size() - suffix.size());
  }
  return s;
}

}  // namespace detail

/// Parses CSV text into schema-aligned rows, applying the NA token, special
/// codes and missing policies. Rows that drop are counted in `stats`.
inline RawTable read_rows(const FeatureSchema& schema, const DomainSpec* domain, const csv::Table& table,
                          const LoaderOptions& opt, DatasetRole role, IngestStats& stats) {
  std::vector<std::size_t> col_of(schema.features.size());
  for (std::size_t f = 0; f < schema.features.size(); ++f) {
    auto it = std::find(table.header.begin(), table.header.end(), schema.features[f].name);
    if (it == table.header.end()) {
      throw Error(ErrorCode::SchemaMismatch, "column '" + schema.features[f].name + "' not found in CSV header");
    }
    col_of[f] = static_cast<std::size_t>(it - table.header.begin());
  }
  std::optional<std::size_t> id_col;
  if (!opt.id_column.empty()) {
    auto it = std::find(table.header.begin(), table.header.end(), opt.id_column);
    if (it == table.header.end()) {
      throw Error(ErrorCode::SchemaMismatch, "id column '" + opt.id_column + "' not found in CSV header");
    }
    id_col = static_cast<std::size_t>(it - table.header.begin());
  }

  stats.na_token = opt.na_token;
  stats.preset = opt.preset;
  stats.special_codes_as_missing = opt.special_codes_as_missing;
  RawTable out;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& cells = table.rows[r];
    ++stats.rows_read;
    Row row;
    row.values.resize(schema.features.size());
    bool drop_missing = false;
    bool unknown = false;
    bool out_of_bounds = false;
    for (std::size_t f = 0; f < schema.features.size(); ++f) {
      const auto& decl = schema.features[f];
      std::string cell = detail::strip(cells[col_of[f]], opt.strip_suffix);
      if (cell == opt.na_token || cell.empty()) {
        row.values[f] = Missing{};
      } else if (decl.is_categorical()) {
        row.values[f] = cell;
      } else {
        auto v = parse_number(cell);
        if (!v) throw ParseError(table.lines[r], "non-numeric value '" + cell + "' in column '" + decl.name + "'");
        bool special = std::find(opt.special_codes.begin(), opt.special_codes.end(), *v) != opt.special_codes.end();
        if (special) ++stats.special_code_values;
        if (special && opt.special_codes_as_missing) row.values[f] = Missing{};
        else row.values[f] = *v;
      }

      if (std::holds_alternative<Missing>(row.values[f])) {
        if (decl.is_categorical()) {
          const auto& cat = std::get<CategoricalKind>(decl.kind);
          if (cat.optional) continue;
          if (decl.missing_policy == MissingPolicy::AsLevel) {
            row.values[f] = decl.missing_level;
            ++stats.values_as_level;
            continue;
          }
        }
        drop_missing = true;
        continue;
      }
      if (decl.is_categorical()) {
        auto levels = decl.effective_levels();
        if (std::find(levels.begin(), levels.end(), std::get<std::string>(row.values[f])) == levels.end()) {
          unknown = true;
        }
      } else if (domain && domain->enforce_bounds.count(decl.name)) {
        double v = std::get<double>(row.values[f]);
        if ((decl.lower() && v < *decl.lower()) || (decl.upper() && v > *decl.upper())) out_of_bounds = true;
      }
    }
    if (drop_missing) {
      ++stats.rows_dropped_missing;
      continue;
    }
    if (unknown) {
      ++stats.rows_unknown_level;
      continue;
    }
    if (out_of_bounds) {
      if (role == DatasetRole::Train) {
        ++stats.rows_out_of_bounds;
        continue;
      }
      ++stats.rows_flagged_out_of_bounds;
    }
    std::size_t id = r;
    if (id_col) {
      auto v = parse_number(cells[*id_col]);
      if (!v || *v < 0) throw ParseError(table.lines[r], "bad row id '" + cells[*id_col] + "'");
      id = static_cast<std::size_t>(*v);
    }
    out.rows.push_back(std::move(row));
    out.row_ids.push_back(id);
    out.lines.push_back(table.lines[r]);
  }
  stats.rows_kept = out.rows.size();
  return out;
}

inline csv::Options csv_options(const LoaderOptions& opt) {
  csv::Options c;
  c.delimiter = opt.delimiter;
  c.trim = opt.trim;
  c.skip_prefix = opt.skip_prefix;
  if (!opt.header) {
    if (opt.columns.empty()) throw Error(ErrorCode::ConfigError, "headerless CSV needs column names");
    c.column_names = opt.columns;
  }
  return c;
}

/// Encodes already-parsed rows with a fitted layout.
inline EncodedDataset encode_rows(std::shared_ptr<const EncodingLayout> layout, const std::vector<Row>& rows,
                                  std::vector<std::size_t> row_ids) {
  EncodedDataset ds;
  ds.layout = std::move(layout);
  ds.matrix.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(ds.layout->width()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    ds.layout->encode_into(rows[i], ds.matrix.row(static_cast<Eigen::Index>(i)).data());
  }
  ds.row_ids = std::move(row_ids);
  ds.profile_index = build_profile_index(*ds.layout, ds.matrix, all_groups(*ds.layout));
  return ds;
}

struct LoadedDataset {
  EncodedDataset dataset;
  IngestStats stats;
  std::vector<Row> rows;
};

/// Builds a dataset from in-memory rows. Train fits the layout; Test needs
/// the training layout.
inline LoadedDataset dataset_from_rows(const FeatureSchema& schema, std::vector<Row> rows,
                                       std::vector<std::size_t> row_ids, DatasetRole role, ScalerKind scaler,
                                       std::shared_ptr<const EncodingLayout> layout, IngestStats stats = {}) {
  if (role == DatasetRole::Train) {
    if (rows.empty()) throw Error(ErrorCode::EmptyTrainingSet, "no usable training rows");
    layout = std::make_shared<const EncodingLayout>(build_layout(schema, scaler, rows));
  } else if (!layout) {
    throw Error(ErrorCode::ConfigError, "test data needs the training layout");
  }
  // Rows that build_layout could not use are dropped here with the same rule.
  std::vector<Row> kept;
  std::vector<std::size_t> kept_ids;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (!row_conforms(*layout, rows[i])) {
      ++stats.rows_unknown_level;
      continue;
    }
    kept.push_back(std::move(rows[i]));
    kept_ids.push_back(row_ids[i]);
  }
  stats.rows_kept = kept.size();
  LoadedDataset out;
  out.dataset = encode_rows(std::move(layout), kept, std::move(kept_ids));
  out.rows = std::move(kept);
  out.stats = stats;
  return out;
}

/// Loads a CSV. Re-loading the same file yields bit-identical matrices.
inline LoadedDataset load_dataset(const FeatureSchema& schema, const DomainSpec* domain,
                                  std::shared_ptr<const EncodingLayout> layout, const std::string& csv_path,
                                  DatasetRole role, const LoaderOptions& loader, ScalerKind scaler) {
  schema.validate();
  auto table = csv::read_file(csv_path, csv_options(loader));
  IngestStats stats;
  auto raw = read_rows(schema, domain, table, loader, role, stats);
  if (role == DatasetRole::Train && raw.rows.empty()) {
    throw Error(ErrorCode::EmptyTrainingSet, "no usable training rows in " + csv_path);
  }
  return dataset_from_rows(schema, std::move(raw.rows), std::move(raw.row_ids), role, scaler, std::move(layout),
                           stats);
}

}  // namespace hullaudit
