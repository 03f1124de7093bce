#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <unordered_map>
#include <variant>
#include <vector>

#include "hullaudit/error.hpp"

namespace hullaudit {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct ContinuousKind {
  std::optional<double> lower;
  std::optional<double> upper;
};

struct IntegerKind {
  std::optional<std::int64_t> lower;
  std::optional<std::int64_t> upper;
};

struct CategoricalKind {
  std::vector<std::string> levels;
  /// An optional group may be empty for a row (all-zero one-hot block, group sum <= 1).
  bool optional = false;
};

using FeatureKind = std::variant<ContinuousKind, IntegerKind, CategoricalKind>;

enum class MissingPolicy { DropRow, AsLevel };

struct FeatureDecl {
  std::string name;
  FeatureKind kind;
  MissingPolicy missing_policy = MissingPolicy::DropRow;
  /// Level used for missing values under MissingPolicy::AsLevel.
  std::string missing_level = "Unknown";

  bool is_categorical() const { return std::holds_alternative<CategoricalKind>(kind); }
  bool is_integer() const { return std::holds_alternative<IntegerKind>(kind); }

  /// Declared levels plus the missing level when AsLevel adds one.
  std::vector<std::string> effective_levels() const {
    auto levels = std::get<CategoricalKind>(kind).levels;
    if (missing_policy == MissingPolicy::AsLevel &&
        std::find(levels.begin(), levels.end(), missing_level) == levels.end()) {
      levels.push_back(missing_level);
    }
    return levels;
  }

  std::optional<double> lower() const {
    if (auto* c = std::get_if<ContinuousKind>(&kind)) return c->lower;
    if (auto* i = std::get_if<IntegerKind>(&kind)) {
      return i->lower ? std::optional<double>(double(*i->lower)) : std::nullopt;
    }
    return std::nullopt;
  }
  std::optional<double> upper() const {
    if (auto* c = std::get_if<ContinuousKind>(&kind)) return c->upper;
    if (auto* i = std::get_if<IntegerKind>(&kind)) {
      return i->upper ? std::optional<double>(double(*i->upper)) : std::nullopt;
    }
    return std::nullopt;
  }
};

struct FeatureSchema {
  std::vector<FeatureDecl> features;
  std::optional<std::string> target_column;

  std::optional<std::size_t> index_of(std::string_view name) const {
    for (std::size_t i = 0; i < features.size(); ++i) {
      if (features[i].name == name) return i;
    }
    return std::nullopt;
  }

  /// Throws SchemaError when an invariant is violated.
  void validate() const {
    if (features.empty()) throw Error(ErrorCode::SchemaError, "schema declares no features");
    std::set<std::string> names;
    for (const auto& f : features) {
      if (f.name.empty()) throw Error(ErrorCode::SchemaError, "feature with empty name");
      if (!names.insert(f.name).second) {
        throw Error(ErrorCode::SchemaError, "duplicate feature name '" + f.name + "'");
      }
      if (target_column && f.name == *target_column) {
        throw Error(ErrorCode::SchemaError, "target column '" + f.name + "' declared as a feature");
      }
      if (auto* cat = std::get_if<CategoricalKind>(&f.kind)) {
        if (cat->levels.size() < 2) {
          throw Error(ErrorCode::SchemaError, "categorical '" + f.name + "' needs at least 2 levels");
        }
        std::set<std::string> seen;
        for (const auto& level : cat->levels) {
          if (!seen.insert(level).second) {
            throw Error(ErrorCode::SchemaError,
                        "duplicate level '" + level + "' in categorical '" + f.name + "'");
          }
        }
      } else if (f.missing_policy == MissingPolicy::AsLevel) {
        throw Error(ErrorCode::SchemaError,
                    "missing policy as_level is only legal for categorical '" + f.name + "'");
      }
      auto lo = f.lower();
      auto hi = f.upper();
      if (lo && hi && *lo > *hi) {
        throw Error(ErrorCode::SchemaError, "lower bound exceeds upper bound for '" + f.name + "'");
      }
    }
  }
};

// ---------------------------------------------------------------------------
// Domain

/// How the projection treats one categorical group.
enum class GroupMode {
  /// Group coordinates of the projection must equal the query's.
  FixedToQuery,
  /// Projection coordinates in {0,1}; one level (or none, if optional).
  DiscreteExclusive,
  /// Coordinates in [0,1] with the group sum kept; any mixture of levels.
  RelaxedMixture,
};

inline std::string_view to_string(GroupMode m) {
  switch (m) {
    case GroupMode::FixedToQuery: return "fixed_to_query";
    case GroupMode::DiscreteExclusive: return "discrete_exclusive";
    case GroupMode::RelaxedMixture: return "relaxed_mixture";
  }
  return "?";
}

inline GroupMode parse_group_mode(std::string_view s) {
  if (s == "fixed_to_query" || s == "fixed") return GroupMode::FixedToQuery;
  if (s == "discrete_exclusive" || s == "discrete") return GroupMode::DiscreteExclusive;
  if (s == "relaxed_mixture" || s == "relaxed") return GroupMode::RelaxedMixture;
  throw Error(ErrorCode::ConfigError, "unknown group mode '" + std::string(s) + "'");
}

/// The domain Omega: per-group relaxation modes and per-feature bound enforcement.
struct DomainSpec {
  std::map<std::string, GroupMode> group_modes;
  /// Numeric features whose declared bounds reject out-of-range training rows.
  std::set<std::string> enforce_bounds;
  /// Groups checked by the "continuous path" test; nullopt means every categorical group.
  std::optional<std::vector<std::string>> path_groups;

  /// Every categorical group set to `mode`.
  static DomainSpec uniform(const FeatureSchema& schema, GroupMode mode = GroupMode::DiscreteExclusive) {
    DomainSpec spec;
    for (const auto& f : schema.features) {
      if (f.is_categorical()) spec.group_modes[f.name] = mode;
    }
    return spec;
  }

  GroupMode mode_of(const std::string& group) const {
    auto it = group_modes.find(group);
    if (it == group_modes.end()) throw Error(ErrorCode::ConfigError, "no domain mode for group '" + group + "'");
    return it->second;
  }

  bool needs_discrete_solve() const {
    return std::any_of(group_modes.begin(), group_modes.end(),
                       [](const auto& kv) { return kv.second != GroupMode::RelaxedMixture; });
  }

  void validate(const FeatureSchema& schema) const {
    for (const auto& f : schema.features) {
      if (f.is_categorical() && !group_modes.count(f.name)) {
        throw Error(ErrorCode::ConfigError, "categorical group '" + f.name + "' has no domain mode");
      }
    }
    for (const auto& [name, mode] : group_modes) {
      auto idx = schema.index_of(name);
      if (!idx || !schema.features[*idx].is_categorical()) {
        throw Error(ErrorCode::ConfigError, "domain mode given for non-categorical '" + name + "'");
      }
    }
    for (const auto& name : enforce_bounds) {
      auto idx = schema.index_of(name);
      if (!idx || schema.features[*idx].is_categorical()) {
        throw Error(ErrorCode::ConfigError, "bound enforcement on non-numeric '" + name + "'");
      }
    }
    if (path_groups) {
      for (const auto& name : *path_groups) {
        auto idx = schema.index_of(name);
        if (!idx || !schema.features[*idx].is_categorical()) {
          throw Error(ErrorCode::ConfigError, "path group '" + name + "' is not categorical");
        }
      }
    }
  }
};

// ---------------------------------------------------------------------------
// Rows

struct Missing {
  bool operator==(const Missing&) const = default;
};

/// One raw cell: missing, a number, or a categorical level.
using Value = std::variant<Missing, double, std::string>;

/// A raw row aligned with FeatureSchema::features.
struct Row {
  std::vector<Value> values;
  bool operator==(const Row&) const = default;
};

inline std::optional<double> parse_number(std::string_view s) {
  double v = 0.0;
  const char* b = s.data();
  const char* e = s.data() + s.size();
  if (b != e && *b == '+') ++b;
  auto [p, ec] = std::from_chars(b, e, v);
  if (ec != std::errc{} || p != e || b == e) return std::nullopt;
  return v;
}

// ---------------------------------------------------------------------------
// Encoding

enum class ScalerKind { ZScore, MinMax, None };

inline std::string_view to_string(ScalerKind k) {
  switch (k) {
    case ScalerKind::ZScore: return "zscore";
    case ScalerKind::MinMax: return "minmax";
    case ScalerKind::None: return "none";
  }
  return "?";
}

inline ScalerKind parse_scaler(std::string_view s) {
  if (s == "zscore") return ScalerKind::ZScore;
  if (s == "minmax") return ScalerKind::MinMax;
  if (s == "none") return ScalerKind::None;
  throw Error(ErrorCode::ConfigError, "unknown scaler '" + std::string(s) + "'");
}

struct NumericColumn {
  std::size_t feature;
  std::size_t column;
  /// encoded = (raw - offset) / scale
  double offset = 0.0;
  double scale = 1.0;
};

struct GroupSpan {
  std::size_t feature;
  std::size_t begin;
  std::size_t size;
  bool optional = false;
};

struct ColumnInfo {
  std::size_t feature;
  std::optional<std::size_t> level;
};

/// Decoded value of one feature: a number, or a weight per level.
struct DecodedValue {
  double number = 0.0;
  std::vector<double> weights;
  /// Categorical weights are not a (sub)simplex point: some weight outside
  /// [0,1] or the group sum off by more than 1e-9.
  bool non_simplex = false;
};

struct DecodedRow {
  std::vector<DecodedValue> values;
};

class EncodingLayout {
 public:
  EncodingLayout() = default;

  const FeatureSchema& schema() const { return schema_; }
  ScalerKind scaler() const { return scaler_; }
  std::size_t width() const { return columns_.size(); }
  const std::vector<ColumnInfo>& columns() const { return columns_; }
  const std::vector<GroupSpan>& groups() const { return groups_; }
  const std::vector<NumericColumn>& numerics() const { return numerics_; }
  const std::vector<std::string>& levels(std::size_t feature) const { return levels_.at(feature); }
  std::size_t fit_rows() const { return fit_rows_; }
  std::size_t fit_rows_skipped() const { return fit_rows_skipped_; }

  /// Group span index of a categorical feature.
  std::size_t group_of(std::size_t feature) const { return feature_slot_.at(feature); }
  /// Numeric column index of a continuous/integer feature.
  const NumericColumn& numeric_of(std::size_t feature) const { return numerics_[feature_slot_.at(feature)]; }

  std::optional<std::size_t> group_by_name(std::string_view name) const {
    auto f = schema_.index_of(name);
    if (!f || !schema_.features[*f].is_categorical()) return std::nullopt;
    return group_of(*f);
  }

  std::string column_label(std::size_t col) const {
    const auto& info = columns_.at(col);
    const auto& name = schema_.features[info.feature].name;
    if (!info.level) return name;
    return name + "=" + levels_[info.feature][*info.level];
  }

  std::optional<std::size_t> level_index(std::size_t feature, const std::string& level) const {
    const auto& map = level_lookup_[feature];
    auto it = map.find(level);
    if (it == map.end()) return std::nullopt;
    return it->second;
  }

  double scale_value(const NumericColumn& nc, double raw) const { return (raw - nc.offset) / nc.scale; }
  double unscale_value(const NumericColumn& nc, double enc) const { return enc * nc.scale + nc.offset; }

  /// Encodes a row whose missing values were already resolved. Throws
  /// DimensionMismatch, UnknownLevel or SchemaMismatch.
  Eigen::VectorXd encode(const Row& row) const {
    Eigen::VectorXd out = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(width()));
    encode_into(row, out.data());
    return out;
  }

  void encode_into(const Row& row, double* out) const {
    if (row.values.size() != schema_.features.size()) {
      throw Error(ErrorCode::DimensionMismatch, "row has " + std::to_string(row.values.size()) +
                                                    " values, schema has " +
                                                    std::to_string(schema_.features.size()));
    }
    for (std::size_t c = 0; c < width(); ++c) out[c] = 0.0;
    for (std::size_t f = 0; f < schema_.features.size(); ++f) {
      const auto& decl = schema_.features[f];
      const auto& v = row.values[f];
      if (decl.is_categorical()) {
        const auto& g = groups_[group_of(f)];
        if (std::holds_alternative<Missing>(v)) {
          if (g.optional) continue;
          throw Error(ErrorCode::SchemaMismatch, "missing value in non-optional group '" + decl.name + "'");
        }
        const auto* s = std::get_if<std::string>(&v);
        if (!s) throw Error(ErrorCode::SchemaMismatch, "numeric value for categorical '" + decl.name + "'");
        auto li = level_index(f, *s);
        if (!li) throw Error(ErrorCode::UnknownLevel, "unknown level '" + *s + "' for '" + decl.name + "'");
        out[g.begin + *li] = 1.0;
      } else {
        const auto* d = std::get_if<double>(&v);
        if (!d) throw Error(ErrorCode::SchemaMismatch, "non-numeric value for '" + decl.name + "'");
        const auto& nc = numeric_of(f);
        out[nc.column] = scale_value(nc, *d);
      }
    }
  }

  DecodedRow decode(std::span<const double> point) const {
    if (point.size() != width()) {
      throw Error(ErrorCode::DimensionMismatch, "point has length " + std::to_string(point.size()) +
                                                    ", layout width is " + std::to_string(width()));
    }
    DecodedRow out;
    out.values.resize(schema_.features.size());
    for (std::size_t f = 0; f < schema_.features.size(); ++f) {
      auto& dv = out.values[f];
      if (schema_.features[f].is_categorical()) {
        const auto& g = groups_[group_of(f)];
        dv.weights.assign(point.begin() + g.begin, point.begin() + g.begin + g.size);
        double sum = 0.0;
        for (double w : dv.weights) {
          sum += w;
          if (w < -1e-9 || w > 1.0 + 1e-9) dv.non_simplex = true;
        }
        if (g.optional ? sum > 1.0 + 1e-9 : std::abs(sum - 1.0) > 1e-9) dv.non_simplex = true;
      } else {
        dv.number = unscale_value(numeric_of(f), point[numeric_of(f).column]);
      }
    }
    return out;
  }

  /// Decodes a point with pure one-hot blocks back into a raw row.
  /// Throws NonPureProfile when some block is fractional.
  Row decode_row(std::span<const double> point, double tol = 1e-12) const {
    auto decoded = decode(point);
    Row row;
    row.values.resize(schema_.features.size());
    for (std::size_t f = 0; f < schema_.features.size(); ++f) {
      if (!schema_.features[f].is_categorical()) {
        row.values[f] = decoded.values[f].number;
        continue;
      }
      auto level = pure_level(decoded.values[f].weights, tol);
      if (!level) throw Error(ErrorCode::NonPureProfile, "fractional block for '" + schema_.features[f].name + "'");
      if (*level < 0) row.values[f] = Missing{};
      else row.values[f] = levels_[f][static_cast<std::size_t>(*level)];
    }
    return row;
  }

  /// Index of the single level with weight 1 (-1 for an empty block), or
  /// nullopt when the block is not pure.
  static std::optional<long> pure_level(std::span<const double> weights, double tol = 1e-12) {
    long hot = -1;
    for (std::size_t i = 0; i < weights.size(); ++i) {
      if (std::abs(weights[i] - 1.0) <= tol) {
        if (hot >= 0) return std::nullopt;
        hot = static_cast<long>(i);
      } else if (std::abs(weights[i]) > tol) {
        return std::nullopt;
      }
    }
    return hot;
  }

  /// "sex: 50% F / 50% M" style rendering of one decoded feature.
  std::string render(std::size_t feature, const DecodedValue& v) const {
    std::ostringstream os;
    os << schema_.features[feature].name << ": ";
    if (!schema_.features[feature].is_categorical()) {
      os << v.number;
      return os.str();
    }
    bool first = true;
    for (std::size_t i = 0; i < v.weights.size(); ++i) {
      if (std::abs(v.weights[i]) <= 1e-12) continue;
      if (!first) os << " / ";
      first = false;
      os << format_percent(v.weights[i]) << " " << levels_[feature][i];
    }
    if (first) os << "(none)";
    if (v.non_simplex) os << " [non-simplex]";
    return os.str();
  }

  static std::string format_percent(double w) {
    std::ostringstream os;
    double pct = w * 100.0;
    if (std::abs(pct - std::round(pct)) < 1e-9) os << static_cast<long long>(std::llround(pct)) << "%";
    else {
      os.setf(std::ios::fixed);
      os.precision(1);
      os << pct << "%";
    }
    return os.str();
  }

  friend EncodingLayout build_layout(const FeatureSchema&, ScalerKind, std::span<const Row>);
  friend EncodingLayout layout_from_parameters(const FeatureSchema&, ScalerKind,
                                               const std::vector<std::pair<double, double>>&);

 private:
  void build_structure(const FeatureSchema& schema, ScalerKind scaler) {
    schema.validate();
    schema_ = schema;
    scaler_ = scaler;
    levels_.assign(schema.features.size(), {});
    level_lookup_.assign(schema.features.size(), {});
    feature_slot_.assign(schema.features.size(), 0);
    // Numeric columns first, in schema order, then one block per categorical.
    for (std::size_t f = 0; f < schema.features.size(); ++f) {
      if (schema.features[f].is_categorical()) continue;
      feature_slot_[f] = numerics_.size();
      numerics_.push_back({f, columns_.size(), 0.0, 1.0});
      columns_.push_back({f, std::nullopt});
    }
    for (std::size_t f = 0; f < schema.features.size(); ++f) {
      const auto& decl = schema.features[f];
      if (!decl.is_categorical()) continue;
      levels_[f] = decl.effective_levels();
      for (std::size_t l = 0; l < levels_[f].size(); ++l) level_lookup_[f][levels_[f][l]] = l;
      feature_slot_[f] = groups_.size();
      groups_.push_back({f, columns_.size(), levels_[f].size(), std::get<CategoricalKind>(decl.kind).optional});
      for (std::size_t l = 0; l < levels_[f].size(); ++l) columns_.push_back({f, l});
    }
  }

  FeatureSchema schema_;
  ScalerKind scaler_ = ScalerKind::ZScore;
  std::vector<ColumnInfo> columns_;
  std::vector<GroupSpan> groups_;
  std::vector<NumericColumn> numerics_;
  std::vector<std::vector<std::string>> levels_;
  std::vector<std::unordered_map<std::string, std::size_t>> level_lookup_;
  std::vector<std::size_t> feature_slot_;
  std::size_t fit_rows_ = 0;
  std::size_t fit_rows_skipped_ = 0;
};

/// True when every categorical value of `row` is a declared level and every
/// numeric value is a number.
inline bool row_conforms(const EncodingLayout& layout, const Row& row) {
  const auto& features = layout.schema().features;
  if (row.values.size() != features.size()) return false;
  for (std::size_t f = 0; f < features.size(); ++f) {
    const auto& v = row.values[f];
    if (features[f].is_categorical()) {
      if (std::holds_alternative<Missing>(v)) {
        if (!layout.groups()[layout.group_of(f)].optional) return false;
        continue;
      }
      const auto* s = std::get_if<std::string>(&v);
      if (!s || !layout.level_index(f, *s)) return false;
    } else if (!std::holds_alternative<double>(v)) {
      return false;
    }
  }
  return true;
}

/// Fits scaler parameters on the training rows. Rows with undeclared levels
/// or unresolved missing values are skipped and counted; fails only when no
/// row remains.
inline EncodingLayout build_layout(const FeatureSchema& schema, ScalerKind scaler,
                                   std::span<const Row> training_rows) {
  EncodingLayout layout;
  layout.build_structure(schema, scaler);
  if (training_rows.empty()) throw Error(ErrorCode::EmptyTrainingSet, "no training rows");

  std::vector<const Row*> usable;
  usable.reserve(training_rows.size());
  for (const auto& row : training_rows) {
    if (row_conforms(layout, row)) usable.push_back(&row);
  }
  layout.fit_rows_ = usable.size();
  layout.fit_rows_skipped_ = training_rows.size() - usable.size();
  if (usable.empty()) {
    throw Error(ErrorCode::UnknownLevel, "every training row has an unknown level or missing value");
  }

  for (auto& nc : layout.numerics_) {
    if (scaler == ScalerKind::None) continue;
    // Two-pass mean/variance for stability.
    double mean = 0.0;
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (const Row* r : usable) {
      double v = std::get<double>(r->values[nc.feature]);
      mean += v;
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    mean /= static_cast<double>(usable.size());
    if (scaler == ScalerKind::ZScore) {
      double ss = 0.0;
      for (const Row* r : usable) {
        double dv = std::get<double>(r->values[nc.feature]) - mean;
        ss += dv * dv;
      }
      double sd = std::sqrt(ss / static_cast<double>(usable.size()));
      nc.offset = mean;
      nc.scale = sd > 0.0 ? sd : 1.0;
    } else {
      nc.offset = lo;
      nc.scale = hi > lo ? hi - lo : 1.0;
    }
  }
  return layout;
}

/// Rebuilds a layout from stored scaler parameters (offset, scale) per numeric column.
inline EncodingLayout layout_from_parameters(const FeatureSchema& schema, ScalerKind scaler,
                                             const std::vector<std::pair<double, double>>& params) {
  EncodingLayout layout;
  layout.build_structure(schema, scaler);
  if (params.size() != layout.numerics_.size()) {
    throw Error(ErrorCode::DimensionMismatch, "scaler parameter count does not match numeric columns");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    layout.numerics_[i].offset = params[i].first;
    layout.numerics_[i].scale = params[i].second;
  }
  return layout;
}

}  // namespace hullaudit
