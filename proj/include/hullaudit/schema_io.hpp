#pragma once

#include <yaml-cpp/yaml.h>

#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>

#include "hullaudit/ingest.hpp"
#include "hullaudit/schema.hpp"
#include "json.hpp"

namespace hullaudit {

using json = nlohmann::ordered_json;

/// Everything a schema file declares.
///
///   features:
///     - {name: age, kind: integer, lower: 0, upper: 120}
///     - {name: sex, kind: categorical, levels: [Female, Male], missing_policy: as_level}
///   target_column: income
///   domain:
///     default_mode: discrete_exclusive
///     group_modes: {sex: fixed_to_query}
///     enforce_bounds: [age]
///     path_groups: [sex, race]
///   csv: {preset: adult, na_token: "?"}
///   scaler: zscore
struct SchemaFile {
  FeatureSchema schema;
  DomainSpec domain;
  LoaderOptions loader;
  std::optional<ScalerKind> scaler;
};

inline std::string_view to_string(MissingPolicy p) { return p == MissingPolicy::DropRow ? "drop_row" : "as_level"; }

inline MissingPolicy parse_missing_policy(std::string_view s) {
  if (s == "drop_row" || s == "drop") return MissingPolicy::DropRow;
  if (s == "as_level") return MissingPolicy::AsLevel;
  throw Error(ErrorCode::SchemaError, "unknown missing_policy '" + std::string(s) + "'");
}

namespace detail {

template <class T>
T yaml_get(const YAML::Node& node, const std::string& what) {
  try {
    return node.as<T>();
  } catch (const YAML::Exception&) {
    throw Error(ErrorCode::SchemaError, "bad value for " + what);
  }
}

inline void check_keys(const YAML::Node& node, std::initializer_list<const char*> allowed, const std::string& where) {
  for (const auto& kv : node) {
    auto key = kv.first.as<std::string>();
    bool known = false;
    for (const char* a : allowed) known = known || key == a;
    if (!known) throw Error(ErrorCode::SchemaError, "unknown key '" + key + "' in " + where);
  }
}

inline FeatureDecl feature_from_yaml(const YAML::Node& n) {
  if (!n.IsMap()) throw Error(ErrorCode::SchemaError, "feature entries must be maps");
  check_keys(n, {"name", "kind", "lower", "upper", "levels", "optional", "missing_policy", "missing_level"}, "feature");
  if (!n["name"] || !n["kind"]) throw Error(ErrorCode::SchemaError, "feature needs name and kind");
  FeatureDecl f;
  f.name = yaml_get<std::string>(n["name"], "feature name");
  auto kind = yaml_get<std::string>(n["kind"], f.name + ".kind");
  if (kind == "continuous") {
    ContinuousKind k;
    if (n["lower"]) k.lower = yaml_get<double>(n["lower"], f.name + ".lower");
    if (n["upper"]) k.upper = yaml_get<double>(n["upper"], f.name + ".upper");
    f.kind = k;
  } else if (kind == "integer") {
    IntegerKind k;
    if (n["lower"]) k.lower = yaml_get<std::int64_t>(n["lower"], f.name + ".lower");
    if (n["upper"]) k.upper = yaml_get<std::int64_t>(n["upper"], f.name + ".upper");
    f.kind = k;
  } else if (kind == "categorical") {
    CategoricalKind k;
    if (!n["levels"] || !n["levels"].IsSequence()) {
      throw Error(ErrorCode::SchemaError, "categorical '" + f.name + "' needs a levels list");
    }
    for (const auto& l : n["levels"]) k.levels.push_back(yaml_get<std::string>(l, f.name + ".levels"));
    if (n["optional"]) k.optional = yaml_get<bool>(n["optional"], f.name + ".optional");
    f.kind = k;
  } else {
    throw Error(ErrorCode::SchemaError, "unknown kind '" + kind + "' for '" + f.name + "'");
  }
  if (n["missing_policy"]) f.missing_policy = parse_missing_policy(yaml_get<std::string>(n["missing_policy"], f.name));
  if (n["missing_level"]) f.missing_level = yaml_get<std::string>(n["missing_level"], f.name + ".missing_level");
  if (!f.is_categorical() && (n["levels"] || n["optional"] || n["missing_level"])) {
    throw Error(ErrorCode::SchemaError, "levels/optional/missing_level only apply to categorical '" + f.name + "'");
  }
  return f;
}

inline LoaderOptions loader_from_yaml(const YAML::Node& n) {
  check_keys(n, {"preset", "header", "columns", "na_token", "delimiter", "trim", "skip_prefix", "strip_suffix",
                 "id_column", "special_codes", "special_codes_as_missing"},
             "csv");
  LoaderOptions opt = LoaderOptions::from_preset(n["preset"] ? yaml_get<std::string>(n["preset"], "csv.preset") : "none");
  if (n["header"]) opt.header = yaml_get<bool>(n["header"], "csv.header");
  if (n["columns"]) {
    opt.columns.clear();
    for (const auto& c : n["columns"]) opt.columns.push_back(yaml_get<std::string>(c, "csv.columns"));
  }
  if (n["na_token"]) opt.na_token = yaml_get<std::string>(n["na_token"], "csv.na_token");
  if (n["delimiter"]) {
    auto d = yaml_get<std::string>(n["delimiter"], "csv.delimiter");
    if (d.size() != 1) throw Error(ErrorCode::SchemaError, "csv.delimiter must be one character");
    opt.delimiter = d[0];
  }
  if (n["trim"]) opt.trim = yaml_get<bool>(n["trim"], "csv.trim");
  if (n["skip_prefix"]) opt.skip_prefix = yaml_get<std::string>(n["skip_prefix"], "csv.skip_prefix");
  if (n["strip_suffix"]) opt.strip_suffix = yaml_get<std::string>(n["strip_suffix"], "csv.strip_suffix");
  if (n["id_column"]) opt.id_column = yaml_get<std::string>(n["id_column"], "csv.id_column");
  if (n["special_codes"]) {
    opt.special_codes.clear();
    for (const auto& c : n["special_codes"]) opt.special_codes.push_back(yaml_get<double>(c, "csv.special_codes"));
  }
  if (n["special_codes_as_missing"]) {
    opt.special_codes_as_missing = yaml_get<bool>(n["special_codes_as_missing"], "csv.special_codes_as_missing");
  }
  return opt;
}

}  // namespace detail

inline SchemaFile parse_schema_yaml(const std::string& text) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::Exception& e) {
    throw Error(ErrorCode::SchemaError, std::string("schema file is not valid YAML: ") + e.what());
  }
  if (!root.IsMap()) throw Error(ErrorCode::SchemaError, "schema file must be a map");
  detail::check_keys(root, {"features", "target_column", "domain", "csv", "scaler"}, "schema file");
  SchemaFile out;
  if (!root["features"] || !root["features"].IsSequence()) {
    throw Error(ErrorCode::SchemaError, "schema file needs a features list");
  }
  for (const auto& f : root["features"]) out.schema.features.push_back(detail::feature_from_yaml(f));
  if (root["target_column"]) out.schema.target_column = detail::yaml_get<std::string>(root["target_column"], "target_column");
  out.schema.validate();

  GroupMode default_mode = GroupMode::DiscreteExclusive;
  YAML::Node dom = root["domain"];
  if (dom) {
    detail::check_keys(dom, {"default_mode", "group_modes", "enforce_bounds", "path_groups"}, "domain");
    if (dom["default_mode"]) default_mode = parse_group_mode(detail::yaml_get<std::string>(dom["default_mode"], "domain.default_mode"));
  }
  out.domain = DomainSpec::uniform(out.schema, default_mode);
  if (dom) {
    if (dom["group_modes"]) {
      for (const auto& kv : dom["group_modes"]) {
        out.domain.group_modes[kv.first.as<std::string>()] =
            parse_group_mode(detail::yaml_get<std::string>(kv.second, "domain.group_modes"));
      }
    }
    if (dom["enforce_bounds"]) {
      for (const auto& b : dom["enforce_bounds"]) out.domain.enforce_bounds.insert(detail::yaml_get<std::string>(b, "domain.enforce_bounds"));
    }
    if (dom["path_groups"]) {
      std::vector<std::string> groups;
      for (const auto& g : dom["path_groups"]) groups.push_back(detail::yaml_get<std::string>(g, "domain.path_groups"));
      out.domain.path_groups = groups;
    }
  }
  try {
    out.domain.validate(out.schema);
  } catch (const Error& e) {
    throw Error(ErrorCode::SchemaError, e.what());
  }
  if (root["csv"]) out.loader = detail::loader_from_yaml(root["csv"]);
  if (root["scaler"]) out.scaler = parse_scaler(detail::yaml_get<std::string>(root["scaler"], "scaler"));
  return out;
}

inline SchemaFile load_schema_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open schema file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_schema_yaml(ss.str());
}

// ---------------------------------------------------------------------------
// JSON forms (config echo, cache sidecar)

inline json to_json(const FeatureDecl& f) {
  json j;
  j["name"] = f.name;
  std::visit(
      [&](const auto& k) {
        using K = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<K, ContinuousKind>) {
          j["kind"] = "continuous";
          if (k.lower) j["lower"] = *k.lower;
          if (k.upper) j["upper"] = *k.upper;
        } else if constexpr (std::is_same_v<K, IntegerKind>) {
          j["kind"] = "integer";
          if (k.lower) j["lower"] = *k.lower;
          if (k.upper) j["upper"] = *k.upper;
        } else {
          j["kind"] = "categorical";
          j["levels"] = k.levels;
          if (k.optional) j["optional"] = true;
        }
      },
      f.kind);
  if (f.is_categorical()) {
    j["missing_policy"] = to_string(f.missing_policy);
    if (f.missing_policy == MissingPolicy::AsLevel) j["missing_level"] = f.missing_level;
  }
  return j;
}

inline json to_json(const FeatureSchema& s) {
  json j;
  j["features"] = json::array();
  for (const auto& f : s.features) j["features"].push_back(to_json(f));
  if (s.target_column) j["target_column"] = *s.target_column;
  return j;
}

inline json to_json(const DomainSpec& d) {
  json j;
  j["group_modes"] = json::object();
  for (const auto& [k, v] : d.group_modes) j["group_modes"][k] = to_string(v);
  j["enforce_bounds"] = std::vector<std::string>(d.enforce_bounds.begin(), d.enforce_bounds.end());
  if (d.path_groups) j["path_groups"] = *d.path_groups;
  else j["path_groups"] = nullptr;
  return j;
}

/// Parses the JSON produced by to_json(FeatureSchema); YAML is a superset of
/// JSON, so the YAML reader does the work.
inline FeatureSchema schema_from_json(const json& j) {
  json wrapped = j;
  return parse_schema_yaml(wrapped.dump()).schema;
}

}  // namespace hullaudit
