#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "hullaudit/batch.hpp"
#include "hullaudit/directions.hpp"
#include "hullaudit/report.hpp"
#include "hullaudit/schema_io.hpp"

namespace hullaudit {

struct AuditConfig {
  ScalerKind scaler = ScalerKind::ZScore;
  SolverConfig solver;
  DiscreteMethod method = DiscreteMethod::ExactEnumeration;
  HomotopySchedule schedule;
  int threads = 0;
  bool redact = false;
  std::size_t top_k = 10;
  std::uint64_t seed = 42;
  std::size_t histogram_bins = 30;
  bool directions = true;
  bool directions_include_no_path = false;
  SpectrumConfig spectrum;
  ClusterConfig clusters;
  std::size_t redundant_k = 5;
  /// Round integer features of each projection and re-project until the
  /// rounded point lies in the hull (or give up after a few rounds).
  bool round_integers = false;
};

inline json to_json(const SolverConfig& c) {
  return json{{"algorithm", to_string(c.algorithm)}, {"tol_opt", c.tol_opt},          {"tol_feas", c.tol_feas},
              {"max_iter", c.max_iter},            {"membership_eps", c.membership_eps}, {"warm_start_nearest", c.warm_start_nearest}};
}

inline json config_echo(const AuditConfig& c, const FeatureSchema& schema, const DomainSpec& domain,
                        const std::vector<std::string>& path_groups, const LoaderOptions& loader) {
  json missing = json::object();
  for (const auto& f : schema.features) {
    if (f.is_categorical()) missing[f.name] = to_string(f.missing_policy);
  }
  return json{{"scaler", to_string(c.scaler)},
              {"solver", to_json(c.solver)},
              {"method", to_string(c.method)},
              {"homotopy_schedule", c.schedule.lambdas},
              {"homotopy_iterations_per_stage", c.schedule.iterations_per_stage},
              {"redact", c.redact},
              {"top_k", c.top_k},
              {"seed", c.seed},
              {"histogram_bins", c.histogram_bins},
              {"round_integers", c.round_integers},
              {"domain", to_json(domain)},
              {"path_groups", path_groups},
              {"missing_policy", missing},
              {"na_token", loader.na_token},
              {"special_codes_as_missing", loader.special_codes_as_missing},
              {"relative_change_floor", kRelativeFloor},
              {"spectrum", json{{"energy_threshold", c.spectrum.energy_threshold},
                                {"rank_tol", c.spectrum.rank_tol > 0 ? json(c.spectrum.rank_tol) : json("sigma1*max(m,d)*eps")}}},
              {"clusters", json{{"k_min", c.clusters.k_min},
                                {"k_max", c.clusters.k_max},
                                {"seed", c.clusters.seed},
                                {"normalize", c.clusters.normalize},
                                {"silhouette_sample", c.clusters.silhouette_sample}}}};
}

/// Applies "group=mode"; the group "all" sets every categorical group.
inline void apply_domain_mode(DomainSpec& domain, const FeatureSchema& schema, std::string_view spec) {
  auto eq = spec.find('=');
  if (eq == std::string_view::npos) throw Error(ErrorCode::ConfigError, "domain mode must be group=mode, got '" + std::string(spec) + "'");
  std::string group(spec.substr(0, eq));
  GroupMode mode = parse_group_mode(spec.substr(eq + 1));
  if (group == "all") {
    for (const auto& f : schema.features) {
      if (f.is_categorical()) domain.group_modes[f.name] = mode;
    }
    return;
  }
  auto idx = schema.index_of(group);
  if (!idx || !schema.features[*idx].is_categorical()) {
    throw Error(ErrorCode::ConfigError, "'" + group + "' is not a categorical group");
  }
  domain.group_modes[group] = mode;
}

namespace detail {

template <class T>
T config_get(const YAML::Node& n, const std::string& key) {
  try {
    return n.as<T>();
  } catch (const YAML::Exception&) {
    throw Error(ErrorCode::ConfigError, "bad value for config key '" + key + "'");
  }
}

}  // namespace detail

/// Audit settings from a YAML map. Unknown keys are an error.
inline void apply_audit_yaml(AuditConfig& c, DomainSpec& domain, const FeatureSchema& schema, const std::string& text) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::Exception& e) {
    throw Error(ErrorCode::ConfigError, std::string("config is not valid YAML: ") + e.what());
  }
  if (root.IsNull()) return;
  if (!root.IsMap()) throw Error(ErrorCode::ConfigError, "config must be a map");
  using detail::config_get;
  for (const auto& kv : root) {
    auto key = kv.first.as<std::string>();
    const auto& v = kv.second;
    if (key == "scaler") c.scaler = parse_scaler(config_get<std::string>(v, key));
    else if (key == "method") c.method = parse_discrete_method(config_get<std::string>(v, key));
    else if (key == "algorithm") c.solver.algorithm = parse_algorithm(config_get<std::string>(v, key));
    else if (key == "tol_opt") c.solver.tol_opt = config_get<double>(v, key);
    else if (key == "tol_feas") c.solver.tol_feas = config_get<double>(v, key);
    else if (key == "max_iter") c.solver.max_iter = config_get<int>(v, key);
    else if (key == "eps") c.solver.membership_eps = config_get<double>(v, key);
    else if (key == "threads") c.threads = config_get<int>(v, key);
    else if (key == "redact") c.redact = config_get<bool>(v, key);
    else if (key == "top_k") c.top_k = config_get<std::size_t>(v, key);
    else if (key == "seed") c.seed = c.clusters.seed = config_get<std::uint64_t>(v, key);
    else if (key == "histogram_bins") c.histogram_bins = config_get<std::size_t>(v, key);
    else if (key == "round_integers") c.round_integers = config_get<bool>(v, key);
    else if (key == "directions") c.directions = config_get<bool>(v, key);
    else if (key == "include_no_path") c.directions_include_no_path = config_get<bool>(v, key);
    else if (key == "energy_threshold") c.spectrum.energy_threshold = config_get<double>(v, key);
    else if (key == "k_min") c.clusters.k_min = config_get<int>(v, key);
    else if (key == "k_max") c.clusters.k_max = config_get<int>(v, key);
    else if (key == "normalize") c.clusters.normalize = config_get<bool>(v, key);
    else if (key == "homotopy_lambdas") c.schedule.lambdas = config_get<std::vector<double>>(v, key);
    else if (key == "homotopy_iterations") c.schedule.iterations_per_stage = config_get<int>(v, key);
    else if (key == "domain_modes") {
      if (!v.IsMap()) throw Error(ErrorCode::ConfigError, "domain_modes must be a map");
      // "all" first so that named groups can override it.
      if (v["all"]) apply_domain_mode(domain, schema, "all=" + config_get<std::string>(v["all"], key));
      for (const auto& m : v) {
        auto g = m.first.as<std::string>();
        if (g != "all") apply_domain_mode(domain, schema, g + "=" + config_get<std::string>(m.second, key));
      }
    } else {
      throw Error(ErrorCode::ConfigError, "unknown config key '" + key + "'");
    }
  }
}

/// Path groups named by the domain, or every categorical group.
inline std::vector<std::string> effective_path_groups(const FeatureSchema& schema, const DomainSpec& domain) {
  if (domain.path_groups) return *domain.path_groups;
  std::vector<std::string> out;
  for (const auto& f : schema.features) {
    if (f.is_categorical()) out.push_back(f.name);
  }
  return out;
}

/// Spectrum, redundancy candidates and clusters of V as one json block.
inline json analyze_directions(const DirectionsMatrix& dm, const AuditConfig& c) {
  json out;
  out["rows"] = dm.V.rows();
  auto spec = spectrum(dm.V, c.spectrum);
  std::size_t k = std::min<std::size_t>(c.redundant_k, static_cast<std::size_t>(dm.V.cols()));
  auto red = redundant_features(dm.V, std::max<std::size_t>(k, 1), dm.column_labels, c.spectrum.rank_tol);
  if (!red.empty() && c.spectrum.drop_columns.empty()) {
    SpectrumConfig with_drop = c.spectrum;
    with_drop.drop_columns = {red.front().column};
    spec = spectrum(dm.V, with_drop);
  }
  out["spectrum"] = to_json(spec);
  out["redundant_features"] = to_json(red);
  if (dm.V.rows() >= 2) {
    try {
      ClusterConfig cc = c.clusters;
      out["clusters"] = to_json(cluster_directions(dm.V, cc));
    } catch (const Error& e) {
      if (e.code() != ErrorCode::DegenerateClustering) throw;
      out["clusters"] = json{{"error", to_string(e.code())}, {"message", e.what()}};
    }
  } else {
    out["clusters"] = nullptr;
  }
  return out;
}

namespace detail {

/// Integer features of the projection rounded in raw units, then projected
/// again; repeats while rounding moves the point off the hull.
inline void repair_integers(BatchItem& item, const Eigen::VectorXd& query, const EncodedDataset& train,
                            const DiscreteProjector* projector, const std::vector<std::size_t>& all_rows,
                            const AuditConfig& c) {
  if (!item.ok()) return;
  const auto& layout = *train.layout;
  std::vector<const NumericColumn*> ints;
  for (const auto& nc : layout.numerics()) {
    if (layout.schema().features[nc.feature].is_integer()) ints.push_back(&nc);
  }
  if (ints.empty()) return;
  Eigen::VectorXd point = item.result->point;
  for (int round = 0; round < 4; ++round) {
    Eigen::VectorXd rounded = point;
    for (const auto* nc : ints) {
      double raw = layout.unscale_value(*nc, point[static_cast<Eigen::Index>(nc->column)]);
      rounded[static_cast<Eigen::Index>(nc->column)] = layout.scale_value(*nc, std::round(raw));
    }
    ProjectionResult back;
    if (projector) {
      back = projector->project(rounded, c.solver).result;
    } else {
      ProjectionProblem p;
      p.query = rounded;
      p.data = &train.matrix;
      p.rows = all_rows;
      p.config = c.solver;
      p.layout = &layout;
      back = project_continuous(p);
    }
    if (back.distance <= c.solver.membership_eps) {
      // Rounded point is in the hull: report it with the weights found for it.
      back.point = rounded;
      back.distance = (rounded - query).norm();
      back.raw_distance = raw_distance(layout, rounded, query);
      back.status = back.distance <= c.solver.membership_eps ? MembershipStatus::Inside : MembershipStatus::Outside;
      item.result = std::move(back);
      return;
    }
    point = back.point;
  }
  item.message = "integer repair did not converge; continuous projection kept";
}

}  // namespace detail

struct AuditResult {
  BatchResult batch;
  std::vector<SampleRecord> records;
  AuditSummary summary;
  json directions = nullptr;
  std::vector<std::string> path_groups;
};

/// Full audit of in-memory datasets that share one layout.
inline AuditResult run_audit(const FeatureSchema& schema, const DomainSpec& domain, const LoadedDataset& train,
                             const LoadedDataset& test, const AuditConfig& c, const LoaderOptions& loader = {}) {
  domain.validate(schema);
  AuditResult out;
  out.path_groups = effective_path_groups(schema, domain);
  BatchOptions bo;
  bo.method = c.method;
  bo.schedule = c.schedule;
  bo.threads = c.threads;
  out.batch = batch_project(train.dataset, test.dataset, domain, c.solver, bo);

  if (c.round_integers) {
    std::optional<DiscreteProjector> projector;
    if (domain.needs_discrete_solve()) projector.emplace(train.dataset, domain);
    std::vector<std::size_t> all_rows(train.dataset.size());
    std::iota(all_rows.begin(), all_rows.end(), 0);
    parallel_for(out.batch.items.size(), c.threads, [&](std::size_t i) {
      Eigen::VectorXd q = test.dataset.matrix.row(static_cast<Eigen::Index>(i)).transpose();
      detail::repair_integers(out.batch.items[i], q, train.dataset, projector ? &*projector : nullptr, all_rows, c);
    });
  }

  PathChecker paths(train.dataset, groups_by_name(*train.dataset.layout, out.path_groups));
  out.records = make_records(out.batch, train.dataset, test.dataset, paths, RecordOptions{c.top_k, c.redact});

  if (c.directions) {
    auto statuses = statuses_of(out.records);
    try {
      auto dm = build_directions(out.batch, test.dataset, statuses, c.directions_include_no_path);
      out.directions = analyze_directions(dm, c);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::NoOutsideSamples) throw;
      out.directions = json{{"error", to_string(e.code())}, {"message", e.what()}};
    }
  }
  json ingest{{"train", to_json(train.stats)}, {"test", to_json(test.stats)}};
  ingest["train"]["layout_fit_rows"] = train.dataset.layout->fit_rows();
  ingest["encoded_width"] = train.dataset.width();
  json dir_summary = nullptr;
  if (out.directions.is_object() && out.directions.contains("spectrum")) {
    const auto& sp = out.directions["spectrum"];
    dir_summary = json{{"rows", sp["rows"]},
                       {"rank", sp["rank"]},
                       {"condition_number", sp["condition_number"]},
                       {"dominant_patterns", sp["dominant_patterns"]}};
    if (out.directions["clusters"].is_object() && out.directions["clusters"].contains("k")) {
      dir_summary["clusters"] = out.directions["clusters"]["k"];
    }
  }
  out.summary = summarize(out.records, SummaryOptions{c.histogram_bins},
                          config_echo(c, schema, domain, out.path_groups, loader), ingest, dir_summary);
  return out;
}

/// Loads train and test CSVs as described by a schema file.
inline std::pair<LoadedDataset, LoadedDataset> load_train_test(const SchemaFile& sf, const std::string& train_path,
                                                               const std::string& test_path, ScalerKind scaler) {
  auto train = load_dataset(sf.schema, &sf.domain, nullptr, train_path, DatasetRole::Train, sf.loader, scaler);
  auto test = load_dataset(sf.schema, &sf.domain, train.dataset.layout, test_path, DatasetRole::Test, sf.loader, scaler);
  return {std::move(train), std::move(test)};
}

}  // namespace hullaudit
