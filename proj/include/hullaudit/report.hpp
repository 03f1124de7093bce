#pragma once

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "hullaudit/batch.hpp"
#include "hullaudit/csv.hpp"
#include "hullaudit/directions.hpp"
#include "hullaudit/schema_io.hpp"

namespace hullaudit {

inline constexpr const char* kReportSchemaVersion = "1";
/// Floor for the relative-change denominator, raw units.
inline constexpr double kRelativeFloor = 1e-9;

struct FeatureDelta {
  std::string feature;
  bool categorical = false;
  // numeric
  double query = 0.0;
  double projection = 0.0;
  double delta = 0.0;
  double relative_change = 0.0;
  // categorical
  std::string query_level;  // empty for an empty optional group
  std::map<std::string, double> projection_levels;
  std::string rendered;
  /// Total variation between the query's block and the projection's.
  double mass_moved = 0.0;
};

struct SupportEntry {
  double alpha = 0.0;
  std::size_t train_row_id = 0;
};

struct SampleRecord {
  std::size_t row_id = 0;
  /// Absent when the projection failed for another reason than a missing path.
  std::optional<SampleStatus> status;
  bool has_path = true;
  std::optional<double> distance;
  std::optional<double> raw_distance;
  bool certified = false;
  double certificate = 0.0;
  int iterations = 0;
  std::string algorithm;
  bool weights_non_unique = false;
  std::size_t profiles_considered = 0;
  std::size_t profiles_pruned = 0;
  bool rounded_profile_absent = false;
  std::vector<FeatureDelta> deltas;
  /// Decoded query, one json value per feature (null = empty group).
  json query = json::object();
  json projection = json::object();
  std::vector<SupportEntry> support;
  std::size_t support_size = 0;
  bool support_suppressed = false;
  std::optional<std::string> error_code;
  std::string error_message;
};

struct RecordOptions {
  std::size_t top_k = 10;
  bool redact = false;
};

namespace detail {

inline json decoded_json(const EncodingLayout& layout, std::size_t f, const DecodedValue& v) {
  const auto& decl = layout.schema().features[f];
  if (!decl.is_categorical()) return v.number;
  auto level = EncodingLayout::pure_level(v.weights, 1e-9);
  if (level && *level < 0) return nullptr;
  if (level) return layout.levels(f)[static_cast<std::size_t>(*level)];
  json m = json::object();
  for (std::size_t i = 0; i < v.weights.size(); ++i) {
    if (std::abs(v.weights[i]) > 1e-12) m[layout.levels(f)[i]] = v.weights[i];
  }
  return m;
}

}  // namespace detail

inline SampleStatus classify(bool has_path, MembershipStatus status) {
  if (!has_path) return SampleStatus::OutsideNoPath;
  return status == MembershipStatus::Inside ? SampleStatus::Inside : SampleStatus::OutsidePath;
}

/// Builds one record. `result` may be null (failed projection).
inline SampleRecord make_record(std::size_t row_id, const EncodingLayout& layout, std::span<const double> query,
                                const BatchItem& item, bool has_path, const EncodedDataset& train,
                                const RecordOptions& opt) {
  SampleRecord rec;
  rec.row_id = row_id;
  rec.has_path = has_path;
  auto dq = layout.decode(query);
  const auto& features = layout.schema().features;
  for (std::size_t f = 0; f < features.size(); ++f) rec.query[features[f].name] = detail::decoded_json(layout, f, dq.values[f]);

  if (!item.ok()) {
    if (!has_path) rec.status = SampleStatus::OutsideNoPath;
    rec.error_code = std::string(to_string(item.error.value_or(ErrorCode::NumericBreakdown)));
    rec.error_message = item.message;
    return rec;
  }
  const auto& r = *item.result;
  rec.status = classify(has_path, r.status);
  rec.distance = r.distance;
  rec.raw_distance = r.raw_distance;
  rec.certified = r.certified;
  rec.certificate = r.certificate;
  rec.iterations = r.iterations;
  rec.algorithm = std::string(to_string(r.algorithm));
  rec.weights_non_unique = r.weights_non_unique;
  if (item.trace) {
    rec.profiles_considered = item.trace->profiles_considered;
    rec.profiles_pruned = item.trace->profiles_pruned;
    rec.rounded_profile_absent = item.trace->rounded_profile_absent;
  }
  std::span<const double> xh(r.point.data(), static_cast<std::size_t>(r.point.size()));
  auto dp = layout.decode(xh);
  for (std::size_t f = 0; f < features.size(); ++f) {
    rec.projection[features[f].name] = detail::decoded_json(layout, f, dp.values[f]);
    FeatureDelta d;
    d.feature = features[f].name;
    if (features[f].is_categorical()) {
      d.categorical = true;
      auto ql = EncodingLayout::pure_level(dq.values[f].weights, 1e-9);
      if (ql && *ql >= 0) d.query_level = layout.levels(f)[static_cast<std::size_t>(*ql)];
      double tv = 0.0;
      for (std::size_t i = 0; i < dp.values[f].weights.size(); ++i) {
        double w = dp.values[f].weights[i];
        if (std::abs(w) > 1e-12) d.projection_levels[layout.levels(f)[i]] = w;
        tv += std::abs(w - dq.values[f].weights[i]);
      }
      d.mass_moved = 0.5 * tv;
      d.rendered = layout.render(f, dp.values[f]);
    } else {
      d.query = dq.values[f].number;
      d.projection = dp.values[f].number;
      d.delta = d.projection - d.query;
      d.relative_change = std::abs(d.delta) / std::max(std::abs(d.query), kRelativeFloor);
    }
    rec.deltas.push_back(std::move(d));
  }
  rec.support_size = r.weights.size();
  if (opt.redact) {
    rec.support_suppressed = true;
  } else {
    std::vector<std::pair<std::size_t, double>> w = r.weights;
    std::stable_sort(w.begin(), w.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
    if (w.size() > opt.top_k) w.resize(opt.top_k);
    for (const auto& [row, alpha] : w) {
      std::size_t id = row < train.row_ids.size() ? train.row_ids[row] : row;
      rec.support.push_back({alpha, id});
    }
  }
  return rec;
}

inline std::vector<SampleRecord> make_records(const BatchResult& batch, const EncodedDataset& train,
                                              const EncodedDataset& test, const PathChecker& paths,
                                              const RecordOptions& opt = {}) {
  if (batch.items.size() != test.size()) throw Error(ErrorCode::DimensionMismatch, "batch and test set differ in length");
  std::vector<SampleRecord> out;
  out.reserve(test.size());
  for (std::size_t i = 0; i < test.size(); ++i) {
    std::span<const double> q(test.matrix.row(static_cast<Eigen::Index>(i)).data(), test.width());
    std::size_t id = i < test.row_ids.size() ? test.row_ids[i] : i;
    out.push_back(make_record(id, *test.layout, q, batch.items[i], paths.has_path(q), train, opt));
  }
  return out;
}

inline std::vector<SampleStatus> statuses_of(const std::vector<SampleRecord>& records) {
  std::vector<SampleStatus> out;
  for (const auto& r : records) out.push_back(r.status.value_or(SampleStatus::OutsidePath));
  return out;
}

// ---------------------------------------------------------------------------
// Summary

struct Histogram {
  std::vector<double> edges;
  std::vector<std::size_t> counts;
};

/// Equal-width bins over [min, max] of the values.
inline Histogram make_histogram(const std::vector<double>& values, std::size_t bins) {
  Histogram h;
  if (values.empty() || bins == 0) return h;
  auto [lo_it, hi_it] = std::minmax_element(values.begin(), values.end());
  double lo = *lo_it, hi = *hi_it;
  if (hi <= lo) hi = lo + std::max(1e-12, std::abs(lo) * 1e-12);
  h.edges.resize(bins + 1);
  for (std::size_t b = 0; b <= bins; ++b) h.edges[b] = lo + (hi - lo) * static_cast<double>(b) / static_cast<double>(bins);
  h.edges.back() = hi;
  h.counts.assign(bins, 0);
  for (double v : values) {
    auto b = static_cast<std::size_t>(std::floor((v - lo) / (hi - lo) * static_cast<double>(bins)));
    ++h.counts[std::min(b, bins - 1)];
  }
  return h;
}

struct AuditSummary {
  std::size_t n_samples = 0;
  std::size_t n_classified = 0;
  std::size_t n_failed = 0;
  std::size_t n_uncertified = 0;
  std::map<SampleStatus, std::size_t> counts;
  std::map<SampleStatus, double> fractions;
  double outside_fraction = 0.0;
  Histogram histogram_scaled;
  Histogram histogram_raw;
  /// Numeric feature -> mean relative change over OutsidePath samples.
  std::vector<std::pair<std::string, double>> mean_relative_change;
  json config = json::object();
  json ingest = json::object();
  json directions = nullptr;
};

struct SummaryOptions {
  std::size_t histogram_bins = 30;
};

inline AuditSummary summarize(const std::vector<SampleRecord>& records, const SummaryOptions& opt = {},
                              json config = json::object(), json ingest = json::object(), json directions = nullptr) {
  AuditSummary s;
  s.n_samples = records.size();
  for (auto st : {SampleStatus::Inside, SampleStatus::OutsidePath, SampleStatus::OutsideNoPath}) s.counts[st] = 0;
  std::vector<double> scaled, raw;
  std::map<std::string, std::pair<double, std::size_t>> rel;
  std::vector<std::string> numeric_order;
  for (const auto& r : records) {
    if (!r.status) {
      ++s.n_failed;
      continue;
    }
    ++s.n_classified;
    ++s.counts[*r.status];
    if (r.distance && !r.certified) ++s.n_uncertified;
    if (*r.status != SampleStatus::Inside && r.distance) {
      scaled.push_back(*r.distance);
      raw.push_back(*r.raw_distance);
    }
    if (*r.status == SampleStatus::OutsidePath) {
      for (const auto& d : r.deltas) {
        if (d.categorical) continue;
        auto [it, fresh] = rel.try_emplace(d.feature, 0.0, 0);
        if (fresh) numeric_order.push_back(d.feature);
        it->second.first += d.relative_change;
        ++it->second.second;
      }
    }
  }
  for (const auto& [st, c] : s.counts) {
    s.fractions[st] = s.n_classified ? static_cast<double>(c) / static_cast<double>(s.n_classified) : 0.0;
  }
  s.outside_fraction = s.n_classified ? static_cast<double>(s.counts[SampleStatus::OutsidePath] +
                                                            s.counts[SampleStatus::OutsideNoPath]) /
                                            static_cast<double>(s.n_classified)
                                      : 0.0;
  s.histogram_scaled = make_histogram(scaled, opt.histogram_bins);
  s.histogram_raw = make_histogram(raw, opt.histogram_bins);
  for (const auto& name : numeric_order) {
    const auto& [sum, n] = rel[name];
    s.mean_relative_change.emplace_back(name, sum / static_cast<double>(n));
  }
  s.config = std::move(config);
  s.ingest = std::move(ingest);
  s.directions = std::move(directions);
  return s;
}

// ---------------------------------------------------------------------------
// JSON

inline json to_json(const Histogram& h) { return json{{"edges", h.edges}, {"counts", h.counts}}; }

inline json to_json(const SampleRecord& r) {
  json j;
  j["schema_version"] = kReportSchemaVersion;
  j["row_id"] = r.row_id;
  j["status"] = r.status ? json(std::string(to_string(*r.status))) : json(nullptr);
  j["has_path"] = r.has_path;
  j["distance"] = r.distance ? json(*r.distance) : json(nullptr);
  j["raw_distance"] = r.raw_distance ? json(*r.raw_distance) : json(nullptr);
  if (r.error_code) {
    j["error"] = json{{"code", *r.error_code}, {"message", r.error_message}};
    j["query"] = r.query;
    return j;
  }
  j["certified"] = r.certified;
  j["certificate"] = r.certificate;
  j["iterations"] = r.iterations;
  j["algorithm"] = r.algorithm;
  j["weights_non_unique"] = r.weights_non_unique;
  j["profiles_considered"] = r.profiles_considered;
  j["profiles_pruned"] = r.profiles_pruned;
  if (r.rounded_profile_absent) j["rounded_profile_absent"] = true;
  j["query"] = r.query;
  j["projection"] = r.projection;
  json deltas = json::array();
  for (const auto& d : r.deltas) {
    json e;
    e["feature"] = d.feature;
    if (d.categorical) {
      e["kind"] = "categorical";
      e["query"] = d.query_level.empty() ? json(nullptr) : json(d.query_level);
      e["projection"] = d.projection_levels;
      e["rendered"] = d.rendered;
      e["mass_moved"] = d.mass_moved;
    } else {
      e["kind"] = "numeric";
      e["query"] = d.query;
      e["projection"] = d.projection;
      e["delta"] = d.delta;
      e["relative_change"] = d.relative_change;
    }
    deltas.push_back(std::move(e));
  }
  j["deltas"] = std::move(deltas);
  if (r.support_suppressed) {
    j["support_suppressed"] = true;
  } else {
    json sup = json::array();
    for (const auto& s : r.support) sup.push_back(json{{"alpha", s.alpha}, {"train_row_id", s.train_row_id}});
    j["support"] = std::move(sup);
    j["support_size"] = r.support_size;
  }
  return j;
}

inline json to_json(const AuditSummary& s) {
  json j;
  j["schema_version"] = kReportSchemaVersion;
  j["n_samples"] = s.n_samples;
  j["n_classified"] = s.n_classified;
  j["n_failed"] = s.n_failed;
  j["n_uncertified"] = s.n_uncertified;
  json counts, fractions;
  for (const auto& [st, c] : s.counts) counts[std::string(to_string(st))] = c;
  for (const auto& [st, f] : s.fractions) fractions[std::string(to_string(st))] = f;
  j["counts"] = counts;
  j["fractions"] = fractions;
  j["outside_fraction"] = s.outside_fraction;
  j["histogram"] = json{{"scaled", to_json(s.histogram_scaled)}, {"raw", to_json(s.histogram_raw)}};
  json rel = json::object();
  for (const auto& [name, v] : s.mean_relative_change) rel[name] = v;
  j["mean_relative_change"] = json{{"over", "OutsidePath"},
                                   {"denominator", "max(|query value|, 1e-9), raw units"},
                                   {"features", rel}};
  j["config"] = s.config;
  j["ingest"] = s.ingest;
  j["directions"] = s.directions;
  return j;
}

inline json to_json(const IngestStats& s) {
  return json{{"preset", s.preset},
              {"na_token", s.na_token},
              {"rows_read", s.rows_read},
              {"rows_kept", s.rows_kept},
              {"rows_dropped_missing", s.rows_dropped_missing},
              {"rows_unknown_level", s.rows_unknown_level},
              {"rows_out_of_bounds", s.rows_out_of_bounds},
              {"rows_flagged_out_of_bounds", s.rows_flagged_out_of_bounds},
              {"values_as_level", s.values_as_level},
              {"special_code_values", s.special_code_values},
              {"special_codes_as_missing", s.special_codes_as_missing}};
}

inline json to_json(const SpectrumReport& r) {
  auto num = [](double v) { return std::isfinite(v) ? json(v) : json("inf"); };
  json j{{"rows", r.rows},
         {"cols", r.cols},
         {"rank", r.rank},
         {"full_rank", r.rank == std::min(r.rows, r.cols)},
         {"rank_tol", r.rank_tol},
         {"condition_number", num(r.condition)},
         {"condition_number_all_singular_values", num(r.condition_full)},
         {"singular_values", r.singular_values},
         {"dominant_patterns", r.dominant_patterns},
         {"energy_threshold", r.energy_threshold}};
  if (r.condition_after_drop) {
    j["dropped_columns"] = r.dropped_columns;
    j["condition_number_after_drop"] = num(*r.condition_after_drop);
    j["rank_after_drop"] = *r.rank_after_drop;
  }
  return j;
}

inline json to_json(const std::vector<RedundantColumn>& cols) {
  auto num = [](double v) { return std::isfinite(v) ? json(v) : json("inf"); };
  json a = json::array();
  for (const auto& c : cols) {
    a.push_back(json{{"column", c.column},
                     {"label", c.label},
                     {"pivot_position", c.pivot_position},
                     {"r_diag", c.r_diag},
                     {"condition_number_after_drop", num(c.condition_after_drop)},
                     {"condition_delta", num(c.condition_delta)}});
  }
  return a;
}

inline json to_json(const ClusterReport& c) {
  json sil = json::array();
  for (const auto& [k, s] : c.silhouettes) sil.push_back(json{{"k", k}, {"mean_silhouette", s}});
  json centroids = json::array();
  for (Eigen::Index i = 0; i < c.centroids.rows(); ++i) {
    centroids.push_back(std::vector<double>(c.centroids.row(i).data(), c.centroids.row(i).data() + c.centroids.cols()));
  }
  return json{{"k", c.k},         {"seed", c.seed},           {"normalized", c.normalized},
              {"silhouettes", sil}, {"cluster_sizes", c.cluster_sizes}, {"assignments", c.assignments},
              {"centroids", centroids}};
}

inline void write_jsonl(std::ostream& os, const std::vector<SampleRecord>& records) {
  for (const auto& r : records) os << to_json(r).dump() << '\n';
}

/// One line per record; numeric features give delta and relative change,
/// categorical ones the rendered projection.
inline void write_csv(std::ostream& os, const std::vector<SampleRecord>& records, const FeatureSchema& schema) {
  std::vector<std::string> header = {"row_id", "status", "has_path", "distance", "raw_distance", "certified"};
  for (const auto& f : schema.features) {
    if (f.is_categorical()) header.push_back("projection:" + f.name);
    else {
      header.push_back("delta:" + f.name);
      header.push_back("relative_change:" + f.name);
    }
  }
  header.push_back("error");
  for (std::size_t i = 0; i < header.size(); ++i) os << (i ? "," : "") << csv::escape(header[i]);
  os << '\n';
  auto num = [](double v) {
    std::ostringstream s;
    s << std::setprecision(17) << v;
    return s.str();
  };
  for (const auto& r : records) {
    std::vector<std::string> cells = {std::to_string(r.row_id), r.status ? std::string(to_string(*r.status)) : "",
                                      r.has_path ? "true" : "false", r.distance ? num(*r.distance) : "",
                                      r.raw_distance ? num(*r.raw_distance) : "", r.certified ? "true" : "false"};
    for (std::size_t f = 0; f < schema.features.size(); ++f) {
      const FeatureDelta* d = f < r.deltas.size() ? &r.deltas[f] : nullptr;
      if (schema.features[f].is_categorical()) cells.push_back(d ? d->rendered : "");
      else {
        cells.push_back(d ? num(d->delta) : "");
        cells.push_back(d ? num(d->relative_change) : "");
      }
    }
    cells.push_back(r.error_code.value_or(""));
    for (std::size_t i = 0; i < cells.size(); ++i) os << (i ? "," : "") << csv::escape(cells[i]);
    os << '\n';
  }
}

// ---------------------------------------------------------------------------
// Narrative

namespace detail {

inline std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(6) << v;
  return os.str();
}

inline std::string json_cell(const json& v) {
  if (v.is_null()) return "(none)";
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number()) return fmt(v.get<double>());
  std::string out;
  for (const auto& [k, w] : v.items()) {
    if (!out.empty()) out += " / ";
    out += EncodingLayout::format_percent(w.get<double>()) + " " + k;
  }
  return out;
}

}  // namespace detail

/// Plain-text explanation of one record: query, projection and deltas,
/// largest relative change first, then the support (or a notice that it was
/// withheld).
inline std::string explain_sample(const SampleRecord& rec, const FeatureSchema& schema, bool redact) {
  std::ostringstream os;
  os << "sample " << rec.row_id << ": ";
  if (!rec.status) {
    os << "projection failed (" << rec.error_code.value_or("error") << "): " << rec.error_message << "\n";
    return os.str();
  }
  os << to_string(*rec.status);
  if (rec.distance) os << ", distance " << detail::fmt(*rec.distance) << " (scaled), " << detail::fmt(*rec.raw_distance) << " (raw)";
  os << "\n";
  if (*rec.status == SampleStatus::OutsideNoPath) {
    os << "no training sample shares this sample's levels on the path groups\n";
  }
  if (*rec.status == SampleStatus::Inside) {
    os << "interpolation; no deltas\n";
    return os.str();
  }
  if (rec.deltas.empty()) return os.str();

  std::vector<const FeatureDelta*> order;
  for (const auto& d : rec.deltas) order.push_back(&d);
  std::stable_sort(order.begin(), order.end(), [](const FeatureDelta* a, const FeatureDelta* b) {
    double ma = a->categorical ? a->mass_moved : a->relative_change;
    double mb = b->categorical ? b->mass_moved : b->relative_change;
    if (a->categorical != b->categorical) return !a->categorical;
    return ma > mb;
  });
  std::size_t width = 7;
  for (const auto& f : schema.features) width = std::max(width, f.name.size());
  os << std::left << std::setw(static_cast<int>(width) + 2) << "feature" << std::setw(22) << "query" << std::setw(28)
     << "projection" << std::setw(14) << "delta"
     << "relative\n";
  for (const auto* d : order) {
    os << std::left << std::setw(static_cast<int>(width) + 2) << d->feature;
    if (d->categorical) {
      std::string q = d->query_level.empty() ? "(none)" : d->query_level;
      std::string p = detail::json_cell(rec.projection.value(d->feature, json(nullptr)));
      os << std::setw(22) << q << std::setw(28) << p << std::setw(14)
         << (d->mass_moved > 1e-9 ? EncodingLayout::format_percent(d->mass_moved) + " moved" : "-") << "\n";
    } else {
      std::ostringstream delta;
      delta << std::showpos << detail::fmt(d->delta);
      os << std::setw(22) << detail::fmt(d->query) << std::setw(28) << detail::fmt(d->projection) << std::setw(14)
         << delta.str() << EncodingLayout::format_percent(d->relative_change) << "\n";
    }
  }
  if (redact || rec.support_suppressed) {
    os << "support: suppressed\n";
  } else {
    os << "support (" << rec.support_size << " training samples, top " << rec.support.size() << "):";
    for (const auto& s : rec.support) os << " #" << s.train_row_id << " (" << detail::fmt(s.alpha) << ")";
    os << "\n";
  }
  return os.str();
}

/// Inverse of the decoded json used in records: numbers in raw units, a
/// level name, a {level: weight} mixture, or null for an empty group.
inline Eigen::VectorXd encode_decoded_json(const EncodingLayout& layout, const json& obj) {
  if (!obj.is_object()) throw Error(ErrorCode::ParseError, "decoded point must be a json object");
  Eigen::VectorXd out = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(layout.width()));
  const auto& features = layout.schema().features;
  for (std::size_t f = 0; f < features.size(); ++f) {
    const auto& name = features[f].name;
    if (!obj.contains(name)) throw Error(ErrorCode::SchemaMismatch, "decoded point lacks '" + name + "'");
    const auto& v = obj[name];
    if (!features[f].is_categorical()) {
      if (!v.is_number()) throw Error(ErrorCode::ParseError, "'" + name + "' is not a number");
      const auto& nc = layout.numeric_of(f);
      out[static_cast<Eigen::Index>(nc.column)] = layout.scale_value(nc, v.get<double>());
      continue;
    }
    const auto& g = layout.groups()[layout.group_of(f)];
    auto put = [&](const std::string& level, double w) {
      auto li = layout.level_index(f, level);
      if (!li) throw Error(ErrorCode::UnknownLevel, "unknown level '" + level + "' for '" + name + "'");
      out[static_cast<Eigen::Index>(g.begin + *li)] = w;
    };
    if (v.is_null()) continue;
    if (v.is_string()) {
      put(v.get<std::string>(), 1.0);
    } else if (v.is_object()) {
      for (const auto& [level, w] : v.items()) put(level, w.get<double>());
    } else {
      throw Error(ErrorCode::ParseError, "bad value for categorical '" + name + "'");
    }
  }
  return out;
}

/// A raw row from a json object keyed by feature name. Null or absent
/// values are missing; numeric strings are accepted for numeric features.
inline Row row_from_json(const FeatureSchema& schema, const json& obj) {
  if (!obj.is_object()) throw Error(ErrorCode::ParseError, "query must be a json object");
  for (const auto& [k, v] : obj.items()) {
    if (!schema.index_of(k)) throw Error(ErrorCode::SchemaMismatch, "unknown feature '" + k + "' in query");
  }
  Row row;
  for (const auto& decl : schema.features) {
    if (!obj.contains(decl.name) || obj[decl.name].is_null()) {
      row.values.emplace_back(Missing{});
      continue;
    }
    const auto& v = obj[decl.name];
    if (decl.is_categorical()) {
      if (!v.is_string()) throw Error(ErrorCode::ParseError, "'" + decl.name + "' must be a level name");
      row.values.emplace_back(v.get<std::string>());
    } else if (v.is_number()) {
      row.values.emplace_back(v.get<double>());
    } else if (auto d = v.is_string() ? parse_number(v.get<std::string>()) : std::nullopt) {
      row.values.emplace_back(*d);
    } else {
      throw Error(ErrorCode::ParseError, "'" + decl.name + "' must be numeric");
    }
  }
  return row;
}

}  // namespace hullaudit
