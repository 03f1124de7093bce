// hullaudit: audit, project, directions and path-check subcommands.

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "hullaudit/cache.hpp"
#include "hullaudit/pipeline.hpp"

namespace fs = std::filesystem;
using namespace hullaudit;

namespace {

struct SolveFlags {
  std::string schema;
  std::string train;
  std::string scaler;
  std::vector<std::string> domain_modes;
  std::string method;
  std::string algorithm;
  std::string config;
  double eps = 0;
  double tol_opt = 0;
  int max_iter = 0;
  int threads = 0;
  std::uint64_t seed = 0;
  bool redact = false;
  bool round_integers = false;

  CLI::Option* o_eps = nullptr;
  CLI::Option* o_tol = nullptr;
  CLI::Option* o_iter = nullptr;
  CLI::Option* o_threads = nullptr;
  CLI::Option* o_seed = nullptr;
};

void add_solve_flags(CLI::App* app, SolveFlags& f) {
  app->add_option("--schema", f.schema, "schema YAML")->required();
  app->add_option("--train", f.train, "training CSV")->required();
  app->add_option("--scaler", f.scaler, "zscore, minmax or none");
  app->add_option("--domain-mode", f.domain_modes, "group=mode (fixed, discrete, relaxed); all=mode for every group");
  app->add_option("--method", f.method, "exact or homotopy");
  app->add_option("--algorithm", f.algorithm, "auto, gp, fw or dual");
  app->add_option("--config", f.config, "YAML file with audit settings (flags win)");
  f.o_eps = app->add_option("--eps", f.eps, "membership tolerance in scaled units");
  f.o_tol = app->add_option("--tol-opt", f.tol_opt, "optimality certificate tolerance");
  f.o_iter = app->add_option("--max-iter", f.max_iter, "solver iteration cap");
  f.o_threads = app->add_option("--threads", f.threads, "worker threads (0 = all cores)");
  f.o_seed = app->add_option("--seed", f.seed, "clustering seed");
  app->add_flag("--redact", f.redact, "omit training support from outputs");
  app->add_flag("--round-integers", f.round_integers, "round integer features of projections");
}

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Defaults, then the config file, then flags. HULLAUDIT_THREADS beats --threads.
AuditConfig resolve_config(const SolveFlags& f, SchemaFile& sf) {
  AuditConfig c;
  if (sf.scaler) c.scaler = *sf.scaler;
  if (!f.config.empty()) apply_audit_yaml(c, sf.domain, sf.schema, slurp(f.config));
  if (!f.scaler.empty()) c.scaler = parse_scaler(f.scaler);
  if (!f.method.empty()) c.method = parse_discrete_method(f.method);
  if (!f.algorithm.empty()) c.solver.algorithm = parse_algorithm(f.algorithm);
  if (f.o_eps->count()) c.solver.membership_eps = f.eps;
  if (f.o_tol->count()) c.solver.tol_opt = f.tol_opt;
  if (f.o_iter->count()) c.solver.max_iter = f.max_iter;
  if (f.o_threads->count()) c.threads = f.threads;
  if (auto env = threads_from_env()) c.threads = *env;
  if (f.o_seed->count()) c.seed = c.clusters.seed = f.seed;
  if (f.redact) c.redact = true;
  if (f.round_integers) c.round_integers = true;
  for (const auto& m : f.domain_modes) apply_domain_mode(sf.domain, sf.schema, m);
  sf.domain.validate(sf.schema);
  c.solver.validate();
  c.schedule.validate();
  return c;
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out << text;
  if (!out) throw Error(ErrorCode::IoError, "write failed for " + path.string());
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = csv::detail::trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

// ---------------------------------------------------------------------------

int run_audit_cmd(const SolveFlags& f, const std::string& test_path, const std::string& out_dir, bool csv_out,
                  bool no_directions, const std::string& cache_dir) {
  auto sf = load_schema_file(f.schema);
  auto c = resolve_config(f, sf);
  if (no_directions) c.directions = false;
  auto [train, test] = load_train_test(sf, f.train, test_path, c.scaler);
  auto res = run_audit(sf.schema, sf.domain, train, test, c, sf.loader);

  fs::create_directories(out_dir);
  std::ostringstream rec;
  write_jsonl(rec, res.records);
  write_file(fs::path(out_dir) / "records.jsonl", rec.str());
  write_file(fs::path(out_dir) / "summary.json", to_json(res.summary).dump(2) + "\n");
  if (c.directions) {
    json dj = res.directions;
    dj["schema_version"] = kReportSchemaVersion;
    write_file(fs::path(out_dir) / "directions.json", dj.dump(2) + "\n");
  }
  if (csv_out) {
    std::ostringstream cs;
    write_csv(cs, res.records, sf.schema);
    write_file(fs::path(out_dir) / "records.csv", cs.str());
  }
  if (!cache_dir.empty()) {
    fs::create_directories(cache_dir);
    write_cache((fs::path(cache_dir) / "train.haud").string(), train.dataset);
    write_cache((fs::path(cache_dir) / "test.haud").string(), test.dataset);
  }
  json brief{{"command", "audit"},
             {"out", out_dir},
             {"n_samples", res.summary.n_samples},
             {"fractions", to_json(res.summary)["fractions"]},
             {"failed", res.summary.n_failed},
             {"config", res.summary.config}};
  std::cout << brief.dump() << '\n';
  return 0;
}

Row parse_query(const FeatureSchema& schema, const std::string& text) {
  auto t = csv::detail::trim(text);
  if (!t.empty() && t.front() == '{') {
    json j;
    try {
      j = json::parse(t);
    } catch (const json::exception& e) {
      throw Error(ErrorCode::ParseError, std::string("query is not valid json: ") + e.what());
    }
    return row_from_json(schema, j);
  }
  // A CSV row in schema order.
  csv::Options o;
  o.trim = true;
  for (const auto& f : schema.features) o.column_names.push_back(f.name);
  auto table = csv::parse_string(t + "\n", o);
  if (table.rows.size() != 1) throw Error(ErrorCode::ParseError, "query must be one CSV row");
  json j = json::object();
  for (std::size_t i = 0; i < schema.features.size(); ++i) {
    const auto& cell = table.rows[0][i];
    if (cell.empty() || cell == "?") j[schema.features[i].name] = nullptr;
    else j[schema.features[i].name] = cell;
  }
  return row_from_json(schema, j);
}

int run_project_cmd(const SolveFlags& f, const std::string& query, bool as_json) {
  auto sf = load_schema_file(f.schema);
  auto c = resolve_config(f, sf);
  auto train = load_dataset(sf.schema, &sf.domain, nullptr, f.train, DatasetRole::Train, sf.loader, c.scaler);
  Row row = parse_query(sf.schema, query);
  auto test = dataset_from_rows(sf.schema, {row}, {0}, DatasetRole::Test, c.scaler, train.dataset.layout);
  if (test.dataset.size() != 1) {
    // Only an unknown level can drop the row here; encode it again for the precise error.
    train.dataset.layout->encode(row);
  }
  c.directions = false;
  c.threads = 1;
  auto res = run_audit(sf.schema, sf.domain, train, test, c, sf.loader);
  const auto& rec = res.records.front();
  if (rec.error_code) {
    auto code = rec.error_code == "InfeasibleDomain" ? ErrorCode::InfeasibleDomain : ErrorCode::NumericBreakdown;
    throw Error(code, rec.error_message);
  }
  if (as_json) {
    json j = to_json(rec);
    j["config"] = res.summary.config;
    std::cout << j.dump(2) << '\n';
  } else {
    std::cout << explain_sample(rec, sf.schema, c.redact);
    std::cout << "config: " << res.summary.config.dump() << '\n';
  }
  return 0;
}

int run_directions_cmd(const std::string& records_path, const std::string& schema_path, const std::string& train_path,
                       const std::string& scaler_flag, const std::string& k_range, double energy, CLI::Option* o_energy,
                       std::uint64_t seed, CLI::Option* o_seed, bool no_normalize, bool include_no_path,
                       const std::string& out_path) {
  auto sf = load_schema_file(schema_path);
  AuditConfig c;
  if (sf.scaler) c.scaler = *sf.scaler;
  if (!scaler_flag.empty()) c.scaler = parse_scaler(scaler_flag);
  if (o_energy->count()) c.spectrum.energy_threshold = energy;
  if (o_seed->count()) c.clusters.seed = seed;
  if (no_normalize) c.clusters.normalize = false;
  if (!k_range.empty()) {
    auto dash = k_range.find('-');
    try {
      if (dash == std::string::npos) {
        c.clusters.k_min = c.clusters.k_max = std::stoi(k_range);
      } else {
        c.clusters.k_min = std::stoi(k_range.substr(0, dash));
        c.clusters.k_max = std::stoi(k_range.substr(dash + 1));
      }
    } catch (const std::exception&) {
      throw Error(ErrorCode::ConfigError, "bad --k-range '" + k_range + "'");
    }
  }
  c.clusters.validate();
  auto train = load_dataset(sf.schema, &sf.domain, nullptr, train_path, DatasetRole::Train, sf.loader, c.scaler);
  const auto& layout = *train.dataset.layout;

  std::ifstream in(records_path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + records_path);
  std::vector<Eigen::VectorXd> rows;
  std::vector<std::size_t> ids;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (csv::detail::trim(line).empty()) continue;
    json r;
    try {
      r = json::parse(line);
    } catch (const json::exception& e) {
      throw ParseError(lineno, std::string("bad record: ") + e.what());
    }
    if (!r.contains("status") || !r["status"].is_string()) continue;
    auto st = parse_sample_status(r["status"].get<std::string>());
    if (st == SampleStatus::Inside || (st == SampleStatus::OutsideNoPath && !include_no_path)) continue;
    if (!r.contains("projection")) continue;
    rows.push_back(encode_decoded_json(layout, r["projection"]) - encode_decoded_json(layout, r["query"]));
    ids.push_back(r.value("row_id", std::size_t{0}));
  }
  if (rows.empty()) throw Error(ErrorCode::NoOutsideSamples, "no outside samples in " + records_path);
  DirectionsMatrix dm;
  dm.V.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(layout.width()));
  for (std::size_t i = 0; i < rows.size(); ++i) dm.V.row(static_cast<Eigen::Index>(i)) = rows[i].transpose();
  dm.sample_index = ids;
  dm.column_labels = column_labels(layout);

  json out = analyze_directions(dm, c);
  out["schema_version"] = kReportSchemaVersion;
  out["row_ids"] = ids;
  out["config"] = json{{"scaler", to_string(c.scaler)},
                       {"include_no_path", include_no_path},
                       {"energy_threshold", c.spectrum.energy_threshold},
                       {"k_min", c.clusters.k_min},
                       {"k_max", c.clusters.k_max},
                       {"seed", c.clusters.seed},
                       {"normalize", c.clusters.normalize}};
  if (out_path.empty()) std::cout << out.dump(2) << '\n';
  else write_file(out_path, out.dump(2) + "\n");
  return 0;
}

int run_path_check_cmd(const std::string& schema_path, const std::string& train_path, const std::string& test_path,
                       const std::string& groups_flag, CLI::Option* o_groups, const std::string& out_path) {
  auto sf = load_schema_file(schema_path);
  ScalerKind scaler = sf.scaler.value_or(ScalerKind::ZScore);
  auto [train, test] = load_train_test(sf, train_path, test_path, scaler);
  std::vector<std::string> names =
      o_groups->count() ? split_list(groups_flag) : effective_path_groups(sf.schema, sf.domain);
  PathChecker paths(train.dataset, groups_by_name(*train.dataset.layout, names));
  json rows = json::array();
  std::size_t with = 0;
  for (std::size_t i = 0; i < test.dataset.size(); ++i) {
    auto row = test.dataset.matrix.row(static_cast<Eigen::Index>(i));
    bool ok = paths.has_path(std::span<const double>(row.data(), static_cast<std::size_t>(row.size())));
    with += ok ? 1 : 0;
    rows.push_back(json{{"row_id", test.dataset.row_ids[i]}, {"has_path", ok}});
  }
  double n = static_cast<double>(test.dataset.size());
  double frac = test.dataset.size() ? static_cast<double>(with) / n : 1.0;
  json out{{"schema_version", kReportSchemaVersion},
           {"config", json{{"path_groups", names}, {"scaler", to_string(scaler)}, {"na_token", sf.loader.na_token}}},
           {"n_samples", test.dataset.size()},
           {"fraction", frac},
           {"fraction_no_path", 1.0 - frac},
           {"rows", rows}};
  if (out_path.empty()) std::cout << out.dump(2) << '\n';
  else write_file(out_path, out.dump(2) + "\n");
  return 0;
}

int report_error(ErrorCode code, const std::string& message, std::optional<std::size_t> line = std::nullopt) {
  int rc = exit_code(code);
  json j{{"error", std::string(to_string(code))}, {"message", message}, {"exit_code", rc}};
  if (line) j["line"] = *line;
  std::cerr << j.dump() << '\n';
  return rc;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Convex-hull extrapolation audit for tabular data"};
  app.require_subcommand(1);

  SolveFlags audit_flags;
  std::string test_path, out_dir, cache_dir;
  bool csv_out = false, no_directions = false;
  auto* audit = app.add_subcommand("audit", "classify every test row and write records, summary and directions");
  add_solve_flags(audit, audit_flags);
  audit->add_option("--test", test_path, "test CSV")->required();
  audit->add_option("--out", out_dir, "output directory")->required();
  audit->add_flag("--csv", csv_out, "also write records.csv");
  audit->add_flag("--no-directions", no_directions, "skip the directions analysis");
  audit->add_option("--cache", cache_dir, "write encoded train/test matrices here");

  SolveFlags project_flags;
  std::string query;
  bool as_json = false;
  auto* project = app.add_subcommand("project", "project one query and explain the result");
  add_solve_flags(project, project_flags);
  project->add_option("--query", query, "json object or CSV row in schema order")->required();
  project->add_flag("--json", as_json, "print the record as json");

  std::string d_records, d_schema, d_train, d_scaler, d_krange, d_out;
  double d_energy = 0.95;
  std::uint64_t d_seed = 42;
  bool d_no_norm = false, d_no_path = false;
  auto* directions = app.add_subcommand("directions", "spectrum, redundancy and clusters of the displacement matrix");
  directions->add_option("--records", d_records, "records.jsonl from audit")->required();
  directions->add_option("--schema", d_schema, "schema YAML")->required();
  directions->add_option("--train", d_train, "training CSV (fixes the encoding)")->required();
  directions->add_option("--scaler", d_scaler, "zscore, minmax or none");
  directions->add_option("--k-range", d_krange, "cluster counts to try, e.g. 2-8");
  auto* o_energy = directions->add_option("--energy", d_energy, "energy threshold for dominant patterns");
  auto* o_dseed = directions->add_option("--seed", d_seed, "clustering seed");
  directions->add_flag("--no-normalize", d_no_norm, "cluster raw rows instead of unit rows");
  directions->add_flag("--include-no-path", d_no_path, "include OutsideNoPath rows");
  directions->add_option("--out", d_out, "output file (default stdout)");

  std::string p_schema, p_train, p_test, p_groups, p_out;
  auto* path = app.add_subcommand("path-check", "which test rows have a training row with the same path levels");
  path->add_option("--schema", p_schema, "schema YAML")->required();
  path->add_option("--train", p_train, "training CSV")->required();
  path->add_option("--test", p_test, "test CSV")->required();
  auto* o_groups = path->add_option("--groups", p_groups, "comma-separated groups (default: schema path_groups)");
  path->add_option("--out", p_out, "output file (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return report_error(ErrorCode::ConfigError, e.what());
  }

  try {
    if (*audit) return run_audit_cmd(audit_flags, test_path, out_dir, csv_out, no_directions, cache_dir);
    if (*project) return run_project_cmd(project_flags, query, as_json);
    if (*directions) {
      return run_directions_cmd(d_records, d_schema, d_train, d_scaler, d_krange, d_energy, o_energy, d_seed, o_dseed,
                                d_no_norm, d_no_path, d_out);
    }
    if (*path) return run_path_check_cmd(p_schema, p_train, p_test, p_groups, o_groups, p_out);
  } catch (const ParseError& e) {
    return report_error(e.code(), e.what(), e.line());
  } catch (const Error& e) {
    return report_error(e.code(), e.what());
  } catch (const fs::filesystem_error& e) {
    return report_error(ErrorCode::IoError, e.what());
  } catch (const std::exception& e) {
    return report_error(ErrorCode::NumericBreakdown, e.what());
  }
  return 0;
}
