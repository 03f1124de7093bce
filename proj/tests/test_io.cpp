#include <gtest/gtest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>

#include "fixtures.hpp"
#include "hullaudit/cache.hpp"

using namespace hullaudit;
using namespace fixtures;

namespace {

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorCode::NumericBreakdown;
}

std::filesystem::path temp_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("hullaudit_" + name + "_" + std::to_string(::getpid()));
  std::filesystem::create_directories(dir);
  return dir;
}

const char* kSchema = R"(
features:
  - {name: age, kind: integer, lower: 0, upper: 120}
  - {name: income, kind: continuous}
  - {name: sex, kind: categorical, levels: [F, M]}
  - {name: job, kind: categorical, levels: [a, b], missing_policy: as_level, missing_level: none}
  - {name: club, kind: categorical, levels: [x, y], optional: true}
target_column: label
domain:
  default_mode: relaxed_mixture
  group_modes: {sex: fixed_to_query}
  enforce_bounds: [age]
  path_groups: [sex]
csv: {na_token: "NA", delimiter: ";", id_column: id}
scaler: minmax
)";

}  // namespace

TEST(SchemaIo, ParsesEveryField) {
  auto sf = parse_schema_yaml(kSchema);
  ASSERT_EQ(sf.schema.features.size(), 5u);
  EXPECT_TRUE(sf.schema.features[0].is_integer());
  EXPECT_EQ(sf.schema.features[0].upper(), 120.0);
  EXPECT_EQ(sf.schema.features[3].effective_levels(), (std::vector<std::string>{"a", "b", "none"}));
  EXPECT_EQ(sf.schema.target_column, "label");
  EXPECT_EQ(sf.domain.mode_of("sex"), GroupMode::FixedToQuery);
  EXPECT_EQ(sf.domain.mode_of("job"), GroupMode::RelaxedMixture);
  EXPECT_TRUE(sf.domain.enforce_bounds.count("age"));
  EXPECT_EQ(sf.domain.path_groups, (std::vector<std::string>{"sex"}));
  EXPECT_EQ(sf.loader.na_token, "NA");
  EXPECT_EQ(sf.loader.delimiter, ';');
  EXPECT_EQ(sf.loader.id_column, "id");
  EXPECT_EQ(sf.scaler, ScalerKind::MinMax);
}

TEST(SchemaIo, RejectsBadFiles) {
  EXPECT_EQ(code_of([] { parse_schema_yaml("features: [{name: a, kind: continuous}]\nbogus: 1\n"); }), ErrorCode::SchemaError);
  EXPECT_EQ(code_of([] { parse_schema_yaml("features: [{name: a, kind: weird}]\n"); }), ErrorCode::SchemaError);
  EXPECT_EQ(code_of([] { parse_schema_yaml("features: [{name: a, kind: continuous, levels: [x]}]\n"); }),
            ErrorCode::SchemaError);
  EXPECT_EQ(code_of([] { parse_schema_yaml("features: [{name: a, kind: continuous}]\ndomain: {path_groups: [a]}\n"); }),
            ErrorCode::SchemaError);
  EXPECT_EQ(code_of([] { parse_schema_yaml("features: [\n"); }), ErrorCode::SchemaError);
  EXPECT_EQ(code_of([] { load_schema_file("/nonexistent/schema.yaml"); }), ErrorCode::IoError);
}

TEST(SchemaIo, JsonRoundTrip) {
  auto sf = parse_schema_yaml(kSchema);
  auto back = schema_from_json(to_json(sf.schema));
  EXPECT_EQ(to_json(back).dump(), to_json(sf.schema).dump());
}

TEST(SchemaIo, PresetsLoad) {
  auto adult = load_schema_file(std::string(HULLAUDIT_PRESETS) + "/adult.yaml");
  std::size_t width = 0;
  for (const auto& f : adult.schema.features) width += f.is_categorical() ? f.effective_levels().size() : 1;
  EXPECT_EQ(width, 104u);
  EXPECT_EQ(adult.loader.preset, "adult");
  auto fico = load_schema_file(std::string(HULLAUDIT_PRESETS) + "/fico.yaml");
  EXPECT_EQ(fico.schema.features.size(), 23u);
  EXPECT_FALSE(fico.domain.needs_discrete_solve());
}

TEST(AuditYaml, OverridesDefaults) {
  auto sf = parse_schema_yaml(kSchema);
  AuditConfig c;
  apply_audit_yaml(c, sf.domain, sf.schema,
                   "scaler: none\nalgorithm: dual\neps: 1e-4\nthreads: 3\nseed: 9\nmethod: homotopy\n"
                   "domain_modes: {all: discrete, club: relaxed}\nhomotopy_lambdas: [0, 1, 2]\n");
  EXPECT_EQ(c.scaler, ScalerKind::None);
  EXPECT_EQ(c.solver.algorithm, Algorithm::Dual);
  EXPECT_EQ(c.solver.membership_eps, 1e-4);
  EXPECT_EQ(c.threads, 3);
  EXPECT_EQ(c.clusters.seed, 9u);
  EXPECT_EQ(c.method, DiscreteMethod::Homotopy);
  EXPECT_EQ(sf.domain.mode_of("sex"), GroupMode::DiscreteExclusive);
  EXPECT_EQ(sf.domain.mode_of("club"), GroupMode::RelaxedMixture);
  EXPECT_EQ(c.schedule.lambdas, (std::vector<double>{0, 1, 2}));

  EXPECT_EQ(code_of([&] { apply_audit_yaml(c, sf.domain, sf.schema, "nope: 1\n"); }), ErrorCode::ConfigError);
  EXPECT_EQ(code_of([&] { apply_audit_yaml(c, sf.domain, sf.schema, "eps: abc\n"); }), ErrorCode::ConfigError);
  EXPECT_EQ(code_of([&] { apply_domain_mode(sf.domain, sf.schema, "age=fixed"); }), ErrorCode::ConfigError);
  EXPECT_EQ(code_of([&] { apply_domain_mode(sf.domain, sf.schema, "sex"); }), ErrorCode::ConfigError);
  EXPECT_EQ(code_of([&] { apply_domain_mode(sf.domain, sf.schema, "sex=sideways"); }), ErrorCode::ConfigError);
}

TEST(Ingest, CsvWithQuirks) {
  auto sf = parse_schema_yaml(kSchema);
  auto dir = temp_dir("ingest");
  {
    std::ofstream(dir / "train.csv") << "id;age;income;sex;job;club;label\n"
                                        "10;30;1000;F;a;x;0\n"
                                        "11;40;2000;M;NA;NA;1\n"
                                        "12;150;3000;M;b;y;1\n"   // out of bounds: dropped from training
                                        "13;50;NA;M;b;y;1\n"      // missing numeric: dropped
                                        "14;20;500;Q;b;y;0\n";    // unknown level: dropped
  }
  auto ds = load_dataset(sf.schema, &sf.domain, nullptr, (dir / "train.csv").string(), DatasetRole::Train, sf.loader,
                         ScalerKind::MinMax);
  EXPECT_EQ(ds.stats.rows_read, 5u);
  EXPECT_EQ(ds.stats.rows_kept, 2u);
  EXPECT_EQ(ds.stats.rows_out_of_bounds, 1u);
  EXPECT_EQ(ds.stats.rows_dropped_missing, 1u);
  EXPECT_EQ(ds.stats.rows_unknown_level, 1u);
  EXPECT_EQ(ds.stats.values_as_level, 1u);
  EXPECT_EQ(ds.dataset.row_ids, (std::vector<std::size_t>{10, 11}));
  // age, income, sex(2), job(3), club(2)
  EXPECT_EQ(ds.dataset.width(), 9u);
  EXPECT_EQ(std::get<std::string>(ds.rows[1].values[3]), "none");
  EXPECT_TRUE(std::holds_alternative<Missing>(ds.rows[1].values[4]));

  // Loading twice is bit-identical.
  auto again = load_dataset(sf.schema, &sf.domain, nullptr, (dir / "train.csv").string(), DatasetRole::Train,
                            sf.loader, ScalerKind::MinMax);
  EXPECT_EQ(0, std::memcmp(ds.dataset.matrix.data(), again.dataset.matrix.data(),
                           sizeof(double) * static_cast<std::size_t>(ds.dataset.matrix.size())));

  std::ofstream(dir / "bad.csv") << "id;age;income;sex;job;club;label\n1;x;1;F;a;x;0\n";
  try {
    load_dataset(sf.schema, &sf.domain, ds.dataset.layout, (dir / "bad.csv").string(), DatasetRole::Test, sf.loader,
                 ScalerKind::MinMax);
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
  std::ofstream(dir / "cols.csv") << "id;age\n1;2\n";
  EXPECT_EQ(code_of([&] {
              load_dataset(sf.schema, &sf.domain, ds.dataset.layout, (dir / "cols.csv").string(), DatasetRole::Test,
                           sf.loader, ScalerKind::MinMax);
            }),
            ErrorCode::SchemaMismatch);
  std::filesystem::remove_all(dir);
}

TEST(Cache, RoundTripIsBitExact) {
  std::mt19937_64 rng(3);
  MixedGenerator gen(rng, 3, 2);
  auto rows = gen.rows(rng, 25);
  auto ds = dataset_from_rows(gen.schema, rows, iota_ids(rows.size()), DatasetRole::Train, ScalerKind::ZScore, nullptr);
  auto dir = temp_dir("cache");
  auto path = (dir / "train.haud").string();
  write_cache(path, ds.dataset);
  auto back = read_cache(path);
  ASSERT_EQ(back.matrix.rows(), ds.dataset.matrix.rows());
  ASSERT_EQ(back.matrix.cols(), ds.dataset.matrix.cols());
  EXPECT_EQ(0, std::memcmp(back.matrix.data(), ds.dataset.matrix.data(),
                           sizeof(double) * static_cast<std::size_t>(back.matrix.size())));
  EXPECT_EQ(back.row_ids, ds.dataset.row_ids);
  for (std::size_t i = 0; i < ds.dataset.layout->numerics().size(); ++i) {
    EXPECT_EQ(back.layout->numerics()[i].offset, ds.dataset.layout->numerics()[i].offset);
    EXPECT_EQ(back.layout->numerics()[i].scale, ds.dataset.layout->numerics()[i].scale);
  }
  // The header is the magic followed by little-endian n and d.
  std::ifstream in(path, std::ios::binary);
  char head[21];
  in.read(head, 21);
  EXPECT_EQ(std::string(head, 5), "HAUD1");
  EXPECT_EQ(static_cast<unsigned char>(head[5]), 25u);
  EXPECT_EQ(static_cast<unsigned char>(head[13]), ds.dataset.width());

  std::ofstream(dir / "junk.haud", std::ios::binary) << "NOPE!";
  std::filesystem::copy_file(path + ".json", dir / "junk.haud.json");
  EXPECT_EQ(code_of([&] { read_cache((dir / "junk.haud").string()); }), ErrorCode::ParseError);
  EXPECT_EQ(code_of([&] { read_cache((dir / "missing.haud").string()); }), ErrorCode::IoError);
  std::filesystem::remove_all(dir);
}

TEST(Report, DecodedJsonEncodesBack) {
  std::mt19937_64 rng(4);
  MixedGenerator gen(rng, 2, 2);
  auto tt = load(gen.schema, gen.rows(rng, 12), gen.rows(rng, 10));
  AuditConfig c;
  c.threads = 1;
  c.directions = false;
  auto domain = DomainSpec::uniform(gen.schema, GroupMode::RelaxedMixture);
  auto res = run_audit(gen.schema, domain, tt.train, tt.test, c);
  const auto& layout = *tt.train.dataset.layout;
  for (std::size_t i = 0; i < res.records.size(); ++i) {
    auto j = json::parse(to_json(res.records[i]).dump());
    Eigen::VectorXd q = encode_decoded_json(layout, j["query"]);
    Eigen::VectorXd p = encode_decoded_json(layout, j["projection"]);
    EXPECT_LE((q - tt.test.dataset.matrix.row(static_cast<Eigen::Index>(i)).transpose()).norm(), 1e-12);
    EXPECT_LE((p - res.batch.items[i].result->point).norm(), 1e-9);
  }
}

TEST(Report, RowFromJson) {
  auto sf = parse_schema_yaml(kSchema);
  auto r = row_from_json(sf.schema, json::parse(R"({"age": 30, "income": "12.5", "sex": "F", "job": null})"));
  EXPECT_EQ(std::get<double>(r.values[0]), 30.0);
  EXPECT_EQ(std::get<double>(r.values[1]), 12.5);
  EXPECT_EQ(std::get<std::string>(r.values[2]), "F");
  EXPECT_TRUE(std::holds_alternative<Missing>(r.values[3]));
  EXPECT_TRUE(std::holds_alternative<Missing>(r.values[4]));
  EXPECT_EQ(code_of([&] { row_from_json(sf.schema, json::parse(R"({"height": 1})")); }), ErrorCode::SchemaMismatch);
  EXPECT_EQ(code_of([&] { row_from_json(sf.schema, json::parse(R"({"age": "old"})")); }), ErrorCode::ParseError);
  EXPECT_EQ(code_of([&] { row_from_json(sf.schema, json::parse(R"({"sex": 1})")); }), ErrorCode::ParseError);
}

TEST(Report, NarrativeAndCsv) {
  FeatureSchema schema;
  schema.features = {continuous("x"), categorical("g", {"a", "b"})};
  std::vector<Row> train{row({0.0, "a"}), row({2.0, "a"}), row({10.0, "b"})};
  std::vector<Row> test{row({1.0, "a"}), row({4.0, "a"})};
  auto tt = load(schema, train, test);
  AuditConfig c;
  c.threads = 1;
  c.directions = false;
  auto res = run_audit(schema, DomainSpec::uniform(schema), tt.train, tt.test, c);
  ASSERT_EQ(res.records[0].status, SampleStatus::Inside);
  ASSERT_EQ(res.records[1].status, SampleStatus::OutsidePath);
  EXPECT_NE(explain_sample(res.records[0], schema, false).find("interpolation; no deltas"), std::string::npos);
  auto story = explain_sample(res.records[1], schema, false);
  EXPECT_NE(story.find("OutsidePath"), std::string::npos) << story;
  EXPECT_NE(story.find("support (1 training samples"), std::string::npos) << story;
  const auto& d = res.records[1].deltas[0];
  EXPECT_NEAR(d.projection, 2.0, 1e-6);
  EXPECT_NEAR(d.delta, -2.0, 1e-6);
  EXPECT_NEAR(d.relative_change, 0.5, 1e-6);
  EXPECT_EQ(res.records[1].support.front().train_row_id, 1u);

  std::ostringstream os;
  write_csv(os, res.records, schema);
  auto table = csv::parse_string(os.str());
  EXPECT_EQ(table.rows.size(), 2u);
  EXPECT_NE(std::find(table.header.begin(), table.header.end(), "status"), table.header.end());

  std::ostringstream jl;
  write_jsonl(jl, res.records);
  std::istringstream in(jl.str());
  std::string line;
  int n = 0;
  while (std::getline(in, line)) {
    auto j = json::parse(line);
    EXPECT_EQ(j["schema_version"], kReportSchemaVersion);
    ++n;
  }
  EXPECT_EQ(n, 2);
}
