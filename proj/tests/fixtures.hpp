#pragma once

// Builders shared by the module tests.

#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "hullaudit/pipeline.hpp"

namespace fixtures {

using namespace hullaudit;

inline FeatureDecl categorical(const std::string& name, std::vector<std::string> levels, bool optional = false) {
  return FeatureDecl{name, CategoricalKind{std::move(levels), optional}};
}

inline FeatureDecl continuous(const std::string& name) { return FeatureDecl{name, ContinuousKind{}}; }

inline FeatureDecl integer(const std::string& name) { return FeatureDecl{name, IntegerKind{}}; }

inline Row row(std::initializer_list<Value> v) { return Row{std::vector<Value>(v)}; }

inline std::vector<std::size_t> iota_ids(std::size_t n) {
  std::vector<std::size_t> ids(n);
  std::iota(ids.begin(), ids.end(), 0);
  return ids;
}

struct TrainTest {
  LoadedDataset train;
  LoadedDataset test;
};

inline TrainTest load(const FeatureSchema& schema, const std::vector<Row>& train, const std::vector<Row>& test,
                      ScalerKind scaler = ScalerKind::ZScore) {
  TrainTest tt;
  tt.train = dataset_from_rows(schema, train, iota_ids(train.size()), DatasetRole::Train, scaler, nullptr);
  tt.test = dataset_from_rows(schema, test, iota_ids(test.size()), DatasetRole::Test, scaler, tt.train.dataset.layout);
  return tt;
}

/// Random mixed table: `numeric` Gaussian columns and groups of 2-3 levels.
struct MixedGenerator {
  FeatureSchema schema;
  std::vector<int> levels;
  int numeric = 0;

  MixedGenerator(std::mt19937_64& rng, int numeric_cols, int groups) : numeric(numeric_cols) {
    std::uniform_int_distribution<int> lc(2, 3);
    for (int i = 0; i < numeric; ++i) schema.features.push_back(continuous("x" + std::to_string(i)));
    for (int g = 0; g < groups; ++g) {
      levels.push_back(lc(rng));
      std::vector<std::string> names;
      for (int l = 0; l < levels.back(); ++l) names.push_back(std::string(1, static_cast<char>('a' + l)));
      schema.features.push_back(categorical("g" + std::to_string(g), names));
    }
  }

  Row operator()(std::mt19937_64& rng) const {
    std::normal_distribution<double> nd(0.0, 1.0);
    Row r;
    for (int i = 0; i < numeric; ++i) r.values.emplace_back(nd(rng));
    for (int l : levels) {
      int pick = std::uniform_int_distribution<int>(0, l - 1)(rng);
      r.values.emplace_back(std::string(1, static_cast<char>('a' + pick)));
    }
    return r;
  }

  std::vector<Row> rows(std::mt19937_64& rng, int n) const {
    std::vector<Row> out;
    for (int i = 0; i < n; ++i) out.push_back((*this)(rng));
    return out;
  }
};

}  // namespace fixtures
