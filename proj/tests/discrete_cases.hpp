#pragma once

// Random small mixed instances and a brute-force mixed solve over every
// profile tuple, shared by the discrete tests and the acceptance runner.

#include <limits>
#include <numeric>
#include <random>

#include "hullaudit/discrete_domain.hpp"
#include "oracles.hpp"

namespace discrete_cases {

using namespace hullaudit;

inline FeatureDecl categorical(const std::string& name, std::vector<std::string> levels, bool optional = false) {
  return FeatureDecl{name, CategoricalKind{std::move(levels), optional}};
}

inline FeatureDecl continuous(const std::string& name) { return FeatureDecl{name, ContinuousKind{}}; }

struct Fixture {
  FeatureSchema schema;
  DomainSpec domain;
  EncodedDataset train;
  std::vector<Row> queries;
  std::shared_ptr<const EncodingLayout> layout;

  Eigen::VectorXd encode(const Row& r) const { return layout->encode(r); }
};

inline Fixture build(FeatureSchema schema, const std::vector<Row>& rows, ScalerKind scaler = ScalerKind::ZScore) {
  Fixture f;
  f.schema = std::move(schema);
  std::vector<std::size_t> ids(rows.size());
  std::iota(ids.begin(), ids.end(), 0);
  auto loaded = dataset_from_rows(f.schema, rows, ids, DatasetRole::Train, scaler, nullptr);
  f.train = std::move(loaded.dataset);
  f.layout = f.train.layout;
  f.domain = DomainSpec::uniform(f.schema);
  return f;
}

inline Row row(std::initializer_list<Value> v) { return Row{std::vector<Value>(v)}; }

struct RandomCase {
  Fixture fx;
  Row query;
};

/// Small mixed instance: 1-2 numeric features, 1-3 groups of 2-3 levels
/// (sometimes optional), random group modes.
inline RandomCase random_case(std::mt19937_64& rng, int max_rows) {
  std::uniform_int_distribution<int> numeric_count(1, 2), group_count(1, 3), level_count(2, 3);
  std::uniform_int_distribution<int> row_count(2, max_rows), mode_pick(0, 2);
  std::bernoulli_distribution coin(0.25);
  std::normal_distribution<double> nd(0.0, 1.0);

  FeatureSchema schema;
  int m = numeric_count(rng);
  for (int i = 0; i < m; ++i) schema.features.push_back(continuous("x" + std::to_string(i)));
  int g = group_count(rng);
  std::vector<int> levels(static_cast<std::size_t>(g));
  std::vector<bool> optional(static_cast<std::size_t>(g));
  for (int j = 0; j < g; ++j) {
    levels[j] = level_count(rng);
    optional[j] = coin(rng);
    std::vector<std::string> names;
    for (int l = 0; l < levels[j]; ++l) names.push_back(std::string(1, static_cast<char>('a' + l)));
    schema.features.push_back(categorical("g" + std::to_string(j), names, optional[j]));
  }
  auto random_row = [&]() {
    Row r;
    for (int i = 0; i < m; ++i) r.values.emplace_back(nd(rng));
    for (int j = 0; j < g; ++j) {
      int top = levels[j] + (optional[j] ? 1 : 0);
      int l = std::uniform_int_distribution<int>(0, top - 1)(rng);
      if (l == levels[j]) r.values.emplace_back(Missing{});
      else r.values.emplace_back(std::string(1, static_cast<char>('a' + l)));
    }
    return r;
  };
  std::vector<Row> rows;
  int n = row_count(rng);
  for (int i = 0; i < n; ++i) rows.push_back(random_row());
  RandomCase rc{build(schema, rows), random_row()};
  const GroupMode modes[] = {GroupMode::RelaxedMixture, GroupMode::DiscreteExclusive, GroupMode::FixedToQuery};
  for (int j = 0; j < g; ++j) rc.fx.domain.group_modes["g" + std::to_string(j)] = modes[mode_pick(rng)];
  return rc;
}

/// Brute-force mixed solve: every profile tuple of the non-relaxed groups,
/// each as equality constraints on the projection's one-hot coordinates.
/// `prefilter` restricts supports to rows carrying that tuple.
inline double brute_force_distance2(const Fixture& fx, const Eigen::VectorXd& x, bool prefilter) {
  const auto& layout = *fx.layout;
  oracle::Matrix pts = fx.train.matrix;
  std::vector<std::size_t> restricted;
  std::vector<std::vector<int>> choices;
  for (std::size_t g = 0; g < layout.groups().size(); ++g) {
    const auto& span = layout.groups()[g];
    auto mode = fx.domain.mode_of(layout.schema().features[span.feature].name);
    if (mode == GroupMode::RelaxedMixture) continue;
    restricted.push_back(g);
    std::vector<int> opts;
    if (mode == GroupMode::FixedToQuery) {
      int q = -1;
      for (std::size_t k = 0; k < span.size; ++k) {
        if (x[static_cast<Eigen::Index>(span.begin + k)] == 1.0) q = static_cast<int>(k);
      }
      opts.push_back(q);
    } else {
      for (std::size_t k = 0; k < span.size; ++k) opts.push_back(static_cast<int>(k));
      if (span.optional) opts.push_back(-1);
    }
    choices.push_back(opts);
  }
  double best = std::numeric_limits<double>::infinity();
  std::vector<std::size_t> pick(restricted.size(), 0);
  while (true) {
    std::vector<int> cols;
    std::vector<double> vals;
    for (std::size_t r = 0; r < restricted.size(); ++r) {
      const auto& span = layout.groups()[restricted[r]];
      int level = choices[r][pick[r]];
      for (std::size_t k = 0; k < span.size; ++k) {
        cols.push_back(static_cast<int>(span.begin + k));
        vals.push_back(static_cast<int>(k) == level ? 1.0 : 0.0);
      }
    }
    std::vector<int> allowed;
    bool any = true;
    if (prefilter) {
      for (int i = 0; i < pts.rows(); ++i) {
        bool match = true;
        for (std::size_t c = 0; c < cols.size(); ++c) match = match && pts(i, cols[c]) == vals[c];
        if (match) allowed.push_back(i);
      }
      any = !allowed.empty();
    }
    if (any) best = std::min(best, oracle::constrained_hull_distance2(pts, x, cols, vals, allowed));
    std::size_t r = 0;
    while (r < pick.size() && ++pick[r] == choices[r].size()) pick[r++] = 0;
    if (r == pick.size()) break;
  }
  return best;
}


}  // namespace discrete_cases
