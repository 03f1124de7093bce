#include <gtest/gtest.h>

#include <iostream>
#include <random>

#include "discrete_cases.hpp"

using namespace hullaudit;
using namespace discrete_cases;

TEST(DiscreteDomain, DiscreteSexForcesSameLevelRow) {
  FeatureSchema schema;
  schema.features = {categorical("sex", {"F", "M"}), continuous("age")};
  auto fx = build(schema, {row({std::string("F"), 30.0}), row({std::string("M"), 50.0})}, ScalerKind::MinMax);
  auto q = fx.encode(row({std::string("F"), 50.0}));

  SolverConfig cfg;
  auto res = project_with_discrete(q, fx.train, fx.domain, cfg);
  EXPECT_NEAR(res.result.distance, 1.0, 1e-9);
  auto decoded = fx.layout->decode_row(std::span<const double>(res.result.point.data(), 3));
  EXPECT_EQ(decoded, row({std::string("F"), 30.0}));
  EXPECT_EQ(res.trace.winning_profile[0], 0);

  // Relaxed: the projection may mix the two rows.
  fx.domain.group_modes["sex"] = GroupMode::RelaxedMixture;
  auto relaxed = project_with_discrete(q, fx.train, fx.domain, cfg);
  EXPECT_LT(relaxed.result.distance, res.result.distance);
}

TEST(DiscreteDomain, FixedWithNoMatchingRowIsInfeasible) {
  FeatureSchema schema;
  schema.features = {categorical("sex", {"F", "M"}), continuous("age")};
  auto fx = build(schema, {row({std::string("F"), 30.0}), row({std::string("F"), 50.0})});
  fx.domain.group_modes["sex"] = GroupMode::FixedToQuery;
  auto q = fx.encode(row({std::string("M"), 40.0}));
  try {
    project_with_discrete(q, fx.train, fx.domain, SolverConfig{});
    FAIL() << "expected InfeasibleDomain";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::InfeasibleDomain);
  }
  EXPECT_THROW(homotopy_project(q, fx.train, fx.domain, SolverConfig{}), Error);
}

TEST(DiscreteDomain, FixedRequiresPureQueryBlock) {
  FeatureSchema schema;
  schema.features = {categorical("sex", {"F", "M"}), continuous("age")};
  auto fx = build(schema, {row({std::string("F"), 30.0}), row({std::string("M"), 50.0})});
  fx.domain.group_modes["sex"] = GroupMode::FixedToQuery;
  Eigen::VectorXd q = fx.encode(row({std::string("M"), 40.0}));
  auto block = fx.layout->groups()[0];
  q[static_cast<Eigen::Index>(block.begin)] = 0.5;
  q[static_cast<Eigen::Index>(block.begin + 1)] = 0.5;
  try {
    project_with_discrete(q, fx.train, fx.domain, SolverConfig{});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NonPureProfile);
  }
}

TEST(DiscreteDomain, OptionalGroupMayStayEmpty) {
  FeatureSchema schema;
  schema.features = {continuous("x"), categorical("tag", {"a", "b"}, true)};
  auto fx = build(schema, {row({0.0, Missing{}}), row({1.0, std::string("a")})}, ScalerKind::None);
  auto q = fx.encode(row({0.1, Missing{}}));
  auto res = project_with_discrete(q, fx.train, fx.domain, SolverConfig{});
  EXPECT_NEAR(res.result.distance, 0.1, 1e-9);
  EXPECT_EQ(res.trace.winning_profile[0], -1);
}

TEST(DiscreteDomain, ExactMatchesBruteForceMixedSolve) {
  std::mt19937_64 rng(7);
  SolverConfig cfg;
  cfg.tol_opt = 1e-12;
  int infeasible = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    auto rc = random_case(rng, 10);
    auto q = rc.fx.encode(rc.query);
    double expected = brute_force_distance2(rc.fx, q, true);
    if (!std::isfinite(expected)) {
      ++infeasible;
      EXPECT_THROW(project_with_discrete(q, rc.fx.train, rc.fx.domain, cfg), Error) << "trial " << trial;
      continue;
    }
    auto res = project_with_discrete(q, rc.fx.train, rc.fx.domain, cfg);
    if (std::abs(res.result.distance - std::sqrt(expected)) > 1e-6) {
      std::cerr << "train\n" << rc.fx.train.matrix << "\nquery " << q.transpose() << "\nmodes";
      for (auto& [k, v] : rc.fx.domain.group_modes) std::cerr << " " << k << "=" << to_string(v);
      std::cerr << "\nwin";
      for (int v : res.trace.winning_profile) std::cerr << " " << v;
      std::cerr << "\n" << res.result.point.transpose() << "\n";
    }
    ASSERT_NEAR(res.result.distance, std::sqrt(expected), 1e-6) << "trial " << trial;
  }
  EXPECT_LT(infeasible, 1000);
}

TEST(DiscreteDomain, NonMatchingRowsCannotCarryWeight) {
  // Without the prefilter the oracle searches every support; rows of other
  // profiles must never produce a feasible constrained point.
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 150; ++trial) {
    auto rc = random_case(rng, 7);
    auto q = rc.fx.encode(rc.query);
    double a = brute_force_distance2(rc.fx, q, true);
    double b = brute_force_distance2(rc.fx, q, false);
    if (!std::isfinite(a)) {
      EXPECT_FALSE(std::isfinite(b)) << "trial " << trial;
      continue;
    }
    ASSERT_NEAR(a, b, 1e-9) << "trial " << trial;
  }
}

TEST(DiscreteDomain, PruningDoesNotChangeTheAnswer) {
  std::mt19937_64 rng(3);
  std::size_t pruned = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    auto rc = random_case(rng, 30);
    auto q = rc.fx.encode(rc.query);
    DiscreteProjector proj(rc.fx.train, rc.fx.domain);
    try {
      auto a = proj.project(q, SolverConfig{}, DiscreteMethod::ExactEnumeration, {}, true);
      auto b = proj.project(q, SolverConfig{}, DiscreteMethod::ExactEnumeration, {}, false);
      ASSERT_NEAR(a.result.distance, b.result.distance, 1e-9) << "trial " << trial;
      EXPECT_EQ(a.trace.profiles_considered + a.trace.profiles_pruned, b.trace.profiles_considered);
      pruned += a.trace.profiles_pruned;
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::InfeasibleDomain);
    }
  }
  EXPECT_GT(pruned, 0u);
}

TEST(DiscreteDomain, DistanceGrowsWithRestriction) {
  // relaxed <= discrete <= fixed, and inside membership of a pure query does
  // not depend on the relaxation mode.
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 1000; ++trial) {
    auto rc = random_case(rng, 20);
    auto q = rc.fx.encode(rc.query);
    double prev = -1.0;
    MembershipStatus first{};
    bool have_first = false;
    for (auto mode : {GroupMode::RelaxedMixture, GroupMode::DiscreteExclusive, GroupMode::FixedToQuery}) {
      auto domain = DomainSpec::uniform(rc.fx.schema, mode);
      try {
        auto res = project_with_discrete(q, rc.fx.train, domain, SolverConfig{});
        ASSERT_GE(res.result.distance, prev - 1e-9) << "trial " << trial;
        prev = res.result.distance;
        if (!have_first) {
          first = res.result.status;
          have_first = true;
        } else if (first == MembershipStatus::Inside) {
          EXPECT_EQ(res.result.status, MembershipStatus::Inside) << "trial " << trial;
        }
      } catch (const Error& e) {
        ASSERT_EQ(mode, GroupMode::FixedToQuery);
        EXPECT_EQ(e.code(), ErrorCode::InfeasibleDomain);
      }
    }
  }
}

TEST(DiscreteDomain, HomotopyIsFeasibleAndNeverBeatsExact) {
  std::mt19937_64 rng(9);
  SolverConfig cfg;
  for (int trial = 0; trial < 1000; ++trial) {
    auto rc = random_case(rng, 20);
    auto q = rc.fx.encode(rc.query);
    DiscreteProjector proj(rc.fx.train, rc.fx.domain);
    DiscreteProjection exact, homo;
    try {
      exact = proj.project(q, cfg);
    } catch (const Error&) {
      EXPECT_THROW(proj.project(q, cfg, DiscreteMethod::Homotopy), Error);
      continue;
    }
    homo = proj.project(q, cfg, DiscreteMethod::Homotopy);
    EXPECT_GE(homo.result.distance, exact.result.distance - 1e-9) << "trial " << trial;
    EXPECT_LE(homo.trace.relaxed_distance, exact.result.distance + 1e-9);
    EXPECT_TRUE(homo.result.certified);
    // The result is a convex combination of rows sharing one present profile.
    std::vector<std::size_t> groups = proj.restricted_groups();
    if (groups.empty()) continue;
    auto key = profile_of(*rc.fx.layout, std::span<const double>(homo.result.point.data(), q.size()), groups);
    EXPECT_EQ(key, homo.trace.winning_profile);
  }
}

TEST(DiscreteDomain, PathCheckIgnoresNumericColumns) {
  FeatureSchema schema;
  schema.features = {continuous("x"), categorical("a", {"p", "q"}), categorical("b", {"u", "v"})};
  auto fx = build(schema, {row({0.0, std::string("p"), std::string("u")}), row({5.0, std::string("q"), std::string("v")})});
  PathChecker both(fx.train, {0, 1});
  PathChecker only_a(fx.train, {0});
  PathChecker none(fx.train, {});
  auto q = fx.encode(row({100.0, std::string("p"), std::string("v")}));
  std::span<const double> qs(q.data(), static_cast<std::size_t>(q.size()));
  EXPECT_FALSE(both.has_path(qs));
  EXPECT_TRUE(only_a.has_path(qs));
  EXPECT_TRUE(none.has_path(qs));
  EXPECT_TRUE(has_continuous_path(qs, fx.train, {1}));
  EXPECT_EQ(groups_by_name(*fx.layout, {"b", "a"}), (std::vector<std::size_t>{1, 0}));
  EXPECT_THROW(groups_by_name(*fx.layout, {"x"}), Error);
}

TEST(DiscreteDomain, ScheduleValidation) {
  HomotopySchedule s;
  EXPECT_NO_THROW(s.validate());
  s.lambdas = {0.0, 1.0, 0.5};
  EXPECT_THROW(s.validate(), Error);
  s.lambdas = {};
  EXPECT_THROW(s.validate(), Error);
}

TEST(DiscreteDomain, HomotopyCanMissTheExactOptimum) {
  // Found by randomized search. The query's numeric part is inside the hull
  // of the level-a rows, so switching level costs only the mismatch (sqrt 2).
  // The relaxation stays near the query's own level c, whose only row is
  // far away, and rounding keeps it there.
  FeatureSchema schema;
  schema.features = {continuous("x"), continuous("y"), categorical("c", {"a", "b", "c"})};
  std::vector<Row> rows = {
      row({-5.0, 1.0, std::string("a")}), row({1.0, -1.0, std::string("c")}), row({1.0, 0.0, std::string("b")}),
      row({3.0, -2.0, std::string("a")}), row({-1.0, 1.0, std::string("a")}), row({0.0, 4.0, std::string("b")}),
  };
  auto fx = build(schema, rows, ScalerKind::None);
  auto q = fx.encode(row({-2.0, 0.0, std::string("c")}));
  DiscreteProjector proj(fx.train, fx.domain);
  auto exact = proj.project(q, SolverConfig{});
  auto homo = proj.project(q, SolverConfig{}, DiscreteMethod::Homotopy);
  EXPECT_NEAR(exact.result.distance, std::sqrt(2.0), 1e-9);
  EXPECT_EQ(exact.trace.winning_profile[0], 0);
  EXPECT_NEAR(homo.result.distance, std::sqrt(10.0), 1e-9);
  EXPECT_EQ(homo.trace.winning_profile[0], 2);
}
