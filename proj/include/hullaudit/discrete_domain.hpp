#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <limits>
#include <numeric>
#include <optional>
#include <vector>

#include "hullaudit/hull_solver.hpp"
#include "hullaudit/ingest.hpp"
#include "hullaudit/schema.hpp"

namespace hullaudit {

enum class DiscreteMethod { ExactEnumeration, Homotopy };

inline std::string_view to_string(DiscreteMethod m) {
  return m == DiscreteMethod::ExactEnumeration ? "exact" : "homotopy";
}

inline DiscreteMethod parse_discrete_method(std::string_view s) {
  if (s == "exact") return DiscreteMethod::ExactEnumeration;
  if (s == "homotopy") return DiscreteMethod::Homotopy;
  throw Error(ErrorCode::ConfigError, "unknown method '" + std::string(s) + "'");
}

/// Increasing penalty weights for the integrality term; the first stage is
/// normally 0 (fully relaxed).
struct HomotopySchedule {
  std::vector<double> lambdas{0.0, 0.1, 1.0, 10.0, 100.0};
  int iterations_per_stage = 500;

  void validate() const {
    if (lambdas.empty()) throw Error(ErrorCode::ConfigError, "empty homotopy schedule");
    for (std::size_t i = 0; i < lambdas.size(); ++i) {
      if (!(lambdas[i] >= 0.0) || (i > 0 && !(lambdas[i] > lambdas[i - 1]))) {
        throw Error(ErrorCode::ConfigError, "homotopy schedule must be increasing and nonnegative");
      }
    }
  }
};

struct DiscreteSolveTrace {
  std::size_t profiles_considered = 0;
  std::size_t profiles_pruned = 0;
  CategoricalProfile winning_profile;
  /// Filled when verbose: (profile, distance) for every solved profile.
  std::vector<std::pair<CategoricalProfile, double>> profile_distances;
  /// Homotopy only: the rounded profile had no training rows, so the
  /// nearest present profile was used instead.
  bool rounded_profile_absent = false;
  /// Homotopy only: distance of the relaxed stage-0 solution.
  double relaxed_distance = 0.0;
  /// Set by callers that also ran the exact method: homotopy minus exact.
  std::optional<double> gap_to_exact;
};

struct DiscreteProjection {
  ProjectionResult result;
  DiscreteSolveTrace trace;
};

/// Answers "is there a training row with the query's levels on these
/// groups". Independent of numeric columns and of scaling.
class PathChecker {
 public:
  PathChecker(const EncodedDataset& train, std::vector<std::size_t> groups)
      : layout_(train.layout), index_(build_profile_index(*train.layout, train.matrix, std::move(groups))) {}

  /// Empty group set: vacuously true.
  bool has_path(std::span<const double> query) const {
    if (index_.groups.empty()) return true;
    return index_.find(profile_of(*layout_, query, index_.groups)) != nullptr;
  }

  const std::vector<std::size_t>& groups() const { return index_.groups; }

 private:
  std::shared_ptr<const EncodingLayout> layout_;
  ProfileIndex index_;
};

inline std::vector<std::size_t> groups_by_name(const EncodingLayout& layout, const std::vector<std::string>& names) {
  std::vector<std::size_t> out;
  for (const auto& n : names) {
    auto g = layout.group_by_name(n);
    if (!g) throw Error(ErrorCode::ConfigError, "'" + n + "' is not a categorical group");
    out.push_back(*g);
  }
  return out;
}

inline bool has_continuous_path(std::span<const double> query, const EncodedDataset& train,
                                const std::vector<std::size_t>& path_groups) {
  return PathChecker(train, path_groups).has_path(query);
}

/// Projection onto the hull intersected with a domain that has discrete or
/// fixed categorical groups.
///
/// With pure one-hot coordinates required on a group, every row carrying
/// positive weight must share the projection's level there, so the problem
/// splits into one continuous projection per training-present profile of
/// the restricted groups. Profiles are visited in ascending categorical
/// mismatch to the query; a profile is skipped once the squared distance
/// from the query to the bounding box of its rows (which includes the
/// mismatch) exceeds the incumbent.
class DiscreteProjector {
 public:
  DiscreteProjector(const EncodedDataset& train, const DomainSpec& domain) : train_(&train) {
    const auto& layout = *train.layout;
    domain.validate(layout.schema());
    const auto& spans = layout.groups();
    modes_.resize(spans.size());
    std::vector<char> restricted_col(layout.width(), 0);
    for (std::size_t g = 0; g < spans.size(); ++g) {
      modes_[g] = domain.mode_of(layout.schema().features[spans[g].feature].name);
      if (modes_[g] != GroupMode::RelaxedMixture) {
        restricted_.push_back(g);
        for (std::size_t c = 0; c < spans[g].size; ++c) restricted_col[spans[g].begin + c] = 1;
        if (modes_[g] == GroupMode::DiscreteExclusive) {
          for (std::size_t c = 0; c < spans[g].size; ++c) discrete_cols_.push_back(spans[g].begin + c);
        }
      }
    }
    for (std::size_t c = 0; c < layout.width(); ++c) {
      if (!restricted_col[c]) free_cols_.push_back(c);
    }
    ProfileIndex index;
    if (restricted_.empty()) {
      // One profile holding every row (an empty group list means "all groups" to the index).
      auto& all = index.rows[CategoricalProfile(spans.size(), kWildcard)];
      all.resize(train.size());
      std::iota(all.begin(), all.end(), 0);
    } else {
      index = build_profile_index(layout, train.matrix, restricted_);
    }
    for (auto& [key, rows] : index.rows) {
      ProfileEntry e;
      e.key = key;
      e.rows = std::move(rows);
      e.lo = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(free_cols_.size()), std::numeric_limits<double>::infinity());
      e.hi = -e.lo;
      for (auto r : e.rows) {
        for (std::size_t k = 0; k < free_cols_.size(); ++k) {
          double v = train.matrix(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(free_cols_[k]));
          e.lo[static_cast<Eigen::Index>(k)] = std::min(e.lo[static_cast<Eigen::Index>(k)], v);
          e.hi[static_cast<Eigen::Index>(k)] = std::max(e.hi[static_cast<Eigen::Index>(k)], v);
        }
      }
      profiles_.push_back(std::move(e));
    }
    all_rows_.resize(train.size());
    std::iota(all_rows_.begin(), all_rows_.end(), 0);
  }

  const std::vector<std::size_t>& restricted_groups() const { return restricted_; }
  std::size_t profile_count() const { return profiles_.size(); }

  DiscreteProjection project(const Eigen::VectorXd& query, const SolverConfig& config,
                             DiscreteMethod method = DiscreteMethod::ExactEnumeration,
                             const HomotopySchedule& schedule = {}, bool prune = true, bool verbose = false) const {
    if (query.size() != static_cast<Eigen::Index>(train_->width())) {
      throw Error(ErrorCode::DimensionMismatch, "query width does not match the training layout");
    }
    if (method == DiscreteMethod::Homotopy) return homotopy(query, config, schedule);
    return exact(query, config, prune, verbose);
  }

 private:
  struct ProfileEntry {
    CategoricalProfile key;
    std::vector<std::size_t> rows;
    Eigen::VectorXd lo;
    Eigen::VectorXd hi;
  };

  struct Candidate {
    std::size_t profile;
    double mismatch;
    double bound;
  };

  /// Squared distance between the query's block and a pure block (level -1 = empty).
  double block_cost(const Eigen::VectorXd& q, std::size_t g, int level) const {
    const auto& span = train_->layout->groups()[g];
    double c = 0.0;
    for (std::size_t k = 0; k < span.size; ++k) {
      double target = static_cast<int>(k) == level ? 1.0 : 0.0;
      double diff = q[static_cast<Eigen::Index>(span.begin + k)] - target;
      c += diff * diff;
    }
    return c;
  }

  /// Levels of the query on FixedToQuery groups (NonPureProfile if fractional).
  CategoricalProfile fixed_levels(const Eigen::VectorXd& query) const {
    CategoricalProfile fixed(modes_.size(), kWildcard);
    std::vector<std::size_t> fixed_groups;
    for (auto g : restricted_) {
      if (modes_[g] == GroupMode::FixedToQuery) fixed_groups.push_back(g);
    }
    if (fixed_groups.empty()) return fixed;
    std::span<const double> qs(query.data(), static_cast<std::size_t>(query.size()));
    return profile_of(*train_->layout, qs, fixed_groups);
  }

  std::vector<Candidate> candidates(const Eigen::VectorXd& query) const {
    auto fixed = fixed_levels(query);
    std::vector<Candidate> out;
    for (std::size_t p = 0; p < profiles_.size(); ++p) {
      const auto& e = profiles_[p];
      bool admissible = true;
      double mismatch = 0.0;
      for (auto g : restricted_) {
        if (modes_[g] == GroupMode::FixedToQuery && e.key[g] != fixed[g]) {
          admissible = false;
          break;
        }
        mismatch += block_cost(query, g, e.key[g]);
      }
      if (!admissible) continue;
      double box = 0.0;
      for (std::size_t k = 0; k < free_cols_.size(); ++k) {
        double v = query[static_cast<Eigen::Index>(free_cols_[k])];
        double lo = e.lo[static_cast<Eigen::Index>(k)];
        double hi = e.hi[static_cast<Eigen::Index>(k)];
        double diff = v < lo ? lo - v : (v > hi ? v - hi : 0.0);
        box += diff * diff;
      }
      out.push_back({p, mismatch, mismatch + box});
    }
    std::sort(out.begin(), out.end(), [&](const Candidate& a, const Candidate& b) {
      if (a.mismatch != b.mismatch) return a.mismatch < b.mismatch;
      if (a.bound != b.bound) return a.bound < b.bound;
      return a.profile < b.profile;
    });
    return out;
  }

  ProjectionResult solve_rows(const Eigen::VectorXd& query, std::span<const std::size_t> rows,
                              const SolverConfig& config) const {
    ProjectionProblem prob;
    prob.query = query;
    prob.data = &train_->matrix;
    prob.rows = rows;
    prob.config = config;
    prob.layout = train_->layout.get();
    return project_continuous(prob);
  }

  DiscreteProjection exact(const Eigen::VectorXd& query, const SolverConfig& config, bool prune, bool verbose) const {
    auto cands = candidates(query);
    if (cands.empty()) {
      throw Error(ErrorCode::InfeasibleDomain, "no training profile is admitted by the domain for this query");
    }
    DiscreteProjection best;
    double incumbent2 = std::numeric_limits<double>::infinity();
    bool have = false;
    for (const auto& c : cands) {
      if (prune && have && c.bound > incumbent2) {
        ++best.trace.profiles_pruned;
        continue;
      }
      ++best.trace.profiles_considered;
      const auto& e = profiles_[c.profile];
      auto res = solve_rows(query, e.rows, config);
      if (verbose) best.trace.profile_distances.emplace_back(e.key, res.distance);
      double d2 = res.distance * res.distance;
      if (!have || d2 < incumbent2) {
        incumbent2 = d2;
        best.result = std::move(res);
        best.trace.winning_profile = e.key;
        have = true;
      }
    }
    return best;
  }

  /// Rows admitted by FixedToQuery groups (all rows when there are none).
  std::vector<std::size_t> fixed_rows(const Eigen::VectorXd& query) const {
    auto fixed = fixed_levels(query);
    bool any_fixed = std::any_of(fixed.begin(), fixed.end(), [](int v) { return v != kWildcard; });
    if (!any_fixed) return all_rows_;
    std::vector<std::size_t> rows;
    for (const auto& e : profiles_) {
      bool ok = true;
      for (auto g : restricted_) {
        if (modes_[g] == GroupMode::FixedToQuery && e.key[g] != fixed[g]) ok = false;
      }
      if (ok) rows.insert(rows.end(), e.rows.begin(), e.rows.end());
    }
    std::sort(rows.begin(), rows.end());
    return rows;
  }

  /// Relax, then raise an integrality penalty lambda * sum z_j (1 - z_j) over
  /// the discrete coordinates in stages, round each group to its heaviest
  /// level and certify with a fixed-profile continuous solve.
  DiscreteProjection homotopy(const Eigen::VectorXd& query, const SolverConfig& config,
                              const HomotopySchedule& schedule) const {
    schedule.validate();
    auto rows = fixed_rows(query);
    if (rows.empty()) throw Error(ErrorCode::InfeasibleDomain, "no training row matches the fixed groups");

    DiscreteProjection out;
    auto relaxed = solve_rows(query, rows, config);
    out.trace.relaxed_distance = relaxed.distance;
    if (discrete_cols_.empty()) {
      // Nothing discrete to impose beyond the fixed groups.
      out.result = std::move(relaxed);
      out.trace.profiles_considered = 1;
      out.trace.winning_profile = fixed_levels(query);
      return out;
    }

    simplex::RowSet set{&train_->matrix, rows};
    std::vector<std::size_t> local(train_->size(), static_cast<std::size_t>(-1));
    for (std::size_t i = 0; i < rows.size(); ++i) local[rows[i]] = i;
    Eigen::VectorXd alpha = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(rows.size()));
    for (const auto& [row, w] : relaxed.weights) alpha[static_cast<Eigen::Index>(local[row])] = w;

    Eigen::VectorXd mask = Eigen::VectorXd::Zero(query.size());
    for (auto c : discrete_cols_) mask[static_cast<Eigen::Index>(c)] = 1.0;
    auto objective = [&](const Eigen::VectorXd& z, double lambda) {
      double pen = (mask.array() * z.array() * (1.0 - z.array())).sum();
      return 0.5 * (z - query).squaredNorm() + lambda * pen;
    };

    Eigen::VectorXd z = set.combine(alpha);
    for (double lambda : schedule.lambdas) {
      if (lambda == 0.0) continue;
      double f = objective(z, lambda);
      double step = 1.0;
      for (int it = 0; it < schedule.iterations_per_stage; ++it) {
        Eigen::VectorXd gz = (z - query).array() + lambda * mask.array() * (1.0 - 2.0 * z.array());
        Eigen::VectorXd g = set.dots(gz);
        bool moved = false;
        for (int ls = 0; ls < 40; ++ls) {
          Eigen::VectorXd trial = simplex::project(alpha - step * g);
          Eigen::VectorXd zt = set.combine(trial);
          double ft = objective(zt, lambda);
          if (ft <= f + 1e-4 * g.dot(trial - alpha)) {
            moved = (trial - alpha).lpNorm<Eigen::Infinity>() > 1e-13;
            alpha = std::move(trial);
            z = std::move(zt);
            f = ft;
            step *= 2.0;
            break;
          }
          step *= 0.5;
        }
        if (!moved) break;
      }
    }

    // Round every discrete group to its heaviest level (or to empty, for an
    // optional group whose mass is below one half).
    const auto& spans = train_->layout->groups();
    CategoricalProfile target = fixed_levels(query);
    for (auto g : restricted_) {
      if (modes_[g] != GroupMode::DiscreteExclusive) continue;
      const auto& span = spans[g];
      Eigen::Index best = 0;
      z.segment(static_cast<Eigen::Index>(span.begin), static_cast<Eigen::Index>(span.size)).maxCoeff(&best);
      double mass = z.segment(static_cast<Eigen::Index>(span.begin), static_cast<Eigen::Index>(span.size)).sum();
      target[g] = span.optional && mass < 0.5 ? -1 : static_cast<int>(best);
    }

    const ProfileEntry* chosen = nullptr;
    for (const auto& e : profiles_) {
      if (e.key == target) chosen = &e;
    }
    if (!chosen) {
      // Nearest present profile to the rounded one, ties by distance bound.
      out.trace.rounded_profile_absent = true;
      auto cands = candidates(z);
      double best_key = std::numeric_limits<double>::infinity();
      for (const auto& c : cands) {
        const auto& e = profiles_[c.profile];
        double diff = 0.0;
        for (auto g : restricted_) diff += e.key[g] != target[g] ? 1.0 : 0.0;
        if (diff < best_key) {
          best_key = diff;
          chosen = &e;
        }
      }
    }
    out.trace.profiles_considered = 1;
    out.trace.winning_profile = chosen->key;
    out.result = solve_rows(query, chosen->rows, config);
    return out;
  }

  const EncodedDataset* train_;
  std::vector<GroupMode> modes_;
  std::vector<std::size_t> restricted_;
  std::vector<std::size_t> discrete_cols_;
  std::vector<std::size_t> free_cols_;
  std::vector<ProfileEntry> profiles_;
  std::vector<std::size_t> all_rows_;
};

/// One-shot form of DiscreteProjector::project. When no group is discrete
/// or fixed this is project_continuous over every training row.
inline DiscreteProjection project_with_discrete(const Eigen::VectorXd& query, const EncodedDataset& train,
                                                const DomainSpec& domain, const SolverConfig& config,
                                                DiscreteMethod method = DiscreteMethod::ExactEnumeration,
                                                const HomotopySchedule& schedule = {}) {
  DiscreteProjector projector(train, domain);
  return projector.project(query, config, method, schedule);
}

inline DiscreteProjection homotopy_project(const Eigen::VectorXd& query, const EncodedDataset& train,
                                           const DomainSpec& domain, const SolverConfig& config,
                                           const HomotopySchedule& schedule = {}) {
  return project_with_discrete(query, train, domain, config, DiscreteMethod::Homotopy, schedule);
}

}  // namespace hullaudit
