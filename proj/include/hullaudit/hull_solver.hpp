#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "hullaudit/error.hpp"
#include "hullaudit/schema.hpp"
#include "hullaudit/simplex.hpp"

namespace hullaudit {

enum class Algorithm {
  /// Active-set gradient projection: Cauchy point, then CG on the free face.
  GradientProjection,
  /// Frank-Wolfe with away steps.
  FrankWolfe,
  /// Constraint generation on the dual (d+1 variables, one cut per row).
  Dual,
  /// Dual when n >> d, gradient projection otherwise.
  Auto,
};

inline std::string_view to_string(Algorithm a) {
  switch (a) {
    case Algorithm::GradientProjection: return "gradient_projection";
    case Algorithm::FrankWolfe: return "frank_wolfe";
    case Algorithm::Dual: return "dual";
    case Algorithm::Auto: return "auto";
  }
  return "?";
}

inline Algorithm parse_algorithm(std::string_view s) {
  if (s == "gradient_projection" || s == "gp") return Algorithm::GradientProjection;
  if (s == "frank_wolfe" || s == "fw") return Algorithm::FrankWolfe;
  if (s == "dual") return Algorithm::Dual;
  if (s == "auto") return Algorithm::Auto;
  throw Error(ErrorCode::ConfigError, "unknown algorithm '" + std::string(s) + "'");
}

struct SolverConfig {
  Algorithm algorithm = Algorithm::Auto;
  /// Bound on the variational-inequality residual max_i (x - xh).(D_i - xh).
  double tol_opt = 1e-8;
  /// Bound on |sum alpha - 1|.
  double tol_feas = 1e-10;
  int max_iter = 10000;
  /// Scaled-space distance at or below which a query counts as inside.
  double membership_eps = 1e-6;
  /// Start from the nearest training row instead of the first one.
  bool warm_start_nearest = true;

  void validate() const {
    if (!(tol_opt > 0) || !(tol_feas > 0) || !(membership_eps > 0)) {
      throw Error(ErrorCode::ConfigError, "solver tolerances must be positive");
    }
    if (max_iter <= 0) throw Error(ErrorCode::ConfigError, "max_iter must be positive");
  }
};

enum class MembershipStatus { Inside, Outside };

struct ProjectionResult {
  Eigen::VectorXd point;
  /// (row index into the dataset matrix, weight), ascending by row, weights > 0.
  std::vector<std::pair<std::size_t, double>> weights;
  double distance = 0.0;
  double raw_distance = 0.0;
  MembershipStatus status = MembershipStatus::Outside;
  int iterations = 0;
  /// max_i (x - xh).(D_i - xh) over the candidate rows.
  double certificate = 0.0;
  /// Certificate within tol_opt and membership decided; false when the
  /// iteration budget ran out (MaxIterExceeded).
  bool certified = false;
  /// The support rows are affinely dependent, so other optimal weights exist.
  bool weights_non_unique = false;
  Algorithm algorithm = Algorithm::GradientProjection;
};

/// Query plus a row subset of a dataset matrix.
struct ProjectionProblem {
  Eigen::VectorXd query;
  const RowMatrix* data = nullptr;
  std::span<const std::size_t> rows;
  SolverConfig config;
  /// When set, raw_distance is measured in unscaled units.
  const EncodingLayout* layout = nullptr;

  void validate() const {
    if (!data) throw Error(ErrorCode::DimensionMismatch, "projection problem has no data");
    if (rows.empty()) throw Error(ErrorCode::EmptyTrainingSet, "projection onto an empty row set");
    if (query.size() != data->cols()) {
      throw Error(ErrorCode::DimensionMismatch, "query has length " + std::to_string(query.size()) +
                                                    ", data has " + std::to_string(data->cols()) + " columns");
    }
    if (!query.allFinite()) throw Error(ErrorCode::NumericBreakdown, "query has non-finite entries");
    config.validate();
  }
};

/// Distance between two encoded points with numeric columns unscaled.
inline double raw_distance(const EncodingLayout& layout, const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  Eigen::VectorXd diff = a - b;
  for (const auto& nc : layout.numerics()) diff[static_cast<Eigen::Index>(nc.column)] *= nc.scale;
  return diff.norm();
}

namespace detail {

/// State shared by the algorithms: weights over the subset rows and the
/// induced point.
struct HullState {
  simplex::RowSet set;
  Eigen::VectorXd x;
  Eigen::VectorXd alpha;
  Eigen::VectorXd z;

  double objective() const { return 0.5 * (z - x).squaredNorm(); }
  void refresh() { z = set.combine(alpha); }
};

inline std::size_t nearest_row(const simplex::RowSet& set, const Eigen::VectorXd& x) {
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < set.size(); ++i) {
    double dd = (set.row(i).transpose() - x).squaredNorm();
    if (dd < best_d) {
      best_d = dd;
      best = i;
    }
  }
  return best;
}

inline void init_state(HullState& s, const ProjectionProblem& p) {
  s.set = simplex::RowSet{p.data, p.rows};
  s.x = p.query;
  s.alpha = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(p.rows.size()));
  std::size_t start = p.config.warm_start_nearest ? nearest_row(s.set, s.x) : 0;
  s.alpha[static_cast<Eigen::Index>(start)] = 1.0;
  s.refresh();
}

/// Frank-Wolfe gap alpha.g - min g. Equals max_i (x - z).(D_i - z) when
/// g = D (z - x).
inline double gap_of(const Eigen::VectorXd& alpha, const Eigen::VectorXd& g) {
  return alpha.dot(g) - g.minCoeff();
}

/// Whether iteration may stop: the certificate is within tolerance, the
/// membership status is decided (the distance lower bound implied by the
/// gap clears eps, or the point is already within eps), and the gap is
/// small relative to the objective so distances agree across algorithms.
inline bool can_stop(double f, double gap, const SolverConfig& cfg, double scale) {
  if (gap > cfg.tol_opt) return false;
  const double eps2 = cfg.membership_eps * cfg.membership_eps;
  bool decided = 2.0 * f <= eps2 || 2.0 * (f - gap) > eps2;
  if (!decided) return false;
  return gap <= std::max(1e-6 * f, 1e-15 * scale);
}

inline double problem_scale(const simplex::RowSet& set, const Eigen::VectorXd& x) {
  double m = x.squaredNorm();
  for (std::size_t i = 0; i < set.size(); ++i) m = std::max(m, set.row(i).squaredNorm());
  return 1.0 + m;
}

inline void clean_weights(Eigen::VectorXd& alpha) {
  for (Eigen::Index i = 0; i < alpha.size(); ++i) {
    if (alpha[i] < 0.0) alpha[i] = 0.0;
  }
  double sum = alpha.sum();
  if (!(sum > 0.0)) throw Error(ErrorCode::NumericBreakdown, "weights collapsed to zero");
  alpha /= sum;
}

inline bool affinely_dependent(const simplex::RowSet& set, const std::vector<std::size_t>& support) {
  if (support.size() <= 1) return false;
  if (support.size() - 1 > static_cast<std::size_t>(set.dim())) return true;
  Eigen::MatrixXd e(set.dim(), static_cast<Eigen::Index>(support.size() - 1));
  for (std::size_t j = 1; j < support.size(); ++j) {
    e.col(static_cast<Eigen::Index>(j - 1)) = (set.row(support[j]) - set.row(support[0])).transpose();
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(e);
  qr.setThreshold(1e-10);
  return qr.rank() < static_cast<Eigen::Index>(support.size() - 1);
}

inline ProjectionResult finish(HullState& s, const ProjectionProblem& p, int iterations, Algorithm algo) {
  clean_weights(s.alpha);
  s.refresh();
  ProjectionResult res;
  res.algorithm = algo;
  res.iterations = iterations;
  res.point = s.z;
  Eigen::VectorXd r = s.z - s.x;
  res.distance = r.norm();
  res.raw_distance = p.layout ? raw_distance(*p.layout, s.z, s.x) : res.distance;
  Eigen::VectorXd g = s.set.dots(r);
  res.certificate = gap_of(s.alpha, g);
  double f = 0.5 * r.squaredNorm();
  const double eps2 = p.config.membership_eps * p.config.membership_eps;
  bool decided = 2.0 * f <= eps2 || 2.0 * (f - res.certificate) > eps2;
  res.certified = res.certificate <= p.config.tol_opt && decided;
  res.status = res.distance <= p.config.membership_eps ? MembershipStatus::Inside : MembershipStatus::Outside;
  std::vector<std::size_t> support;
  for (std::size_t i = 0; i < s.set.size(); ++i) {
    double w = s.alpha[static_cast<Eigen::Index>(i)];
    if (w > 0.0) {
      support.push_back(i);
      res.weights.emplace_back(p.rows[i], w);
    }
  }
  std::sort(res.weights.begin(), res.weights.end());
  res.weights_non_unique = affinely_dependent(s.set, support);
  return res;
}

/// Gradient projection over the simplex of weights. Each iteration takes a
/// projected search step along P(alpha - t g) (the Cauchy point) and then
/// minimizes over the face of rows left positive with projected conjugate
/// gradients, truncating at the first weight that reaches zero.
inline ProjectionResult gradient_projection(const ProjectionProblem& p) {
  HullState s;
  init_state(s, p);
  const double scale = problem_scale(s.set, s.x);
  const auto m = static_cast<Eigen::Index>(s.set.size());
  const Eigen::Index d = s.set.dim();
  int it = 0;
  for (; it < p.config.max_iter; ++it) {
    Eigen::VectorXd r = s.z - s.x;
    double f = 0.5 * r.squaredNorm();
    Eigen::VectorXd g = s.set.dots(r);
    double gap = gap_of(s.alpha, g);
    if (can_stop(f, gap, p.config, scale)) break;
    if (!std::isfinite(f) || !std::isfinite(gap)) throw Error(ErrorCode::NumericBreakdown, "non-finite iterate");

    // Cauchy point by projected search.
    Eigen::VectorXd gc = g.array() - g.mean();
    Eigen::VectorXd wdir = s.set.combine(gc);
    double curv = wdir.squaredNorm();
    double t = curv > 0.0 ? gc.squaredNorm() / curv : 1.0;
    if (!(t > 0.0) || !std::isfinite(t)) t = 1.0;
    Eigen::VectorXd best_alpha = s.alpha;
    double best_f = f;
    bool accepted = false;
    for (int ls = 0; ls < 60; ++ls) {
      Eigen::VectorXd trial = simplex::project(s.alpha - t * g);
      Eigen::VectorXd zt = s.set.combine(trial);
      double ft = 0.5 * (zt - s.x).squaredNorm();
      if (ft <= f + 1e-4 * g.dot(trial - s.alpha)) {
        best_alpha = std::move(trial);
        best_f = ft;
        accepted = true;
        // Extrapolate while the projected path keeps descending.
        for (int ex = 0; ex < 20; ++ex) {
          t *= 2.0;
          Eigen::VectorXd further = simplex::project(s.alpha - t * g);
          double ff = 0.5 * (s.set.combine(further) - s.x).squaredNorm();
          if (ff >= best_f) break;
          best_alpha = std::move(further);
          best_f = ff;
        }
        break;
      }
      t *= 0.25;
    }
    if (accepted) {
      s.alpha = std::move(best_alpha);
      s.refresh();
    }

    // Subspace minimization on the free face.
    std::vector<Eigen::Index> free;
    for (Eigen::Index i = 0; i < m; ++i) {
      if (s.alpha[i] > 0.0) free.push_back(i);
    }
    const auto nf = static_cast<Eigen::Index>(free.size());
    if (nf >= 2) {
      auto face_combine = [&](const Eigen::VectorXd& v) {
        Eigen::VectorXd out = Eigen::VectorXd::Zero(d);
        for (Eigen::Index j = 0; j < nf; ++j) {
          if (v[j] != 0.0) out.noalias() += v[j] * s.set.row(static_cast<std::size_t>(free[j])).transpose();
        }
        return out;
      };
      auto face_dots = [&](const Eigen::VectorXd& w) {
        Eigen::VectorXd out(nf);
        for (Eigen::Index j = 0; j < nf; ++j) out[j] = s.set.row(static_cast<std::size_t>(free[j])).dot(w);
        return out;
      };
      Eigen::VectorXd rf = face_dots(s.z - s.x);
      Eigen::VectorXd res = -(rf.array() - rf.mean()).matrix();
      Eigen::VectorXd dir = res;
      double rr = res.squaredNorm();
      const double rr0 = rr;
      const Eigen::Index cg_cap = std::min<Eigen::Index>(nf, d + 2) + 3;
      for (Eigen::Index k = 0; k < cg_cap && rr > 1e-30 * (1.0 + rr0); ++k) {
        Eigen::VectorXd w = face_combine(dir);
        double pc = w.squaredNorm();
        if (!(pc > 1e-300)) break;
        double step = rr / pc;
        double max_step = std::numeric_limits<double>::infinity();
        Eigen::Index blocking = -1;
        for (Eigen::Index j = 0; j < nf; ++j) {
          if (dir[j] < 0.0) {
            double lim = -s.alpha[free[j]] / dir[j];
            if (lim < max_step) {
              max_step = lim;
              blocking = j;
            }
          }
        }
        bool hit = step >= max_step;
        if (hit) step = max_step;
        for (Eigen::Index j = 0; j < nf; ++j) s.alpha[free[j]] += step * dir[j];
        s.z.noalias() += step * w;
        if (hit) {
          s.alpha[free[blocking]] = 0.0;
          break;
        }
        Eigen::VectorXd hw = face_dots(w);
        res -= step * (hw.array() - hw.mean()).matrix();
        double rr_new = res.squaredNorm();
        dir = res + (rr_new / rr) * dir;
        rr = rr_new;
      }
      clean_weights(s.alpha);
      s.refresh();
    }
  }
  return finish(s, p, it, Algorithm::GradientProjection);
}

/// Frank-Wolfe with away steps and exact line search.
inline ProjectionResult frank_wolfe(const ProjectionProblem& p) {
  HullState s;
  init_state(s, p);
  const double scale = problem_scale(s.set, s.x);
  const auto m = static_cast<Eigen::Index>(s.set.size());
  int it = 0;
  for (; it < p.config.max_iter; ++it) {
    Eigen::VectorXd r = s.z - s.x;
    double f = 0.5 * r.squaredNorm();
    Eigen::VectorXd g = s.set.dots(r);
    Eigen::Index toward = 0;
    double gmin = g.minCoeff(&toward);
    double ag = s.alpha.dot(g);
    double gap = ag - gmin;
    if (can_stop(f, gap, p.config, scale)) break;
    if (!std::isfinite(gap)) throw Error(ErrorCode::NumericBreakdown, "non-finite iterate");

    Eigen::Index away = -1;
    double gmax = -std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < m; ++i) {
      if (s.alpha[i] > 0.0 && g[i] > gmax) {
        gmax = g[i];
        away = i;
      }
    }
    Eigen::VectorXd wdir;
    double gamma_max;
    bool fw_step = gap >= gmax - ag || away < 0 || s.alpha[away] >= 1.0;
    if (fw_step) {
      wdir = s.set.row(static_cast<std::size_t>(toward)).transpose() - s.z;
      gamma_max = 1.0;
    } else {
      wdir = s.z - s.set.row(static_cast<std::size_t>(away)).transpose();
      gamma_max = s.alpha[away] / (1.0 - s.alpha[away]);
    }
    double ww = wdir.squaredNorm();
    if (!(ww > 0.0)) break;
    double gamma = std::clamp(-r.dot(wdir) / ww, 0.0, gamma_max);
    if (fw_step) {
      s.alpha *= (1.0 - gamma);
      s.alpha[toward] += gamma;
    } else {
      s.alpha *= (1.0 + gamma);
      s.alpha[away] -= gamma;
      if (gamma == gamma_max) s.alpha[away] = 0.0;
    }
    s.z.noalias() += gamma * wdir;
    // Periodic refresh keeps z consistent with alpha.
    if (it % 50 == 49) {
      clean_weights(s.alpha);
      s.refresh();
    }
  }
  return finish(s, p, it, Algorithm::FrankWolfe);
}

/// Cutting planes on the dual
///   max_{y,t}  y.x - |y|^2/2 - t   s.t.  D_i.y <= t  for every row i,
/// whose optimum is y = x - xh. A working set of cuts is kept; the
/// restricted problem is solved exactly in its primal form and the most
/// violated cuts D_i.y > t are added until none remain.
inline ProjectionResult dual_cutting_plane(const ProjectionProblem& p) {
  HullState s;
  init_state(s, p);
  const double scale = problem_scale(s.set, s.x);
  const std::size_t m = s.set.size();
  const std::size_t batch = std::max<std::size_t>(1, std::min<std::size_t>(static_cast<std::size_t>(s.set.dim()) + 1, 16));
  std::vector<std::size_t> working;
  for (std::size_t i = 0; i < m; ++i) {
    if (s.alpha[static_cast<Eigen::Index>(i)] > 0.0) working.push_back(i);
  }
  std::vector<char> in_working(m, 0);
  for (auto i : working) in_working[i] = 1;
  int it = 0;
  for (; it < p.config.max_iter; ++it) {
    Eigen::VectorXd r = s.z - s.x;
    double f = 0.5 * r.squaredNorm();
    Eigen::VectorXd g = s.set.dots(r);
    double ag = s.alpha.dot(g);
    double gap = ag - g.minCoeff();
    if (can_stop(f, gap, p.config, scale)) break;
    if (!std::isfinite(gap)) throw Error(ErrorCode::NumericBreakdown, "non-finite iterate");

    // Cuts violated by y = x - z: D_i.y > t  <=>  g_i < alpha.g
    std::vector<std::pair<double, std::size_t>> violated;
    for (std::size_t i = 0; i < m; ++i) {
      double gi = g[static_cast<Eigen::Index>(i)];
      if (!in_working[i] && gi < ag) violated.emplace_back(gi, i);
    }
    if (violated.empty()) {
      // Only rounding inside the working set remains; re-solve it.
      if (it > 0 && gap <= p.config.tol_opt) break;
    }
    std::size_t take = std::min(batch, violated.size());
    std::partial_sort(violated.begin(), violated.begin() + static_cast<std::ptrdiff_t>(take), violated.end());
    for (std::size_t k = 0; k < take; ++k) {
      working.push_back(violated[k].second);
      in_working[violated[k].second] = 1;
    }
    // Drop inactive cuts once the working set grows large.
    if (working.size() > 4 * (static_cast<std::size_t>(s.set.dim()) + 1) + batch) {
      std::vector<std::size_t> kept;
      for (auto i : working) {
        if (s.alpha[static_cast<Eigen::Index>(i)] > 0.0 || !in_working[i]) kept.push_back(i);
        else in_working[i] = 0;
      }
      for (std::size_t k = 0; k < take; ++k) {
        auto i = violated[k].second;
        if (!in_working[i]) {
          kept.push_back(i);
          in_working[i] = 1;
        }
      }
      working = std::move(kept);
    }
    std::vector<std::size_t> rows_w(working.size());
    Eigen::VectorXd warm(static_cast<Eigen::Index>(working.size()));
    for (std::size_t k = 0; k < working.size(); ++k) {
      rows_w[k] = p.rows[working[k]];
      warm[static_cast<Eigen::Index>(k)] = s.alpha[static_cast<Eigen::Index>(working[k])];
    }
    simplex::RowSet sub{p.data, rows_w};
    auto inner = simplex::active_set_ls(sub, s.x, &warm);
    s.alpha.setZero();
    for (std::size_t k = 0; k < working.size(); ++k) {
      s.alpha[static_cast<Eigen::Index>(working[k])] = inner.alpha[static_cast<Eigen::Index>(k)];
    }
    clean_weights(s.alpha);
    s.refresh();
  }
  return finish(s, p, it, Algorithm::Dual);
}

}  // namespace detail

inline Algorithm resolve_algorithm(Algorithm a, std::size_t n, std::size_t d) {
  if (a != Algorithm::Auto) return a;
  return n >= 20 * (d + 1) ? Algorithm::Dual : Algorithm::GradientProjection;
}

/// Closest point of the convex hull of the subset rows to the query.
/// Never throws MaxIterExceeded: an exhausted budget returns the best
/// iterate with certified = false.
inline ProjectionResult project_continuous(const ProjectionProblem& problem) {
  problem.validate();
  auto algo = resolve_algorithm(problem.config.algorithm, problem.rows.size(), static_cast<std::size_t>(problem.data->cols()));
  ProjectionResult res;
  switch (algo) {
    case Algorithm::FrankWolfe: res = detail::frank_wolfe(problem); break;
    case Algorithm::Dual: res = detail::dual_cutting_plane(problem); break;
    default: res = detail::gradient_projection(problem); break;
  }
  if (!res.certified && problem.config.algorithm == Algorithm::Auto) {
    // GP can stall on degenerate faces and the cutting planes on very large
    // supports; the other method usually finishes.
    auto other = algo == Algorithm::Dual ? detail::gradient_projection(problem) : detail::dual_cutting_plane(problem);
    if (other.certified || other.distance < res.distance) res = std::move(other);
  }
  return res;
}

struct KktReport {
  bool pass = false;
  double certificate = 0.0;
  double sum_residual = 0.0;
  double min_weight = 0.0;
  double reconstruction_error = 0.0;
  std::vector<std::string> violations;
};

/// Recomputes optimality and feasibility of a result from scratch.
inline KktReport verify_kkt(const ProjectionResult& result, const ProjectionProblem& problem) {
  KktReport rep;
  const auto& data = *problem.data;
  const auto d = data.cols();
  Eigen::VectorXd recon = Eigen::VectorXd::Zero(d);
  double sum = 0.0;
  rep.min_weight = std::numeric_limits<double>::infinity();
  for (const auto& [row, w] : result.weights) {
    recon.noalias() += w * data.row(static_cast<Eigen::Index>(row)).transpose();
    sum += w;
    rep.min_weight = std::min(rep.min_weight, w);
  }
  if (result.weights.empty()) rep.min_weight = 0.0;
  rep.sum_residual = std::abs(sum - 1.0);
  if (result.point.size() != d) {
    rep.violations.push_back("point has wrong dimension");
    return rep;
  }
  rep.reconstruction_error = (recon - result.point).norm();
  Eigen::VectorXd y = problem.query - result.point;
  double cert = -std::numeric_limits<double>::infinity();
  for (auto row : problem.rows) {
    cert = std::max(cert, y.dot(data.row(static_cast<Eigen::Index>(row)).transpose() - result.point));
  }
  rep.certificate = cert;

  if (rep.min_weight < 0.0) rep.violations.push_back("negative weight " + std::to_string(rep.min_weight));
  if (rep.sum_residual > problem.config.tol_feas) {
    rep.violations.push_back("weights sum residual " + std::to_string(rep.sum_residual));
  }
  if (rep.reconstruction_error > 1e-10) {
    rep.violations.push_back("point differs from weighted rows by " + std::to_string(rep.reconstruction_error));
  }
  if (rep.certificate > problem.config.tol_opt) {
    rep.violations.push_back("variational inequality residual " + std::to_string(rep.certificate));
  }
  for (const auto& [row, w] : result.weights) {
    if (std::find(problem.rows.begin(), problem.rows.end(), row) == problem.rows.end()) {
      rep.violations.push_back("weight on row " + std::to_string(row) + " outside the subset");
      break;
    }
  }
  rep.pass = rep.violations.empty();
  return rep;
}

}  // namespace hullaudit
