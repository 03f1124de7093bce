#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <span>
#include <vector>

#include "hullaudit/schema.hpp"

namespace hullaudit::simplex {

/// Euclidean projection of v onto the unit simplex {a >= 0, sum a = 1}
/// (sort-and-threshold, O(n log n)).
inline Eigen::VectorXd project(const Eigen::VectorXd& v) {
  const Eigen::Index n = v.size();
  std::vector<double> u(v.data(), v.data() + n);
  std::sort(u.begin(), u.end(), std::greater<>());
  double cumsum = 0.0;
  double theta = 0.0;
  for (Eigen::Index k = 0; k < n; ++k) {
    cumsum += u[static_cast<std::size_t>(k)];
    double t = (cumsum - 1.0) / static_cast<double>(k + 1);
    if (u[static_cast<std::size_t>(k)] - t > 0.0) theta = t;
  }
  return (v.array() - theta).max(0.0).matrix();
}

/// Accessor for a row subset of a dense matrix without copying.
struct RowSet {
  const RowMatrix* data = nullptr;
  std::span<const std::size_t> rows;

  std::size_t size() const { return rows.size(); }
  Eigen::Index dim() const { return data->cols(); }
  auto row(std::size_t i) const { return data->row(static_cast<Eigen::Index>(rows[i])); }

  /// Sum of a_i * row_i over the nonzero entries of a.
  Eigen::VectorXd combine(const Eigen::VectorXd& a) const {
    Eigen::VectorXd z = Eigen::VectorXd::Zero(dim());
    for (std::size_t i = 0; i < size(); ++i) {
      double w = a[static_cast<Eigen::Index>(i)];
      if (w != 0.0) z.noalias() += w * row(i).transpose();
    }
    return z;
  }

  /// g_i = row_i . r for every row.
  Eigen::VectorXd dots(const Eigen::VectorXd& r) const {
    Eigen::VectorXd g(static_cast<Eigen::Index>(size()));
    for (std::size_t i = 0; i < size(); ++i) g[static_cast<Eigen::Index>(i)] = row(i).dot(r);
    return g;
  }
};

/// Minimizes |sum_i s_i D_i - x| over s restricted to `active` with sum s = 1
/// (no sign constraint). Minimum-norm solution when the active rows are
/// affinely dependent.
inline Eigen::VectorXd equality_ls(const RowSet& set, const std::vector<std::size_t>& active,
                                   const Eigen::VectorXd& x) {
  const std::size_t k = active.size();
  Eigen::VectorXd s(static_cast<Eigen::Index>(k));
  if (k == 1) {
    s[0] = 1.0;
    return s;
  }
  const auto base = set.row(active[0]).transpose();
  Eigen::MatrixXd e(set.dim(), static_cast<Eigen::Index>(k - 1));
  for (std::size_t j = 1; j < k; ++j) e.col(static_cast<Eigen::Index>(j - 1)) = set.row(active[j]).transpose() - base;
  Eigen::VectorXd b = x - base;
  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(e);
  cod.setThreshold(1e-12);
  Eigen::VectorXd w = cod.solve(b);
  s[0] = 1.0 - w.sum();
  s.tail(static_cast<Eigen::Index>(k - 1)) = w;
  return s;
}

struct ActiveSetResult {
  Eigen::VectorXd alpha;
  int iterations = 0;
  bool converged = false;
};

/// Lawson-Hanson style primal active-set method for
///   min |sum a_i D_i - x|^2  s.t.  a >= 0, sum a = 1
/// over a small row set. Exact up to rounding; meant for |set| in the tens
/// to low thousands.
inline ActiveSetResult active_set_ls(const RowSet& set, const Eigen::VectorXd& x,
                                     const Eigen::VectorXd* warm = nullptr, int max_iter = 0) {
  const std::size_t m = set.size();
  ActiveSetResult res;
  res.alpha = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(m));
  if (max_iter <= 0) max_iter = static_cast<int>(3 * m + 50);

  std::vector<std::size_t> active;
  if (warm && warm->size() == static_cast<Eigen::Index>(m) && warm->sum() > 0.0) {
    for (std::size_t i = 0; i < m; ++i) {
      if ((*warm)[static_cast<Eigen::Index>(i)] > 0.0) {
        active.push_back(i);
        res.alpha[static_cast<Eigen::Index>(i)] = (*warm)[static_cast<Eigen::Index>(i)];
      }
    }
    res.alpha /= res.alpha.sum();
  } else {
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < m; ++i) {
      double dd = (set.row(i).transpose() - x).squaredNorm();
      if (dd < best_d) {
        best_d = dd;
        best = i;
      }
    }
    active.push_back(best);
    res.alpha[static_cast<Eigen::Index>(best)] = 1.0;
  }

  double row_scale = 0.0;
  for (std::size_t i = 0; i < m; ++i) row_scale = std::max(row_scale, set.row(i).norm());
  row_scale = std::max(row_scale, x.norm());

  std::vector<char> blocked(m, 0);
  std::size_t last_enter = m;
  double last_f = std::numeric_limits<double>::infinity();
  for (int it = 0; it < max_iter; ++it) {
    res.iterations = it + 1;
    // Inner loop: move to the equality-constrained optimum on the active
    // face, dropping coordinates that would turn negative.
    for (int inner = 0; inner < static_cast<int>(m) + 5; ++inner) {
      Eigen::VectorXd s = equality_ls(set, active, x);
      double theta = 1.0;
      bool interior = true;
      for (std::size_t j = 0; j < active.size(); ++j) {
        double a = res.alpha[static_cast<Eigen::Index>(active[j])];
        double sj = s[static_cast<Eigen::Index>(j)];
        if (sj <= 0.0) {
          interior = false;
          double denom = a - sj;
          if (denom > 0.0) theta = std::min(theta, a / denom);
        }
      }
      if (interior) {
        for (std::size_t j = 0; j < active.size(); ++j) res.alpha[static_cast<Eigen::Index>(active[j])] = s[static_cast<Eigen::Index>(j)];
        break;
      }
      for (std::size_t j = 0; j < active.size(); ++j) {
        auto idx = static_cast<Eigen::Index>(active[j]);
        res.alpha[idx] += theta * (s[static_cast<Eigen::Index>(j)] - res.alpha[idx]);
      }
      std::vector<std::size_t> kept;
      for (std::size_t j : active) {
        if (res.alpha[static_cast<Eigen::Index>(j)] > 1e-14) kept.push_back(j);
        else res.alpha[static_cast<Eigen::Index>(j)] = 0.0;
      }
      if (kept.empty()) {
        // Numerical corner: restart from the best vertex of the old face.
        kept.push_back(active[0]);
        res.alpha.setZero();
        res.alpha[static_cast<Eigen::Index>(active[0])] = 1.0;
      }
      active = std::move(kept);
      double sum = res.alpha.sum();
      res.alpha /= sum;
    }

    Eigen::VectorXd z = set.combine(res.alpha);
    Eigen::VectorXd r = z - x;
    Eigen::VectorXd g = set.dots(r);
    double lambda = res.alpha.dot(g);
    double tol = 1e-13 * (1.0 + r.norm() * row_scale + std::abs(lambda));
    std::vector<char> in_active(m, 0);
    for (std::size_t j : active) in_active[j] = 1;
    std::size_t enter = m;
    double best = lambda - tol;
    for (std::size_t i = 0; i < m; ++i) {
      if (in_active[i] || blocked[i]) continue;
      if (g[static_cast<Eigen::Index>(i)] < best) {
        best = g[static_cast<Eigen::Index>(i)];
        enter = i;
      }
    }
    if (enter == m) {
      res.converged = true;
      break;
    }
    // A row that enters and is dropped again without lowering the objective
    // is blocked until the face changes; otherwise the pricing would cycle.
    double f_before = r.squaredNorm();
    if (last_enter < m && res.alpha[static_cast<Eigen::Index>(last_enter)] == 0.0 &&
        f_before >= last_f - 1e-15 * (1.0 + last_f)) {
      blocked[last_enter] = 1;
      if (enter == last_enter) continue;
    } else {
      blocked.assign(m, 0);
    }
    last_enter = enter;
    last_f = f_before;
    active.push_back(enter);
  }
  return res;
}

}  // namespace hullaudit::simplex
