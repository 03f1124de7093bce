#pragma once

// Test-only reference computations. Nothing here calls into the solver code
// it is used to check.

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <random>
#include <vector>

namespace oracle {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Exact squared distance from x to conv(rows of pts) by enumerating every
/// row subset S, projecting x onto aff(S) through the KKT system of
///   min |P_S^T w - x|^2  s.t.  sum w = 1
/// and keeping projections with nonnegative weights. Exponential in n; meant
/// for n <= 12.
inline double hull_distance2(const Matrix& pts, const Vector& x, Vector* best_point = nullptr) {
  const int n = static_cast<int>(pts.rows());
  double best = std::numeric_limits<double>::infinity();
  for (std::uint32_t mask = 1; mask < (1u << n); ++mask) {
    std::vector<int> s;
    for (int i = 0; i < n; ++i) {
      if (mask & (1u << i)) s.push_back(i);
    }
    const int k = static_cast<int>(s.size());
    if (k - 1 > pts.cols()) continue;
    // KKT: [G 1; 1^T 0] [w; mu] = [P x; 1], G = P P^T
    Matrix kkt = Matrix::Zero(k + 1, k + 1);
    Vector rhs(k + 1);
    for (int a = 0; a < k; ++a) {
      for (int b = 0; b < k; ++b) kkt(a, b) = pts.row(s[a]).dot(pts.row(s[b]));
      kkt(a, k) = 1.0;
      kkt(k, a) = 1.0;
      rhs[a] = pts.row(s[a]).dot(x);
    }
    rhs[k] = 1.0;
    Eigen::FullPivLU<Matrix> lu(kkt);
    if (!lu.isInvertible()) continue;
    Vector sol = lu.solve(rhs);
    if ((kkt * sol - rhs).norm() > 1e-8 * (1.0 + rhs.norm())) continue;
    bool ok = true;
    for (int a = 0; a < k; ++a) ok = ok && sol[a] >= -1e-12;
    if (!ok) continue;
    Vector p = Vector::Zero(pts.cols());
    for (int a = 0; a < k; ++a) p += sol[a] * pts.row(s[a]).transpose();
    double d2 = (p - x).squaredNorm();
    if (d2 < best) {
      best = d2;
      if (best_point) *best_point = p;
    }
  }
  return best;
}

/// Minimum squared distance over a regular grid on the simplex of weights
/// (step 1/resolution). Upper bound on the true value that converges as the
/// grid is refined; only for tiny n.
inline double simplex_grid_distance2(const Matrix& pts, const Vector& x, int resolution) {
  const int n = static_cast<int>(pts.rows());
  double best = std::numeric_limits<double>::infinity();
  std::vector<int> counts(n, 0);
  // Enumerate compositions of `resolution` into n parts.
  std::function<void(int, int)> rec = [&](int i, int left) {
    if (i == n - 1) {
      counts[i] = left;
      Vector p = Vector::Zero(pts.cols());
      for (int a = 0; a < n; ++a) p += (double(counts[a]) / resolution) * pts.row(a).transpose();
      best = std::min(best, (p - x).squaredNorm());
      return;
    }
    for (int c = 0; c <= left; ++c) {
      counts[i] = c;
      rec(i + 1, left - c);
    }
  };
  rec(0, resolution);
  return best;
}

/// Exact squared distance from x to conv(rows of pts) intersected with
/// {z : z[cols[k]] == values[k]}, by the same subset enumeration with the
/// extra equalities in the KKT system. Candidate supports are drawn from
/// `allowed` rows (every row when empty). Returns +inf when infeasible.
inline double constrained_hull_distance2(const Matrix& pts, const Vector& x, const std::vector<int>& cols,
                                         const std::vector<double>& values, std::vector<int> allowed = {}) {
  if (allowed.empty()) {
    for (int i = 0; i < pts.rows(); ++i) allowed.push_back(i);
  }
  const int n = static_cast<int>(allowed.size());
  const int c = static_cast<int>(cols.size());
  double best = std::numeric_limits<double>::infinity();
  for (std::uint32_t mask = 1; mask < (1u << n); ++mask) {
    std::vector<int> s;
    for (int i = 0; i < n; ++i) {
      if (mask & (1u << i)) s.push_back(allowed[i]);
    }
    const int k = static_cast<int>(s.size());
    if (k - 1 > pts.cols()) continue;
    // [G A^T; A 0] [w; mu] = [P x; b], A = [1^T; P_S[:, cols]^T]
    Matrix kkt = Matrix::Zero(k + 1 + c, k + 1 + c);
    Vector rhs = Vector::Zero(k + 1 + c);
    for (int a = 0; a < k; ++a) {
      for (int b = 0; b < k; ++b) kkt(a, b) = pts.row(s[a]).dot(pts.row(s[b]));
      kkt(a, k) = kkt(k, a) = 1.0;
      for (int j = 0; j < c; ++j) kkt(a, k + 1 + j) = kkt(k + 1 + j, a) = pts(s[a], cols[j]);
      rhs[a] = pts.row(s[a]).dot(x);
    }
    rhs[k] = 1.0;
    for (int j = 0; j < c; ++j) rhs[k + 1 + j] = values[j];
    Eigen::CompleteOrthogonalDecomposition<Matrix> cod(kkt);
    Vector sol = cod.solve(rhs);
    if ((kkt * sol - rhs).norm() > 1e-8 * (1.0 + rhs.norm())) continue;
    bool ok = true;
    for (int a = 0; a < k; ++a) ok = ok && sol[a] >= -1e-12;
    if (!ok) continue;
    Vector p = Vector::Zero(pts.cols());
    for (int a = 0; a < k; ++a) p += sol[a] * pts.row(s[a]).transpose();
    for (int j = 0; j < c; ++j) ok = ok && std::abs(p[cols[j]] - values[j]) < 1e-9;
    if (!ok) continue;
    best = std::min(best, (p - x).squaredNorm());
  }
  return best;
}

inline Vector dirichlet(std::mt19937_64& rng, int n, double concentration = 1.0) {
  std::gamma_distribution<double> gamma(concentration, 1.0);
  Vector w(n);
  for (int i = 0; i < n; ++i) w[i] = gamma(rng);
  double s = w.sum();
  if (s <= 0) {
    w.setConstant(1.0 / n);
    return w;
  }
  return w / s;
}

inline Matrix gaussian(std::mt19937_64& rng, int rows, int cols, double sd = 1.0) {
  std::normal_distribution<double> nd(0.0, sd);
  Matrix m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) m(i, j) = nd(rng);
  return m;
}

}  // namespace oracle
