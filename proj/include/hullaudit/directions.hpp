#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "hullaudit/batch.hpp"

namespace hullaudit {

/// V = X^h - X over the outside samples, scaled space.
struct DirectionsMatrix {
  RowMatrix V;
  /// Index of each row's sample in the audited test set.
  std::vector<std::size_t> sample_index;
  std::vector<std::string> column_labels;
};

inline std::vector<std::string> column_labels(const EncodingLayout& layout) {
  std::vector<std::string> out;
  for (std::size_t c = 0; c < layout.width(); ++c) out.push_back(layout.column_label(c));
  return out;
}

/// Rows for OutsidePath samples, plus OutsideNoPath ones when asked.
inline DirectionsMatrix build_directions(const BatchResult& batch, const EncodedDataset& test,
                                         std::span<const SampleStatus> statuses, bool include_no_path = false) {
  if (statuses.size() != batch.items.size() || batch.items.size() != test.size()) {
    throw Error(ErrorCode::DimensionMismatch, "batch, statuses and test set differ in length");
  }
  DirectionsMatrix out;
  out.column_labels = column_labels(*test.layout);
  for (std::size_t i = 0; i < statuses.size(); ++i) {
    bool take = statuses[i] == SampleStatus::OutsidePath || (include_no_path && statuses[i] == SampleStatus::OutsideNoPath);
    if (take && batch.items[i].ok()) out.sample_index.push_back(i);
  }
  if (out.sample_index.empty()) throw Error(ErrorCode::NoOutsideSamples, "no outside samples to build directions from");
  out.V.resize(static_cast<Eigen::Index>(out.sample_index.size()), static_cast<Eigen::Index>(test.width()));
  for (std::size_t r = 0; r < out.sample_index.size(); ++r) {
    std::size_t i = out.sample_index[r];
    out.V.row(static_cast<Eigen::Index>(r)) =
        batch.items[i].result->point.transpose() - test.matrix.row(static_cast<Eigen::Index>(i));
  }
  return out;
}

struct SpectrumConfig {
  /// Singular values above this count toward the rank; 0 means
  /// sigma_1 * max(m, d) * machine epsilon.
  double rank_tol = 0.0;
  double energy_threshold = 0.95;
  std::vector<std::size_t> drop_columns;
};

struct SpectrumReport {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::size_t rank = 0;
  double rank_tol = 0.0;
  /// sigma_1 / sigma_rank.
  double condition = 0.0;
  /// sigma_1 / sigma_min over all min(m, d) values (infinite when one is zero).
  double condition_full = 0.0;
  std::vector<double> singular_values;
  std::size_t dominant_patterns = 0;
  double energy_threshold = 0.95;
  std::vector<std::size_t> dropped_columns;
  std::optional<double> condition_after_drop;
  std::optional<std::size_t> rank_after_drop;
};

namespace detail {

inline Eigen::VectorXd singular_values(const RowMatrix& V) {
  Eigen::MatrixXd m = V;
  Eigen::BDCSVD<Eigen::MatrixXd> svd(m);
  return svd.singularValues();
}

inline std::size_t numerical_rank(const Eigen::VectorXd& s, double tol) {
  std::size_t r = 0;
  for (Eigen::Index i = 0; i < s.size(); ++i) r += s[i] > tol ? 1 : 0;
  return r;
}

inline double default_rank_tol(const Eigen::VectorXd& s, Eigen::Index m, Eigen::Index d) {
  double s1 = s.size() ? s[0] : 0.0;
  return s1 * static_cast<double>(std::max(m, d)) * std::numeric_limits<double>::epsilon();
}

inline RowMatrix drop_columns(const RowMatrix& V, const std::vector<std::size_t>& drop) {
  std::vector<Eigen::Index> keep;
  for (Eigen::Index c = 0; c < V.cols(); ++c) {
    if (std::find(drop.begin(), drop.end(), static_cast<std::size_t>(c)) == drop.end()) keep.push_back(c);
  }
  RowMatrix out(V.rows(), static_cast<Eigen::Index>(keep.size()));
  for (std::size_t k = 0; k < keep.size(); ++k) out.col(static_cast<Eigen::Index>(k)) = V.col(keep[k]);
  return out;
}

/// sigma_1 / sigma_rank at the given tolerance rule.
inline double condition_of(const Eigen::VectorXd& s, double tol, std::size_t* rank_out = nullptr) {
  std::size_t r = numerical_rank(s, tol);
  if (rank_out) *rank_out = r;
  if (r == 0) return std::numeric_limits<double>::infinity();
  return s[0] / s[static_cast<Eigen::Index>(r - 1)];
}

}  // namespace detail

/// Smallest r with sum_{i<=r} sigma_i^2 >= theta * sum sigma_i^2.
inline std::size_t dominant_pattern_count(const std::vector<double>& sv, double theta) {
  double total = 0.0;
  for (double s : sv) total += s * s;
  if (total == 0.0) return 0;
  double acc = 0.0;
  for (std::size_t i = 0; i < sv.size(); ++i) {
    acc += sv[i] * sv[i];
    if (acc >= theta * total * (1.0 - 1e-15)) return i + 1;
  }
  return sv.size();
}

inline SpectrumReport spectrum(const RowMatrix& V, const SpectrumConfig& cfg = {}) {
  if (V.rows() == 0 || V.cols() == 0) throw Error(ErrorCode::NoOutsideSamples, "empty directions matrix");
  if (!(cfg.energy_threshold > 0.0 && cfg.energy_threshold <= 1.0)) {
    throw Error(ErrorCode::ConfigError, "energy threshold must be in (0, 1]");
  }
  SpectrumReport rep;
  rep.rows = static_cast<std::size_t>(V.rows());
  rep.cols = static_cast<std::size_t>(V.cols());
  Eigen::VectorXd s = detail::singular_values(V);
  rep.singular_values.assign(s.data(), s.data() + s.size());
  rep.rank_tol = cfg.rank_tol > 0.0 ? cfg.rank_tol : detail::default_rank_tol(s, V.rows(), V.cols());
  rep.condition = detail::condition_of(s, rep.rank_tol, &rep.rank);
  double smin = s.size() ? s[s.size() - 1] : 0.0;
  rep.condition_full = smin > 0.0 ? s[0] / smin : std::numeric_limits<double>::infinity();
  rep.energy_threshold = cfg.energy_threshold;
  rep.dominant_patterns = dominant_pattern_count(rep.singular_values, cfg.energy_threshold);
  if (!cfg.drop_columns.empty()) {
    for (auto c : cfg.drop_columns) {
      if (c >= rep.cols) throw Error(ErrorCode::ConfigError, "drop column out of range");
    }
    rep.dropped_columns = cfg.drop_columns;
    RowMatrix reduced = detail::drop_columns(V, cfg.drop_columns);
    Eigen::VectorXd s2 = detail::singular_values(reduced);
    double tol2 = cfg.rank_tol > 0.0 ? cfg.rank_tol : detail::default_rank_tol(s2, reduced.rows(), reduced.cols());
    std::size_t r2 = 0;
    rep.condition_after_drop = detail::condition_of(s2, tol2, &r2);
    rep.rank_after_drop = r2;
  }
  return rep;
}

struct RedundantColumn {
  std::size_t column = 0;
  std::string label;
  /// Position in the pivot order (0 = first pivot).
  std::size_t pivot_position = 0;
  /// Magnitude of the matching diagonal entry of R.
  double r_diag = 0.0;
  double condition_after_drop = 0.0;
  /// condition_after_drop minus the condition of V.
  double condition_delta = 0.0;
};

/// Columns that add least to the column space: the trailing pivots of a
/// column-pivoted QR, last pivot first. Each carries the condition number
/// of V with just that column removed.
inline std::vector<RedundantColumn> redundant_features(const RowMatrix& V, std::size_t k,
                                                       const std::vector<std::string>& labels = {},
                                                       double rank_tol = 0.0) {
  if (k == 0) throw Error(ErrorCode::ConfigError, "k must be at least 1");
  if (V.rows() == 0 || V.cols() == 0) throw Error(ErrorCode::NoOutsideSamples, "empty directions matrix");
  Eigen::MatrixXd m = V;
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(m);
  const auto& perm = qr.colsPermutation().indices();
  const Eigen::Index d = m.cols();
  const Eigen::Index diag = std::min(m.rows(), d);
  Eigen::VectorXd s = detail::singular_values(V);
  double tol = rank_tol > 0.0 ? rank_tol : detail::default_rank_tol(s, V.rows(), V.cols());
  double base = detail::condition_of(s, tol);

  std::vector<RedundantColumn> out;
  for (Eigen::Index pos = d - 1; pos >= 0 && out.size() < k; --pos) {
    RedundantColumn rc;
    rc.column = static_cast<std::size_t>(perm[pos]);
    rc.pivot_position = static_cast<std::size_t>(pos);
    rc.label = rc.column < labels.size() ? labels[rc.column] : "col" + std::to_string(rc.column);
    rc.r_diag = pos < diag ? std::abs(qr.matrixQR()(pos, pos)) : 0.0;
    RowMatrix reduced = detail::drop_columns(V, {rc.column});
    Eigen::VectorXd s2 = detail::singular_values(reduced);
    double tol2 = rank_tol > 0.0 ? rank_tol : detail::default_rank_tol(s2, reduced.rows(), reduced.cols());
    rc.condition_after_drop = detail::condition_of(s2, tol2);
    rc.condition_delta = rc.condition_after_drop - base;
    out.push_back(std::move(rc));
  }
  return out;
}

struct ClusterConfig {
  int k_min = 2;
  int k_max = 8;
  std::uint64_t seed = 42;
  /// Cluster unit directions rather than raw displacement vectors.
  bool normalize = true;
  /// Silhouettes are computed on at most this many rows (seeded sample).
  std::size_t silhouette_sample = 2000;
  int restarts = 4;
  int max_iter = 300;

  void validate() const {
    if (k_min < 2 || k_max < k_min) throw Error(ErrorCode::ConfigError, "k range must satisfy 2 <= k_min <= k_max");
    if (restarts < 1 || max_iter < 1) throw Error(ErrorCode::ConfigError, "restarts and max_iter must be positive");
  }
};

struct ClusterReport {
  std::size_t k = 0;
  std::vector<int> assignments;
  RowMatrix centroids;
  /// (k, mean silhouette) for every k tried.
  std::vector<std::pair<int, double>> silhouettes;
  std::vector<std::size_t> cluster_sizes;
  std::uint64_t seed = 42;
  bool normalized = true;
};

namespace detail {

struct KMeansResult {
  std::vector<int> labels;
  RowMatrix centers;
  double inertia = 0.0;
};

inline KMeansResult kmeans(const RowMatrix& X, int k, std::mt19937_64& rng, int max_iter) {
  const Eigen::Index n = X.rows();
  KMeansResult res;
  res.centers.resize(k, X.cols());
  // k-means++ seeding.
  std::uniform_int_distribution<Eigen::Index> first(0, n - 1);
  res.centers.row(0) = X.row(first(rng));
  Eigen::VectorXd d2(n);
  for (Eigen::Index i = 0; i < n; ++i) d2[i] = (X.row(i) - res.centers.row(0)).squaredNorm();
  for (int c = 1; c < k; ++c) {
    double total = d2.sum();
    Eigen::Index pick = 0;
    if (total > 0.0) {
      double u = std::uniform_real_distribution<double>(0.0, total)(rng);
      double acc = 0.0;
      pick = n - 1;
      for (Eigen::Index i = 0; i < n; ++i) {
        acc += d2[i];
        if (acc >= u && d2[i] > 0.0) {
          pick = i;
          break;
        }
      }
    }
    res.centers.row(c) = X.row(pick);
    for (Eigen::Index i = 0; i < n; ++i) d2[i] = std::min(d2[i], (X.row(i) - res.centers.row(c)).squaredNorm());
  }
  res.labels.assign(static_cast<std::size_t>(n), -1);
  for (int it = 0; it < max_iter; ++it) {
    bool changed = false;
    res.inertia = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      int best = 0;
      double bd = std::numeric_limits<double>::infinity();
      for (int c = 0; c < k; ++c) {
        double dd = (X.row(i) - res.centers.row(c)).squaredNorm();
        if (dd < bd) {
          bd = dd;
          best = c;
        }
      }
      res.inertia += bd;
      if (res.labels[static_cast<std::size_t>(i)] != best) {
        res.labels[static_cast<std::size_t>(i)] = best;
        changed = true;
      }
    }
    if (!changed) break;
    RowMatrix sums = RowMatrix::Zero(k, X.cols());
    std::vector<int> counts(static_cast<std::size_t>(k), 0);
    for (Eigen::Index i = 0; i < n; ++i) {
      sums.row(res.labels[static_cast<std::size_t>(i)]) += X.row(i);
      ++counts[static_cast<std::size_t>(res.labels[static_cast<std::size_t>(i)])];
    }
    for (int c = 0; c < k; ++c) {
      if (counts[static_cast<std::size_t>(c)] > 0) {
        res.centers.row(c) = sums.row(c) / counts[static_cast<std::size_t>(c)];
      } else {
        // Empty cluster: move it to the point farthest from its center.
        Eigen::Index far = 0;
        double fd = -1.0;
        for (Eigen::Index i = 0; i < n; ++i) {
          double dd = (X.row(i) - res.centers.row(res.labels[static_cast<std::size_t>(i)])).squaredNorm();
          if (dd > fd) {
            fd = dd;
            far = i;
          }
        }
        res.centers.row(c) = X.row(far);
      }
    }
  }
  return res;
}

/// Mean silhouette over `sample` rows, distances measured within the sample.
inline double mean_silhouette(const RowMatrix& X, const std::vector<int>& labels, int k,
                              const std::vector<std::size_t>& sample) {
  const std::size_t m = sample.size();
  std::vector<int> sizes(static_cast<std::size_t>(k), 0);
  for (auto i : sample) ++sizes[static_cast<std::size_t>(labels[i])];
  double total = 0.0;
  std::vector<double> sum(static_cast<std::size_t>(k));
  for (std::size_t a = 0; a < m; ++a) {
    std::fill(sum.begin(), sum.end(), 0.0);
    for (std::size_t b = 0; b < m; ++b) {
      if (a == b) continue;
      sum[static_cast<std::size_t>(labels[sample[b]])] +=
          (X.row(static_cast<Eigen::Index>(sample[a])) - X.row(static_cast<Eigen::Index>(sample[b]))).norm();
    }
    int own = labels[sample[a]];
    if (sizes[static_cast<std::size_t>(own)] <= 1) continue;  // singleton: 0
    double ai = sum[static_cast<std::size_t>(own)] / (sizes[static_cast<std::size_t>(own)] - 1);
    double bi = std::numeric_limits<double>::infinity();
    for (int c = 0; c < k; ++c) {
      if (c == own || sizes[static_cast<std::size_t>(c)] == 0) continue;
      bi = std::min(bi, sum[static_cast<std::size_t>(c)] / sizes[static_cast<std::size_t>(c)]);
    }
    double den = std::max(ai, bi);
    if (std::isfinite(bi) && den > 0.0) total += (bi - ai) / den;
  }
  return m ? total / static_cast<double>(m) : 0.0;
}

}  // namespace detail

/// k-means for each k in the range; keeps the k with the best mean
/// silhouette. Rows are put in lexicographic order first, so results do not
/// depend on the input row order, only on the seed.
inline ClusterReport cluster_directions(const RowMatrix& V, const ClusterConfig& cfg = {}) {
  cfg.validate();
  const Eigen::Index m = V.rows();
  if (m < 2) throw Error(ErrorCode::DegenerateClustering, "clustering needs at least two rows");
  RowMatrix X = V;
  if (cfg.normalize) {
    for (Eigen::Index i = 0; i < m; ++i) {
      double n = X.row(i).norm();
      if (n > 0.0) X.row(i) /= n;
    }
  }
  std::vector<std::size_t> order(static_cast<std::size_t>(m));
  std::iota(order.begin(), order.end(), 0);
  auto lex_less = [&](std::size_t a, std::size_t b) {
    for (Eigen::Index c = 0; c < X.cols(); ++c) {
      double x = X(static_cast<Eigen::Index>(a), c), y = X(static_cast<Eigen::Index>(b), c);
      if (x != y) return x < y;
    }
    return false;
  };
  std::stable_sort(order.begin(), order.end(), lex_less);
  RowMatrix S(m, X.cols());
  for (Eigen::Index i = 0; i < m; ++i) S.row(i) = X.row(static_cast<Eigen::Index>(order[static_cast<std::size_t>(i)]));

  std::size_t distinct = 1;
  for (Eigen::Index i = 1; i < m; ++i) distinct += (S.row(i) - S.row(i - 1)).squaredNorm() > 0.0 ? 1 : 0;
  if (distinct < 2) throw Error(ErrorCode::DegenerateClustering, "all direction rows are identical");

  std::mt19937_64 sample_rng(cfg.seed);
  std::vector<std::size_t> sample(static_cast<std::size_t>(m));
  std::iota(sample.begin(), sample.end(), 0);
  if (sample.size() > cfg.silhouette_sample) {
    std::shuffle(sample.begin(), sample.end(), sample_rng);
    sample.resize(cfg.silhouette_sample);
    std::sort(sample.begin(), sample.end());
  }

  ClusterReport rep;
  rep.seed = cfg.seed;
  rep.normalized = cfg.normalize;
  double best_score = -std::numeric_limits<double>::infinity();
  detail::KMeansResult best;
  int k_hi = std::min<int>(cfg.k_max, static_cast<int>(distinct));
  for (int k = cfg.k_min; k <= k_hi; ++k) {
    std::mt19937_64 rng(cfg.seed + static_cast<std::uint64_t>(k));
    detail::KMeansResult km;
    for (int r = 0; r < cfg.restarts; ++r) {
      auto trial = detail::kmeans(S, k, rng, cfg.max_iter);
      if (r == 0 || trial.inertia < km.inertia) km = std::move(trial);
    }
    double score = detail::mean_silhouette(S, km.labels, k, sample);
    rep.silhouettes.emplace_back(k, score);
    if (score > best_score) {
      best_score = score;
      best = std::move(km);
      rep.k = static_cast<std::size_t>(k);
    }
  }
  // Relabel clusters by first appearance in canonical order.
  std::vector<int> relabel(rep.k, -1);
  int next = 0;
  for (int l : best.labels) {
    if (relabel[static_cast<std::size_t>(l)] < 0) relabel[static_cast<std::size_t>(l)] = next++;
  }
  rep.centroids = RowMatrix::Zero(static_cast<Eigen::Index>(rep.k), V.cols());
  rep.cluster_sizes.assign(rep.k, 0);
  rep.assignments.assign(static_cast<std::size_t>(m), 0);
  for (Eigen::Index i = 0; i < m; ++i) {
    int l = relabel[static_cast<std::size_t>(best.labels[static_cast<std::size_t>(i)])];
    if (l < 0) l = 0;
    rep.assignments[order[static_cast<std::size_t>(i)]] = l;
  }
  for (std::size_t old = 0; old < relabel.size(); ++old) {
    if (relabel[old] >= 0) rep.centroids.row(relabel[old]) = best.centers.row(static_cast<Eigen::Index>(old));
  }
  for (int l : rep.assignments) ++rep.cluster_sizes[static_cast<std::size_t>(l)];
  return rep;
}

}  // namespace hullaudit
