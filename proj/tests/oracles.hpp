#pragma once

// Independent reference implementations used only by the test suite.
// Everything here is written directly from first principles (dumb loops,
// full sorts, exhaustive enumeration) and must stay decoupled from the
// library code paths it checks.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <numeric>
#include <set>
#include <vector>

#include "glpp/core.hpp"
#include "glpp/rng.hpp"

namespace oracle {

using glpp::Matrix;

/// Central finite differences of a scalar function w.r.t. every entry of m.
inline Matrix finite_difference(const std::function<double(const Matrix&)>& f,
                                Matrix m, double step = 1e-5) {
  Matrix grad(m.rows(), m.cols());
  for (std::size_t idx = 0; idx < m.size(); ++idx) {
    const double saved = m.data()[idx];
    m.data()[idx] = saved + step;
    const double hi = f(m);
    m.data()[idx] = saved - step;
    const double lo = f(m);
    m.data()[idx] = saved;
    grad.data()[idx] = (hi - lo) / (2.0 * step);
  }
  return grad;
}

/// Norm-wise relative error between an analytic gradient and its
/// finite-difference estimate.
inline double gradient_rel_error(const Matrix& analytic, const Matrix& fd) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    const double d = analytic.data()[i] - fd.data()[i];
    num += d * d;
    den += fd.data()[i] * fd.data()[i];
  }
  return std::sqrt(num) / std::max(std::sqrt(den), 1e-12);
}

inline Matrix random_matrix(glpp::Rng& rng, std::size_t rows, std::size_t cols,
                            double lo = -1.0, double hi = 1.0) {
  Matrix m(rows, cols);
  for (double& v : m.data()) v = rng.uniform(lo, hi);
  return m;
}

// ---------------------------------------------------------------------------
// Retrieval metric oracles: plain full-sort enumeration.
// ---------------------------------------------------------------------------

/// Rank gallery items for one query by (distance, index).
inline std::vector<int> rank_by_distance(const std::vector<double>& dist_row,
                                         int exclude_index = -1) {
  std::vector<int> order;
  for (int j = 0; j < static_cast<int>(dist_row.size()); ++j)
    if (j != exclude_index) order.push_back(j);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    if (dist_row[static_cast<std::size_t>(a)] != dist_row[static_cast<std::size_t>(b)])
      return dist_row[static_cast<std::size_t>(a)] < dist_row[static_cast<std::size_t>(b)];
    return a < b;
  });
  return order;
}

/// Single-set Recall@K with self exclusion, by direct neighbor enumeration.
inline double recall_at_k_single_set(const Matrix& dist, const std::vector<int>& labels,
                                     int k) {
  const int n = static_cast<int>(dist.rows());
  int hits = 0;
  for (int i = 0; i < n; ++i) {
    std::vector<double> row(dist.row(static_cast<std::size_t>(i)),
                            dist.row(static_cast<std::size_t>(i)) + n);
    const auto order = rank_by_distance(row, i);
    bool hit = false;
    for (int r = 0; r < k && r < static_cast<int>(order.size()); ++r)
      if (labels[static_cast<std::size_t>(order[static_cast<std::size_t>(r)])] ==
          labels[static_cast<std::size_t>(i)])
        hit = true;
    hits += hit ? 1 : 0;
  }
  return static_cast<double>(hits) / static_cast<double>(n);
}

/// Query/gallery CMC@K.
inline double cmc_at_k(const Matrix& dist, const std::vector<int>& qlabels,
                       const std::vector<int>& glabels, int k) {
  const int q = static_cast<int>(dist.rows());
  int hits = 0;
  for (int i = 0; i < q; ++i) {
    std::vector<double> row(dist.row(static_cast<std::size_t>(i)),
                            dist.row(static_cast<std::size_t>(i)) + dist.cols());
    const auto order = rank_by_distance(row);
    bool hit = false;
    for (int r = 0; r < k && r < static_cast<int>(order.size()); ++r)
      if (glabels[static_cast<std::size_t>(order[static_cast<std::size_t>(r)])] ==
          qlabels[static_cast<std::size_t>(i)])
        hit = true;
    hits += hit ? 1 : 0;
  }
  return static_cast<double>(hits) / static_cast<double>(q);
}

/// Query/gallery mean average precision.
inline double mean_average_precision(const Matrix& dist, const std::vector<int>& qlabels,
                                     const std::vector<int>& glabels) {
  const int q = static_cast<int>(dist.rows());
  double total = 0.0;
  for (int i = 0; i < q; ++i) {
    std::vector<double> row(dist.row(static_cast<std::size_t>(i)),
                            dist.row(static_cast<std::size_t>(i)) + dist.cols());
    const auto order = rank_by_distance(row);
    int relevant_seen = 0;
    double ap = 0.0;
    int relevant_total = 0;
    for (std::size_t r = 0; r < order.size(); ++r) {
      if (glabels[static_cast<std::size_t>(order[r])] == qlabels[static_cast<std::size_t>(i)]) {
        ++relevant_seen;
        ap += static_cast<double>(relevant_seen) / static_cast<double>(r + 1);
        ++relevant_total;
      }
    }
    total += ap / static_cast<double>(relevant_total);
  }
  return total / static_cast<double>(q);
}

/// Exhaustive best 2-partition by within-cluster sum of squares (n <= ~20).
inline std::pair<std::vector<int>, double> best_two_partition(const Matrix& points) {
  const int n = static_cast<int>(points.rows());
  const std::size_t d = points.cols();
  double best = std::numeric_limits<double>::infinity();
  std::vector<int> best_assign(static_cast<std::size_t>(n), 0);
  // Fix point 0 in cluster 0 to halve the search space.
  for (std::uint64_t mask = 0; mask < (1ULL << (n - 1)); ++mask) {
    std::vector<int> assign(static_cast<std::size_t>(n), 0);
    for (int i = 1; i < n; ++i)
      assign[static_cast<std::size_t>(i)] = (mask >> (i - 1)) & 1ULL ? 1 : 0;
    double wcss = 0.0;
    for (int c = 0; c < 2; ++c) {
      std::vector<double> centroid(d, 0.0);
      int count = 0;
      for (int i = 0; i < n; ++i)
        if (assign[static_cast<std::size_t>(i)] == c) {
          ++count;
          for (std::size_t k = 0; k < d; ++k)
            centroid[k] += points(static_cast<std::size_t>(i), k);
        }
      if (count == 0) continue;
      for (std::size_t k = 0; k < d; ++k) centroid[k] /= count;
      for (int i = 0; i < n; ++i)
        if (assign[static_cast<std::size_t>(i)] == c)
          for (std::size_t k = 0; k < d; ++k) {
            const double diff = points(static_cast<std::size_t>(i), k) - centroid[k];
            wcss += diff * diff;
          }
    }
    if (wcss < best) {
      best = wcss;
      best_assign = assign;
    }
  }
  return {best_assign, best};
}

// ---------------------------------------------------------------------------
// Independent k-reciprocal re-ranking, transcribed step by step from the
// published description. No code shared with the library implementation.
// ---------------------------------------------------------------------------

struct RerankOracleParams {
  int k1 = 0;
  int k2 = 0;
  double lambda = 0.0;
  bool lambda_on_jaccard = false;
};

inline Matrix rerank_reference(const Matrix& joint_dist, int num_queries,
                               int num_gallery, const RerankOracleParams& p) {
  const int n = num_queries + num_gallery;

  // Plain k-NN lists, self excluded, ties by index.
  auto nn = [&](int i, int k) {
    std::vector<double> row(joint_dist.row(static_cast<std::size_t>(i)),
                            joint_dist.row(static_cast<std::size_t>(i)) + n);
    auto order = rank_by_distance(row, i);
    if (static_cast<int>(order.size()) > k) order.resize(static_cast<std::size_t>(k));
    return std::set<int>(order.begin(), order.end());
  };

  // Reciprocal sets at size k.
  auto reciprocal = [&](int i, int k) {
    std::set<int> out;
    const auto mine = nn(i, k);
    for (int j : mine) {
      const auto theirs = nn(j, k);
      if (theirs.count(i)) out.insert(j);
    }
    return out;
  };

  // Top-level sets with the empty-set fallback; expanded by half-sets whose
  // overlap clears the 2/3 margin; truncated to the k2 closest members.
  std::vector<std::set<int>> expanded(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    std::set<int> base = reciprocal(i, p.k1);
    if (base.empty()) base = nn(i, p.k1);
    std::set<int> grown = base;
    for (int j : base) {
      const std::set<int> half = reciprocal(j, p.k1 / 2);
      std::size_t inter = 0;
      for (int u : half)
        if (base.count(u)) ++inter;
      if (3 * inter >= 2 * half.size() && !half.empty())
        for (int u : half) grown.insert(u);
    }
    if (static_cast<int>(grown.size()) > p.k2) {
      std::vector<int> members(grown.begin(), grown.end());
      std::stable_sort(members.begin(), members.end(), [&](int a, int b) {
        const double da = joint_dist(static_cast<std::size_t>(i), static_cast<std::size_t>(a));
        const double db = joint_dist(static_cast<std::size_t>(i), static_cast<std::size_t>(b));
        if (da != db) return da < db;
        return a < b;
      });
      members.resize(static_cast<std::size_t>(p.k2));
      grown = std::set<int>(members.begin(), members.end());
    }
    expanded[static_cast<std::size_t>(i)] = grown;
  }

  auto jaccard = [&](const std::set<int>& a, const std::set<int>& b) {
    if (a.empty() && b.empty()) return 1.0;
    std::size_t inter = 0;
    for (int u : a)
      if (b.count(u)) ++inter;
    const std::size_t uni = a.size() + b.size() - inter;
    return 1.0 - static_cast<double>(inter) / static_cast<double>(uni);
  };

  Matrix out(static_cast<std::size_t>(num_queries), static_cast<std::size_t>(num_gallery));
  for (int qi = 0; qi < num_queries; ++qi)
    for (int gi = 0; gi < num_gallery; ++gi) {
      const double dj = jaccard(expanded[static_cast<std::size_t>(qi)],
                                expanded[static_cast<std::size_t>(num_queries + gi)]);
      const double d0 =
          joint_dist(static_cast<std::size_t>(qi), static_cast<std::size_t>(num_queries + gi));
      out(static_cast<std::size_t>(qi), static_cast<std::size_t>(gi)) =
          p.lambda_on_jaccard ? (1.0 - p.lambda) * d0 + p.lambda * dj
                              : p.lambda * d0 + (1.0 - p.lambda) * dj;
    }
  return out;
}

}  // namespace oracle
