#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include "glpp/core.hpp"
#include "glpp/error.hpp"
#include "glpp/rng.hpp"

namespace glpp {

/// Per-query ranked gallery: the substrate every retrieval metric reads.
/// Ordering is by (distance, gallery index); with self_exclusion the query
/// never appears in its own ranking (single-set protocol).
struct RankedRetrieval {
  std::vector<std::vector<int>> order;       // per query, ranked gallery indices
  std::vector<std::vector<double>> distance; // aligned with `order`
  std::vector<int> query_labels;
  std::vector<int> gallery_labels;
  bool self_exclusion = false;
};

/// Cluster assignment with ids dense in [0, num_clusters).
struct Partition {
  std::vector<int> cluster_of;
  int num_clusters = 0;
};

inline Matrix pairwise_euclidean(const Matrix& fa, const Matrix& fb) {
  if (fa.cols() != fb.cols())
    fail(ErrorCode::ShapeMismatch, "pairwise_euclidean: dimensions disagree");
  Matrix d(fa.rows(), fb.rows());
  for (std::size_t i = 0; i < fa.rows(); ++i)
    for (std::size_t j = 0; j < fb.rows(); ++j)
      d(i, j) = std::sqrt(squared_distance(fa.row(i), fb.row(j), fa.cols()));
  return d;
}

/// Build the ranking from a query x gallery distance matrix. For the
/// single-set protocol pass the square self-distance matrix and
/// self_exclusion = true.
inline RankedRetrieval rank_retrieval(const Matrix& dist,
                                      const std::vector<int>& query_labels,
                                      const std::vector<int>& gallery_labels,
                                      bool self_exclusion) {
  const std::size_t q = dist.rows(), g = dist.cols();
  if (query_labels.size() != q || gallery_labels.size() != g)
    fail(ErrorCode::LengthMismatch, "rank_retrieval: label lengths disagree");
  if (self_exclusion && q != g)
    fail(ErrorCode::ShapeMismatch, "rank_retrieval: self exclusion needs a square matrix");
  RankedRetrieval out;
  out.query_labels = query_labels;
  out.gallery_labels = gallery_labels;
  out.self_exclusion = self_exclusion;
  out.order.resize(q);
  out.distance.resize(q);
  for (std::size_t i = 0; i < q; ++i) {
    std::vector<int> idx;
    idx.reserve(g);
    for (std::size_t j = 0; j < g; ++j)
      if (!(self_exclusion && i == j)) idx.push_back(static_cast<int>(j));
    std::sort(idx.begin(), idx.end(), [&](int a, int b) {
      const double da = dist(i, static_cast<std::size_t>(a));
      const double db = dist(i, static_cast<std::size_t>(b));
      if (da != db) return da < db;
      return a < b;
    });
    out.order[i] = idx;
    out.distance[i].reserve(idx.size());
    for (int j : out.order[i]) out.distance[i].push_back(dist(i, static_cast<std::size_t>(j)));
  }
  return out;
}

namespace detail {

inline double topk_hit_rate(const RankedRetrieval& ranked, int k, const char* who) {
  if (k < 1) fail(ErrorCode::InvalidValue, std::string(who) + ": k must be >= 1");
  double hits = 0.0;
  for (std::size_t i = 0; i < ranked.order.size(); ++i) {
    if (static_cast<std::size_t>(k) > ranked.order[i].size())
      fail(ErrorCode::KTooLarge, std::string(who) + ": k exceeds ranking length");
    for (int r = 0; r < k; ++r)
      if (ranked.gallery_labels[static_cast<std::size_t>(ranked.order[i][static_cast<std::size_t>(r)])] ==
          ranked.query_labels[i]) {
        hits += 1.0;
        break;
      }
  }
  return hits / static_cast<double>(ranked.order.size());
}

}  // namespace detail

/// Fraction of queries with at least one same-class item among the top k.
inline double recall_at_k(const RankedRetrieval& ranked, int k) {
  return detail::topk_hit_rate(ranked, k, "recall_at_k");
}

/// Same computation on a query/gallery split.
inline double cmc(const RankedRetrieval& ranked, int k) {
  return detail::topk_hit_rate(ranked, k, "cmc");
}

inline double mean_average_precision(const RankedRetrieval& ranked) {
  double total = 0.0;
  for (std::size_t i = 0; i < ranked.order.size(); ++i) {
    int relevant = 0;
    double ap = 0.0;
    for (std::size_t r = 0; r < ranked.order[i].size(); ++r) {
      if (ranked.gallery_labels[static_cast<std::size_t>(ranked.order[i][r])] ==
          ranked.query_labels[i]) {
        ++relevant;
        ap += static_cast<double>(relevant) / static_cast<double>(r + 1);
      }
    }
    if (relevant == 0)
      fail(ErrorCode::NoRelevantItems,
           "mean_average_precision: query " + std::to_string(i) + " has no relevant items");
    total += ap / static_cast<double>(relevant);
  }
  return total / static_cast<double>(ranked.order.size());
}

/// K-means++ seeding plus Lloyd iterations, best of `restarts` runs by
/// within-cluster sum of squares. Fully deterministic per seed; the final
/// ids are relabeled by first occurrence so they are dense.
inline Partition kmeans(const Matrix& features, int k, std::uint64_t seed,
                        int max_iter = 100, int restarts = 10) {
  const std::size_t n = features.rows(), d = features.cols();
  if (k < 1) fail(ErrorCode::InvalidValue, "kmeans: k must be >= 1");
  if (static_cast<std::size_t>(k) > n)
    fail(ErrorCode::KTooLarge, "kmeans: k exceeds the number of points");
  constexpr double kMoveTol = 1e-6;

  std::vector<int> best_assign(n, 0);
  double best_wcss = std::numeric_limits<double>::infinity();

  for (int restart = 0; restart < restarts; ++restart) {
    Rng rng(derive_seed(seed, "kmeans-restart", static_cast<std::uint64_t>(restart)));

    // k-means++ seeding.
    Matrix centers(static_cast<std::size_t>(k), d);
    std::vector<double> min_sq(n, std::numeric_limits<double>::infinity());
    std::size_t first = rng.uniform_index(n);
    for (std::size_t c = 0; c < static_cast<std::size_t>(k); ++c) {
      std::size_t pick = first;
      if (c > 0) {
        double total = 0.0;
        for (double v : min_sq) total += v;
        if (total > 0.0) {
          double r = rng.uniform() * total;
          pick = n - 1;
          for (std::size_t i = 0; i < n; ++i) {
            r -= min_sq[i];
            if (r <= 0.0) {
              pick = i;
              break;
            }
          }
        } else {
          pick = rng.uniform_index(n);
        }
      }
      for (std::size_t kk = 0; kk < d; ++kk) centers(c, kk) = features(pick, kk);
      for (std::size_t i = 0; i < n; ++i)
        min_sq[i] = std::min(min_sq[i], squared_distance(features.row(i), centers.row(c), d));
    }

    // Lloyd iterations.
    std::vector<int> assign(n, 0);
    for (int iter = 0; iter < max_iter; ++iter) {
      for (std::size_t i = 0; i < n; ++i) {
        double best = std::numeric_limits<double>::infinity();
        int arg = 0;
        for (int c = 0; c < k; ++c) {
          const double sq =
              squared_distance(features.row(i), centers.row(static_cast<std::size_t>(c)), d);
          if (sq < best) {
            best = sq;
            arg = c;
          }
        }
        assign[i] = arg;
      }
      Matrix next(static_cast<std::size_t>(k), d);
      std::vector<int> count(static_cast<std::size_t>(k), 0);
      for (std::size_t i = 0; i < n; ++i) {
        ++count[static_cast<std::size_t>(assign[i])];
        for (std::size_t kk = 0; kk < d; ++kk)
          next(static_cast<std::size_t>(assign[i]), kk) += features(i, kk);
      }
      double movement = 0.0;
      for (int c = 0; c < k; ++c) {
        if (count[static_cast<std::size_t>(c)] == 0) {
          // Empty cluster keeps its previous center.
          for (std::size_t kk = 0; kk < d; ++kk)
            next(static_cast<std::size_t>(c), kk) = centers(static_cast<std::size_t>(c), kk);
        } else {
          for (std::size_t kk = 0; kk < d; ++kk)
            next(static_cast<std::size_t>(c), kk) /= count[static_cast<std::size_t>(c)];
        }
        movement = std::max(movement, std::sqrt(squared_distance(
                                          next.row(static_cast<std::size_t>(c)),
                                          centers.row(static_cast<std::size_t>(c)), d)));
      }
      centers = std::move(next);
      if (movement < kMoveTol) break;
    }

    double wcss = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      wcss += squared_distance(features.row(i),
                               centers.row(static_cast<std::size_t>(assign[i])), d);
    if (wcss < best_wcss) {
      best_wcss = wcss;
      best_assign = assign;
    }
  }

  // Dense relabeling by first occurrence.
  Partition out;
  out.cluster_of.resize(n);
  std::map<int, int> remap;
  for (std::size_t i = 0; i < n; ++i) {
    auto [it, inserted] = remap.emplace(best_assign[i], static_cast<int>(remap.size()));
    out.cluster_of[i] = it->second;
  }
  out.num_clusters = static_cast<int>(remap.size());
  return out;
}

/// Normalized mutual information with geometric-mean normalization.
/// Degenerate entropies: identical single-cluster partitions score 1,
/// otherwise a zero-entropy side scores 0.
inline double nmi(const Partition& a, const Partition& b) {
  if (a.cluster_of.size() != b.cluster_of.size())
    fail(ErrorCode::LengthMismatch, "nmi: partition lengths disagree");
  const std::size_t n = a.cluster_of.size();
  if (n == 0) fail(ErrorCode::LengthMismatch, "nmi: empty partitions");

  std::map<int, int> ca, cb;
  std::map<std::pair<int, int>, int> joint;
  for (std::size_t i = 0; i < n; ++i) {
    ++ca[a.cluster_of[i]];
    ++cb[b.cluster_of[i]];
    ++joint[{a.cluster_of[i], b.cluster_of[i]}];
  }
  auto entropy = [&](const std::map<int, int>& counts) {
    double h = 0.0;
    for (const auto& [id, c] : counts) {
      const double p = static_cast<double>(c) / static_cast<double>(n);
      h -= p * std::log(p);
    }
    return h;
  };
  const double ha = entropy(ca), hb = entropy(cb);
  if (ha == 0.0 || hb == 0.0) return ca.size() == 1 && cb.size() == 1 ? 1.0 : 0.0;

  double mi = 0.0;
  for (const auto& [ab, c] : joint) {
    const double pxy = static_cast<double>(c) / static_cast<double>(n);
    const double px = static_cast<double>(ca[ab.first]) / static_cast<double>(n);
    const double py = static_cast<double>(cb[ab.second]) / static_cast<double>(n);
    mi += pxy * std::log(pxy / (px * py));
  }
  return mi / std::sqrt(ha * hb);
}

inline Partition labels_to_partition(const std::vector<int>& labels) {
  Partition p;
  p.cluster_of.resize(labels.size());
  std::map<int, int> remap;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    auto [it, inserted] = remap.emplace(labels[i], static_cast<int>(remap.size()));
    p.cluster_of[i] = it->second;
  }
  p.num_clusters = static_cast<int>(remap.size());
  return p;
}

}  // namespace glpp
