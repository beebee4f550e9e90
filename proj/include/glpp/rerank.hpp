#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "glpp/core.hpp"
#include "glpp/error.hpp"

namespace glpp {

/// k-reciprocal neighbour set of one item over the joint query+gallery
/// index space.
struct ReciprocalSet {
  int owner = -1;
  std::vector<int> members;  // sorted ascending
};

struct RerankParams {
  int k1 = 50;
  int k2 = 20;
  double lambda = 0.85;
  /// By default lambda weights the original distance (the convention of the
  /// re-ranking literature). Flipping this weights the Jaccard term instead.
  bool lambda_on_jaccard = false;
};

/// Indices of the k smallest entries of a distance row, ties broken by
/// ascending index.
inline std::vector<int> knn(const std::vector<double>& dist_row, int k) {
  if (k < 0 || static_cast<std::size_t>(k) > dist_row.size())
    fail(ErrorCode::KTooLarge, "knn: k exceeds row length");
  std::vector<int> idx(dist_row.size());
  for (std::size_t j = 0; j < idx.size(); ++j) idx[j] = static_cast<int>(j);
  std::sort(idx.begin(), idx.end(), [&](int a, int b) {
    const double da = dist_row[static_cast<std::size_t>(a)];
    const double db = dist_row[static_cast<std::size_t>(b)];
    if (da != db) return da < db;
    return a < b;
  });
  idx.resize(static_cast<std::size_t>(k));
  return idx;
}

namespace detail {

/// k nearest neighbours of item i over the joint matrix, owner excluded.
inline std::vector<int> knn_of(const Matrix& joint, int i, int k) {
  const std::size_t n = joint.rows();
  std::vector<int> idx;
  idx.reserve(n - 1);
  for (std::size_t j = 0; j < n; ++j)
    if (static_cast<int>(j) != i) idx.push_back(static_cast<int>(j));
  std::sort(idx.begin(), idx.end(), [&](int a, int b) {
    const double da = joint(static_cast<std::size_t>(i), static_cast<std::size_t>(a));
    const double db = joint(static_cast<std::size_t>(i), static_cast<std::size_t>(b));
    if (da != db) return da < db;
    return a < b;
  });
  if (idx.size() > static_cast<std::size_t>(k)) idx.resize(static_cast<std::size_t>(k));
  return idx;
}

inline bool contains(const std::vector<int>& sorted_set, int value) {
  return std::binary_search(sorted_set.begin(), sorted_set.end(), value);
}

}  // namespace detail

/// R(i, k1) = { j in NN(i, k1) : i in NN(j, k1) }. The owner itself is
/// excluded from all neighbour lists.
inline std::vector<ReciprocalSet> k_reciprocal_sets(const Matrix& joint_dist, int k1) {
  const std::size_t n = joint_dist.rows();
  if (joint_dist.cols() != n)
    fail(ErrorCode::ShapeMismatch, "k_reciprocal_sets: joint matrix must be square");
  if (k1 < 1 || static_cast<std::size_t>(k1) > n - 1)
    fail(ErrorCode::KTooLarge, "k_reciprocal_sets: k1 out of range");

  std::vector<std::vector<int>> nn(n);
  for (std::size_t i = 0; i < n; ++i) {
    nn[i] = detail::knn_of(joint_dist, static_cast<int>(i), k1);
    std::sort(nn[i].begin(), nn[i].end());
  }
  std::vector<ReciprocalSet> sets(n);
  for (std::size_t i = 0; i < n; ++i) {
    sets[i].owner = static_cast<int>(i);
    for (int j : nn[i])
      if (detail::contains(nn[static_cast<std::size_t>(j)], static_cast<int>(i)))
        sets[i].members.push_back(j);
  }
  return sets;
}

/// Expansion per the published recipe: add the half-size reciprocal set of
/// each member whose overlap with the base set reaches two thirds of its
/// size, then keep only the k2 members closest to the owner.
inline std::vector<ReciprocalSet> expand_sets(const std::vector<ReciprocalSet>& sets,
                                              const Matrix& joint_dist, int k1, int k2) {
  if (k2 < 1) fail(ErrorCode::InvalidValue, "expand_sets: k2 must be >= 1");
  const int half = k1 / 2;
  std::vector<std::vector<int>> half_sets;
  if (half >= 1) {
    const auto rs = k_reciprocal_sets(joint_dist, half);
    half_sets.resize(rs.size());
    for (std::size_t i = 0; i < rs.size(); ++i) half_sets[i] = rs[i].members;
  } else {
    half_sets.resize(sets.size());
  }

  std::vector<ReciprocalSet> out(sets.size());
  for (std::size_t i = 0; i < sets.size(); ++i) {
    out[i].owner = sets[i].owner;
    std::vector<int> grown = sets[i].members;  // sorted
    for (int j : sets[i].members) {
      const std::vector<int>& cand = half_sets[static_cast<std::size_t>(j)];
      if (cand.empty()) continue;
      std::size_t inter = 0;
      for (int u : cand)
        if (detail::contains(sets[i].members, u)) ++inter;
      if (3 * inter >= 2 * cand.size())
        for (int u : cand)
          if (!detail::contains(grown, u))
            grown.insert(std::lower_bound(grown.begin(), grown.end(), u), u);
    }
    if (static_cast<int>(grown.size()) > k2) {
      std::sort(grown.begin(), grown.end(), [&](int a, int b) {
        const double da = joint_dist(static_cast<std::size_t>(out[i].owner),
                                     static_cast<std::size_t>(a));
        const double db = joint_dist(static_cast<std::size_t>(out[i].owner),
                                     static_cast<std::size_t>(b));
        if (da != db) return da < db;
        return a < b;
      });
      grown.resize(static_cast<std::size_t>(k2));
      std::sort(grown.begin(), grown.end());
    }
    out[i].members = std::move(grown);
  }
  return out;
}

/// 1 - |A n B| / |A u B|, with two empty sets at distance 1.
inline double jaccard_distance(const std::vector<int>& a, const std::vector<int>& b) {
  if (a.empty() && b.empty()) return 1.0;
  std::size_t inter = 0;
  for (int u : a)
    if (detail::contains(b, u)) ++inter;
  const std::size_t uni = a.size() + b.size() - inter;
  return 1.0 - static_cast<double>(inter) / static_cast<double>(uni);
}

/// Full k-reciprocal re-ranking of a query x gallery distance matrix.
/// `joint_dist` covers queries then gallery items, symmetric with zero
/// diagonal. An item whose reciprocal set comes back empty falls back to
/// its plain k1-NN list before expansion.
inline Matrix rerank(const Matrix& dist, const Matrix& joint_dist,
                     const RerankParams& params) {
  const std::size_t q = dist.rows(), g = dist.cols();
  const std::size_t n = q + g;
  if (joint_dist.rows() != n || joint_dist.cols() != n)
    fail(ErrorCode::ShapeMismatch, "rerank: joint matrix must be (q+g) x (q+g)");
  if (params.lambda < 0.0 || params.lambda > 1.0)
    fail(ErrorCode::InvalidValue, "rerank: lambda must be in [0, 1]");

  auto sets = k_reciprocal_sets(joint_dist, params.k1);
  for (auto& s : sets)
    if (s.members.empty()) {
      s.members = detail::knn_of(joint_dist, s.owner, params.k1);
      std::sort(s.members.begin(), s.members.end());
    }
  const auto expanded = expand_sets(sets, joint_dist, params.k1, params.k2);

  Matrix out(q, g);
  for (std::size_t i = 0; i < q; ++i)
    for (std::size_t j = 0; j < g; ++j) {
      const double dj = jaccard_distance(expanded[i].members, expanded[q + j].members);
      const double d0 = dist(i, j);
      out(i, j) = params.lambda_on_jaccard
                      ? (1.0 - params.lambda) * d0 + params.lambda * dj
                      : params.lambda * d0 + (1.0 - params.lambda) * dj;
    }
  return out;
}

/// Convenience: build the joint matrix from embeddings, then re-rank the
/// euclidean query/gallery distances.
inline Matrix rerank_embeddings(const Matrix& query, const Matrix& gallery,
                                const RerankParams& params) {
  const std::size_t q = query.rows(), g = gallery.rows();
  Matrix joint(q + g, q + g);
  auto row_of = [&](std::size_t i) {
    return i < q ? query.row(i) : gallery.row(i - q);
  };
  for (std::size_t i = 0; i < q + g; ++i)
    for (std::size_t j = i + 1; j < q + g; ++j) {
      const double d = std::sqrt(squared_distance(row_of(i), row_of(j), query.cols()));
      joint(i, j) = d;
      joint(j, i) = d;
    }
  Matrix dist(q, g);
  for (std::size_t i = 0; i < q; ++i)
    for (std::size_t j = 0; j < g; ++j) dist(i, j) = joint(i, q + j);
  return rerank(dist, joint, params);
}

}  // namespace glpp
