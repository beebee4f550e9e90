#pragma once

#include <algorithm>
#include <cmath>
#include <string>

#include "glpp/core.hpp"
#include "glpp/error.hpp"

namespace glpp {

enum class SimilarityMode { clamped, shifted };

inline const char* to_string(SimilarityMode mode) {
  return mode == SimilarityMode::clamped ? "clamped" : "shifted";
}

/// Non-negative, zero-diagonal, symmetric similarity graph over a batch.
struct SimilarityMatrix {
  Matrix w;
  SimilarityMode mode = SimilarityMode::clamped;
};

namespace detail {

constexpr double kVarianceFloor = 1e-12;

struct CenteredRows {
  Matrix centered;               // u_i = f_i - mean(f_i)
  std::vector<double> scale;     // s_i = sqrt(sum_k u_ik^2)
};

inline CenteredRows center_rows(const Matrix& f) {
  const std::size_t n = f.rows(), d = f.cols();
  CenteredRows out;
  out.centered = Matrix(n, d);
  out.scale.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    double mean = 0.0;
    for (std::size_t k = 0; k < d; ++k) mean += f(i, k);
    mean /= static_cast<double>(d);
    double ss = 0.0;
    for (std::size_t k = 0; k < d; ++k) {
      const double u = f(i, k) - mean;
      out.centered(i, k) = u;
      ss += u * u;
    }
    if (ss / static_cast<double>(d) <= kVarianceFloor)
      fail(ErrorCode::ZeroVarianceRow,
           "pearson_similarity: row " + std::to_string(i) + " has (near-)zero variance");
    out.scale[i] = std::sqrt(ss);
  }
  return out;
}

}  // namespace detail

/// Pairwise Pearson correlation of the embedding rows. Diagonal forced to
/// zero, output symmetric by construction.
inline Matrix pearson_similarity(const Matrix& f) {
  if (f.rows() < 2 || f.cols() < 2)
    fail(ErrorCode::ShapeMismatch, "pearson_similarity: need n >= 2 and d >= 2");
  const auto cr = detail::center_rows(f);
  const std::size_t n = f.rows(), d = f.cols();
  Matrix raw(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      double dot = 0.0;
      for (std::size_t k = 0; k < d; ++k) dot += cr.centered(i, k) * cr.centered(j, k);
      const double rho = dot / (cr.scale[i] * cr.scale[j]);
      raw(i, j) = rho;
      raw(j, i) = rho;
    }
  }
  return raw;
}

/// Default negative-similarity treatment: zero out everything below zero.
inline SimilarityMatrix clamp_negative(const Matrix& raw) {
  SimilarityMatrix out{raw, SimilarityMode::clamped};
  for (double& v : out.w.data()) v = std::max(0.0, v);
  return out;
}

/// Alternative treatment kept for the clamping-vs-shifting comparison:
/// subtract the most negative off-diagonal entry from every off-diagonal
/// entry. The zero diagonal is excluded from both the minimum and the shift.
inline SimilarityMatrix shift_negative(const Matrix& raw) {
  const std::size_t n = raw.rows();
  double lowest = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (i != j) lowest = std::min(lowest, raw(i, j));
  SimilarityMatrix out{raw, SimilarityMode::shifted};
  if (lowest < 0.0) {
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        if (i != j) out.w(i, j) = raw(i, j) - lowest;
  }
  return out;
}

inline SimilarityMatrix build_similarity(const Matrix& f, SimilarityMode mode) {
  const Matrix raw = pearson_similarity(f);
  return mode == SimilarityMode::clamped ? clamp_negative(raw) : shift_negative(raw);
}

/// Reverse-mode map for f -> clamp/shift(pearson(f)). `d_w` is the cotangent
/// on the post-clamp/shift matrix; returns the cotangent on f. The clamp
/// subgradient at exactly zero is zero; in shifted mode the argmin entry
/// (first in row-major order on ties) carries the shift's gradient.
inline Matrix similarity_backward(const Matrix& f, const Matrix& d_w, SimilarityMode mode) {
  const std::size_t n = f.rows(), d = f.cols();
  if (d_w.rows() != n || d_w.cols() != n)
    fail(ErrorCode::ShapeMismatch, "similarity_backward: cotangent shape disagrees");
  const auto cr = detail::center_rows(f);

  // Recompute raw correlations; build the cotangent on raw entries.
  Matrix rho(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      double dot = 0.0;
      for (std::size_t k = 0; k < d; ++k) dot += cr.centered(i, k) * cr.centered(j, k);
      rho(i, j) = dot / (cr.scale[i] * cr.scale[j]);
    }

  Matrix d_rho(n, n);
  if (mode == SimilarityMode::clamped) {
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        if (i != j && rho(i, j) > 0.0) d_rho(i, j) = d_w(i, j);
  } else {
    double lowest = 0.0;
    std::size_t arg_i = 0, arg_j = 0;
    bool found = false;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        if (i != j && rho(i, j) < lowest) {
          lowest = rho(i, j);
          arg_i = i;
          arg_j = j;
          found = true;
        }
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        if (i != j) {
          d_rho(i, j) = d_w(i, j);
          total += d_w(i, j);
        }
    if (found) d_rho(arg_i, arg_j) -= total;
  }

  // rho_ij = <u_i, u_j> / (s_i s_j); pull back to the centered rows, then
  // through the (self-adjoint) per-row centering.
  Matrix d_u(n, d);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      const double g = d_rho(i, j);
      if (g == 0.0) continue;
      const double inv_ss = 1.0 / (cr.scale[i] * cr.scale[j]);
      const double rij = rho(i, j);
      const double inv_si2 = 1.0 / (cr.scale[i] * cr.scale[i]);
      const double inv_sj2 = 1.0 / (cr.scale[j] * cr.scale[j]);
      for (std::size_t k = 0; k < d; ++k) {
        d_u(i, k) += g * (cr.centered(j, k) * inv_ss - rij * cr.centered(i, k) * inv_si2);
        d_u(j, k) += g * (cr.centered(i, k) * inv_ss - rij * cr.centered(j, k) * inv_sj2);
      }
    }

  Matrix d_f(n, d);
  for (std::size_t i = 0; i < n; ++i) {
    double mean = 0.0;
    for (std::size_t k = 0; k < d; ++k) mean += d_u(i, k);
    mean /= static_cast<double>(d);
    for (std::size_t k = 0; k < d; ++k) d_f(i, k) = d_u(i, k) - mean;
  }
  return d_f;
}

}  // namespace glpp
