#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "glpp/core.hpp"
#include "glpp/error.hpp"
#include "glpp/simgraph.hpp"

namespace glpp {

/// Row-stochastic image-label soft assignments with frozen anchor rows.
struct AssignmentMatrix {
  Matrix x;                       // n x m, rows on the simplex
  std::vector<bool> anchor_mask;  // n flags
  std::vector<int> labels;        // n class indices in [0, m)
};

/// Everything needed to replay (and differentiate) the refinement loop:
/// assignment snapshots X(0..T), supports Pi(t), and the Q(t) diagonals.
struct RefinementTrace {
  std::vector<Matrix> xs;
  std::vector<Matrix> pis;
  std::vector<std::vector<double>> qs;
  SimilarityMatrix w;
  std::vector<bool> anchor_mask;
};

constexpr double kSupportFloor = 1e-30;

/// Row-wise softmax of logits / T_temp, stabilized by max subtraction.
inline Matrix temperature_softmax(const Matrix& logits, double t_temp) {
  if (!(t_temp > 0.0))
    fail(ErrorCode::NonPositiveTemperature, "temperature_softmax: T must be > 0");
  const std::size_t n = logits.rows(), m = logits.cols();
  Matrix out(n, m);
  for (std::size_t i = 0; i < n; ++i) {
    double hi = logits(i, 0);
    for (std::size_t j = 1; j < m; ++j) hi = std::max(hi, logits(i, j));
    double z = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
      const double e = std::exp((logits(i, j) - hi) / t_temp);
      out(i, j) = e;
      z += e;
    }
    for (std::size_t j = 0; j < m; ++j) out(i, j) /= z;
  }
  return out;
}

/// Softmax priors for non-anchor rows; anchors replaced with one-hot rows
/// at their ground-truth label.
inline AssignmentMatrix init_assignments(const Matrix& logits, double t_temp,
                                         const std::vector<bool>& anchor_mask,
                                         const std::vector<int>& labels) {
  const std::size_t n = logits.rows();
  const int m = static_cast<int>(logits.cols());
  if (anchor_mask.size() != n || labels.size() != n)
    fail(ErrorCode::ShapeMismatch, "init_assignments: mask/label length disagrees");
  AssignmentMatrix out{temperature_softmax(logits, t_temp), anchor_mask, labels};
  for (std::size_t i = 0; i < n; ++i) {
    if (!anchor_mask[i]) continue;
    if (labels[i] < 0 || labels[i] >= m)
      fail(ErrorCode::LabelOutOfRange,
           "init_assignments: anchor " + std::to_string(i) + " label out of range");
    for (int j = 0; j < m; ++j) out.x(i, j) = 0.0;
    out.x(i, static_cast<std::size_t>(labels[i])) = 1.0;
  }
  return out;
}

/// Support matrix Pi = W * X.
inline Matrix support(const SimilarityMatrix& w, const Matrix& x) {
  return matmul(w.w, x);
}

/// One replicator step: non-anchor rows become x .* pi renormalized by the
/// row sum; anchor rows are copied unchanged.
inline Matrix refine_step(const Matrix& x, const Matrix& pi,
                          const std::vector<bool>& anchor_mask,
                          std::vector<double>* q_out = nullptr) {
  if (!x.same_shape(pi))
    fail(ErrorCode::ShapeMismatch, "refine_step: X and Pi shapes disagree");
  const std::size_t n = x.rows(), m = x.cols();
  Matrix out(n, m);
  if (q_out) q_out->assign(n, 1.0);
  for (std::size_t i = 0; i < n; ++i) {
    if (i < anchor_mask.size() && anchor_mask[i]) {
      for (std::size_t j = 0; j < m; ++j) out(i, j) = x(i, j);
      continue;
    }
    double q = 0.0;
    for (std::size_t j = 0; j < m; ++j) q += x(i, j) * pi(i, j);
    if (!(q > kSupportFloor))
      fail(ErrorCode::DegenerateSupport,
           "refine_step: row " + std::to_string(i) + " has vanishing support");
    for (std::size_t j = 0; j < m; ++j) out(i, j) = x(i, j) * pi(i, j) / q;
    if (q_out) (*q_out)[i] = q;
  }
  return out;
}

/// Run T refinement steps, recording the full trace for exact backprop.
inline RefinementTrace refine(const SimilarityMatrix& w, const AssignmentMatrix& x0,
                              int t_steps) {
  if (t_steps < 0) fail(ErrorCode::InvalidValue, "refine: T_steps must be >= 0");
  RefinementTrace trace;
  trace.w = w;
  trace.anchor_mask = x0.anchor_mask;
  trace.xs.push_back(x0.x);
  for (int t = 0; t < t_steps; ++t) {
    Matrix pi = support(w, trace.xs.back());
    std::vector<double> q;
    Matrix next;
    try {
      next = refine_step(trace.xs.back(), pi, x0.anchor_mask, &q);
    } catch (const Error& e) {
      if (e.code() == ErrorCode::DegenerateSupport)
        fail(ErrorCode::DegenerateSupport,
             std::string(e.what()) + " (at step " + std::to_string(t) + ")");
      throw;
    }
    trace.pis.push_back(std::move(pi));
    trace.qs.push_back(std::move(q));
    trace.xs.push_back(std::move(next));
  }
  return trace;
}

/// Consistency functional F(X) = sum_ij sum_lambda w_ij x_il x_jl; the
/// quantity the dynamics provably never decrease on nonnegative W.
inline double consistency(const SimilarityMatrix& w, const Matrix& x) {
  const std::size_t n = x.rows(), m = x.cols();
  if (w.w.rows() != n || w.w.cols() != n)
    fail(ErrorCode::ShapeMismatch, "consistency: W and X shapes disagree");
  double f = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      const double wij = w.w(i, j);
      if (wij == 0.0) continue;
      double dot = 0.0;
      for (std::size_t l = 0; l < m; ++l) dot += x(i, l) * x(j, l);
      f += wij * dot;
    }
  return f;
}

}  // namespace glpp
