#pragma once

#include <cmath>
#include <vector>

#include "glpp/core.hpp"
#include "glpp/error.hpp"
#include "glpp/refine.hpp"
#include "glpp/simgraph.hpp"

namespace glpp {

constexpr double kLogFloor = 1e-12;

/// Loss value plus the cotangents a trainer needs, with the per-step
/// consistency values as diagnostics.
struct LossReport {
  double loss = 0.0;
  Matrix d_logits;
  Matrix d_features;
  std::vector<double> consistency_per_step;
};

struct GroupLossOptions {
  int t_steps = 3;
  double t_temp = 0.1;
  SimilarityMode mode = SimilarityMode::clamped;
  bool detach_w = false;  // ablation: no gradient through the similarity graph
};

/// Mean over non-anchor rows of -log(x_{i, y_i} + eps).
inline double cross_entropy(const Matrix& x, const std::vector<int>& labels,
                            const std::vector<bool>& anchor_mask) {
  const std::size_t n = x.rows();
  double total = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (anchor_mask[i]) continue;
    total += -std::log(x(i, static_cast<std::size_t>(labels[i])) + kLogFloor);
    ++count;
  }
  if (count == 0)
    fail(ErrorCode::AllAnchors, "cross_entropy: no non-anchor rows to score");
  return total / static_cast<double>(count);
}

/// Eq. 1 baseline: squared-distance contrastive pair loss.
inline double contrastive_loss(const std::vector<double>& fa, const std::vector<double>& fb,
                               bool same, double margin) {
  if (fa.size() != fb.size())
    fail(ErrorCode::ShapeMismatch, "contrastive_loss: dimensions disagree");
  double d2 = 0.0;
  for (std::size_t k = 0; k < fa.size(); ++k) {
    const double diff = fa[k] - fb[k];
    d2 += diff * diff;
  }
  if (same) return d2;
  return std::max(0.0, margin * margin - d2);
}

/// Eq. 2 baseline: anchor/positive/negative triplet loss.
inline double triplet_loss(const std::vector<double>& fa, const std::vector<double>& fp,
                           const std::vector<double>& fn, double margin) {
  if (fa.size() != fp.size() || fa.size() != fn.size())
    fail(ErrorCode::ShapeMismatch, "triplet_loss: dimensions disagree");
  double dp = 0.0, dn = 0.0;
  for (std::size_t k = 0; k < fa.size(); ++k) {
    const double ep = fa[k] - fp[k];
    const double en = fa[k] - fn[k];
    dp += ep * ep;
    dn += en * en;
  }
  return std::max(0.0, dp - dn + margin);
}

/// Full Group Loss head: similarity graph + T refinement steps +
/// cross-entropy, with exact reverse-mode gradients for both the logits
/// and the embedding features.
inline LossReport group_loss(const Matrix& features, const Matrix& logits,
                             const std::vector<int>& labels,
                             const std::vector<bool>& anchor_mask,
                             const GroupLossOptions& opt) {
  const std::size_t n = features.rows();
  const std::size_t m = logits.cols();
  if (logits.rows() != n || labels.size() != n || anchor_mask.size() != n)
    fail(ErrorCode::ShapeMismatch, "group_loss: batch dimensions disagree");

  // Forward.
  const SimilarityMatrix w = build_similarity(features, opt.mode);
  const AssignmentMatrix x0 = init_assignments(logits, opt.t_temp, anchor_mask, labels);
  const RefinementTrace trace = refine(w, x0, opt.t_steps);
  const Matrix& xT = trace.xs.back();

  LossReport report;
  report.loss = cross_entropy(xT, labels, anchor_mask);
  report.consistency_per_step.reserve(trace.xs.size());
  for (const Matrix& x : trace.xs)
    report.consistency_per_step.push_back(consistency(w, x));

  std::size_t scored = 0;
  for (std::size_t i = 0; i < n; ++i)
    if (!anchor_mask[i]) ++scored;

  // Backward: seed dX(T) from the cross-entropy.
  Matrix dx(n, m);
  for (std::size_t i = 0; i < n; ++i) {
    if (anchor_mask[i]) continue;
    const std::size_t y = static_cast<std::size_t>(labels[i]);
    dx(i, y) = -1.0 / (static_cast<double>(scored) * (xT(i, y) + kLogFloor));
  }

  // Walk the trace backwards through X' = rownorm(X .* Pi), Pi = W X.
  Matrix dw(n, n);
  for (int t = opt.t_steps - 1; t >= 0; --t) {
    const Matrix& x = trace.xs[static_cast<std::size_t>(t)];
    const Matrix& xn = trace.xs[static_cast<std::size_t>(t) + 1];
    const Matrix& pi = trace.pis[static_cast<std::size_t>(t)];
    const std::vector<double>& q = trace.qs[static_cast<std::size_t>(t)];

    Matrix dy(n, m);
    Matrix dx_prev(n, m);
    for (std::size_t i = 0; i < n; ++i) {
      if (anchor_mask[i]) {
        for (std::size_t j = 0; j < m; ++j) dx_prev(i, j) = dx(i, j);
        continue;
      }
      double r = 0.0;
      for (std::size_t j = 0; j < m; ++j) r += dx(i, j) * xn(i, j);
      for (std::size_t j = 0; j < m; ++j) dy(i, j) = (dx(i, j) - r) / q[i];
    }

    // Y = X .* Pi.
    Matrix dpi(n, m);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < m; ++j) {
        dx_prev(i, j) += dy(i, j) * pi(i, j);
        dpi(i, j) = dy(i, j) * x(i, j);
      }

    // Pi = W X.
    if (!opt.detach_w) {
      const Matrix dw_t = matmul_a_bt(dpi, x);
      for (std::size_t k = 0; k < dw.size(); ++k) dw.data()[k] += dw_t.data()[k];
    }
    const Matrix via_w = matmul_at_b(w.w, dpi);  // W^T dPi (W symmetric)
    for (std::size_t k = 0; k < dx_prev.size(); ++k)
      dx_prev.data()[k] += via_w.data()[k];

    dx = std::move(dx_prev);
  }

  // dX(0) -> d_logits through the temperature softmax (anchor rows are
  // constants and contribute nothing).
  report.d_logits = Matrix(n, m);
  for (std::size_t i = 0; i < n; ++i) {
    if (anchor_mask[i]) continue;
    double inner = 0.0;
    for (std::size_t j = 0; j < m; ++j) inner += dx(i, j) * x0.x(i, j);
    for (std::size_t j = 0; j < m; ++j)
      report.d_logits(i, j) = x0.x(i, j) * (dx(i, j) - inner) / opt.t_temp;
  }

  // dW -> d_features through the Pearson graph.
  if (opt.detach_w || opt.t_steps == 0) {
    report.d_features = Matrix(n, features.cols());
  } else {
    report.d_features = similarity_backward(features, dw, opt.mode);
  }
  return report;
}

}  // namespace glpp
