#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "glpp/core.hpp"
#include "glpp/embednet.hpp"
#include "glpp/error.hpp"

namespace glpp {

/// Input-space involutions available for flip inference. Synthetic vectors
/// have no image-flip, so the default is coordinate reversal.
enum class FlipTransform { identity, reverse };

inline const char* to_string(FlipTransform t) {
  return t == FlipTransform::identity ? "identity" : "reverse";
}

/// Test-time toolbox settings (all off / neutral by default).
struct InferenceConfig {
  double alpha = 0.0;        // mixed pooling weight: 0 = average (train-time)
  double beta = 0.0;         // 0 = plain euclidean normalization
  bool use_beta = true;      // false skips normalization entirely
  double leaky_slope = 1.0;  // final activation slope at inference, (0, 1]
  bool use_flip = false;
  FlipTransform transform = FlipTransform::reverse;
  /// Default averages raw embeddings, then normalizes; flipping this
  /// normalizes each branch before averaging.
  bool flip_after_normalize = false;

  void validate() const {
    if (alpha < 0.0 || alpha > 1.0)
      fail(ErrorCode::InvalidValue, "inference: alpha must be in [0, 1]");
    if (beta < 0.0) fail(ErrorCode::InvalidValue, "inference: beta must be >= 0");
    if (!(leaky_slope > 0.0) || leaky_slope > 1.0)
      fail(ErrorCode::InvalidValue, "inference: leaky_slope must be in (0, 1]");
  }
};

/// v / ||v|| + beta * v.
inline std::vector<double> beta_normalize(const std::vector<double>& v, double beta) {
  const double nrm = norm2(v);
  if (nrm <= 0.0) fail(ErrorCode::ZeroVector, "beta_normalize: zero vector");
  std::vector<double> out(v.size());
  for (std::size_t k = 0; k < v.size(); ++k) out[k] = v[k] / nrm + beta * v[k];
  return out;
}

/// Columnwise alpha * max + (1 - alpha) * mean over the p axis.
inline std::vector<double> mixed_pool(const Matrix& pre_pool, double alpha) {
  if (pre_pool.rows() < 1)
    fail(ErrorCode::ShapeMismatch, "mixed_pool: need at least one pre-pool vector");
  const std::size_t p = pre_pool.rows(), d = pre_pool.cols();
  std::vector<double> out(d);
  for (std::size_t k = 0; k < d; ++k) {
    double mx = pre_pool(0, k);
    double sum = 0.0;
    for (std::size_t b = 0; b < p; ++b) {
      mx = std::max(mx, pre_pool(b, k));
      sum += pre_pool(b, k);
    }
    out[k] = alpha * mx + (1.0 - alpha) * (sum / static_cast<double>(p));
  }
  return out;
}

/// Leaky rectifier on the stored pre-activation; slope 1 is the identity
/// on negatives. Inference-only (training keeps the standard rectifier).
inline Matrix leaky_final(const Matrix& pre_activation, double slope) {
  if (!(slope > 0.0) || slope > 1.0)
    fail(ErrorCode::InvalidValue, "leaky_final: slope must be in (0, 1]");
  Matrix out = pre_activation;
  for (double& v : out.data()) v = v >= 0.0 ? v : slope * v;
  return out;
}

using EmbedFn = std::function<std::vector<double>(const std::vector<double>&)>;
using TransformFn = std::function<std::vector<double>(const std::vector<double>&)>;

/// Average of the embedding over the transform's two-element orbit. The
/// transform must be an involution; checked on the actual input.
inline std::vector<double> tta_average(const EmbedFn& embed_fn, const TransformFn& transform,
                                       const std::vector<double>& input) {
  const std::vector<double> flipped = transform(input);
  if (transform(flipped) != input)
    fail(ErrorCode::NotInvolution, "tta_average: transform is not an involution");
  const std::vector<double> a = embed_fn(input);
  const std::vector<double> b = embed_fn(flipped);
  if (a.size() != b.size())
    fail(ErrorCode::ShapeMismatch, "tta_average: embed_fn output sizes disagree");
  // IEEE addition is commutative, so tta(x) == tta(transform(x)) bitwise.
  std::vector<double> out(a.size());
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = (a[k] + b[k]) / 2.0;
  return out;
}

/// Concatenation of per-model embeddings, in list order.
inline std::vector<double> ensemble_concat(const std::vector<std::vector<double>>& embeddings) {
  if (embeddings.empty()) fail(ErrorCode::EmptyList, "ensemble_concat: empty list");
  std::vector<double> out;
  std::size_t total = 0;
  for (const auto& e : embeddings) total += e.size();
  out.reserve(total);
  for (const auto& e : embeddings) out.insert(out.end(), e.begin(), e.end());
  return out;
}

inline std::vector<double> apply_flip(FlipTransform t, std::vector<double> v) {
  if (t == FlipTransform::reverse) std::reverse(v.begin(), v.end());
  return v;
}

/// Full test-time chain per input: pre-pool forward, leaky final
/// activation, mixed pooling, optional flip averaging, beta normalization.
inline Matrix inference_pipeline(const MlpEmbedder& net, const Matrix& inputs,
                                 const InferenceConfig& cfg) {
  cfg.validate();
  const int p = net.shape().p;
  const int d_emb = net.shape().d_emb;

  auto raw_embed = [&](const std::vector<double>& x) {
    Matrix row(1, x.size());
    for (std::size_t k = 0; k < x.size(); ++k) row(0, k) = x[k];
    const Matrix pre_flat = net.pre_pool(row);
    Matrix pre(static_cast<std::size_t>(p), static_cast<std::size_t>(d_emb));
    for (int b = 0; b < p; ++b)
      for (int k = 0; k < d_emb; ++k)
        pre(static_cast<std::size_t>(b), static_cast<std::size_t>(k)) =
            pre_flat(0, static_cast<std::size_t>(b * d_emb + k));
    return mixed_pool(leaky_final(pre, cfg.leaky_slope), cfg.alpha);
  };

  auto normalize = [&](const std::vector<double>& v) {
    return cfg.use_beta ? beta_normalize(v, cfg.beta) : v;
  };

  auto transform = [&](const std::vector<double>& v) { return apply_flip(cfg.transform, v); };

  Matrix out(inputs.rows(), static_cast<std::size_t>(d_emb));
  for (std::size_t i = 0; i < inputs.rows(); ++i) {
    std::vector<double> x(inputs.row(i), inputs.row(i) + inputs.cols());
    std::vector<double> e;
    if (cfg.use_flip) {
      if (cfg.flip_after_normalize)
        e = tta_average([&](const std::vector<double>& v) { return normalize(raw_embed(v)); },
                        transform, x);
      else
        e = normalize(tta_average(raw_embed, transform, x));
    } else {
      e = normalize(raw_embed(x));
    }
    for (int k = 0; k < d_emb; ++k) out(i, static_cast<std::size_t>(k)) = e[static_cast<std::size_t>(k)];
  }
  return out;
}

}  // namespace glpp
