#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "glpp/core.hpp"
#include "glpp/error.hpp"
#include "glpp/loss.hpp"
#include "glpp/metrics.hpp"
#include "glpp/rng.hpp"

namespace glpp {

enum class Split { train, test };

/// In-memory dataset split: raw input features plus dense class labels.
struct Dataset {
  Matrix features;          // N x d_in
  std::vector<int> labels;  // dense in [0, num_classes)
  int num_classes = 0;
  Split split = Split::train;
};

struct BatchSpec {
  int classes_per_batch = 4;   // c
  int samples_per_class = 9;   // k
  int anchors_per_class = 1;   // a, 0 allowed for the zero-anchor ablation
};

struct MiniBatch {
  std::vector<int> indices;       // c*k dataset rows
  std::vector<bool> anchor_mask;  // aligned with indices
};

struct SyntheticSpec {
  int num_classes = 8;
  int per_class = 50;
  int d_in = 16;
  double spread = 0.35;
  /// Mirror every class center through the origin; produces many negatively
  /// correlated off-class pairs for the clamping-vs-shifting comparison.
  bool antipodal = false;
};

namespace detail {

inline Matrix class_centers(const SyntheticSpec& spec, std::uint64_t seed) {
  Rng rng(derive_seed(seed, "synthetic-centers"));
  Matrix centers(static_cast<std::size_t>(spec.num_classes),
                 static_cast<std::size_t>(spec.d_in));
  const int base = spec.antipodal ? (spec.num_classes + 1) / 2 : spec.num_classes;
  for (int c = 0; c < base; ++c) {
    std::vector<double> v(static_cast<std::size_t>(spec.d_in));
    for (auto& x : v) x = rng.normal();
    const double nrm = norm2(v);
    for (int k = 0; k < spec.d_in; ++k)
      centers(static_cast<std::size_t>(c), static_cast<std::size_t>(k)) = v[static_cast<std::size_t>(k)] / nrm;
  }
  if (spec.antipodal) {
    for (int c = base; c < spec.num_classes; ++c)
      for (int k = 0; k < spec.d_in; ++k)
        centers(static_cast<std::size_t>(c), static_cast<std::size_t>(k)) =
            -centers(static_cast<std::size_t>(c - base), static_cast<std::size_t>(k));
  }
  return centers;
}

inline Dataset sample_blobs(const SyntheticSpec& spec, const Matrix& centers,
                            int per_class, std::uint64_t noise_seed, Split split) {
  Rng rng(noise_seed);
  Dataset out;
  out.num_classes = spec.num_classes;
  out.split = split;
  out.features = Matrix(static_cast<std::size_t>(spec.num_classes * per_class),
                        static_cast<std::size_t>(spec.d_in));
  out.labels.resize(static_cast<std::size_t>(spec.num_classes * per_class));
  // `spread` is the total noise magnitude: E||noise||^2 = spread^2, so the
  // difficulty of a given spread does not drift with d_in.
  const double sigma = spec.spread / std::sqrt(static_cast<double>(spec.d_in));
  std::size_t row = 0;
  for (int c = 0; c < spec.num_classes; ++c)
    for (int s = 0; s < per_class; ++s, ++row) {
      out.labels[row] = c;
      for (int k = 0; k < spec.d_in; ++k)
        out.features(row, static_cast<std::size_t>(k)) =
            centers(static_cast<std::size_t>(c), static_cast<std::size_t>(k)) +
            sigma * rng.normal();
    }
  return out;
}

}  // namespace detail

/// Gaussian blobs around class centers drawn on the unit sphere.
inline Dataset generate_synthetic(int num_classes, int per_class, int d_in, double spread,
                                  std::uint64_t seed, bool antipodal = false) {
  if (num_classes < 2)
    fail(ErrorCode::InvalidValue, "generate_synthetic: need at least 2 classes");
  SyntheticSpec spec{num_classes, per_class, d_in, spread, antipodal};
  const Matrix centers = detail::class_centers(spec, seed);
  return detail::sample_blobs(spec, centers, per_class,
                              derive_seed(seed, "synthetic-noise"), Split::train);
}

/// Train/test splits with disjoint class centers, the standard metric
/// learning protocol: retrieval quality is measured on classes the
/// embedder never saw.
struct SyntheticPair {
  Dataset train;
  Dataset test;
};

inline SyntheticPair generate_synthetic_splits(const SyntheticSpec& spec, int test_per_class,
                                               std::uint64_t seed) {
  if (spec.num_classes < 2)
    fail(ErrorCode::InvalidValue, "generate_synthetic_splits: need at least 2 classes");
  const Matrix train_centers = detail::class_centers(spec, derive_seed(seed, "split-train"));
  const Matrix test_centers = detail::class_centers(spec, derive_seed(seed, "split-test"));
  SyntheticPair out;
  out.train = detail::sample_blobs(spec, train_centers, spec.per_class,
                                   derive_seed(seed, "synthetic-noise"), Split::train);
  out.test = detail::sample_blobs(spec, test_centers, test_per_class,
                                  derive_seed(seed, "synthetic-noise-test"), Split::test);
  return out;
}

/// Class-balanced episodic batch: c distinct classes, k distinct samples
/// each, the first a per class flagged as anchors. Advances `rng`.
inline MiniBatch sample_batch(const Dataset& data, const BatchSpec& spec, Rng& rng) {
  if (spec.anchors_per_class < 0 || spec.anchors_per_class >= spec.samples_per_class)
    fail(ErrorCode::InvalidValue, "sample_batch: need 0 <= anchors < samples_per_class");
  std::map<int, std::vector<int>> by_class;
  for (std::size_t i = 0; i < data.labels.size(); ++i)
    by_class[data.labels[i]].push_back(static_cast<int>(i));
  if (static_cast<int>(by_class.size()) < spec.classes_per_batch)
    fail(ErrorCode::InsufficientSamples, "sample_batch: fewer classes than requested");

  std::vector<int> class_ids;
  class_ids.reserve(by_class.size());
  for (const auto& [c, rows] : by_class) class_ids.push_back(c);
  rng.shuffle(class_ids);
  class_ids.resize(static_cast<std::size_t>(spec.classes_per_batch));

  MiniBatch batch;
  for (int c : class_ids) {
    auto rows = by_class[c];
    if (static_cast<int>(rows.size()) < spec.samples_per_class)
      fail(ErrorCode::InsufficientSamples,
           "sample_batch: class " + std::to_string(c) + " has too few samples");
    rng.shuffle(rows);
    for (int s = 0; s < spec.samples_per_class; ++s) {
      batch.indices.push_back(rows[static_cast<std::size_t>(s)]);
      batch.anchor_mask.push_back(s < spec.anchors_per_class);
    }
  }
  return batch;
}

// ---------------------------------------------------------------------------
// The desk-scale embedder: d_in -> hidden (rectifier) -> p x d_emb pre-pool
// block, plus a linear class head on the pooled embedding. Parameters live
// in one flat vector so the optimizer and gradient checks stay simple.
// ---------------------------------------------------------------------------

struct MlpShape {
  int d_in = 16;
  int hidden = 64;
  int p = 4;
  int d_emb = 32;
  int num_classes = 8;
};

class MlpEmbedder {
 public:
  MlpEmbedder() = default;
  MlpEmbedder(const MlpShape& shape, std::uint64_t seed) : shape_(shape) {
    theta_.assign(parameter_count_for(shape), 0.0);
    Rng rng(derive_seed(seed, "net-init"));
    // Uniform fan-in initialization per block; biases start at zero.
    init_block(rng, w1_off(), shape_.hidden * shape_.d_in, shape_.d_in);
    init_block(rng, w2_off(), shape_.p * shape_.d_emb * shape_.hidden, shape_.hidden);
    init_block(rng, wc_off(), shape_.num_classes * shape_.d_emb, shape_.d_emb);
  }

  const MlpShape& shape() const noexcept { return shape_; }
  std::vector<double>& parameters() noexcept { return theta_; }
  const std::vector<double>& parameters() const noexcept { return theta_; }
  std::size_t parameter_count() const noexcept { return theta_.size(); }

  static std::size_t parameter_count_for(const MlpShape& s) {
    return static_cast<std::size_t>(s.hidden * s.d_in + s.hidden +
                                    s.p * s.d_emb * s.hidden + s.p * s.d_emb +
                                    s.num_classes * s.d_emb + s.num_classes);
  }

  /// Pre-pool block before any final activation: batch x (p * d_emb),
  /// laid out as p consecutive d_emb groups per row.
  Matrix pre_pool(const Matrix& inputs) const {
    const Matrix h1 = hidden_forward(inputs);
    return affine(h1, theta_.data() + w2_off(), theta_.data() + b2_off(),
                  shape_.p * shape_.d_emb, shape_.hidden);
  }

  /// Training-path embedding: rectifier on the pre-pool block, then average
  /// pooling over the p axis.
  Matrix embed_train(const Matrix& inputs) const {
    const Matrix pre = pre_pool(inputs);
    return pool_relu(pre);
  }

  Matrix logits_from_embedding(const Matrix& emb) const {
    return affine(emb, theta_.data() + wc_off(), theta_.data() + bc_off(),
                  shape_.num_classes, shape_.d_emb);
  }

  /// Full training forward with the intermediates needed for backprop.
  struct Forward {
    Matrix z1, h1;      // hidden pre-activation / activation
    Matrix pre;         // pre-pool block
    Matrix embedding;   // pooled, rectified
    Matrix logits;
  };

  Forward forward(const Matrix& inputs) const {
    if (static_cast<int>(inputs.cols()) != shape_.d_in)
      fail(ErrorCode::ShapeMismatch, "MlpEmbedder: input width disagrees with d_in");
    Forward f;
    f.z1 = affine(inputs, theta_.data() + w1_off(), theta_.data() + b1_off(),
                  shape_.hidden, shape_.d_in);
    f.h1 = f.z1;
    for (double& v : f.h1.data()) v = std::max(0.0, v);
    f.pre = affine(f.h1, theta_.data() + w2_off(), theta_.data() + b2_off(),
                   shape_.p * shape_.d_emb, shape_.hidden);
    f.embedding = pool_relu(f.pre);
    f.logits = logits_from_embedding(f.embedding);
    return f;
  }

  /// Reverse pass: cotangents on the pooled embedding and on the logits
  /// produce the full parameter gradient.
  std::vector<double> backward(const Matrix& inputs, const Forward& f,
                               const Matrix& d_embedding, const Matrix& d_logits) const {
    const std::size_t n = inputs.rows();
    std::vector<double> grad(theta_.size(), 0.0);

    // Class head.
    Matrix d_emb_total = d_embedding;
    for (std::size_t i = 0; i < n; ++i)
      for (int c = 0; c < shape_.num_classes; ++c) {
        const double g = d_logits(i, static_cast<std::size_t>(c));
        if (g == 0.0) continue;
        grad[bc_off() + static_cast<std::size_t>(c)] += g;
        for (int k = 0; k < shape_.d_emb; ++k) {
          grad[wc_off() + static_cast<std::size_t>(c * shape_.d_emb + k)] +=
              g * f.embedding(i, static_cast<std::size_t>(k));
          d_emb_total(i, static_cast<std::size_t>(k)) +=
              g * theta_[wc_off() + static_cast<std::size_t>(c * shape_.d_emb + k)];
        }
      }

    // Pooling + rectifier: embedding = mean_k relu(pre block k).
    Matrix d_pre(n, static_cast<std::size_t>(shape_.p * shape_.d_emb));
    const double inv_p = 1.0 / static_cast<double>(shape_.p);
    for (std::size_t i = 0; i < n; ++i)
      for (int blk = 0; blk < shape_.p; ++blk)
        for (int k = 0; k < shape_.d_emb; ++k) {
          const std::size_t col = static_cast<std::size_t>(blk * shape_.d_emb + k);
          if (f.pre(i, col) > 0.0)
            d_pre(i, col) = d_emb_total(i, static_cast<std::size_t>(k)) * inv_p;
        }

    // Second affine block.
    Matrix d_h1(n, static_cast<std::size_t>(shape_.hidden));
    accum_affine_backward(f.h1, d_pre, shape_.p * shape_.d_emb, shape_.hidden,
                          grad.data() + w2_off(), grad.data() + b2_off(), &d_h1,
                          theta_.data() + w2_off());

    // Hidden rectifier.
    for (std::size_t i = 0; i < n; ++i)
      for (int k = 0; k < shape_.hidden; ++k)
        if (f.z1(i, static_cast<std::size_t>(k)) <= 0.0)
          d_h1(i, static_cast<std::size_t>(k)) = 0.0;

    // First affine block.
    accum_affine_backward(inputs, d_h1, shape_.hidden, shape_.d_in,
                          grad.data() + w1_off(), grad.data() + b1_off(), nullptr,
                          theta_.data() + w1_off());
    return grad;
  }

 private:
  static Matrix affine(const Matrix& x, const double* w, const double* b, int out_dim,
                       int in_dim) {
    Matrix y(x.rows(), static_cast<std::size_t>(out_dim));
    for (std::size_t i = 0; i < x.rows(); ++i)
      for (int o = 0; o < out_dim; ++o) {
        double s = b[o];
        const double* wrow = w + static_cast<std::size_t>(o) * static_cast<std::size_t>(in_dim);
        for (int k = 0; k < in_dim; ++k) s += wrow[k] * x(i, static_cast<std::size_t>(k));
        y(i, static_cast<std::size_t>(o)) = s;
      }
    return y;
  }

  static void accum_affine_backward(const Matrix& x, const Matrix& dy, int out_dim,
                                    int in_dim, double* dw, double* db, Matrix* dx,
                                    const double* w) {
    for (std::size_t i = 0; i < x.rows(); ++i)
      for (int o = 0; o < out_dim; ++o) {
        const double g = dy(i, static_cast<std::size_t>(o));
        if (g == 0.0) continue;
        db[o] += g;
        double* dwrow = dw + static_cast<std::size_t>(o) * static_cast<std::size_t>(in_dim);
        const double* wrow = w + static_cast<std::size_t>(o) * static_cast<std::size_t>(in_dim);
        for (int k = 0; k < in_dim; ++k) {
          dwrow[k] += g * x(i, static_cast<std::size_t>(k));
          if (dx) (*dx)(i, static_cast<std::size_t>(k)) += g * wrow[k];
        }
      }
  }

  Matrix hidden_forward(const Matrix& inputs) const {
    if (static_cast<int>(inputs.cols()) != shape_.d_in)
      fail(ErrorCode::ShapeMismatch, "MlpEmbedder: input width disagrees with d_in");
    Matrix h = affine(inputs, theta_.data() + w1_off(), theta_.data() + b1_off(),
                      shape_.hidden, shape_.d_in);
    for (double& v : h.data()) v = std::max(0.0, v);
    return h;
  }

  Matrix pool_relu(const Matrix& pre) const {
    Matrix out(pre.rows(), static_cast<std::size_t>(shape_.d_emb));
    for (std::size_t i = 0; i < pre.rows(); ++i)
      for (int k = 0; k < shape_.d_emb; ++k) {
        double s = 0.0;
        for (int blk = 0; blk < shape_.p; ++blk)
          s += std::max(0.0, pre(i, static_cast<std::size_t>(blk * shape_.d_emb + k)));
        // Same division as mixed_pool's average branch, so the neutral
        // inference pipeline reproduces this path bitwise.
        out(i, static_cast<std::size_t>(k)) = s / static_cast<double>(shape_.p);
      }
    return out;
  }

  void init_block(Rng& rng, std::size_t offset, int count, int fan_in) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (int i = 0; i < count; ++i)
      theta_[offset + static_cast<std::size_t>(i)] = rng.uniform(-bound, bound);
  }

  std::size_t w1_off() const { return 0; }
  std::size_t b1_off() const { return static_cast<std::size_t>(shape_.hidden * shape_.d_in); }
  std::size_t w2_off() const { return b1_off() + static_cast<std::size_t>(shape_.hidden); }
  std::size_t b2_off() const {
    return w2_off() + static_cast<std::size_t>(shape_.p * shape_.d_emb * shape_.hidden);
  }
  std::size_t wc_off() const { return b2_off() + static_cast<std::size_t>(shape_.p * shape_.d_emb); }
  std::size_t bc_off() const {
    return wc_off() + static_cast<std::size_t>(shape_.num_classes * shape_.d_emb);
  }

  MlpShape shape_;
  std::vector<double> theta_;
};

// ---------------------------------------------------------------------------
// Optimizer.
// ---------------------------------------------------------------------------

enum class OptimizerKind { sgd, adam };

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::sgd;
  double lr = 0.1;
  double momentum = 0.9;
  double weight_decay = 0.0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct OptimizerState {
  std::vector<double> velocity;  // sgd momentum buffer / adam first moment
  std::vector<double> second;    // adam second moment
  long step = 0;
};

/// One update in place. SGD: v = mu*v + (g + wd*p); p -= lr*v.
/// Adam: bias-corrected moments with the usual defaults.
inline void optimizer_step(std::vector<double>& params, const std::vector<double>& grads,
                           OptimizerState& state, const OptimizerConfig& cfg) {
  if (params.size() != grads.size())
    fail(ErrorCode::ShapeMismatch, "optimizer_step: parameter/gradient sizes disagree");
  if (state.velocity.size() != params.size()) state.velocity.assign(params.size(), 0.0);
  ++state.step;
  if (cfg.kind == OptimizerKind::sgd) {
    for (std::size_t i = 0; i < params.size(); ++i) {
      const double g = grads[i] + cfg.weight_decay * params[i];
      state.velocity[i] = cfg.momentum * state.velocity[i] + g;
      params[i] -= cfg.lr * state.velocity[i];
    }
  } else {
    if (state.second.size() != params.size()) state.second.assign(params.size(), 0.0);
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
    for (std::size_t i = 0; i < params.size(); ++i) {
      const double g = grads[i] + cfg.weight_decay * params[i];
      state.velocity[i] = cfg.beta1 * state.velocity[i] + (1.0 - cfg.beta1) * g;
      state.second[i] = cfg.beta2 * state.second[i] + (1.0 - cfg.beta2) * g * g;
      const double mhat = state.velocity[i] / bc1;
      const double vhat = state.second[i] / bc2;
      params[i] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
    }
  }
}

// ---------------------------------------------------------------------------
// Training loop.
// ---------------------------------------------------------------------------

struct TrainConfig {
  int epochs = 20;
  int warmup_epochs = 2;  // classification-style warmup: T_steps forced to 0
  BatchSpec batch;
  GroupLossOptions loss;
  OptimizerConfig optim;
  std::uint64_t seed = 42;
  bool evaluate_each_epoch = true;
};

struct EpochStats {
  int epoch = 0;
  double lr = 0.0;
  double mean_loss = 0.0;
  double mean_final_consistency = 0.0;
  double test_recall1 = 0.0;
  double test_nmi = 0.0;
};

struct TrainLog {
  std::vector<EpochStats> epochs;
};

/// Euclidean-normalized training-path embeddings; the evaluation default.
inline Matrix normalized_embeddings(const MlpEmbedder& net, const Matrix& inputs) {
  Matrix emb = net.embed_train(inputs);
  for (std::size_t i = 0; i < emb.rows(); ++i) {
    double nrm = 0.0;
    for (std::size_t k = 0; k < emb.cols(); ++k) nrm += emb(i, k) * emb(i, k);
    nrm = std::sqrt(nrm);
    if (nrm > 0.0)
      for (std::size_t k = 0; k < emb.cols(); ++k) emb(i, k) /= nrm;
  }
  return emb;
}

struct EvalResult {
  double recall1 = 0.0;
  double nmi_value = 0.0;
};

inline EvalResult evaluate_split(const MlpEmbedder& net, const Dataset& data,
                                 std::uint64_t seed) {
  const Matrix emb = normalized_embeddings(net, data.features);
  const Matrix dist = pairwise_euclidean(emb, emb);
  const auto ranked = rank_retrieval(dist, data.labels, data.labels, true);
  EvalResult r;
  r.recall1 = recall_at_k(ranked, 1);
  const Partition pred = kmeans(emb, data.num_classes, derive_seed(seed, "eval-kmeans"));
  r.nmi_value = nmi(pred, labels_to_partition(data.labels));
  return r;
}

/// Deterministic episodic training. LR drops to 0.1 * lr0 at epoch E/2;
/// the first warmup epochs run with T_steps = 0.
inline TrainLog train(const Dataset& train_set, const Dataset& test_set, MlpEmbedder& net,
                      const TrainConfig& cfg) {
  TrainLog log;
  if (cfg.epochs <= 0) return log;

  Rng batch_rng(derive_seed(cfg.seed, "batch-sampler"));
  OptimizerState opt_state;
  const int batch_size = cfg.batch.classes_per_batch * cfg.batch.samples_per_class;
  const int steps_per_epoch =
      std::max<int>(1, static_cast<int>(train_set.labels.size()) / batch_size);

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    OptimizerConfig opt = cfg.optim;
    if (epoch >= cfg.epochs / 2) opt.lr = 0.1 * cfg.optim.lr;

    GroupLossOptions loss_opt = cfg.loss;
    if (epoch < cfg.warmup_epochs) loss_opt.t_steps = 0;

    double loss_sum = 0.0;
    double consistency_sum = 0.0;
    for (int step = 0; step < steps_per_epoch; ++step) {
      MiniBatch batch;
      try {
        batch = sample_batch(train_set, cfg.batch, batch_rng);
      } catch (const Error& e) {
        fail(e.code(), std::string(e.what()) + " (epoch " + std::to_string(epoch) +
                           ", step " + std::to_string(step) + ")");
      }
      Matrix inputs(batch.indices.size(), train_set.features.cols());
      std::vector<int> labels(batch.indices.size());
      for (std::size_t i = 0; i < batch.indices.size(); ++i) {
        labels[i] = train_set.labels[static_cast<std::size_t>(batch.indices[i])];
        for (std::size_t k = 0; k < inputs.cols(); ++k)
          inputs(i, k) = train_set.features(static_cast<std::size_t>(batch.indices[i]), k);
      }

      const auto fwd = net.forward(inputs);
      LossReport report;
      try {
        report = group_loss(fwd.embedding, fwd.logits, labels, batch.anchor_mask, loss_opt);
      } catch (const Error& e) {
        fail(e.code(), std::string(e.what()) + " (epoch " + std::to_string(epoch) +
                           ", step " + std::to_string(step) + ")");
      }
      const auto grads = net.backward(inputs, fwd, report.d_features, report.d_logits);
      optimizer_step(net.parameters(), grads, opt_state, opt);

      loss_sum += report.loss;
      consistency_sum += report.consistency_per_step.back();
    }

    EpochStats stats;
    stats.epoch = epoch;
    stats.lr = opt.lr;
    stats.mean_loss = loss_sum / steps_per_epoch;
    stats.mean_final_consistency = consistency_sum / steps_per_epoch;
    if (cfg.evaluate_each_epoch) {
      const auto eval = evaluate_split(net, test_set, cfg.seed);
      stats.test_recall1 = eval.recall1;
      stats.test_nmi = eval.nmi_value;
    }
    log.epochs.push_back(stats);
  }
  return log;
}

}  // namespace glpp
