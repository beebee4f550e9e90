#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "glpp/inference.hpp"
#include "glpp/metrics.hpp"
#include "oracles.hpp"

using glpp::Matrix;

TEST_CASE("beta normalization values and direction preservation") {
  // beta = 0 is plain euclidean normalization.
  const auto unit = glpp::beta_normalize({3.0, 4.0}, 0.0);
  CHECK(unit[0] == Catch::Approx(0.6));
  CHECK(unit[1] == Catch::Approx(0.8));
  CHECK(std::abs(glpp::norm2(unit) - 1.0) < 1e-12);

  // Unit vector with beta = 1 doubles.
  const auto doubled = glpp::beta_normalize({1.0, 0.0}, 1.0);
  CHECK(doubled[0] == Catch::Approx(2.0));
  CHECK(doubled[1] == 0.0);

  // The published CUB value.
  const auto cub = glpp::beta_normalize({3.0, 4.0}, 0.004);
  CHECK(cub[0] == Catch::Approx(0.612));
  CHECK(cub[1] == Catch::Approx(0.816));

  // Output stays collinear with the input.
  glpp::Rng rng(5);
  for (int round = 0; round < 20; ++round) {
    std::vector<double> v(4);
    for (auto& x : v) x = rng.uniform(-2.0, 2.0);
    if (glpp::norm2(v) < 1e-6) continue;
    const auto out = glpp::beta_normalize(v, 0.3);
    const double scale = (1.0 / glpp::norm2(v)) + 0.3;
    for (std::size_t k = 0; k < v.size(); ++k)
      CHECK(out[k] == Catch::Approx(scale * v[k]).margin(1e-12));
  }

  try {
    glpp::beta_normalize({0.0, 0.0}, 0.1);
    FAIL("expected ZeroVector");
  } catch (const glpp::Error& e) {
    CHECK(e.code() == glpp::ErrorCode::ZeroVector);
  }
}

TEST_CASE("mixed pooling interpolates between mean and max") {
  const Matrix pre = Matrix::from_rows({{1.0, -2.0}, {3.0, 0.5}});
  const auto maxed = glpp::mixed_pool(pre, 1.0);
  CHECK(maxed[0] == 3.0);
  CHECK(maxed[1] == 0.5);
  const auto avg = glpp::mixed_pool(pre, 0.0);
  CHECK(avg[0] == Catch::Approx(2.0));
  CHECK(avg[1] == Catch::Approx(-0.75));
  const auto half = glpp::mixed_pool(pre, 0.5);
  CHECK(half[0] == Catch::Approx(2.5));

  // Every coordinate lies in [avg, max] for alpha in [0, 1].
  glpp::Rng rng(6);
  const Matrix r = oracle::random_matrix(rng, 4, 5, -3.0, 3.0);
  for (double alpha : {0.2, 0.4, 0.6, 0.8}) {
    const auto out = glpp::mixed_pool(r, alpha);
    const auto lo = glpp::mixed_pool(r, 0.0);
    const auto hi = glpp::mixed_pool(r, 1.0);
    for (std::size_t k = 0; k < out.size(); ++k) {
      CHECK(out[k] >= lo[k] - 1e-12);
      CHECK(out[k] <= hi[k] + 1e-12);
    }
  }
}

TEST_CASE("leaky final activation") {
  const Matrix pre = Matrix::from_rows({{-2.0, 3.0}, {0.0, -0.5}});
  const Matrix out = glpp::leaky_final(pre, 0.75);
  CHECK(out(0, 0) == Catch::Approx(-1.5));
  CHECK(out(0, 1) == 3.0);
  CHECK(out(1, 0) == 0.0);
  CHECK(out(1, 1) == Catch::Approx(-0.375));

  // Slope 1 is exactly the identity.
  CHECK(glpp::leaky_final(pre, 1.0) == pre);

  try {
    glpp::leaky_final(pre, 0.0);
    FAIL("expected InvalidValue");
  } catch (const glpp::Error& e) {
    CHECK(e.code() == glpp::ErrorCode::InvalidValue);
  }
}

TEST_CASE("tta averaging") {
  auto embed = [](const std::vector<double>& v) {
    // Deliberately asymmetric embedding.
    return std::vector<double>{v[0] * 2.0, v[1] + v[0]};
  };
  auto identity = [](const std::vector<double>& v) { return v; };
  auto reverse = [](std::vector<double> v) {
    std::reverse(v.begin(), v.end());
    return v;
  };

  const std::vector<double> x{1.0, -0.5};

  // Identity transform reproduces the raw embedding.
  CHECK(glpp::tta_average(embed, identity, x) == embed(x));

  // Transform-invariant embed_fn reproduces the raw embedding.
  auto symmetric = [](const std::vector<double>& v) {
    return std::vector<double>{v[0] + v[1]};
  };
  CHECK(glpp::tta_average(symmetric, reverse, x) == symmetric(x));

  // The average itself is flip-invariant, bitwise.
  const auto at_x = glpp::tta_average(embed, reverse, x);
  const auto at_tx = glpp::tta_average(embed, reverse, reverse(x));
  CHECK(at_x == at_tx);

  // A non-involution is rejected.
  auto shift = [](std::vector<double> v) {
    for (auto& u : v) u += 1.0;
    return v;
  };
  try {
    glpp::tta_average(embed, shift, x);
    FAIL("expected NotInvolution");
  } catch (const glpp::Error& e) {
    CHECK(e.code() == glpp::ErrorCode::NotInvolution);
  }
}

TEST_CASE("ensemble concatenation") {
  CHECK(glpp::ensemble_concat({{1.0, 2.0}}) == std::vector<double>{1.0, 2.0});
  CHECK(glpp::ensemble_concat({{1.0}, {2.0, 3.0}}) == std::vector<double>{1.0, 2.0, 3.0});
  try {
    glpp::ensemble_concat({});
    FAIL("expected EmptyList");
  } catch (const glpp::Error& e) {
    CHECK(e.code() == glpp::ErrorCode::EmptyList);
  }
}

TEST_CASE("duplicated ensemble leaves rankings unchanged") {
  glpp::Rng rng(7);
  const std::size_t n = 8;
  const Matrix emb = oracle::random_matrix(rng, n, 4);
  Matrix doubled(n, 8);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> row(emb.row(i), emb.row(i) + 4);
    const auto cat = glpp::ensemble_concat({row, row});
    for (std::size_t k = 0; k < 8; ++k) doubled(i, k) = cat[k];
  }
  const Matrix d1 = glpp::pairwise_euclidean(emb, emb);
  const Matrix d2 = glpp::pairwise_euclidean(doubled, doubled);
  std::vector<int> labels(n, 0);
  const auto r1 = glpp::rank_retrieval(d1, labels, labels, true);
  const auto r2 = glpp::rank_retrieval(d2, labels, labels, true);
  for (std::size_t i = 0; i < n; ++i) CHECK(r1.order[i] == r2.order[i]);
}

namespace {

/// Net with nonnegative pre-activations on the probe inputs, so the leaky
/// slope is a no-op and the neutral pipeline matches training exactly.
glpp::MlpEmbedder nonnegative_net(std::uint64_t seed) {
  glpp::MlpShape shape{5, 8, 3, 4, 2};
  glpp::MlpEmbedder net(shape, seed);
  auto& theta = net.parameters();
  // Absolute values on the second block plus a positive bias keep the
  // pre-pool outputs nonnegative for nonnegative hidden activations.
  const std::size_t w2_begin = static_cast<std::size_t>(8 * 5 + 8);
  const std::size_t w2_count = static_cast<std::size_t>(3 * 4 * 8);
  for (std::size_t i = 0; i < w2_count; ++i)
    theta[w2_begin + i] = std::abs(theta[w2_begin + i]);
  for (std::size_t i = 0; i < static_cast<std::size_t>(3 * 4); ++i)
    theta[w2_begin + w2_count + i] = 0.05;
  return net;
}

}  // namespace

TEST_CASE("neutral pipeline equals euclidean-normalized training embeddings") {
  const auto net = nonnegative_net(21);
  glpp::Rng rng(22);
  Matrix inputs = oracle::random_matrix(rng, 6, 5, 0.0, 1.0);

  glpp::InferenceConfig neutral;  // alpha 0, beta 0, slope 1, no flip
  const Matrix piped = glpp::inference_pipeline(net, inputs, neutral);
  const Matrix plain = glpp::normalized_embeddings(net, inputs);
  CHECK(glpp::max_abs_diff(piped, plain) == 0.0);
}

TEST_CASE("each inference component changes the embeddings") {
  glpp::MlpShape shape{5, 8, 3, 4, 2};
  const glpp::MlpEmbedder net(shape, 31);
  glpp::Rng rng(32);
  const Matrix inputs = oracle::random_matrix(rng, 6, 5, -1.0, 1.0);

  glpp::InferenceConfig neutral;
  const Matrix base = glpp::inference_pipeline(net, inputs, neutral);

  glpp::InferenceConfig mixed = neutral;
  mixed.alpha = 0.5;
  CHECK(glpp::max_abs_diff(base, glpp::inference_pipeline(net, inputs, mixed)) > 0.0);

  glpp::InferenceConfig beta = neutral;
  beta.beta = 0.5;
  CHECK(glpp::max_abs_diff(base, glpp::inference_pipeline(net, inputs, beta)) > 0.0);

  glpp::InferenceConfig leaky = neutral;
  leaky.leaky_slope = 0.5;
  CHECK(glpp::max_abs_diff(base, glpp::inference_pipeline(net, inputs, leaky)) > 0.0);

  glpp::InferenceConfig flip = neutral;
  flip.use_flip = true;
  CHECK(glpp::max_abs_diff(base, glpp::inference_pipeline(net, inputs, flip)) > 0.0);
}

TEST_CASE("pipeline determinism and CUB-style smoke run") {
  glpp::MlpShape shape{6, 10, 4, 5, 3};
  const glpp::MlpEmbedder net(shape, 41);
  glpp::Rng rng(42);
  const Matrix inputs = oracle::random_matrix(rng, 10, 6, -1.0, 1.0);

  glpp::InferenceConfig cub;
  cub.alpha = 0.5;
  cub.beta = 0.004;
  cub.leaky_slope = 0.75;
  cub.use_flip = true;
  const Matrix a = glpp::inference_pipeline(net, inputs, cub);
  const Matrix b = glpp::inference_pipeline(net, inputs, cub);
  CHECK(a == b);
  for (double v : a.data()) CHECK(std::isfinite(v));
}
