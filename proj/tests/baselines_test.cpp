#include <gtest/gtest.h>

#include <cmath>

#include "mimtnet/baselines.hpp"
#include "mimtnet/error.hpp"
#include "oracles.hpp"

namespace mimtnet {
namespace {

Dataset make_dataset(std::initializer_list<std::initializer_list<int>> x,
                     std::initializer_list<std::initializer_list<int>> y) {
  Dataset ds;
  ds.features = BinaryMatrix(x.size(), x.begin()->size());
  ds.labels = BinaryMatrix(y.size(), y.begin()->size());
  std::size_t i = 0;
  for (const auto& row : x) {
    std::size_t j = 0;
    for (int v : row) ds.features(i, j++) = static_cast<std::uint8_t>(v);
    ++i;
  }
  i = 0;
  for (const auto& row : y) {
    std::size_t j = 0;
    for (int v : row) ds.labels(i, j++) = static_cast<std::uint8_t>(v);
    ++i;
  }
  for (std::size_t j = 0; j < ds.features.cols(); ++j) ds.feature_names.push_back("f" + std::to_string(j));
  for (std::size_t j = 0; j < ds.labels.cols(); ++j) ds.label_names.push_back("t" + std::to_string(j));
  return ds;
}

Dataset random_dataset(std::uint64_t seed, std::size_t p, std::size_t d, std::size_t n) {
  Rng rng(seed);
  Dataset ds;
  ds.features = BinaryMatrix(p, d);
  ds.labels = BinaryMatrix(p, n);
  for (auto& v : ds.features.values()) v = rng.bernoulli(0.3);
  for (auto& v : ds.labels.values()) v = rng.bernoulli(0.4);
  for (std::size_t j = 0; j < d; ++j) ds.feature_names.push_back("f" + std::to_string(j));
  for (std::size_t j = 0; j < n; ++j) ds.label_names.push_back("t" + std::to_string(j));
  return ds;
}

TEST(NearestNeighbors, TiesByIndexAndExclusion) {
  const auto ds = make_dataset({{0, 0}, {0, 1}, {1, 0}, {1, 1}, {0, 0}}, {{0}, {0}, {0}, {0}, {0}});
  const std::vector<std::uint8_t> q{0, 0};
  EXPECT_EQ(nearest_neighbors(ds.features, q, 3), (std::vector<std::size_t>{0, 4, 1}));
  // A duplicate of the excluded point is still a distance-zero neighbour.
  EXPECT_EQ(nearest_neighbors(ds.features, q, 2, 0), (std::vector<std::size_t>{4, 1}));
}

TEST(Mlknn, HandComputedTables) {
  const auto ds = make_dataset({{0, 0}, {0, 1}, {1, 0}, {1, 1}, {0, 0}}, {{1}, {1}, {0}, {0}, {1}});
  const auto m = mlknn_fit(ds, {2, 1.0});
  EXPECT_DOUBLE_EQ(m.prior_positive[0], 4.0 / 7.0);
  const std::vector<double> lp{1.0 / 6.0, 2.0 / 6.0, 3.0 / 6.0};
  const std::vector<double> ln{1.0 / 5.0, 3.0 / 5.0, 1.0 / 5.0};
  for (std::size_t j = 0; j < 3; ++j) {
    EXPECT_DOUBLE_EQ(m.likelihood_positive(0, j), lp[j]);
    EXPECT_DOUBLE_EQ(m.likelihood_negative(0, j), ln[j]);
  }
  BinaryMatrix q(2, 2);
  q(1, 0) = q(1, 1) = 1;
  const auto probs = mlknn_predict(m, q);
  EXPECT_NEAR(probs(0, 0), 10.0 / 13.0, 1e-15);
  EXPECT_NEAR(probs(1, 0), 20.0 / 47.0, 1e-15);
}

TEST(Mlknn, TablesAreDistributions) {
  const auto ds = random_dataset(5, 60, 10, 4);
  for (std::size_t k : {1u, 3u, 20u}) {
    const auto m = mlknn_fit(ds, {k, 1.0});
    for (std::size_t t = 0; t < 4; ++t) {
      double sp = 0, sn = 0;
      for (std::size_t j = 0; j <= k; ++j) {
        sp += m.likelihood_positive(t, j);
        sn += m.likelihood_negative(t, j);
        EXPECT_GT(m.likelihood_positive(t, j), 0.0);
      }
      EXPECT_NEAR(sp, 1.0, 1e-12);
      EXPECT_NEAR(sn, 1.0, 1e-12);
    }
  }
}

TEST(Mlknn, DegenerateTaskStaysNegative) {
  auto ds = random_dataset(6, 40, 8, 2);
  for (std::size_t i = 0; i < 40; ++i) ds.labels(i, 1) = 0;
  const auto m = mlknn_fit(ds, {5, 1.0});
  EXPECT_DOUBLE_EQ(m.prior_positive[1], 1.0 / 42.0);
  const auto probs = mlknn_predict(m, ds.features);
  for (std::size_t i = 0; i < 40; ++i) {
    EXPECT_TRUE(std::isfinite(probs(i, 1)));
    EXPECT_LT(probs(i, 1), 0.5);
  }
}

TEST(Mlknn, UniformTablesReduceToPrior) {
  const auto ds = random_dataset(7, 50, 8, 3);
  auto m = mlknn_fit(ds, {4, 1.0});
  m.likelihood_positive.fill(0.2);
  m.likelihood_negative.fill(0.2);
  const auto probs = mlknn_predict(m, ds.features);
  for (std::size_t i = 0; i < 50; ++i) {
    for (std::size_t t = 0; t < 3; ++t) EXPECT_NEAR(probs(i, t), m.prior_positive[t], 1e-15);
  }
}

TEST(Mlknn, PriorIgnoresRowOrder) {
  const auto ds = random_dataset(8, 30, 6, 3);
  std::vector<std::size_t> order(30);
  for (std::size_t i = 0; i < 30; ++i) order[i] = 29 - i;
  const auto a = mlknn_fit(ds, {3, 1.0});
  const auto b = mlknn_fit(ds.subset(order), {3, 1.0});
  EXPECT_EQ(a.prior_positive, b.prior_positive);
}

TEST(Mlknn, ParameterErrors) {
  const auto ds = random_dataset(9, 5, 4, 1);
  EXPECT_THROW(mlknn_fit(ds, {5, 1.0}), ParameterError);
  EXPECT_THROW(mlknn_fit(ds, {0, 1.0}), ParameterError);
  EXPECT_THROW(mlknn_fit(ds, {2, 0.0}), ParameterError);
  const auto m = mlknn_fit(ds, {2, 1.0});
  EXPECT_THROW(mlknn_predict(m, BinaryMatrix(1, 3)), ShapeError);
}

TEST(Mlp, ZeroOutputLayerGivesHalf) {
  const auto ds = random_dataset(10, 20, 6, 3);
  MlpConfig cfg;
  cfg.epochs = 3;
  cfg.hidden = 8;
  auto model = mlp_train(ds, cfg);
  model.params.w2.fill(0.0);
  model.params.b2.fill(0.0);
  const auto probs = mlp_predict(model, ds.features);
  for (double v : probs.values()) EXPECT_EQ(v, 0.5);
}

std::vector<int> mlp_pattern(const MlpParams& p, const BinaryMatrix& x) {
  std::vector<int> sig;
  for (std::size_t i = 0; i < x.rows(); ++i) {
    for (std::size_t h = 0; h < p.w1.rows(); ++h) {
      double z = p.b1(h, 0);
      for (std::size_t j = 0; j < x.cols(); ++j) z += p.w1(h, j) * x(i, j);
      sig.push_back(z > 0.0);
    }
  }
  return sig;
}

TEST(Mlp, GradientMatchesFiniteDifferences) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto ds = random_dataset(20 + seed, 12, 7, 3);
    auto params = mlp_init(7, 6, 3, seed);
    Rng rng(seed);
    for (double& v : params.b1.values()) v = rng.uniform_real(-0.5, 0.5);
    for (double& v : params.b2.values()) v = rng.uniform_real(-0.5, 0.5);
    MlpParams grads = zeros_like(params);
    mlp_loss_and_gradient(params, ds.features, ds.labels, grads);
    const auto res = oracle::check_gradients<MlpParams>(
        params, grads,
        [&](const MlpParams& p) {
          MlpParams scratch = zeros_like(p);
          return mlp_loss_and_gradient(p, ds.features, ds.labels, scratch);
        },
        [&](const MlpParams& p) { return mlp_pattern(p, ds.features); }, 1e-5, 1e-4);
    EXPECT_EQ(res.failures, 0u) << res.worst_relative_error;
    EXPECT_GT(res.checked, 0u);
  }
}

TEST(Mlp, LossMatchesLogitsAndOracle) {
  const auto ds = random_dataset(30, 15, 5, 2);
  const auto params = mlp_init(5, 4, 2, 3);
  MlpParams grads = zeros_like(params);
  const double loss = mlp_loss_and_gradient(params, ds.features, ds.labels, grads);
  const auto logits = mlp_logits(params, ds.features);
  double want = 0.0;
  for (std::size_t i = 0; i < logits.values().size(); ++i) {
    want += oracle::naive_bce_quad(logits.values()[i], ds.labels.values()[i]);
  }
  EXPECT_NEAR(loss, want, 1e-10);
}

TEST(Mlp, DeterministicAndValidated) {
  const auto ds = random_dataset(11, 30, 6, 2);
  MlpConfig cfg;
  cfg.epochs = 4;
  cfg.hidden = 5;
  cfg.seed = 9;
  EXPECT_EQ(mlp_train(ds, cfg), mlp_train(ds, cfg));
  cfg.epochs = 0;
  EXPECT_THROW(mlp_train(ds, cfg), ParameterError);
}

}  // namespace
}  // namespace mimtnet
