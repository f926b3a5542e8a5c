#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "mimtnet/dataio.hpp"
#include "mimtnet/matrix.hpp"
#include "mimtnet/training.hpp"

namespace mimtnet {

// ML-KNN: Bayesian decision on the number of positive neighbours, with
// Laplace-smoothed priors and per-count likelihood tables.

struct MlknnConfig {
  std::size_t k = 20;
  double smoothing = 1.0;

  friend bool operator==(const MlknnConfig&, const MlknnConfig&) = default;
};

struct MlknnModel {
  MlknnConfig config;
  BinaryMatrix train_features;
  BinaryMatrix train_labels;
  std::vector<double> prior_positive;  // P(H1) per task
  RealMatrix likelihood_positive;      // n x (k+1): P(E_j | H1)
  RealMatrix likelihood_negative;      // n x (k+1): P(E_j | H0)
  std::vector<std::string> feature_names;
  std::vector<std::string> label_names;

  friend bool operator==(const MlknnModel&, const MlknnModel&) = default;
};

/// Indices of the k rows of reference closest to query in Euclidean distance.
/// Exact distance ties go to the smaller index; `exclude` is skipped.
std::vector<std::size_t> nearest_neighbors(const BinaryMatrix& reference,
                                           std::span<const std::uint8_t> query,
                                           std::size_t k,
                                           std::size_t exclude = SIZE_MAX);

MlknnModel mlknn_fit(const Dataset& dataset, const MlknnConfig& config = {});
RealMatrix mlknn_predict(const MlknnModel& model, const BinaryMatrix& features);

// MLP: one ReLU hidden layer, sigmoid per task, summed cross-entropy, Adam.

struct MlpConfig {
  std::size_t epochs = 100;
  AdamConfig adam;
  std::size_t hidden = 128;
  std::uint64_t seed = 0;

  void validate() const;

  friend bool operator==(const MlpConfig&, const MlpConfig&) = default;
};

struct MlpParams {
  RealMatrix w1;  // H x d
  RealMatrix b1;  // H x 1
  RealMatrix w2;  // n x H
  RealMatrix b2;  // n x 1

  std::array<RealMatrix*, 4> blocks() { return {&w1, &b1, &w2, &b2}; }
  std::array<const RealMatrix*, 4> blocks() const { return {&w1, &b1, &w2, &b2}; }
  static constexpr std::array<const char*, 4> block_names = {"w1", "b1", "w2", "b2"};

  friend bool operator==(const MlpParams&, const MlpParams&) = default;
};

struct MlpModel {
  MlpParams params;
  MlpConfig config;
  std::vector<std::string> feature_names;
  std::vector<std::string> label_names;
  std::vector<double> epoch_loss;

  friend bool operator==(const MlpModel&, const MlpModel&) = default;
};

MlpParams mlp_init(std::size_t features, std::size_t hidden, std::size_t tasks,
                   std::uint64_t seed);

/// p x n logits.
RealMatrix mlp_logits(const MlpParams& params, const BinaryMatrix& features);

/// Summed cross-entropy of the batch; overwrites grads with its gradient.
double mlp_loss_and_gradient(const MlpParams& params, const BinaryMatrix& features,
                             const BinaryMatrix& labels, MlpParams& grads);

MlpModel mlp_train(const Dataset& dataset, const MlpConfig& config);
RealMatrix mlp_predict(const MlpModel& model, const BinaryMatrix& features);

}  // namespace mimtnet
