#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "mimtnet/matrix.hpp"
#include "mimtnet/sampler.hpp"

namespace mimtnet {

double relu(double x) noexcept;

/// Logistic function, evaluated in the branch form that never overflows.
/// The result is clamped into the open interval (0, 1) and is above 0.5
/// exactly when x > 0.
double sigmoid(double x) noexcept;

/// Weights of the proposal network. Per proposal: a kernel spanning the whole
/// padded proposal (F filters), ReLU, a dense hidden layer (H units), ReLU,
/// and one score per task. Biases are stored as single-column matrices.
struct ModelParams {
  RealMatrix conv_w;  // F x S
  RealMatrix conv_b;  // F x 1
  RealMatrix fc1_w;   // H x F
  RealMatrix fc1_b;   // H x 1
  RealMatrix fc2_w;   // n x H
  RealMatrix fc2_b;   // n x 1

  static ModelParams zeros(std::size_t max_size, std::size_t filters,
                           std::size_t hidden, std::size_t tasks);

  std::size_t max_size() const noexcept { return conv_w.cols(); }
  std::size_t filters() const noexcept { return conv_w.rows(); }
  std::size_t hidden() const noexcept { return fc1_w.rows(); }
  std::size_t tasks() const noexcept { return fc2_w.rows(); }

  std::array<RealMatrix*, 6> blocks() {
    return {&conv_w, &conv_b, &fc1_w, &fc1_b, &fc2_w, &fc2_b};
  }
  std::array<const RealMatrix*, 6> blocks() const {
    return {&conv_w, &conv_b, &fc1_w, &fc1_b, &fc2_w, &fc2_b};
  }
  static constexpr std::array<const char*, 6> block_names = {
      "conv_w", "conv_b", "fc1_w", "fc1_b", "fc2_w", "fc2_b"};

  /// Shapes mutually consistent and every entry finite.
  void validate() const;

  friend bool operator==(const ModelParams&, const ModelParams&) = default;
};

/// Symmetric uniform init, bound sqrt(6 / (fan_in + fan_out)) per weight
/// layer, drawn in layer order conv, fc1, fc2; biases start at zero.
ModelParams glorot_uniform_params(std::size_t max_size, std::size_t filters,
                                  std::size_t hidden, std::size_t tasks,
                                  std::uint64_t seed);

/// Every intermediate of one bag's forward pass.
struct ForwardTrace {
  RealMatrix instances;  // R x S
  RealMatrix conv_pre;   // R x F
  RealMatrix conv_act;   // R x F
  RealMatrix fc1_pre;    // R x H
  RealMatrix fc1_act;    // R x H
  RealMatrix scores;     // R x n
  std::vector<double> bag_scores;
  std::vector<std::size_t> argmax_r;
  std::vector<double> probs;
};

ForwardTrace forward(const ModelParams& params, const RealMatrix& instances);

/// Scratch buffers for one proposal's forward pass.
struct RowActivations {
  std::vector<double> conv_pre, conv_act, fc1_pre, fc1_act, scores;

  void resize(const ModelParams& params);
};

void forward_row(const ModelParams& params, std::span<const double> instance,
                 RowActivations& act);

/// A bag with duplicate instance rows collapsed. Rows with the same padded
/// values always score the same, so only distinct patterns are evaluated.
/// Patterns are kept in order of first occurrence, which keeps the
/// smallest-proposal tie rule intact.
struct CompressedBag {
  RealMatrix patterns;                 // U x S
  std::vector<std::size_t> first_row;  // proposal index of each pattern
  std::size_t proposal_count = 0;      // R
};

CompressedBag compress_bag(const ProposalSet& ps, std::span<const std::uint8_t> x);

/// Pooled per-task bag logits and the proposal that produced each.
struct BagScores {
  std::vector<double> logits;
  std::vector<std::size_t> argmax_r;
  std::vector<std::size_t> argmax_pattern;
};

/// Pooled logits of a compressed bag; bit-identical to forward() on the
/// expanded instances.
void score_bag(const ModelParams& params, const CompressedBag& bag,
               RowActivations& scratch, BagScores& out);

/// Feature indices of the proposal that decided each task.
std::vector<std::vector<std::size_t>> key_proposals(const ForwardTrace& trace,
                                                    const ProposalSet& ps);

}  // namespace mimtnet
