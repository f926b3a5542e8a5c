#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "mimtnet/dataio.hpp"
#include "mimtnet/matrix.hpp"
#include "mimtnet/network.hpp"
#include "mimtnet/sampler.hpp"

namespace mimtnet {

struct AdamConfig {
  double learning_rate = 0.1;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  void validate() const;

  friend bool operator==(const AdamConfig&, const AdamConfig&) = default;
};

struct TrainConfig {
  std::size_t epochs = 100;
  AdamConfig adam;
  std::size_t proposals = 500;  // R
  std::size_t max_size = 10;    // S
  std::size_t filters = 1;      // F
  std::size_t hidden = 64;      // H
  std::uint64_t seed = 0;
  std::string init_scale = "glorot-uniform";

  void validate() const;

  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

/// Anything exposing its weights through blocks() can be optimized.
template <typename P>
concept ParameterPack = requires(P p, const P cp) {
  { p.blocks() };
  { cp.blocks() };
};

template <ParameterPack P>
P zeros_like(const P& params) {
  P out = params;
  for (RealMatrix* b : out.blocks()) b->fill(0.0);
  return out;
}

template <ParameterPack P>
struct AdamState {
  P first_moment;
  P second_moment;
  std::uint64_t step = 0;

  static AdamState for_params(const P& params) {
    return {zeros_like(params), zeros_like(params), 0};
  }
};

/// One bias-corrected Adam update. Pure: returns the new parameters and
/// state without touching the inputs.
template <ParameterPack P>
std::pair<P, AdamState<P>> adam_step(const P& params, const P& grads,
                                     const AdamState<P>& state,
                                     const AdamConfig& config) {
  P next = params;
  AdamState<P> st = state;
  st.step += 1;
  const double t = static_cast<double>(st.step);
  const double c1 = 1.0 - std::pow(config.beta1, t);
  const double c2 = 1.0 - std::pow(config.beta2, t);
  auto pb = next.blocks();
  auto gb = grads.blocks();
  auto mb = st.first_moment.blocks();
  auto vb = st.second_moment.blocks();
  for (std::size_t b = 0; b < pb.size(); ++b) {
    if (!pb[b]->same_shape(*gb[b]) || !pb[b]->same_shape(*mb[b])) {
      throw ShapeError("adam_step: parameter and gradient shapes differ");
    }
    auto w = pb[b]->values();
    auto g = gb[b]->values();
    auto m = mb[b]->values();
    auto v = vb[b]->values();
    for (std::size_t i = 0; i < w.size(); ++i) {
      m[i] = config.beta1 * m[i] + (1.0 - config.beta1) * g[i];
      v[i] = config.beta2 * v[i] + (1.0 - config.beta2) * g[i] * g[i];
      const double m_hat = m[i] / c1;
      const double v_hat = v[i] / c2;
      w[i] -= config.learning_rate * m_hat / (std::sqrt(v_hat) + config.epsilon);
    }
  }
  return {std::move(next), std::move(st)};
}

/// Summed binary cross-entropy over every (sample, task) slot, computed from
/// logits as max(s,0) - s*y + log(1 + exp(-|s|)).
double bce_loss(const RealMatrix& bag_logits, const BinaryMatrix& labels);
double bce_term(double logit, std::uint8_t label) noexcept;
/// d bce_term / d logit = sigmoid(s) - y, written as -sigmoid(-s) for y = 1
/// so a saturated positive yields a tiny gradient rather than rounding noise.
double bce_gradient(double logit, std::uint8_t label) noexcept;

/// R x n gradient of one bag's loss with respect to the per-proposal scores.
/// Only each task's argmax proposal carries a nonzero entry.
RealMatrix pooling_gradient(const ForwardTrace& trace,
                            std::span<const std::uint8_t> labels);

/// Exact loss gradient for a batch of forward traces, summed over samples.
ModelParams backward(const ModelParams& params, const std::vector<ForwardTrace>& traces,
                     const BinaryMatrix& labels);

/// Adds one proposal row's contribution given d(loss)/d(scores) for that row.
void backprop_row(const ModelParams& params, std::span<const double> instance,
                  std::span<const double> dscores, RowActivations& act,
                  ModelParams& grads);

/// Loss and gradient of the whole batch through the compressed bag path.
double batch_loss_and_gradient(const ModelParams& params,
                               const std::vector<CompressedBag>& bags,
                               const BinaryMatrix& labels, ModelParams& grads);

/// Full-batch optimization loop shared by every network in the project.
/// objective(params, grads) must overwrite grads and return the loss.
template <ParameterPack P>
std::vector<double> run_full_batch_adam(
    P& params, std::size_t epochs, const AdamConfig& config,
    const std::function<double(const P&, P&)>& objective);

/// Everything inference needs.
struct Model {
  ModelParams params;
  ProposalSet proposal_set;
  TrainConfig config;
  std::vector<std::string> feature_names;
  std::vector<std::string> label_names;
  std::vector<double> epoch_loss;

  void validate() const;

  friend bool operator==(const Model&, const Model&) = default;
};

Model train(const Dataset& dataset, const TrainConfig& config);

struct Prediction {
  RealMatrix probs;    // p x n
  BinaryMatrix hard;   // p x n, 1 iff prob > 0.5
  /// Proposal index deciding each (sample, task); empty for models without
  /// proposals.
  Matrix<std::size_t> argmax_r;
};

Prediction predict(const Model& model, const BinaryMatrix& features);

BinaryMatrix threshold(const RealMatrix& probs);

template <ParameterPack P>
std::vector<double> run_full_batch_adam(
    P& params, std::size_t epochs, const AdamConfig& config,
    const std::function<double(const P&, P&)>& objective) {
  AdamState<P> state = AdamState<P>::for_params(params);
  P grads = zeros_like(params);
  std::vector<double> history;
  history.reserve(epochs);
  for (std::size_t epoch = 1; epoch <= epochs; ++epoch) {
    const double loss = objective(params, grads);
    if (!std::isfinite(loss)) {
      throw TrainingError("non-finite loss at epoch " + std::to_string(epoch));
    }
    history.push_back(loss);
    auto [next, next_state] = adam_step(params, grads, state, config);
    params = std::move(next);
    state = std::move(next_state);
  }
  return history;
}

}  // namespace mimtnet
