#include "mimtnet/training.hpp"

#include <algorithm>
#include <cmath>

#include "mimtnet/error.hpp"
#include "mimtnet/random.hpp"

namespace mimtnet {

void AdamConfig::validate() const {
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
    throw ParameterError("learning rate must be positive");
  }
  if (!(beta1 > 0.0 && beta1 < 1.0) || !(beta2 > 0.0 && beta2 < 1.0)) {
    throw ParameterError("Adam betas must lie in (0, 1)");
  }
  if (!(epsilon > 0.0)) throw ParameterError("Adam epsilon must be positive");
}

void TrainConfig::validate() const {
  if (epochs < 1) throw ParameterError("epochs must be >= 1");
  adam.validate();
  if (proposals < 1) throw ParameterError("proposal generation times must be >= 1");
  if (max_size < 1) throw ParameterError("proposal max size must be >= 1");
  if (filters < 1 || hidden < 1) {
    throw ParameterError("filters and hidden units must be >= 1");
  }
  if (init_scale != "glorot-uniform") {
    throw ParameterError("unknown init scheme '" + init_scale + "'");
  }
}

double bce_term(double logit, std::uint8_t label) noexcept {
  return std::max(logit, 0.0) - logit * static_cast<double>(label) +
         std::log1p(std::exp(-std::abs(logit)));
}

double bce_gradient(double logit, std::uint8_t label) noexcept {
  return label ? -sigmoid(-logit) : sigmoid(logit);
}

double bce_loss(const RealMatrix& bag_logits, const BinaryMatrix& labels) {
  if (bag_logits.rows() != labels.rows() || bag_logits.cols() != labels.cols()) {
    throw ShapeError("bce_loss: logits " +
                     shape_string(bag_logits.rows(), bag_logits.cols()) +
                     " vs labels " + shape_string(labels.rows(), labels.cols()));
  }
  double total = 0.0;
  const auto s = bag_logits.values();
  const auto y = labels.values();
  for (std::size_t i = 0; i < s.size(); ++i) total += bce_term(s[i], y[i]);
  return total;
}

RealMatrix pooling_gradient(const ForwardTrace& trace,
                            std::span<const std::uint8_t> labels) {
  const std::size_t n = trace.bag_scores.size();
  if (labels.size() != n) throw ShapeError("pooling_gradient: label count mismatch");
  RealMatrix d(trace.scores.rows(), n);
  for (std::size_t t = 0; t < n; ++t) {
    d(trace.argmax_r[t], t) = bce_gradient(trace.bag_scores[t], labels[t]);
  }
  return d;
}

void backprop_row(const ModelParams& params, std::span<const double> instance,
                  std::span<const double> dscores, RowActivations& act,
                  ModelParams& grads) {
  forward_row(params, instance, act);
  const std::size_t S = params.max_size();
  const std::size_t F = params.filters();
  const std::size_t H = params.hidden();
  const std::size_t n = params.tasks();

  std::vector<double> d_fc1(H, 0.0);
  for (std::size_t t = 0; t < n; ++t) {
    const double g = dscores[t];
    if (g == 0.0) continue;
    auto gw = grads.fc2_w.row(t);
    const auto w = params.fc2_w.row(t);
    for (std::size_t h = 0; h < H; ++h) {
      gw[h] += g * act.fc1_act[h];
      d_fc1[h] += g * w[h];
    }
    grads.fc2_b(t, 0) += g;
  }

  std::vector<double> d_conv(F, 0.0);
  for (std::size_t h = 0; h < H; ++h) {
    if (!(act.fc1_pre[h] > 0.0)) continue;
    const double g = d_fc1[h];
    auto gw = grads.fc1_w.row(h);
    const auto w = params.fc1_w.row(h);
    for (std::size_t f = 0; f < F; ++f) {
      gw[f] += g * act.conv_act[f];
      d_conv[f] += g * w[f];
    }
    grads.fc1_b(h, 0) += g;
  }

  for (std::size_t f = 0; f < F; ++f) {
    if (!(act.conv_pre[f] > 0.0)) continue;
    const double g = d_conv[f];
    auto gw = grads.conv_w.row(f);
    for (std::size_t s = 0; s < S; ++s) gw[s] += g * instance[s];
    grads.conv_b(f, 0) += g;
  }
}

namespace {

// Routes each task's loss gradient to its argmax proposal and backpropagates
// the affected rows in ascending proposal order.
template <typename RowOf>
void backprop_pooled(const ModelParams& params, std::span<const std::size_t> argmax,
                     std::span<const double> logits,
                     std::span<const std::uint8_t> labels, RowOf&& row_of,
                     RowActivations& act, ModelParams& grads) {
  const std::size_t n = params.tasks();
  std::vector<std::size_t> order(n);
  for (std::size_t t = 0; t < n; ++t) order[t] = t;
  std::ranges::stable_sort(order, [&](std::size_t a, std::size_t b) {
    return argmax[a] < argmax[b];
  });
  std::vector<double> dscores(n);
  for (std::size_t i = 0; i < n;) {
    const std::size_t row = argmax[order[i]];
    std::ranges::fill(dscores, 0.0);
    for (; i < n && argmax[order[i]] == row; ++i) {
      const std::size_t t = order[i];
      dscores[t] = bce_gradient(logits[t], labels[t]);
    }
    backprop_row(params, row_of(row), dscores, act, grads);
  }
}

}  // namespace

ModelParams backward(const ModelParams& params, const std::vector<ForwardTrace>& traces,
                     const BinaryMatrix& labels) {
  params.validate();
  require_shape(labels, traces.size(), params.tasks(), "backward labels");
  ModelParams grads = zeros_like(params);
  RowActivations act;
  act.resize(params);
  for (std::size_t i = 0; i < traces.size(); ++i) {
    const auto& tr = traces[i];
    backprop_pooled(params, tr.argmax_r, tr.bag_scores, labels.row(i),
                    [&](std::size_t r) { return tr.instances.row(r); }, act, grads);
  }
  return grads;
}

double batch_loss_and_gradient(const ModelParams& params,
                               const std::vector<CompressedBag>& bags,
                               const BinaryMatrix& labels, ModelParams& grads) {
  require_shape(labels, bags.size(), params.tasks(), "batch labels");
  for (RealMatrix* b : grads.blocks()) b->fill(0.0);
  RowActivations act;
  BagScores scores;
  double loss = 0.0;
  for (std::size_t i = 0; i < bags.size(); ++i) {
    score_bag(params, bags[i], act, scores);
    const auto y = labels.row(i);
    for (std::size_t t = 0; t < params.tasks(); ++t) {
      loss += bce_term(scores.logits[t], y[t]);
    }
    backprop_pooled(params, scores.argmax_pattern, scores.logits, y,
                    [&](std::size_t u) { return bags[i].patterns.row(u); }, act,
                    grads);
  }
  return loss;
}

void Model::validate() const {
  params.validate();
  proposal_set.validate();
  if (params.max_size() != proposal_set.max_size) {
    throw ShapeError("model kernel width differs from proposal max size");
  }
  if (feature_names.size() != proposal_set.feature_count) {
    throw ShapeError("model feature names do not match proposal feature count");
  }
  if (label_names.size() != params.tasks()) {
    throw ShapeError("model label names do not match task count");
  }
}

Model train(const Dataset& dataset, const TrainConfig& config) {
  config.validate();
  dataset.validate();
  if (dataset.patients() == 0) throw ParameterError("cannot train on an empty dataset");

  Model model;
  model.config = config;
  model.feature_names = dataset.feature_names;
  model.label_names = dataset.label_names;
  model.proposal_set =
      generate_proposals(dataset.feature_count(), config.proposals, config.max_size,
                         derive_seed(config.seed, "proposals"));
  model.params =
      glorot_uniform_params(config.max_size, config.filters, config.hidden,
                            dataset.task_count(), derive_seed(config.seed, "init"));

  std::vector<CompressedBag> bags;
  bags.reserve(dataset.patients());
  for (std::size_t i = 0; i < dataset.patients(); ++i) {
    bags.push_back(compress_bag(model.proposal_set, dataset.features.row(i)));
  }

  std::function<double(const ModelParams&, ModelParams&)> objective =
      [&](const ModelParams& p, ModelParams& g) {
        return batch_loss_and_gradient(p, bags, dataset.labels, g);
      };
  model.epoch_loss =
      run_full_batch_adam(model.params, config.epochs, config.adam, objective);
  return model;
}

BinaryMatrix threshold(const RealMatrix& probs) {
  BinaryMatrix hard(probs.rows(), probs.cols());
  const auto p = probs.values();
  auto h = hard.values();
  for (std::size_t i = 0; i < p.size(); ++i) h[i] = p[i] > 0.5 ? 1 : 0;
  return hard;
}

Prediction predict(const Model& model, const BinaryMatrix& features) {
  if (features.cols() != model.proposal_set.feature_count) {
    throw ShapeError("predict: data has " + std::to_string(features.cols()) +
                     " features, model expects " +
                     std::to_string(model.proposal_set.feature_count));
  }
  const std::size_t n = model.params.tasks();
  Prediction out;
  out.probs = RealMatrix(features.rows(), n);
  out.argmax_r = Matrix<std::size_t>(features.rows(), n);
  RowActivations act;
  BagScores scores;
  for (std::size_t i = 0; i < features.rows(); ++i) {
    const auto bag = compress_bag(model.proposal_set, features.row(i));
    score_bag(model.params, bag, act, scores);
    for (std::size_t t = 0; t < n; ++t) {
      out.probs(i, t) = sigmoid(scores.logits[t]);
      out.argmax_r(i, t) = scores.argmax_r[t];
    }
  }
  out.hard = threshold(out.probs);
  return out;
}

}  // namespace mimtnet
