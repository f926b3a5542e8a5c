#include "mimtnet/baselines.hpp"

#include <algorithm>
#include <cmath>

#include "mimtnet/error.hpp"
#include "mimtnet/network.hpp"
#include "mimtnet/random.hpp"

namespace mimtnet {

namespace {

std::size_t squared_distance(std::span<const std::uint8_t> a,
                             std::span<const std::uint8_t> b) {
  std::size_t d = 0;
  for (std::size_t j = 0; j < a.size(); ++j) d += a[j] != b[j];
  return d;
}

}  // namespace

std::vector<std::size_t> nearest_neighbors(const BinaryMatrix& reference,
                                           std::span<const std::uint8_t> query,
                                           std::size_t k, std::size_t exclude) {
  if (query.size() != reference.cols()) {
    throw ShapeError("nearest_neighbors: query has " + std::to_string(query.size()) +
                     " features, reference has " + std::to_string(reference.cols()));
  }
  // Binary features: squared Euclidean distance is the count of differing
  // cells, so ties are detected exactly.
  std::vector<std::pair<std::size_t, std::size_t>> dist;
  dist.reserve(reference.rows());
  for (std::size_t i = 0; i < reference.rows(); ++i) {
    if (i == exclude) continue;
    dist.emplace_back(squared_distance(reference.row(i), query), i);
  }
  const std::size_t take = std::min(k, dist.size());
  std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(take),
                    dist.end());
  std::vector<std::size_t> out(take);
  for (std::size_t i = 0; i < take; ++i) out[i] = dist[i].second;
  return out;
}

MlknnModel mlknn_fit(const Dataset& dataset, const MlknnConfig& config) {
  dataset.validate();
  const std::size_t p = dataset.patients();
  const std::size_t n = dataset.task_count();
  const std::size_t k = config.k;
  if (k == 0) throw ParameterError("ML-KNN needs k >= 1");
  if (p <= k) {
    throw ParameterError("ML-KNN needs more training samples (" + std::to_string(p) +
                         ") than neighbours (" + std::to_string(k) + ")");
  }
  if (!(config.smoothing > 0.0)) throw ParameterError("ML-KNN smoothing must be positive");
  const double s = config.smoothing;

  MlknnModel m;
  m.config = config;
  m.train_features = dataset.features;
  m.train_labels = dataset.labels;
  m.feature_names = dataset.feature_names;
  m.label_names = dataset.label_names;
  m.prior_positive.resize(n);

  for (std::size_t t = 0; t < n; ++t) {
    std::size_t positives = 0;
    for (std::size_t i = 0; i < p; ++i) positives += dataset.labels(i, t);
    m.prior_positive[t] =
        (s + static_cast<double>(positives)) / (2.0 * s + static_cast<double>(p));
  }

  // count_pos(t, j): training points positive for t with exactly j positive
  // neighbours; count_neg likewise for negatives.
  Matrix<std::size_t> count_pos(n, k + 1), count_neg(n, k + 1);
  for (std::size_t i = 0; i < p; ++i) {
    const auto neighbors = nearest_neighbors(dataset.features, dataset.features.row(i), k, i);
    for (std::size_t t = 0; t < n; ++t) {
      std::size_t c = 0;
      for (std::size_t j : neighbors) c += dataset.labels(j, t);
      (dataset.labels(i, t) ? count_pos : count_neg)(t, c) += 1;
    }
  }

  m.likelihood_positive = RealMatrix(n, k + 1);
  m.likelihood_negative = RealMatrix(n, k + 1);
  const double denom_extra = s * static_cast<double>(k + 1);
  for (std::size_t t = 0; t < n; ++t) {
    std::size_t total_pos = 0, total_neg = 0;
    for (std::size_t j = 0; j <= k; ++j) {
      total_pos += count_pos(t, j);
      total_neg += count_neg(t, j);
    }
    for (std::size_t j = 0; j <= k; ++j) {
      m.likelihood_positive(t, j) = (s + static_cast<double>(count_pos(t, j))) /
                                    (denom_extra + static_cast<double>(total_pos));
      m.likelihood_negative(t, j) = (s + static_cast<double>(count_neg(t, j))) /
                                    (denom_extra + static_cast<double>(total_neg));
    }
  }
  return m;
}

RealMatrix mlknn_predict(const MlknnModel& model, const BinaryMatrix& features) {
  if (features.cols() != model.train_features.cols()) {
    throw ShapeError("ML-KNN predict: data has " + std::to_string(features.cols()) +
                     " features, model expects " +
                     std::to_string(model.train_features.cols()));
  }
  const std::size_t n = model.train_labels.cols();
  RealMatrix probs(features.rows(), n);
  for (std::size_t i = 0; i < features.rows(); ++i) {
    const auto neighbors =
        nearest_neighbors(model.train_features, features.row(i), model.config.k);
    for (std::size_t t = 0; t < n; ++t) {
      std::size_t c = 0;
      for (std::size_t j : neighbors) c += model.train_labels(j, t);
      const double pos = model.prior_positive[t] * model.likelihood_positive(t, c);
      const double neg = (1.0 - model.prior_positive[t]) * model.likelihood_negative(t, c);
      probs(i, t) = pos / (pos + neg);
    }
  }
  return probs;
}

void MlpConfig::validate() const {
  if (epochs < 1) throw ParameterError("epochs must be >= 1");
  if (hidden < 1) throw ParameterError("MLP hidden units must be >= 1");
  adam.validate();
}

MlpParams mlp_init(std::size_t features, std::size_t hidden, std::size_t tasks,
                   std::uint64_t seed) {
  MlpParams p{RealMatrix(hidden, features), RealMatrix(hidden, 1),
              RealMatrix(tasks, hidden), RealMatrix(tasks, 1)};
  Rng rng(seed);
  for (RealMatrix* w : {&p.w1, &p.w2}) {
    const double bound = std::sqrt(6.0 / static_cast<double>(w->rows() + w->cols()));
    for (double& v : w->values()) v = rng.uniform_real(-bound, bound);
  }
  return p;
}

namespace {

void check_mlp_shapes(const MlpParams& params, std::size_t d) {
  const std::size_t h = params.w1.rows();
  const std::size_t n = params.w2.rows();
  if (params.w1.cols() != d) {
    throw ShapeError("MLP: data has " + std::to_string(d) +
                     " features, model expects " + std::to_string(params.w1.cols()));
  }
  require_shape(params.b1, h, 1, "MLP b1");
  require_shape(params.w2, n, h, "MLP w2");
  require_shape(params.b2, n, 1, "MLP b2");
}

// Hidden pre-activations of one binary row; only active inputs contribute.
void hidden_pre(const MlpParams& params, std::span<const std::uint8_t> x,
                std::vector<std::size_t>& active, std::vector<double>& pre) {
  active.clear();
  for (std::size_t j = 0; j < x.size(); ++j) {
    if (x[j]) active.push_back(j);
  }
  const std::size_t h = params.w1.rows();
  pre.resize(h);
  for (std::size_t u = 0; u < h; ++u) {
    const auto w = params.w1.row(u);
    double acc = params.b1(u, 0);
    for (std::size_t j : active) acc += w[j];
    pre[u] = acc;
  }
}

}  // namespace

RealMatrix mlp_logits(const MlpParams& params, const BinaryMatrix& features) {
  check_mlp_shapes(params, features.cols());
  const std::size_t n = params.w2.rows();
  const std::size_t h = params.w1.rows();
  RealMatrix out(features.rows(), n);
  std::vector<std::size_t> active;
  std::vector<double> pre;
  for (std::size_t i = 0; i < features.rows(); ++i) {
    hidden_pre(params, features.row(i), active, pre);
    for (std::size_t t = 0; t < n; ++t) {
      const auto w = params.w2.row(t);
      double acc = params.b2(t, 0);
      for (std::size_t u = 0; u < h; ++u) acc += w[u] * relu(pre[u]);
      out(i, t) = acc;
    }
  }
  return out;
}

double mlp_loss_and_gradient(const MlpParams& params, const BinaryMatrix& features,
                             const BinaryMatrix& labels, MlpParams& grads) {
  check_mlp_shapes(params, features.cols());
  require_shape(labels, features.rows(), params.w2.rows(), "MLP labels");
  for (RealMatrix* b : grads.blocks()) b->fill(0.0);
  const std::size_t n = params.w2.rows();
  const std::size_t h = params.w1.rows();
  std::vector<std::size_t> active;
  std::vector<double> pre, act(h), d_hidden(h);
  std::vector<double> dlogit(n);
  double loss = 0.0;
  for (std::size_t i = 0; i < features.rows(); ++i) {
    hidden_pre(params, features.row(i), active, pre);
    for (std::size_t u = 0; u < h; ++u) act[u] = relu(pre[u]);
    for (std::size_t t = 0; t < n; ++t) {
      const auto w = params.w2.row(t);
      double logit = params.b2(t, 0);
      for (std::size_t u = 0; u < h; ++u) logit += w[u] * act[u];
      loss += bce_term(logit, labels(i, t));
      dlogit[t] = bce_gradient(logit, labels(i, t));
    }
    std::ranges::fill(d_hidden, 0.0);
    for (std::size_t t = 0; t < n; ++t) {
      auto gw = grads.w2.row(t);
      const auto w = params.w2.row(t);
      for (std::size_t u = 0; u < h; ++u) {
        gw[u] += dlogit[t] * act[u];
        d_hidden[u] += dlogit[t] * w[u];
      }
      grads.b2(t, 0) += dlogit[t];
    }
    for (std::size_t u = 0; u < h; ++u) {
      if (!(pre[u] > 0.0)) continue;
      auto gw = grads.w1.row(u);
      for (std::size_t j : active) gw[j] += d_hidden[u];
      grads.b1(u, 0) += d_hidden[u];
    }
  }
  return loss;
}

MlpModel mlp_train(const Dataset& dataset, const MlpConfig& config) {
  config.validate();
  dataset.validate();
  if (dataset.patients() == 0) throw ParameterError("cannot train on an empty dataset");
  MlpModel model;
  model.config = config;
  model.feature_names = dataset.feature_names;
  model.label_names = dataset.label_names;
  model.params = mlp_init(dataset.feature_count(), config.hidden, dataset.task_count(),
                          derive_seed(config.seed, "mlp-init"));
  std::function<double(const MlpParams&, MlpParams&)> objective =
      [&](const MlpParams& p, MlpParams& g) {
        return mlp_loss_and_gradient(p, dataset.features, dataset.labels, g);
      };
  model.epoch_loss = run_full_batch_adam(model.params, config.epochs, config.adam, objective);
  return model;
}

RealMatrix mlp_predict(const MlpModel& model, const BinaryMatrix& features) {
  RealMatrix probs = mlp_logits(model.params, features);
  for (double& v : probs.values()) v = sigmoid(v);
  return probs;
}

}  // namespace mimtnet
