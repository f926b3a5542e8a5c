#include "mimtnet/network.hpp"

#include <cmath>
#include <limits>
#include <string>
#include <unordered_map>

#include "mimtnet/error.hpp"
#include "mimtnet/random.hpp"

namespace mimtnet {

double relu(double x) noexcept { return x > 0.0 ? x : 0.0; }

double sigmoid(double x) noexcept {
  constexpr double lo = std::numeric_limits<double>::denorm_min();
  constexpr double hi = 1.0 - 0x1.0p-53;
  // Logits too small to move 1/(1+e^-x) off 0.5 still land on the correct
  // side of it, so thresholding at 0.5 agrees with the sign of x.
  constexpr double above = 0.5 + 0x1.0p-53;
  constexpr double below = 0.5 - 0x1.0p-54;
  double y;
  if (x > 0.0) {
    y = std::max(1.0 / (1.0 + std::exp(-x)), above);
  } else if (x < 0.0) {
    const double e = std::exp(x);
    y = std::min(e / (1.0 + e), below);
  } else {
    return 0.5;
  }
  return std::clamp(y, lo, hi);
}

ModelParams ModelParams::zeros(std::size_t max_size, std::size_t filters,
                               std::size_t hidden, std::size_t tasks) {
  ModelParams p;
  p.conv_w = RealMatrix(filters, max_size);
  p.conv_b = RealMatrix(filters, 1);
  p.fc1_w = RealMatrix(hidden, filters);
  p.fc1_b = RealMatrix(hidden, 1);
  p.fc2_w = RealMatrix(tasks, hidden);
  p.fc2_b = RealMatrix(tasks, 1);
  return p;
}

void ModelParams::validate() const {
  const std::size_t s = max_size(), f = filters(), h = hidden(), n = tasks();
  if (s == 0 || f == 0 || h == 0 || n == 0) {
    throw ShapeError("model parameters have an empty dimension");
  }
  require_shape(conv_b, f, 1, "conv_b");
  require_shape(fc1_w, h, f, "fc1_w");
  require_shape(fc1_b, h, 1, "fc1_b");
  require_shape(fc2_w, n, h, "fc2_w");
  require_shape(fc2_b, n, 1, "fc2_b");
  for (std::size_t b = 0; b < 6; ++b) {
    for (double v : blocks()[b]->values()) {
      if (!std::isfinite(v)) {
        throw ParameterError(std::string("non-finite entry in ") + block_names[b]);
      }
    }
  }
}

ModelParams glorot_uniform_params(std::size_t max_size, std::size_t filters,
                                  std::size_t hidden, std::size_t tasks,
                                  std::uint64_t seed) {
  ModelParams p = ModelParams::zeros(max_size, filters, hidden, tasks);
  Rng rng(seed);
  for (RealMatrix* w : {&p.conv_w, &p.fc1_w, &p.fc2_w}) {
    const double bound = std::sqrt(6.0 / static_cast<double>(w->rows() + w->cols()));
    for (double& v : w->values()) v = rng.uniform_real(-bound, bound);
  }
  return p;
}

void RowActivations::resize(const ModelParams& params) {
  conv_pre.resize(params.filters());
  conv_act.resize(params.filters());
  fc1_pre.resize(params.hidden());
  fc1_act.resize(params.hidden());
  scores.resize(params.tasks());
}

namespace {

// out = W * in + b, W row-major.
void affine(const RealMatrix& w, const RealMatrix& b, std::span<const double> in,
            std::span<double> out) {
  const std::size_t cols = w.cols();
  for (std::size_t i = 0; i < w.rows(); ++i) {
    const double* wr = w.row(i).data();
    double acc = b(i, 0);
    for (std::size_t j = 0; j < cols; ++j) acc += wr[j] * in[j];
    out[i] = acc;
  }
}

void relu_into(std::span<const double> in, std::span<double> out) {
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = relu(in[i]);
}

}  // namespace

void forward_row(const ModelParams& params, std::span<const double> instance,
                 RowActivations& act) {
  affine(params.conv_w, params.conv_b, instance, act.conv_pre);
  relu_into(act.conv_pre, act.conv_act);
  affine(params.fc1_w, params.fc1_b, act.conv_act, act.fc1_pre);
  relu_into(act.fc1_pre, act.fc1_act);
  affine(params.fc2_w, params.fc2_b, act.fc1_act, act.scores);
}

ForwardTrace forward(const ModelParams& params, const RealMatrix& instances) {
  params.validate();
  if (instances.cols() != params.max_size() || instances.rows() == 0) {
    throw ShapeError("forward: instances are " +
                     shape_string(instances.rows(), instances.cols()) +
                     ", model expects R x " + std::to_string(params.max_size()));
  }
  const std::size_t R = instances.rows();
  const std::size_t n = params.tasks();
  ForwardTrace tr;
  tr.instances = instances;
  tr.conv_pre = RealMatrix(R, params.filters());
  tr.conv_act = RealMatrix(R, params.filters());
  tr.fc1_pre = RealMatrix(R, params.hidden());
  tr.fc1_act = RealMatrix(R, params.hidden());
  tr.scores = RealMatrix(R, n);

  RowActivations act;
  act.resize(params);
  for (std::size_t r = 0; r < R; ++r) {
    forward_row(params, instances.row(r), act);
    std::ranges::copy(act.conv_pre, tr.conv_pre.row(r).begin());
    std::ranges::copy(act.conv_act, tr.conv_act.row(r).begin());
    std::ranges::copy(act.fc1_pre, tr.fc1_pre.row(r).begin());
    std::ranges::copy(act.fc1_act, tr.fc1_act.row(r).begin());
    std::ranges::copy(act.scores, tr.scores.row(r).begin());
  }

  tr.bag_scores.assign(n, 0.0);
  tr.argmax_r.assign(n, 0);
  tr.probs.assign(n, 0.0);
  for (std::size_t t = 0; t < n; ++t) {
    std::size_t best = 0;
    for (std::size_t r = 1; r < R; ++r) {
      if (tr.scores(r, t) > tr.scores(best, t)) best = r;
    }
    tr.argmax_r[t] = best;
    tr.bag_scores[t] = tr.scores(best, t);
    tr.probs[t] = sigmoid(tr.bag_scores[t]);
  }
  return tr;
}

CompressedBag compress_bag(const ProposalSet& ps, std::span<const std::uint8_t> x) {
  if (x.size() != ps.feature_count) {
    throw ShapeError("bag compression: row has " + std::to_string(x.size()) +
                     " features, proposals expect " +
                     std::to_string(ps.feature_count));
  }
  const std::size_t S = ps.max_size;
  CompressedBag bag;
  bag.proposal_count = ps.count();
  std::unordered_map<std::string, std::size_t> seen;
  std::vector<double> values;
  std::string key(S, '\0');
  for (std::size_t r = 0; r < ps.count(); ++r) {
    std::ranges::fill(key, '\0');
    const auto& indices = ps.proposals[r];
    for (std::size_t s = 0; s < indices.size(); ++s) key[s] = x[indices[s]] ? 1 : 0;
    if (seen.try_emplace(key, bag.first_row.size()).second) {
      bag.first_row.push_back(r);
      for (char c : key) values.push_back(c ? 1.0 : 0.0);
    }
  }
  bag.patterns = RealMatrix(bag.first_row.size(), S);
  std::ranges::copy(values, bag.patterns.values().begin());
  return bag;
}

void score_bag(const ModelParams& params, const CompressedBag& bag,
               RowActivations& scratch, BagScores& out) {
  const std::size_t n = params.tasks();
  if (bag.patterns.cols() != params.max_size() || bag.patterns.rows() == 0) {
    throw ShapeError("bag scoring: patterns are " +
                     shape_string(bag.patterns.rows(), bag.patterns.cols()) +
                     ", model expects U x " + std::to_string(params.max_size()));
  }
  scratch.resize(params);
  out.logits.assign(n, 0.0);
  out.argmax_r.assign(n, 0);
  out.argmax_pattern.assign(n, 0);
  for (std::size_t u = 0; u < bag.patterns.rows(); ++u) {
    forward_row(params, bag.patterns.row(u), scratch);
    for (std::size_t t = 0; t < n; ++t) {
      if (u == 0 || scratch.scores[t] > out.logits[t]) {
        out.logits[t] = scratch.scores[t];
        out.argmax_r[t] = bag.first_row[u];
        out.argmax_pattern[t] = u;
      }
    }
  }
}

std::vector<std::vector<std::size_t>> key_proposals(const ForwardTrace& trace,
                                                    const ProposalSet& ps) {
  std::vector<std::vector<std::size_t>> out;
  out.reserve(trace.argmax_r.size());
  for (std::size_t r : trace.argmax_r) {
    if (r >= ps.count()) throw ShapeError("trace does not match proposal set");
    out.push_back(ps.proposals[r]);
  }
  return out;
}

}  // namespace mimtnet
