// Independent reference implementations used only by tests: finite-difference
// gradients, brute-force ranking metrics and an extended-precision loss.
#pragma once

#include <quadmath.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <optional>
#include <vector>

#include "mimtnet/dataio.hpp"
#include "mimtnet/matrix.hpp"
#include "mimtnet/network.hpp"
#include "mimtnet/random.hpp"
#include "mimtnet/sampler.hpp"
#include "mimtnet/training.hpp"

namespace mimtnet::oracle {

// ---- finite differences ---------------------------------------------------

struct GradCheckResult {
  std::size_t checked = 0;
  std::size_t skipped = 0;  // perturbation changed the activation pattern
  double worst_relative_error = 0.0;
  std::size_t failures = 0;
};

/// Central differences on every parameter coordinate. `pattern` returns a
/// signature of the piecewise-linear region (pooling argmaxes, ReLU signs);
/// coordinates whose +/- step leaves the region are skipped because the loss
/// is only one-sided differentiable there.
template <ParameterPack P>
GradCheckResult check_gradients(const P& params, const P& analytic,
                                const std::function<double(const P&)>& loss,
                                const std::function<std::vector<int>(const P&)>& pattern,
                                double step = 1e-3, double tolerance = 1e-4) {
  GradCheckResult res;
  const auto base = pattern(params);
  P probe = params;
  auto probe_blocks = probe.blocks();
  const auto grad_blocks = analytic.blocks();
  for (std::size_t b = 0; b < probe_blocks.size(); ++b) {
    auto values = probe_blocks[b]->values();
    const auto g = grad_blocks[b]->values();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double original = values[i];
      values[i] = original + step;
      const bool up_same = pattern(probe) == base;
      const double up = loss(probe);
      values[i] = original - step;
      const bool down_same = pattern(probe) == base;
      const double down = loss(probe);
      values[i] = original;
      if (!up_same || !down_same) {
        ++res.skipped;
        continue;
      }
      const double numeric = (up - down) / (2.0 * step);
      const double scale = std::max(std::abs(numeric), std::abs(g[i]));
      const double err = scale < 1e-8 ? std::abs(numeric - g[i]) : std::abs(numeric - g[i]) / scale;
      res.worst_relative_error = std::max(res.worst_relative_error, err);
      if (!(err < tolerance)) ++res.failures;
      ++res.checked;
    }
  }
  return res;
}

/// A random tiny network problem: proposals, binary bags, labels, params.
struct TinyProblem {
  std::size_t d, R, S, F, H, n, m;
  ProposalSet proposals;
  std::vector<RealMatrix> instances;
  BinaryMatrix labels;
  ModelParams params;
};

inline TinyProblem random_tiny_problem(std::uint64_t seed, std::size_t max_d = 12,
                                       std::size_t max_R = 8, std::size_t max_S = 4,
                                       std::size_t max_F = 2, std::size_t max_H = 5,
                                       std::size_t max_n = 3, std::size_t max_m = 6) {
  Rng rng(seed);
  TinyProblem p;
  p.S = rng.uniform_int(1, max_S);
  p.d = rng.uniform_int(p.S, max_d);
  p.R = rng.uniform_int(1, max_R);
  p.F = rng.uniform_int(1, max_F);
  p.H = rng.uniform_int(1, max_H);
  p.n = rng.uniform_int(1, max_n);
  p.m = rng.uniform_int(1, max_m);
  p.proposals = generate_proposals(p.d, p.R, p.S, rng.next());
  p.labels = BinaryMatrix(p.m, p.n);
  for (auto& v : p.labels.values()) v = rng.bernoulli(0.5);
  for (std::size_t i = 0; i < p.m; ++i) {
    std::vector<std::uint8_t> x(p.d);
    for (auto& v : x) v = rng.bernoulli(0.5);
    p.instances.push_back(extract_instances(p.proposals, x));
  }
  p.params = ModelParams::zeros(p.S, p.F, p.H, p.n);
  for (RealMatrix* b : p.params.blocks()) {
    for (double& v : b->values()) v = rng.uniform_real(-1.0, 1.0);
  }
  return p;
}

inline double network_loss(const ModelParams& params, const std::vector<RealMatrix>& bags,
                           const BinaryMatrix& labels) {
  RealMatrix logits(bags.size(), params.tasks());
  for (std::size_t i = 0; i < bags.size(); ++i) {
    const auto tr = forward(params, bags[i]);
    std::ranges::copy(tr.bag_scores, logits.row(i).begin());
  }
  return bce_loss(logits, labels);
}

inline std::vector<int> network_pattern(const ModelParams& params,
                                        const std::vector<RealMatrix>& bags) {
  std::vector<int> sig;
  for (const auto& bag : bags) {
    const auto tr = forward(params, bag);
    for (auto r : tr.argmax_r) sig.push_back(static_cast<int>(r));
    for (double v : tr.conv_pre.values()) sig.push_back(v > 0.0);
    for (double v : tr.fc1_pre.values()) sig.push_back(v > 0.0);
  }
  return sig;
}

// ---- scalar-loop forward ----------------------------------------------------

/// Straight-line recomputation of the five stages, one scalar at a time.
inline std::vector<double> scalar_forward_probs(const ModelParams& p, const RealMatrix& inst) {
  const std::size_t R = inst.rows(), S = inst.cols();
  const std::size_t F = p.conv_w.rows(), H = p.fc1_w.rows(), n = p.fc2_w.rows();
  std::vector<double> best(n, -INFINITY);
  for (std::size_t r = 0; r < R; ++r) {
    std::vector<double> conv(F), hid(H);
    for (std::size_t f = 0; f < F; ++f) {
      double z = p.conv_b(f, 0);
      for (std::size_t s = 0; s < S; ++s) z += p.conv_w(f, s) * inst(r, s);
      conv[f] = z > 0 ? z : 0;
    }
    for (std::size_t h = 0; h < H; ++h) {
      double z = p.fc1_b(h, 0);
      for (std::size_t f = 0; f < F; ++f) z += p.fc1_w(h, f) * conv[f];
      hid[h] = z > 0 ? z : 0;
    }
    for (std::size_t t = 0; t < n; ++t) {
      double z = p.fc2_b(t, 0);
      for (std::size_t h = 0; h < H; ++h) z += p.fc2_w(t, h) * hid[h];
      best[t] = std::max(best[t], z);
    }
  }
  std::vector<double> probs(n);
  for (std::size_t t = 0; t < n; ++t) probs[t] = 1.0 / (1.0 + std::exp(-best[t]));
  return probs;
}

// ---- extended-precision loss -----------------------------------------------

/// -[y log z + (1-y) log(1-z)] with z = 1/(1+e^-s), evaluated in binary128.
inline double naive_bce_quad(double logit, std::uint8_t label) {
  const __float128 s = logit;
  const __float128 z = 1 / (1 + expq(-s));
  const __float128 y = label;
  return static_cast<double>(-(y * logq(z) + (1 - y) * logq(1 - z)));
}

// ---- brute-force metrics ----------------------------------------------------

/// Exact rational, kept reduced.
struct Fraction {
  std::int64_t num = 0;
  std::int64_t den = 1;

  Fraction operator+(Fraction o) const { return reduce(num * o.den + o.num * den, den * o.den); }
  Fraction operator/(std::int64_t k) const { return reduce(num, den * k); }
  double value() const { return static_cast<double>(num) / static_cast<double>(den); }
  static Fraction reduce(std::int64_t a, std::int64_t b) {
    const auto g = std::gcd(a, b);
    return g ? Fraction{a / g, b / g} : Fraction{0, 1};
  }
};

/// Binary128 stand-in for Fraction when denominators would overflow int64.
struct QuadValue {
  __float128 v = 0;

  QuadValue operator+(QuadValue o) const { return {v + o.v}; }
  QuadValue operator/(std::int64_t k) const { return {v / k}; }
  double value() const { return static_cast<double>(v); }
  static QuadValue reduce(std::int64_t a, std::int64_t b) {
    return {static_cast<__float128>(a) / b};
  }
};

/// 1-based position of item i when sorting by descending score, ties to the
/// lower index: counts the items that beat it.
inline std::size_t rank_of(std::span<const double> scores, std::size_t i) {
  std::size_t ahead = 0;
  for (std::size_t j = 0; j < scores.size(); ++j) {
    if (scores[j] > scores[i] || (scores[j] == scores[i] && j < i)) ++ahead;
  }
  return ahead + 1;
}

template <typename Num = Fraction>
std::optional<Num> brute_average_precision(std::span<const double> scores,
                                                       std::span<const std::uint8_t> truth) {
  Num sum;
  std::int64_t positives = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (!truth[i]) continue;
    ++positives;
    const auto r = rank_of(scores, i);
    std::int64_t at_or_above = 0;
    for (std::size_t j = 0; j < scores.size(); ++j) {
      if (truth[j] && rank_of(scores, j) <= r) ++at_or_above;
    }
    sum = sum + Num::reduce(at_or_above, static_cast<std::int64_t>(r));
  }
  if (positives == 0) return std::nullopt;
  return sum / positives;
}

template <typename Num = Fraction>
std::optional<Num> brute_map(const RealMatrix& probs, const BinaryMatrix& truth) {
  Num sum;
  std::int64_t used = 0;
  for (std::size_t t = 0; t < truth.cols(); ++t) {
    std::vector<double> s(truth.rows());
    std::vector<std::uint8_t> y(truth.rows());
    for (std::size_t i = 0; i < truth.rows(); ++i) {
      s[i] = probs(i, t);
      y[i] = truth(i, t);
    }
    if (auto ap = brute_average_precision<Num>(s, y)) {
      sum = sum + *ap;
      ++used;
    }
  }
  if (used == 0) return std::nullopt;
  return sum / used;
}

template <typename Num = Fraction>
std::optional<Num> brute_coverage(const RealMatrix& probs, const BinaryMatrix& truth) {
  std::int64_t total = 0, kept = 0;
  const auto n = static_cast<std::int64_t>(truth.cols());
  for (std::size_t i = 0; i < truth.rows(); ++i) {
    std::size_t deepest = 0;
    for (std::size_t t = 0; t < truth.cols(); ++t) {
      if (truth(i, t)) deepest = std::max(deepest, rank_of(probs.row(i), t));
    }
    if (deepest == 0) continue;
    ++kept;
    total += static_cast<std::int64_t>(deepest) - 1;
  }
  if (kept == 0) return std::nullopt;
  return Num::reduce(total, kept * n);
}

template <typename Num = Fraction>
Num brute_subset_accuracy(const BinaryMatrix& hard, const BinaryMatrix& truth) {
  std::int64_t same = 0;
  for (std::size_t i = 0; i < truth.rows(); ++i) {
    bool all = true;
    for (std::size_t t = 0; t < truth.cols(); ++t) all = all && hard(i, t) == truth(i, t);
    same += all;
  }
  return Num::reduce(same, static_cast<std::int64_t>(truth.rows()));
}

template <typename Num = Fraction>
Num brute_hamming(const BinaryMatrix& hard, const BinaryMatrix& truth) {
  std::int64_t diff = 0;
  for (std::size_t i = 0; i < truth.rows(); ++i) {
    for (std::size_t t = 0; t < truth.cols(); ++t) diff += hard(i, t) != truth(i, t);
  }
  return Num::reduce(diff, static_cast<std::int64_t>(truth.rows() * truth.cols()));
}

/// Per-task (precision, recall) as exact fractions; empty when undefined.
template <typename Num = Fraction>
std::vector<std::pair<std::optional<Num>, std::optional<Num>>>
brute_precision_recall(const BinaryMatrix& hard, const BinaryMatrix& truth) {
  std::vector<std::pair<std::optional<Num>, std::optional<Num>>> out;
  for (std::size_t t = 0; t < truth.cols(); ++t) {
    std::int64_t predicted = 0, actual = 0, both = 0;
    for (std::size_t i = 0; i < truth.rows(); ++i) {
      predicted += hard(i, t);
      actual += truth(i, t);
      both += hard(i, t) && truth(i, t);
    }
    std::optional<Num> prec, rec;
    if (predicted) prec = Num::reduce(both, predicted);
    if (actual) rec = Num::reduce(both, actual);
    out.emplace_back(prec, rec);
  }
  return out;
}

}  // namespace mimtnet::oracle
