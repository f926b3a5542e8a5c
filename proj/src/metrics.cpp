#include "mimtnet/metrics.hpp"

#include <algorithm>
#include <numeric>

#include "mimtnet/error.hpp"

namespace mimtnet {

void EvalInput::validate() const {
  if (!probs.same_shape(RealMatrix(truth.rows(), truth.cols())) ||
      hard.rows() != truth.rows() || hard.cols() != truth.cols()) {
    throw ShapeError("evaluation matrices disagree in shape");
  }
}

namespace {

// Indices sorted by descending score, ties by ascending index.
std::vector<std::size_t> ranking(std::span<const double> scores) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::ranges::stable_sort(order, [&](std::size_t a, std::size_t b) {
    return scores[a] > scores[b];
  });
  return order;
}

void require_samples(const EvalInput& inp) {
  inp.validate();
  if (inp.samples() == 0 || inp.tasks() == 0) {
    throw ParameterError("metric needs at least one sample and one task");
  }
}

}  // namespace

std::optional<double> average_precision(std::span<const double> scores,
                                        std::span<const std::uint8_t> truth) {
  if (scores.size() != truth.size()) throw ShapeError("average_precision: length mismatch");
  const auto order = ranking(scores);
  std::size_t hits = 0;
  double sum = 0.0;
  for (std::size_t rank = 0; rank < order.size(); ++rank) {
    if (truth[order[rank]]) {
      ++hits;
      sum += static_cast<double>(hits) / static_cast<double>(rank + 1);
    }
  }
  if (hits == 0) return std::nullopt;
  return sum / static_cast<double>(hits);
}

MapResult mean_average_precision(const EvalInput& inp) {
  require_samples(inp);
  MapResult out;
  std::vector<double> scores(inp.samples());
  std::vector<std::uint8_t> truth(inp.samples());
  double sum = 0.0;
  std::size_t used = 0;
  for (std::size_t t = 0; t < inp.tasks(); ++t) {
    for (std::size_t i = 0; i < inp.samples(); ++i) {
      scores[i] = inp.probs(i, t);
      truth[i] = inp.truth(i, t);
    }
    if (auto ap = average_precision(scores, truth)) {
      sum += *ap;
      ++used;
    } else {
      ++out.excluded_tasks;
    }
  }
  if (used > 0) out.value = sum / static_cast<double>(used);
  return out;
}

CoverageResult coverage(const EvalInput& inp) {
  require_samples(inp);
  CoverageResult out;
  const std::size_t n = inp.tasks();
  std::size_t retained = 0;
  double total = 0.0;
  for (std::size_t i = 0; i < inp.samples(); ++i) {
    const auto order = ranking(inp.probs.row(i));
    std::size_t deepest = 0;
    for (std::size_t rank = 0; rank < n; ++rank) {
      if (inp.truth(i, order[rank])) deepest = rank + 1;
    }
    if (deepest == 0) {
      ++out.skipped_samples;
      continue;
    }
    ++retained;
    total += static_cast<double>(deepest - 1);
  }
  if (retained > 0) {
    out.value = total / static_cast<double>(retained) / static_cast<double>(n);
  }
  return out;
}

double subset_accuracy(const EvalInput& inp) {
  require_samples(inp);
  std::size_t exact = 0;
  for (std::size_t i = 0; i < inp.samples(); ++i) {
    exact += std::ranges::equal(inp.hard.row(i), inp.truth.row(i)) ? 1 : 0;
  }
  return static_cast<double>(exact) / static_cast<double>(inp.samples());
}

double hamming_loss(const EvalInput& inp) {
  require_samples(inp);
  std::size_t wrong = 0;
  const auto h = inp.hard.values();
  const auto y = inp.truth.values();
  for (std::size_t k = 0; k < h.size(); ++k) wrong += h[k] != y[k] ? 1 : 0;
  return static_cast<double>(wrong) / static_cast<double>(h.size());
}

TaskPrecisionRecall precision_recall_from_counts(std::size_t tp, std::size_t fp,
                                                 std::size_t fn) {
  TaskPrecisionRecall pr{tp, fp, fn, std::nullopt, std::nullopt};
  if (tp + fp > 0) pr.precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
  if (tp + fn > 0) pr.recall = static_cast<double>(tp) / static_cast<double>(tp + fn);
  return pr;
}

std::vector<TaskPrecisionRecall> precision_recall_per_task(const EvalInput& inp) {
  inp.validate();
  std::vector<TaskPrecisionRecall> out;
  for (std::size_t t = 0; t < inp.tasks(); ++t) {
    std::size_t tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < inp.samples(); ++i) {
      const bool pred = inp.hard(i, t) != 0;
      const bool real = inp.truth(i, t) != 0;
      tp += pred && real;
      fp += pred && !real;
      fn += !pred && real;
    }
    out.push_back(precision_recall_from_counts(tp, fp, fn));
  }
  return out;
}

}  // namespace mimtnet
