#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "mimtnet/matrix.hpp"

namespace mimtnet {

/// Predicted probabilities, thresholded predictions and ground truth for one
/// evaluation set (p samples x n tasks).
struct EvalInput {
  RealMatrix probs;
  BinaryMatrix hard;
  BinaryMatrix truth;

  std::size_t samples() const noexcept { return truth.rows(); }
  std::size_t tasks() const noexcept { return truth.cols(); }

  void validate() const;
};

/// Area under the precision-recall curve of one ranking: descending score,
/// ties by ascending sample index. Empty when truth has no positive.
std::optional<double> average_precision(std::span<const double> scores,
                                        std::span<const std::uint8_t> truth);

struct MapResult {
  std::optional<double> value;
  std::size_t excluded_tasks = 0;  // tasks with no positive sample
};

MapResult mean_average_precision(const EvalInput& inp);

struct CoverageResult {
  std::optional<double> value;
  std::size_t skipped_samples = 0;  // samples with no true label
};

/// Mean depth of the per-sample label ranking needed to reach every true
/// label, minus one, divided by the label count.
CoverageResult coverage(const EvalInput& inp);

double subset_accuracy(const EvalInput& inp);
double hamming_loss(const EvalInput& inp);

struct TaskPrecisionRecall {
  std::size_t true_positives = 0;
  std::size_t false_positives = 0;
  std::size_t false_negatives = 0;
  std::optional<double> precision;  // empty when nothing was predicted positive
  std::optional<double> recall;     // empty when the task has no positives
};

TaskPrecisionRecall precision_recall_from_counts(std::size_t tp, std::size_t fp,
                                                 std::size_t fn);
std::vector<TaskPrecisionRecall> precision_recall_per_task(const EvalInput& inp);

}  // namespace mimtnet
