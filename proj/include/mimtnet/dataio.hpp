#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "mimtnet/matrix.hpp"

namespace mimtnet {

/// Patients as rows; binary symptom features and binary task labels.
struct Dataset {
  BinaryMatrix features;  // p x d
  BinaryMatrix labels;    // p x n
  std::vector<std::string> feature_names;
  std::vector<std::string> label_names;

  std::size_t patients() const noexcept { return features.rows(); }
  std::size_t feature_count() const noexcept { return features.cols(); }
  std::size_t task_count() const noexcept { return labels.cols(); }

  /// Throws SchemaError if any Dataset invariant is broken.
  void validate() const;

  /// Rows selected by index, in the given order.
  Dataset subset(const std::vector<std::size_t>& rows) const;

  friend bool operator==(const Dataset&, const Dataset&) = default;
};

struct SyntheticSpec {
  std::size_t patients = 1180;
  std::size_t features = 186;
  std::size_t tasks = 12;
  std::size_t keys_per_task = 5;
  std::size_t max_active_tasks = 4;
  std::size_t max_symptoms = 18;
  double background_rate = 0.03;
  double label_flip_rate = 0.0;
  std::size_t min_task_frequency = 50;
  std::uint64_t seed = 0;

  void validate() const;
};

struct SyntheticData {
  Dataset dataset;
  /// Sorted key feature indices per task; disjoint across tasks.
  std::vector<std::vector<std::size_t>> key_features;
};

/// Number of whole-corpus draws attempted before giving up on the
/// per-task frequency floor.
inline constexpr int kMaxGenerationAttempts = 1000;

Dataset load_csv(const std::filesystem::path& path);
Dataset parse_csv(const std::string& text);
void save_csv(const Dataset& dataset, const std::filesystem::path& path);
std::string format_csv(const Dataset& dataset);

SyntheticData generate_synthetic(const SyntheticSpec& spec);

}  // namespace mimtnet
