#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "mimtnet/baselines.hpp"
#include "mimtnet/dataio.hpp"
#include "mimtnet/metrics.hpp"
#include "mimtnet/training.hpp"

namespace mimtnet {

inline constexpr const char* kReportFormat = "mimtnet-report-v1";

enum class ModelKind { mimtcnn, mlknn, mlp };

std::string to_string(ModelKind kind);
ModelKind parse_model_kind(const std::string& name);

/// A model family plus the hyperparameters of every family; only the ones
/// matching `kind` are used.
struct ModelSpec {
  ModelKind kind = ModelKind::mimtcnn;
  TrainConfig cnn;
  MlpConfig mlp;
  MlknnConfig knn;

  nlohmann::json to_json() const;
};

struct FoldSplit {
  std::vector<std::vector<std::size_t>> folds;  // test indices, ascending
  std::uint64_t seed = 0;

  std::size_t count() const noexcept { return folds.size(); }
  /// Every index outside fold f, ascending.
  std::vector<std::size_t> train_indices(std::size_t fold) const;
};

/// Seeded shuffle of 0..p-1 cut into k contiguous chunks; the first p % k
/// chunks get one extra element.
FoldSplit kfold_split(std::size_t patients, std::size_t k, std::uint64_t seed);

struct MetricSummary {
  std::optional<double> map;
  std::size_t map_excluded_tasks = 0;
  std::optional<double> coverage;
  std::size_t coverage_skipped_samples = 0;
  double subset_accuracy = 0.0;
  double hamming_loss = 0.0;
};

MetricSummary evaluate(const EvalInput& input);

struct FoldResult {
  std::size_t fold = 0;
  std::vector<std::size_t> train_indices;
  std::vector<std::size_t> test_indices;
  MetricSummary metrics;
  std::vector<TaskPrecisionRecall> per_task;
  double seconds = 0.0;
};

/// One configuration point of an experiment: a model at one swept value.
struct PointResult {
  std::string model;
  std::string param;  // "none" for a plain cross-validation
  double value = 0.0;
  std::vector<FoldResult> folds;
  MetricSummary mean;
  std::vector<TaskPrecisionRecall> pooled_per_task;
};

struct Report {
  std::string experiment;
  nlohmann::json config;
  std::vector<std::string> label_names;
  FoldSplit split;
  std::vector<PointResult> points;

  const PointResult& point(const std::string& model, double value) const;
};

/// Seed of the model trained on fold f. Shared by every experiment so that
/// sweeps and robustness runs compare against identical baselines.
std::uint64_t fold_model_seed(std::uint64_t root, std::size_t fold);

/// Trains the given model on `train` and returns probabilities for `test`.
RealMatrix fit_and_predict(const ModelSpec& spec, const Dataset& train,
                           const BinaryMatrix& test, std::uint64_t seed);

struct PointOptions {
  std::string param = "none";
  double value = 0.0;
  double train_fraction = 1.0;
  std::uint64_t subsample_seed = 0;
};

PointResult run_point(const Dataset& dataset, const ModelSpec& spec,
                      const FoldSplit& split, std::uint64_t root_seed,
                      const PointOptions& options = {});

Report run_cv(const Dataset& dataset, const ModelSpec& spec, std::size_t folds,
              std::uint64_t seed);

Report sweep_max_size(const Dataset& dataset, const ModelSpec& spec,
                      const std::vector<std::size_t>& sizes, std::size_t folds,
                      std::uint64_t seed);

Report sweep_generation_times(const Dataset& dataset, const ModelSpec& spec,
                              const std::vector<std::size_t>& times, std::size_t folds,
                              std::uint64_t seed);

/// Subsamples only the training part of every fold; test folds stay fixed.
Report subsample_experiment(const Dataset& dataset, const std::vector<ModelSpec>& specs,
                            const std::vector<double>& fractions, std::size_t folds,
                            std::uint64_t seed);

/// Appends `count` fair-coin binary columns after the original features.
Dataset append_noise_features(const Dataset& dataset, std::size_t count,
                              std::uint64_t seed);

Report noise_experiment(const Dataset& dataset, const std::vector<ModelSpec>& specs,
                        const std::vector<std::size_t>& counts, std::size_t folds,
                        std::uint64_t seed);

std::string report_json(const Report& report);
/// One row per (configuration point, fold).
std::string report_csv(const Report& report);
std::string report_timing_csv(const Report& report);

/// Paths of the flat table and timing sidecar written next to a report.
std::filesystem::path report_table_path(const std::filesystem::path& report);
std::filesystem::path report_timing_path(const std::filesystem::path& report);

/// Writes the report document, its flat table and the wall-clock sidecar.
/// Timing lives outside the document so reruns stay byte-identical.
void write_report(const Report& report, const std::filesystem::path& path);

void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace mimtnet
