#include "mimtnet/harness.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>

#include "mimtnet/error.hpp"
#include "mimtnet/random.hpp"

namespace mimtnet {

using nlohmann::json;

namespace {

// Every report carries this note: the coverage formula had to be reconstructed.
constexpr const char* kCoverageNote =
    "coverage = mean over samples with >=1 true label of (deepest true-label rank - 1), "
    "divided by the label count; label ranking ties break by ascending label index";

json optional_json(const std::optional<double>& v) {
  return v ? json(*v) : json(nullptr);
}

std::string optional_csv(const std::optional<double>& v) {
  if (!v) return "";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", *v);
  return buf;
}

std::string real_csv(double v) { return optional_csv(v); }

json metrics_json(const MetricSummary& m) {
  return {{"map", optional_json(m.map)},
          {"map_excluded_tasks", m.map_excluded_tasks},
          {"coverage", optional_json(m.coverage)},
          {"coverage_skipped_samples", m.coverage_skipped_samples},
          {"subset_accuracy", m.subset_accuracy},
          {"hamming_loss", m.hamming_loss}};
}

json per_task_json(const std::vector<TaskPrecisionRecall>& rows,
                   const std::vector<std::string>& names) {
  json out = json::array();
  for (std::size_t t = 0; t < rows.size(); ++t) {
    out.push_back({{"task", t < names.size() ? names[t] : std::to_string(t)},
                   {"true_positives", rows[t].true_positives},
                   {"false_positives", rows[t].false_positives},
                   {"false_negatives", rows[t].false_negatives},
                   {"precision", optional_json(rows[t].precision)},
                   {"recall", optional_json(rows[t].recall)}});
  }
  return out;
}

std::optional<double> mean_defined(const std::vector<std::optional<double>>& values) {
  double sum = 0.0;
  std::size_t count = 0;
  for (const auto& v : values) {
    if (v) {
      sum += *v;
      ++count;
    }
  }
  if (count == 0) return std::nullopt;
  return sum / static_cast<double>(count);
}

void summarize(PointResult& point) {
  std::vector<std::optional<double>> maps, covs;
  double subset = 0.0, hamming = 0.0;
  point.mean = {};
  std::vector<std::size_t> tp, fp, fn;
  for (const auto& f : point.folds) {
    maps.push_back(f.metrics.map);
    covs.push_back(f.metrics.coverage);
    point.mean.map_excluded_tasks += f.metrics.map_excluded_tasks;
    point.mean.coverage_skipped_samples += f.metrics.coverage_skipped_samples;
    subset += f.metrics.subset_accuracy;
    hamming += f.metrics.hamming_loss;
    tp.resize(f.per_task.size());
    fp.resize(f.per_task.size());
    fn.resize(f.per_task.size());
    for (std::size_t t = 0; t < f.per_task.size(); ++t) {
      tp[t] += f.per_task[t].true_positives;
      fp[t] += f.per_task[t].false_positives;
      fn[t] += f.per_task[t].false_negatives;
    }
  }
  const double k = static_cast<double>(point.folds.size());
  point.mean.map = mean_defined(maps);
  point.mean.coverage = mean_defined(covs);
  point.mean.subset_accuracy = subset / k;
  point.mean.hamming_loss = hamming / k;
  point.pooled_per_task.clear();
  for (std::size_t t = 0; t < tp.size(); ++t) {
    point.pooled_per_task.push_back(precision_recall_from_counts(tp[t], fp[t], fn[t]));
  }
}

json split_json(const FoldSplit& split) {
  return {{"seed", std::to_string(split.seed)}, {"folds", split.folds}};
}

Report make_report(const std::string& experiment, const Dataset& dataset,
                   const FoldSplit& split, std::uint64_t seed, json params) {
  Report r;
  r.experiment = experiment;
  r.label_names = dataset.label_names;
  r.split = split;
  r.config = {{"experiment", experiment},
              {"seed", std::to_string(seed)},
              {"folds", split.count()},
              {"data", {{"patients", dataset.patients()},
                        {"features", dataset.feature_count()},
                        {"tasks", dataset.task_count()}}},
              {"experiment_params", std::move(params)}};
  return r;
}

}  // namespace

std::string to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::mimtcnn: return "mimtcnn";
    case ModelKind::mlknn: return "mlknn";
    case ModelKind::mlp: return "mlp";
  }
  return "unknown";
}

ModelKind parse_model_kind(const std::string& name) {
  if (name == "mimtcnn") return ModelKind::mimtcnn;
  if (name == "mlknn") return ModelKind::mlknn;
  if (name == "mlp") return ModelKind::mlp;
  throw ParameterError("unknown model '" + name + "' (expected mimtcnn, mlknn or mlp)");
}

json ModelSpec::to_json() const {
  auto adam = [](const AdamConfig& a) {
    return json{{"learning_rate", a.learning_rate},
                {"beta1", a.beta1},
                {"beta2", a.beta2},
                {"epsilon", a.epsilon}};
  };
  switch (kind) {
    case ModelKind::mimtcnn:
      return {{"model", "mimtcnn"},
              {"epochs", cnn.epochs},
              {"adam", adam(cnn.adam)},
              {"proposals", cnn.proposals},
              {"max_size", cnn.max_size},
              {"filters", cnn.filters},
              {"hidden", cnn.hidden},
              {"init_scale", cnn.init_scale}};
    case ModelKind::mlp:
      return {{"model", "mlp"},
              {"epochs", mlp.epochs},
              {"adam", adam(mlp.adam)},
              {"hidden", mlp.hidden}};
    case ModelKind::mlknn:
      return {{"model", "mlknn"}, {"k", knn.k}, {"smoothing", knn.smoothing}};
  }
  return {};
}

std::vector<std::size_t> FoldSplit::train_indices(std::size_t fold) const {
  std::vector<std::size_t> out;
  for (std::size_t f = 0; f < folds.size(); ++f) {
    if (f != fold) out.insert(out.end(), folds[f].begin(), folds[f].end());
  }
  std::ranges::sort(out);
  return out;
}

FoldSplit kfold_split(std::size_t patients, std::size_t k, std::uint64_t seed) {
  if (k < 2) throw ParameterError("cross-validation needs at least 2 folds");
  if (patients < k) {
    throw ParameterError("cannot split " + std::to_string(patients) + " samples into " +
                         std::to_string(k) + " folds");
  }
  std::vector<std::size_t> order(patients);
  for (std::size_t i = 0; i < patients; ++i) order[i] = i;
  Rng rng(derive_seed(seed, "kfold"));
  rng.shuffle(order);

  FoldSplit split;
  split.seed = seed;
  std::size_t start = 0;
  for (std::size_t f = 0; f < k; ++f) {
    const std::size_t size = patients / k + (f < patients % k ? 1 : 0);
    std::vector<std::size_t> fold(order.begin() + static_cast<std::ptrdiff_t>(start),
                                  order.begin() + static_cast<std::ptrdiff_t>(start + size));
    std::ranges::sort(fold);
    split.folds.push_back(std::move(fold));
    start += size;
  }
  return split;
}

MetricSummary evaluate(const EvalInput& input) {
  MetricSummary m;
  const auto map = mean_average_precision(input);
  m.map = map.value;
  m.map_excluded_tasks = map.excluded_tasks;
  const auto cov = coverage(input);
  m.coverage = cov.value;
  m.coverage_skipped_samples = cov.skipped_samples;
  m.subset_accuracy = subset_accuracy(input);
  m.hamming_loss = hamming_loss(input);
  return m;
}

std::uint64_t fold_model_seed(std::uint64_t root, std::size_t fold) {
  return derive_seed(root, "model", fold);
}

RealMatrix fit_and_predict(const ModelSpec& spec, const Dataset& train,
                           const BinaryMatrix& test, std::uint64_t seed) {
  switch (spec.kind) {
    case ModelKind::mimtcnn: {
      TrainConfig cfg = spec.cnn;
      cfg.seed = seed;
      return predict(mimtnet::train(train, cfg), test).probs;
    }
    case ModelKind::mlp: {
      MlpConfig cfg = spec.mlp;
      cfg.seed = seed;
      return mlp_predict(mlp_train(train, cfg), test);
    }
    case ModelKind::mlknn:
      return mlknn_predict(mlknn_fit(train, spec.knn), test);
  }
  throw ParameterError("unknown model kind");
}

PointResult run_point(const Dataset& dataset, const ModelSpec& spec,
                      const FoldSplit& split, std::uint64_t root_seed,
                      const PointOptions& options) {
  if (!(options.train_fraction > 0.0 && options.train_fraction <= 1.0)) {
    throw ParameterError("training fraction must lie in (0, 1]");
  }
  PointResult point;
  point.model = to_string(spec.kind);
  point.param = options.param;
  point.value = options.value;
  for (std::size_t f = 0; f < split.count(); ++f) {
    const auto start = std::chrono::steady_clock::now();
    FoldResult fold;
    fold.fold = f;
    fold.test_indices = split.folds[f];
    fold.train_indices = split.train_indices(f);
    if (options.train_fraction < 1.0) {
      const auto keep = static_cast<std::size_t>(std::llround(
          options.train_fraction * static_cast<double>(fold.train_indices.size())));
      Rng rng(derive_seed(options.subsample_seed, "subsample-fold", f));
      auto picks = rng.sample_without_replacement(fold.train_indices.size(),
                                                  std::max<std::size_t>(keep, 1));
      std::ranges::sort(picks);
      std::vector<std::size_t> kept;
      for (auto p : picks) kept.push_back(fold.train_indices[p]);
      fold.train_indices = std::move(kept);
    }
    try {
      const Dataset train = dataset.subset(fold.train_indices);
      const Dataset test = dataset.subset(fold.test_indices);
      EvalInput input;
      input.probs = fit_and_predict(spec, train, test.features, fold_model_seed(root_seed, f));
      input.hard = threshold(input.probs);
      input.truth = test.labels;
      fold.metrics = evaluate(input);
      fold.per_task = precision_recall_per_task(input);
    } catch (const Error& e) {
      const std::string msg = "fold " + std::to_string(f) + ": " + e.what();
      switch (e.category()) {
        case ErrorCategory::training: throw TrainingError(msg);
        case ErrorCategory::data: throw SchemaError(msg);
        default: throw ParameterError(msg);
      }
    }
    fold.seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    point.folds.push_back(std::move(fold));
  }
  summarize(point);
  return point;
}

Report run_cv(const Dataset& dataset, const ModelSpec& spec, std::size_t folds,
              std::uint64_t seed) {
  dataset.validate();
  const auto split = kfold_split(dataset.patients(), folds, seed);
  Report r = make_report("cv", dataset, split, seed, json::object());
  r.config["models"] = json::array({spec.to_json()});
  r.points.push_back(run_point(dataset, spec, split, seed));
  return r;
}

Report sweep_max_size(const Dataset& dataset, const ModelSpec& spec,
                      const std::vector<std::size_t>& sizes, std::size_t folds,
                      std::uint64_t seed) {
  dataset.validate();
  if (sizes.empty()) throw ParameterError("sweep needs at least one value");
  const auto split = kfold_split(dataset.patients(), folds, seed);
  Report r = make_report("sweep-max-size", dataset, split, seed,
                         {{"param", "max-size"}, {"values", sizes}});
  r.config["models"] = json::array({spec.to_json()});
  for (std::size_t size : sizes) {
    ModelSpec point_spec = spec;
    point_spec.cnn.max_size = size;
    r.points.push_back(run_point(dataset, point_spec, split, seed,
                                 {"max-size", static_cast<double>(size), 1.0, 0}));
  }
  return r;
}

Report sweep_generation_times(const Dataset& dataset, const ModelSpec& spec,
                              const std::vector<std::size_t>& times, std::size_t folds,
                              std::uint64_t seed) {
  dataset.validate();
  if (times.empty()) throw ParameterError("sweep needs at least one value");
  const auto split = kfold_split(dataset.patients(), folds, seed);
  Report r = make_report("sweep-proposals", dataset, split, seed,
                         {{"param", "proposals"}, {"values", times}});
  r.config["models"] = json::array({spec.to_json()});
  for (std::size_t count : times) {
    ModelSpec point_spec = spec;
    point_spec.cnn.proposals = count;
    r.points.push_back(run_point(dataset, point_spec, split, seed,
                                 {"proposals", static_cast<double>(count), 1.0, 0}));
  }
  return r;
}

Report subsample_experiment(const Dataset& dataset, const std::vector<ModelSpec>& specs,
                            const std::vector<double>& fractions, std::size_t folds,
                            std::uint64_t seed) {
  dataset.validate();
  if (fractions.empty() || specs.empty()) {
    throw ParameterError("subsample experiment needs fractions and models");
  }
  const auto split = kfold_split(dataset.patients(), folds, seed);
  Report r = make_report("robustness-subsample", dataset, split, seed,
                         {{"param", "train-fraction"}, {"values", fractions}});
  r.config["models"] = json::array();
  for (const auto& spec : specs) r.config["models"].push_back(spec.to_json());
  for (const auto& spec : specs) {
    for (double fraction : fractions) {
      // Keyed on the fraction's bit pattern so each point draws its own subsample.
      std::uint64_t bits;
      std::memcpy(&bits, &fraction, sizeof bits);
      r.points.push_back(run_point(dataset, spec, split, seed,
                                   {"train-fraction", fraction, fraction,
                                    derive_seed(seed, "subsample", bits)}));
    }
  }
  return r;
}

Dataset append_noise_features(const Dataset& dataset, std::size_t count,
                              std::uint64_t seed) {
  if (count == 0) return dataset;
  const std::size_t d = dataset.feature_count();
  Dataset out = dataset;
  out.features = BinaryMatrix(dataset.patients(), d + count);
  Rng rng(seed);
  for (std::size_t i = 0; i < dataset.patients(); ++i) {
    std::ranges::copy(dataset.features.row(i), out.features.row(i).begin());
    for (std::size_t c = 0; c < count; ++c) {
      out.features(i, d + c) = rng.bernoulli(0.5) ? 1 : 0;
    }
  }
  for (std::size_t c = 0; c < count; ++c) {
    std::string name = "noise_" + std::to_string(c);
    while (std::ranges::find(out.feature_names, name) != out.feature_names.end()) {
      name += "_";
    }
    out.feature_names.push_back(std::move(name));
  }
  return out;
}

Report noise_experiment(const Dataset& dataset, const std::vector<ModelSpec>& specs,
                        const std::vector<std::size_t>& counts, std::size_t folds,
                        std::uint64_t seed) {
  dataset.validate();
  if (counts.empty() || specs.empty()) {
    throw ParameterError("noise experiment needs counts and models");
  }
  const auto split = kfold_split(dataset.patients(), folds, seed);
  Report r = make_report("robustness-noise", dataset, split, seed,
                         {{"param", "noise-features"}, {"values", counts}});
  r.config["models"] = json::array();
  for (const auto& spec : specs) r.config["models"].push_back(spec.to_json());
  for (const auto& spec : specs) {
    for (std::size_t count : counts) {
      const Dataset noisy =
          append_noise_features(dataset, count, derive_seed(seed, "noise", count));
      r.points.push_back(run_point(noisy, spec, split, seed,
                                   {"noise-features", static_cast<double>(count), 1.0, 0}));
    }
  }
  return r;
}

const PointResult& Report::point(const std::string& model, double value) const {
  for (const auto& p : points) {
    if (p.model == model && p.value == value) return p;
  }
  throw ParameterError("report has no point for model '" + model + "' at value " +
                       std::to_string(value));
}

std::string report_json(const Report& report) {
  json points = json::array();
  for (const auto& p : report.points) {
    json folds = json::array();
    for (const auto& f : p.folds) {
      json fold = {{"fold", f.fold},
                   {"train_size", f.train_indices.size()},
                   {"test_size", f.test_indices.size()},
                   {"metrics", metrics_json(f.metrics)},
                   {"per_task", per_task_json(f.per_task, report.label_names)}};
      if (p.param == "train-fraction") fold["train_indices"] = f.train_indices;
      folds.push_back(std::move(fold));
    }
    points.push_back({{"model", p.model},
                      {"param", p.param},
                      {"value", p.value},
                      {"folds", std::move(folds)},
                      {"mean", metrics_json(p.mean)},
                      {"pooled_per_task", per_task_json(p.pooled_per_task, report.label_names)}});
  }
  json doc = {{"format", kReportFormat},
              {"experiment", report.experiment},
              {"notes", json::array({kCoverageNote})},
              {"config", report.config},
              {"split", split_json(report.split)},
              {"points", std::move(points)}};
  return doc.dump(1) + "\n";
}

std::string report_csv(const Report& report) {
  std::string out =
      "experiment,model,param,value,fold,train_size,test_size,map,map_excluded_tasks,"
      "coverage,coverage_skipped_samples,subset_accuracy,hamming_loss\n";
  for (const auto& p : report.points) {
    for (const auto& f : p.folds) {
      out += report.experiment + ',' + p.model + ',' + p.param + ',' + real_csv(p.value) +
             ',' + std::to_string(f.fold) + ',' + std::to_string(f.train_indices.size()) +
             ',' + std::to_string(f.test_indices.size()) + ',' + optional_csv(f.metrics.map) +
             ',' + std::to_string(f.metrics.map_excluded_tasks) + ',' +
             optional_csv(f.metrics.coverage) + ',' +
             std::to_string(f.metrics.coverage_skipped_samples) + ',' +
             real_csv(f.metrics.subset_accuracy) + ',' + real_csv(f.metrics.hamming_loss) +
             '\n';
    }
  }
  return out;
}

std::string report_timing_csv(const Report& report) {
  std::string out = "experiment,model,param,value,fold,seconds\n";
  for (const auto& p : report.points) {
    for (const auto& f : p.folds) {
      char buf[32];
      std::snprintf(buf, sizeof buf, "%.3f", f.seconds);
      out += report.experiment + ',' + p.model + ',' + p.param + ',' + real_csv(p.value) +
             ',' + std::to_string(f.fold) + ',' + buf + '\n';
    }
  }
  return out;
}

std::filesystem::path report_table_path(const std::filesystem::path& report) {
  auto p = report;
  if (p.extension() == ".csv") return p.replace_extension(".table.csv");
  return p.replace_extension(".csv");
}

std::filesystem::path report_timing_path(const std::filesystem::path& report) {
  auto p = report;
  return p.replace_extension(".timing.csv");
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << text;
  if (!out) throw IoError("write to '" + path.string() + "' failed");
}

void write_report(const Report& report, const std::filesystem::path& path) {
  write_text_file(path, report_json(report));
  write_text_file(report_table_path(path), report_csv(report));
  write_text_file(report_timing_path(path), report_timing_csv(report));
}

}  // namespace mimtnet
