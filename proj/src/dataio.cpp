#include "mimtnet/dataio.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include "mimtnet/error.hpp"
#include "mimtnet/random.hpp"

namespace mimtnet {

namespace {

constexpr std::string_view kFeaturePrefix = "x_";
constexpr std::string_view kLabelPrefix = "y_";

std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> cells;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      cells.push_back(line.substr(start));
      return cells;
    }
    cells.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
}

void check_unique(const std::vector<std::string>& names, const char* what) {
  std::set<std::string> seen;
  for (const auto& name : names) {
    if (!seen.insert(name).second) {
      throw SchemaError(std::string("duplicate ") + what + " name '" + name + "'");
    }
  }
}

std::string numbered_name(std::string_view stem, std::size_t i, std::size_t count) {
  const std::size_t width = std::to_string(count - 1).size();
  std::string digits = std::to_string(i);
  return std::string(stem) + std::string(width - digits.size(), '0') + digits;
}

}  // namespace

void Dataset::validate() const {
  if (features.rows() != labels.rows()) {
    throw SchemaError("feature and label row counts differ (" +
                      std::to_string(features.rows()) + " vs " +
                      std::to_string(labels.rows()) + ")");
  }
  if (feature_names.size() != features.cols()) {
    throw SchemaError("feature name count does not match feature columns");
  }
  if (label_names.size() != labels.cols()) {
    throw SchemaError("label name count does not match label columns");
  }
  check_unique(feature_names, "feature");
  check_unique(label_names, "label");
  for (auto v : features.values()) {
    if (v > 1) throw SchemaError("feature cell outside {0,1}");
  }
  for (auto v : labels.values()) {
    if (v > 1) throw SchemaError("label cell outside {0,1}");
  }
}

Dataset Dataset::subset(const std::vector<std::size_t>& rows) const {
  Dataset out;
  out.features = BinaryMatrix(rows.size(), feature_count());
  out.labels = BinaryMatrix(rows.size(), task_count());
  out.feature_names = feature_names;
  out.label_names = label_names;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= patients()) throw ParameterError("subset row out of range");
    std::ranges::copy(features.row(rows[i]), out.features.row(i).begin());
    std::ranges::copy(labels.row(rows[i]), out.labels.row(i).begin());
  }
  return out;
}

void SyntheticSpec::validate() const {
  if (patients == 0 || features == 0 || tasks == 0 || keys_per_task == 0 ||
      max_active_tasks == 0 || max_symptoms == 0) {
    throw ParameterError("synthetic spec counts must be positive");
  }
  if (keys_per_task * tasks > features) {
    throw ParameterError("keys_per_task * tasks exceeds the feature count");
  }
  if (max_active_tasks > tasks) {
    throw ParameterError("max_active_tasks exceeds the task count");
  }
  if (max_active_tasks > max_symptoms) {
    throw ParameterError("max_active_tasks exceeds max_symptoms");
  }
  if (!(background_rate >= 0.0 && background_rate <= 1.0) ||
      !(label_flip_rate >= 0.0 && label_flip_rate <= 1.0)) {
    throw ParameterError("rates must lie in [0, 1]");
  }
}

Dataset parse_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw SchemaError("missing header row");

  Dataset ds;
  std::vector<bool> is_feature;
  for (auto cell : split_commas(line)) {
    if (cell.starts_with(kFeaturePrefix)) {
      if (!ds.label_names.empty()) {
        throw SchemaError("feature column '" + std::string(cell) +
                          "' follows a label column");
      }
      ds.feature_names.emplace_back(cell.substr(kFeaturePrefix.size()));
      is_feature.push_back(true);
    } else if (cell.starts_with(kLabelPrefix)) {
      ds.label_names.emplace_back(cell.substr(kLabelPrefix.size()));
      is_feature.push_back(false);
    } else {
      throw SchemaError("column '" + std::string(cell) +
                        "' has neither x_ nor y_ prefix");
    }
  }
  if (ds.feature_names.empty()) throw SchemaError("no x_ feature columns");
  if (ds.label_names.empty()) throw SchemaError("no y_ label columns");
  check_unique(ds.feature_names, "feature");
  check_unique(ds.label_names, "label");

  const std::size_t d = ds.feature_names.size();
  const std::size_t n = ds.label_names.size();
  std::vector<std::uint8_t> xs;
  std::vector<std::uint8_t> ys;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++row;
    const auto cells = split_commas(line);
    if (cells.size() != d + n) {
      throw ParseError("row " + std::to_string(row) + ": expected " +
                       std::to_string(d + n) + " cells, got " +
                       std::to_string(cells.size()));
    }
    for (std::size_t c = 0; c < cells.size(); ++c) {
      if (cells[c] != "0" && cells[c] != "1") {
        const auto& name = c < d ? ds.feature_names[c] : ds.label_names[c - d];
        throw ParseError("row " + std::to_string(row) + ", column " +
                         (c < d ? "x_" : "y_") + name + ": cell '" +
                         std::string(cells[c]) + "' is not 0 or 1");
      }
      (c < d ? xs : ys).push_back(cells[c] == "1" ? 1 : 0);
    }
  }

  ds.features = BinaryMatrix(row, d);
  ds.labels = BinaryMatrix(row, n);
  std::ranges::copy(xs, ds.features.values().begin());
  std::ranges::copy(ys, ds.labels.values().begin());
  return ds;
}

Dataset load_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_csv(buffer.str());
}

std::string format_csv(const Dataset& dataset) {
  dataset.validate();
  std::string out;
  const std::size_t d = dataset.feature_count();
  const std::size_t n = dataset.task_count();
  out.reserve((dataset.patients() + 1) * 2 * (d + n) + 16 * (d + n));
  for (std::size_t c = 0; c < d; ++c) {
    if (c) out += ',';
    out += kFeaturePrefix;
    out += dataset.feature_names[c];
  }
  for (std::size_t c = 0; c < n; ++c) {
    out += ',';
    out += kLabelPrefix;
    out += dataset.label_names[c];
  }
  out += '\n';
  for (std::size_t i = 0; i < dataset.patients(); ++i) {
    for (std::size_t c = 0; c < d; ++c) {
      if (c) out += ',';
      out += dataset.features(i, c) ? '1' : '0';
    }
    for (std::size_t c = 0; c < n; ++c) {
      out += ',';
      out += dataset.labels(i, c) ? '1' : '0';
    }
    out += '\n';
  }
  return out;
}

void save_csv(const Dataset& dataset, const std::filesystem::path& path) {
  const std::string text = format_csv(dataset);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << text;
  if (!out) throw IoError("write to '" + path.string() + "' failed");
}

namespace {

// One patient's draw: steps (a) through (f) of the generative rule.
void draw_patient(const SyntheticSpec& spec,
                  const std::vector<std::vector<std::size_t>>& keys,
                  const std::vector<std::size_t>& background, Rng& rng,
                  std::span<std::uint8_t> x, std::span<std::uint8_t> y) {
  std::ranges::fill(x, 0);
  std::ranges::fill(y, 0);

  const std::size_t active_tasks = rng.uniform_int(1, spec.max_active_tasks);
  const auto tasks = rng.sample_without_replacement(spec.tasks, active_tasks);
  for (std::size_t t : tasks) {
    y[t] = 1;
    // Independent fair bits, redrawn until nonempty: uniform over nonempty subsets.
    bool any = false;
    while (!any) {
      for (std::size_t k : keys[t]) {
        x[k] = rng.bernoulli(0.5) ? 1 : 0;
        any = any || x[k];
      }
    }
  }

  std::vector<std::size_t> active_background;
  for (std::size_t f : background) {
    if (rng.bernoulli(spec.background_rate)) {
      x[f] = 1;
      active_background.push_back(f);
    }
  }

  std::size_t active_keys = 0;
  for (std::size_t t : tasks) {
    for (std::size_t k : keys[t]) active_keys += x[k];
  }

  while (active_keys + active_background.size() > spec.max_symptoms &&
         !active_background.empty()) {
    const auto pick = rng.uniform_index(active_background.size());
    x[active_background[pick]] = 0;
    active_background.erase(active_background.begin() +
                            static_cast<std::ptrdiff_t>(pick));
  }
  // Key activations alone can still exceed the bound; trim keys of tasks that
  // keep at least one other key on, so the OR rule is preserved.
  while (active_keys > spec.max_symptoms) {
    std::vector<std::size_t> removable;
    for (std::size_t t : tasks) {
      std::size_t on = 0;
      for (std::size_t k : keys[t]) on += x[k];
      if (on < 2) continue;
      for (std::size_t k : keys[t]) {
        if (x[k]) removable.push_back(k);
      }
    }
    std::ranges::sort(removable);
    x[removable[rng.uniform_index(removable.size())]] = 0;
    --active_keys;
  }

  std::size_t total = active_keys + active_background.size();
  if (total < 2) {
    std::vector<std::size_t> candidates;
    for (std::size_t f : background) {
      if (!x[f]) candidates.push_back(f);
    }
    if (candidates.size() < 2 - total) {
      // No spare background features: fall back to unused keys of active tasks.
      for (std::size_t t : tasks) {
        for (std::size_t k : keys[t]) {
          if (!x[k]) candidates.push_back(k);
        }
      }
    }
    const auto picks =
        rng.sample_without_replacement(candidates.size(),
                                       std::min(candidates.size(), 2 - total));
    for (auto p : picks) x[candidates[p]] = 1;
    total += picks.size();
    if (total < 2) {
      throw GenerationError("cannot activate two features per patient with " +
                            std::to_string(spec.features) + " features");
    }
  }

  for (std::size_t t = 0; t < spec.tasks; ++t) {
    if (spec.label_flip_rate > 0.0 && rng.bernoulli(spec.label_flip_rate)) {
      y[t] = 1 - y[t];
    }
  }
}

}  // namespace

SyntheticData generate_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);

  SyntheticData out;
  const auto key_pool =
      rng.sample_without_replacement(spec.features, spec.tasks * spec.keys_per_task);
  out.key_features.resize(spec.tasks);
  std::vector<bool> is_key(spec.features, false);
  for (std::size_t t = 0; t < spec.tasks; ++t) {
    auto& keys = out.key_features[t];
    keys.assign(key_pool.begin() + static_cast<std::ptrdiff_t>(t * spec.keys_per_task),
                key_pool.begin() + static_cast<std::ptrdiff_t>((t + 1) * spec.keys_per_task));
    std::ranges::sort(keys);
    for (auto k : keys) is_key[k] = true;
  }
  std::vector<std::size_t> background;
  for (std::size_t f = 0; f < spec.features; ++f) {
    if (!is_key[f]) background.push_back(f);
  }

  Dataset& ds = out.dataset;
  for (std::size_t f = 0; f < spec.features; ++f) {
    ds.feature_names.push_back(numbered_name("symptom_", f, spec.features));
  }
  for (std::size_t t = 0; t < spec.tasks; ++t) {
    ds.label_names.push_back(numbered_name("syndrome_", t, spec.tasks));
  }
  ds.features = BinaryMatrix(spec.patients, spec.features);
  ds.labels = BinaryMatrix(spec.patients, spec.tasks);

  for (int attempt = 0; attempt < kMaxGenerationAttempts; ++attempt) {
    for (std::size_t i = 0; i < spec.patients; ++i) {
      draw_patient(spec, out.key_features, background, rng, ds.features.row(i),
                   ds.labels.row(i));
    }
    bool frequent_enough = true;
    for (std::size_t t = 0; t < spec.tasks && frequent_enough; ++t) {
      std::size_t positives = 0;
      for (std::size_t i = 0; i < spec.patients; ++i) positives += ds.labels(i, t);
      frequent_enough = positives >= spec.min_task_frequency;
    }
    if (frequent_enough) return out;
  }
  throw GenerationError(
      "no corpus met the per-task frequency floor of " +
      std::to_string(spec.min_task_frequency) + " in " +
      std::to_string(kMaxGenerationAttempts) +
      " attempts; increase the patient count or lower min_task_frequency");
}

}  // namespace mimtnet
