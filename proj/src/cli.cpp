#include "mimtnet/cli.hpp"

#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "mimtnet/dataio.hpp"
#include "mimtnet/error.hpp"
#include "mimtnet/harness.hpp"
#include "mimtnet/model_io.hpp"

namespace mimtnet {

namespace {

using nlohmann::json;

struct ModelFlags {
  std::string model = "mimtcnn";
  TrainConfig cnn;
  MlknnConfig knn;
  std::size_t mlp_hidden = 128;
  std::uint64_t seed = 0;

  void add_to(CLI::App* cmd) {
    cmd->add_option("--model", model, "mimtcnn | mlknn | mlp")->capture_default_str();
    cmd->add_option("--proposals", cnn.proposals, "region proposal generation times")
        ->capture_default_str();
    cmd->add_option("--max-size", cnn.max_size, "maximum proposal size")->capture_default_str();
    cmd->add_option("--filters", cnn.filters, "convolution kernels")->capture_default_str();
    cmd->add_option("--hidden", cnn.hidden, "hidden units of the proposal network")
        ->capture_default_str();
    cmd->add_option("--epochs", cnn.epochs, "full-batch epochs")->capture_default_str();
    cmd->add_option("--lr", cnn.adam.learning_rate, "Adam learning rate")->capture_default_str();
    cmd->add_option("--k", knn.k, "ML-KNN neighbours")->capture_default_str();
    cmd->add_option("--seed", seed, "root seed")->capture_default_str();
  }

  ModelSpec spec() const {
    ModelSpec s;
    s.kind = parse_model_kind(model);
    s.cnn = cnn;
    s.cnn.seed = seed;
    s.mlp.epochs = cnn.epochs;
    s.mlp.adam = cnn.adam;
    s.mlp.hidden = mlp_hidden;
    s.mlp.seed = seed;
    s.knn = knn;
    s.cnn.validate();
    s.mlp.validate();
    return s;
  }
};

template <typename T>
std::vector<T> parse_list(const std::string& text) {
  std::vector<T> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::istringstream cell(item);
    T value;
    if (!(cell >> value) || !(cell >> std::ws).eof()) {
      throw ParameterError("cannot parse '" + item + "' in value list '" + text + "'");
    }
    out.push_back(value);
  }
  if (out.empty()) throw ParameterError("value list is empty");
  return out;
}

std::string fmt_real(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void annotate_data(Report& report, const std::string& path) {
  report.config["data"]["path"] = path;
}

void print_summary(const Report& report, std::ostream& out) {
  for (const auto& p : report.points) {
    out << p.model;
    if (p.param != "none") out << " " << p.param << "=" << p.value;
    out << "  MAP " << (p.mean.map ? std::to_string(*p.mean.map) : "undefined")
        << "  coverage "
        << (p.mean.coverage ? std::to_string(*p.mean.coverage) : "undefined")
        << "  subset-accuracy " << p.mean.subset_accuracy << "  hamming-loss "
        << p.mean.hamming_loss << "\n";
  }
}

int cmd_gen_data(const SyntheticSpec& spec, const std::string& out_path, std::ostream& out) {
  const auto syn = generate_synthetic(spec);
  save_csv(syn.dataset, out_path);
  out << "wrote " << syn.dataset.patients() << " patients x "
      << syn.dataset.feature_count() << " features, " << syn.dataset.task_count()
      << " tasks to " << out_path << "\n";
  return 0;
}

int cmd_train(const ModelFlags& flags, const std::string& data_path,
              const std::string& out_path, std::ostream& out) {
  const Dataset ds = load_csv(data_path);
  const ModelSpec spec = flags.spec();
  AnyModel model = [&]() -> AnyModel {
    switch (spec.kind) {
      case ModelKind::mimtcnn: return train(ds, spec.cnn);
      case ModelKind::mlp: return mlp_train(ds, spec.mlp);
      case ModelKind::mlknn: return mlknn_fit(ds, spec.knn);
    }
    throw ParameterError("unknown model");
  }();
  save_model(model, out_path);
  out << "trained " << model_kind(model) << " on " << ds.patients() << " patients; wrote "
      << out_path << "\n";
  return 0;
}

int cmd_predict(const std::string& model_path, const std::string& data_path,
                const std::string& out_path, std::ostream& out) {
  const AnyModel model = load_model(model_path);
  const Dataset ds = load_csv(data_path);
  const auto& features = model_feature_names(model);
  const auto& labels = model_label_names(model);
  if (ds.feature_count() != features.size()) {
    throw SchemaError("data has " + std::to_string(ds.feature_count()) +
                      " features, model expects " + std::to_string(features.size()));
  }
  if (ds.task_count() != labels.size()) {
    throw SchemaError("data has " + std::to_string(ds.task_count()) +
                      " label columns, model expects " + std::to_string(labels.size()));
  }

  EvalInput input;
  std::optional<Prediction> cnn_prediction;
  if (const auto* cnn = std::get_if<Model>(&model)) {
    cnn_prediction = predict(*cnn, ds.features);
    input.probs = cnn_prediction->probs;
  } else {
    input.probs = predict_probs(model, ds.features);
  }
  input.hard = threshold(input.probs);
  input.truth = ds.labels;

  json doc = {{"format", kReportFormat},
              {"experiment", "predict"},
              {"config",
               {{"model_path", model_path},
                {"model", model_kind(model)},
                {"data", {{"path", data_path},
                          {"patients", ds.patients()},
                          {"features", ds.feature_count()},
                          {"tasks", ds.task_count()}}}}}};
  if (ds.patients() > 0) {
    const auto m = evaluate(input);
    auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
    doc["metrics"] = {{"map", opt(m.map)},
                      {"map_excluded_tasks", m.map_excluded_tasks},
                      {"coverage", opt(m.coverage)},
                      {"coverage_skipped_samples", m.coverage_skipped_samples},
                      {"subset_accuracy", m.subset_accuracy},
                      {"hamming_loss", m.hamming_loss}};
    json per_task = json::array();
    const auto pr = precision_recall_per_task(input);
    for (std::size_t t = 0; t < pr.size(); ++t) {
      per_task.push_back({{"task", labels[t]},
                          {"true_positives", pr[t].true_positives},
                          {"false_positives", pr[t].false_positives},
                          {"false_negatives", pr[t].false_negatives},
                          {"precision", opt(pr[t].precision)},
                          {"recall", opt(pr[t].recall)}});
    }
    doc["per_task"] = per_task;
  }
  if (cnn_prediction) {
    // Symptoms of the deciding proposal for every positive prediction.
    const auto& cnn = std::get<Model>(model);
    json rows = json::array();
    for (std::size_t i = 0; i < ds.patients(); ++i) {
      json positives = json::array();
      for (std::size_t t = 0; t < labels.size(); ++t) {
        if (!input.hard(i, t)) continue;
        json keys = json::array();
        for (std::size_t f : cnn.proposal_set.proposals[cnn_prediction->argmax_r(i, t)]) {
          if (ds.features(i, f)) keys.push_back(features[f]);
        }
        positives.push_back({{"task", labels[t]}, {"key_features", keys}});
      }
      rows.push_back({{"row", i}, {"positives", positives}});
    }
    doc["key_proposals"] = rows;
  }
  write_text_file(out_path, doc.dump(1) + "\n");

  std::string table = "row";
  for (const auto& l : labels) table += ",p_" + l;
  for (const auto& l : labels) table += ",hard_" + l;
  table += '\n';
  for (std::size_t i = 0; i < ds.patients(); ++i) {
    table += std::to_string(i);
    for (std::size_t t = 0; t < labels.size(); ++t) table += ',' + fmt_real(input.probs(i, t));
    for (std::size_t t = 0; t < labels.size(); ++t) table += input.hard(i, t) ? ",1" : ",0";
    table += '\n';
  }
  write_text_file(report_table_path(out_path), table);
  out << "predicted " << ds.patients() << " patients; wrote " << out_path << "\n";
  return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Multi-instance multi-task proposal network for sparse binary multi-label data"};
  app.require_subcommand(1);

  SyntheticSpec gen;
  std::string gen_out;
  auto* gen_cmd = app.add_subcommand("gen-data", "generate a synthetic corpus with planted labels");
  gen_cmd->add_option("--out", gen_out, "output CSV")->required();
  gen_cmd->add_option("--patients", gen.patients)->capture_default_str();
  gen_cmd->add_option("--features", gen.features)->capture_default_str();
  gen_cmd->add_option("--tasks", gen.tasks)->capture_default_str();
  gen_cmd->add_option("--keys-per-task", gen.keys_per_task)->capture_default_str();
  gen_cmd->add_option("--background-rate", gen.background_rate)->capture_default_str();
  gen_cmd->add_option("--label-flip-rate", gen.label_flip_rate)->capture_default_str();
  gen_cmd->add_option("--min-task-frequency", gen.min_task_frequency)->capture_default_str();
  gen_cmd->add_option("--max-symptoms", gen.max_symptoms)->capture_default_str();
  gen_cmd->add_option("--max-active-tasks", gen.max_active_tasks)->capture_default_str();
  gen_cmd->add_option("--seed", gen.seed)->capture_default_str();

  ModelFlags train_flags;
  std::string train_data, train_out;
  auto* train_cmd = app.add_subcommand("train", "train one model on a CSV dataset");
  train_cmd->add_option("--data", train_data)->required();
  train_cmd->add_option("--out", train_out, "model file")->required();
  train_flags.add_to(train_cmd);

  std::string predict_model, predict_data, predict_out;
  auto* predict_cmd = app.add_subcommand("predict", "score a CSV dataset with a saved model");
  predict_cmd->add_option("--model", predict_model, "model file")->required();
  predict_cmd->add_option("--data", predict_data)->required();
  predict_cmd->add_option("--out", predict_out, "report file")->required();

  ModelFlags cv_flags;
  std::string cv_data, cv_report;
  std::size_t cv_folds = 5;
  auto* cv_cmd = app.add_subcommand("cv", "k-fold cross-validation");
  cv_cmd->add_option("--data", cv_data)->required();
  cv_cmd->add_option("--folds", cv_folds)->capture_default_str();
  cv_cmd->add_option("--report", cv_report)->required();
  cv_flags.add_to(cv_cmd);

  ModelFlags sweep_flags;
  std::string sweep_data, sweep_report, sweep_param, sweep_values;
  std::size_t sweep_folds = 5;
  auto* sweep_cmd = app.add_subcommand("sweep", "cross-validate over proposal settings");
  sweep_cmd->add_option("--data", sweep_data)->required();
  sweep_cmd->add_option("--param", sweep_param, "max-size | proposals")->required();
  sweep_cmd->add_option("--values", sweep_values, "comma-separated values")->required();
  sweep_cmd->add_option("--folds", sweep_folds)->capture_default_str();
  sweep_cmd->add_option("--report", sweep_report)->required();
  sweep_flags.add_to(sweep_cmd);

  ModelFlags rob_flags;
  std::string rob_data, rob_report, rob_mode, rob_values;
  std::size_t rob_folds = 5;
  auto* rob_cmd = app.add_subcommand(
      "robustness", "training-subsample or noise-feature experiment against ML-KNN");
  rob_cmd->add_option("--data", rob_data)->required();
  rob_cmd->add_option("--mode", rob_mode, "subsample | noise")->required();
  rob_cmd->add_option("--values", rob_values, "comma-separated values")->required();
  rob_cmd->add_option("--folds", rob_folds)->capture_default_str();
  rob_cmd->add_option("--report", rob_report)->required();
  rob_flags.add_to(rob_cmd);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return static_cast<int>(ErrorCategory::parameter);
  }

  try {
    if (gen_cmd->parsed()) return cmd_gen_data(gen, gen_out, out);
    if (train_cmd->parsed()) return cmd_train(train_flags, train_data, train_out, out);
    if (predict_cmd->parsed()) {
      return cmd_predict(predict_model, predict_data, predict_out, out);
    }
    if (cv_cmd->parsed()) {
      const Dataset ds = load_csv(cv_data);
      Report r = run_cv(ds, cv_flags.spec(), cv_folds, cv_flags.seed);
      annotate_data(r, cv_data);
      write_report(r, cv_report);
      print_summary(r, out);
      return 0;
    }
    if (sweep_cmd->parsed()) {
      const auto values = parse_list<std::size_t>(sweep_values);
      const ModelSpec spec = sweep_flags.spec();
      if (spec.kind != ModelKind::mimtcnn) {
        throw ParameterError("proposal sweeps apply only to --model mimtcnn");
      }
      const Dataset ds = load_csv(sweep_data);
      Report r;
      if (sweep_param == "max-size") {
        r = sweep_max_size(ds, spec, values, sweep_folds, sweep_flags.seed);
      } else if (sweep_param == "proposals") {
        r = sweep_generation_times(ds, spec, values, sweep_folds, sweep_flags.seed);
      } else {
        throw ParameterError("--param must be max-size or proposals");
      }
      annotate_data(r, sweep_data);
      write_report(r, sweep_report);
      print_summary(r, out);
      return 0;
    }
    if (rob_cmd->parsed()) {
      std::vector<ModelSpec> specs{rob_flags.spec()};
      if (specs.front().kind != ModelKind::mlknn) {
        ModelSpec baseline = specs.front();
        baseline.kind = ModelKind::mlknn;
        specs.push_back(baseline);
      }
      Report r;
      if (rob_mode == "subsample") {
        const auto values = parse_list<double>(rob_values);
        const Dataset ds = load_csv(rob_data);
        r = subsample_experiment(ds, specs, values, rob_folds, rob_flags.seed);
      } else if (rob_mode == "noise") {
        const auto values = parse_list<std::size_t>(rob_values);
        const Dataset ds = load_csv(rob_data);
        r = noise_experiment(ds, specs, values, rob_folds, rob_flags.seed);
      } else {
        throw ParameterError("--mode must be subsample or noise");
      }
      annotate_data(r, rob_data);
      write_report(r, rob_report);
      print_summary(r, out);
      return 0;
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return e.exit_code();
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return static_cast<int>(ErrorCategory::data);
  }
  return static_cast<int>(ErrorCategory::parameter);
}

}  // namespace mimtnet
