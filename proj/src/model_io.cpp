#include "mimtnet/model_io.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "mimtnet/error.hpp"

namespace mimtnet {

using nlohmann::json;

namespace {

std::string format_real(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string encode_reals(std::span<const double> values) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out += ' ';
    out += format_real(values[i]);
  }
  return out;
}

std::vector<double> decode_reals(const std::string& text, std::size_t expected,
                                 const std::string& what) {
  std::vector<double> out;
  out.reserve(expected);
  const char* p = text.c_str();
  while (*p) {
    while (*p == ' ') ++p;
    if (!*p) break;
    char* end = nullptr;
    const double v = std::strtod(p, &end);
    if (end == p) throw ParseError("model field '" + what + "' holds a non-numeric value");
    out.push_back(v);
    p = end;
  }
  if (out.size() != expected) {
    throw ParseError("model field '" + what + "' has " + std::to_string(out.size()) +
                     " values, expected " + std::to_string(expected));
  }
  return out;
}

json encode_matrix(const RealMatrix& m) {
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"values", encode_reals(m.values())}};
}

RealMatrix decode_matrix(const json& j, const std::string& what) {
  RealMatrix m(j.at("rows").get<std::size_t>(), j.at("cols").get<std::size_t>());
  const auto values = decode_reals(j.at("values").get<std::string>(), m.size(), what);
  std::ranges::copy(values, m.values().begin());
  return m;
}

json encode_binary(const BinaryMatrix& m) {
  std::string rows;
  rows.reserve(m.rows() * (m.cols() + 1));
  for (std::size_t i = 0; i < m.rows(); ++i) {
    if (i) rows += ' ';
    for (auto v : m.row(i)) rows += v ? '1' : '0';
  }
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"bits", rows}};
}

BinaryMatrix decode_binary(const json& j, const std::string& what) {
  BinaryMatrix m(j.at("rows").get<std::size_t>(), j.at("cols").get<std::size_t>());
  const auto bits = j.at("bits").get<std::string>();
  std::size_t k = 0;
  for (char c : bits) {
    if (c == ' ') continue;
    if ((c != '0' && c != '1') || k >= m.size()) {
      throw ParseError("model field '" + what + "' is malformed");
    }
    m.values()[k++] = c == '1' ? 1 : 0;
  }
  if (k != m.size()) throw ParseError("model field '" + what + "' is truncated");
  return m;
}

json encode_adam(const AdamConfig& a) {
  return {{"learning_rate", format_real(a.learning_rate)},
          {"beta1", format_real(a.beta1)},
          {"beta2", format_real(a.beta2)},
          {"epsilon", format_real(a.epsilon)}};
}

double decode_real(const json& j, const char* key) {
  return decode_reals(j.at(key).get<std::string>(), 1, key)[0];
}

AdamConfig decode_adam(const json& j) {
  return {decode_real(j, "learning_rate"), decode_real(j, "beta1"),
          decode_real(j, "beta2"), decode_real(j, "epsilon")};
}

// 64-bit seeds exceed what some JSON readers keep exact, so they travel as text.
std::string encode_seed(std::uint64_t s) { return std::to_string(s); }
std::uint64_t decode_seed(const json& j) {
  return std::stoull(j.get<std::string>());
}

template <typename P>
json encode_params(const P& params) {
  json out = json::object();
  const auto blocks = params.blocks();
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    out[P::block_names[b]] = encode_matrix(*blocks[b]);
  }
  return out;
}

template <typename P>
void decode_params(const json& j, P& params) {
  auto blocks = params.blocks();
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    *blocks[b] = decode_matrix(j.at(P::block_names[b]), P::block_names[b]);
  }
}

json encode(const Model& m) {
  json props = json::array();
  for (const auto& p : m.proposal_set.proposals) props.push_back(p);
  return {
      {"config",
       {{"epochs", m.config.epochs},
        {"adam", encode_adam(m.config.adam)},
        {"proposals", m.config.proposals},
        {"max_size", m.config.max_size},
        {"filters", m.config.filters},
        {"hidden", m.config.hidden},
        {"seed", encode_seed(m.config.seed)},
        {"init_scale", m.config.init_scale}}},
      {"proposal_set",
       {{"max_size", m.proposal_set.max_size},
        {"feature_count", m.proposal_set.feature_count},
        {"seed", encode_seed(m.proposal_set.seed)},
        {"proposals", props}}},
      {"params", encode_params(m.params)},
      {"epoch_loss", encode_reals(m.epoch_loss)},
  };
}

Model decode_mimtcnn(const json& j) {
  Model m;
  const auto& c = j.at("config");
  m.config.epochs = c.at("epochs").get<std::size_t>();
  m.config.adam = decode_adam(c.at("adam"));
  m.config.proposals = c.at("proposals").get<std::size_t>();
  m.config.max_size = c.at("max_size").get<std::size_t>();
  m.config.filters = c.at("filters").get<std::size_t>();
  m.config.hidden = c.at("hidden").get<std::size_t>();
  m.config.seed = decode_seed(c.at("seed"));
  m.config.init_scale = c.at("init_scale").get<std::string>();
  const auto& ps = j.at("proposal_set");
  m.proposal_set.max_size = ps.at("max_size").get<std::size_t>();
  m.proposal_set.feature_count = ps.at("feature_count").get<std::size_t>();
  m.proposal_set.seed = decode_seed(ps.at("seed"));
  m.proposal_set.proposals =
      ps.at("proposals").get<std::vector<std::vector<std::size_t>>>();
  decode_params(j.at("params"), m.params);
  const auto loss_text = j.at("epoch_loss").get<std::string>();
  m.epoch_loss = decode_reals(loss_text, m.config.epochs, "epoch_loss");
  return m;
}

json encode(const MlpModel& m) {
  return {
      {"config",
       {{"epochs", m.config.epochs},
        {"adam", encode_adam(m.config.adam)},
        {"hidden", m.config.hidden},
        {"seed", encode_seed(m.config.seed)}}},
      {"params", encode_params(m.params)},
      {"epoch_loss", encode_reals(m.epoch_loss)},
  };
}

MlpModel decode_mlp(const json& j) {
  MlpModel m;
  const auto& c = j.at("config");
  m.config.epochs = c.at("epochs").get<std::size_t>();
  m.config.adam = decode_adam(c.at("adam"));
  m.config.hidden = c.at("hidden").get<std::size_t>();
  m.config.seed = decode_seed(c.at("seed"));
  decode_params(j.at("params"), m.params);
  m.epoch_loss = decode_reals(j.at("epoch_loss").get<std::string>(), m.config.epochs,
                              "epoch_loss");
  return m;
}

json encode(const MlknnModel& m) {
  return {
      {"config", {{"k", m.config.k}, {"smoothing", format_real(m.config.smoothing)}}},
      {"train_features", encode_binary(m.train_features)},
      {"train_labels", encode_binary(m.train_labels)},
      {"prior_positive", encode_reals(m.prior_positive)},
      {"likelihood_positive", encode_matrix(m.likelihood_positive)},
      {"likelihood_negative", encode_matrix(m.likelihood_negative)},
  };
}

MlknnModel decode_mlknn(const json& j) {
  MlknnModel m;
  const auto& c = j.at("config");
  m.config.k = c.at("k").get<std::size_t>();
  m.config.smoothing = decode_real(c, "smoothing");
  m.train_features = decode_binary(j.at("train_features"), "train_features");
  m.train_labels = decode_binary(j.at("train_labels"), "train_labels");
  m.prior_positive = decode_reals(j.at("prior_positive").get<std::string>(),
                                  m.train_labels.cols(), "prior_positive");
  m.likelihood_positive = decode_matrix(j.at("likelihood_positive"), "likelihood_positive");
  m.likelihood_negative = decode_matrix(j.at("likelihood_negative"), "likelihood_negative");
  return m;
}

}  // namespace

std::string model_kind(const AnyModel& model) {
  switch (model.index()) {
    case 0: return "mimtcnn";
    case 1: return "mlp";
    default: return "mlknn";
  }
}

const std::vector<std::string>& model_label_names(const AnyModel& model) {
  return std::visit([](const auto& m) -> const auto& { return m.label_names; }, model);
}

const std::vector<std::string>& model_feature_names(const AnyModel& model) {
  return std::visit([](const auto& m) -> const auto& { return m.feature_names; }, model);
}

std::string serialize_model(const AnyModel& model) {
  json doc = std::visit([](const auto& m) { return encode(m); }, model);
  doc["format"] = kModelFormat;
  doc["kind"] = model_kind(model);
  doc["feature_names"] = model_feature_names(model);
  doc["label_names"] = model_label_names(model);
  return doc.dump(1) + "\n";
}

AnyModel deserialize_model(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw ParseError(std::string("model file is not valid JSON: ") + e.what());
  }
  try {
    if (doc.at("format").get<std::string>() != kModelFormat) {
      throw SchemaError("unsupported model format '" +
                        doc.at("format").get<std::string>() + "'");
    }
    const auto kind = doc.at("kind").get<std::string>();
    auto attach_names = [&](auto m) {
      m.feature_names = doc.at("feature_names").get<std::vector<std::string>>();
      m.label_names = doc.at("label_names").get<std::vector<std::string>>();
      return AnyModel(std::move(m));
    };
    if (kind == "mimtcnn") {
      AnyModel m = attach_names(decode_mimtcnn(doc));
      std::get<Model>(m).validate();
      return m;
    }
    if (kind == "mlp") return attach_names(decode_mlp(doc));
    if (kind == "mlknn") return attach_names(decode_mlknn(doc));
    throw SchemaError("unknown model kind '" + kind + "'");
  } catch (const json::exception& e) {
    throw SchemaError(std::string("model file is missing fields: ") + e.what());
  }
}

void save_model(const AnyModel& model, const std::filesystem::path& path) {
  const std::string text = serialize_model(model);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << text;
  if (!out) throw IoError("write to '" + path.string() + "' failed");
}

AnyModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return deserialize_model(buffer.str());
}

RealMatrix predict_probs(const AnyModel& model, const BinaryMatrix& features) {
  struct Visitor {
    const BinaryMatrix& x;
    RealMatrix operator()(const Model& m) const { return predict(m, x).probs; }
    RealMatrix operator()(const MlpModel& m) const { return mlp_predict(m, x); }
    RealMatrix operator()(const MlknnModel& m) const { return mlknn_predict(m, x); }
  };
  return std::visit(Visitor{features}, model);
}

}  // namespace mimtnet
