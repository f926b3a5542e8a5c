#pragma once

#include <filesystem>
#include <string>
#include <variant>

#include "mimtnet/baselines.hpp"
#include "mimtnet/training.hpp"

namespace mimtnet {

inline constexpr const char* kModelFormat = "mimtnet-model-v1";

/// Any trained classifier the CLI can store.
using AnyModel = std::variant<Model, MlpModel, MlknnModel>;

/// "mimtcnn", "mlp" or "mlknn".
std::string model_kind(const AnyModel& model);

/// JSON document holding the configuration, proposal index lists and every
/// parameter matrix as 17-significant-digit decimal text. Parsing it back
/// reproduces the model bit for bit.
std::string serialize_model(const AnyModel& model);
AnyModel deserialize_model(const std::string& text);

void save_model(const AnyModel& model, const std::filesystem::path& path);
AnyModel load_model(const std::filesystem::path& path);

/// Probabilities of any model kind on a p x d feature matrix.
RealMatrix predict_probs(const AnyModel& model, const BinaryMatrix& features);

const std::vector<std::string>& model_label_names(const AnyModel& model);
const std::vector<std::string>& model_feature_names(const AnyModel& model);

}  // namespace mimtnet
