#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

#include "vc/nn/network.hpp"
#include "vc/util/json.hpp"

namespace vc::nn {

inline constexpr const char* kModelFormat = "vc-nn-model";
inline constexpr int kModelFormatVersion = 1;

enum class ModelFileErrorKind { malformed, version_mismatch, shape_mismatch, corrupt_data };

class ModelFileError : public std::runtime_error {
 public:
  ModelFileError(ModelFileErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ModelFileErrorKind kind() const { return kind_; }

 private:
  ModelFileErrorKind kind_;
};

struct LoadedModel {
  Network<float> network;
  std::optional<Optimizer> optimizer;
};

Json layer_spec_to_json(const LayerSpec& spec);
LayerSpec layer_spec_from_json(const Json& j);

// {"shape": [...], "data": base64 of little-endian fp32}
Json tensor_to_json(const Tensor<float>& t);
Tensor<float> tensor_from_json(const Json& j);

Json model_to_json(const Network<float>& net, const Optimizer* optimizer = nullptr);
LoadedModel model_from_json(const Json& doc);

std::string serialize_model(const Network<float>& net, const Optimizer* optimizer = nullptr);
LoadedModel deserialize_model(std::string_view text);

// Parameters only, layer by layer; the receiving network supplies the specs.
Json params_to_json(const Network<float>& net);
void load_params(Network<float>& net, const Json& params);

}  // namespace vc::nn
