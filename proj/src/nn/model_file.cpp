#include "vc/nn/model_file.hpp"

#include "vc/util/base64.hpp"
#include "vc/util/bytes.hpp"

namespace vc::nn {
namespace {

[[noreturn]] void fail(ModelFileErrorKind kind, const std::string& what) { throw ModelFileError(kind, what); }

const Json& field(const Json& j, const char* name) {
  if (!j.is_object() || !j.contains(name)) fail(ModelFileErrorKind::malformed, std::string("missing field '") + name + "'");
  return j.at(name);
}

Index index_field(const Json& j, const char* name) {
  const Json& v = field(j, name);
  if (!v.is_number_integer()) fail(ModelFileErrorKind::malformed, std::string("field '") + name + "' must be an integer");
  return v.get<Index>();
}

Shape shape_from_json(const Json& j) {
  if (!j.is_array() || j.empty()) fail(ModelFileErrorKind::malformed, "shape must be a nonempty array");
  Shape s;
  for (const auto& d : j) {
    if (!d.is_number_integer() || d.get<Index>() <= 0)
      fail(ModelFileErrorKind::malformed, "shape entries must be positive integers");
    s.push_back(d.get<Index>());
  }
  return s;
}

std::string decode_blob(const Json& j) {
  const Json& data = field(j, "data");
  if (!data.is_string()) fail(ModelFileErrorKind::corrupt_data, "parameter data must be a base64 string");
  try {
    return base64_decode(data.get<std::string>());
  } catch (const Base64Error& e) {
    fail(ModelFileErrorKind::corrupt_data, std::string("corrupt parameter data: ") + e.what());
  }
}

Json accum_to_json(const AdaGradState& s) {
  return Json{{"shape", s.shape},
              {"data", base64_encode(doubles_to_le_bytes({s.accum.data(), static_cast<std::size_t>(s.accum.size())}))}};
}

void check_param_count(const Json& params, std::size_t expected, std::size_t layer) {
  if (!params.is_array() || params.size() != expected)
    fail(ModelFileErrorKind::shape_mismatch,
         "layer " + std::to_string(layer) + " needs " + std::to_string(expected) + " parameter tensors");
}

}  // namespace

Json layer_spec_to_json(const LayerSpec& spec) {
  Json j{{"kind", layer_kind(spec)}};
  if (const auto* c = std::get_if<ConvSpec>(&spec)) {
    j["in_channels"] = c->in_channels;
    j["out_channels"] = c->out_channels;
    j["kernel"] = c->kernel;
    j["stride"] = 1;
    j["padding"] = c->padding;
  } else if (const auto* p = std::get_if<MaxPoolSpec>(&spec)) {
    j["window"] = p->window;
    j["stride"] = p->window;
  } else if (const auto* f = std::get_if<FcSpec>(&spec)) {
    j["in_dim"] = f->in_dim;
    j["out_dim"] = f->out_dim;
  } else if (const auto* a = std::get_if<ActivationSpec>(&spec)) {
    j["function"] = a->function;
  }
  return j;
}

LayerSpec layer_spec_from_json(const Json& j) {
  const Json& kind = field(j, "kind");
  if (!kind.is_string()) fail(ModelFileErrorKind::malformed, "layer kind must be a string");
  const std::string k = kind.get<std::string>();
  if (k == "conv") {
    if (j.contains("stride") && j.at("stride") != 1) fail(ModelFileErrorKind::malformed, "only unit conv stride is supported");
    return ConvSpec{index_field(j, "in_channels"), index_field(j, "out_channels"), index_field(j, "kernel"),
                    index_field(j, "padding")};
  }
  if (k == "maxpool") {
    const Index w = index_field(j, "window");
    if (j.contains("stride") && j.at("stride") != w) fail(ModelFileErrorKind::malformed, "pool stride must equal window");
    return MaxPoolSpec{w};
  }
  if (k == "fc") return FcSpec{index_field(j, "in_dim"), index_field(j, "out_dim")};
  if (k == "activation") {
    const Json& f = field(j, "function");
    if (!f.is_string()) fail(ModelFileErrorKind::malformed, "activation function must be a string");
    return ActivationSpec{f.get<std::string>()};
  }
  if (k == "softmax") return SoftmaxSpec{};
  fail(ModelFileErrorKind::malformed, "unknown layer kind '" + k + "'");
}

Json tensor_to_json(const Tensor<float>& t) {
  return Json{{"shape", t.shape()},
              {"data", base64_encode(floats_to_le_bytes({t.data(), static_cast<std::size_t>(t.size())}))}};
}

Tensor<float> tensor_from_json(const Json& j) {
  const Shape shape = shape_from_json(field(j, "shape"));
  const std::string bytes = decode_blob(j);
  if (bytes.size() != static_cast<std::size_t>(numel(shape)) * 4)
    fail(ModelFileErrorKind::corrupt_data, "parameter data holds " + std::to_string(bytes.size()) +
                                               " bytes, shape " + to_string(shape) + " needs " +
                                               std::to_string(numel(shape) * 4));
  const auto values = le_bytes_to_floats(bytes);
  return Tensor<float>(shape, Eigen::Map<const Vector<float>>(values.data(), static_cast<Index>(values.size())));
}

Json params_to_json(const Network<float>& net) {
  Json layers = Json::array();
  for (const auto& l : net.layers()) {
    Json params = Json::array();
    for (const auto& p : l.params) params.push_back(tensor_to_json(p));
    layers.push_back(std::move(params));
  }
  return layers;
}

void load_params(Network<float>& net, const Json& params) {
  if (!params.is_array() || params.size() != net.size())
    fail(ModelFileErrorKind::shape_mismatch, "parameter list does not match the layer count");
  for (std::size_t i = 0; i < net.size(); ++i) {
    auto& dst = net.layers()[i].params;
    check_param_count(params[i], dst.size(), i);
    for (std::size_t p = 0; p < dst.size(); ++p) {
      Tensor<float> t = tensor_from_json(params[i][p]);
      if (t.shape() != dst[p].shape())
        fail(ModelFileErrorKind::shape_mismatch, "layer " + std::to_string(i) + " parameter " + std::to_string(p) +
                                                     " has shape " + to_string(t.shape()) + ", expected " +
                                                     to_string(dst[p].shape()));
      dst[p] = std::move(t);
    }
  }
}

Json model_to_json(const Network<float>& net, const Optimizer* optimizer) {
  Json doc{{"format", kModelFormat}, {"format_version", kModelFormatVersion}, {"input_shape", net.input_shape()}};
  Json layers = Json::array();
  for (const auto& l : net.layers()) {
    Json j = layer_spec_to_json(l.spec);
    Json params = Json::array();
    for (const auto& p : l.params) params.push_back(tensor_to_json(p));
    j["params"] = std::move(params);
    layers.push_back(std::move(j));
  }
  doc["layers"] = std::move(layers);
  if (optimizer) {
    Json accum = Json::array();
    for (const auto& row : optimizer->states()) {
      Json r = Json::array();
      for (const auto& s : row) r.push_back(accum_to_json(s));
      accum.push_back(std::move(r));
    }
    doc["optimizer"] = Json{{"kind", "adagrad"},
                            {"alpha", optimizer->config().alpha},
                            {"beta", optimizer->config().beta},
                            {"accum", std::move(accum)}};
  }
  return doc;
}

LoadedModel model_from_json(const Json& doc) {
  if (!doc.is_object()) fail(ModelFileErrorKind::malformed, "model document must be an object");
  if (field(doc, "format") != kModelFormat) fail(ModelFileErrorKind::malformed, "not a model file");
  const Json& version = field(doc, "format_version");
  if (!version.is_number_integer() || version.get<int>() != kModelFormatVersion)
    fail(ModelFileErrorKind::version_mismatch,
         "model format version " + version.dump() + " is not supported (expected " +
             std::to_string(kModelFormatVersion) + ")");
  const Shape input = shape_from_json(field(doc, "input_shape"));
  const Json& layers = field(doc, "layers");
  if (!layers.is_array()) fail(ModelFileErrorKind::malformed, "layers must be an array");

  std::vector<LayerSpec> specs;
  Json params = Json::array();
  for (const auto& l : layers) {
    specs.push_back(layer_spec_from_json(l));
    params.push_back(l.contains("params") ? l.at("params") : Json::array());
  }
  LoadedModel out;
  try {
    out.network = Network<float>(input, specs);
  } catch (const ShapeError& e) {
    fail(ModelFileErrorKind::shape_mismatch, e.what());
  }
  load_params(out.network, params);

  if (doc.contains("optimizer")) {
    const Json& o = doc.at("optimizer");
    if (field(o, "kind") != "adagrad") fail(ModelFileErrorKind::malformed, "unsupported optimizer");
    AdaGradConfig cfg;
    const Json& alpha = field(o, "alpha");
    const Json& beta = field(o, "beta");
    if (!alpha.is_number() || !beta.is_number()) fail(ModelFileErrorKind::malformed, "optimizer constants must be numbers");
    cfg.alpha = alpha.get<double>();
    cfg.beta = beta.get<double>();
    try {
      out.optimizer = Optimizer(out.network, cfg);
    } catch (const std::invalid_argument& e) {
      fail(ModelFileErrorKind::malformed, e.what());
    }
    const Json& accum = field(o, "accum");
    if (!accum.is_array() || accum.size() != out.network.size())
      fail(ModelFileErrorKind::shape_mismatch, "optimizer state does not match the layer count");
    for (std::size_t i = 0; i < out.network.size(); ++i) {
      auto& row = out.optimizer->states()[i];
      check_param_count(accum[i], row.size(), i);
      for (std::size_t p = 0; p < row.size(); ++p) {
        if (shape_from_json(field(accum[i][p], "shape")) != row[p].shape)
          fail(ModelFileErrorKind::shape_mismatch, "optimizer state shape mismatch in layer " + std::to_string(i));
        const std::string bytes = decode_blob(accum[i][p]);
        if (bytes.size() != static_cast<std::size_t>(row[p].accum.size()) * 8)
          fail(ModelFileErrorKind::corrupt_data, "optimizer state length mismatch in layer " + std::to_string(i));
        const auto values = le_bytes_to_doubles(bytes);
        row[p].accum = Eigen::Map<const Vector<double>>(values.data(), static_cast<Index>(values.size()));
      }
    }
  }
  return out;
}

std::string serialize_model(const Network<float>& net, const Optimizer* optimizer) {
  return model_to_json(net, optimizer).dump();
}

LoadedModel deserialize_model(std::string_view text) {
  Json doc;
  try {
    doc = Json::parse(text);
  } catch (const Json::parse_error& e) {
    fail(ModelFileErrorKind::malformed, std::string("model file is not valid JSON: ") + e.what());
  }
  return model_from_json(doc);
}

}  // namespace vc::nn
