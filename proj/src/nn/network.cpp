#include "vc/nn/network.hpp"

namespace vc::nn {

std::string layer_kind(const LayerSpec& spec) {
  static constexpr const char* kNames[] = {"conv", "maxpool", "fc", "activation", "softmax"};
  return kNames[spec.index()];
}

Shape layer_output_shape(const LayerSpec& spec, const Shape& in) {
  auto fail = [&](const std::string& why) -> Shape {
    throw ShapeError(layer_kind(spec) + " layer cannot take " + to_string(in) + ": " + why);
  };
  if (const auto* c = std::get_if<ConvSpec>(&spec)) {
    if (c->in_channels <= 0 || c->out_channels <= 0 || c->kernel <= 0 || c->padding < 0)
      return fail("invalid hyperparameters");
    if (in.size() != 3) return fail("expected C x H x W");
    if (in[0] != c->in_channels) return fail("expected " + std::to_string(c->in_channels) + " channels");
    const auto g = c->geometry();
    if (g.out_extent(in[1]) <= 0 || g.out_extent(in[2]) <= 0) return fail("kernel larger than padded input");
    return {c->out_channels, g.out_extent(in[1]), g.out_extent(in[2])};
  }
  if (const auto* p = std::get_if<MaxPoolSpec>(&spec)) {
    if (p->window <= 0) return fail("invalid window");
    if (in.size() != 3) return fail("expected C x H x W");
    if (in[1] % p->window || in[2] % p->window) return fail("spatial dims not divisible by window");
    return {in[0], in[1] / p->window, in[2] / p->window};
  }
  if (const auto* f = std::get_if<FcSpec>(&spec)) {
    if (f->in_dim <= 0 || f->out_dim <= 0) return fail("invalid dimensions");
    if (numel(in) != f->in_dim) return fail("expected " + std::to_string(f->in_dim) + " inputs");
    return {f->out_dim};
  }
  if (const auto* a = std::get_if<ActivationSpec>(&spec)) {
    if (a->function != "relu") return fail("unsupported activation '" + a->function + "'");
    return in;
  }
  if (in.size() != 1) return fail("softmax expects a flat vector");
  return in;
}

std::vector<Shape> shape_audit(const Shape& input_shape, std::span<const LayerSpec> layers) {
  if (input_shape.empty()) throw ShapeError("network input shape is empty");
  for (Index d : input_shape)
    if (d <= 0) throw ShapeError("network input dimensions must be positive");
  std::vector<Shape> shapes{input_shape};
  for (std::size_t i = 0; i < layers.size(); ++i) {
    if (std::holds_alternative<SoftmaxSpec>(layers[i]) && i + 1 != layers.size())
      throw ShapeError("softmax must be the last layer");
    shapes.push_back(layer_output_shape(layers[i], shapes.back()));
  }
  return shapes;
}

std::vector<LayerSpec> reference_cnn_layers() {
  return {
      ConvSpec{3, 16},  ActivationSpec{}, MaxPoolSpec{}, ConvSpec{16, 20}, ActivationSpec{},
      MaxPoolSpec{},    ConvSpec{20, 20}, ActivationSpec{}, MaxPoolSpec{}, FcSpec{320, 10},
      SoftmaxSpec{},
  };
}

}  // namespace vc::nn
