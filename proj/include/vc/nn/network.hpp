#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "vc/nn/adagrad.hpp"
#include "vc/nn/layers.hpp"
#include "vc/nn/tensor.hpp"

namespace vc::nn {

struct ConvSpec {
  Index in_channels = 0;
  Index out_channels = 0;
  Index kernel = 5;
  Index padding = 2;

  ConvGeometry geometry() const { return {in_channels, out_channels, kernel, padding}; }
  bool operator==(const ConvSpec&) const = default;
};

struct MaxPoolSpec {
  Index window = 2;
  bool operator==(const MaxPoolSpec&) const = default;
};

struct FcSpec {
  Index in_dim = 0;
  Index out_dim = 0;
  bool operator==(const FcSpec&) const = default;
};

struct ActivationSpec {
  std::string function = "relu";
  bool operator==(const ActivationSpec&) const = default;
};

// Marks the loss head; it has no parameters and passes logits through.
struct SoftmaxSpec {
  bool operator==(const SoftmaxSpec&) const = default;
};

using LayerSpec = std::variant<ConvSpec, MaxPoolSpec, FcSpec, ActivationSpec, SoftmaxSpec>;

std::string layer_kind(const LayerSpec& spec);

// Per-sample output shape of a layer, or ShapeError when `in` does not fit.
Shape layer_output_shape(const LayerSpec& spec, const Shape& in);

// Per-sample shapes from the network input through every layer output.
std::vector<Shape> shape_audit(const Shape& input_shape, std::span<const LayerSpec> layers);

// 3x32x32 -> conv16 -> pool -> conv20 -> pool -> conv20 -> pool -> fc 320->10.
std::vector<LayerSpec> reference_cnn_layers();
inline Shape reference_cnn_input() { return {3, 32, 32}; }

template <typename Scalar>
struct Layer {
  LayerSpec spec;
  std::vector<Tensor<Scalar>> params;  // conv/fc: {weights, bias}; empty otherwise
};

// Values kept from the forward pass for backward.
template <typename Scalar>
struct ForwardCache {
  std::vector<Tensor<Scalar>> inputs;  // inputs[i] is the input of layer i
  std::vector<std::vector<Index>> argmax;
  Tensor<Scalar> output;
};

template <typename Scalar>
using ParamGrads = std::vector<std::vector<Tensor<Scalar>>>;

template <typename Scalar>
struct BackwardResult {
  ParamGrads<Scalar> grads;  // aligned with Network::layers()
  Tensor<Scalar> dinput;     // empty unless requested
};

template <typename Scalar>
class Network {
 public:
  Network() = default;
  Network(Shape input_shape, std::vector<LayerSpec> specs) : input_shape_(std::move(input_shape)) {
    shape_audit(input_shape_, specs);
    for (auto& spec : specs) {
      Layer<Scalar> layer{std::move(spec), {}};
      if (auto* c = std::get_if<ConvSpec>(&layer.spec)) {
        layer.params.emplace_back(Shape{c->out_channels, c->in_channels, c->kernel, c->kernel});
        layer.params.emplace_back(Shape{c->out_channels});
      } else if (auto* f = std::get_if<FcSpec>(&layer.spec)) {
        layer.params.emplace_back(Shape{f->out_dim, f->in_dim});
        layer.params.emplace_back(Shape{f->out_dim});
      }
      layers_.push_back(std::move(layer));
    }
  }

  const Shape& input_shape() const { return input_shape_; }
  const std::vector<Layer<Scalar>>& layers() const { return layers_; }
  std::vector<Layer<Scalar>>& layers() { return layers_; }
  std::size_t size() const { return layers_.size(); }

  std::vector<LayerSpec> specs() const {
    std::vector<LayerSpec> out;
    for (const auto& l : layers_) out.push_back(l.spec);
    return out;
  }
  Shape output_shape() const { return shape_audit(input_shape_, specs()).back(); }
  Index parameter_count() const {
    Index n = 0;
    for (const auto& l : layers_)
      for (const auto& p : l.params) n += p.size();
    return n;
  }

  // Xavier-uniform weights, zero biases.
  void initialize(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    for (auto& l : layers_) {
      if (l.params.empty()) continue;
      Index fan_in = 0, fan_out = 0;
      if (auto* c = std::get_if<ConvSpec>(&l.spec)) {
        fan_in = c->in_channels * c->kernel * c->kernel;
        fan_out = c->out_channels * c->kernel * c->kernel;
      } else if (auto* f = std::get_if<FcSpec>(&l.spec)) {
        fan_in = f->in_dim;
        fan_out = f->out_dim;
      }
      const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
      std::uniform_real_distribution<double> dist(-limit, limit);
      for (Index i = 0; i < l.params[0].size(); ++i) l.params[0][i] = static_cast<Scalar>(dist(rng));
      l.params[1].values().setZero();
    }
  }

  // Layers [first, last) as a standalone network.
  Network slice(std::size_t first, std::size_t last) const {
    if (first >= last || last > layers_.size()) throw std::out_of_range("invalid layer range");
    Network out;
    out.input_shape_ = shape_audit(input_shape_, specs())[first];
    out.layers_.assign(layers_.begin() + static_cast<std::ptrdiff_t>(first),
                       layers_.begin() + static_cast<std::ptrdiff_t>(last));
    return out;
  }

  // Index of the first fully-connected layer; layers before it form the
  // convolutional stack.
  std::size_t fc_cut() const {
    for (std::size_t i = 0; i < layers_.size(); ++i)
      if (std::holds_alternative<FcSpec>(layers_[i].spec)) return i;
    return layers_.size();
  }

  template <typename Other>
  Network<Other> cast() const {
    Network<Other> out(input_shape_, specs());
    for (std::size_t i = 0; i < layers_.size(); ++i)
      for (std::size_t p = 0; p < layers_[i].params.size(); ++p)
        out.layers()[i].params[p] = layers_[i].params[p].template cast<Other>();
    return out;
  }

  // x is [N, input_shape...]; returns [N, output_shape...].
  Tensor<Scalar> forward(const Tensor<Scalar>& x, ForwardCache<Scalar>* cache = nullptr) const {
    check_input(x);
    ForwardCache<Scalar> local;
    ForwardCache<Scalar>& c = cache ? *cache : local;
    c.inputs.clear();
    c.argmax.assign(layers_.size(), {});
    Tensor<Scalar> h = x;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      const auto& l = layers_[i];
      if (cache) c.inputs.push_back(h);
      h = std::visit(
          [&](const auto& spec) -> Tensor<Scalar> {
            using T = std::decay_t<decltype(spec)>;
            if constexpr (std::is_same_v<T, ConvSpec>) {
              return conv2d_forward(h, l.params[0], l.params[1], spec.geometry());
            } else if constexpr (std::is_same_v<T, MaxPoolSpec>) {
              return maxpool2d_forward(h, c.argmax[i], spec.window);
            } else if constexpr (std::is_same_v<T, FcSpec>) {
              return linear_forward(h, l.params[0], l.params[1]);
            } else if constexpr (std::is_same_v<T, ActivationSpec>) {
              return relu_forward(h);
            } else {
              return h;
            }
          },
          l.spec);
    }
    if (cache) c.output = h;
    return h;
  }

  BackwardResult<Scalar> backward(const ForwardCache<Scalar>& cache, const Tensor<Scalar>& doutput,
                                  bool need_input_grad = false) const {
    if (cache.inputs.size() != layers_.size()) throw std::logic_error("forward cache does not match network");
    BackwardResult<Scalar> result;
    result.grads.resize(layers_.size());
    Tensor<Scalar> d = doutput;
    for (std::size_t r = layers_.size(); r-- > 0;) {
      const auto& l = layers_[r];
      const auto& x = cache.inputs[r];
      const bool want_dx = r > 0 || need_input_grad;
      d = std::visit(
          [&](const auto& spec) -> Tensor<Scalar> {
            using T = std::decay_t<decltype(spec)>;
            if constexpr (std::is_same_v<T, ConvSpec>) {
              auto g = conv2d_backward(x, l.params[0], d, spec.geometry(), want_dx);
              result.grads[r] = {std::move(g.dweights), std::move(g.dbias)};
              return std::move(g.dx);
            } else if constexpr (std::is_same_v<T, MaxPoolSpec>) {
              return maxpool2d_backward(d, std::span<const Index>(cache.argmax[r]), x.shape());
            } else if constexpr (std::is_same_v<T, FcSpec>) {
              auto g = linear_backward(x, l.params[0], d, want_dx);
              result.grads[r] = {std::move(g.dweights), std::move(g.dbias)};
              return std::move(g.dx);
            } else if constexpr (std::is_same_v<T, ActivationSpec>) {
              return relu_backward(x, d);
            } else {
              return d;
            }
          },
          l.spec);
    }
    if (need_input_grad) result.dinput = std::move(d);
    return result;
  }

  bool operator==(const Network& other) const {
    if (input_shape_ != other.input_shape_ || layers_.size() != other.layers_.size()) return false;
    for (std::size_t i = 0; i < layers_.size(); ++i)
      if (!(layers_[i].spec == other.layers_[i].spec) || layers_[i].params != other.layers_[i].params) return false;
    return true;
  }

 private:
  void check_input(const Tensor<Scalar>& x) const {
    Shape expect{x.rank() > 0 ? x.dim(0) : 0};
    expect.insert(expect.end(), input_shape_.begin(), input_shape_.end());
    if (x.shape() != expect)
      throw ShapeError("network expects [N, " + to_string(input_shape_) + "] input, got " + to_string(x.shape()));
  }

  Shape input_shape_;
  std::vector<Layer<Scalar>> layers_;
};

// One AdaGrad state per parameter tensor of a network.
class Optimizer {
 public:
  Optimizer() = default;
  template <typename Scalar>
  Optimizer(const Network<Scalar>& net, AdaGradConfig cfg) : config_(cfg) {
    cfg.validate();
    for (const auto& l : net.layers()) {
      std::vector<AdaGradState> row;
      for (const auto& p : l.params) row.emplace_back(cfg, p.shape());
      states_.push_back(std::move(row));
    }
  }

  const AdaGradConfig& config() const { return config_; }
  std::vector<std::vector<AdaGradState>>& states() { return states_; }
  const std::vector<std::vector<AdaGradState>>& states() const { return states_; }

  // Optimizer covering layers [first, last) only, sharing the accumulators' current values.
  Optimizer slice(std::size_t first, std::size_t last) const {
    Optimizer out;
    out.config_ = config_;
    out.states_.assign(states_.begin() + static_cast<std::ptrdiff_t>(first),
                       states_.begin() + static_cast<std::ptrdiff_t>(last));
    return out;
  }

  template <typename Scalar>
  void apply(Network<Scalar>& net, const ParamGrads<Scalar>& grads) {
    if (grads.size() != net.size() || states_.size() != net.size())
      throw ShapeError("gradient set does not match network");
    for (std::size_t i = 0; i < net.size(); ++i) {
      auto& params = net.layers()[i].params;
      if (grads[i].size() != params.size() || states_[i].size() != params.size())
        throw ShapeError("gradient set does not match layer " + std::to_string(i));
      for (std::size_t p = 0; p < params.size(); ++p) adagrad_update(params[p], grads[i][p], states_[i][p]);
    }
  }

 private:
  AdaGradConfig config_;
  std::vector<std::vector<AdaGradState>> states_;
};

struct StepResult {
  double loss = 0;
  int correct = 0;
};

template <typename Scalar>
StepResult train_step(Network<Scalar>& net, Optimizer& opt, const Tensor<Scalar>& x, std::span<const int> labels) {
  if (x.rank() == 0 || x.dim(0) == 0 || labels.empty()) throw std::invalid_argument("empty training batch");
  ForwardCache<Scalar> cache;
  const Tensor<Scalar> logits = net.forward(x, &cache);
  auto loss = softmax_cross_entropy(logits, labels);
  auto back = net.backward(cache, loss.dlogits);
  opt.apply(net, back.grads);
  StepResult r{loss.loss, 0};
  const auto p = loss.probabilities.matrix(logits.dim(0), logits.dim(1));
  for (Index i = 0; i < p.rows(); ++i) {
    Index best = 0;
    p.row(i).maxCoeff(&best);
    r.correct += best == labels[static_cast<std::size_t>(i)];
  }
  return r;
}

template <typename Scalar>
std::vector<int> predict(const Network<Scalar>& net, const Tensor<Scalar>& x) {
  const Tensor<Scalar> logits = net.forward(x);
  const auto z = logits.matrix(logits.dim(0), logits.size() / logits.dim(0));
  std::vector<int> out;
  for (Index i = 0; i < z.rows(); ++i) {
    Index best = 0;
    z.row(i).maxCoeff(&best);
    out.push_back(static_cast<int>(best));
  }
  return out;
}

}  // namespace vc::nn
