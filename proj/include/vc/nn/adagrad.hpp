#pragma once

#include <cmath>
#include <stdexcept>

#include "vc/nn/tensor.hpp"

namespace vc::nn {

struct AdaGradConfig {
  double alpha = 0.01;
  double beta = 1.0;

  void validate() const {
    if (!(beta > 0) || !std::isfinite(beta)) throw std::invalid_argument("adagrad beta must be positive");
    if (!std::isfinite(alpha)) throw std::invalid_argument("adagrad alpha must be finite");
  }
};

// Running sum of squared gradients for one parameter tensor.
struct AdaGradState {
  AdaGradConfig config;
  Shape shape;
  Vector<double> accum;

  AdaGradState() = default;
  AdaGradState(AdaGradConfig cfg, Shape s) : config(cfg), shape(std::move(s)), accum(Vector<double>::Zero(numel(shape))) {
    config.validate();
  }
};

// accum += g^2, then theta -= alpha * g / sqrt(beta + accum). Evaluated in
// double and rounded once per element.
template <typename Scalar>
void adagrad_update(Tensor<Scalar>& theta, const Tensor<Scalar>& g, AdaGradState& state) {
  state.config.validate();
  if (theta.shape() != g.shape() || theta.shape() != state.shape)
    throw ShapeError("adagrad shapes differ: theta " + to_string(theta.shape()) + ", gradient " + to_string(g.shape()) +
                     ", state " + to_string(state.shape));
  const double alpha = state.config.alpha, beta = state.config.beta;
  for (Index i = 0; i < theta.size(); ++i) {
    const double gi = static_cast<double>(g[i]);
    state.accum[i] += gi * gi;
    if (gi == 0) continue;
    theta[i] = static_cast<Scalar>(static_cast<double>(theta[i]) - alpha * gi / std::sqrt(beta + state.accum[i]));
  }
}

}  // namespace vc::nn
