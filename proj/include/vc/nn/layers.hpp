#pragma once

// Forward/backward kernels for the layer set. Batched tensors carry the
// sample index as their leading dimension: images are [N, C, H, W], flat
// features [N, D].

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "vc/nn/tensor.hpp"

namespace vc::nn {

struct ConvGeometry {
  Index in_channels = 0;
  Index out_channels = 0;
  Index kernel = 5;
  Index padding = 2;  // stride is always 1

  Index out_extent(Index in) const { return in + 2 * padding - kernel + 1; }
  Index patch_size() const { return in_channels * kernel * kernel; }
};

template <typename Scalar>
struct ConvGrads {
  Tensor<Scalar> dx;  // empty when the input gradient was not requested
  Tensor<Scalar> dweights;
  Tensor<Scalar> dbias;
};

namespace detail {

inline void require(bool ok, const std::string& what) {
  if (!ok) throw ShapeError(what);
}

// Unfolds one [C, H, W] sample into a (C*k*k) x (Ho*Wo) patch matrix.
template <typename Scalar>
void im2col(const Scalar* x, const ConvGeometry& g, Index h, Index w, RowMatrix<Scalar>& col) {
  const Index ho = g.out_extent(h), wo = g.out_extent(w), k = g.kernel;
  col.resize(g.patch_size(), ho * wo);
  for (Index c = 0; c < g.in_channels; ++c) {
    const Scalar* plane = x + c * h * w;
    for (Index ky = 0; ky < k; ++ky) {
      for (Index kx = 0; kx < k; ++kx) {
        Scalar* row = col.data() + ((c * k + ky) * k + kx) * ho * wo;
        for (Index oy = 0; oy < ho; ++oy) {
          const Index iy = oy + ky - g.padding;
          Scalar* out = row + oy * wo;
          if (iy < 0 || iy >= h) {
            std::fill(out, out + wo, Scalar(0));
            continue;
          }
          for (Index ox = 0; ox < wo; ++ox) {
            const Index ix = ox + kx - g.padding;
            out[ox] = (ix < 0 || ix >= w) ? Scalar(0) : plane[iy * w + ix];
          }
        }
      }
    }
  }
}

// Adjoint of im2col: scatters patch gradients back onto a [C, H, W] sample.
template <typename Scalar>
void col2im(const RowMatrix<Scalar>& col, const ConvGeometry& g, Index h, Index w, Scalar* dx) {
  const Index ho = g.out_extent(h), wo = g.out_extent(w), k = g.kernel;
  std::fill(dx, dx + g.in_channels * h * w, Scalar(0));
  for (Index c = 0; c < g.in_channels; ++c) {
    Scalar* plane = dx + c * h * w;
    for (Index ky = 0; ky < k; ++ky) {
      for (Index kx = 0; kx < k; ++kx) {
        const Scalar* row = col.data() + ((c * k + ky) * k + kx) * ho * wo;
        for (Index oy = 0; oy < ho; ++oy) {
          const Index iy = oy + ky - g.padding;
          if (iy < 0 || iy >= h) continue;
          for (Index ox = 0; ox < wo; ++ox) {
            const Index ix = ox + kx - g.padding;
            if (ix >= 0 && ix < w) plane[iy * w + ix] += row[oy * wo + ox];
          }
        }
      }
    }
  }
}

inline void check_conv(const Shape& x, const ConvGeometry& g, const Shape& weights, const Shape& bias) {
  require(x.size() == 4, "conv input must be [N, C, H, W], got " + to_string(x));
  require(x[1] == g.in_channels, "conv input has " + std::to_string(x[1]) + " channels, expected " +
                                     std::to_string(g.in_channels));
  require(weights == Shape{g.out_channels, g.in_channels, g.kernel, g.kernel},
          "conv weights must be [O, C, k, k], got " + to_string(weights));
  require(bias == Shape{g.out_channels}, "conv bias must be [O], got " + to_string(bias));
  require(g.out_extent(x[2]) > 0 && g.out_extent(x[3]) > 0, "conv output would be empty");
}

}  // namespace detail

// Cross-correlation with zero padding and unit stride.
template <typename Scalar>
Tensor<Scalar> conv2d_forward(const Tensor<Scalar>& x, const Tensor<Scalar>& weights, const Tensor<Scalar>& bias,
                              const ConvGeometry& g) {
  detail::check_conv(x.shape(), g, weights.shape(), bias.shape());
  const Index n = x.dim(0), h = x.dim(2), w = x.dim(3);
  const Index ho = g.out_extent(h), wo = g.out_extent(w);
  Tensor<Scalar> y({n, g.out_channels, ho, wo});
  const auto wmat = weights.matrix(g.out_channels, g.patch_size());
  RowMatrix<Scalar> col;
  for (Index i = 0; i < n; ++i) {
    detail::im2col(x.data() + i * g.in_channels * h * w, g, h, w, col);
    Eigen::Map<RowMatrix<Scalar>> yi(y.data() + i * g.out_channels * ho * wo, g.out_channels, ho * wo);
    yi.noalias() = wmat * col;
    yi.colwise() += bias.values();
  }
  return y;
}

template <typename Scalar>
ConvGrads<Scalar> conv2d_backward(const Tensor<Scalar>& x, const Tensor<Scalar>& weights, const Tensor<Scalar>& dy,
                                  const ConvGeometry& g, bool need_input_grad = true) {
  detail::check_conv(x.shape(), g, weights.shape(), Shape{g.out_channels});
  const Index n = x.dim(0), h = x.dim(2), w = x.dim(3);
  const Index ho = g.out_extent(h), wo = g.out_extent(w);
  detail::require(dy.shape() == Shape{n, g.out_channels, ho, wo}, "conv output gradient has shape " +
                                                                      to_string(dy.shape()));
  ConvGrads<Scalar> grads;
  grads.dweights = Tensor<Scalar>(weights.shape());
  grads.dbias = Tensor<Scalar>({g.out_channels});
  if (need_input_grad) grads.dx = Tensor<Scalar>(x.shape());
  auto dw = grads.dweights.matrix(g.out_channels, g.patch_size());
  const auto wmat = weights.matrix(g.out_channels, g.patch_size());
  RowMatrix<Scalar> col, dcol;
  for (Index i = 0; i < n; ++i) {
    detail::im2col(x.data() + i * g.in_channels * h * w, g, h, w, col);
    Eigen::Map<const RowMatrix<Scalar>> dyi(dy.data() + i * g.out_channels * ho * wo, g.out_channels, ho * wo);
    dw.noalias() += dyi * col.transpose();
    grads.dbias.values() += dyi.rowwise().sum();
    if (need_input_grad) {
      dcol.noalias() = wmat.transpose() * dyi;
      detail::col2im(dcol, g, h, w, grads.dx.data() + i * g.in_channels * h * w);
    }
  }
  return grads;
}

// 2x2 max pooling, stride 2. `argmax` receives, per output element, the flat
// index of the winning input element; ties go to the first in row-major order.
template <typename Scalar>
Tensor<Scalar> maxpool2d_forward(const Tensor<Scalar>& x, std::vector<Index>& argmax, Index window = 2) {
  detail::require(x.rank() == 4, "maxpool input must be [N, C, H, W], got " + to_string(x.shape()));
  const Index n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  detail::require(h % window == 0 && w % window == 0,
                  "maxpool needs spatial dims divisible by " + std::to_string(window) + ", got " + to_string(x.shape()));
  const Index ho = h / window, wo = w / window;
  Tensor<Scalar> y({n, c, ho, wo});
  argmax.assign(static_cast<std::size_t>(y.size()), 0);
  Index out = 0;
  for (Index plane = 0; plane < n * c; ++plane) {
    const Index base = plane * h * w;
    for (Index oy = 0; oy < ho; ++oy) {
      for (Index ox = 0; ox < wo; ++ox, ++out) {
        Index best = base + (oy * window) * w + ox * window;
        for (Index dy = 0; dy < window; ++dy)
          for (Index dx = 0; dx < window; ++dx) {
            const Index idx = base + (oy * window + dy) * w + ox * window + dx;
            if (x[idx] > x[best]) best = idx;
          }
        y[out] = x[best];
        argmax[static_cast<std::size_t>(out)] = best;
      }
    }
  }
  return y;
}

template <typename Scalar>
Tensor<Scalar> maxpool2d_backward(const Tensor<Scalar>& dy, std::span<const Index> argmax, const Shape& input_shape) {
  detail::require(static_cast<Index>(argmax.size()) == dy.size(), "maxpool gradient does not match forward pass");
  Tensor<Scalar> dx(input_shape);
  for (Index i = 0; i < dy.size(); ++i) dx[argmax[static_cast<std::size_t>(i)]] += dy[i];
  return dx;
}

template <typename Scalar>
Tensor<Scalar> relu_forward(const Tensor<Scalar>& x) {
  return Tensor<Scalar>(x.shape(), x.values().cwiseMax(Scalar(0)));
}

template <typename Scalar>
Tensor<Scalar> relu_backward(const Tensor<Scalar>& x, const Tensor<Scalar>& dy) {
  detail::require(x.shape() == dy.shape(), "relu gradient shape mismatch");
  return Tensor<Scalar>(x.shape(), (x.values().array() > Scalar(0)).select(dy.values(), Scalar(0)));
}

template <typename Scalar>
struct LinearGrads {
  Tensor<Scalar> dx;
  Tensor<Scalar> dweights;
  Tensor<Scalar> dbias;
};

namespace detail {

inline void check_linear(const Shape& x, const Shape& weights, const Shape& bias) {
  require(x.size() >= 2, "linear input needs a batch dimension, got " + to_string(x));
  require(weights.size() == 2, "linear weights must be [out, in]");
  const Index features = numel(x) / x[0];
  require(features == weights[1], "linear input has " + std::to_string(features) + " features, weights expect " +
                                      std::to_string(weights[1]));
  require(bias == Shape{weights[0]}, "linear bias must be [out]");
}

}  // namespace detail

// y = x W^T + b with x flattened to [N, in].
template <typename Scalar>
Tensor<Scalar> linear_forward(const Tensor<Scalar>& x, const Tensor<Scalar>& weights, const Tensor<Scalar>& bias) {
  detail::check_linear(x.shape(), weights.shape(), bias.shape());
  const Index n = x.dim(0), in = weights.dim(1), out = weights.dim(0);
  Tensor<Scalar> y({n, out});
  auto ym = y.matrix(n, out);
  ym.noalias() = x.matrix(n, in) * weights.matrix(out, in).transpose();
  ym.rowwise() += bias.values().transpose();
  return y;
}

template <typename Scalar>
LinearGrads<Scalar> linear_backward(const Tensor<Scalar>& x, const Tensor<Scalar>& weights, const Tensor<Scalar>& dy,
                                    bool need_input_grad = true) {
  detail::check_linear(x.shape(), weights.shape(), Shape{weights.dim(0)});
  const Index n = x.dim(0), in = weights.dim(1), out = weights.dim(0);
  detail::require(dy.shape() == Shape{n, out}, "linear output gradient has shape " + to_string(dy.shape()));
  LinearGrads<Scalar> g;
  g.dweights = Tensor<Scalar>(weights.shape());
  g.dbias = Tensor<Scalar>({out});
  const auto dym = dy.matrix(n, out);
  g.dweights.matrix(out, in).noalias() = dym.transpose() * x.matrix(n, in);
  g.dbias.values() = dym.colwise().sum().transpose();
  if (need_input_grad) {
    g.dx = Tensor<Scalar>(x.shape());
    g.dx.matrix(n, in).noalias() = dym * weights.matrix(out, in);
  }
  return g;
}

template <typename Scalar>
struct SoftmaxLoss {
  double loss = 0;         // mean over the batch
  Tensor<Scalar> dlogits;  // (p - onehot(label)) / N
  Tensor<Scalar> probabilities;
};

// Max-subtracted softmax with cross-entropy; normalizers and the loss are
// accumulated in double.
template <typename Scalar>
SoftmaxLoss<Scalar> softmax_cross_entropy(const Tensor<Scalar>& logits, std::span<const int> labels) {
  detail::require(logits.rank() == 2, "logits must be [N, classes], got " + to_string(logits.shape()));
  const Index n = logits.dim(0), classes = logits.dim(1);
  detail::require(static_cast<Index>(labels.size()) == n, "label count does not match batch size");
  detail::require(logits.all_finite(), "logits must be finite");
  SoftmaxLoss<Scalar> out;
  out.probabilities = Tensor<Scalar>(logits.shape());
  out.dlogits = Tensor<Scalar>(logits.shape());
  const auto z = logits.matrix(n, classes);
  auto p = out.probabilities.matrix(n, classes);
  auto dz = out.dlogits.matrix(n, classes);
  double total = 0;
  for (Index i = 0; i < n; ++i) {
    const int label = labels[static_cast<std::size_t>(i)];
    if (label < 0 || label >= classes) throw std::out_of_range("label " + std::to_string(label) + " out of range");
    const double zmax = static_cast<double>(z.row(i).maxCoeff());
    double denom = 0;
    for (Index c = 0; c < classes; ++c) denom += std::exp(static_cast<double>(z(i, c)) - zmax);
    for (Index c = 0; c < classes; ++c) {
      const double pc = std::exp(static_cast<double>(z(i, c)) - zmax) / denom;
      p(i, c) = static_cast<Scalar>(pc);
      dz(i, c) = static_cast<Scalar>((pc - (c == label ? 1.0 : 0.0)) / static_cast<double>(n));
    }
    total += std::log(denom) - (static_cast<double>(z(i, label)) - zmax);
  }
  out.loss = total / static_cast<double>(n);
  return out;
}

}  // namespace vc::nn
