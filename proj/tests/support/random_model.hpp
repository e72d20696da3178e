#pragma once

// Random networks with arbitrary finite float parameters, for file round trips.

#include <bit>
#include <cmath>
#include <cstring>
#include <random>

#include "vc/nn/network.hpp"

namespace vc::oracle {

using namespace nn;

inline Network<float> random_model(std::mt19937_64& rng) {
  auto pick = [&](Index lo, Index hi) { return std::uniform_int_distribution<Index>(lo, hi)(rng); };
  const Index c = pick(1, 3), side = 4 * pick(1, 3), mid = pick(1, 4), classes = pick(2, 10);
  std::vector<LayerSpec> layers{ConvSpec{c, mid}, ActivationSpec{}, MaxPoolSpec{}};
  Index flat = mid * (side / 2) * (side / 2);
  if (pick(0, 1)) {
    layers.push_back(FcSpec{flat, 7});
    layers.push_back(ActivationSpec{});
    flat = 7;
  }
  layers.push_back(FcSpec{flat, classes});
  layers.push_back(SoftmaxSpec{});
  Network<float> net({c, side, side}, layers);
  std::uniform_int_distribution<std::uint32_t> bits;
  for (auto& l : net.layers())
    for (auto& p : l.params)
      for (Index i = 0; i < p.size(); ++i) {
        float v;
        do v = std::bit_cast<float>(bits(rng));
        while (!std::isfinite(v));
        p[i] = v;
      }
  return net;
}

inline bool bitwise_equal(const Network<float>& a, const Network<float>& b) {
  if (a.size() != b.size() || a.input_shape() != b.input_shape()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!(a.layers()[i].spec == b.layers()[i].spec)) return false;
    const auto &pa = a.layers()[i].params, &pb = b.layers()[i].params;
    if (pa.size() != pb.size()) return false;
    for (std::size_t p = 0; p < pa.size(); ++p)
      if (pa[p].shape() != pb[p].shape() ||
          std::memcmp(pa[p].data(), pb[p].data(), static_cast<std::size_t>(pa[p].size()) * sizeof(float)) != 0)
        return false;
  }
  return true;
}

}  // namespace vc::oracle
