#pragma once

// conv -> relu -> maxpool -> conv -> relu -> unpool -> conv, shape preserving.

#include <cmath>
#include <random>
#include <string>

#include "domino/nn/grid_ops.hpp"

namespace domino::nn {

inline void init_conv_block(ParamStore& store, const std::string& prefix, std::size_t channels, std::mt19937_64& rng) {
  const double bound = std::sqrt(1.0 / (27.0 * static_cast<double>(channels)));
  for (int i = 0; i < 3; ++i) {
    const std::string p = prefix + ".conv" + std::to_string(i);
    store.add(p + ".W", {27 * channels, channels}, bound, rng);
    store.add(p + ".b", {channels}, bound, rng);
  }
}

inline Var conv_block_forward(Tape& t, ParamStore& store, const std::string& prefix, Var x, const GridDims& dims) {
  require_even(dims, "conv block");
  auto conv = [&](Var in, int i, const GridDims& d) {
    const std::string p = prefix + ".conv" + std::to_string(i);
    return conv3d(t, in, d, t.parameter(store.at(p + ".W")), t.parameter(store.at(p + ".b")));
  };
  const GridDims coarse{dims[0] / 2, dims[1] / 2, dims[2] / 2};
  Var h = relu(t, conv(x, 0, dims));
  h = max_pool2(t, h, dims);
  h = relu(t, conv(h, 1, coarse));
  h = unpool2(t, h, coarse);
  return conv(h, 2, dims);
}

}  // namespace domino::nn
