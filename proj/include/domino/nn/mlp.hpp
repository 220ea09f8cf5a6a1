#pragma once

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "domino/nn/ops.hpp"

namespace domino::nn {

enum class Activation { kNone, kRelu, kGelu };

inline Var activate(Tape& t, Var x, Activation a) {
  switch (a) {
    case Activation::kRelu: return relu(t, x);
    case Activation::kGelu: return gelu(t, x);
    case Activation::kNone: return x;
  }
  return x;
}

/// Fully connected chain. widths = {in, hidden..., out}; one activation per
/// hidden layer, none after the last layer.
struct MlpSpec {
  std::vector<std::size_t> widths;
  Activation activation = Activation::kRelu;

  std::size_t in() const { return widths.front(); }
  std::size_t out() const { return widths.back(); }
  std::size_t layers() const { return widths.size() - 1; }

  void validate() const {
    if (widths.size() < 2) throw ContractError("MLP needs at least one layer");
    for (auto w : widths)
      if (w == 0) throw ContractError("MLP widths must be positive");
  }
};

inline std::string layer_name(const std::string& prefix, std::size_t layer, const char* what) {
  return prefix + ".l" + std::to_string(layer) + "." + what;
}

/// Weights uniform in +-sqrt(1/fan_in).
inline void init_mlp(ParamStore& store, const std::string& prefix, const MlpSpec& spec, std::mt19937_64& rng) {
  spec.validate();
  for (std::size_t l = 0; l < spec.layers(); ++l) {
    const double bound = std::sqrt(1.0 / static_cast<double>(spec.widths[l]));
    store.add(layer_name(prefix, l, "W"), {spec.widths[l], spec.widths[l + 1]}, bound, rng);
    store.add(layer_name(prefix, l, "b"), {spec.widths[l + 1]}, bound, rng);
  }
}

inline Var mlp_forward(Tape& t, const MlpSpec& spec, ParamStore& store, const std::string& prefix, Var input) {
  spec.validate();
  Var h = input;
  for (std::size_t l = 0; l < spec.layers(); ++l) {
    if (t.cols(h) != spec.widths[l])
      throw ContractError("MLP '" + prefix + "' layer " + std::to_string(l) + " expects width " +
                          std::to_string(spec.widths[l]) + ", got " + std::to_string(t.cols(h)));
    Var w = t.parameter(store.at(layer_name(prefix, l, "W")));
    Var b = t.parameter(store.at(layer_name(prefix, l, "b")));
    h = add_bias(t, matmul(t, h, w), b);
    if (l + 1 < spec.layers()) h = activate(t, h, spec.activation);
  }
  return h;
}

/// Zeroes the weights and bias of the last layer.
inline void zero_final_layer(ParamStore& store, const std::string& prefix, const MlpSpec& spec) {
  for (const char* what : {"W", "b"})
    for (auto& v : store.at(layer_name(prefix, spec.layers() - 1, what)).tensor.values) v = 0.0;
}

}  // namespace domino::nn
