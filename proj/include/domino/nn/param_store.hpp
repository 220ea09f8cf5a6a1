#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "domino/nn/tensor.hpp"

namespace domino::nn {

/// A trainable tensor with its Adam moments.
struct Parameter {
  Tensor tensor;
  std::vector<double> first_moment;
  std::vector<double> second_moment;
  std::uint64_t step = 0;
};

/// Named parameters, enumerated in lexicographic name order.
class ParamStore {
 public:
  /// Registers a parameter initialised uniformly in [-bound, bound].
  Parameter& add(const std::string& name, Shape shape, double bound, std::mt19937_64& rng) {
    if (params_.count(name)) throw ContractError("duplicate parameter '" + name + "'");
    Parameter p;
    p.tensor = Tensor(std::move(shape));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (auto& v : p.tensor.values) v = bound > 0.0 ? dist(rng) : 0.0;
    p.first_moment.assign(p.tensor.size(), 0.0);
    p.second_moment.assign(p.tensor.size(), 0.0);
    return params_.emplace(name, std::move(p)).first->second;
  }

  /// Registers a parameter with explicit values (used when loading checkpoints).
  Parameter& add(const std::string& name, Tensor value) {
    if (params_.count(name)) throw ContractError("duplicate parameter '" + name + "'");
    Parameter p;
    p.tensor = std::move(value);
    p.tensor.grad.clear();
    p.first_moment.assign(p.tensor.size(), 0.0);
    p.second_moment.assign(p.tensor.size(), 0.0);
    return params_.emplace(name, std::move(p)).first->second;
  }

  bool contains(const std::string& name) const { return params_.count(name) != 0; }

  Parameter& at(const std::string& name) {
    auto it = params_.find(name);
    if (it == params_.end()) throw ContractError("unknown parameter '" + name + "'");
    return it->second;
  }
  const Parameter& at(const std::string& name) const {
    auto it = params_.find(name);
    if (it == params_.end()) throw ContractError("unknown parameter '" + name + "'");
    return it->second;
  }

  std::vector<std::string> names() const {
    std::vector<std::string> out;
    for (const auto& [k, v] : params_) out.push_back(k);
    return out;
  }

  std::size_t scalar_count() const {
    std::size_t n = 0;
    for (const auto& [k, v] : params_) n += v.tensor.size();
    return n;
  }

  /// Zeroes every gradient, allocating the buffers so they count as populated.
  void zero_grad() {
    for (auto& [k, p] : params_) p.tensor.grad.assign(p.tensor.size(), 0.0);
  }

  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }
  std::size_t size() const { return params_.size(); }

 private:
  std::map<std::string, Parameter> params_;
};

}  // namespace domino::nn
