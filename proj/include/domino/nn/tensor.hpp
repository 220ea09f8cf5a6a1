#pragma once

#include <cstddef>
#include <functional>
#include <numeric>
#include <string>
#include <vector>

#include "domino/error.hpp"

namespace domino::nn {

using Shape = std::vector<std::size_t>;

inline std::size_t element_count(const Shape& s) {
  return std::accumulate(s.begin(), s.end(), std::size_t{1}, std::multiplies<>());
}

inline std::string to_string(const Shape& s) {
  std::string out = "[";
  for (std::size_t i = 0; i < s.size(); ++i) out += (i ? "," : "") + std::to_string(s[i]);
  return out + "]";
}

/// Dense row-major array of doubles with an optional gradient buffer.
struct Tensor {
  Shape shape;
  std::vector<double> values;
  std::vector<double> grad;  // empty until a backward pass populates it

  Tensor() = default;
  explicit Tensor(Shape s, double fill = 0.0) : shape(std::move(s)), values(element_count(shape), fill) {}
  Tensor(Shape s, std::vector<double> v) : shape(std::move(s)), values(std::move(v)) {
    if (values.size() != element_count(shape))
      throw ContractError("tensor of shape " + to_string(shape) + " given " + std::to_string(values.size()) + " values");
  }

  std::size_t size() const { return values.size(); }
  bool has_grad() const { return !grad.empty(); }
  std::size_t rows() const { return shape.empty() ? 1 : shape[0]; }
  std::size_t cols() const { return shape.size() < 2 ? 1 : element_count(shape) / shape[0]; }
};

}  // namespace domino::nn
