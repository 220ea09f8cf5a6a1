#pragma once

// Reverse-mode recording of coarse tensor operations.

#include <cstdint>
#include <functional>
#include <vector>

#include "domino/nn/param_store.hpp"
#include "domino/nn/tensor.hpp"

namespace domino::nn {

struct Var {
  std::uint32_t id = 0;
};

class Tape {
 public:
  using Backward = std::function<void(Tape&)>;

  /// With record = false no backward closures are stored (inference).
  explicit Tape(bool record = true) : record_(record) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool recording() const { return record_; }

  Var constant(Shape shape, std::vector<double> values) { return push(std::move(shape), std::move(values), false); }
  Var constant(const Tensor& t) { return push(t.shape, t.values, false); }

  /// Leaf whose gradient is kept and readable after backward().
  Var input(Shape shape, std::vector<double> values) { return push(std::move(shape), std::move(values), record_); }

  Var parameter(Parameter& p) {
    Var v = push(p.tensor.shape, p.tensor.values, record_);
    nodes_[v.id].param = &p;
    return v;
  }

  const Shape& shape(Var v) const { return nodes_[v.id].shape; }
  const std::vector<double>& value(Var v) const { return nodes_[v.id].value; }
  std::vector<double>& mutable_value(Var v) { return nodes_[v.id].value; }
  bool requires_grad(Var v) const { return nodes_[v.id].requires_grad; }
  std::size_t rows(Var v) const { return shape(v).empty() ? 1 : shape(v)[0]; }
  std::size_t cols(Var v) const {
    const auto& s = shape(v);
    return s.size() < 2 ? 1 : element_count(s) / s[0];
  }

  /// Gradient buffer of a node, zero-initialised on first access.
  std::vector<double>& grad(Var v) {
    auto& n = nodes_[v.id];
    if (n.grad.empty()) n.grad.assign(n.value.size(), 0.0);
    return n.grad;
  }

  /// Records a new node. Attach its backward rule with on_backward().
  Var push(Shape shape, std::vector<double> value, bool requires_grad) {
    if (value.size() != element_count(shape))
      throw ContractError("node of shape " + to_string(shape) + " given " + std::to_string(value.size()) + " values");
    Node n;
    n.shape = std::move(shape);
    n.value = std::move(value);
    n.requires_grad = requires_grad && record_;
    nodes_.push_back(std::move(n));
    return Var{static_cast<std::uint32_t>(nodes_.size() - 1)};
  }

  /// Sets the rule that propagates `out`'s gradient to its inputs. Ignored
  /// for nodes that do not require grad.
  void on_backward(Var out, Backward fn) {
    if (nodes_[out.id].requires_grad) nodes_[out.id].backward = std::move(fn);
  }

  bool any_requires_grad(std::initializer_list<Var> vs) const {
    if (!record_) return false;
    for (auto v : vs)
      if (nodes_[v.id].requires_grad) return true;
    return false;
  }

  /// Back-propagates from a scalar node and accumulates parameter gradients.
  void backward(Var loss) {
    if (!record_) throw ContractError("backward() on a non-recording tape");
    if (nodes_[loss.id].value.size() != 1) throw ContractError("backward() needs a scalar loss");
    grad(loss)[0] += 1.0;
    for (std::size_t i = loss.id + 1; i-- > 0;) {
      Node& n = nodes_[i];
      if (!n.requires_grad || n.grad.empty()) continue;
      if (n.backward) n.backward(*this);
      if (n.param) {
        auto& g = n.param->tensor.grad;
        if (g.empty()) g.assign(n.value.size(), 0.0);
        for (std::size_t k = 0; k < g.size(); ++k) g[k] += nodes_[i].grad[k];
      }
    }
  }

  std::size_t node_count() const { return nodes_.size(); }

 private:
  struct Node {
    Shape shape;
    std::vector<double> value;
    std::vector<double> grad;
    bool requires_grad = false;
    Backward backward;
    Parameter* param = nullptr;
  };

  bool record_;
  std::vector<Node> nodes_;
};

}  // namespace domino::nn
