#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "fednlp/tensor/tensor.hpp"

namespace fednlp {

class Tape;
class ParameterSet;

using NodeId = std::uint32_t;

/// Handle to a value recorded on a Tape. Cheap to copy; valid while the tape lives.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, NodeId id) : tape_(tape), id_(id) {}

  Tape& tape() const { return *tape_; }
  NodeId id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

  const Tensor& value() const;
  const Tensor& grad() const;
  const Shape& shape() const { return value().shape(); }
  bool requires_grad() const;

 private:
  Tape* tape_ = nullptr;
  NodeId id_ = 0;
};

/// Dynamic computation graph.
///
/// Nodes are appended as operations execute, so creation order is already a
/// topological order. `backward` walks the ancestors of a scalar root in
/// reverse creation order and calls each node's backward rule exactly once.
/// A tape is rebuilt for every batch; it is not reusable across forward passes.
class Tape {
 public:
  /// Propagates `out_grad` (the gradient of the node's value) into the
  /// gradients of the node's inputs via `Tape::grad_mut`.
  using BackwardFn = std::function<void(Tape&, const Tensor& out_grad)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var leaf(Tensor value, bool requires_grad = true);
  Var constant(Tensor value) { return leaf(std::move(value), false); }

  /// Records an op output. The node requires a gradient iff any input does;
  /// `backward_fn` is dropped otherwise.
  Var record(Tensor value, std::vector<NodeId> inputs, BackwardFn backward_fn);

  const Tensor& value(NodeId id) const { return nodes_[id].value; }
  bool requires_grad(NodeId id) const { return nodes_[id].requires_grad; }

  /// Gradient of a node after backward; an empty tensor if none was populated.
  const Tensor& grad(NodeId id) const { return nodes_[id].grad; }

  /// Accumulation target used inside backward rules. Only valid for nodes
  /// that require a gradient and are reachable from the current root.
  Tensor& grad_mut(NodeId id) { return nodes_[id].grad; }

  /// Reverse-mode accumulation from a scalar root.
  void backward(Var root);

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    std::vector<NodeId> inputs;
    BackwardFn backward_fn;
    bool requires_grad = false;
  };
  std::vector<Node> nodes_;
};

/// A ParameterSet bound to a tape as gradient-requiring leaves.
class BoundParameters {
 public:
  /// With `requires_grad == false` the parameters are constants (forward-only use).
  BoundParameters(Tape& tape, const ParameterSet& params, bool requires_grad = true);

  Var operator[](std::string_view name) const;
  Var at(std::size_t index) const { return vars_[index]; }
  std::size_t size() const { return vars_.size(); }

  /// Gradients in the manifest order of the bound set. Parameters that did not
  /// take part in the loss get zero gradients.
  ParameterSet gradients() const;

 private:
  std::vector<std::string> names_;
  std::vector<Var> vars_;
  std::unordered_map<std::string_view, std::size_t> index_;
};

}  // namespace fednlp
