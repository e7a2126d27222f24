#include "fednlp/tensor/autodiff.hpp"

#include <cassert>

#include "fednlp/tensor/errors.hpp"
#include "fednlp/tensor/parameter_set.hpp"

namespace fednlp {

const Tensor& Var::value() const { return tape_->value(id_); }
const Tensor& Var::grad() const { return tape_->grad(id_); }
bool Var::requires_grad() const { return tape_->requires_grad(id_); }

Var Tape::leaf(Tensor value, bool requires_grad) {
  Node node;
  node.value = std::move(value);
  node.requires_grad = requires_grad;
  nodes_.push_back(std::move(node));
  return Var(this, static_cast<NodeId>(nodes_.size() - 1));
}

Var Tape::record(Tensor value, std::vector<NodeId> inputs, BackwardFn backward_fn) {
  bool any_input_finite = true;
  bool needs_grad = false;
  for (NodeId input : inputs) {
    needs_grad = needs_grad || nodes_[input].requires_grad;
#ifndef NDEBUG
    any_input_finite = any_input_finite && nodes_[input].value.all_finite();
#endif
  }
#ifndef NDEBUG
  if (any_input_finite && !value.all_finite()) {
    throw std::domain_error("non-finite value produced from finite inputs");
  }
#endif
  (void)any_input_finite;
  Node node;
  node.value = std::move(value);
  node.inputs = std::move(inputs);
  node.requires_grad = needs_grad;
  if (needs_grad) node.backward_fn = std::move(backward_fn);
  nodes_.push_back(std::move(node));
  return Var(this, static_cast<NodeId>(nodes_.size() - 1));
}

void Tape::backward(Var root) {
  if (&root.tape() != this) throw UsageError("backward: root belongs to a different tape");
  const Tensor& root_value = nodes_[root.id()].value;
  if (root_value.numel() != 1) {
    throw UsageError("backward: root must be a scalar, got shape " + shape_to_string(root_value.shape()));
  }
  if (!nodes_[root.id()].requires_grad) return;

  std::vector<bool> reachable(root.id() + 1, false);
  reachable[root.id()] = true;
  for (NodeId id = root.id() + 1; id-- > 0;) {
    if (!reachable[id]) continue;
    for (NodeId input : nodes_[id].inputs) {
      if (nodes_[input].requires_grad) reachable[input] = true;
    }
  }
  for (NodeId id = 0; id <= root.id(); ++id) {
    Node& node = nodes_[id];
    if (reachable[id] && node.requires_grad && node.grad.shape() != node.value.shape()) {
      node.grad = Tensor(node.value.shape(), 0.0);
    }
  }
  nodes_[root.id()].grad[0] += 1.0;

  for (NodeId id = root.id() + 1; id-- > 0;) {
    Node& node = nodes_[id];
    if (!reachable[id] || !node.backward_fn) continue;
    node.backward_fn(*this, node.grad);
  }
}

BoundParameters::BoundParameters(Tape& tape, const ParameterSet& params, bool requires_grad) {
  names_.reserve(params.size());
  vars_.reserve(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    names_.push_back(params.name(i));
    vars_.push_back(tape.leaf(params.tensor(i), requires_grad));
  }
  for (std::size_t i = 0; i < names_.size(); ++i) index_.emplace(names_[i], i);
}

Var BoundParameters::operator[](std::string_view name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw UsageError("unknown parameter '" + std::string(name) + "'");
  return vars_[it->second];
}

ParameterSet BoundParameters::gradients() const {
  ParameterSet grads;
  for (std::size_t i = 0; i < vars_.size(); ++i) {
    const Tensor& g = vars_[i].grad();
    grads.add(names_[i], g.empty() ? Tensor(vars_[i].shape(), 0.0) : g);
  }
  return grads;
}

}  // namespace fednlp
