#include "gccn/autodiff.hpp"

#include <algorithm>

#include "gccn/error.hpp"

namespace gccn {

Parameter& ParameterSet::add(std::string name, Tensor value, bool trainable) {
  if (contains(name)) throw UsageError("duplicate parameter name '" + name + "'");
  Parameter p;
  p.name = std::move(name);
  p.grad = Tensor(value.shape(), 0.0);
  p.value = std::move(value);
  p.trainable = trainable;
  items_.push_back(std::move(p));
  return items_.back();
}

Parameter& ParameterSet::get(std::string_view name) {
  for (auto& p : items_) {
    if (p.name == name) return p;
  }
  throw UsageError("unknown parameter '" + std::string(name) + "'");
}

const Parameter& ParameterSet::get(std::string_view name) const {
  for (const auto& p : items_) {
    if (p.name == name) return p;
  }
  throw UsageError("unknown parameter '" + std::string(name) + "'");
}

bool ParameterSet::contains(std::string_view name) const {
  return std::any_of(items_.begin(), items_.end(), [&](const Parameter& p) { return p.name == name; });
}

void ParameterSet::zero_grad() {
  for (auto& p : items_) p.grad.fill(0.0);
}

std::size_t ParameterSet::trainable_count() const {
  return static_cast<std::size_t>(
      std::count_if(items_.begin(), items_.end(), [](const Parameter& p) { return p.trainable; }));
}

bool operator==(const ParameterSet& a, const ParameterSet& b) {
  if (a.items_.size() != b.items_.size()) return false;
  for (std::size_t i = 0; i < a.items_.size(); ++i) {
    const auto& x = a.items_[i];
    const auto& y = b.items_[i];
    if (x.name != y.name || x.trainable != y.trainable || !(x.value == y.value)) return false;
  }
  return true;
}

const Tensor& Var::value() const {
  if (!graph_) throw UsageError("value() on an unbound Var");
  return graph_->value(*this);
}

Graph::Node& Graph::node(Var v) {
  if (v.graph_ != this || v.id_ >= nodes_.size()) throw UsageError("Var does not belong to this graph");
  return nodes_[v.id_];
}

const Graph::Node& Graph::node(Var v) const {
  if (v.graph_ != this || v.id_ >= nodes_.size()) throw UsageError("Var does not belong to this graph");
  return nodes_[v.id_];
}

Var Graph::constant(Tensor value) {
  if (!value.all_finite()) throw NumericError("non-finite value in constant " + shape_string(value.shape()));
  Node n;
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

Var Graph::param(Parameter& p) {
  if (auto it = param_nodes_.find(&p); it != param_nodes_.end()) return Var(this, it->second);
  if (!p.value.all_finite()) throw NumericError("non-finite value in parameter '" + p.name + "'");
  Node n;
  n.value = p.value;
  n.requires_grad = p.trainable && track_gradients_;
  n.param = n.requires_grad ? &p : nullptr;
  nodes_.push_back(std::move(n));
  param_nodes_.emplace(&p, nodes_.size() - 1);
  return Var(this, nodes_.size() - 1);
}

Var Graph::record(Tensor value, const std::vector<Var>& parents, BackwardFn backward) {
  if (backward_done_) throw UsageError("cannot extend a graph after backward()");
  if (!value.all_finite()) throw NumericError("non-finite value produced, shape " + shape_string(value.shape()));
  Node n;
  n.value = std::move(value);
  for (const auto& p : parents) {
    if (node(p).requires_grad) n.requires_grad = true;
  }
  if (n.requires_grad) n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

const Tensor& Graph::value(Var v) const { return node(v).value; }

bool Graph::requires_grad(Var v) const { return node(v).requires_grad; }

Tensor& Graph::grad_buffer(Var v) {
  Node& n = node(v);
  if (!n.has_grad) {
    n.grad = Tensor(n.value.shape(), 0.0);
    n.has_grad = true;
  }
  return n.grad;
}

void Graph::accumulate(Var v, const Tensor& g) {
  if (!node(v).requires_grad) return;
  grad_buffer(v) += g;
}

const Tensor* Graph::grad(Var v) const {
  const Node& n = node(v);
  return n.has_grad ? &n.grad : nullptr;
}

void Graph::backward(Var loss) {
  Node& root = node(loss);
  if (root.value.size() != 1) {
    throw UsageError("backward() needs a single-element loss, got " + shape_string(root.value.shape()));
  }
  if (backward_done_) throw UsageError("backward() already ran on this graph; rebuild the forward pass");
  backward_done_ = true;
  if (!root.requires_grad) return;

  grad_buffer(loss).fill(1.0);
  for (std::size_t id = loss.id() + 1; id-- > 0;) {
    Node& n = nodes_[id];
    if (!n.has_grad) continue;
    if (!n.grad.all_finite()) throw NumericError("non-finite gradient during backward");
    if (n.param) {
      n.param->grad += n.grad;
    } else if (n.backward) {
      n.backward(*this, n.grad);
    }
  }
}

}  // namespace gccn
