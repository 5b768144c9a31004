#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "gccn/tensor.hpp"

namespace gccn {

// A named leaf tensor owned outside any graph. Trainable parameters receive
// gradients from Graph::backward; buffers (running statistics) do not.
struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;
  bool trainable = true;
};

// Ordered, name-addressable collection of parameters. References returned by
// add()/get() stay valid for the lifetime of the set.
class ParameterSet {
 public:
  Parameter& add(std::string name, Tensor value, bool trainable = true);
  Parameter& get(std::string_view name);
  const Parameter& get(std::string_view name) const;
  bool contains(std::string_view name) const;

  std::size_t size() const { return items_.size(); }
  auto begin() { return items_.begin(); }
  auto end() { return items_.end(); }
  auto begin() const { return items_.begin(); }
  auto end() const { return items_.end(); }

  void zero_grad();
  std::size_t trainable_count() const;

  // Equality compares names, flags, and values; gradients are ignored.
  friend bool operator==(const ParameterSet& a, const ParameterSet& b);

 private:
  std::deque<Parameter> items_;
};

class Graph;

// Handle to a node of a Graph. Cheap to copy; only valid while its graph lives.
class Var {
 public:
  Var() = default;

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  Graph& graph() const { return *graph_; }
  std::size_t id() const { return id_; }
  bool valid() const { return graph_ != nullptr; }

 private:
  friend class Graph;
  Var(Graph* graph, std::size_t id) : graph_(graph), id_(id) {}

  Graph* graph_ = nullptr;
  std::size_t id_ = 0;
};

// Tape of recorded operations. Nodes are appended in evaluation order, so the
// reverse of insertion order is a reverse topological order and backward()
// visits every node at most once.
class Graph {
 public:
  // Receives the gradient of the loss w.r.t. the node output and pushes
  // contributions into its parents through accumulate()/grad_buffer().
  using BackwardFn = std::function<void(Graph&, const Tensor& out_grad)>;

  Graph() = default;
  // With track_gradients false every parameter enters as a constant, so no
  // backward state is kept (inference).
  explicit Graph(bool track_gradients) : track_gradients_(track_gradients) {}
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Var constant(Tensor value);
  // One leaf per parameter per graph; repeated calls return the same node.
  Var param(Parameter& p);

  // Appends an operation node. Throws NumericError if value is not finite.
  // The backward function is dropped when no parent requires a gradient.
  Var record(Tensor value, const std::vector<Var>& parents, BackwardFn backward);

  const Tensor& value(Var v) const;
  bool requires_grad(Var v) const;

  // Gradient buffer of v, zero-initialised on first access.
  Tensor& grad_buffer(Var v);
  void accumulate(Var v, const Tensor& g);

  // Gradient of the last backward pass w.r.t. v, or nullptr.
  const Tensor* grad(Var v) const;

  // Reverse-mode sweep from a single-element loss. Adds dL/dθ into the grad
  // of every trainable parameter leaf. Allowed once per graph.
  void backward(Var loss);

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    bool has_grad = false;
    bool requires_grad = false;
    BackwardFn backward;
    Parameter* param = nullptr;
  };

  Node& node(Var v);
  const Node& node(Var v) const;

  std::deque<Node> nodes_;
  std::unordered_map<const Parameter*, std::size_t> param_nodes_;
  bool backward_done_ = false;
  bool track_gradients_ = true;
};

}  // namespace gccn
