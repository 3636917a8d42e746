#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "marflow/core/tensor.hpp"

namespace marflow::ad {

// A learnable tensor together with its accumulated gradient.
template <typename Scalar>
struct Parameter {
  std::string name;
  Tensor<Scalar> value;
  Tensor<Scalar> grad;
  bool trainable = true;

  Parameter() = default;
  Parameter(std::string n, Tensor<Scalar> v, bool train = true)
      : name(std::move(n)), value(std::move(v)), grad(value.shape()), trainable(train) {}

  void zero_grad() { grad = Tensor<Scalar>(value.shape()); }
};

template <typename Scalar>
class Tape;

// Handle to a node recorded on a tape.
template <typename Scalar>
struct Var {
  Tape<Scalar>* tape = nullptr;
  std::size_t id = 0;

  const Tensor<Scalar>& value() const;
  const Shape& shape() const { return value().shape(); }
  Index size() const { return value().size(); }
};

// Reverse-mode tape. Nodes are appended in execution order; backward()
// visits them in exact reverse order. A tape built with record=false keeps
// values only and is used for inference and inverse passes.
template <typename Scalar>
class Tape {
 public:
  using Backward = std::function<void(Tape&, const Tensor<Scalar>&)>;

  explicit Tape(bool record = true) : record_(record) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool recording() const { return record_; }

  Var<Scalar> constant(Tensor<Scalar> value) { return push_leaf(std::move(value), false, nullptr); }
  // Leaf whose gradient is readable with grad() after backward().
  Var<Scalar> input(Tensor<Scalar> value) { return push_leaf(std::move(value), record_, nullptr); }
  // Leaf bound to a parameter; backward() adds into p.grad.
  Var<Scalar> param(Parameter<Scalar>& p) { return push_leaf(p.value, record_, &p); }

  // Records an op result. `fn` receives the output gradient and must
  // accumulate into the inputs through accumulate().
  Var<Scalar> push(Tensor<Scalar> value, bool needs_grad, Backward fn) {
    if (!value.all_finite()) throw NumericalError("non-finite value produced on tape");
    Node n;
    n.value = std::move(value);
    n.needs_grad = needs_grad && record_;
    if (n.needs_grad) n.backward = std::move(fn);
    nodes_.push_back(std::move(n));
    return {this, nodes_.size() - 1};
  }

  bool needs_grad(Var<Scalar> v) const { return nodes_[v.id].needs_grad; }
  const Tensor<Scalar>& value(std::size_t id) const { return nodes_[id].value; }

  void accumulate(Var<Scalar> v, const Tensor<Scalar>& g) {
    Node& n = nodes_[v.id];
    if (!n.needs_grad) return;
    if (n.grad.empty()) {
      n.grad = g;
    } else {
      n.grad.array() += g.array();
    }
  }
  // Mutable gradient buffer, allocated as zeros on first use.
  Tensor<Scalar>& grad_buffer(Var<Scalar> v) {
    Node& n = nodes_[v.id];
    if (n.grad.empty()) n.grad = Tensor<Scalar>(n.value.shape());
    return n.grad;
  }

  const Tensor<Scalar>& grad(Var<Scalar> v) const { return nodes_[v.id].grad; }

  // Seeds d(root) with `seed` (same shape as root) and replays backward.
  void backward(Var<Scalar> root, const Tensor<Scalar>& seed) {
    if (!record_) throw Error("backward() on a non-recording tape");
    require_same_shape(nodes_[root.id].value, seed, "backward seed");
    accumulate(root, seed);
    for (std::size_t i = root.id + 1; i-- > 0;) {
      Node& n = nodes_[i];
      if (n.grad.empty()) continue;
      if (n.backward) {
        n.backward(*this, n.grad);
      } else if (n.param != nullptr) {
        n.param->grad.array() += n.grad.array();
      }
    }
  }
  void backward(Var<Scalar> root, Scalar seed = Scalar(1)) {
    backward(root, Tensor<Scalar>(nodes_[root.id].value.shape(), seed));
  }

  std::size_t node_count() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor<Scalar> value;
    Tensor<Scalar> grad;
    Backward backward;
    Parameter<Scalar>* param = nullptr;
    bool needs_grad = false;
  };

  Var<Scalar> push_leaf(Tensor<Scalar> value, bool needs_grad, Parameter<Scalar>* p) {
    if (!value.all_finite()) throw NumericalError("non-finite leaf value");
    Node n;
    n.value = std::move(value);
    n.needs_grad = needs_grad;
    n.param = p;
    nodes_.push_back(std::move(n));
    return {this, nodes_.size() - 1};
  }

  bool record_;
  std::vector<Node> nodes_;
};

template <typename Scalar>
const Tensor<Scalar>& Var<Scalar>::value() const {
  return tape->value(id);
}

}  // namespace marflow::ad
