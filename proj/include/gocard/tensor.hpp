#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace gocard {

using Shape = std::vector<int>;

int shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

namespace detail {

struct TensorNode {
  Shape shape;
  std::vector<double> values;
  std::vector<double> grad;  // sized lazily by ensure_grad()
  bool requires_grad = false;
  bool is_leaf = true;
  std::vector<std::shared_ptr<TensorNode>> parents;
  // Propagates this node's grad into its parents' grad buffers.
  std::function<void(TensorNode&)> backward_fn;

  void ensure_grad() {
    if (grad.size() != values.size()) grad.assign(values.size(), 0.0);
  }
};

}  // namespace detail

// Value-semantics handle to a node in the autodiff tape. Ops build fresh
// nodes; leaf tensors (inputs, parameters) own their storage across steps.
// Values are double end to end; the checkpoint container stores float32.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor from_data(Shape shape, std::vector<double> data, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  int numel() const { return static_cast<int>(node_->values.size()); }
  int rank() const { return static_cast<int>(node_->shape.size()); }
  bool requires_grad() const { return node_->requires_grad; }
  bool is_leaf() const { return node_->is_leaf; }

  std::span<const double> values() const { return node_->values; }
  std::span<double> mutable_values() { return node_->values; }
  // Empty span when no gradient has been produced.
  std::span<const double> grad() const { return node_->grad; }
  std::span<double> mutable_grad() { return node_->grad; }

  double item() const;
  double at(std::initializer_list<int> idx) const;

  void set_requires_grad(bool flag);
  void zero_grad();

  // Runs reverse-mode accumulation from this scalar node. Every
  // requires_grad tensor reachable through the tape receives a gradient of
  // its own shape. Throws StateError when no forward pass is recorded and
  // ContractError when the tensor is not a scalar.
  void backward() const;

  std::shared_ptr<detail::TensorNode> node() const { return node_; }
  static Tensor wrap(std::shared_ptr<detail::TensorNode> node);

 private:
  std::shared_ptr<detail::TensorNode> node_;
};

// Creates an op output node wired to its parents. requires_grad is inherited
// from any parent; backward_fn is only invoked for grad-carrying nodes.
Tensor make_op_node(Shape shape, std::vector<Tensor> parents,
                    std::function<void(detail::TensorNode&)> backward_fn);

}  // namespace gocard
