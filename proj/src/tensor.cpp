#include "gocard/tensor.hpp"

#include <algorithm>
#include <sstream>
#include <unordered_set>

#include "gocard/errors.hpp"

namespace gocard {

int shape_numel(const Shape& shape) {
  int n = 1;
  for (int d : shape) {
    if (d <= 0) throw DimensionError("shape dimensions must be positive, got " + shape_str(shape));
    n *= d;
  }
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << "(";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ",";
    os << shape[i];
  }
  os << ")";
  return os.str();
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  return full(std::move(shape), 0.0, requires_grad);
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  auto node = std::make_shared<detail::TensorNode>();
  const int n = shape_numel(shape);
  node->shape = std::move(shape);
  node->values.assign(static_cast<std::size_t>(n), value);
  node->requires_grad = requires_grad;
  return wrap(std::move(node));
}

Tensor Tensor::from_data(Shape shape, std::vector<double> data, bool requires_grad) {
  const int n = shape_numel(shape);
  if (static_cast<std::size_t>(n) != data.size()) {
    throw DimensionError("data length " + std::to_string(data.size()) + " does not match shape " +
                         shape_str(shape));
  }
  auto node = std::make_shared<detail::TensorNode>();
  node->shape = std::move(shape);
  node->values = std::move(data);
  node->requires_grad = requires_grad;
  return wrap(std::move(node));
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return from_data({1}, {value}, requires_grad);
}

Tensor Tensor::wrap(std::shared_ptr<detail::TensorNode> node) {
  Tensor t;
  t.node_ = std::move(node);
  return t;
}

double Tensor::item() const {
  if (numel() != 1) throw ContractError("item() requires a scalar tensor, shape is " + shape_str(shape()));
  return node_->values[0];
}

double Tensor::at(std::initializer_list<int> idx) const {
  const Shape& s = node_->shape;
  if (idx.size() != s.size()) throw DimensionError("index rank mismatch");
  int flat = 0;
  int i = 0;
  for (int v : idx) {
    if (v < 0 || v >= s[static_cast<std::size_t>(i)]) throw DimensionError("index out of range");
    flat = flat * s[static_cast<std::size_t>(i)] + v;
    ++i;
  }
  return node_->values[static_cast<std::size_t>(flat)];
}

void Tensor::set_requires_grad(bool flag) {
  if (!node_->is_leaf) throw StateError("requires_grad can only be toggled on leaf tensors");
  node_->requires_grad = flag;
  if (!flag) node_->grad.clear();
}

void Tensor::zero_grad() {
  std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
}

namespace {

void topo_visit(const std::shared_ptr<detail::TensorNode>& node,
                std::unordered_set<detail::TensorNode*>& seen,
                std::vector<std::shared_ptr<detail::TensorNode>>& order) {
  if (!node->requires_grad || seen.count(node.get())) return;
  seen.insert(node.get());
  for (const auto& p : node->parents) topo_visit(p, seen, order);
  order.push_back(node);
}

}  // namespace

void Tensor::backward() const {
  if (!node_) throw StateError("backward on an undefined tensor");
  if (node_->is_leaf) throw StateError("backward before forward: no recorded computation");
  if (numel() != 1) throw ContractError("backward requires a scalar loss, shape is " + shape_str(shape()));
  if (!node_->requires_grad) return;  // nothing trainable upstream

  std::unordered_set<detail::TensorNode*> seen;
  std::vector<std::shared_ptr<detail::TensorNode>> order;
  topo_visit(node_, seen, order);

  // Leaves accumulate across calls; interior buffers are per-pass scratch and
  // must not carry gradient from a previous backward.
  for (const auto& n : order) {
    if (!n->is_leaf && !n->grad.empty()) std::fill(n->grad.begin(), n->grad.end(), 0.0);
  }

  node_->ensure_grad();
  node_->grad[0] = 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    detail::TensorNode& n = **it;
    if (n.backward_fn) n.backward_fn(n);
  }
}

Tensor make_op_node(Shape shape, std::vector<Tensor> parents,
                    std::function<void(detail::TensorNode&)> backward_fn) {
  auto node = std::make_shared<detail::TensorNode>();
  const int n = shape_numel(shape);
  node->shape = std::move(shape);
  node->values.assign(static_cast<std::size_t>(n), 0.0);
  node->is_leaf = false;
  bool needs_grad = false;
  node->parents.reserve(parents.size());
  for (const auto& p : parents) {
    needs_grad = needs_grad || p.requires_grad();
    node->parents.push_back(p.node());
  }
  node->requires_grad = needs_grad;
  if (needs_grad) node->backward_fn = std::move(backward_fn);
  return Tensor::wrap(std::move(node));
}

}  // namespace gocard
