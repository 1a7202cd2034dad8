#include "vgdp/nn/tensor.hpp"

#include <cmath>
#include <cstdio>
#include <unordered_set>

namespace vgdp::nn {

int numel(const Shape& s) {
  int n = 1;
  for (int d : s) {
    if (d < 0) throw ShapeError("negative dimension in shape " + shape_str(s));
    n *= d;
  }
  return n;
}

std::string shape_str(const Shape& s) {
  std::string out = "[";
  for (size_t i = 0; i < s.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(s[i]);
  }
  return out + "]";
}

void ensure_finite(const char* where, const std::vector<float>& v) {
  for (size_t i = 0; i < v.size(); ++i) {
    if (!std::isfinite(v[i])) {
      throw NumericalError(std::string("non-finite value in ") + where + " at index " +
                           std::to_string(i));
    }
  }
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  int n = numel(shape);
  auto node = std::make_shared<TensorNode>();
  node->shape = std::move(shape);
  node->value.assign(static_cast<size_t>(n), 0.0f);
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}

Tensor Tensor::full(Shape shape, float value, bool requires_grad) {
  Tensor t = zeros(std::move(shape), requires_grad);
  for (auto& x : t.data()) x = value;
  return t;
}

Tensor Tensor::from(std::vector<float> data, Shape shape, bool requires_grad) {
  if (static_cast<int>(data.size()) != numel(shape)) {
    throw ShapeError("Tensor::from: data length " + std::to_string(data.size()) +
                     " does not match shape " + shape_str(shape));
  }
  auto node = std::make_shared<TensorNode>();
  node->shape = std::move(shape);
  node->value = std::move(data);
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}

Tensor Tensor::scalar(float value, bool requires_grad) {
  return from({value}, {1}, requires_grad);
}

const Shape& Tensor::shape() const {
  if (!node_) throw ShapeError("shape() on undefined tensor");
  return node_->shape;
}

int Tensor::size() const { return static_cast<int>(node_->value.size()); }

std::vector<float>& Tensor::data() { return node_->value; }
const std::vector<float>& Tensor::data() const { return node_->value; }

float Tensor::item() const {
  if (size() != 1) throw ShapeError("item() on tensor of shape " + shape_str(shape()));
  return node_->value[0];
}

bool Tensor::requires_grad() const { return node_ && node_->requires_grad; }
bool Tensor::has_grad() const { return node_ && !node_->grad.empty(); }

std::vector<float>& Tensor::grad() { return node_->ensure_grad(); }

const std::vector<float>& Tensor::grad() const {
  const_cast<TensorNode*>(node_.get())->ensure_grad();
  return node_->grad;
}

void Tensor::zero_grad() {
  if (node_ && !node_->grad.empty()) node_->grad.assign(node_->value.size(), 0.0f);
}

Tensor Tensor::make_op(const char* name, Shape shape, std::vector<float> value,
                       std::vector<Tensor> parents, std::function<void(TensorNode&)> backprop) {
  ensure_finite(name, value);
  auto node = std::make_shared<TensorNode>();
  node->op_name = name;
  node->shape = std::move(shape);
  node->value = std::move(value);
  bool needs = false;
  for (const auto& p : parents) needs = needs || p.requires_grad();
  node->requires_grad = needs;
  if (needs) {
    node->parents = std::move(parents);
    node->backprop = std::move(backprop);
  }
  return Tensor(std::move(node));
}

namespace {

// Iterative post-order over the parent DAG; result is a valid topological
// order (parents before children).
void topo_collect(TensorNode* root, std::vector<TensorNode*>& order) {
  std::unordered_set<TensorNode*> visited;
  std::vector<std::pair<TensorNode*, size_t>> stack;
  stack.emplace_back(root, 0);
  visited.insert(root);
  while (!stack.empty()) {
    auto& [node, idx] = stack.back();
    if (idx < node->parents.size()) {
      TensorNode* p = node->parents[idx].defined() ? &node->parents[idx].node() : nullptr;
      ++idx;
      if (p && p->requires_grad && !visited.count(p)) {
        visited.insert(p);
        stack.emplace_back(p, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
}

}  // namespace

void Tensor::backward() {
  if (size() != 1) {
    throw ShapeError("backward() without explicit gradient requires a scalar, got shape " +
                     shape_str(shape()));
  }
  backward({1.0f});
}

void Tensor::backward(const std::vector<float>& output_grad) {
  if (!node_) throw ShapeError("backward() on undefined tensor");
  if (!node_->backprop) {
    throw NumericalError("backward before forward: tensor has no recorded operations");
  }
  if (output_grad.size() != node_->value.size()) {
    throw ShapeError("backward: output gradient length " + std::to_string(output_grad.size()) +
                     " does not match tensor shape " + shape_str(shape()));
  }
  auto& g = node_->ensure_grad();
  for (size_t i = 0; i < g.size(); ++i) g[i] += output_grad[i];

  std::vector<TensorNode*> order;
  topo_collect(node_.get(), order);
  // order is parents-first; traverse children-first for the reverse pass.
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    TensorNode* n = *it;
    if (n->backprop) n->backprop(*n);
  }
  for (TensorNode* n : order) {
    if (!n->grad.empty()) ensure_finite(n->op_name, n->grad);
  }
}

}  // namespace vgdp::nn
