#pragma once

#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "vgdp/common.hpp"

namespace vgdp::nn {

using Shape = std::vector<int>;

int numel(const Shape& s);
std::string shape_str(const Shape& s);

// Throws NumericalError if any value is NaN or Inf.
void ensure_finite(const char* where, const std::vector<float>& v);

struct TensorNode;

// Dense float32 tensor with optional reverse-mode gradient. Value semantics on
// the handle; the storage and graph edges live in a shared node. Ops are
// define-by-run: composing tensor functions records the graph needed by
// backward(). A node only records graph edges when gradients can flow to it,
// so eval-mode forward passes carry no tape.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, float value, bool requires_grad = false);
  static Tensor from(std::vector<float> data, Shape shape, bool requires_grad = false);
  static Tensor scalar(float value, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  int ndim() const { return static_cast<int>(shape().size()); }
  int size() const;
  int dim(int i) const { return shape()[static_cast<size_t>(i)]; }

  std::vector<float>& data();
  const std::vector<float>& data() const;
  float item() const;

  bool requires_grad() const;
  bool has_grad() const;
  // Allocated (zero-filled) on first access.
  std::vector<float>& grad();
  const std::vector<float>& grad() const;
  void zero_grad();

  // Reverse pass from this tensor. The scalar overload seeds with 1. Gradients
  // accumulate additively into every reachable node that requires them;
  // calling backward twice without zero_grad doubles leaf gradients.
  void backward();
  void backward(const std::vector<float>& output_grad);

  // Graph construction (used by ops.cpp).
  static Tensor make_op(const char* name, Shape shape, std::vector<float> value,
                        std::vector<Tensor> parents, std::function<void(TensorNode&)> backprop);
  TensorNode& node() { return *node_; }
  const TensorNode& node() const { return *node_; }

 private:
  explicit Tensor(std::shared_ptr<TensorNode> n) : node_(std::move(n)) {}
  std::shared_ptr<TensorNode> node_;
};

struct TensorNode {
  const char* op_name = "leaf";
  Shape shape;
  std::vector<float> value;
  std::vector<float> grad;  // empty until touched
  bool requires_grad = false;
  std::vector<Tensor> parents;
  std::function<void(TensorNode&)> backprop;  // reads this->grad, accumulates into parents

  std::vector<float>& ensure_grad() {
    if (grad.empty()) grad.assign(value.size(), 0.0f);
    return grad;
  }
};

// Named parameter collection. std::map keeps iteration order stable, which the
// optimizer and checkpoint writer rely on for determinism.
using ParamMap = std::map<std::string, Tensor>;

}  // namespace vgdp::nn
