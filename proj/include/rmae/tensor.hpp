#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "rmae/scalar.hpp"

namespace rmae::inline RMAE_ABI {

using Shape = std::vector<int>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct Node;
using NodePtr = std::shared_ptr<Node>;

// One vertex of the differentiation tape. `backward` reads this node's grad
// and accumulates into the grads of `inputs`.
struct Node {
  Shape shape;
  std::vector<Scalar> value;
  std::vector<Scalar> grad;
  bool requires_grad = false;
  std::vector<NodePtr> inputs;
  std::function<void(Node&)> backward;
  std::string name;

  std::vector<Scalar>& grad_buffer() {
    if (grad.size() != value.size()) grad.assign(value.size(), Scalar(0));
    return grad;
  }
  bool is_leaf() const { return !backward; }
};

// Handle to a tape node. Copies share storage.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(NodePtr node) : node_(std::move(node)) {}

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, Scalar v, bool requires_grad = false);
  static Tensor from(Shape shape, std::vector<Scalar> data,
                     bool requires_grad = false);
  static Tensor scalar(Scalar v, bool requires_grad = false);

  bool defined() const { return static_cast<bool>(node_); }
  const Shape& shape() const { return node_->shape; }
  int dim(int axis) const;
  int rank() const { return static_cast<int>(node_->shape.size()); }
  std::size_t numel() const { return node_->value.size(); }

  std::span<Scalar> data() { return node_->value; }
  std::span<const Scalar> data() const { return node_->value; }
  std::vector<Scalar> values() const { return node_->value; }
  Scalar item() const;
  Scalar operator[](std::size_t i) const { return node_->value[i]; }

  // Empty span until a backward pass reaches this tensor.
  std::span<const Scalar> grad() const { return node_->grad; }
  bool has_grad() const { return node_->grad.size() == node_->value.size(); }
  void zero_grad() { node_->grad.clear(); }
  std::vector<Scalar>& grad_buffer() { return node_->grad_buffer(); }

  bool requires_grad() const { return node_->requires_grad; }
  Tensor& set_requires_grad(bool on);
  const std::string& name() const { return node_->name; }
  Tensor& set_name(std::string n);

  // Same values, no tape history.
  Tensor detach() const;
  Tensor clone(bool requires_grad = false) const;

  Node* node() const { return node_.get(); }
  const NodePtr& node_ptr() const { return node_; }

 private:
  NodePtr node_;
};

// Gradient recording switch. Off inside a NoGradGuard; per thread.
bool grad_enabled();

class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

// Builds an op result. Inputs and the backward closure are only retained when
// recording is on and some input requires grad.
Tensor make_result(Shape shape, std::vector<Scalar> value,
                   std::initializer_list<Tensor> inputs,
                   std::function<void(Node&)> backward);
Tensor make_result(Shape shape, std::vector<Scalar> value,
                   const std::vector<Tensor>& inputs,
                   std::function<void(Node&)> backward);

// Reverse pass from a scalar. Leaf grads accumulate across calls;
// intermediate grads are reset at the start of each pass.
void backward(const Tensor& loss);

}  // namespace rmae::inline RMAE_ABI
