#include "rmae/tensor.hpp"

#include <sstream>
#include <unordered_set>

namespace rmae::inline RMAE_ABI {

namespace {
thread_local bool g_grad_enabled = true;
}

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (int d : shape) {
    if (d <= 0) throw ShapeError("non-positive dimension in " + shape_str(shape));
    n *= static_cast<std::size_t>(d);
  }
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ", ";
    os << shape[i];
  }
  os << ']';
  return os.str();
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  return full(std::move(shape), Scalar(0), requires_grad);
}

Tensor Tensor::full(Shape shape, Scalar v, bool requires_grad) {
  auto n = std::make_shared<Node>();
  n->value.assign(shape_numel(shape), v);
  n->shape = std::move(shape);
  n->requires_grad = requires_grad;
  return Tensor(std::move(n));
}

Tensor Tensor::from(Shape shape, std::vector<Scalar> data, bool requires_grad) {
  if (shape_numel(shape) != data.size()) {
    throw ShapeError("data length " + std::to_string(data.size()) +
                     " does not match shape " + shape_str(shape));
  }
  auto n = std::make_shared<Node>();
  n->shape = std::move(shape);
  n->value = std::move(data);
  n->requires_grad = requires_grad;
  return Tensor(std::move(n));
}

Tensor Tensor::scalar(Scalar v, bool requires_grad) {
  return from({1}, {v}, requires_grad);
}

int Tensor::dim(int axis) const {
  const int r = rank();
  if (axis < 0) axis += r;
  if (axis < 0 || axis >= r) {
    throw ShapeError("axis " + std::to_string(axis) + " out of range for " +
                     shape_str(shape()));
  }
  return node_->shape[static_cast<std::size_t>(axis)];
}

Scalar Tensor::item() const {
  if (numel() != 1) {
    throw ShapeError("item() on non-scalar tensor " + shape_str(shape()));
  }
  return node_->value[0];
}

Tensor& Tensor::set_requires_grad(bool on) {
  node_->requires_grad = on;
  return *this;
}

Tensor& Tensor::set_name(std::string n) {
  node_->name = std::move(n);
  return *this;
}

Tensor Tensor::detach() const { return from(shape(), node_->value, false); }

Tensor Tensor::clone(bool requires_grad) const {
  Tensor t = from(shape(), node_->value, requires_grad);
  t.set_name(name());
  return t;
}

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

namespace {

template <class Range>
Tensor make_result_impl(Shape shape, std::vector<Scalar> value,
                        const Range& inputs,
                        std::function<void(Node&)> backward) {
  auto n = std::make_shared<Node>();
  if (shape_numel(shape) != value.size()) {
    throw ShapeError("op produced " + std::to_string(value.size()) +
                     " values for shape " + shape_str(shape));
  }
  n->shape = std::move(shape);
  n->value = std::move(value);
  bool needs = false;
  if (g_grad_enabled) {
    for (const Tensor& t : inputs) needs = needs || t.requires_grad();
  }
  if (needs) {
    n->requires_grad = true;
    n->inputs.reserve(inputs.size());
    for (const Tensor& t : inputs) n->inputs.push_back(t.node_ptr());
    n->backward = std::move(backward);
  }
  return Tensor(std::move(n));
}

}  // namespace

Tensor make_result(Shape shape, std::vector<Scalar> value,
                   std::initializer_list<Tensor> inputs,
                   std::function<void(Node&)> backward) {
  return make_result_impl(std::move(shape), std::move(value), inputs,
                          std::move(backward));
}

Tensor make_result(Shape shape, std::vector<Scalar> value,
                   const std::vector<Tensor>& inputs,
                   std::function<void(Node&)> backward) {
  return make_result_impl(std::move(shape), std::move(value), inputs,
                          std::move(backward));
}

void backward(const Tensor& loss) {
  if (!loss.defined() || loss.numel() != 1) {
    throw ShapeError("backward() needs a scalar loss, got " +
                     (loss.defined() ? shape_str(loss.shape()) : "undefined"));
  }
  Node* root = loss.node();
  if (!root->requires_grad) return;

  // Iterative post-order DFS gives a topological order.
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<std::pair<Node*, std::size_t>> stack;
  stack.emplace_back(root, 0);
  seen.insert(root);
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->inputs.size()) {
      Node* child = node->inputs[next++].get();
      if (child->requires_grad && seen.insert(child).second) {
        stack.emplace_back(child, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  for (Node* n : order) {
    if (!n->is_leaf()) n->grad.assign(n->value.size(), Scalar(0));
  }
  root->grad_buffer()[0] += Scalar(1);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backward) {
      for (auto& in : n->inputs) {
        if (in->requires_grad) in->grad_buffer();
      }
      n->backward(*n);
    }
  }
}

}  // namespace rmae::inline RMAE_ABI
