#include "nn/tensor.hpp"

#include <sstream>
#include <unordered_set>

#include "common.hpp"

namespace planformer::nn {

namespace {
thread_local bool g_grad_enabled = true;
}

std::size_t numel(const Shape& shape) {
  std::size_t n = 1;
  for (const int d : shape) n *= static_cast<std::size_t>(d);
  return n;
}

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ']';
  return os.str();
}

Buffer& Node::grad_buffer() {
  if (grad.empty()) grad.assign(value.size(), 0.0);
  return grad;
}

Tensor Tensor::zeros(const Shape& shape, bool requires_grad) {
  return from(shape, std::vector<double>(numel(shape), 0.0), requires_grad);
}

Tensor Tensor::from(const Shape& shape, std::vector<double> values, bool requires_grad) {
  if (values.size() != numel(shape)) {
    fail(ErrorCode::kDimensionMismatch,
         "tensor of shape " + shape_string(shape) + " given " + std::to_string(values.size()) + " values");
  }
  auto node = std::make_shared<Node>();
  node->shape = shape;
  node->value.assign(values.begin(), values.end());
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}

std::span<const double> Tensor::grad() const {
  return node_->grad_buffer();
}

double Tensor::item() const {
  if (size() != 1) fail(ErrorCode::kDimensionMismatch, "item() on tensor of shape " + shape_string(shape()));
  return node_->value[0];
}

Tensor Tensor::clone(bool requires_grad) const {
  return from(shape(), std::vector<double>(node_->value.begin(), node_->value.end()), requires_grad);
}

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

bool grad_enabled() noexcept { return g_grad_enabled; }

Tensor make_result(Shape shape, Buffer value, std::vector<Tensor> inputs,
                   std::function<void(Node&)> backward) {
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->value = std::move(value);
  if (g_grad_enabled) {
    for (const auto& in : inputs) {
      if (in.requires_grad()) {
        node->requires_grad = true;
        break;
      }
    }
    if (node->requires_grad) {
      node->parents.reserve(inputs.size());
      for (auto& in : inputs) node->parents.push_back(in.ptr());
      node->backward = std::move(backward);
    }
  }
  return Tensor(std::move(node));
}

void backward(const Tensor& loss) {
  if (loss.size() != 1) fail(ErrorCode::kDimensionMismatch, "backward() requires a scalar loss");
  if (!loss.requires_grad()) return;

  // Iterative post-order DFS gives a topological order.
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<std::pair<Node*, std::size_t>> stack{{loss.node(), 0}};
  seen.insert(loss.node());
  while (!stack.empty()) {
    auto& [n, next] = stack.back();
    if (next < n->parents.size()) {
      Node* p = n->parents[next++].get();
      if (p->requires_grad && seen.insert(p).second) stack.emplace_back(p, 0);
    } else {
      order.push_back(n);
      stack.pop_back();
    }
  }
  loss.node()->grad_buffer()[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    n->grad_buffer();
    if (n->backward) n->backward(*n);
  }
}

}  // namespace planformer::nn
