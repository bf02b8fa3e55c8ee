#include "humor/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <unordered_set>

namespace humor::numcore {

namespace {
thread_local bool g_autograd_enabled = true;
}

bool autograd_enabled() { return g_autograd_enabled; }

GradGuard::GradGuard(bool enable) : previous_(g_autograd_enabled) {
  g_autograd_enabled = enable;
}

GradGuard::~GradGuard() { g_autograd_enabled = previous_; }

std::int64_t shape_size(const std::vector<int>& shape) {
  std::int64_t n = 1;
  for (int d : shape) n *= d;
  return n;
}

std::string shape_string(const std::vector<int>& shape) {
  std::string s = "(";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i > 0) s += ", ";
    s += std::to_string(shape[i]);
  }
  s += ")";
  return s;
}

Tensor Tensor::zeros(std::vector<int> shape, bool requires_grad) {
  return full(std::move(shape), 0.0, requires_grad);
}

Tensor Tensor::full(std::vector<int> shape, double value, bool requires_grad) {
  for (int d : shape) {
    if (d <= 0) throw std::invalid_argument("tensor dims must be positive, got " + shape_string(shape));
  }
  auto node = std::make_shared<detail::Node>();
  node->values.assign(static_cast<std::size_t>(shape_size(shape)), value);
  node->shape = std::move(shape);
  node->requires_grad = requires_grad;
  return wrap(std::move(node));
}

Tensor Tensor::from_values(std::vector<int> shape, std::vector<double> values,
                           bool requires_grad) {
  if (shape_size(shape) != static_cast<std::int64_t>(values.size())) {
    throw std::invalid_argument("value count " + std::to_string(values.size()) +
                                " does not match shape " + shape_string(shape));
  }
  auto node = std::make_shared<detail::Node>();
  node->shape = std::move(shape);
  node->values = std::move(values);
  node->requires_grad = requires_grad;
  return wrap(std::move(node));
}

Tensor Tensor::scalar(double value) { return from_values({1}, {value}); }

double Tensor::item() const {
  if (size() != 1) {
    throw std::runtime_error("item() requires a scalar tensor, got shape " +
                             shape_string(shape()));
  }
  return node_->values[0];
}

bool Tensor::all_finite() const {
  for (double v : node_->values) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

void backward(const Tensor& loss) {
  if (!loss.defined() || loss.size() != 1) {
    throw std::runtime_error("backward requires a scalar loss, got shape " +
                             (loss.defined() ? shape_string(loss.shape()) : std::string("<undefined>")));
  }

  // Iterative post-order DFS over parents; reversing it gives a valid
  // topological order for gradient propagation.
  std::vector<detail::Node*> order;
  std::unordered_set<detail::Node*> visited;
  struct Frame {
    detail::Node* node;
    std::size_t next_parent;
  };
  std::vector<Frame> stack;
  stack.push_back({loss.node(), 0});
  visited.insert(loss.node());
  while (!stack.empty()) {
    Frame& top = stack.back();
    if (top.next_parent < top.node->parents.size()) {
      detail::Node* parent = top.node->parents[top.next_parent].get();
      ++top.next_parent;
      if (parent->requires_grad && visited.insert(parent).second) {
        stack.push_back({parent, 0});
      }
    } else {
      order.push_back(top.node);
      stack.pop_back();
    }
  }

  for (detail::Node* n : order) n->ensure_grad();
  loss.node()->grad[0] += 1.0;

  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    detail::Node* n = *it;
    if (n->backprop) n->backprop(*n);
  }
}

}  // namespace humor::numcore
