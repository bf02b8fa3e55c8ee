#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace humor::numcore {

namespace detail {

struct Node {
  std::vector<int> shape;
  std::vector<double> values;
  std::vector<double> grad;  // empty until backward touches this node
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  // Reads this node's grad and accumulates into the parents' grads.
  std::function<void(Node&)> backprop;

  std::int64_t size() const { return static_cast<std::int64_t>(values.size()); }
  void ensure_grad() {
    if (grad.size() != values.size()) grad.assign(values.size(), 0.0);
  }
};

}  // namespace detail

// Dense row-major float64 tensor. Copying a Tensor copies a handle to the
// shared storage; ops produce fresh nodes that record how to push gradients
// back to their parents. A graph built from these ops is single-threaded;
// untracked tensors are immutable in practice and safe to share across
// threads.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(std::vector<int> shape, bool requires_grad = false);
  static Tensor full(std::vector<int> shape, double value, bool requires_grad = false);
  static Tensor from_values(std::vector<int> shape, std::vector<double> values,
                            bool requires_grad = false);
  static Tensor scalar(double value);

  bool defined() const { return node_ != nullptr; }
  const std::vector<int>& shape() const { return node_->shape; }
  int rank() const { return static_cast<int>(node_->shape.size()); }
  int dim(int i) const { return node_->shape[static_cast<std::size_t>(i)]; }
  std::int64_t size() const { return node_->size(); }
  // Rank-2 conveniences.
  int rows() const { return dim(0); }
  int cols() const { return dim(1); }

  std::span<const double> values() const {
    return {node_->values.data(), node_->values.size()};
  }
  const double* data() const { return node_->values.data(); }
  // Mutating values is only meaningful for leaf tensors (parameters, inputs).
  double* data() { return node_->values.data(); }
  double item() const;

  bool requires_grad() const { return node_->requires_grad; }
  bool has_grad() const { return node_->grad.size() == node_->values.size(); }
  std::span<const double> grad() const {
    return {node_->grad.data(), node_->grad.size()};
  }
  std::span<double> grad_mutable() {
    node_->ensure_grad();
    return {node_->grad.data(), node_->grad.size()};
  }
  void zero_grad() {
    if (!node_->grad.empty()) std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
  }

  bool all_finite() const;

  detail::Node* node() const { return node_.get(); }
  const std::shared_ptr<detail::Node>& node_ptr() const { return node_; }

  static Tensor wrap(std::shared_ptr<detail::Node> node) {
    Tensor t;
    t.node_ = std::move(node);
    return t;
  }

 private:
  std::shared_ptr<detail::Node> node_;
};

// Gradient recording is on by default; evaluation paths switch it off so
// forward passes do not build graphs.
bool autograd_enabled();

class GradGuard {
 public:
  explicit GradGuard(bool enable);
  ~GradGuard();
  GradGuard(const GradGuard&) = delete;
  GradGuard& operator=(const GradGuard&) = delete;

 private:
  bool previous_;
};

// Reverse-mode accumulation from a scalar loss. Seeds dloss/dloss = 1 and
// runs every recorded backprop in reverse topological order. Gradients
// accumulate (+=) into each requires_grad node reachable from the loss.
void backward(const Tensor& loss);

std::string shape_string(const std::vector<int>& shape);
std::int64_t shape_size(const std::vector<int>& shape);

}  // namespace humor::numcore
