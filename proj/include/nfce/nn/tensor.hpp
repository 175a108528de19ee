#pragma once

// Minimal reverse-mode automatic differentiation over Eigen matrices.
//
// Feature maps are stored as a (channels × batch·height·width) matrix whose
// column index is b·H·W + y·W + x. Vectors per sample use height = width = 1.

#include <functional>
#include <memory>
#include <string>
#include <unordered_set>
#include <vector>

#include <Eigen/Dense>

#include "nfce/types.hpp"

namespace nfce::nn {

template <class T>
using Matrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;

struct Shape {
  int batch = 1;
  int channels = 1;
  int height = 1;
  int width = 1;

  int spatial() const { return height * width; }
  Eigen::Index columns() const { return Eigen::Index(batch) * height * width; }
  bool operator==(const Shape&) const = default;
  std::string str() const {
    return std::to_string(batch) + "x" + std::to_string(channels) + "x" + std::to_string(height) +
           "x" + std::to_string(width);
  }
};

/// Gradient recording switch; disabled inside a NoGradGuard scope.
inline bool& grad_enabled() {
  thread_local bool enabled = true;
  return enabled;
}

class NoGradGuard {
 public:
  NoGradGuard() : prev_(grad_enabled()) { grad_enabled() = false; }
  ~NoGradGuard() { grad_enabled() = prev_; }
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool prev_;
};

template <class T>
struct Node {
  Matrix<T> value;
  Matrix<T> grad;
  Shape shape;
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void()> backward_fn;

  void accumulate(const Matrix<T>& g) {
    if (grad.size() == 0)
      grad = g;
    else
      grad += g;
  }
  Matrix<T>& grad_buffer() {
    if (grad.size() == 0) grad = Matrix<T>::Zero(value.rows(), value.cols());
    return grad;
  }
};

template <class T>
class Tensor {
 public:
  Tensor() = default;
  Tensor(Matrix<T> value, Shape shape, bool requires_grad = false)
      : node_(std::make_shared<Node<T>>()) {
    detail::require_shape(value.rows() == shape.channels && value.cols() == shape.columns(),
                          "tensor value does not match shape " + shape.str());
    node_->value = std::move(value);
    node_->shape = shape;
    node_->requires_grad = requires_grad;
  }

  static Tensor vector(Matrix<T> value, bool requires_grad = false) {
    Shape s{static_cast<int>(value.cols()), static_cast<int>(value.rows()), 1, 1};
    return Tensor(std::move(value), s, requires_grad);
  }

  const Matrix<T>& value() const { return node_->value; }
  Matrix<T>& mutable_value() { return node_->value; }
  const Matrix<T>& grad() const { return node_->grad; }
  Matrix<T>& mutable_grad() { return node_->grad; }
  const Shape& shape() const { return node_->shape; }
  bool requires_grad() const { return node_ && node_->requires_grad; }
  void zero_grad() { node_->grad.resize(0, 0); }
  bool defined() const { return static_cast<bool>(node_); }

  std::shared_ptr<Node<T>> node() const { return node_; }

  /// Backpropagates from a scalar (1×1) tensor.
  void backward() const;

 private:
  std::shared_ptr<Node<T>> node_;
};

/// Creates the output node of an operation and wires it into the graph when
/// gradient recording is active and any input requires a gradient.
template <class T>
Tensor<T> make_result(Matrix<T> value, Shape shape, std::vector<Tensor<T>> inputs,
                      const std::function<std::function<void()>(Node<T>*)>& make_backward) {
  Tensor<T> out(std::move(value), shape, false);
  if (!grad_enabled()) return out;
  bool any = false;
  for (const auto& in : inputs) any = any || in.requires_grad();
  if (!any) return out;
  auto node = out.node();
  node->requires_grad = true;
  for (const auto& in : inputs) node->parents.push_back(in.node());
  node->backward_fn = make_backward(node.get());
  return out;
}

template <class T>
void Tensor<T>::backward() const {
  detail::require(node_->value.size() == 1, "backward() needs a scalar tensor");
  std::vector<Node<T>*> order;
  std::unordered_set<Node<T>*> seen;
  // Iterative post-order DFS; graphs of deep networks overflow recursion otherwise.
  std::vector<std::pair<Node<T>*, std::size_t>> stack{{node_.get(), 0}};
  seen.insert(node_.get());
  while (!stack.empty()) {
    auto& [n, idx] = stack.back();
    if (idx < n->parents.size()) {
      Node<T>* p = n->parents[idx++].get();
      if (p->requires_grad && !seen.count(p)) {
        seen.insert(p);
        stack.push_back({p, 0});
      }
    } else {
      order.push_back(n);
      stack.pop_back();
    }
  }
  node_->grad = Matrix<T>::Ones(1, 1);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node<T>* n = *it;
    if (n->backward_fn && n->grad.size() != 0) n->backward_fn();
  }
  // Release intermediates: keep only leaf gradients.
  for (Node<T>* n : order) {
    if (n->backward_fn) {
      n->grad.resize(0, 0);
      n->backward_fn = nullptr;
      n->parents.clear();
    }
  }
}

}  // namespace nfce::nn
