#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <initializer_list>
#include <memory>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "rfidlab/error.hpp"

namespace rfidlab::ad {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

inline std::string shape_str(const Shape& shape) {
  std::ostringstream out;
  out << '(';
  for (std::size_t i = 0; i < shape.size(); ++i) out << (i ? "," : "") << shape[i];
  out << ')';
  return out.str();
}

template <class T>
struct Node {
  Shape shape;
  std::vector<T> data;
  std::vector<T> grad;  // lazily allocated, same length as data
  bool requires_grad = false;
  const char* op = "leaf";
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward;  // pushes this->grad into parents

  void ensure_grad() {
    if (grad.empty()) grad.assign(data.size(), T(0));
  }
};

namespace detail {
inline thread_local int no_grad_depth = 0;
}

// Disables tape recording on this thread for the guard's lifetime.
class NoGradGuard {
 public:
  NoGradGuard() { ++detail::no_grad_depth; }
  ~NoGradGuard() { --detail::no_grad_depth; }
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;
};

inline bool grad_enabled() { return detail::no_grad_depth == 0; }

// Thread-confined record of differentiable operations in creation order.
// Creation order is a topological order, so replaying it backwards visits
// every node after all of its consumers.
template <class T>
class Tape {
 public:
  static Tape& current() {
    static thread_local Tape tape;
    return tape;
  }

  void record(std::shared_ptr<Node<T>> node) { nodes_.push_back(std::move(node)); }
  std::size_t size() const { return nodes_.size(); }
  bool empty() const { return nodes_.empty(); }
  void clear() { nodes_.clear(); }

  // Reverse replay; each recorded node is visited exactly once.
  void replay_backward() {
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
      Node<T>& node = **it;
      if (!node.grad.empty() && node.backward) node.backward(node);
      std::vector<T>().swap(node.grad);
      node.parents.clear();
      node.backward = nullptr;
    }
  }

 private:
  std::vector<std::shared_ptr<Node<T>>> nodes_;
};

template <class T>
class Tensor {
 public:
  using value_type = T;

  Tensor() : node_(std::make_shared<Node<T>>()) { node_->shape = {0}; }

  Tensor(Shape shape, std::vector<T> data, bool requires_grad = false)
      : node_(std::make_shared<Node<T>>()) {
    require(shape_numel(shape) == data.size(), ErrorKind::shape_mismatch,
            "tensor shape " + shape_str(shape) + " holds " + std::to_string(shape_numel(shape)) +
                " values, got " + std::to_string(data.size()));
    node_->shape = std::move(shape);
    node_->data = std::move(data);
    node_->requires_grad = requires_grad;
  }

  static Tensor zeros(Shape shape, bool requires_grad = false) {
    return full(std::move(shape), T(0), requires_grad);
  }
  static Tensor full(Shape shape, T value, bool requires_grad = false) {
    std::size_t n = shape_numel(shape);
    return Tensor(std::move(shape), std::vector<T>(n, value), requires_grad);
  }
  static Tensor scalar(T value, bool requires_grad = false) {
    return Tensor(Shape{}, {value}, requires_grad);
  }

  const Shape& shape() const { return node_->shape; }
  std::size_t rank() const { return node_->shape.size(); }
  std::size_t dim(std::size_t i) const { return node_->shape.at(i); }
  std::size_t numel() const { return node_->data.size(); }

  std::span<const T> data() const { return node_->data; }
  // Direct write access; reserved for parameter updates and data builders.
  std::span<T> mutable_data() { return node_->data; }
  const std::vector<T>& values() const { return node_->data; }

  bool requires_grad() const { return node_->requires_grad; }
  void set_requires_grad(bool flag) { node_->requires_grad = flag; }
  bool has_grad() const { return !node_->grad.empty(); }
  std::span<const T> grad() const { return node_->grad; }
  std::span<T> mutable_grad() {
    node_->ensure_grad();
    return node_->grad;
  }
  void zero_grad() { node_->grad.clear(); }

  T item() const {
    require(numel() == 1, ErrorKind::shape_mismatch,
            "item() needs a single element, shape " + shape_str(shape()));
    return node_->data[0];
  }

  bool all_finite() const {
    for (T v : node_->data)
      if (!std::isfinite(v)) return false;
    return true;
  }
  void check_finite(const std::string& what) const {
    require(all_finite(), ErrorKind::non_finite, what + " contains NaN or Inf");
  }

  // Copy of the values, cut from any graph.
  Tensor detach(bool requires_grad = false) const {
    return Tensor(node_->shape, node_->data, requires_grad);
  }

  template <class U>
  Tensor<U> cast(bool requires_grad = false) const {
    std::vector<U> out(node_->data.begin(), node_->data.end());
    return Tensor<U>(node_->shape, std::move(out), requires_grad);
  }

  Node<T>& node() const { return *node_; }
  const std::shared_ptr<Node<T>>& node_ptr() const { return node_; }

  static Tensor from_node(std::shared_ptr<Node<T>> node) {
    Tensor t;
    t.node_ = std::move(node);
    return t;
  }

 private:
  std::shared_ptr<Node<T>> node_;
};

// Builds an op result. When any input participates in differentiation (and
// recording is enabled), the node keeps its inputs and joins the tape.
template <class T>
Tensor<T> make_result(const char* op, Shape shape, std::vector<T> data,
                      std::initializer_list<Tensor<T>> inputs,
                      std::function<void(Node<T>&)> backward) {
  auto node = std::make_shared<Node<T>>();
  node->op = op;
  node->shape = std::move(shape);
  node->data = std::move(data);
  bool tracked = false;
  if (grad_enabled()) {
    for (const auto& in : inputs) tracked = tracked || in.requires_grad();
  }
  if (tracked) {
    node->requires_grad = true;
    for (const auto& in : inputs) node->parents.push_back(in.node_ptr());
    node->backward = std::move(backward);
    Tape<T>::current().record(node);
  }
  return Tensor<T>::from_node(std::move(node));
}

// Reverse pass from a scalar loss. Populates grad on every reachable leaf that
// requires it, then discards the tape.
template <class T>
void backward(const Tensor<T>& loss) {
  require(loss.numel() == 1, ErrorKind::shape_mismatch,
          "backward needs a scalar loss, got shape " + shape_str(loss.shape()));
  auto& tape = Tape<T>::current();
  require(!tape.empty() && loss.requires_grad(), ErrorKind::invalid_argument,
          "backward called with an empty tape (loss does not depend on any tracked tensor)");
  Node<T>& root = loss.node();
  root.ensure_grad();
  root.grad[0] += T(1);
  tape.replay_backward();
  tape.clear();
}

}  // namespace rfidlab::ad
