#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "zoomnet/error.hpp"

namespace zoomnet {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

/// One vertex of the computation graph. Parents are the operation's inputs;
/// `backward` reads this node's grad and accumulates into the parents' grads.
template <typename T>
struct TensorNode {
  Shape shape;
  std::vector<T> value;
  std::vector<T> grad;
  bool requires_grad = false;
  const char* op = "leaf";
  std::vector<std::shared_ptr<TensorNode>> parents;
  std::function<void(TensorNode&)> backward;

  std::vector<T>& ensure_grad() {
    if (grad.size() != value.size()) grad.assign(value.size(), T(0));
    return grad;
  }
};

/// Dense row-major array with optional gradient tracking.
///
/// A Tensor is a handle: copies share storage and graph position, the way
/// parameters are shared between the model and the optimizer. Use `detach()`
/// for an independent copy of the values.
template <typename T>
class Tensor {
 public:
  using Node = TensorNode<T>;

  Tensor() = default;
  explicit Tensor(Shape shape, T fill = T(0), bool requires_grad = false);
  Tensor(Shape shape, std::vector<T> values, bool requires_grad = false);

  static Tensor scalar(T v, bool requires_grad = false) { return Tensor(Shape{}, v, requires_grad); }

  /// Creates an interior graph node. Gradient tracking is enabled iff any
  /// parent tracks gradients; otherwise the backward closure is dropped.
  static Tensor from_op(const char* op, Shape shape, std::vector<T> values,
                        std::vector<Tensor> parents, std::function<void(Node&)> backward);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  std::size_t dim(std::size_t axis) const;
  std::size_t rank() const { return node_->shape.size(); }
  std::size_t numel() const { return node_->value.size(); }

  std::span<T> values() { return node_->value; }
  std::span<const T> values() const { return node_->value; }
  T& operator[](std::size_t i) { return node_->value[i]; }
  T operator[](std::size_t i) const { return node_->value[i]; }
  T item() const;

  bool requires_grad() const { return node_->requires_grad; }
  void set_requires_grad(bool on) { node_->requires_grad = on; }
  bool has_grad() const { return node_->grad.size() == node_->value.size() && !node_->value.empty(); }
  std::span<T> grad() { return node_->ensure_grad(); }
  std::span<const T> grad() const { return node_->ensure_grad(); }
  void zero_grad() { std::fill(node_->grad.begin(), node_->grad.end(), T(0)); }
  void clear_grad() { node_->grad.clear(); }

  /// Same values, fresh leaf without graph history.
  Tensor detach() const;
  /// Same values viewed under another shape of equal size; differentiable.
  Tensor reshape(Shape shape) const;

  template <typename U>
  Tensor<U> cast() const;

  const std::shared_ptr<Node>& node() const { return node_; }

 private:
  std::shared_ptr<Node> node_;
};

/// Runs reverse-mode differentiation from a scalar loss. Interior gradients
/// are recomputed on every call; leaf gradients accumulate until zeroed.
template <typename T>
void backward(const Tensor<T>& loss);

/// Number of nodes reachable from `root`, including itself.
template <typename T>
std::size_t graph_size(const Tensor<T>& root);

}  // namespace zoomnet
