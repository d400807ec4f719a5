// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace ctkd::ad {

using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape& shape);
std::string to_string(const Shape& shape);

struct Node;

/// Propagates the node's own gradient into its parents' gradients.
using BackwardFn = std::function<void(Node& self)>;

/// One vertex of the computation graph. Leaves have no backward rule.
struct Node {
  Shape shape;
  std::vector<double> values;
  std::vector<double> grad;  // empty until a backward pass reaches the node
  bool requires_grad = false;
  std::string op = "leaf";
  std::vector<std::shared_ptr<Node>> parents;
  BackwardFn backward;

  /// Returns the gradient buffer, allocating zeros on first use.
  std::vector<double>& grad_buffer();
};

/// Handle to a dense row-major f64 array living in a computation graph.
///
/// Copies share the underlying node, so updating the values of a parameter
/// through one handle is visible through every other. Scalars have shape {1}.
class Tensor {
public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor from(Shape shape, std::vector<double> values, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  /// Builds an interior node. requires_grad is inherited from the parents;
  /// when no parent requires a gradient the parents and rule are dropped.
  static Tensor make_result(Shape shape, std::vector<double> values, std::string op,
                            std::vector<Tensor> parents, BackwardFn backward);

  bool defined() const noexcept { return node_ != nullptr; }
  const Shape& shape() const;
  std::size_t numel() const;
  std::size_t rank() const { return shape().size(); }
  /// Rows of a 2-d tensor; 1 for rank-1 tensors.
  std::size_t rows() const;
  /// Columns of a 2-d tensor; the length of rank-1 tensors.
  std::size_t cols() const;
  bool is_scalar() const { return numel() == 1; }

  std::span<const double> values() const;
  /// Mutable access for optimizers and initializers. Only meaningful on
  /// leaves; mutating an interior node does not re-run its producers.
  std::span<double> mutable_values();
  double item() const;
  double at(std::size_t i) const { return values()[i]; }
  double at(std::size_t r, std::size_t c) const { return values()[r * cols() + c]; }

  bool requires_grad() const;
  Tensor& set_requires_grad(bool flag);
  bool is_leaf() const;
  const std::string& op() const;

  bool has_grad() const;
  std::span<const double> grad() const;
  void zero_grad();

  /// Reverse-mode sweep from this scalar. Leaf gradients accumulate across
  /// calls until zero_grad(); interior gradients are recomputed each call.
  void backward() const;

  /// Same values, cut from the graph.
  Tensor detach() const;

  Node& node() const;

private:
  explicit Tensor(std::shared_ptr<Node> node) : node_(std::move(node)) {}
  std::shared_ptr<Node> node_;
};

/// Clears gradients of every tensor in the list.
void zero_grad(std::span<Tensor> tensors);

}  // namespace ctkd::ad
