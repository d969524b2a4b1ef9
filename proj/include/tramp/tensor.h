#pragma once

// Dense double-precision tensors with tape-free reverse-mode differentiation.
//
// Every op returns a DiffTensor whose node remembers its parents and a
// backward closure. Calling backward() on a scalar result walks the graph in
// reverse topological order and accumulates gradients into every node that
// requires them. Graphs are owned by the tensors that reference them, so a
// forward pass confined to one thread builds an independent graph.

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace tramp {

using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape& shape);
std::string shape_str(const Shape& shape);

struct Node {
  Shape shape;
  std::vector<double> value;
  // Empty until a backward pass touches the node.
  std::vector<double> grad;
  bool requires_grad = false;
  const char* op = "leaf";
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward;

  // Returns grad, allocating zeros on first use.
  std::vector<double>& grad_buffer();
};

class DiffTensor {
 public:
  DiffTensor() = default;
  explicit DiffTensor(std::shared_ptr<Node> node) : node_(std::move(node)) {}

  static DiffTensor constant(Shape shape, std::vector<double> values);
  static DiffTensor zeros(Shape shape);
  static DiffTensor full(Shape shape, double v);
  static DiffTensor scalar(double v);
  // Leaf that participates in differentiation.
  static DiffTensor leaf(Shape shape, std::vector<double> values);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  std::size_t dim(std::size_t i) const { return node_->shape.at(i); }
  std::size_t rank() const { return node_->shape.size(); }
  std::size_t size() const { return node_->value.size(); }

  std::span<const double> values() const { return node_->value; }
  std::span<double> mutable_values() { return node_->value; }
  double item() const;
  double at(std::size_t flat) const { return node_->value.at(flat); }

  bool has_grad() const { return !node_->grad.empty(); }
  std::span<const double> grad() const { return node_->grad; }
  void zero_grad() { node_->grad.clear(); }
  bool requires_grad() const { return node_->requires_grad; }

  // Seeds d(self)/d(self) = 1 and propagates; self must hold one element.
  void backward() const;
  // Propagates an explicit upstream gradient of the same shape as self.
  void backward(std::span<const double> seed) const;

  const std::shared_ptr<Node>& node() const { return node_; }

 private:
  std::shared_ptr<Node> node_;
};

// Checked mode makes every op verify that its output is finite.
void set_checked_mode(bool on);
bool checked_mode();

// Builds an op result. The backward closure receives the result node; its
// grad is populated, and it must accumulate into the parents' grad_buffer().
DiffTensor make_op(const char* op, Shape shape, std::vector<double> value,
                   std::vector<DiffTensor> parents,
                   std::function<void(Node&)> backward);

// -- shape ------------------------------------------------------------------
DiffTensor reshape(const DiffTensor& x, Shape shape);
DiffTensor transpose_last2(const DiffTensor& x);
// Views x as rows of `row_size` and returns rows[indices[i]] in order, shaped
// as out_shape. Backward scatter-adds, so repeated indices accumulate.
DiffTensor gather_rows(const DiffTensor& x, std::size_t row_size,
                       std::span<const std::size_t> indices, Shape out_shape);
DiffTensor slice_lastdim(const DiffTensor& x, std::size_t begin,
                         std::size_t len);
DiffTensor concat_lastdim(const std::vector<DiffTensor>& parts);

// -- elementwise --------------------------------------------------------------
// Binary ops broadcast when one shape is a suffix of the other.
DiffTensor add(const DiffTensor& a, const DiffTensor& b);
DiffTensor sub(const DiffTensor& a, const DiffTensor& b);
DiffTensor mul(const DiffTensor& a, const DiffTensor& b);
DiffTensor scale(const DiffTensor& x, double c);
DiffTensor square(const DiffTensor& x);
DiffTensor gelu(const DiffTensor& x);

// -- reductions ---------------------------------------------------------------
DiffTensor sum(const DiffTensor& x);
DiffTensor mean(const DiffTensor& x);
DiffTensor sum_squares(const DiffTensor& x);
// Mean over one axis; the axis is removed from the shape.
DiffTensor mean_axis(const DiffTensor& x, std::size_t axis);

// -- linear algebra -----------------------------------------------------------
// [..., m, k] x [..., k, n]; batch dimensions broadcast numpy-style.
DiffTensor matmul(const DiffTensor& a, const DiffTensor& b);

// -- normalisation ------------------------------------------------------------
DiffTensor softmax_lastdim(const DiffTensor& x);
DiffTensor layer_norm(const DiffTensor& x, const DiffTensor& gain,
                      const DiffTensor& bias, double eps = 1e-5);

// x @ w + b over the last axis of x.
DiffTensor linear(const DiffTensor& x, const DiffTensor& w,
                  const DiffTensor& b);

}  // namespace tramp
