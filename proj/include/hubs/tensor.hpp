#pragma once

// Dense float64 tensors with reverse-mode automatic differentiation.
//
// Tensors are rank 1 ([n], treated as an n x 1 column) or rank 2 ([r, c],
// row-major). Every operation creates a fresh graph node, so the graph is
// rebuilt on each forward pass and may differ in length between samples.
// Leaves created with requires_grad accumulate gradients across backward()
// calls until zero_grad() is called.

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace hubs {

using Shape = std::vector<std::size_t>;

std::string shape_to_string(const Shape& shape);

namespace detail {
struct Node;
}

// Handed to an operation's backward function. input_grads[i] is empty when
// input i does not require a gradient.
struct GradContext {
  std::span<const double> output;
  std::span<const double> output_grad;
  std::vector<std::span<double>> input_grads;
};

using GradFn = std::function<void(const GradContext&)>;

class Tensor;
Tensor make_op(Shape shape, std::vector<double> values, std::vector<Tensor> inputs, GradFn fn);

class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor filled(Shape shape, double value, bool requires_grad = false);
  static Tensor from_values(Shape shape, std::vector<double> values, bool requires_grad = false);
  // Rank-1 tensor [values.size()].
  static Tensor vector(std::vector<double> values, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  std::size_t rows() const;
  std::size_t cols() const;
  std::size_t size() const;

  std::span<const double> data() const;
  // Writable view of the values. Only meaningful on leaves (parameters);
  // mutating an interior node does not re-run the graph.
  std::span<double> mutable_data();
  double item() const;
  double at(std::size_t row, std::size_t col = 0) const;

  bool requires_grad() const;
  bool is_leaf() const;
  bool has_grad() const;
  // Empty span when no gradient has been accumulated.
  std::span<const double> grad() const;
  std::span<double> mutable_grad();
  void zero_grad();

  // Seeds d(this)/d(this) = 1 and propagates to every reachable node.
  // Throws ContractError unless this tensor holds exactly one element.
  void backward() const;

  // Same values, cut from the graph, no gradient.
  Tensor detach() const;

  std::shared_ptr<detail::Node> node() const { return node_; }

 private:
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}
  std::shared_ptr<detail::Node> node_;

  friend Tensor make_op(Shape, std::vector<double>, std::vector<Tensor>, GradFn);
};

// Builds a graph node from precomputed values. The backward function must
// accumulate (+=) into the input gradients. When no input requires a
// gradient, the result is a constant and fn is dropped.
Tensor make_op(Shape shape, std::vector<double> values, std::vector<Tensor> inputs, GradFn fn);

// ---- linear algebra -------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b);

// ---- elementwise ----------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor hadamard(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);
// x [r, c] plus bias [r] broadcast across columns.
Tensor add_bias(const Tensor& x, const Tensor& bias);
// Elementwise sum of equally shaped tensors.
Tensor sum_over(const std::vector<Tensor>& parts);

Tensor sigmoid(const Tensor& x);
Tensor tanh_op(const Tensor& x);
// x where x >= 0, slope * x elsewhere; slope is a single learnable scalar.
Tensor prelu(const Tensor& x, const Tensor& slope);
// Column-wise softmax with max subtraction. A rank-1 input is one column.
Tensor softmax(const Tensor& x);

// ---- structure ------------------------------------------------------------

// Stacks along axis 0 (rows). All parts must share the column count.
Tensor concat(const std::vector<Tensor>& parts);
// Stacks along axis 1 (columns). All parts must share the row count.
Tensor concat_cols(const std::vector<Tensor>& parts);
Tensor slice_rows(const Tensor& x, std::size_t begin, std::size_t count);
Tensor slice_cols(const Tensor& x, std::size_t begin, std::size_t count);
Tensor reshape(const Tensor& x, Shape shape);
// [r, c] -> [r, times * c], block k holding a copy of x.
Tensor tile_cols(const Tensor& x, std::size_t times);

// ---- reductions -----------------------------------------------------------

// Sum of all elements, shape [1].
Tensor sum(const Tensor& x);
// values [d, n * b], weights [n, b] -> [d, b]:
//   out[:, j] = sum_k weights[k, j] * values[:, k * b + j]
Tensor weighted_block_sum(const Tensor& values, const Tensor& weights);

// A parameter and the name it is saved, checked and reported under.
struct NamedTensor {
  std::string name;
  Tensor tensor;
};

}  // namespace hubs
