#include "hubs/tensor.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <sstream>
#include <unordered_set>

#include "hubs/errors.hpp"

namespace hubs {

namespace detail {

struct Node {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;
  std::vector<std::shared_ptr<Node>> inputs;
  GradFn backward_fn;
  bool requires_grad = false;

  bool leaf() const { return inputs.empty(); }
  void ensure_grad() {
    if (grad.size() != value.size()) grad.assign(value.size(), 0.0);
  }
};

}  // namespace detail

namespace {

using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMajor>;
using MutMap = Eigen::Map<RowMajor>;

std::size_t product(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

void validate_shape(const Shape& shape) {
  if (shape.empty() || shape.size() > 2) {
    throw DimensionError("tensor rank must be 1 or 2, got shape " + shape_to_string(shape));
  }
  for (auto d : shape) {
    if (d == 0) throw DimensionError("tensor dimensions must be positive, got " + shape_to_string(shape));
  }
}

std::size_t rows_of(const Shape& s) { return s[0]; }
std::size_t cols_of(const Shape& s) { return s.size() == 2 ? s[1] : 1; }

bool same_matrix(const Tensor& a, const Tensor& b) { return a.rows() == b.rows() && a.cols() == b.cols(); }

void require_same(const Tensor& a, const Tensor& b, const char* op) {
  if (!same_matrix(a, b)) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_to_string(a.shape()) + " vs " +
                         shape_to_string(b.shape()));
  }
}

void require_finite(std::span<const double> values, const char* op) {
  for (double v : values) {
    if (!std::isfinite(v)) throw NumericError(std::string(op) + ": non-finite input");
  }
}

void require_defined(const Tensor& t, const char* op) {
  if (!t.defined()) throw ContractError(std::string(op) + ": undefined tensor");
}

}  // namespace

std::string shape_to_string(const Shape& shape) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out << ", ";
    out << shape[i];
  }
  out << ']';
  return out.str();
}

// ---- Tensor ---------------------------------------------------------------

Tensor Tensor::from_values(Shape shape, std::vector<double> values, bool requires_grad) {
  validate_shape(shape);
  if (product(shape) != values.size()) {
    throw DimensionError("tensor of shape " + shape_to_string(shape) + " cannot hold " +
                         std::to_string(values.size()) + " values");
  }
  auto node = std::make_shared<detail::Node>();
  node->shape = std::move(shape);
  node->value = std::move(values);
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) { return filled(std::move(shape), 0.0, requires_grad); }

Tensor Tensor::filled(Shape shape, double value, bool requires_grad) {
  validate_shape(shape);
  const auto n = product(shape);
  return from_values(std::move(shape), std::vector<double>(n, value), requires_grad);
}

Tensor Tensor::vector(std::vector<double> values, bool requires_grad) {
  Shape shape{values.size()};
  return from_values(std::move(shape), std::move(values), requires_grad);
}

Tensor Tensor::scalar(double value, bool requires_grad) { return from_values({1}, {value}, requires_grad); }

const Shape& Tensor::shape() const {
  require_defined(*this, "shape");
  return node_->shape;
}
std::size_t Tensor::rows() const { return rows_of(shape()); }
std::size_t Tensor::cols() const { return cols_of(shape()); }
std::size_t Tensor::size() const { return defined() ? node_->value.size() : 0; }

std::span<const double> Tensor::data() const {
  require_defined(*this, "data");
  return node_->value;
}

std::span<double> Tensor::mutable_data() {
  require_defined(*this, "mutable_data");
  return node_->value;
}

double Tensor::item() const {
  if (size() != 1) throw ContractError("item() on tensor of shape " + shape_to_string(shape()));
  return node_->value[0];
}

double Tensor::at(std::size_t row, std::size_t col) const {
  if (row >= rows() || col >= cols()) throw DimensionError("index out of range for " + shape_to_string(shape()));
  return node_->value[row * cols() + col];
}

bool Tensor::requires_grad() const { return defined() && node_->requires_grad; }
bool Tensor::is_leaf() const { return defined() && node_->leaf(); }
bool Tensor::has_grad() const { return defined() && !node_->grad.empty(); }

std::span<const double> Tensor::grad() const {
  require_defined(*this, "grad");
  return node_->grad;
}

std::span<double> Tensor::mutable_grad() {
  require_defined(*this, "grad");
  node_->ensure_grad();
  return node_->grad;
}

void Tensor::zero_grad() {
  if (defined()) std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
}

Tensor Tensor::detach() const {
  require_defined(*this, "detach");
  return from_values(node_->shape, node_->value, false);
}

void Tensor::backward() const {
  require_defined(*this, "backward");
  if (node_->value.size() != 1) {
    throw ContractError("backward() requires a single-element loss, got shape " + shape_to_string(node_->shape));
  }
  if (!node_->requires_grad) return;

  // Iterative post-order DFS gives a topological order (inputs first).
  std::vector<detail::Node*> order;
  std::unordered_set<detail::Node*> seen;
  std::vector<std::pair<detail::Node*, std::size_t>> stack;
  stack.emplace_back(node_.get(), 0);
  seen.insert(node_.get());
  while (!stack.empty()) {
    auto& [n, next] = stack.back();
    if (next < n->inputs.size()) {
      detail::Node* child = n->inputs[next++].get();
      if (child->requires_grad && seen.insert(child).second) stack.emplace_back(child, 0);
    } else {
      order.push_back(n);
      stack.pop_back();
    }
  }

  // Interior gradients are per-pass scratch; leaves accumulate.
  for (auto* n : order) {
    if (!n->leaf()) {
      n->grad.assign(n->value.size(), 0.0);
    } else {
      n->ensure_grad();
    }
  }
  node_->grad[0] += 1.0;

  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    detail::Node* n = *it;
    if (n->leaf() || !n->backward_fn) continue;
    GradContext ctx;
    ctx.output = n->value;
    ctx.output_grad = n->grad;
    ctx.input_grads.reserve(n->inputs.size());
    for (auto& in : n->inputs) {
      if (in->requires_grad) {
        in->ensure_grad();
        ctx.input_grads.emplace_back(in->grad);
      } else {
        ctx.input_grads.emplace_back();
      }
    }
    n->backward_fn(ctx);
  }
}

Tensor make_op(Shape shape, std::vector<double> values, std::vector<Tensor> inputs, GradFn fn) {
  Tensor out = Tensor::from_values(std::move(shape), std::move(values), false);
  const bool needs = std::any_of(inputs.begin(), inputs.end(), [](const Tensor& t) { return t.requires_grad(); });
  if (needs) {
    out.node_->requires_grad = true;
    out.node_->inputs.reserve(inputs.size());
    for (auto& t : inputs) out.node_->inputs.push_back(t.node_);
    out.node_->backward_fn = std::move(fn);
  }
  return out;
}

// ---- linear algebra -------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_defined(a, "matmul");
  require_defined(b, "matmul");
  const auto m = a.rows(), k = a.cols(), n = b.cols();
  if (b.rows() != k) {
    throw DimensionError("matmul: inner dimensions differ, " + shape_to_string(a.shape()) + " x " +
                         shape_to_string(b.shape()));
  }
  std::vector<double> out(m * n);
  ConstMap A(a.data().data(), m, k);
  ConstMap B(b.data().data(), k, n);
  MutMap(out.data(), m, n).noalias() = A * B;
  return make_op({m, n}, std::move(out), {a, b}, [a, b, m, k, n](const GradContext& ctx) {
    ConstMap G(ctx.output_grad.data(), m, n);
    if (!ctx.input_grads[0].empty()) {
      MutMap(ctx.input_grads[0].data(), m, k).noalias() += G * ConstMap(b.data().data(), k, n).transpose();
    }
    if (!ctx.input_grads[1].empty()) {
      MutMap(ctx.input_grads[1].data(), k, n).noalias() += ConstMap(a.data().data(), m, k).transpose() * G;
    }
  });
}

// ---- elementwise ----------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b) {
  require_same(a, b, "add");
  std::vector<double> out(a.size());
  auto x = a.data(), y = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] + y[i];
  return make_op(a.shape(), std::move(out), {a, b}, [](const GradContext& ctx) {
    for (auto& g : ctx.input_grads) {
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += ctx.output_grad[i];
    }
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same(a, b, "sub");
  std::vector<double> out(a.size());
  auto x = a.data(), y = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] - y[i];
  return make_op(a.shape(), std::move(out), {a, b}, [](const GradContext& ctx) {
    auto& ga = ctx.input_grads[0];
    auto& gb = ctx.input_grads[1];
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += ctx.output_grad[i];
    for (std::size_t i = 0; i < gb.size(); ++i) gb[i] -= ctx.output_grad[i];
  });
}

Tensor hadamard(const Tensor& a, const Tensor& b) {
  require_same(a, b, "hadamard");
  std::vector<double> out(a.size());
  auto x = a.data(), y = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] * y[i];
  return make_op(a.shape(), std::move(out), {a, b}, [a, b](const GradContext& ctx) {
    auto& ga = ctx.input_grads[0];
    auto& gb = ctx.input_grads[1];
    auto x = a.data(), y = b.data();
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += ctx.output_grad[i] * y[i];
    for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += ctx.output_grad[i] * x[i];
  });
}

Tensor scale(const Tensor& a, double factor) {
  require_defined(a, "scale");
  std::vector<double> out(a.data().begin(), a.data().end());
  for (auto& v : out) v *= factor;
  return make_op(a.shape(), std::move(out), {a}, [factor](const GradContext& ctx) {
    auto& g = ctx.input_grads[0];
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += factor * ctx.output_grad[i];
  });
}

Tensor add_bias(const Tensor& x, const Tensor& bias) {
  require_defined(x, "add_bias");
  require_defined(bias, "add_bias");
  const auto r = x.rows(), c = x.cols();
  if (bias.cols() != 1 || bias.rows() != r) {
    throw DimensionError("add_bias: bias " + shape_to_string(bias.shape()) + " does not match rows of " +
                         shape_to_string(x.shape()));
  }
  std::vector<double> out(x.data().begin(), x.data().end());
  auto b = bias.data();
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t j = 0; j < c; ++j) out[i * c + j] += b[i];
  }
  return make_op(x.shape(), std::move(out), {x, bias}, [r, c](const GradContext& ctx) {
    auto& gx = ctx.input_grads[0];
    auto& gb = ctx.input_grads[1];
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += ctx.output_grad[i];
    if (!gb.empty()) {
      for (std::size_t i = 0; i < r; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < c; ++j) s += ctx.output_grad[i * c + j];
        gb[i] += s;
      }
    }
  });
}

Tensor sum_over(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw ContractError("sum_over: no operands");
  for (const auto& p : parts) require_same(parts.front(), p, "sum_over");
  std::vector<double> out(parts.front().size(), 0.0);
  for (const auto& p : parts) {
    auto v = p.data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += v[i];
  }
  return make_op(parts.front().shape(), std::move(out), parts, [](const GradContext& ctx) {
    for (auto& g : ctx.input_grads) {
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += ctx.output_grad[i];
    }
  });
}

Tensor sigmoid(const Tensor& x) {
  require_defined(x, "sigmoid");
  require_finite(x.data(), "sigmoid");
  std::vector<double> out(x.size());
  auto v = x.data();
  for (std::size_t i = 0; i < out.size(); ++i) {
    // Split by sign so exp never overflows.
    out[i] = v[i] >= 0 ? 1.0 / (1.0 + std::exp(-v[i])) : std::exp(v[i]) / (1.0 + std::exp(v[i]));
  }
  return make_op(x.shape(), std::move(out), {x}, [](const GradContext& ctx) {
    auto& g = ctx.input_grads[0];
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double s = ctx.output[i];
      g[i] += ctx.output_grad[i] * s * (1.0 - s);
    }
  });
}

Tensor tanh_op(const Tensor& x) {
  require_defined(x, "tanh");
  require_finite(x.data(), "tanh");
  std::vector<double> out(x.size());
  auto v = x.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::tanh(v[i]);
  return make_op(x.shape(), std::move(out), {x}, [](const GradContext& ctx) {
    auto& g = ctx.input_grads[0];
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double t = ctx.output[i];
      g[i] += ctx.output_grad[i] * (1.0 - t * t);
    }
  });
}

Tensor prelu(const Tensor& x, const Tensor& slope) {
  require_defined(x, "prelu");
  require_defined(slope, "prelu");
  if (slope.size() != 1) throw DimensionError("prelu: slope must hold one value, got " + shape_to_string(slope.shape()));
  require_finite(x.data(), "prelu");
  const double a = slope.item();
  std::vector<double> out(x.size());
  auto v = x.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = v[i] >= 0 ? v[i] : a * v[i];
  return make_op(x.shape(), std::move(out), {x, slope}, [x, a](const GradContext& ctx) {
    auto v = x.data();
    auto& gx = ctx.input_grads[0];
    auto& ga = ctx.input_grads[1];
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += ctx.output_grad[i] * (v[i] >= 0 ? 1.0 : a);
    if (!ga.empty()) {
      double s = 0.0;
      for (std::size_t i = 0; i < v.size(); ++i) {
        if (v[i] < 0) s += ctx.output_grad[i] * v[i];
      }
      ga[0] += s;
    }
  });
}

Tensor softmax(const Tensor& x) {
  require_defined(x, "softmax");
  require_finite(x.data(), "softmax");
  const auto r = x.rows(), c = x.cols();
  auto v = x.data();
  std::vector<double> out(x.size());
  for (std::size_t j = 0; j < c; ++j) {
    double mx = v[j];
    for (std::size_t i = 1; i < r; ++i) mx = std::max(mx, v[i * c + j]);
    double z = 0.0;
    for (std::size_t i = 0; i < r; ++i) {
      out[i * c + j] = std::exp(v[i * c + j] - mx);
      z += out[i * c + j];
    }
    for (std::size_t i = 0; i < r; ++i) out[i * c + j] /= z;
  }
  return make_op(x.shape(), std::move(out), {x}, [r, c](const GradContext& ctx) {
    auto& g = ctx.input_grads[0];
    for (std::size_t j = 0; j < c; ++j) {
      double dot = 0.0;
      for (std::size_t i = 0; i < r; ++i) dot += ctx.output_grad[i * c + j] * ctx.output[i * c + j];
      for (std::size_t i = 0; i < r; ++i) {
        g[i * c + j] += ctx.output[i * c + j] * (ctx.output_grad[i * c + j] - dot);
      }
    }
  });
}

// ---- structure ------------------------------------------------------------

Tensor concat(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw ContractError("concat: no operands");
  const auto c = parts.front().cols();
  std::size_t rows = 0;
  std::vector<std::size_t> sizes;
  sizes.reserve(parts.size());
  for (const auto& p : parts) {
    require_defined(p, "concat");
    if (p.cols() != c) {
      throw DimensionError("concat: column counts differ, " + shape_to_string(parts.front().shape()) + " vs " +
                           shape_to_string(p.shape()));
    }
    rows += p.rows();
    sizes.push_back(p.size());
  }
  std::vector<double> out;
  out.reserve(rows * c);
  for (const auto& p : parts) out.insert(out.end(), p.data().begin(), p.data().end());
  Shape shape = parts.front().shape().size() == 1 ? Shape{rows} : Shape{rows, c};
  return make_op(std::move(shape), std::move(out), parts, [sizes = std::move(sizes)](const GradContext& ctx) {
    std::size_t offset = 0;
    for (std::size_t k = 0; k < sizes.size(); ++k) {
      auto& g = ctx.input_grads[k];
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += ctx.output_grad[offset + i];
      offset += sizes[k];
    }
  });
}

Tensor concat_cols(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw ContractError("concat_cols: no operands");
  const auto r = parts.front().rows();
  std::size_t cols = 0;
  std::vector<std::size_t> widths;
  widths.reserve(parts.size());
  for (const auto& p : parts) {
    require_defined(p, "concat_cols");
    if (p.rows() != r) {
      throw DimensionError("concat_cols: row counts differ, " + shape_to_string(parts.front().shape()) + " vs " +
                           shape_to_string(p.shape()));
    }
    cols += p.cols();
    widths.push_back(p.cols());
  }
  std::vector<double> out(r * cols);
  std::size_t col0 = 0;
  for (const auto& p : parts) {
    auto v = p.data();
    const auto w = p.cols();
    for (std::size_t i = 0; i < r; ++i) std::copy_n(v.data() + i * w, w, out.data() + i * cols + col0);
    col0 += w;
  }
  return make_op({r, cols}, std::move(out), parts, [r, cols, widths = std::move(widths)](const GradContext& ctx) {
    std::size_t col0 = 0;
    for (std::size_t k = 0; k < widths.size(); ++k) {
      auto& g = ctx.input_grads[k];
      const auto w = widths[k];
      if (!g.empty()) {
        for (std::size_t i = 0; i < r; ++i) {
          for (std::size_t j = 0; j < w; ++j) g[i * w + j] += ctx.output_grad[i * cols + col0 + j];
        }
      }
      col0 += w;
    }
  });
}

Tensor slice_rows(const Tensor& x, std::size_t begin, std::size_t count) {
  require_defined(x, "slice_rows");
  const auto c = x.cols();
  if (count == 0 || begin + count > x.rows()) {
    throw DimensionError("slice_rows: rows [" + std::to_string(begin) + ", " + std::to_string(begin + count) +
                         ") out of range for " + shape_to_string(x.shape()));
  }
  auto v = x.data();
  std::vector<double> out(v.begin() + begin * c, v.begin() + (begin + count) * c);
  Shape shape = x.shape().size() == 1 ? Shape{count} : Shape{count, c};
  return make_op(std::move(shape), std::move(out), {x}, [begin, c](const GradContext& ctx) {
    auto& g = ctx.input_grads[0];
    for (std::size_t i = 0; i < ctx.output_grad.size(); ++i) g[begin * c + i] += ctx.output_grad[i];
  });
}

Tensor slice_cols(const Tensor& x, std::size_t begin, std::size_t count) {
  require_defined(x, "slice_cols");
  const auto r = x.rows(), c = x.cols();
  if (count == 0 || begin + count > c) {
    throw DimensionError("slice_cols: columns [" + std::to_string(begin) + ", " + std::to_string(begin + count) +
                         ") out of range for " + shape_to_string(x.shape()));
  }
  auto v = x.data();
  std::vector<double> out(r * count);
  for (std::size_t i = 0; i < r; ++i) std::copy_n(v.data() + i * c + begin, count, out.data() + i * count);
  return make_op({r, count}, std::move(out), {x}, [r, c, begin, count](const GradContext& ctx) {
    auto& g = ctx.input_grads[0];
    for (std::size_t i = 0; i < r; ++i) {
      for (std::size_t j = 0; j < count; ++j) g[i * c + begin + j] += ctx.output_grad[i * count + j];
    }
  });
}

Tensor reshape(const Tensor& x, Shape shape) {
  require_defined(x, "reshape");
  validate_shape(shape);
  if (product(shape) != x.size()) {
    throw DimensionError("reshape: cannot view " + shape_to_string(x.shape()) + " as " + shape_to_string(shape));
  }
  std::vector<double> out(x.data().begin(), x.data().end());
  return make_op(std::move(shape), std::move(out), {x}, [](const GradContext& ctx) {
    auto& g = ctx.input_grads[0];
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += ctx.output_grad[i];
  });
}

Tensor tile_cols(const Tensor& x, std::size_t times) {
  require_defined(x, "tile_cols");
  if (times == 0) throw ContractError("tile_cols: times must be positive");
  const auto r = x.rows(), c = x.cols();
  const auto width = c * times;
  auto v = x.data();
  std::vector<double> out(r * width);
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t k = 0; k < times; ++k) std::copy_n(v.data() + i * c, c, out.data() + i * width + k * c);
  }
  return make_op({r, width}, std::move(out), {x}, [r, c, times, width](const GradContext& ctx) {
    auto& g = ctx.input_grads[0];
    for (std::size_t i = 0; i < r; ++i) {
      for (std::size_t k = 0; k < times; ++k) {
        for (std::size_t j = 0; j < c; ++j) g[i * c + j] += ctx.output_grad[i * width + k * c + j];
      }
    }
  });
}

// ---- reductions -----------------------------------------------------------

Tensor sum(const Tensor& x) {
  require_defined(x, "sum");
  double s = 0.0;
  for (double v : x.data()) s += v;
  return make_op({1}, {s}, {x}, [](const GradContext& ctx) {
    auto& g = ctx.input_grads[0];
    const double go = ctx.output_grad[0];
    for (auto& v : g) v += go;
  });
}

Tensor weighted_block_sum(const Tensor& values, const Tensor& weights) {
  require_defined(values, "weighted_block_sum");
  require_defined(weights, "weighted_block_sum");
  const auto d = values.rows();
  const auto n = weights.rows(), b = weights.cols();
  if (values.cols() != n * b) {
    throw DimensionError("weighted_block_sum: values " + shape_to_string(values.shape()) +
                         " do not split into blocks of weights " + shape_to_string(weights.shape()));
  }
  const auto width = n * b;
  auto v = values.data();
  auto w = weights.data();
  std::vector<double> out(d * b, 0.0);
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t k = 0; k < n; ++k) {
      for (std::size_t j = 0; j < b; ++j) out[i * b + j] += w[k * b + j] * v[i * width + k * b + j];
    }
  }
  return make_op({d, b}, std::move(out), {values, weights},
                 [values, weights, d, n, b, width](const GradContext& ctx) {
                   auto& gv = ctx.input_grads[0];
                   auto& gw = ctx.input_grads[1];
                   auto v = values.data();
                   auto w = weights.data();
                   for (std::size_t i = 0; i < d; ++i) {
                     for (std::size_t k = 0; k < n; ++k) {
                       for (std::size_t j = 0; j < b; ++j) {
                         const double go = ctx.output_grad[i * b + j];
                         if (!gv.empty()) gv[i * width + k * b + j] += go * w[k * b + j];
                         if (!gw.empty()) gw[k * b + j] += go * v[i * width + k * b + j];
                       }
                     }
                   }
                 });
}

}  // namespace hubs
