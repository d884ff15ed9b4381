#pragma once

// Dense row-major matrices of doubles with tape-based reverse-mode autodiff.
//
// Every tensor is two-dimensional (rows x cols); vectors are 1 x n or n x 1
// and scalars are 1 x 1. Ops executed while a Graph is active and at least
// one operand requires a gradient are appended to that graph; backward()
// then walks the graph in reverse insertion order.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <initializer_list>
#include <limits>
#include <memory>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "aeslab/errors.hpp"
#include "aeslab/rng.hpp"

namespace aeslab {

struct Shape {
  std::size_t rows = 0;
  std::size_t cols = 0;

  std::size_t size() const { return rows * cols; }
  bool operator==(const Shape&) const = default;

  std::string str() const {
    std::ostringstream os;
    os << rows << "x" << cols;
    return os.str();
  }
};

namespace detail {

struct Node {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;  // empty means "all zero"
  std::vector<std::shared_ptr<Node>> inputs;
  std::function<void(Node&)> backward_fn;
  const char* op = "leaf";
  bool requires_grad = false;

  bool is_leaf() const { return inputs.empty(); }
  void ensure_grad() {
    if (grad.empty()) grad.assign(value.size(), 0.0);
  }
};

}  // namespace detail

class Tensor {
 public:
  Tensor() : node_(std::make_shared<detail::Node>()) {}

  static Tensor zeros(std::size_t rows, std::size_t cols) {
    return from(rows, cols, std::vector<double>(rows * cols, 0.0));
  }

  static Tensor filled(std::size_t rows, std::size_t cols, double v) {
    return from(rows, cols, std::vector<double>(rows * cols, v));
  }

  static Tensor from(std::size_t rows, std::size_t cols, std::vector<double> values) {
    if (values.size() != rows * cols) {
      throw DimensionError("tensor: " + std::to_string(values.size()) + " values for shape " +
                           Shape{rows, cols}.str());
    }
    auto n = std::make_shared<detail::Node>();
    n->shape = {rows, cols};
    n->value = std::move(values);
    return Tensor(std::move(n));
  }

  static Tensor scalar(double v) { return from(1, 1, {v}); }
  static Tensor row(std::vector<double> v) {
    const auto n = v.size();
    return from(1, n, std::move(v));
  }
  static Tensor column(std::vector<double> v) {
    const auto n = v.size();
    return from(n, 1, std::move(v));
  }

  // Trainable leaf: accumulates gradients across backward() calls.
  static Tensor parameter(std::size_t rows, std::size_t cols, std::vector<double> values) {
    Tensor t = from(rows, cols, std::move(values));
    t.node_->requires_grad = true;
    return t;
  }

  const Shape& shape() const { return node_->shape; }
  std::size_t rows() const { return node_->shape.rows; }
  std::size_t cols() const { return node_->shape.cols; }
  std::size_t size() const { return node_->value.size(); }
  bool requires_grad() const { return node_->requires_grad; }
  bool is_leaf() const { return node_->is_leaf(); }

  std::span<const double> values() const { return node_->value; }
  double operator()(std::size_t r, std::size_t c) const { return node_->value[r * cols() + c]; }
  double item() const {
    if (size() != 1) throw DimensionError("item: tensor of shape " + shape().str() + " is not a scalar");
    return node_->value[0];
  }

  // Mutable storage; only leaves may be written (optimizers, checkpoint load).
  std::span<double> data() {
    if (!is_leaf()) throw ContractError("data: cannot mutate the output of a recorded op");
    return node_->value;
  }

  // Gradient accumulated by backward(); zeros when none has been accumulated.
  std::vector<double> grad() const {
    if (node_->grad.empty()) return std::vector<double>(size(), 0.0);
    return node_->grad;
  }
  std::span<double> grad_data() {
    node_->ensure_grad();
    return node_->grad;
  }
  void zero_grad() { node_->grad.clear(); }

  // Fresh leaf holding a copy of the values, cut from any graph.
  Tensor detach() const { return from(rows(), cols(), node_->value); }

  const std::shared_ptr<detail::Node>& node() const { return node_; }
  explicit Tensor(std::shared_ptr<detail::Node> n) : node_(std::move(n)) {}

 private:
  std::shared_ptr<detail::Node> node_;
};

// Append-only tape; insertion order is a valid topological order.
class Graph {
 public:
  void record(std::shared_ptr<detail::Node> n) { nodes_.push_back(std::move(n)); }
  std::size_t size() const { return nodes_.size(); }
  const std::vector<std::shared_ptr<detail::Node>>& nodes() const { return nodes_; }
  void clear() { nodes_.clear(); }

 private:
  std::vector<std::shared_ptr<detail::Node>> nodes_;
};

inline Graph*& active_graph() {
  thread_local Graph* graph = nullptr;
  return graph;
}

// Makes `graph` the recording target for the current thread until destroyed.
class GraphScope {
 public:
  explicit GraphScope(Graph& graph) : previous_(active_graph()) { active_graph() = &graph; }
  ~GraphScope() { active_graph() = previous_; }
  GraphScope(const GraphScope&) = delete;
  GraphScope& operator=(const GraphScope&) = delete;

 private:
  Graph* previous_;
};

namespace detail {

inline Tensor make_op(const char* op, Shape shape, std::vector<double> value,
                      std::initializer_list<Tensor> inputs, std::function<void(Node&)> backward_fn) {
  auto n = std::make_shared<Node>();
  n->shape = shape;
  n->value = std::move(value);
  n->op = op;
  Graph* graph = active_graph();
  const bool tracked =
      graph != nullptr && std::any_of(inputs.begin(), inputs.end(), [](const Tensor& t) { return t.requires_grad(); });
  if (tracked) {
    n->requires_grad = true;
    for (const auto& t : inputs) n->inputs.push_back(t.node());
    n->backward_fn = std::move(backward_fn);
    graph->record(n);
  }
  return Tensor(std::move(n));
}

inline Tensor make_op_n(const char* op, Shape shape, std::vector<double> value, const std::vector<Tensor>& inputs,
                        std::function<void(Node&)> backward_fn) {
  auto n = std::make_shared<Node>();
  n->shape = shape;
  n->value = std::move(value);
  n->op = op;
  Graph* graph = active_graph();
  const bool tracked =
      graph != nullptr && std::any_of(inputs.begin(), inputs.end(), [](const Tensor& t) { return t.requires_grad(); });
  if (tracked) {
    n->requires_grad = true;
    for (const auto& t : inputs) n->inputs.push_back(t.node());
    n->backward_fn = std::move(backward_fn);
    graph->record(n);
  }
  return Tensor(std::move(n));
}

[[noreturn]] inline void shape_mismatch(const char* op, const Shape& a, const Shape& b) {
  throw DimensionError(std::string(op) + ": incompatible shapes " + a.str() + " and " + b.str());
}

inline std::size_t broadcast_extent(const char* op, const Shape& a, const Shape& b, std::size_t x, std::size_t y) {
  if (x == y) return x;
  if (x == 1) return y;
  if (y == 1) return x;
  shape_mismatch(op, a, b);
}

// Elementwise binary op with rank-2 broadcasting of unit extents.
template <typename F, typename DA, typename DB>
Tensor broadcast_binary(const char* op, const Tensor& a, const Tensor& b, F f, DA dfa, DB dfb) {
  const Shape sa = a.shape(), sb = b.shape();
  const Shape out{broadcast_extent(op, sa, sb, sa.rows, sb.rows), broadcast_extent(op, sa, sb, sa.cols, sb.cols)};
  std::vector<double> v(out.size());
  const auto av = a.values();
  const auto bv = b.values();
  auto ia = [sa](std::size_t r, std::size_t c) { return (sa.rows == 1 ? 0 : r) * sa.cols + (sa.cols == 1 ? 0 : c); };
  auto ib = [sb](std::size_t r, std::size_t c) { return (sb.rows == 1 ? 0 : r) * sb.cols + (sb.cols == 1 ? 0 : c); };
  for (std::size_t r = 0; r < out.rows; ++r) {
    for (std::size_t c = 0; c < out.cols; ++c) v[r * out.cols + c] = f(av[ia(r, c)], bv[ib(r, c)]);
  }
  return make_op(op, out, std::move(v), {a, b}, [out, ia, ib, dfa, dfb](Node& n) {
    Node& na = *n.inputs[0];
    Node& nb = *n.inputs[1];
    if (na.requires_grad) na.ensure_grad();
    if (nb.requires_grad) nb.ensure_grad();
    for (std::size_t r = 0; r < out.rows; ++r) {
      for (std::size_t c = 0; c < out.cols; ++c) {
        const double g = n.grad[r * out.cols + c];
        const double x = na.value[ia(r, c)];
        const double y = nb.value[ib(r, c)];
        if (na.requires_grad) na.grad[ia(r, c)] += g * dfa(x, y);
        if (nb.requires_grad) nb.grad[ib(r, c)] += g * dfb(x, y);
      }
    }
  });
}

// Elementwise unary op; the derivative may use the input x and output y.
template <typename F, typename D>
Tensor unary(const char* op, const Tensor& a, F f, D df) {
  std::vector<double> v(a.size());
  const auto av = a.values();
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = f(av[i]);
  return make_op(op, a.shape(), std::move(v), {a}, [df](Node& n) {
    Node& na = *n.inputs[0];
    if (!na.requires_grad) return;
    na.ensure_grad();
    for (std::size_t i = 0; i < n.grad.size(); ++i) na.grad[i] += n.grad[i] * df(na.value[i], n.value[i]);
  });
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Elementwise arithmetic (operands broadcast over unit rows/cols)

inline Tensor add(const Tensor& a, const Tensor& b) {
  return detail::broadcast_binary(
      "add", a, b, [](double x, double y) { return x + y; }, [](double, double) { return 1.0; },
      [](double, double) { return 1.0; });
}

inline Tensor sub(const Tensor& a, const Tensor& b) {
  return detail::broadcast_binary(
      "sub", a, b, [](double x, double y) { return x - y; }, [](double, double) { return 1.0; },
      [](double, double) { return -1.0; });
}

inline Tensor mul(const Tensor& a, const Tensor& b) {
  return detail::broadcast_binary(
      "mul", a, b, [](double x, double y) { return x * y; }, [](double, double y) { return y; },
      [](double x, double) { return x; });
}

inline Tensor scale(const Tensor& a, double s) {
  return detail::unary(
      "scale", a, [s](double x) { return s * x; }, [s](double, double) { return s; });
}

inline Tensor add_scalar(const Tensor& a, double s) {
  return detail::unary(
      "add_scalar", a, [s](double x) { return x + s; }, [](double, double) { return 1.0; });
}

inline Tensor neg(const Tensor& a) { return scale(a, -1.0); }

inline Tensor tanh(const Tensor& a) {
  return detail::unary(
      "tanh", a, [](double x) { return std::tanh(x); }, [](double, double y) { return 1.0 - y * y; });
}

inline Tensor sigmoid(const Tensor& a) {
  return detail::unary(
      "sigmoid", a,
      [](double x) {
        if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
        const double e = std::exp(x);
        return e / (1.0 + e);
      },
      [](double, double y) { return y * (1.0 - y); });
}

// Subgradient 0 at the kink.
inline Tensor relu(const Tensor& a) {
  return detail::unary(
      "relu", a, [](double x) { return x > 0 ? x : 0.0; }, [](double x, double) { return x > 0 ? 1.0 : 0.0; });
}

// max(0, x); identical to relu, named for loss code.
inline Tensor hinge(const Tensor& a) { return relu(a); }

inline Tensor exp(const Tensor& a) {
  return detail::unary(
      "exp", a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

inline Tensor log(const Tensor& a) {
  return detail::unary(
      "log", a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

// ---------------------------------------------------------------------------
// Linear algebra and structure

inline Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.cols() != b.rows()) detail::shape_mismatch("matmul", a.shape(), b.shape());
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  std::vector<double> v(m * n, 0.0);
  const auto av = a.values();
  const auto bv = b.values();
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      const double x = av[i * k + p];
      if (x == 0.0) continue;
      const double* brow = bv.data() + p * n;
      double* out = v.data() + i * n;
      for (std::size_t j = 0; j < n; ++j) out[j] += x * brow[j];
    }
  }
  return detail::make_op("matmul", {m, n}, std::move(v), {a, b}, [m, k, n](detail::Node& node) {
    detail::Node& na = *node.inputs[0];
    detail::Node& nb = *node.inputs[1];
    const double* g = node.grad.data();
    if (na.requires_grad) {
      na.ensure_grad();
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t p = 0; p < k; ++p) {
          double acc = 0.0;
          const double* brow = nb.value.data() + p * n;
          for (std::size_t j = 0; j < n; ++j) acc += g[i * n + j] * brow[j];
          na.grad[i * k + p] += acc;
        }
      }
    }
    if (nb.requires_grad) {
      nb.ensure_grad();
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t p = 0; p < k; ++p) {
          const double x = na.value[i * k + p];
          if (x == 0.0) continue;
          double* brow = nb.grad.data() + p * n;
          for (std::size_t j = 0; j < n; ++j) brow[j] += x * g[i * n + j];
        }
      }
    }
  });
}

inline Tensor transpose(const Tensor& a) {
  const std::size_t r = a.rows(), c = a.cols();
  std::vector<double> v(a.size());
  const auto av = a.values();
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) v[j * r + i] = av[i * c + j];
  return detail::make_op("transpose", {c, r}, std::move(v), {a}, [r, c](detail::Node& n) {
    detail::Node& na = *n.inputs[0];
    if (!na.requires_grad) return;
    na.ensure_grad();
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) na.grad[i * c + j] += n.grad[j * r + i];
  });
}

inline Tensor reshape(const Tensor& a, std::size_t rows, std::size_t cols) {
  if (rows * cols != a.size()) detail::shape_mismatch("reshape", a.shape(), Shape{rows, cols});
  std::vector<double> v(a.values().begin(), a.values().end());
  return detail::make_op("reshape", {rows, cols}, std::move(v), {a}, [](detail::Node& n) {
    detail::Node& na = *n.inputs[0];
    if (!na.requires_grad) return;
    na.ensure_grad();
    for (std::size_t i = 0; i < n.grad.size(); ++i) na.grad[i] += n.grad[i];
  });
}

// Joins along axis 0 (stack rows) or axis 1 (side by side).
inline Tensor concat(const std::vector<Tensor>& parts, int axis) {
  if (axis != 0 && axis != 1) throw ContractError("concat: axis must be 0 or 1");
  if (parts.empty()) return Tensor::zeros(0, 0);
  std::size_t rows = 0, cols = 0;
  if (axis == 0) {
    cols = parts.front().cols();
    for (const auto& p : parts) {
      if (p.cols() != cols) detail::shape_mismatch("concat", parts.front().shape(), p.shape());
      rows += p.rows();
    }
  } else {
    rows = parts.front().rows();
    for (const auto& p : parts) {
      if (p.rows() != rows) detail::shape_mismatch("concat", parts.front().shape(), p.shape());
      cols += p.cols();
    }
  }
  std::vector<double> v(rows * cols);
  std::vector<std::size_t> offsets;
  std::size_t off = 0;
  for (const auto& p : parts) {
    offsets.push_back(off);
    const auto pv = p.values();
    if (axis == 0) {
      std::copy(pv.begin(), pv.end(), v.begin() + static_cast<std::ptrdiff_t>(off * cols));
      off += p.rows();
    } else {
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < p.cols(); ++c) v[r * cols + off + c] = pv[r * p.cols() + c];
      off += p.cols();
    }
  }
  return detail::make_op_n("concat", {rows, cols}, std::move(v), parts,
                           [axis, cols, offsets = std::move(offsets)](detail::Node& n) {
                             for (std::size_t k = 0; k < n.inputs.size(); ++k) {
                               detail::Node& np = *n.inputs[k];
                               if (!np.requires_grad) continue;
                               np.ensure_grad();
                               const std::size_t pr = np.shape.rows, pc = np.shape.cols;
                               if (axis == 0) {
                                 for (std::size_t i = 0; i < pr * pc; ++i) np.grad[i] += n.grad[offsets[k] * cols + i];
                               } else {
                                 for (std::size_t r = 0; r < pr; ++r)
                                   for (std::size_t c = 0; c < pc; ++c)
                                     np.grad[r * pc + c] += n.grad[r * cols + offsets[k] + c];
                               }
                             }
                           });
}

// Half-open range [begin, end) along axis.
inline Tensor slice(const Tensor& a, int axis, std::size_t begin, std::size_t end) {
  if (axis != 0 && axis != 1) throw ContractError("slice: axis must be 0 or 1");
  const std::size_t extent = axis == 0 ? a.rows() : a.cols();
  if (begin > end || end > extent) {
    throw DimensionError("slice: range [" + std::to_string(begin) + ", " + std::to_string(end) +
                         ") out of bounds for shape " + a.shape().str());
  }
  const std::size_t rows = axis == 0 ? end - begin : a.rows();
  const std::size_t cols = axis == 1 ? end - begin : a.cols();
  const std::size_t src_cols = a.cols();
  const std::size_t r0 = axis == 0 ? begin : 0;
  const std::size_t c0 = axis == 1 ? begin : 0;
  std::vector<double> v(rows * cols);
  const auto av = a.values();
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) v[r * cols + c] = av[(r + r0) * src_cols + c + c0];
  return detail::make_op("slice", {rows, cols}, std::move(v), {a}, [rows, cols, src_cols, r0, c0](detail::Node& n) {
    detail::Node& na = *n.inputs[0];
    if (!na.requires_grad) return;
    na.ensure_grad();
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < cols; ++c) na.grad[(r + r0) * src_cols + c + c0] += n.grad[r * cols + c];
  });
}

inline Tensor row(const Tensor& a, std::size_t i) { return slice(a, 0, i, i + 1); }

// Embedding lookup: row t of the result is table row ids[t].
inline Tensor gather_rows(const Tensor& table, std::span<const std::size_t> ids) {
  const std::size_t d = table.cols();
  std::vector<double> v(ids.size() * d);
  const auto tv = table.values();
  for (std::size_t t = 0; t < ids.size(); ++t) {
    if (ids[t] >= table.rows()) {
      throw ContractError("gather_rows: id " + std::to_string(ids[t]) + " out of range for table of " +
                          std::to_string(table.rows()) + " rows");
    }
    std::copy_n(tv.begin() + static_cast<std::ptrdiff_t>(ids[t] * d), d, v.begin() + static_cast<std::ptrdiff_t>(t * d));
  }
  std::vector<std::size_t> idx(ids.begin(), ids.end());
  return detail::make_op("gather_rows", {ids.size(), d}, std::move(v), {table}, [d, idx = std::move(idx)](detail::Node& n) {
    detail::Node& nt = *n.inputs[0];
    if (!nt.requires_grad) return;
    nt.ensure_grad();
    for (std::size_t t = 0; t < idx.size(); ++t)
      for (std::size_t c = 0; c < d; ++c) nt.grad[idx[t] * d + c] += n.grad[t * d + c];
  });
}

// ---------------------------------------------------------------------------
// Reductions

inline Tensor sum(const Tensor& a) {
  const auto av = a.values();
  const double s = std::accumulate(av.begin(), av.end(), 0.0);
  return detail::make_op("sum", {1, 1}, {s}, {a}, [](detail::Node& n) {
    detail::Node& na = *n.inputs[0];
    if (!na.requires_grad) return;
    na.ensure_grad();
    for (double& g : na.grad) g += n.grad[0];
  });
}

// axis 0 collapses rows (result 1 x cols); axis 1 collapses cols (rows x 1).
inline Tensor sum(const Tensor& a, int axis) {
  if (axis != 0 && axis != 1) throw ContractError("sum: axis must be 0 or 1");
  const std::size_t r = a.rows(), c = a.cols();
  const Shape out = axis == 0 ? Shape{1, c} : Shape{r, 1};
  std::vector<double> v(out.size(), 0.0);
  const auto av = a.values();
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) v[axis == 0 ? j : i] += av[i * c + j];
  return detail::make_op("sum_axis", out, std::move(v), {a}, [axis, r, c](detail::Node& n) {
    detail::Node& na = *n.inputs[0];
    if (!na.requires_grad) return;
    na.ensure_grad();
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) na.grad[i * c + j] += n.grad[axis == 0 ? j : i];
  });
}

inline Tensor mean(const Tensor& a) {
  if (a.size() == 0) throw ContractError("mean: empty tensor");
  return scale(sum(a), 1.0 / static_cast<double>(a.size()));
}

namespace detail {

// Softmax along `axis`, shift-stabilised by the slice maximum.
inline std::vector<double> softmax_values(std::span<const double> x, std::size_t r, std::size_t c, int axis) {
  std::vector<double> y(x.size());
  const std::size_t outer = axis == 1 ? r : c;
  const std::size_t inner = axis == 1 ? c : r;
  auto at = [&](std::size_t o, std::size_t i) { return axis == 1 ? o * c + i : i * c + o; };
  for (std::size_t o = 0; o < outer; ++o) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < inner; ++i) mx = std::max(mx, x[at(o, i)]);
    double z = 0.0;
    for (std::size_t i = 0; i < inner; ++i) z += (y[at(o, i)] = std::exp(x[at(o, i)] - mx));
    for (std::size_t i = 0; i < inner; ++i) y[at(o, i)] /= z;
  }
  return y;
}

}  // namespace detail

// axis 1 normalises each row, axis 0 each column.
inline Tensor softmax(const Tensor& a, int axis) {
  if (axis != 0 && axis != 1) throw ContractError("softmax: axis must be 0 or 1");
  const std::size_t r = a.rows(), c = a.cols();
  auto y = detail::softmax_values(a.values(), r, c, axis);
  return detail::make_op("softmax", a.shape(), std::move(y), {a}, [axis, r, c](detail::Node& n) {
    detail::Node& na = *n.inputs[0];
    if (!na.requires_grad) return;
    na.ensure_grad();
    const std::size_t outer = axis == 1 ? r : c;
    const std::size_t inner = axis == 1 ? c : r;
    auto at = [&](std::size_t o, std::size_t i) { return axis == 1 ? o * c + i : i * c + o; };
    for (std::size_t o = 0; o < outer; ++o) {
      double dot = 0.0;
      for (std::size_t i = 0; i < inner; ++i) dot += n.grad[at(o, i)] * n.value[at(o, i)];
      for (std::size_t i = 0; i < inner; ++i) na.grad[at(o, i)] += n.value[at(o, i)] * (n.grad[at(o, i)] - dot);
    }
  });
}

// log(sum(exp(.))) collapsing `axis` with the same shape convention as sum().
inline Tensor logsumexp(const Tensor& a, int axis) {
  if (axis != 0 && axis != 1) throw ContractError("logsumexp: axis must be 0 or 1");
  const std::size_t r = a.rows(), c = a.cols();
  const std::size_t outer = axis == 0 ? c : r;
  const std::size_t inner = axis == 0 ? r : c;
  if (inner == 0) throw ContractError("logsumexp: empty reduction");
  const auto av = a.values();
  auto at = [c, axis](std::size_t o, std::size_t i) { return axis == 0 ? i * c + o : o * c + i; };
  std::vector<double> v(outer);
  for (std::size_t o = 0; o < outer; ++o) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < inner; ++i) mx = std::max(mx, av[at(o, i)]);
    double z = 0.0;
    for (std::size_t i = 0; i < inner; ++i) z += std::exp(av[at(o, i)] - mx);
    v[o] = mx + std::log(z);
  }
  const Shape out = axis == 0 ? Shape{1, c} : Shape{r, 1};
  return detail::make_op("logsumexp", out, std::move(v), {a}, [outer, inner, at](detail::Node& n) {
    detail::Node& na = *n.inputs[0];
    if (!na.requires_grad) return;
    na.ensure_grad();
    for (std::size_t o = 0; o < outer; ++o)
      for (std::size_t i = 0; i < inner; ++i) na.grad[at(o, i)] += n.grad[o] * std::exp(na.value[at(o, i)] - n.value[o]);
  });
}

// ---------------------------------------------------------------------------
// Dropout with inverted scaling: kept entries are divided by keep_p.

inline std::vector<double> dropout_mask(Rng& rng, std::size_t n, double keep_p) {
  std::vector<double> mask(n);
  for (double& m : mask) m = rng.uniform() < keep_p ? 1.0 : 0.0;
  return mask;
}

inline Tensor dropout(const Tensor& a, const std::vector<double>& mask, double keep_p) {
  if (mask.size() != a.size()) {
    throw DimensionError("dropout: mask of " + std::to_string(mask.size()) + " for shape " + a.shape().str());
  }
  if (!(keep_p > 0.0 && keep_p <= 1.0)) throw ContractError("dropout: keep probability must lie in (0, 1]");
  Tensor m = Tensor::from(a.rows(), a.cols(), mask);
  return scale(mul(a, m), 1.0 / keep_p);
}

// ---------------------------------------------------------------------------
// Reverse sweep

inline void backward(Graph& graph, const Tensor& loss) {
  if (loss.size() != 1) throw ContractError("backward: loss must be a scalar, got shape " + loss.shape().str());
  const auto& nodes = graph.nodes();
  const auto* target = loss.node().get();
  const bool recorded =
      std::any_of(nodes.rbegin(), nodes.rend(), [target](const auto& n) { return n.get() == target; });
  if (!recorded) throw ContractError("backward: loss is not a node of this graph");
  for (const auto& n : nodes) n->grad.clear();
  loss.node()->grad.assign(1, 1.0);
  for (auto it = nodes.rbegin(); it != nodes.rend(); ++it) {
    detail::Node& n = **it;
    if (!n.grad.empty() && n.backward_fn) n.backward_fn(n);
  }
}

// ---------------------------------------------------------------------------
// Central-difference gradient oracle

inline Tensor finite_difference_gradient(const std::function<double(const Tensor&)>& f, const Tensor& x, double eps) {
  if (!(eps > 0.0)) throw ContractError("finite_difference_gradient: eps must be positive");
  std::vector<double> base(x.values().begin(), x.values().end());
  std::vector<double> g(base.size());
  for (std::size_t i = 0; i < base.size(); ++i) {
    auto plus = base;
    auto minus = base;
    plus[i] += eps;
    minus[i] -= eps;
    g[i] = (f(Tensor::from(x.rows(), x.cols(), plus)) - f(Tensor::from(x.rows(), x.cols(), minus))) / (2.0 * eps);
  }
  return Tensor::from(x.rows(), x.cols(), std::move(g));
}

// Same oracle for a parameter that `f` reads in place; values are restored.
inline std::vector<double> finite_difference_gradient(const std::function<double()>& f, Tensor& param, double eps) {
  if (!(eps > 0.0)) throw ContractError("finite_difference_gradient: eps must be positive");
  auto data = param.data();
  std::vector<double> g(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    const double saved = data[i];
    data[i] = saved + eps;
    const double up = f();
    data[i] = saved - eps;
    const double down = f();
    data[i] = saved;
    g[i] = (up - down) / (2.0 * eps);
  }
  return g;
}

inline double relative_error(double a, double b) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-8});
}

inline double max_relative_error(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw DimensionError("max_relative_error: length mismatch");
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, relative_error(a[i], b[i]));
  return worst;
}

}  // namespace aeslab
