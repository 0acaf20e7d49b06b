#pragma once

// Tape-based reverse-mode automatic differentiation.
//
// Every vector-Jacobian product is itself recorded on the tape as ordinary
// operations, so a gradient obtained with input_gradient() can be fed into
// further computation and differentiated again (double backprop).

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace laifo::grad {

template <class T>
using Matrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using Index = Eigen::Index;

enum class Op : std::uint8_t {
  leaf,
  add,
  sub,
  mul,
  matmul,
  affine,
  tanh,
  relu,
  sigmoid,
  log,
  square,
  sum,
  mean,
  concat,
  clip,
  l2norm,
  // Kinds below are mostly emitted by vector-Jacobian products and layers.
  scale_shift,
  mul_const,
  reciprocal,
  sqrt,
  sum_rows,
  sum_cols,
  broadcast_scalar,
  broadcast_rows,
  broadcast_cols,
  slice_cols,
  pad_cols,
  minimum,
  patches,
  patches_adjoint,
  reshape,
};

inline std::string_view op_name(Op op) {
  switch (op) {
    case Op::leaf: return "leaf";
    case Op::add: return "add";
    case Op::sub: return "sub";
    case Op::mul: return "mul";
    case Op::matmul: return "matmul";
    case Op::affine: return "affine";
    case Op::tanh: return "tanh";
    case Op::relu: return "relu";
    case Op::sigmoid: return "sigmoid";
    case Op::log: return "log";
    case Op::square: return "square";
    case Op::sum: return "sum";
    case Op::mean: return "mean";
    case Op::concat: return "concat";
    case Op::clip: return "clip";
    case Op::l2norm: return "l2norm";
    case Op::scale_shift: return "scale_shift";
    case Op::mul_const: return "mul_const";
    case Op::reciprocal: return "reciprocal";
    case Op::sqrt: return "sqrt";
    case Op::sum_rows: return "sum_rows";
    case Op::sum_cols: return "sum_cols";
    case Op::broadcast_scalar: return "broadcast_scalar";
    case Op::broadcast_rows: return "broadcast_rows";
    case Op::broadcast_cols: return "broadcast_cols";
    case Op::slice_cols: return "slice_cols";
    case Op::pad_cols: return "pad_cols";
    case Op::minimum: return "minimum";
    case Op::patches: return "patches";
    case Op::patches_adjoint: return "patches_adjoint";
    case Op::reshape: return "reshape";
  }
  return "unknown";
}

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

class GraphError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// A trainable array. Identity (address) is what gradients are keyed on.
template <class T>
class Parameter {
 public:
  Parameter() = default;
  Parameter(std::string name, Matrix<T> value)
      : name_(std::move(name)), value_(std::move(value)) {}

  const std::string& name() const { return name_; }
  const Matrix<T>& value() const { return value_; }
  Matrix<T>& value() { return value_; }
  Index rows() const { return value_.rows(); }
  Index cols() const { return value_.cols(); }
  Index size() const { return value_.size(); }
  std::vector<Index> shape() const { return {value_.rows(), value_.cols()}; }

 private:
  std::string name_;
  Matrix<T> value_;
};

/// Index table for patch extraction: output element (b*P + p, k) reads input
/// element (b, table[p*K + k]); a negative entry reads zero.
struct PatchTable {
  Index patches = 0;
  Index width = 0;
  Index input_cols = 0;
  std::vector<Index> index;
};

template <class T>
class Tape;

/// Handle to a node on a tape. Cheap to copy; only valid while the tape lives.
template <class T>
class Var {
 public:
  Var() = default;
  Var(Tape<T>* tape, std::uint32_t id) : tape_(tape), id_(id) {}

  Tape<T>& tape() const { return *tape_; }
  std::uint32_t id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }
  const Matrix<T>& value() const;
  Index rows() const { return value().rows(); }
  Index cols() const { return value().cols(); }
  std::vector<Index> shape() const { return {rows(), cols()}; }
  bool requires_grad() const;
  T scalar() const;

 private:
  Tape<T>* tape_ = nullptr;
  std::uint32_t id_ = 0;
};

/// Gradients of a scalar with respect to parameters, keyed on parameter identity.
template <class T>
class GradientMap {
 public:
  void set(const Parameter<T>* p, Matrix<T> g) { grads_[p] = std::move(g); }
  bool contains(const Parameter<T>& p) const { return grads_.count(&p) != 0; }
  const Matrix<T>& at(const Parameter<T>& p) const {
    auto it = grads_.find(&p);
    if (it == grads_.end()) {
      throw std::out_of_range("GradientMap: parameter '" + p.name() + "' not on tape");
    }
    return it->second;
  }
  /// Zero array for parameters that never appeared on the tape.
  Matrix<T> get_or_zero(const Parameter<T>& p) const {
    auto it = grads_.find(&p);
    if (it == grads_.end()) return Matrix<T>::Zero(p.rows(), p.cols());
    return it->second;
  }
  std::size_t size() const { return grads_.size(); }

 private:
  std::unordered_map<const Parameter<T>*, Matrix<T>> grads_;
};

/// Extra arguments for kinds that carry constants.
template <class T>
struct OpArgs {
  T a = T(0);
  T b = T(0);
  Index i0 = 0;
  Index i1 = 0;
  bool trans_a = false;
  bool trans_b = false;
  std::shared_ptr<const Matrix<T>> constant;
  std::shared_ptr<const PatchTable> table;
};

template <class T>
class Tape {
 public:
  static constexpr T kLogOffset = T(1e-8);
  static constexpr std::uint32_t npos = std::numeric_limits<std::uint32_t>::max();

  Tape() { nodes_.reserve(512); }
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  std::size_t size() const { return nodes_.size(); }
  const Matrix<T>& value(std::uint32_t id) const { return nodes_[id].value; }
  bool requires_grad(std::uint32_t id) const { return nodes_[id].requires_grad; }
  Op kind(std::uint32_t id) const { return nodes_[id].op; }

  Var<T> constant(Matrix<T> v) { return leaf(std::move(v), false, nullptr); }
  Var<T> constant_scalar(T v) {
    Matrix<T> m(1, 1);
    m(0, 0) = v;
    return constant(std::move(m));
  }
  /// Differentiable input that is not a parameter (e.g. interpolated latents).
  Var<T> input(Matrix<T> v, bool requires_grad = true) {
    return leaf(std::move(v), requires_grad, nullptr);
  }
  /// Leaf for a parameter; repeated calls on one tape share the leaf.
  Var<T> param(const Parameter<T>& p) {
    auto it = param_leaf_.find(&p);
    if (it != param_leaf_.end()) return Var<T>(this, it->second);
    Var<T> v = leaf(p.value(), true, &p);
    param_leaf_.emplace(&p, v.id());
    return v;
  }
  /// Stop-gradient: a constant copy of the value.
  Var<T> detach(Var<T> x) { return constant(x.value()); }

  Var<T> apply(Op kind, std::span<const Var<T>> inputs, const OpArgs<T>& args = {});
  Var<T> apply(Op kind, std::initializer_list<Var<T>> inputs, const OpArgs<T>& args = {}) {
    return apply(kind, std::span<const Var<T>>(inputs.begin(), inputs.size()), args);
  }

  /// Graph-mode gradients: returned nodes are differentiable.
  std::vector<Var<T>> gradients(Var<T> root, std::span<const Var<T>> wrt);

  /// d root / d p for every parameter leaf on this tape (zeros if unreachable).
  GradientMap<T> backward(Var<T> root);

  /// d scalar / d wrt as a differentiable node.
  Var<T> input_gradient(Var<T> scalar, Var<T> wrt) {
    require_scalar(scalar, "input_gradient");
    if (!reaches(scalar.id(), wrt.id())) {
      throw GraphError("input_gradient: target does not influence the scalar");
    }
    std::array<Var<T>, 1> w{wrt};
    return gradients(scalar, w)[0];
  }

 private:
  struct Node {
    Op op = Op::leaf;
    Matrix<T> value;
    std::array<std::uint32_t, 3> in{npos, npos, npos};
    std::uint8_t arity = 0;
    bool requires_grad = false;
    const Parameter<T>* param = nullptr;
    OpArgs<T> args;
  };

  Var<T> leaf(Matrix<T> v, bool rg, const Parameter<T>* p) {
    Node n;
    n.value = std::move(v);
    n.requires_grad = rg;
    n.param = p;
    nodes_.push_back(std::move(n));
    return Var<T>(this, static_cast<std::uint32_t>(nodes_.size() - 1));
  }

  static std::string shape_str(const Matrix<T>& m) {
    std::ostringstream os;
    os << "[" << m.rows() << "x" << m.cols() << "]";
    return os.str();
  }

  [[noreturn]] void shape_fail(Op kind, std::span<const Var<T>> inputs) const {
    std::ostringstream os;
    os << op_name(kind) << ": incompatible shapes";
    for (const auto& v : inputs) os << " " << shape_str(nodes_[v.id()].value);
    throw ShapeError(os.str());
  }

  void require_scalar(Var<T> v, const char* what) const {
    if (nodes_[v.id()].value.size() != 1) {
      throw ShapeError(std::string(what) + ": root must be scalar, got " +
                       shape_str(nodes_[v.id()].value));
    }
  }

  bool reaches(std::uint32_t root, std::uint32_t target) const {
    if (target > root) return false;
    std::vector<bool> live(root + 1, false);
    live[root] = true;
    for (std::uint32_t i = root + 1; i-- > target;) {
      if (!live[i]) continue;
      if (i == target) return true;
      const Node& n = nodes_[i];
      for (std::uint8_t k = 0; k < n.arity; ++k) {
        if (nodes_[n.in[k]].requires_grad) live[n.in[k]] = true;
      }
    }
    return false;
  }

  Matrix<T> forward(Op kind, std::span<const Var<T>> inputs, const OpArgs<T>& args);
  void vjp(std::uint32_t id, Var<T> g, std::vector<std::uint32_t>& adj);
  void accumulate(std::vector<std::uint32_t>& adj, std::uint32_t target, Var<T> contrib);

  std::vector<Node> nodes_;
  std::unordered_map<const Parameter<T>*, std::uint32_t> param_leaf_;
};

template <class T>
const Matrix<T>& Var<T>::value() const {
  return tape_->value(id_);
}
template <class T>
bool Var<T>::requires_grad() const {
  return tape_->requires_grad(id_);
}
template <class T>
T Var<T>::scalar() const {
  const auto& v = value();
  if (v.size() != 1) throw ShapeError("scalar(): node is not scalar");
  return v(0, 0);
}

// ---------------------------------------------------------------------------
// Builders. These are what the rest of the library calls.
// ---------------------------------------------------------------------------

template <class T>
Var<T> add(Var<T> a, Var<T> b) { return a.tape().apply(Op::add, {a, b}); }
template <class T>
Var<T> sub(Var<T> a, Var<T> b) { return a.tape().apply(Op::sub, {a, b}); }
template <class T>
Var<T> mul(Var<T> a, Var<T> b) { return a.tape().apply(Op::mul, {a, b}); }
template <class T>
Var<T> matmul(Var<T> a, Var<T> b, bool trans_a = false, bool trans_b = false) {
  OpArgs<T> args;
  args.trans_a = trans_a;
  args.trans_b = trans_b;
  return a.tape().apply(Op::matmul, {a, b}, args);
}
/// x·W + b with b a 1×out row broadcast over the batch.
template <class T>
Var<T> affine(Var<T> x, Var<T> w, Var<T> b) { return x.tape().apply(Op::affine, {x, w, b}); }
template <class T>
Var<T> tanh(Var<T> x) { return x.tape().apply(Op::tanh, {x}); }
template <class T>
Var<T> relu(Var<T> x) { return x.tape().apply(Op::relu, {x}); }
template <class T>
Var<T> sigmoid(Var<T> x) { return x.tape().apply(Op::sigmoid, {x}); }
/// log(x + 1e-8).
template <class T>
Var<T> log(Var<T> x) { return x.tape().apply(Op::log, {x}); }
template <class T>
Var<T> square(Var<T> x) { return x.tape().apply(Op::square, {x}); }
template <class T>
Var<T> sum(Var<T> x) { return x.tape().apply(Op::sum, {x}); }
template <class T>
Var<T> mean(Var<T> x) { return x.tape().apply(Op::mean, {x}); }
/// Column-wise concatenation (same row count).
template <class T>
Var<T> concat(Var<T> a, Var<T> b) { return a.tape().apply(Op::concat, {a, b}); }
template <class T>
Var<T> clip(Var<T> x, T lo, T hi) {
  OpArgs<T> args;
  args.a = lo;
  args.b = hi;
  return x.tape().apply(Op::clip, {x}, args);
}
/// Row-wise Euclidean norm, r×c → r×1.
template <class T>
Var<T> l2norm(Var<T> x) { return x.tape().apply(Op::l2norm, {x}); }
/// a·x + b elementwise with constant a, b.
template <class T>
Var<T> scale_shift(Var<T> x, T a, T b) {
  OpArgs<T> args;
  args.a = a;
  args.b = b;
  return x.tape().apply(Op::scale_shift, {x}, args);
}
template <class T>
Var<T> scale(Var<T> x, T a) { return scale_shift(x, a, T(0)); }
template <class T>
Var<T> mul_const(Var<T> x, std::shared_ptr<const Matrix<T>> c) {
  OpArgs<T> args;
  args.constant = std::move(c);
  return x.tape().apply(Op::mul_const, {x}, args);
}
/// 1/x with 1/0 := 0.
template <class T>
Var<T> reciprocal(Var<T> x) { return x.tape().apply(Op::reciprocal, {x}); }
template <class T>
Var<T> sqrt(Var<T> x) { return x.tape().apply(Op::sqrt, {x}); }
template <class T>
Var<T> sum_rows(Var<T> x) { return x.tape().apply(Op::sum_rows, {x}); }
template <class T>
Var<T> sum_cols(Var<T> x) { return x.tape().apply(Op::sum_cols, {x}); }
template <class T>
Var<T> broadcast_scalar(Var<T> x, Index rows, Index cols) {
  OpArgs<T> args;
  args.i0 = rows;
  args.i1 = cols;
  return x.tape().apply(Op::broadcast_scalar, {x}, args);
}
template <class T>
Var<T> broadcast_rows(Var<T> x, Index rows) {
  OpArgs<T> args;
  args.i0 = rows;
  return x.tape().apply(Op::broadcast_rows, {x}, args);
}
template <class T>
Var<T> broadcast_cols(Var<T> x, Index cols) {
  OpArgs<T> args;
  args.i1 = cols;
  return x.tape().apply(Op::broadcast_cols, {x}, args);
}
template <class T>
Var<T> slice_cols(Var<T> x, Index offset, Index width) {
  OpArgs<T> args;
  args.i0 = offset;
  args.i1 = width;
  return x.tape().apply(Op::slice_cols, {x}, args);
}
/// Embed x into zeros of width `total` starting at column `offset`.
template <class T>
Var<T> pad_cols(Var<T> x, Index offset, Index total) {
  OpArgs<T> args;
  args.i0 = offset;
  args.i1 = total;
  return x.tape().apply(Op::pad_cols, {x}, args);
}
template <class T>
Var<T> minimum(Var<T> a, Var<T> b) { return a.tape().apply(Op::minimum, {a, b}); }
template <class T>
Var<T> patches(Var<T> x, std::shared_ptr<const PatchTable> table) {
  OpArgs<T> args;
  args.table = std::move(table);
  return x.tape().apply(Op::patches, {x}, args);
}
template <class T>
Var<T> patches_adjoint(Var<T> y, std::shared_ptr<const PatchTable> table) {
  OpArgs<T> args;
  args.table = std::move(table);
  return y.tape().apply(Op::patches_adjoint, {y}, args);
}
template <class T>
Var<T> reshape(Var<T> x, Index rows, Index cols) {
  OpArgs<T> args;
  args.i0 = rows;
  args.i1 = cols;
  return x.tape().apply(Op::reshape, {x}, args);
}

template <class T>
Var<T> operator+(Var<T> a, Var<T> b) { return add(a, b); }
template <class T>
Var<T> operator-(Var<T> a, Var<T> b) { return sub(a, b); }
template <class T>
Var<T> operator*(Var<T> a, Var<T> b) { return mul(a, b); }

// ---------------------------------------------------------------------------
// Forward kernels.
// ---------------------------------------------------------------------------

template <class T>
Var<T> Tape<T>::apply(Op kind, std::span<const Var<T>> inputs, const OpArgs<T>& args) {
  for (const auto& v : inputs) {
    if (&v.tape() != this) throw GraphError(std::string(op_name(kind)) + ": input from another tape");
  }
  Matrix<T> out = forward(kind, inputs, args);
  Node n;
  n.op = kind;
  n.value = std::move(out);
  n.arity = static_cast<std::uint8_t>(inputs.size());
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    n.in[k] = inputs[k].id();
    n.requires_grad = n.requires_grad || nodes_[inputs[k].id()].requires_grad;
  }
  n.args = args;
  nodes_.push_back(std::move(n));
  return Var<T>(this, static_cast<std::uint32_t>(nodes_.size() - 1));
}

template <class T>
Matrix<T> Tape<T>::forward(Op kind, std::span<const Var<T>> inputs, const OpArgs<T>& args) {
  auto arity = [&](std::size_t n) {
    if (inputs.size() != n) {
      throw ShapeError(std::string(op_name(kind)) + ": expected " + std::to_string(n) +
                       " inputs, got " + std::to_string(inputs.size()));
    }
  };
  auto val = [&](std::size_t k) -> const Matrix<T>& { return nodes_[inputs[k].id()].value; };
  auto same_shape = [&]() {
    if (val(0).rows() != val(1).rows() || val(0).cols() != val(1).cols()) shape_fail(kind, inputs);
  };

  switch (kind) {
    case Op::leaf:
      throw GraphError("apply: leaf is not an operation");
    case Op::add:
      arity(2);
      same_shape();
      return val(0) + val(1);
    case Op::sub:
      arity(2);
      same_shape();
      return val(0) - val(1);
    case Op::mul:
      arity(2);
      same_shape();
      return val(0).cwiseProduct(val(1));
    case Op::matmul: {
      arity(2);
      const auto& a = val(0);
      const auto& b = val(1);
      Index inner_a = args.trans_a ? a.rows() : a.cols();
      Index inner_b = args.trans_b ? b.cols() : b.rows();
      if (inner_a != inner_b) shape_fail(kind, inputs);
      if (args.trans_a && args.trans_b) return a.transpose() * b.transpose();
      if (args.trans_a) return a.transpose() * b;
      if (args.trans_b) return a * b.transpose();
      return a * b;
    }
    case Op::affine: {
      arity(3);
      const auto& x = val(0);
      const auto& w = val(1);
      const auto& b = val(2);
      if (x.cols() != w.rows() || b.rows() != 1 || b.cols() != w.cols()) shape_fail(kind, inputs);
      Matrix<T> y = x * w;
      y.rowwise() += b.row(0);
      return y;
    }
    case Op::tanh:
      arity(1);
      return val(0).array().tanh().matrix();
    case Op::relu:
      arity(1);
      return val(0).cwiseMax(T(0));
    case Op::sigmoid:
      arity(1);
      return val(0).unaryExpr([](T v) {
        // Split by sign so neither branch overflows; keep the result inside (0, 1).
        constexpr T lo = std::numeric_limits<T>::min();
        const T hi = std::nextafter(T(1), T(0));
        T y;
        if (v >= T(0)) {
          y = T(1) / (T(1) + std::exp(-v));
        } else {
          const T e = std::exp(v);
          y = e / (T(1) + e);
        }
        return std::clamp(y, lo, hi);
      });
    case Op::log: {
      arity(1);
      const auto& x = val(0);
      if ((x.array() + kLogOffset <= T(0)).any()) {
        throw DomainError("log: input must be > -1e-8 (non-positive value after offset)");
      }
      return (x.array() + kLogOffset).log().matrix();
    }
    case Op::square:
      arity(1);
      return val(0).array().square().matrix();
    case Op::sum: {
      arity(1);
      Matrix<T> m(1, 1);
      m(0, 0) = val(0).sum();
      return m;
    }
    case Op::mean: {
      arity(1);
      if (val(0).size() == 0) shape_fail(kind, inputs);
      Matrix<T> m(1, 1);
      m(0, 0) = val(0).mean();
      return m;
    }
    case Op::concat: {
      if (inputs.size() != 2) arity(2);
      const auto& a = val(0);
      const auto& b = val(1);
      if (a.rows() != b.rows()) shape_fail(kind, inputs);
      Matrix<T> m(a.rows(), a.cols() + b.cols());
      m.leftCols(a.cols()) = a;
      m.rightCols(b.cols()) = b;
      return m;
    }
    case Op::clip:
      arity(1);
      if (args.a > args.b) throw DomainError("clip: lower bound exceeds upper bound");
      return val(0).cwiseMax(args.a).cwiseMin(args.b);
    case Op::l2norm:
      arity(1);
      return val(0).rowwise().norm();
    case Op::scale_shift:
      arity(1);
      return ((val(0).array() * args.a) + args.b).matrix();
    case Op::mul_const:
      arity(1);
      if (!args.constant || args.constant->rows() != val(0).rows() ||
          args.constant->cols() != val(0).cols()) {
        shape_fail(kind, inputs);
      }
      return val(0).cwiseProduct(*args.constant);
    case Op::reciprocal:
      arity(1);
      return val(0).unaryExpr([](T v) { return v == T(0) ? T(0) : T(1) / v; });
    case Op::sqrt:
      arity(1);
      if ((val(0).array() < T(0)).any()) throw DomainError("sqrt: negative input");
      return val(0).array().sqrt().matrix();
    case Op::sum_rows:
      arity(1);
      return val(0).colwise().sum();
    case Op::sum_cols:
      arity(1);
      return val(0).rowwise().sum();
    case Op::broadcast_scalar:
      arity(1);
      if (val(0).size() != 1) shape_fail(kind, inputs);
      return Matrix<T>::Constant(args.i0, args.i1, val(0)(0, 0));
    case Op::broadcast_rows:
      arity(1);
      if (val(0).rows() != 1) shape_fail(kind, inputs);
      return val(0).replicate(args.i0, 1);
    case Op::broadcast_cols:
      arity(1);
      if (val(0).cols() != 1) shape_fail(kind, inputs);
      return val(0).replicate(1, args.i1);
    case Op::slice_cols:
      arity(1);
      if (args.i0 < 0 || args.i1 < 0 || args.i0 + args.i1 > val(0).cols()) shape_fail(kind, inputs);
      return val(0).middleCols(args.i0, args.i1);
    case Op::pad_cols: {
      arity(1);
      if (args.i0 < 0 || args.i0 + val(0).cols() > args.i1) shape_fail(kind, inputs);
      Matrix<T> m = Matrix<T>::Zero(val(0).rows(), args.i1);
      m.middleCols(args.i0, val(0).cols()) = val(0);
      return m;
    }
    case Op::minimum:
      arity(2);
      same_shape();
      return val(0).cwiseMin(val(1));
    case Op::patches: {
      arity(1);
      const auto& x = val(0);
      const PatchTable& t = *args.table;
      if (x.cols() != t.input_cols) shape_fail(kind, inputs);
      Matrix<T> y(x.rows() * t.patches, t.width);
      for (Index b = 0; b < x.rows(); ++b) {
        const T* src = x.data() + b * x.cols();
        T* dst = y.data() + b * t.patches * t.width;
        const Index n = t.patches * t.width;
        for (Index j = 0; j < n; ++j) {
          Index s = t.index[static_cast<std::size_t>(j)];
          dst[j] = s < 0 ? T(0) : src[s];
        }
      }
      return y;
    }
    case Op::patches_adjoint: {
      arity(1);
      const auto& y = val(0);
      const PatchTable& t = *args.table;
      if (y.cols() != t.width || y.rows() % t.patches != 0) shape_fail(kind, inputs);
      const Index batch = y.rows() / t.patches;
      Matrix<T> x = Matrix<T>::Zero(batch, t.input_cols);
      for (Index b = 0; b < batch; ++b) {
        T* dst = x.data() + b * t.input_cols;
        const T* src = y.data() + b * t.patches * t.width;
        const Index n = t.patches * t.width;
        for (Index j = 0; j < n; ++j) {
          Index s = t.index[static_cast<std::size_t>(j)];
          if (s >= 0) dst[s] += src[j];
        }
      }
      return x;
    }
    case Op::reshape: {
      arity(1);
      if (args.i0 * args.i1 != val(0).size()) shape_fail(kind, inputs);
      // Row-major storage: element order is preserved.
      return Eigen::Map<const Matrix<T>>(val(0).data(), args.i0, args.i1);
    }
  }
  throw GraphError("apply: unknown operation kind");
}

// ---------------------------------------------------------------------------
// Reverse pass.
// ---------------------------------------------------------------------------

template <class T>
void Tape<T>::accumulate(std::vector<std::uint32_t>& adj, std::uint32_t target, Var<T> contrib) {
  if (adj[target] == npos) {
    adj[target] = contrib.id();
  } else {
    adj[target] = add(Var<T>(this, adj[target]), contrib).id();
  }
}

template <class T>
void Tape<T>::vjp(std::uint32_t id, Var<T> g, std::vector<std::uint32_t>& adj) {
  // Copy what we need: emitting nodes may reallocate nodes_.
  const Op op = nodes_[id].op;
  const std::array<std::uint32_t, 3> in = nodes_[id].in;
  const OpArgs<T> args = nodes_[id].args;
  auto needs = [&](int k) { return nodes_[in[k]].requires_grad; };
  auto v = [&](int k) { return Var<T>(this, in[k]); };
  Var<T> self(this, id);

  auto mask_of = [&](int k, auto pred) {
    const Matrix<T>& x = nodes_[in[k]].value;
    auto m = std::make_shared<Matrix<T>>(x.rows(), x.cols());
    for (Index i = 0; i < x.size(); ++i) m->data()[i] = pred(x.data()[i]) ? T(1) : T(0);
    return std::shared_ptr<const Matrix<T>>(std::move(m));
  };

  switch (op) {
    case Op::leaf:
      return;
    case Op::add:
      if (needs(0)) accumulate(adj, in[0], g);
      if (needs(1)) accumulate(adj, in[1], g);
      return;
    case Op::sub:
      if (needs(0)) accumulate(adj, in[0], g);
      if (needs(1)) accumulate(adj, in[1], scale(g, T(-1)));
      return;
    case Op::mul:
      if (needs(0)) accumulate(adj, in[0], mul(g, v(1)));
      if (needs(1)) accumulate(adj, in[1], mul(g, v(0)));
      return;
    case Op::matmul: {
      // C = op(A) op(B). Each case closes over {nn, nt, tn} products.
      const bool ta = args.trans_a;
      const bool tb = args.trans_b;
      if (needs(0)) {
        Var<T> ga;
        if (!ta && !tb) ga = matmul(g, v(1), false, true);
        else if (!ta && tb) ga = matmul(g, v(1));
        else if (ta && !tb) ga = matmul(v(1), g, false, true);
        else ga = matmul(v(1), g, true, true);
        accumulate(adj, in[0], ga);
      }
      if (needs(1)) {
        Var<T> gb;
        if (!ta && !tb) gb = matmul(v(0), g, true, false);
        else if (!ta && tb) gb = matmul(g, v(0), true, false);
        else if (ta && !tb) gb = matmul(v(0), g);
        else gb = matmul(g, v(0), true, true);
        accumulate(adj, in[1], gb);
      }
      return;
    }
    case Op::affine:
      if (needs(0)) accumulate(adj, in[0], matmul(g, v(1), false, true));
      if (needs(1)) accumulate(adj, in[1], matmul(v(0), g, true, false));
      if (needs(2)) accumulate(adj, in[2], sum_rows(g));
      return;
    case Op::tanh:
      // 1 - y^2
      if (needs(0)) accumulate(adj, in[0], mul(g, scale_shift(square(self), T(-1), T(1))));
      return;
    case Op::relu:
      if (needs(0)) accumulate(adj, in[0], mul_const(g, mask_of(0, [](T x) { return x > T(0); })));
      return;
    case Op::sigmoid:
      if (needs(0)) accumulate(adj, in[0], mul(g, mul(self, scale_shift(self, T(-1), T(1)))));
      return;
    case Op::log:
      if (needs(0)) {
        accumulate(adj, in[0], mul(g, reciprocal(scale_shift(v(0), T(1), kLogOffset))));
      }
      return;
    case Op::square:
      if (needs(0)) accumulate(adj, in[0], mul(g, scale(v(0), T(2))));
      return;
    case Op::sum: {
      const auto& x = nodes_[in[0]].value;
      if (needs(0)) accumulate(adj, in[0], broadcast_scalar(g, x.rows(), x.cols()));
      return;
    }
    case Op::mean: {
      const auto& x = nodes_[in[0]].value;
      const T inv = T(1) / static_cast<T>(x.size());
      const Index r = x.rows();
      const Index c = x.cols();
      if (needs(0)) accumulate(adj, in[0], broadcast_scalar(scale(g, inv), r, c));
      return;
    }
    case Op::concat: {
      const Index ca = nodes_[in[0]].value.cols();
      const Index cb = nodes_[in[1]].value.cols();
      if (needs(0)) accumulate(adj, in[0], slice_cols(g, 0, ca));
      if (needs(1)) accumulate(adj, in[1], slice_cols(g, ca, cb));
      return;
    }
    case Op::clip: {
      const T lo = args.a;
      const T hi = args.b;
      if (needs(0)) {
        accumulate(adj, in[0], mul_const(g, mask_of(0, [lo, hi](T x) { return x > lo && x < hi; })));
      }
      return;
    }
    case Op::l2norm: {
      // d|x|/dx = x / |x|, with the zero row mapped to a zero subgradient.
      const Index c = nodes_[in[0]].value.cols();
      if (needs(0)) accumulate(adj, in[0], mul(broadcast_cols(mul(g, reciprocal(self)), c), v(0)));
      return;
    }
    case Op::scale_shift:
      if (needs(0)) accumulate(adj, in[0], scale(g, args.a));
      return;
    case Op::mul_const:
      if (needs(0)) accumulate(adj, in[0], mul_const(g, args.constant));
      return;
    case Op::reciprocal:
      if (needs(0)) accumulate(adj, in[0], mul(g, scale(square(self), T(-1))));
      return;
    case Op::sqrt:
      if (needs(0)) accumulate(adj, in[0], mul(g, scale(reciprocal(self), T(0.5))));
      return;
    case Op::sum_rows: {
      const Index r = nodes_[in[0]].value.rows();
      if (needs(0)) accumulate(adj, in[0], broadcast_rows(g, r));
      return;
    }
    case Op::sum_cols: {
      const Index c = nodes_[in[0]].value.cols();
      if (needs(0)) accumulate(adj, in[0], broadcast_cols(g, c));
      return;
    }
    case Op::broadcast_scalar:
      if (needs(0)) accumulate(adj, in[0], sum(g));
      return;
    case Op::broadcast_rows:
      if (needs(0)) accumulate(adj, in[0], sum_rows(g));
      return;
    case Op::broadcast_cols:
      if (needs(0)) accumulate(adj, in[0], sum_cols(g));
      return;
    case Op::slice_cols: {
      const Index total = nodes_[in[0]].value.cols();
      if (needs(0)) accumulate(adj, in[0], pad_cols(g, args.i0, total));
      return;
    }
    case Op::pad_cols: {
      const Index w = nodes_[in[0]].value.cols();
      if (needs(0)) accumulate(adj, in[0], slice_cols(g, args.i0, w));
      return;
    }
    case Op::minimum: {
      // Ties route the gradient to the first operand.
      const Matrix<T>& a = nodes_[in[0]].value;
      const Matrix<T>& b = nodes_[in[1]].value;
      auto ma = std::make_shared<Matrix<T>>(a.rows(), a.cols());
      auto mb = std::make_shared<Matrix<T>>(a.rows(), a.cols());
      for (Index i = 0; i < a.size(); ++i) {
        const bool first = a.data()[i] <= b.data()[i];
        ma->data()[i] = first ? T(1) : T(0);
        mb->data()[i] = first ? T(0) : T(1);
      }
      if (needs(0)) accumulate(adj, in[0], mul_const(g, std::shared_ptr<const Matrix<T>>(ma)));
      if (needs(1)) accumulate(adj, in[1], mul_const(g, std::shared_ptr<const Matrix<T>>(mb)));
      return;
    }
    case Op::patches:
      if (needs(0)) accumulate(adj, in[0], patches_adjoint(g, args.table));
      return;
    case Op::patches_adjoint:
      if (needs(0)) accumulate(adj, in[0], patches(g, args.table));
      return;
    case Op::reshape: {
      const Index r = nodes_[in[0]].value.rows();
      const Index c = nodes_[in[0]].value.cols();
      if (needs(0)) accumulate(adj, in[0], reshape(g, r, c));
      return;
    }
  }
}

template <class T>
std::vector<Var<T>> Tape<T>::gradients(Var<T> root, std::span<const Var<T>> wrt) {
  require_scalar(root, "backward");
  const std::uint32_t r = root.id();
  std::vector<std::uint32_t> adj(r + 1, npos);
  if (nodes_[r].requires_grad) {
    adj[r] = constant(Matrix<T>::Ones(1, 1)).id();
    for (std::uint32_t i = r + 1; i-- > 0;) {
      if (adj[i] == npos) continue;
      if (nodes_[i].op == Op::leaf) continue;
      vjp(i, Var<T>(this, adj[i]), adj);
    }
  }
  std::vector<Var<T>> out;
  out.reserve(wrt.size());
  for (const auto& w : wrt) {
    if (w.id() <= r && adj[w.id()] != npos) {
      out.emplace_back(this, adj[w.id()]);
    } else {
      const auto& x = nodes_[w.id()].value;
      out.push_back(constant(Matrix<T>::Zero(x.rows(), x.cols())));
    }
  }
  return out;
}

template <class T>
GradientMap<T> Tape<T>::backward(Var<T> root) {
  std::vector<Var<T>> leaves;
  std::vector<const Parameter<T>*> params;
  for (std::uint32_t i = 0; i < nodes_.size(); ++i) {
    if (nodes_[i].param) {
      leaves.emplace_back(this, i);
      params.push_back(nodes_[i].param);
    }
  }
  auto gs = gradients(root, leaves);
  GradientMap<T> out;
  for (std::size_t k = 0; k < gs.size(); ++k) out.set(params[k], gs[k].value());
  return out;
}

}  // namespace laifo::grad
