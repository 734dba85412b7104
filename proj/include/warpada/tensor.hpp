#pragma once

// Dense float64 tensors and a define-by-run reverse-mode tape.
//
// A Tape owns every value recorded during one forward pass. Var is a cheap
// handle (tape pointer + node id) and is only meaningful while its tape is
// alive. Tapes are not thread-safe; use one tape per thread.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <memory>
#include <numeric>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace warpada {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using Shape = std::vector<std::size_t>;

inline std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ", ";
    os << shape[i];
  }
  os << ']';
  return os.str();
}

inline std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>{});
}

/// Row-major float64 array. Rank 0 is a scalar holding one element.
class Tensor {
 public:
  Tensor() : data_(1, 0.0) {}
  explicit Tensor(double value) : data_(1, value) {}
  Tensor(Shape shape, std::vector<double> data) : shape_(std::move(shape)), data_(std::move(data)) {
    if (shape_size(shape_) != data_.size()) {
      throw Error("tensor shape " + shape_string(shape_) + " holds " +
                  std::to_string(shape_size(shape_)) + " elements but data has " +
                  std::to_string(data_.size()));
    }
  }

  static Tensor zeros(Shape shape) { return full(std::move(shape), 0.0); }
  static Tensor full(Shape shape, double value) {
    const auto n = shape_size(shape);
    return Tensor(std::move(shape), std::vector<double>(n, value));
  }
  static Tensor vector(std::vector<double> values) {
    const auto n = values.size();
    return Tensor({n}, std::move(values));
  }
  static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> values) {
    return Tensor({rows, cols}, std::move(values));
  }

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t size() const noexcept { return data_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
  bool is_scalar() const noexcept { return shape_.empty(); }

  std::span<double> data() & noexcept { return data_; }
  std::span<const double> data() const& noexcept { return data_; }
  std::span<const double> data() && = delete;  // would dangle
  const std::vector<double>& values() const noexcept { return data_; }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }
  double& at(std::size_t r, std::size_t c) { return data_[r * shape_[1] + c]; }
  double at(std::size_t r, std::size_t c) const { return data_[r * shape_[1] + c]; }

  double item() const {
    if (data_.size() != 1) throw Error("item() on tensor of shape " + shape_string(shape_));
    return data_[0];
  }

  bool all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
  }

  Tensor reshaped(Shape shape) const { return Tensor(std::move(shape), data_); }

  bool operator==(const Tensor& other) const = default;

 private:
  Shape shape_;
  std::vector<double> data_;
};

class Tape;

/// Handle to a node on a Tape.
class Var {
 public:
  Var() = default;

  Tape& tape() const { return *tape_; }
  std::size_t id() const noexcept { return id_; }
  bool valid() const noexcept { return tape_ != nullptr; }

  inline const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  std::size_t size() const { return value().size(); }
  double item() const { return value().item(); }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}
  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

namespace testing_hooks {
// Flips the sign of the cos backward rule. Only the gradcheck mutation test sets this.
inline bool& flip_cos_backward() {
  static thread_local bool flag = false;
  return flag;
}

// Distance of the last forward pass to the nearest kink (relu at zero, an
// argmin/argmax switch, a clip threshold). Only tracked while enabled, so
// finite-difference probes can pick points where the function is smooth.
inline bool& track_kinks() {
  static thread_local bool flag = false;
  return flag;
}
inline double& kink_margin() {
  static thread_local double margin = std::numeric_limits<double>::infinity();
  return margin;
}
inline void note_kink(double distance) {
  if (track_kinks()) kink_margin() = std::min(kink_margin(), std::fabs(distance));
}
}  // namespace testing_hooks

class Tape {
 public:
  /// grad_in[j] is null when input j does not require a gradient.
  using BackwardFn =
      std::function<void(const Tape&, const Tensor& grad_out, std::span<Tensor* const> grad_in)>;

  explicit Tape(bool checked = true) : checked_(checked) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool checked() const noexcept { return checked_; }
  std::size_t size() const noexcept { return nodes_.size(); }

  Var leaf(Tensor value, bool requires_grad = true) {
    if (checked_ && !value.all_finite()) {
      throw Error("non-finite value in leaf tensor of shape " + shape_string(value.shape()));
    }
    Node node;
    node.value = std::move(value);
    node.requires_grad = requires_grad;
    nodes_.push_back(std::move(node));
    return Var(this, nodes_.size() - 1);
  }

  Var constant(Tensor value) { return leaf(std::move(value), false); }

  Var record(Tensor value, std::initializer_list<Var> inputs, BackwardFn fn) {
    Node node;
    node.value = std::move(value);
    for (const Var& in : inputs) {
      if (in.tape_ != this) throw Error("operation mixes variables from different tapes");
      node.inputs.push_back(in.id_);
      node.requires_grad = node.requires_grad || nodes_[in.id_].requires_grad;
    }
    if (node.requires_grad) node.backward = std::move(fn);
    nodes_.push_back(std::move(node));
    return Var(this, nodes_.size() - 1);
  }

  const Tensor& value(Var v) const { return nodes_.at(v.id_).value; }
  const Tensor& value(std::size_t id) const { return nodes_.at(id).value; }
  bool requires_grad(Var v) const { return nodes_.at(v.id_).requires_grad; }

  /// Gradient of the last backward() root with respect to v; zeros if unreached.
  Tensor grad(Var v) const {
    const Node& node = nodes_.at(v.id_);
    if (!node.has_grad) return Tensor::zeros(node.value.shape());
    return node.grad;
  }

  /// Reverse sweep from a scalar root. Previous gradients are discarded, so
  /// calling this twice yields identical results.
  void backward(Var root) {
    if (root.tape_ != this) throw Error("backward root belongs to a different tape");
    if (nodes_.empty()) throw Error("backward on empty tape");
    const Tensor& rv = nodes_[root.id_].value;
    if (rv.size() != 1) throw Error("backward requires a scalar root, got shape " + shape_string(rv.shape()));
    for (Node& n : nodes_) {
      n.has_grad = false;
      n.grad = Tensor();
    }
    Node& r = nodes_[root.id_];
    r.grad = Tensor::full(rv.shape(), 1.0);
    r.has_grad = true;

    std::vector<Tensor*> grad_in;
    for (std::size_t id = root.id_ + 1; id-- > 0;) {
      Node& node = nodes_[id];
      if (!node.requires_grad || !node.has_grad || !node.backward) continue;
      grad_in.assign(node.inputs.size(), nullptr);
      for (std::size_t j = 0; j < node.inputs.size(); ++j) {
        Node& in = nodes_[node.inputs[j]];
        if (!in.requires_grad) continue;
        if (!in.has_grad) {
          in.grad = Tensor::zeros(in.value.shape());
          in.has_grad = true;
        }
        grad_in[j] = &in.grad;
      }
      node.backward(*this, node.grad, grad_in);
    }
  }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    bool has_grad = false;
    bool requires_grad = false;
    std::vector<std::size_t> inputs;
    BackwardFn backward;
  };

  bool checked_;
  std::vector<Node> nodes_;
};

inline const Tensor& Var::value() const { return tape_->value(*this); }

namespace detail {

inline void require_same_tape(Var a, Var b) {
  if (&a.tape() != &b.tape()) throw Error("operation mixes variables from different tapes");
}

enum class Broadcast { none, left_scalar, right_scalar };

inline Broadcast broadcast_mode(std::string_view op, const Tensor& a, const Tensor& b) {
  if (a.shape() == b.shape()) return Broadcast::none;
  if (a.is_scalar()) return Broadcast::left_scalar;
  if (b.is_scalar()) return Broadcast::right_scalar;
  throw Error(std::string(op) + ": shape mismatch " + shape_string(a.shape()) + " vs " +
              shape_string(b.shape()));
}

// Elementwise binary op with rank-0 broadcasting. dfa/dfb return the partial
// derivative of f with respect to the left/right operand at (x, y).
template <class F, class DFA, class DFB>
Var binary(std::string_view name, Var a, Var b, F f, DFA dfa, DFB dfb) {
  require_same_tape(a, b);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  const Broadcast mode = broadcast_mode(name, av, bv);
  const Tensor& like = mode == Broadcast::left_scalar ? bv : av;
  Tensor out = Tensor::zeros(like.shape());
  const std::size_t n = out.size();
  auto lhs = [&](std::size_t i) { return mode == Broadcast::left_scalar ? av[0] : av[i]; };
  auto rhs = [&](std::size_t i) { return mode == Broadcast::right_scalar ? bv[0] : bv[i]; };
  for (std::size_t i = 0; i < n; ++i) out[i] = f(lhs(i), rhs(i));

  const std::size_t ia = a.id(), ib = b.id();
  return a.tape().record(std::move(out), {a, b},
                         [=](const Tape& t, const Tensor& g, std::span<Tensor* const> gin) {
                           const Tensor& x = t.value(ia);
                           const Tensor& y = t.value(ib);
                           for (std::size_t i = 0; i < g.size(); ++i) {
                             const double xi = mode == Broadcast::left_scalar ? x[0] : x[i];
                             const double yi = mode == Broadcast::right_scalar ? y[0] : y[i];
                             if (gin[0]) (*gin[0])[mode == Broadcast::left_scalar ? 0 : i] += g[i] * dfa(xi, yi);
                             if (gin[1]) (*gin[1])[mode == Broadcast::right_scalar ? 0 : i] += g[i] * dfb(xi, yi);
                           }
                         });
}

template <class F, class DF>
Var unary(Var x, F f, DF df) {
  const Tensor& xv = x.value();
  Tensor out = Tensor::zeros(xv.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(xv[i]);
  const std::size_t ix = x.id();
  return x.tape().record(std::move(out), {x},
                         [=](const Tape& t, const Tensor& g, std::span<Tensor* const> gin) {
                           const Tensor& v = t.value(ix);
                           for (std::size_t i = 0; i < g.size(); ++i) (*gin[0])[i] += g[i] * df(v[i]);
                         });
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Elementwise arithmetic

inline Var add(Var a, Var b) {
  return detail::binary(
      "add", a, b, [](double x, double y) { return x + y; }, [](double, double) { return 1.0; },
      [](double, double) { return 1.0; });
}

inline Var sub(Var a, Var b) {
  return detail::binary(
      "sub", a, b, [](double x, double y) { return x - y; }, [](double, double) { return 1.0; },
      [](double, double) { return -1.0; });
}

inline Var mul(Var a, Var b) {
  return detail::binary(
      "mul", a, b, [](double x, double y) { return x * y; }, [](double, double y) { return y; },
      [](double x, double) { return x; });
}

inline Var div(Var a, Var b) {
  if (a.tape().checked()) {
    for (double v : b.value().data()) {
      if (v == 0.0) throw Error("div: divisor contains zero");
    }
  }
  return detail::binary(
      "div", a, b, [](double x, double y) { return x / y; }, [](double, double y) { return 1.0 / y; },
      [](double x, double y) { return -x / (y * y); });
}

inline Var scale(Var x, double factor) {
  return detail::unary(
      x, [factor](double v) { return v * factor; }, [factor](double) { return factor; });
}

inline Var neg(Var x) { return scale(x, -1.0); }

inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator-(Var a, Var b) { return sub(a, b); }
inline Var operator*(Var a, Var b) { return mul(a, b); }
inline Var operator/(Var a, Var b) { return div(a, b); }
inline Var operator-(Var a) { return neg(a); }
inline Var operator*(Var a, double s) { return scale(a, s); }
inline Var operator*(double s, Var a) { return scale(a, s); }
inline Var operator+(Var a, double s) { return add(a, a.tape().constant(Tensor(s))); }
inline Var operator-(Var a, double s) { return sub(a, a.tape().constant(Tensor(s))); }

// ---------------------------------------------------------------------------
// Elementwise functions

inline Var relu(Var x) {
  if (testing_hooks::track_kinks()) {
    for (double v : x.value().data()) testing_hooks::note_kink(v);
  }
  return detail::unary(
      x, [](double v) { return v > 0.0 ? v : 0.0; }, [](double v) { return v > 0.0 ? 1.0 : 0.0; });
}

inline Var cos(Var x) {
  const double sign = testing_hooks::flip_cos_backward() ? -1.0 : 1.0;
  return detail::unary(
      x, [](double v) { return std::cos(v); }, [sign](double v) { return -sign * std::sin(v); });
}

inline Var sin(Var x) {
  return detail::unary(
      x, [](double v) { return std::sin(v); }, [](double v) { return std::cos(v); });
}

inline Var exp(Var x) {
  return detail::unary(
      x, [](double v) { return std::exp(v); }, [](double v) { return std::exp(v); });
}

inline Var log(Var x) {
  if (x.tape().checked()) {
    for (double v : x.value().data()) {
      if (!(v > 0.0)) throw Error("log: non-positive input " + std::to_string(v));
    }
  }
  return detail::unary(
      x, [](double v) { return std::log(v); }, [](double v) { return 1.0 / v; });
}

/// Subgradient 0 at 0.
inline Var abs(Var x) {
  return detail::unary(
      x, [](double v) { return std::fabs(v); },
      [](double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); });
}

// ---------------------------------------------------------------------------
// Reductions

inline Var sum(Var x) {
  double s = 0.0;
  for (double v : x.value().data()) s += v;
  return x.tape().record(Tensor(s), {x}, [](const Tape&, const Tensor& g, std::span<Tensor* const> gin) {
    for (double& v : gin[0]->data()) v += g[0];
  });
}

inline Var mean(Var x) {
  const std::size_t n = x.size();
  if (n == 0) throw Error("mean of empty tensor");
  return scale(sum(x), 1.0 / static_cast<double>(n));
}

namespace detail {

template <class Better>
Var extremum(std::string_view name, Var x, Better better) {
  const Tensor& xv = x.value();
  if (xv.size() == 0) throw Error(std::string(name) + " of empty tensor");
  std::size_t best = 0;
  for (std::size_t i = 1; i < xv.size(); ++i) {
    if (better(xv[i], xv[best])) best = i;
  }
  if (testing_hooks::track_kinks()) {
    // Exact ties come from structurally equal entries and do not move apart.
    for (std::size_t i = 0; i < xv.size(); ++i) {
      if (i != best && xv[i] != xv[best]) testing_hooks::note_kink(xv[i] - xv[best]);
    }
  }
  return x.tape().record(Tensor(xv[best]), {x},
                         [best](const Tape&, const Tensor& g, std::span<Tensor* const> gin) {
                           (*gin[0])[best] += g[0];
                         });
}

}  // namespace detail

/// Minimum element; the gradient goes to the first index attaining it.
inline Var min_reduce(Var x) {
  return detail::extremum("min_reduce", x, [](double a, double b) { return a < b; });
}

/// Maximum element; the gradient goes to the first index attaining it.
inline Var max_reduce(Var x) {
  return detail::extremum("max_reduce", x, [](double a, double b) { return a > b; });
}

inline Var cumsum(Var x) {
  const Tensor& xv = x.value();
  if (xv.rank() != 1) throw Error("cumsum expects rank-1 input, got " + shape_string(xv.shape()));
  if (xv.size() == 0) throw Error("cumsum of empty tensor");
  Tensor out = Tensor::zeros(xv.shape());
  double acc = 0.0;
  for (std::size_t i = 0; i < xv.size(); ++i) {
    acc += xv[i];
    out[i] = acc;
  }
  return x.tape().record(std::move(out), {x}, [](const Tape&, const Tensor& g, std::span<Tensor* const> gin) {
    double acc = 0.0;
    for (std::size_t i = g.size(); i-- > 0;) {
      acc += g[i];
      (*gin[0])[i] += acc;
    }
  });
}

// ---------------------------------------------------------------------------
// Shape manipulation

inline Var reshape(Var x, Shape shape) {
  if (shape_size(shape) != x.size()) {
    throw Error("reshape: cannot view " + shape_string(x.shape()) + " as " + shape_string(shape));
  }
  return x.tape().record(x.value().reshaped(std::move(shape)), {x},
                         [](const Tape&, const Tensor& g, std::span<Tensor* const> gin) {
                           auto dst = gin[0]->data();
                           for (std::size_t i = 0; i < g.size(); ++i) dst[i] += g[i];
                         });
}

/// out.flat[j] = x.flat[indices[j]]; backward scatters with accumulation.
inline Var gather(Var x, std::shared_ptr<const std::vector<std::size_t>> indices, Shape out_shape) {
  if (shape_size(out_shape) != indices->size()) {
    throw Error("gather: index count " + std::to_string(indices->size()) + " does not fill shape " +
                shape_string(out_shape));
  }
  const Tensor& xv = x.value();
  Tensor out = Tensor::zeros(std::move(out_shape));
  for (std::size_t j = 0; j < indices->size(); ++j) {
    const std::size_t src = (*indices)[j];
    if (src >= xv.size()) throw Error("gather: index " + std::to_string(src) + " out of range");
    out[j] = xv[src];
  }
  return x.tape().record(std::move(out), {x},
                         [indices](const Tape&, const Tensor& g, std::span<Tensor* const> gin) {
                           for (std::size_t j = 0; j < indices->size(); ++j) (*gin[0])[(*indices)[j]] += g[j];
                         });
}

inline Var gather(Var x, std::vector<std::size_t> indices, Shape out_shape) {
  return gather(x, std::make_shared<const std::vector<std::size_t>>(std::move(indices)), std::move(out_shape));
}

// ---------------------------------------------------------------------------
// Linear algebra

inline Var matmul(Var a, Var b) {
  detail::require_same_tape(a, b);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (av.rank() != 2 || bv.rank() != 2 || av.dim(1) != bv.dim(0)) {
    throw Error("matmul: incompatible shapes " + shape_string(av.shape()) + " and " + shape_string(bv.shape()));
  }
  const std::size_t m = av.dim(0), k = av.dim(1), n = bv.dim(1);
  Tensor out = Tensor::zeros({m, n});
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = av[i * k + p];
      if (aip == 0.0) continue;
      const double* brow = &bv.data()[p * n];
      double* orow = &out.data()[i * n];
      for (std::size_t j = 0; j < n; ++j) orow[j] += aip * brow[j];
    }
  }
  const std::size_t ia = a.id(), ib = b.id();
  return a.tape().record(std::move(out), {a, b},
                         [=](const Tape& t, const Tensor& g, std::span<Tensor* const> gin) {
                           const Tensor& A = t.value(ia);
                           const Tensor& B = t.value(ib);
                           if (gin[0]) {  // dA = dC * B^T
                             for (std::size_t i = 0; i < m; ++i)
                               for (std::size_t p = 0; p < k; ++p) {
                                 double acc = 0.0;
                                 for (std::size_t j = 0; j < n; ++j) acc += g[i * n + j] * B[p * n + j];
                                 (*gin[0])[i * k + p] += acc;
                               }
                           }
                           if (gin[1]) {  // dB = A^T * dC
                             for (std::size_t i = 0; i < m; ++i)
                               for (std::size_t p = 0; p < k; ++p) {
                                 const double aip = A[i * k + p];
                                 if (aip == 0.0) continue;
                                 for (std::size_t j = 0; j < n; ++j) (*gin[1])[p * n + j] += aip * g[i * n + j];
                               }
                           }
                         });
}

/// Cross-correlation of x[C_in x N] with kernels[C_out x C_in x W] and zero
/// padding `pad` on both sides.
inline Var conv1d(Var x, Var kernels, std::size_t stride, std::size_t pad) {
  detail::require_same_tape(x, kernels);
  const Tensor& xv = x.value();
  const Tensor& kv = kernels.value();
  if (xv.rank() != 2 || kv.rank() != 3 || kv.dim(1) != xv.dim(0)) {
    throw Error("conv1d: incompatible shapes " + shape_string(xv.shape()) + " and " + shape_string(kv.shape()));
  }
  if (stride == 0) throw Error("conv1d: stride must be positive");
  const std::size_t cin = xv.dim(0), n = xv.dim(1), cout = kv.dim(0), w = kv.dim(2);
  if (w > n + 2 * pad) {
    throw Error("conv1d: kernel width " + std::to_string(w) + " exceeds padded length " +
                std::to_string(n + 2 * pad));
  }
  const std::size_t nout = (n + 2 * pad - w) / stride + 1;
  // For tap k, output t reads input t*stride + k - pad; these are the t with that index in [0, n).
  auto valid_range = [=](std::size_t k) {
    std::size_t lo = 0;
    if (k < pad) lo = (pad - k + stride - 1) / stride;
    std::size_t hi = 0;  // exclusive
    if (n + pad > k) hi = std::min(nout, (n + pad - k - 1) / stride + 1);
    return std::pair{lo, std::max(lo, hi)};
  };
  Tensor out = Tensor::zeros({cout, nout});
  for (std::size_t o = 0; o < cout; ++o) {
    double* orow = &out.data()[o * nout];
    for (std::size_t c = 0; c < cin; ++c) {
      const double* xrow = &xv.data()[c * n];
      for (std::size_t k = 0; k < w; ++k) {
        const double kw = kv[(o * cin + c) * w + k];
        const auto [lo, hi] = valid_range(k);
        for (std::size_t t = lo; t < hi; ++t) orow[t] += kw * xrow[t * stride + k - pad];
      }
    }
  }

  const std::size_t ix = x.id(), ik = kernels.id();
  return x.tape().record(std::move(out), {x, kernels},
                         [=](const Tape& t, const Tensor& g, std::span<Tensor* const> gin) {
                           const Tensor& X = t.value(ix);
                           const Tensor& K = t.value(ik);
                           for (std::size_t o = 0; o < cout; ++o) {
                             const double* grow = &g.data()[o * nout];
                             for (std::size_t c = 0; c < cin; ++c) {
                               for (std::size_t k = 0; k < w; ++k) {
                                 const std::size_t ki = (o * cin + c) * w + k;
                                 const auto [lo, hi] = valid_range(k);
                                 if (gin[0]) {
                                   double* dx = &gin[0]->data()[c * n];
                                   const double kw = K[ki];
                                   for (std::size_t tt = lo; tt < hi; ++tt) dx[tt * stride + k - pad] += grow[tt] * kw;
                                 }
                                 if (gin[1]) {
                                   const double* xrow = &X.data()[c * n];
                                   double acc = 0.0;
                                   for (std::size_t tt = lo; tt < hi; ++tt) acc += grow[tt] * xrow[tt * stride + k - pad];
                                   (*gin[1])[ki] += acc;
                                 }
                               }
                             }
                           }
                         });
}

/// Adds bias[r] to every element of row r of x[R x K].
inline Var add_bias(Var x, Var bias) {
  detail::require_same_tape(x, bias);
  const Tensor& xv = x.value();
  const Tensor& bv = bias.value();
  if (xv.rank() != 2 || bv.rank() != 1 || bv.dim(0) != xv.dim(0)) {
    throw Error("add_bias: incompatible shapes " + shape_string(xv.shape()) + " and " + shape_string(bv.shape()));
  }
  const std::size_t rows = xv.dim(0), cols = xv.dim(1);
  Tensor out = xv;
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) out[r * cols + c] += bv[r];
  return x.tape().record(std::move(out), {x, bias},
                         [=](const Tape&, const Tensor& g, std::span<Tensor* const> gin) {
                           for (std::size_t r = 0; r < rows; ++r)
                             for (std::size_t c = 0; c < cols; ++c) {
                               if (gin[0]) (*gin[0])[r * cols + c] += g[r * cols + c];
                               if (gin[1]) (*gin[1])[r] += g[r * cols + c];
                             }
                         });
}

}  // namespace warpada
