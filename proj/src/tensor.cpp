#include "xmt/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>
#include <sstream>

#include "xmt/rng.hpp"

namespace xmt {

std::int64_t shape_numel(const Shape& shape) {
  std::int64_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "x" : "") << shape[i];
  os << ']';
  return os.str();
}

namespace {

void require_finite(const std::vector<double>& v, const char* what) {
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!std::isfinite(v[i])) {
      std::ostringstream os;
      os << what << ": non-finite value " << v[i] << " at index " << i;
      throw NonFiniteError(os.str());
    }
  }
}

Tensor make(Shape shape, std::vector<double> values, const char* op) {
  require_finite(values, op);
  return Tensor(std::move(shape), std::move(values));
}

Tensor attach(const char* kind, const Tensor& value, std::vector<Tensor> inputs, BackwardFn fn) {
  Tape* tape = nullptr;
  for (const auto& in : inputs) {
    if (!in.tracked()) continue;
    if (tape != nullptr && tape != in.tape()) throw Error(std::string(kind) + ": operands recorded on different tapes");
    tape = in.tape();
  }
  if (tape == nullptr || !tape->recording()) return value;
  return tape->record(kind, value, inputs, std::move(fn));
}

// Like attach(), for ops whose backward needs their own taped output.
Tensor attach_self(const char* kind, const Tensor& value, std::vector<Tensor> inputs,
                   std::function<std::vector<Tensor>(const Tensor& grad_out, const Tensor& self)> fn) {
  auto self = std::make_shared<Tensor>();
  Tensor out = attach(kind, value, std::move(inputs), [self, fn](const Tensor& g) { return fn(g, *self); });
  *self = out;
  return out;
}

std::vector<double> copy_values(const Tensor& t) {
  auto v = t.values();
  return {v.begin(), v.end()};
}

void require_nonempty(const Tensor& t, const char* op) {
  if (t.empty() || t.numel() == 0) throw ShapeError(std::string(op) + ": empty tensor");
}

}  // namespace

// ---------------------------------------------------------------------------
// Tensor

Tensor::Tensor(Shape shape, std::vector<double> values) : shape_(std::move(shape)) {
  for (auto d : shape_) {
    if (d <= 0) throw ShapeError("tensor dimensions must be positive, got " + shape_string(shape_));
  }
  if (shape_numel(shape_) != static_cast<std::int64_t>(values.size())) {
    throw ShapeError("tensor shape " + shape_string(shape_) + " does not match " + std::to_string(values.size()) +
                     " values");
  }
  require_finite(values, "tensor");
  data_ = std::make_shared<const std::vector<double>>(std::move(values));
}

Tensor Tensor::zeros(Shape shape) { return full(std::move(shape), 0.0); }

Tensor Tensor::full(Shape shape, double value) {
  auto n = shape_numel(shape);
  return Tensor(std::move(shape), std::vector<double>(static_cast<std::size_t>(n), value));
}

Tensor Tensor::scalar(double value) { return Tensor({}, {value}); }

std::span<const double> Tensor::values() const {
  if (!data_) return {};
  return {data_->data(), data_->size()};
}

double Tensor::item() const {
  if (numel() != 1) throw ShapeError("item() on tensor of shape " + shape_string(shape_));
  return (*data_)[0];
}

Tensor Tensor::detach() const {
  Tensor t = *this;
  t.tape_ = nullptr;
  t.node_ = -1;
  return t;
}

bool bit_equal(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) return false;
  auto va = a.values();
  auto vb = b.values();
  return va.size() == vb.size() && std::memcmp(va.data(), vb.data(), va.size() * sizeof(double)) == 0;
}

// ---------------------------------------------------------------------------
// Tape

Tensor Tape::watch(const Tensor& value) {
  require_nonempty(value, "watch");
  TapeNode node;
  node.kind = "leaf";
  node.shape = value.shape();
  nodes_.push_back(std::move(node));
  Tensor t = value.detach();
  t.tape_ = this;
  t.node_ = static_cast<NodeId>(nodes_.size() - 1);
  return t;
}

Tensor Tape::record(std::string kind, const Tensor& value, std::span<const Tensor> inputs, BackwardFn backward) {
  TapeNode node;
  node.kind = std::move(kind);
  node.shape = value.shape();
  node.backward = std::move(backward);
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    if (inputs[i].tape() == this) {
      node.parents.push_back(inputs[i].node());
      node.input_slots.push_back(i);
    }
  }
  nodes_.push_back(std::move(node));
  Tensor t = value.detach();
  t.tape_ = this;
  t.node_ = static_cast<NodeId>(nodes_.size() - 1);
  return t;
}

bool Gradients::contains(const Tensor& leaf) const {
  auto id = leaf.node();
  return id >= 0 && static_cast<std::size_t>(id) < by_node_.size() && !by_node_[id].empty();
}

Tensor Gradients::at(const Tensor& leaf) const {
  if (contains(leaf)) return by_node_[leaf.node()];
  return Tensor::zeros(leaf.shape());
}

Gradients backward(const Tensor& root, bool create_graph) {
  if (!root.tracked()) throw Error("backward: root tensor is detached from any tape");
  if (root.numel() != 1) throw ShapeError("backward: root must be a scalar, got " + shape_string(root.shape()));
  Tape& tape = *root.tape();
  std::optional<Tape::Pause> pause;
  if (!create_graph) pause.emplace(tape);

  std::vector<Tensor> grads(static_cast<std::size_t>(root.node()) + 1);
  grads[root.node()] = Tensor::full(root.shape(), 1.0);
  for (NodeId id = root.node(); id >= 0; --id) {
    if (grads[id].empty()) continue;
    const TapeNode& node = tape.node(id);
    if (!node.backward) continue;
    // Copy: the callback may append to the tape and invalidate `node`.
    auto parents = node.parents;
    auto slots = node.input_slots;
    auto parts = node.backward(grads[id]);
    for (std::size_t k = 0; k < parents.size(); ++k) {
      const Tensor& g = parts.at(slots[k]);
      if (g.empty()) continue;
      Tensor& acc = grads[parents[k]];
      acc = acc.empty() ? g : add(acc, g);
    }
  }
  return Gradients(std::move(grads));
}

std::vector<Tensor> grad(const Tensor& root, std::span<const Tensor> wrt, bool create_graph) {
  auto all = backward(root, create_graph);
  std::vector<Tensor> out;
  out.reserve(wrt.size());
  for (const auto& w : wrt) {
    if (w.tape() != root.tape()) throw Error("grad: requested tensor is not on the root's tape");
    out.push_back(all.at(w));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Elementwise

namespace {

Shape binary_shape(const Tensor& a, const Tensor& b, const char* op) {
  require_nonempty(a, op);
  require_nonempty(b, op);
  if (a.shape() == b.shape()) return a.shape();
  if (b.numel() == 1) return a.shape();
  if (a.numel() == 1) return b.shape();
  throw ShapeError(std::string(op) + ": shape mismatch " + shape_string(a.shape()) + " vs " +
                   shape_string(b.shape()));
}

// Reduces a gradient of the broadcast result back to an operand's shape.
Tensor reduce_like(const Tensor& g, const Tensor& operand) {
  if (g.shape() == operand.shape()) return g;
  return reshape(sum(g), operand.shape());
}

template <class F>
std::vector<double> binary_values(const Tensor& a, const Tensor& b, std::int64_t n, F f) {
  std::vector<double> out(static_cast<std::size_t>(n));
  auto va = a.values();
  auto vb = b.values();
  const bool sa = va.size() == 1 && n != 1;
  const bool sb = vb.size() == 1 && n != 1;
  for (std::int64_t i = 0; i < n; ++i) out[i] = f(va[sa ? 0 : i], vb[sb ? 0 : i]);
  return out;
}

template <class F>
std::vector<double> unary_values(const Tensor& x, F f) {
  auto v = x.values();
  std::vector<double> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = f(v[i]);
  return out;
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  auto shape = binary_shape(a, b, "add");
  auto n = shape_numel(shape);
  auto out = make(shape, binary_values(a, b, n, [](double x, double y) { return x + y; }), "add");
  return attach("add", out, {a, b}, [a, b](const Tensor& g) {
    return std::vector<Tensor>{reduce_like(g, a), reduce_like(g, b)};
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  auto shape = binary_shape(a, b, "sub");
  auto n = shape_numel(shape);
  auto out = make(shape, binary_values(a, b, n, [](double x, double y) { return x - y; }), "sub");
  return attach("sub", out, {a, b}, [a, b](const Tensor& g) {
    return std::vector<Tensor>{reduce_like(g, a), reduce_like(neg(g), b)};
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  auto shape = binary_shape(a, b, "mul");
  auto n = shape_numel(shape);
  auto out = make(shape, binary_values(a, b, n, [](double x, double y) { return x * y; }), "mul");
  return attach("mul", out, {a, b}, [a, b](const Tensor& g) {
    return std::vector<Tensor>{reduce_like(mul(g, b), a), reduce_like(mul(g, a), b)};
  });
}

Tensor div(const Tensor& a, const Tensor& b) {
  auto shape = binary_shape(a, b, "div");
  auto vb = b.values();
  for (std::size_t i = 0; i < vb.size(); ++i) {
    if (vb[i] == 0.0) throw DomainError("div: zero divisor at index " + std::to_string(i));
  }
  auto n = shape_numel(shape);
  auto out = make(shape, binary_values(a, b, n, [](double x, double y) { return x / y; }), "div");
  return attach("div", out, {a, b}, [a, b](const Tensor& g) {
    return std::vector<Tensor>{reduce_like(div(g, b), a), reduce_like(neg(div(mul(g, a), square(b))), b)};
  });
}

Tensor neg(const Tensor& x) {
  require_nonempty(x, "neg");
  auto out = make(x.shape(), unary_values(x, [](double v) { return -v; }), "neg");
  return attach("neg", out, {x}, [](const Tensor& g) { return std::vector<Tensor>{neg(g)}; });
}

Tensor scale(const Tensor& x, double factor) {
  require_nonempty(x, "scale");
  auto out = make(x.shape(), unary_values(x, [factor](double v) { return v * factor; }), "scale");
  return attach("scale", out, {x}, [factor](const Tensor& g) { return std::vector<Tensor>{scale(g, factor)}; });
}

Tensor add_scalar(const Tensor& x, double offset) {
  require_nonempty(x, "add_scalar");
  auto out = make(x.shape(), unary_values(x, [offset](double v) { return v + offset; }), "add_scalar");
  return attach("add_scalar", out, {x}, [](const Tensor& g) { return std::vector<Tensor>{g}; });
}

Tensor abs(const Tensor& x) {
  require_nonempty(x, "abs");
  auto out = make(x.shape(), unary_values(x, [](double v) { return std::fabs(v); }), "abs");
  return attach("abs", out, {x}, [x](const Tensor& g) {
    Tensor sign(x.shape(), unary_values(x, [](double v) { return v > 0 ? 1.0 : (v < 0 ? -1.0 : 0.0); }));
    return std::vector<Tensor>{mul(g, sign)};
  });
}

Tensor log(const Tensor& x) {
  require_nonempty(x, "log");
  auto v = x.values();
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!(v[i] > 0.0)) {
      throw DomainError("log: non-positive input " + std::to_string(v[i]) + " at index " + std::to_string(i));
    }
  }
  auto out = make(x.shape(), unary_values(x, [](double u) { return std::log(u); }), "log");
  return attach("log", out, {x}, [x](const Tensor& g) { return std::vector<Tensor>{div(g, x)}; });
}

Tensor exp(const Tensor& x) {
  require_nonempty(x, "exp");
  auto out = make(x.shape(), unary_values(x, [](double v) { return std::exp(v); }), "exp");
  return attach_self("exp", out, {x}, [](const Tensor& g, const Tensor& self) { return std::vector<Tensor>{mul(g, self)}; });
}

Tensor square(const Tensor& x) {
  require_nonempty(x, "square");
  auto out = make(x.shape(), unary_values(x, [](double v) { return v * v; }), "square");
  return attach("square", out, {x}, [x](const Tensor& g) { return std::vector<Tensor>{mul(g, scale(x, 2.0))}; });
}

Tensor sqrt(const Tensor& x) {
  require_nonempty(x, "sqrt");
  auto v = x.values();
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (v[i] < 0.0) {
      throw DomainError("sqrt: negative input " + std::to_string(v[i]) + " at index " + std::to_string(i));
    }
  }
  auto out = make(x.shape(), unary_values(x, [](double u) { return std::sqrt(u); }), "sqrt");
  return attach_self("sqrt", out, {x}, [](const Tensor& g, const Tensor& self) {
    return std::vector<Tensor>{mul(g, scale(safe_reciprocal(self), 0.5))};
  });
}

Tensor safe_reciprocal(const Tensor& x) {
  require_nonempty(x, "safe_reciprocal");
  auto out = make(x.shape(), unary_values(x, [](double v) { return v == 0.0 ? 0.0 : 1.0 / v; }), "safe_reciprocal");
  return attach_self("safe_reciprocal", out, {x}, [](const Tensor& g, const Tensor& self) {
    return std::vector<Tensor>{neg(mul(g, square(self)))};
  });
}

Tensor elementwise(Elementwise kind, const Tensor& a, const std::optional<Tensor>& b) {
  auto need_b = [&]() -> const Tensor& {
    if (!b) throw ShapeError("elementwise: binary kind requires a second operand");
    return *b;
  };
  switch (kind) {
    case Elementwise::add:
      return add(a, need_b());
    case Elementwise::sub:
      return sub(a, need_b());
    case Elementwise::mul:
      return mul(a, need_b());
    case Elementwise::abs:
      return abs(a);
    case Elementwise::log:
      return log(a);
    case Elementwise::square:
      return square(a);
    case Elementwise::sqrt:
      return sqrt(a);
  }
  throw Error("elementwise: unknown kind");
}

// ---------------------------------------------------------------------------
// Nonlinearities

Tensor relu(const Tensor& x) {
  require_nonempty(x, "relu");
  auto out = make(x.shape(), unary_values(x, [](double v) { return v > 0 ? v : 0.0; }), "relu");
  return attach("relu", out, {x}, [x](const Tensor& g) {
    Tensor mask(x.shape(), unary_values(x, [](double v) { return v > 0 ? 1.0 : 0.0; }));
    return std::vector<Tensor>{mul(g, mask)};
  });
}

Tensor leaky_relu(const Tensor& x, double slope) {
  require_nonempty(x, "leaky_relu");
  auto out = make(x.shape(), unary_values(x, [slope](double v) { return v > 0 ? v : slope * v; }), "leaky_relu");
  return attach("leaky_relu", out, {x}, [x, slope](const Tensor& g) {
    Tensor mask(x.shape(), unary_values(x, [slope](double v) { return v > 0 ? 1.0 : slope; }));
    return std::vector<Tensor>{mul(g, mask)};
  });
}

Tensor tanh(const Tensor& x) {
  require_nonempty(x, "tanh");
  auto out = make(x.shape(), unary_values(x, [](double v) { return std::tanh(v); }), "tanh");
  return attach_self("tanh", out, {x}, [](const Tensor& g, const Tensor& self) {
    return std::vector<Tensor>{mul(g, add_scalar(neg(square(self)), 1.0))};
  });
}

namespace {
double stable_sigmoid(double v) {
  if (v >= 0) return 1.0 / (1.0 + std::exp(-v));
  const double e = std::exp(v);
  return e / (1.0 + e);
}
}  // namespace

Tensor sigmoid(const Tensor& x) {
  require_nonempty(x, "sigmoid");
  auto out = make(x.shape(), unary_values(x, stable_sigmoid), "sigmoid");
  return attach_self("sigmoid", out, {x}, [](const Tensor& g, const Tensor& self) {
    return std::vector<Tensor>{mul(g, mul(self, add_scalar(neg(self), 1.0)))};
  });
}

Tensor softplus(const Tensor& x) {
  require_nonempty(x, "softplus");
  auto out = make(x.shape(), unary_values(x, [](double v) { return std::max(v, 0.0) + std::log1p(std::exp(-std::fabs(v))); }),
                  "softplus");
  return attach("softplus", out, {x}, [x](const Tensor& g) { return std::vector<Tensor>{mul(g, sigmoid(x))}; });
}

Tensor activation(Activation kind, const Tensor& x) {
  switch (kind) {
    case Activation::relu:
      return relu(x);
    case Activation::leaky_relu:
      return leaky_relu(x, 0.2);
    case Activation::tanh:
      return tanh(x);
    case Activation::sigmoid:
      return sigmoid(x);
  }
  throw Error("activation: unknown kind");
}

// ---------------------------------------------------------------------------
// Reductions and shapes

Tensor sum(const Tensor& x) {
  require_nonempty(x, "sum");
  auto v = x.values();
  double s = 0.0;
  for (double e : v) s += e;
  auto out = make({}, {s}, "sum");
  return attach("sum", out, {x}, [x](const Tensor& g) {
    Shape ones(x.rank(), 1);
    return std::vector<Tensor>{broadcast_to(reshape(g, ones), x.shape())};
  });
}

Tensor mean(const Tensor& x) {
  require_nonempty(x, "mean");
  return scale(sum(x), 1.0 / static_cast<double>(x.numel()));
}

Tensor reduce(Reduction kind, const Tensor& x) { return kind == Reduction::sum ? sum(x) : mean(x); }

Tensor reshape(const Tensor& x, Shape shape) {
  require_nonempty(x, "reshape");
  if (shape_numel(shape) != x.numel()) {
    throw ShapeError("reshape: cannot view " + shape_string(x.shape()) + " as " + shape_string(shape));
  }
  Tensor out(shape, copy_values(x));
  Shape original = x.shape();
  return attach("reshape", out, {x}, [original](const Tensor& g) { return std::vector<Tensor>{reshape(g, original)}; });
}

namespace {

void check_broadcastable(const Shape& small, const Shape& big, const char* op) {
  bool ok = small.size() == big.size();
  for (std::size_t d = 0; ok && d < small.size(); ++d) ok = small[d] == 1 || small[d] == big[d];
  if (!ok) throw ShapeError(std::string(op) + ": cannot broadcast " + shape_string(small) + " to " + shape_string(big));
}

// Calls fn(big_index, small_index) for every element of `big`, in row-major order.
template <class F>
void for_each_broadcast(const Shape& big, const Shape& small, F fn) {
  const std::size_t rank = big.size();
  std::vector<std::int64_t> small_stride(rank, 0);
  std::int64_t stride = 1;
  for (std::size_t d = rank; d-- > 0;) {
    small_stride[d] = small[d] == 1 ? 0 : stride;
    stride *= small[d];
  }
  std::vector<std::int64_t> coord(rank, 0);
  const std::int64_t n = shape_numel(big);
  std::int64_t s = 0;
  for (std::int64_t i = 0; i < n; ++i) {
    fn(i, s);
    for (std::size_t d = rank; d-- > 0;) {
      ++coord[d];
      s += small_stride[d];
      if (coord[d] < big[d]) break;
      s -= small_stride[d] * coord[d];
      coord[d] = 0;
    }
  }
}

}  // namespace

Tensor broadcast_to(const Tensor& x, const Shape& shape) {
  require_nonempty(x, "broadcast_to");
  if (x.shape() == shape) return x;
  check_broadcastable(x.shape(), shape, "broadcast_to");
  std::vector<double> out(static_cast<std::size_t>(shape_numel(shape)));
  auto v = x.values();
  for_each_broadcast(shape, x.shape(), [&](std::int64_t b, std::int64_t s) { out[b] = v[s]; });
  Tensor result(shape, std::move(out));
  Shape original = x.shape();
  return attach("broadcast_to", result, {x},
                [original](const Tensor& g) { return std::vector<Tensor>{sum_to(g, original)}; });
}

Tensor sum_to(const Tensor& x, const Shape& shape) {
  require_nonempty(x, "sum_to");
  if (x.shape() == shape) return x;
  check_broadcastable(shape, x.shape(), "sum_to");
  std::vector<double> out(static_cast<std::size_t>(shape_numel(shape)), 0.0);
  auto v = x.values();
  for_each_broadcast(x.shape(), shape, [&](std::int64_t b, std::int64_t s) { out[s] += v[b]; });
  auto result = make(shape, std::move(out), "sum_to");
  Shape original = x.shape();
  return attach("sum_to", result, {x},
                [original](const Tensor& g) { return std::vector<Tensor>{broadcast_to(g, original)}; });
}

namespace {
void require_rank4(const Tensor& t, const char* op) {
  if (t.rank() != 4) throw ShapeError(std::string(op) + ": expected NCHW tensor, got " + shape_string(t.shape()));
}

// Copies `count` channels starting at `src_start` of src into dst starting at `dst_start`.
void copy_channels(std::span<const double> src, const Shape& src_shape, std::int64_t src_start, std::vector<double>& dst,
                   const Shape& dst_shape, std::int64_t dst_start, std::int64_t count) {
  const std::int64_t plane = src_shape[2] * src_shape[3];
  for (std::int64_t n = 0; n < src_shape[0]; ++n) {
    const double* from = src.data() + (n * src_shape[1] + src_start) * plane;
    double* to = dst.data() + (n * dst_shape[1] + dst_start) * plane;
    std::copy(from, from + count * plane, to);
  }
}
}  // namespace

Tensor concat_channels(const Tensor& a, const Tensor& b) {
  require_rank4(a, "concat_channels");
  require_rank4(b, "concat_channels");
  if (a.dim(0) != b.dim(0) || a.dim(2) != b.dim(2) || a.dim(3) != b.dim(3)) {
    throw ShapeError("concat_channels: mismatched N/H/W " + shape_string(a.shape()) + " vs " + shape_string(b.shape()));
  }
  const std::int64_t ca = a.dim(1);
  const std::int64_t cb = b.dim(1);
  Shape shape{a.dim(0), ca + cb, a.dim(2), a.dim(3)};
  std::vector<double> out(static_cast<std::size_t>(shape_numel(shape)));
  copy_channels(a.values(), a.shape(), 0, out, shape, 0, ca);
  copy_channels(b.values(), b.shape(), 0, out, shape, ca, cb);
  Tensor result(shape, std::move(out));
  return attach("concat_channels", result, {a, b}, [ca, cb](const Tensor& g) {
    return std::vector<Tensor>{slice_channels(g, 0, ca), slice_channels(g, ca, cb)};
  });
}

Tensor slice_channels(const Tensor& x, std::int64_t start, std::int64_t count) {
  require_rank4(x, "slice_channels");
  const std::int64_t total = x.dim(1);
  if (start < 0 || count <= 0 || start + count > total) throw ShapeError("slice_channels: range out of bounds");
  Shape shape{x.dim(0), count, x.dim(2), x.dim(3)};
  std::vector<double> out(static_cast<std::size_t>(shape_numel(shape)));
  copy_channels(x.values(), x.shape(), start, out, shape, 0, count);
  Tensor result(shape, std::move(out));
  return attach("slice_channels", result, {x}, [start, total](const Tensor& g) {
    return std::vector<Tensor>{pad_channels(g, start, total)};
  });
}

Tensor pad_channels(const Tensor& x, std::int64_t start, std::int64_t total) {
  require_rank4(x, "pad_channels");
  const std::int64_t count = x.dim(1);
  if (start < 0 || start + count > total) throw ShapeError("pad_channels: range out of bounds");
  Shape shape{x.dim(0), total, x.dim(2), x.dim(3)};
  std::vector<double> out(static_cast<std::size_t>(shape_numel(shape)), 0.0);
  copy_channels(x.values(), x.shape(), 0, out, shape, start, count);
  Tensor result(shape, std::move(out));
  return attach("pad_channels", result, {x}, [start, count](const Tensor& g) {
    return std::vector<Tensor>{slice_channels(g, start, count)};
  });
}

Tensor stack_batch(std::span<const Tensor> items) {
  if (items.empty()) throw ShapeError("stack_batch: no items");
  Shape shape = items[0].shape();
  if (shape.empty()) throw ShapeError("stack_batch: items must have a batch axis");
  std::vector<double> out;
  std::int64_t n = 0;
  for (const auto& t : items) {
    if (t.rank() != shape.size() || !std::equal(shape.begin() + 1, shape.end(), t.shape().begin() + 1)) {
      throw ShapeError("stack_batch: inconsistent item shapes");
    }
    auto v = t.values();
    out.insert(out.end(), v.begin(), v.end());
    n += t.dim(0);
  }
  shape[0] = n;
  Tensor result(shape, std::move(out));
  std::vector<std::int64_t> counts;
  for (const auto& t : items) counts.push_back(t.dim(0));
  return attach("stack_batch", result, {items.begin(), items.end()}, [counts](const Tensor& g) {
    std::vector<Tensor> grads;
    std::int64_t offset = 0;
    for (const auto c : counts) {
      std::vector<Tensor> rows;
      for (std::int64_t i = 0; i < c; ++i) rows.push_back(batch_item(g, offset + i));
      grads.push_back(c == 1 ? rows.front() : stack_batch(rows));
      offset += c;
    }
    return grads;
  });
}

Tensor batch_item(const Tensor& x, std::int64_t index) {
  if (x.rank() == 0 || index < 0 || index >= x.dim(0)) throw ShapeError("batch_item: index out of range");
  Shape shape = x.shape();
  shape[0] = 1;
  const std::int64_t per = shape_numel(shape);
  auto v = x.values();
  Tensor result(shape, std::vector<double>(v.begin() + index * per, v.begin() + (index + 1) * per));
  const std::int64_t n = x.dim(0);
  return attach("batch_item", result, {x}, [index, n](const Tensor& g) {
    std::vector<Tensor> rows(static_cast<std::size_t>(n), Tensor::zeros(g.shape()));
    rows[static_cast<std::size_t>(index)] = g;
    return std::vector<Tensor>{stack_batch(rows)};
  });
}

// ---------------------------------------------------------------------------
// Convolution family: forward, input-adjoint and kernel-adjoint share one
// geometry and differentiate into each other.

namespace {

struct ConvGeom {
  std::int64_t n, c_in, h, w;  // conv input
  std::int64_t c_out, k;       // kernel (c_out, c_in, k, k)
  std::int64_t oh, ow;         // conv output
  int stride, pad;

  Shape input_shape() const { return {n, c_in, h, w}; }
  Shape kernel_shape() const { return {c_out, c_in, k, k}; }
  Shape output_shape() const { return {n, c_out, oh, ow}; }
};

std::int64_t floor_div(std::int64_t a, std::int64_t b) {
  std::int64_t q = a / b;
  if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
  return q;
}

// Output positions o for which o*stride + offset - pad lands inside [0, in_size).
std::pair<std::int64_t, std::int64_t> valid_range(std::int64_t offset, const ConvGeom& g, std::int64_t in_size,
                                                  std::int64_t out_size) {
  const std::int64_t lo = std::max<std::int64_t>(0, -floor_div(offset - g.pad, g.stride));
  const std::int64_t hi = std::min<std::int64_t>(out_size, floor_div(in_size - 1 + g.pad - offset, g.stride) + 1);
  return {lo, std::max(lo, hi)};
}

enum class ConvRole { forward, input_adjoint, kernel_adjoint };

// Visits every (input row, output row, kernel tap) triple of the convolution.
// fn(x_row_offset, y_row_offset, kernel_index, ox_lo, ox_hi, kx).
template <class F>
void conv_visit(const ConvGeom& g, F fn) {
  for (std::int64_t n = 0; n < g.n; ++n) {
    for (std::int64_t o = 0; o < g.c_out; ++o) {
      for (std::int64_t c = 0; c < g.c_in; ++c) {
        for (std::int64_t ky = 0; ky < g.k; ++ky) {
          auto [oy_lo, oy_hi] = valid_range(ky, g, g.h, g.oh);
          for (std::int64_t kx = 0; kx < g.k; ++kx) {
            auto [ox_lo, ox_hi] = valid_range(kx, g, g.w, g.ow);
            if (ox_lo >= ox_hi) continue;
            const std::int64_t kidx = ((o * g.c_in + c) * g.k + ky) * g.k + kx;
            for (std::int64_t oy = oy_lo; oy < oy_hi; ++oy) {
              const std::int64_t iy = oy * g.stride + ky - g.pad;
              const std::int64_t xrow = ((n * g.c_in + c) * g.h + iy) * g.w;
              const std::int64_t yrow = ((n * g.c_out + o) * g.oh + oy) * g.ow;
              fn(xrow, yrow, kidx, ox_lo, ox_hi, kx);
            }
          }
        }
      }
    }
  }
}

std::vector<double> conv_compute(ConvRole role, std::span<const double> a, std::span<const double> b, const ConvGeom& g) {
  const std::int64_t s = g.stride;
  const std::int64_t p = g.pad;
  switch (role) {
    case ConvRole::forward: {
      std::vector<double> y(static_cast<std::size_t>(shape_numel(g.output_shape())), 0.0);
      const double* x = a.data();
      const double* k = b.data();
      conv_visit(g, [&](std::int64_t xr, std::int64_t yr, std::int64_t ki, std::int64_t lo, std::int64_t hi,
                        std::int64_t kx) {
        const double wgt = k[ki];
        double* yrow = y.data() + yr;
        const double* xrow = x + xr + kx - p;
        if (s == 1) {
          for (std::int64_t ox = lo; ox < hi; ++ox) yrow[ox] += wgt * xrow[ox];
        } else {
          for (std::int64_t ox = lo; ox < hi; ++ox) yrow[ox] += wgt * xrow[ox * s];
        }
      });
      return y;
    }
    case ConvRole::input_adjoint: {
      std::vector<double> x(static_cast<std::size_t>(shape_numel(g.input_shape())), 0.0);
      const double* y = a.data();
      const double* k = b.data();
      conv_visit(g, [&](std::int64_t xr, std::int64_t yr, std::int64_t ki, std::int64_t lo, std::int64_t hi,
                        std::int64_t kx) {
        const double wgt = k[ki];
        const double* yrow = y + yr;
        double* xrow = x.data() + xr + kx - p;
        if (s == 1) {
          for (std::int64_t ox = lo; ox < hi; ++ox) xrow[ox] += wgt * yrow[ox];
        } else {
          for (std::int64_t ox = lo; ox < hi; ++ox) xrow[ox * s] += wgt * yrow[ox];
        }
      });
      return x;
    }
    case ConvRole::kernel_adjoint: {
      std::vector<double> k(static_cast<std::size_t>(shape_numel(g.kernel_shape())), 0.0);
      const double* x = a.data();
      const double* y = b.data();
      conv_visit(g, [&](std::int64_t xr, std::int64_t yr, std::int64_t ki, std::int64_t lo, std::int64_t hi,
                        std::int64_t kx) {
        const double* yrow = y + yr;
        const double* xrow = x + xr + kx - p;
        double acc = 0.0;
        if (s == 1) {
          for (std::int64_t ox = lo; ox < hi; ++ox) acc += yrow[ox] * xrow[ox];
        } else {
          for (std::int64_t ox = lo; ox < hi; ++ox) acc += yrow[ox] * xrow[ox * s];
        }
        k[ki] += acc;
      });
      return k;
    }
  }
  return {};
}

Tensor conv_op(ConvRole role, const Tensor& a, const Tensor& b, const ConvGeom& g) {
  Shape shape;
  const char* kind = "";
  switch (role) {
    case ConvRole::forward:
      shape = g.output_shape();
      kind = "conv2d";
      break;
    case ConvRole::input_adjoint:
      shape = g.input_shape();
      kind = "conv_transpose2d";
      break;
    case ConvRole::kernel_adjoint:
      shape = g.kernel_shape();
      kind = "conv2d_kernel_grad";
      break;
  }
  auto out = make(shape, conv_compute(role, a.values(), b.values(), g), kind);
  return attach(kind, out, {a, b}, [role, a, b, g](const Tensor& grad_out) {
    switch (role) {
      case ConvRole::forward:  // a = x, b = k
        return std::vector<Tensor>{conv_op(ConvRole::input_adjoint, grad_out, b, g),
                                   conv_op(ConvRole::kernel_adjoint, a, grad_out, g)};
      case ConvRole::input_adjoint:  // a = y, b = k
        return std::vector<Tensor>{conv_op(ConvRole::forward, grad_out, b, g),
                                   conv_op(ConvRole::kernel_adjoint, grad_out, a, g)};
      case ConvRole::kernel_adjoint:  // a = x, b = y
        return std::vector<Tensor>{conv_op(ConvRole::input_adjoint, b, grad_out, g),
                                   conv_op(ConvRole::forward, a, grad_out, g)};
    }
    return std::vector<Tensor>{};
  });
}

void check_conv_params(int stride, int pad, const char* op) {
  if (stride < 1) throw ShapeError(std::string(op) + ": stride must be >= 1");
  if (pad < 0) throw ShapeError(std::string(op) + ": pad must be >= 0");
}

}  // namespace

Tensor conv2d(const Tensor& input, const Tensor& kernel, int stride, int pad) {
  require_rank4(input, "conv2d");
  require_rank4(kernel, "conv2d");
  check_conv_params(stride, pad, "conv2d");
  if (input.dim(1) != kernel.dim(1)) {
    throw ShapeError("conv2d: input has " + std::to_string(input.dim(1)) + " channels, kernel expects " +
                     std::to_string(kernel.dim(1)));
  }
  if (kernel.dim(2) != kernel.dim(3)) throw ShapeError("conv2d: kernel must be square");
  ConvGeom g{input.dim(0), input.dim(1), input.dim(2), input.dim(3), kernel.dim(0), kernel.dim(2), 0, 0, stride, pad};
  const std::int64_t span_h = g.h + 2 * pad - g.k;
  const std::int64_t span_w = g.w + 2 * pad - g.k;
  if (span_h < 0 || span_w < 0) {
    throw ShapeError("conv2d: kernel " + std::to_string(g.k) + " larger than padded input " +
                     shape_string(input.shape()));
  }
  g.oh = span_h / stride + 1;
  g.ow = span_w / stride + 1;
  return conv_op(ConvRole::forward, input, kernel, g);
}

Tensor conv_transpose2d(const Tensor& input, const Tensor& kernel, int stride, int pad) {
  require_rank4(input, "conv_transpose2d");
  require_rank4(kernel, "conv_transpose2d");
  check_conv_params(stride, pad, "conv_transpose2d");
  if (input.dim(1) != kernel.dim(0)) {
    throw ShapeError("conv_transpose2d: input has " + std::to_string(input.dim(1)) + " channels, kernel expects " +
                     std::to_string(kernel.dim(0)));
  }
  if (kernel.dim(2) != kernel.dim(3)) throw ShapeError("conv_transpose2d: kernel must be square");
  const std::int64_t k = kernel.dim(2);
  ConvGeom g{input.dim(0), kernel.dim(1), (input.dim(2) - 1) * stride - 2 * pad + k,
             (input.dim(3) - 1) * stride - 2 * pad + k, kernel.dim(0), k, input.dim(2), input.dim(3), stride, pad};
  if (g.h <= 0 || g.w <= 0) throw ShapeError("conv_transpose2d: non-positive output size");
  return conv_op(ConvRole::input_adjoint, input, kernel, g);
}

Tensor instance_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps) {
  require_rank4(x, "instance_norm");
  const std::int64_t c = x.dim(1);
  const std::int64_t hw = x.dim(2) * x.dim(3);
  if (hw < 2) throw ShapeError("instance_norm: spatial size must be at least 2 elements, got " + shape_string(x.shape()));
  if (gamma.shape() != Shape{c} || beta.shape() != Shape{c}) {
    throw ShapeError("instance_norm: gamma/beta must have shape [" + std::to_string(c) + "]");
  }
  if (eps < 0) throw DomainError("instance_norm: eps must be >= 0");
  const Shape& full = x.shape();
  const Shape per_channel{x.dim(0), c, 1, 1};
  const double inv_hw = 1.0 / static_cast<double>(hw);
  Tensor mu = scale(sum_to(x, per_channel), inv_hw);
  Tensor centered = sub(x, broadcast_to(mu, full));
  Tensor var = scale(sum_to(square(centered), per_channel), inv_hw);
  Tensor normalized = div(centered, broadcast_to(sqrt(add_scalar(var, eps)), full));
  Tensor g = broadcast_to(reshape(gamma, {1, c, 1, 1}), full);
  Tensor b = broadcast_to(reshape(beta, {1, c, 1, 1}), full);
  return add(mul(normalized, g), b);
}

Tensor dropout(const Tensor& x, double p, RngStream& rng, bool train_mode) {
  if (!(p >= 0.0 && p < 1.0)) throw DomainError("dropout: p must lie in [0, 1), got " + std::to_string(p));
  if (!train_mode || p == 0.0) return x;
  const double keep_scale = 1.0 / (1.0 - p);
  std::vector<double> mask(static_cast<std::size_t>(x.numel()));
  for (auto& m : mask) m = rng.uniform() < p ? 0.0 : keep_scale;
  return mul(x, Tensor(x.shape(), std::move(mask)));
}

// ---------------------------------------------------------------------------

double grad_check(const std::function<Tensor(const Tensor&)>& f, const Tensor& x, double h) {
  if (!(h > 0)) throw DomainError("grad_check: step must be positive");
  Tape tape;
  Tensor watched = tape.watch(x);
  Tensor y = f(watched);
  if (y.numel() != 1) throw ShapeError("grad_check: function must be scalar-valued, got " + shape_string(y.shape()));
  Tensor analytic = y.tracked() ? grad(y, std::span<const Tensor>(&watched, 1))[0] : Tensor::zeros(x.shape());

  auto base = copy_values(x);
  double worst = 0.0;
  for (std::size_t i = 0; i < base.size(); ++i) {
    auto probe = base;
    probe[i] = base[i] + h;
    const double fp = f(Tensor(x.shape(), probe)).item();
    probe[i] = base[i] - h;
    const double fm = f(Tensor(x.shape(), probe)).item();
    const double numeric = (fp - fm) / (2.0 * h);
    const double a = analytic[i];
    worst = std::max(worst, std::fabs(a - numeric) / std::max(1.0, std::fabs(a)));
  }
  return worst;
}

}  // namespace xmt
