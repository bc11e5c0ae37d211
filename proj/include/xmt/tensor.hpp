#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "xmt/errors.hpp"

namespace xmt {

using Shape = std::vector<std::int64_t>;
using NodeId = std::int64_t;

std::int64_t shape_numel(const Shape& shape);
std::string shape_string(const Shape& shape);

class Tape;

/// Dense row-major array of 64-bit floats (image layout NCHW).
///
/// Values are immutable and shared between copies. A tensor may additionally be
/// attached to a Tape, in which case operations on it are recorded. Attached
/// tensors must not feed new operations after their tape is destroyed; their
/// values stay readable.
class Tensor {
 public:
  Tensor() = default;
  Tensor(Shape shape, std::vector<double> values);

  static Tensor zeros(Shape shape);
  static Tensor full(Shape shape, double value);
  static Tensor scalar(double value);

  const Shape& shape() const { return shape_; }
  std::int64_t dim(std::size_t axis) const { return shape_.at(axis); }
  std::size_t rank() const { return shape_.size(); }
  std::int64_t numel() const { return data_ ? static_cast<std::int64_t>(data_->size()) : 0; }
  bool empty() const { return data_ == nullptr; }

  std::span<const double> values() const;
  double operator[](std::size_t i) const { return (*data_)[i]; }
  /// Value of a one-element tensor.
  double item() const;

  bool tracked() const { return tape_ != nullptr; }
  Tape* tape() const { return tape_; }
  NodeId node() const { return node_; }

  /// Same values, not attached to any tape.
  Tensor detach() const;

 private:
  friend class Tape;
  Shape shape_;
  std::shared_ptr<const std::vector<double>> data_;
  Tape* tape_ = nullptr;
  NodeId node_ = -1;
};

/// Bitwise equality of shape and values.
bool bit_equal(const Tensor& a, const Tensor& b);

/// Maps the gradient flowing into a node's output to one gradient per input
/// (an empty Tensor means "no contribution"). Implementations must be built
/// from taped operations so they can themselves be differentiated.
using BackwardFn = std::function<std::vector<Tensor>(const Tensor& grad_out)>;

struct TapeNode {
  std::string kind;
  std::vector<NodeId> parents;
  // Position of each parent in the op's input list, aligned with `parents`.
  std::vector<std::size_t> input_slots;
  BackwardFn backward;
  Shape shape;
};

/// Append-only record of operations. Node ids are assigned in creation order,
/// so every parent id is smaller than its child's id.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Registers a leaf holding `value`'s data.
  Tensor watch(const Tensor& value);

  /// Records a computed value. `inputs` are the op's operands in order; only
  /// those attached to this tape become parents.
  Tensor record(std::string kind, const Tensor& value, std::span<const Tensor> inputs, BackwardFn backward);

  std::size_t size() const { return nodes_.size(); }
  const TapeNode& node(NodeId id) const { return nodes_.at(static_cast<std::size_t>(id)); }
  bool recording() const { return paused_ == 0; }

  /// Suspends recording for its lifetime; ops on attached tensors return
  /// untracked results while paused.
  class Pause {
   public:
    explicit Pause(Tape& tape) : tape_(&tape) { ++tape_->paused_; }
    ~Pause() { --tape_->paused_; }
    Pause(const Pause&) = delete;
    Pause& operator=(const Pause&) = delete;

   private:
    Tape* tape_;
  };

 private:
  std::vector<TapeNode> nodes_;
  int paused_ = 0;
};

/// Gradients of one backward pass, indexed by node id.
class Gradients {
 public:
  Gradients() = default;
  explicit Gradients(std::vector<Tensor> by_node) : by_node_(std::move(by_node)) {}

  bool contains(const Tensor& leaf) const;
  /// Gradient for `leaf`; zeros of its shape when the leaf was unreachable.
  Tensor at(const Tensor& leaf) const;

 private:
  std::vector<Tensor> by_node_;
};

/// Reverse pass from a scalar root. With create_graph the pass records its own
/// operations on the root's tape, so the returned gradients can be
/// differentiated again.
Gradients backward(const Tensor& root, bool create_graph = false);

/// Gradients of `root` with respect to each of `wrt`, in order.
std::vector<Tensor> grad(const Tensor& root, std::span<const Tensor> wrt, bool create_graph = false);

class RngStream;

// ---------------------------------------------------------------------------
// Elementwise arithmetic. Binary ops need equal shapes, or one operand with a
// single element, which is broadcast.

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);
Tensor neg(const Tensor& x);
Tensor scale(const Tensor& x, double factor);
Tensor add_scalar(const Tensor& x, double offset);

Tensor abs(const Tensor& x);
Tensor log(const Tensor& x);
Tensor exp(const Tensor& x);
Tensor square(const Tensor& x);
Tensor sqrt(const Tensor& x);
/// 1/x, with 0 mapped to 0.
Tensor safe_reciprocal(const Tensor& x);

enum class Elementwise { add, sub, mul, abs, log, square, sqrt };
Tensor elementwise(Elementwise kind, const Tensor& a, const std::optional<Tensor>& b = std::nullopt);

// ---------------------------------------------------------------------------
// Nonlinearities.

Tensor relu(const Tensor& x);
Tensor leaky_relu(const Tensor& x, double slope = 0.2);
Tensor tanh(const Tensor& x);
Tensor sigmoid(const Tensor& x);
/// log(1 + e^x), evaluated stably for large |x|.
Tensor softplus(const Tensor& x);

enum class Activation { relu, leaky_relu, tanh, sigmoid };
Tensor activation(Activation kind, const Tensor& x);

// ---------------------------------------------------------------------------
// Reductions and shape manipulation.

Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);

enum class Reduction { mean, sum };
Tensor reduce(Reduction kind, const Tensor& x);

Tensor reshape(const Tensor& x, Shape shape);
/// Repeats size-1 axes of `x` to reach `shape` (same rank).
Tensor broadcast_to(const Tensor& x, const Shape& shape);
/// Sums `x` over the axes where `shape` has size 1 (inverse of broadcast_to).
Tensor sum_to(const Tensor& x, const Shape& shape);

Tensor concat_channels(const Tensor& a, const Tensor& b);
Tensor slice_channels(const Tensor& x, std::int64_t start, std::int64_t count);
/// Places `x` at channel offset `start` inside a zero tensor with `total` channels.
Tensor pad_channels(const Tensor& x, std::int64_t start, std::int64_t total);

/// Concatenates tensors along axis 0. Not differentiable; used for batching data.
Tensor stack_batch(std::span<const Tensor> items);
/// Item `index` of axis 0, keeping a leading axis of size 1. Not differentiable.
Tensor batch_item(const Tensor& x, std::int64_t index);

// ---------------------------------------------------------------------------
// Convolution.

/// Cross-correlation of NCHW `input` with OIKK `kernel`.
/// Output side = floor((H + 2 pad - K) / stride) + 1.
Tensor conv2d(const Tensor& input, const Tensor& kernel, int stride, int pad);

/// Adjoint of conv2d in its input: `kernel` has shape (Cin, Cout, K, K), where
/// Cin is this op's input channel count. Output side = (H - 1) stride - 2 pad + K.
/// <conv2d(x, k), y> == <x, conv_transpose2d(y, k)>.
Tensor conv_transpose2d(const Tensor& input, const Tensor& kernel, int stride, int pad);

/// Per-sample, per-channel normalization over H x W (biased variance), followed by
/// a per-channel scale `gamma` and shift `beta` (both shape {C}).
Tensor instance_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps = 1e-5);

/// Inverted dropout. In train mode each element is zeroed with probability p and
/// survivors are scaled by 1/(1-p); otherwise identity.
Tensor dropout(const Tensor& x, double p, RngStream& rng, bool train_mode);

// ---------------------------------------------------------------------------

/// Max over coordinates of |analytic - central difference| / max(1, |analytic|)
/// for the scalar function f at x.
double grad_check(const std::function<Tensor(const Tensor&)>& f, const Tensor& x, double h = 1e-5);

}  // namespace xmt
