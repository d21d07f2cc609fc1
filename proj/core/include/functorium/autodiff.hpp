#pragma once

// Reverse-mode automatic differentiation over dense tensors.
//
// A Tape records every operation eagerly: the forward value is computed at
// once and a node remembers its parents plus a vector-Jacobian product.
// VJPs are themselves written in terms of tape operations, so a gradient can
// be re-recorded as an ordinary expression (create_graph) and differentiated
// again. The gradient penalty in the losses module depends on that.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "functorium/tensor.hpp"

namespace functorium::ad {

class Tape;

enum class OpKind : std::uint8_t {
  kLeaf,
  kConstant,
  kAdd,
  kSub,
  kMul,
  kScale,
  kAddScalar,
  kMatMul,
  kAffine,
  kTanh,
  kRelu,
  kSigmoid,
  kAbs,
  kSum,
  kMean,
  kL1Norm,
  kL2Norm,
  kConcat,
  kSlice,
  kPadCols,
  kTranspose,
  kReshape,
  kSumRows,
  kBroadcastRows,
  kSumCols,
  kBroadcastCols,
  kBroadcastScalar,
  kRowL2Norm,
  kOpaque,
};

const char* op_name(OpKind kind);

/// Handle to a node on a tape. Cheap to copy; valid while the tape lives.
class Var {
 public:
  Var() = default;

  bool valid() const noexcept { return tape_ != nullptr; }
  Tape& tape() const { return *tape_; }
  std::size_t id() const noexcept { return id_; }

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  bool requires_grad() const;

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

/// Returns one gradient per parent; an invalid Var means "no contribution".
using VjpFn = std::function<std::vector<Var>(Tape&, std::size_t self, const Var& upstream)>;

struct Node {
  OpKind kind = OpKind::kConstant;
  Tensor value;
  std::vector<std::size_t> parents;
  VjpFn vjp;
  bool requires_grad = false;
  // VJP treats some local partials as constants, so it cannot be
  // differentiated a second time.
  bool first_order_only = false;
};

/// dOutput/dNode for leaves, indexed by node id.
class GradientMap {
 public:
  GradientMap() = default;
  explicit GradientMap(std::vector<Tensor> grads) : grads_(std::move(grads)) {}

  /// Gradient for `v`; zeros of v's shape if the output does not depend on it.
  Tensor at(const Var& v) const;
  bool contains(const Var& v) const;

 private:
  std::vector<Tensor> grads_;
};

class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Leaf that gradients are taken with respect to.
  Var variable(Tensor value);
  Var constant(Tensor value);

  const Node& node(std::size_t id) const { return nodes_.at(id); }
  Var handle(std::size_t id) { return Var(this, id); }
  std::size_t size() const noexcept { return nodes_.size(); }
  bool recording() const noexcept { return recording_; }

  /// Inside a VJP: whether the pass needs the gradient of parent `k` of the
  /// node being differentiated. VJPs may return an invalid Var otherwise.
  bool parent_needed(std::size_t k) const {
    return k >= parent_needed_.size() || parent_needed_[k];
  }

  /// Records a node. Used by the op functions; rarely needed directly.
  Var record(OpKind kind, Tensor value, std::vector<std::size_t> parents, VjpFn vjp,
             bool first_order_only = false);

  /// Gradient of scalar `output` w.r.t. each of `wrt`. With create_graph the
  /// results are themselves differentiable tape expressions.
  std::vector<Var> grad(const Var& output, std::span<const Var> wrt, bool create_graph = false);

  /// Plain reverse pass returning values for every leaf variable.
  GradientMap backward(const Var& output);

  /// Gradient values w.r.t. `wrt`, in order.
  std::vector<Tensor> gradients(const Var& output, std::span<const Var> wrt);

  /// Suspends recording: ops executed inside produce constants.
  class NoGradGuard {
   public:
    explicit NoGradGuard(Tape& tape) : tape_(tape), saved_(tape.recording_) {
      tape_.recording_ = false;
    }
    ~NoGradGuard() { tape_.recording_ = saved_; }
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

   private:
    Tape& tape_;
    bool saved_;
  };

 private:
  // Empty `wrt` means every leaf.
  std::vector<Var> reverse_pass(const Var& output, bool create_graph,
                                std::span<const Var> wrt = {});

  std::vector<Node> nodes_;
  bool recording_ = true;
  std::vector<bool> parent_needed_;
};

// ---------------------------------------------------------------------------
// Primitive operations. Rank-2 tensors are [rows, cols]; "last axis" ops act
// on columns of a matrix or entries of a vector.

Var add(const Var& a, const Var& b);  ///< same shape
Var sub(const Var& a, const Var& b);  ///< same shape
Var mul(const Var& a, const Var& b);  ///< elementwise, same shape
Var scale(const Var& a, double alpha);
Var add_scalar(const Var& a, double c);

/// [m,k] x [k,n] -> [m,n]
Var matmul(const Var& a, const Var& b);

/// x W^T + b with W [out,in], b [out]; x is [n,in] (-> [n,out]) or [in]
/// (-> [out]). Bias-add over rows is the only broadcasting the engine does.
Var affine(const Var& w, const Var& x, const Var& b);

Var tanh(const Var& a);
Var relu(const Var& a);  ///< subgradient 0 at 0
Var sigmoid(const Var& a);
Var abs(const Var& a);   ///< subgradient 0 at 0

Var sum(const Var& a);   ///< -> scalar
Var mean(const Var& a);  ///< -> scalar; a must be non-empty
Var l1_norm(const Var& a);
Var l2_norm(const Var& a);  ///< first-order only; subgradient 0 at 0

/// Concatenate along the last axis; rank and row count must agree.
Var concat(const Var& a, const Var& b);
Var concat(std::span<const Var> parts);
/// Columns [begin, end) of the last axis.
Var slice(const Var& a, std::size_t begin, std::size_t end);
/// Embed `a` into zeros of last-axis width `width`, starting at `begin`.
Var pad_cols(const Var& a, std::size_t begin, std::size_t width);

Var transpose(const Var& a);  ///< rank 2 only
Var reshape(const Var& a, Shape shape);
Var sum_rows(const Var& a);                       ///< [n,d] -> [d]
Var broadcast_rows(const Var& a, std::size_t n);  ///< [d] -> [n,d]
Var sum_cols(const Var& a);                       ///< [n,d] -> [n]
Var broadcast_cols(const Var& a, std::size_t d);  ///< [n] -> [n,d]
Var broadcast_scalar(const Var& a, Shape shape);
/// Euclidean norm of each row, [n,d] -> [n]. First-order only.
Var row_l2_norm(const Var& a);

/// Non-differentiable map evaluated on the value. Gradients stop here.
Var opaque(const Var& a, const std::function<Tensor(const Tensor&)>& fn);

inline Var operator+(const Var& a, const Var& b) { return add(a, b); }
inline Var operator-(const Var& a, const Var& b) { return sub(a, b); }
inline Var operator*(const Var& a, const Var& b) { return mul(a, b); }
inline Var operator*(double alpha, const Var& a) { return scale(a, alpha); }

// ---------------------------------------------------------------------------
// Finite-difference verification.

struct FiniteDiffReport {
  double max_relative_error = 0.0;
  std::size_t checked = 0;
  std::size_t skipped = 0;  ///< coordinates whose stencil straddles a kink
};

using ScalarFn = std::function<Var(Tape&, const Var&)>;

/// Compares the reverse-mode gradient of `f` at `x` against central
/// differences with step `h`. Error per coordinate is
/// |g_ad - g_fd| / max(1, |g_fd|). A coordinate is skipped when some
/// relu/abs/l1 input or Euclidean norm that moves along its stencil changes
/// sign or comes within `kink_band` of zero.
FiniteDiffReport finite_diff_check(const ScalarFn& f, const Tensor& x, double h,
                                   double kink_band = 1e-6);

}  // namespace functorium::ad
