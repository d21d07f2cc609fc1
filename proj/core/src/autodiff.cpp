#include "functorium/autodiff.hpp"

#include <algorithm>
#include <limits>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>

namespace functorium::ad {

namespace {

void require_same_tape(const Var& a, const Var& b) {
  if (!a.valid() || !b.valid()) throw std::invalid_argument("operation on an empty Var");
  if (&a.tape() != &b.tape()) throw std::invalid_argument("operands live on different tapes");
}

void require_same_shape(const char* op, const Var& a, const Var& b) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + to_string(a.shape()) + " vs " +
                     to_string(b.shape()));
  }
}

template <typename F>
Tensor map_values(const Tensor& t, F f) {
  Tensor out(t.shape());
  for (std::size_t i = 0; i < t.size(); ++i) out[i] = f(t[i]);
  return out;
}

template <typename F>
Tensor zip_values(const Tensor& a, const Tensor& b, F f) {
  Tensor out(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = f(a[i], b[i]);
  return out;
}

double sign(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

std::size_t last_axis(const Tensor& t) {
  if (t.rank() == 0) throw ShapeError("last-axis operation on a scalar");
  return t.shape().back();
}

Shape with_last_axis(const Shape& s, std::size_t n) {
  Shape out = s;
  out.back() = n;
  return out;
}

}  // namespace

const char* op_name(OpKind kind) {
  switch (kind) {
    case OpKind::kLeaf: return "leaf";
    case OpKind::kConstant: return "constant";
    case OpKind::kAdd: return "add";
    case OpKind::kSub: return "sub";
    case OpKind::kMul: return "mul";
    case OpKind::kScale: return "scale";
    case OpKind::kAddScalar: return "add_scalar";
    case OpKind::kMatMul: return "matmul";
    case OpKind::kAffine: return "affine";
    case OpKind::kTanh: return "tanh";
    case OpKind::kRelu: return "relu";
    case OpKind::kSigmoid: return "sigmoid";
    case OpKind::kAbs: return "abs";
    case OpKind::kSum: return "sum";
    case OpKind::kMean: return "mean";
    case OpKind::kL1Norm: return "l1_norm";
    case OpKind::kL2Norm: return "l2_norm";
    case OpKind::kConcat: return "concat";
    case OpKind::kSlice: return "slice";
    case OpKind::kPadCols: return "pad_cols";
    case OpKind::kTranspose: return "transpose";
    case OpKind::kReshape: return "reshape";
    case OpKind::kSumRows: return "sum_rows";
    case OpKind::kBroadcastRows: return "broadcast_rows";
    case OpKind::kSumCols: return "sum_cols";
    case OpKind::kBroadcastCols: return "broadcast_cols";
    case OpKind::kBroadcastScalar: return "broadcast_scalar";
    case OpKind::kRowL2Norm: return "row_l2_norm";
    case OpKind::kOpaque: return "opaque";
  }
  return "?";
}

// ---------------------------------------------------------------------------
// Var / GradientMap

const Tensor& Var::value() const { return tape_->node(id_).value; }
bool Var::requires_grad() const { return tape_->node(id_).requires_grad; }

Tensor GradientMap::at(const Var& v) const {
  if (v.id() < grads_.size() && grads_[v.id()].shape() == v.shape()) return grads_[v.id()];
  return Tensor(v.shape());
}

bool GradientMap::contains(const Var& v) const {
  return v.id() < grads_.size() && grads_[v.id()].shape() == v.shape();
}

// ---------------------------------------------------------------------------
// Tape

Var Tape::variable(Tensor value) {
  Node n;
  n.kind = OpKind::kLeaf;
  n.value = std::move(value);
  n.requires_grad = true;
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

Var Tape::constant(Tensor value) {
  Node n;
  n.kind = OpKind::kConstant;
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

Var Tape::record(OpKind kind, Tensor value, std::vector<std::size_t> parents, VjpFn vjp,
                 bool first_order_only) {
  Node n;
  n.kind = kind;
  n.value = std::move(value);
  if (recording_) {
    n.requires_grad = std::any_of(parents.begin(), parents.end(),
                                  [this](std::size_t p) { return nodes_[p].requires_grad; });
  }
  if (n.requires_grad) {
    n.parents = std::move(parents);
    n.vjp = std::move(vjp);
    n.first_order_only = first_order_only;
  }
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

std::vector<Var> Tape::reverse_pass(const Var& output, bool create_graph,
                                    std::span<const Var> wrt) {
  if (&output.tape() != this) throw std::invalid_argument("output is not on this tape");
  if (output.value().size() != 1) {
    throw ShapeError("backward requires a scalar output, got shape " +
                     to_string(output.shape()));
  }
  const std::size_t count = output.id() + 1;
  std::vector<Var> grads(count);
  if (!node(output.id()).requires_grad) return grads;

  // Only nodes with a path down to a target carry useful gradient.
  std::vector<bool> relevant(count, false);
  if (wrt.empty()) {
    for (std::size_t i = 0; i < count; ++i) relevant[i] = nodes_[i].requires_grad;
  } else {
    for (const auto& w : wrt) {
      if (w.id() < count && nodes_[w.id()].requires_grad) relevant[w.id()] = true;
    }
    for (std::size_t i = 0; i < count; ++i) {
      if (relevant[i] || !nodes_[i].requires_grad) continue;
      for (std::size_t p : nodes_[i].parents) {
        if (relevant[p]) {
          relevant[i] = true;
          break;
        }
      }
    }
  }

  std::optional<NoGradGuard> guard;
  if (!create_graph) guard.emplace(*this);

  grads[output.id()] = constant(Tensor(output.shape(), 1.0));
  for (std::size_t i = count; i-- > 0;) {
    if (!grads[i].valid() || !relevant[i]) continue;
    const Node& n = nodes_[i];
    if (!n.requires_grad || !n.vjp) continue;
    if (create_graph && n.first_order_only) {
      throw std::logic_error(std::string("cannot differentiate twice through ") +
                             op_name(n.kind));
    }
    const auto parents = n.parents;
    const auto vjp = n.vjp;  // nodes_ may reallocate while the VJP records
    parent_needed_.assign(parents.size(), false);
    for (std::size_t k = 0; k < parents.size(); ++k) parent_needed_[k] = relevant[parents[k]];
    std::vector<Var> pgrads = vjp(*this, i, grads[i]);
    parent_needed_.clear();
    for (std::size_t k = 0; k < parents.size(); ++k) {
      if (k >= pgrads.size() || !pgrads[k].valid()) continue;
      const std::size_t p = parents[k];
      if (!relevant[p]) continue;
      grads[p] = grads[p].valid() ? add(grads[p], pgrads[k]) : pgrads[k];
    }
  }
  return grads;
}

std::vector<Var> Tape::grad(const Var& output, std::span<const Var> wrt, bool create_graph) {
  auto grads = reverse_pass(output, create_graph, wrt);
  std::vector<Var> out;
  out.reserve(wrt.size());
  for (const auto& w : wrt) {
    if (w.id() < grads.size() && grads[w.id()].valid()) {
      out.push_back(grads[w.id()]);
    } else {
      out.push_back(constant(Tensor(w.shape())));
    }
  }
  return out;
}

GradientMap Tape::backward(const Var& output) {
  auto grads = reverse_pass(output, false);
  std::vector<Tensor> values(grads.size());
  for (std::size_t i = 0; i < grads.size(); ++i) {
    if (grads[i].valid() && nodes_[i].kind == OpKind::kLeaf) values[i] = grads[i].value();
  }
  return GradientMap(std::move(values));
}

std::vector<Tensor> Tape::gradients(const Var& output, std::span<const Var> wrt) {
  auto vars = grad(output, wrt, false);
  std::vector<Tensor> out;
  out.reserve(vars.size());
  for (const auto& v : vars) out.push_back(v.value());
  return out;
}

// ---------------------------------------------------------------------------
// Kernels

namespace {

Tensor transpose_values(const Tensor& a);

Tensor matmul_values(const Tensor& a, const Tensor& b) {
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  Tensor out(Shape{m, n});
  const double* pa = a.data().data();
  const double* pb = b.data().data();
  double* po = out.data().data();
  if (n >= 4) {
    // Row-times-matrix: the inner loop runs along contiguous output rows.
    for (std::size_t i = 0; i < m; ++i) {
      double* orow = po + i * n;
      const double* arow = pa + i * k;
      for (std::size_t p = 0; p < k; ++p) {
        const double av = arow[p];
        const double* brow = pb + p * n;
        for (std::size_t j = 0; j < n; ++j) orow[j] += av * brow[j];
      }
    }
    return out;
  }
  // Narrow outputs: dot products with independent partial sums.
  for (std::size_t i = 0; i < m; ++i) {
    const double* arow = pa + i * k;
    for (std::size_t j = 0; j < n; ++j) {
      double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
      std::size_t p = 0;
      for (; p + 4 <= k; p += 4) {
        s0 += arow[p] * pb[p * n + j];
        s1 += arow[p + 1] * pb[(p + 1) * n + j];
        s2 += arow[p + 2] * pb[(p + 2) * n + j];
        s3 += arow[p + 3] * pb[(p + 3) * n + j];
      }
      for (; p < k; ++p) s0 += arow[p] * pb[p * n + j];
      po[i * n + j] = (s0 + s1) + (s2 + s3);
    }
  }
  return out;
}

// x [n,in], w [out,in], b [out] -> [n,out]
Tensor affine_values(const Tensor& w, const Tensor& x, const Tensor& b) {
  Tensor out = matmul_values(x, transpose_values(w));
  const std::size_t n = out.dim(0), out_dim = out.dim(1);
  double* po = out.data().data();
  const double* pb = b.data().data();
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t o = 0; o < out_dim; ++o) po[r * out_dim + o] += pb[o];
  return out;
}

Tensor transpose_values(const Tensor& a) {
  const std::size_t m = a.dim(0), n = a.dim(1);
  Tensor out(Shape{n, m});
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[j * m + i] = a[i * n + j];
  return out;
}

void require_rank(const char* op, const Var& a, std::size_t rank) {
  if (a.value().rank() != rank) {
    throw ShapeError(std::string(op) + ": expected rank " + std::to_string(rank) + ", got " +
                     to_string(a.shape()));
  }
}


}  // namespace

// ---------------------------------------------------------------------------
// Elementwise arithmetic

Var add(const Var& a, const Var& b) {
  require_same_tape(a, b);
  require_same_shape("add", a, b);
  auto v = zip_values(a.value(), b.value(), [](double x, double y) { return x + y; });
  return a.tape().record(OpKind::kAdd, std::move(v), {a.id(), b.id()},
                         [](Tape&, std::size_t, const Var& g) { return std::vector<Var>{g, g}; });
}

Var sub(const Var& a, const Var& b) {
  require_same_tape(a, b);
  require_same_shape("sub", a, b);
  auto v = zip_values(a.value(), b.value(), [](double x, double y) { return x - y; });
  return a.tape().record(OpKind::kSub, std::move(v), {a.id(), b.id()},
                         [](Tape&, std::size_t, const Var& g) {
                           return std::vector<Var>{g, scale(g, -1.0)};
                         });
}

Var mul(const Var& a, const Var& b) {
  require_same_tape(a, b);
  require_same_shape("mul", a, b);
  auto v = zip_values(a.value(), b.value(), [](double x, double y) { return x * y; });
  const std::size_t ia = a.id(), ib = b.id();
  return a.tape().record(OpKind::kMul, std::move(v), {ia, ib},
                         [ia, ib](Tape& t, std::size_t, const Var& g) {
                           return std::vector<Var>{mul(g, t.handle(ib)), mul(g, t.handle(ia))};
                         });
}

Var scale(const Var& a, double alpha) {
  auto v = map_values(a.value(), [alpha](double x) { return alpha * x; });
  return a.tape().record(OpKind::kScale, std::move(v), {a.id()},
                         [alpha](Tape&, std::size_t, const Var& g) {
                           return std::vector<Var>{scale(g, alpha)};
                         });
}

Var add_scalar(const Var& a, double c) {
  auto v = map_values(a.value(), [c](double x) { return x + c; });
  return a.tape().record(OpKind::kAddScalar, std::move(v), {a.id()},
                         [](Tape&, std::size_t, const Var& g) { return std::vector<Var>{g}; });
}

// ---------------------------------------------------------------------------
// Linear algebra

Var matmul(const Var& a, const Var& b) {
  require_same_tape(a, b);
  require_rank("matmul", a, 2);
  require_rank("matmul", b, 2);
  if (a.shape()[1] != b.shape()[0]) {
    throw ShapeError("matmul: inner dimensions differ " + to_string(a.shape()) + " x " +
                     to_string(b.shape()));
  }
  auto v = matmul_values(a.value(), b.value());
  const std::size_t ia = a.id(), ib = b.id();
  return a.tape().record(OpKind::kMatMul, std::move(v), {ia, ib},
                         [ia, ib](Tape& t, std::size_t, const Var& g) {
                           Var va = t.handle(ia), vb = t.handle(ib);
                           std::vector<Var> out(2);
                           if (t.parent_needed(0)) out[0] = matmul(g, transpose(vb));
                           if (t.parent_needed(1)) out[1] = matmul(transpose(va), g);
                           return out;
                         });
}

Var affine(const Var& w, const Var& x, const Var& b) {
  require_same_tape(w, x);
  require_same_tape(w, b);
  require_rank("affine weight", w, 2);
  require_rank("affine bias", b, 1);
  const std::size_t out_dim = w.shape()[0], in_dim = w.shape()[1];
  if (b.shape()[0] != out_dim) {
    throw ShapeError("affine: bias " + to_string(b.shape()) + " vs weight " +
                     to_string(w.shape()));
  }
  if (x.value().rank() == 1) {
    if (x.shape()[0] != in_dim) {
      throw ShapeError("affine: input " + to_string(x.shape()) + " vs weight " +
                       to_string(w.shape()));
    }
    return reshape(affine(w, reshape(x, Shape{1, in_dim}), b), Shape{out_dim});
  }
  require_rank("affine input", x, 2);
  if (x.shape()[1] != in_dim) {
    throw ShapeError("affine: input " + to_string(x.shape()) + " vs weight " +
                     to_string(w.shape()));
  }
  auto v = affine_values(w.value(), x.value(), b.value());
  const std::size_t iw = w.id(), ix = x.id();
  return w.tape().record(OpKind::kAffine, std::move(v), {iw, ix, b.id()},
                         [iw, ix](Tape& t, std::size_t, const Var& g) {
                           Var vw = t.handle(iw), vx = t.handle(ix);
                           std::vector<Var> out(3);
                           if (t.parent_needed(0)) out[0] = matmul(transpose(g), vx);
                           if (t.parent_needed(1)) out[1] = matmul(g, vw);
                           if (t.parent_needed(2)) out[2] = sum_rows(g);
                           return out;
                         });
}

Var transpose(const Var& a) {
  require_rank("transpose", a, 2);
  return a.tape().record(OpKind::kTranspose, transpose_values(a.value()), {a.id()},
                         [](Tape&, std::size_t, const Var& g) {
                           return std::vector<Var>{transpose(g)};
                         });
}

Var reshape(const Var& a, Shape shape) {
  if (element_count(shape) != a.value().size()) {
    throw ShapeError("reshape " + to_string(a.shape()) + " -> " + to_string(shape));
  }
  Shape original = a.shape();
  return a.tape().record(OpKind::kReshape, a.value().reshaped(std::move(shape)), {a.id()},
                         [original](Tape&, std::size_t, const Var& g) {
                           return std::vector<Var>{reshape(g, original)};
                         });
}

// ---------------------------------------------------------------------------
// Activations

Var tanh(const Var& a) {
  auto v = map_values(a.value(), [](double x) { return std::tanh(x); });
  return a.tape().record(OpKind::kTanh, std::move(v), {a.id()},
                         [](Tape& t, std::size_t self, const Var& g) {
                           Var y = t.handle(self);
                           // 1 - y^2
                           Var d = add_scalar(scale(mul(y, y), -1.0), 1.0);
                           return std::vector<Var>{mul(g, d)};
                         });
}

Var sigmoid(const Var& a) {
  auto v = map_values(a.value(), [](double x) {
    // Split by sign so exp never overflows.
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
  });
  return a.tape().record(OpKind::kSigmoid, std::move(v), {a.id()},
                         [](Tape& t, std::size_t self, const Var& g) {
                           Var y = t.handle(self);
                           Var d = mul(y, add_scalar(scale(y, -1.0), 1.0));
                           return std::vector<Var>{mul(g, d)};
                         });
}

Var relu(const Var& a) {
  auto v = map_values(a.value(), [](double x) { return x > 0.0 ? x : 0.0; });
  const std::size_t ia = a.id();
  return a.tape().record(OpKind::kRelu, std::move(v), {ia},
                         [ia](Tape& t, std::size_t, const Var& g) {
                           auto mask = map_values(t.node(ia).value,
                                                  [](double x) { return x > 0.0 ? 1.0 : 0.0; });
                           return std::vector<Var>{mul(g, t.constant(std::move(mask)))};
                         });
}

Var abs(const Var& a) {
  auto v = map_values(a.value(), [](double x) { return std::abs(x); });
  const std::size_t ia = a.id();
  return a.tape().record(OpKind::kAbs, std::move(v), {ia},
                         [ia](Tape& t, std::size_t, const Var& g) {
                           auto s = map_values(t.node(ia).value, sign);
                           return std::vector<Var>{mul(g, t.constant(std::move(s)))};
                         });
}

// ---------------------------------------------------------------------------
// Reductions

Var sum(const Var& a) {
  double s = 0.0;
  for (double x : a.value().data()) s += x;
  Shape original = a.shape();
  return a.tape().record(OpKind::kSum, Tensor::scalar(s), {a.id()},
                         [original](Tape&, std::size_t, const Var& g) {
                           return std::vector<Var>{broadcast_scalar(g, original)};
                         });
}

Var mean(const Var& a) {
  const std::size_t n = a.value().size();
  if (n == 0) throw ShapeError("mean of an empty tensor");
  double s = 0.0;
  for (double x : a.value().data()) s += x;
  Shape original = a.shape();
  const double inv = 1.0 / static_cast<double>(n);
  return a.tape().record(OpKind::kMean, Tensor::scalar(s * inv), {a.id()},
                         [original, inv](Tape&, std::size_t, const Var& g) {
                           return std::vector<Var>{scale(broadcast_scalar(g, original), inv)};
                         });
}

Var l1_norm(const Var& a) {
  double s = 0.0;
  for (double x : a.value().data()) s += std::abs(x);
  const std::size_t ia = a.id();
  return a.tape().record(OpKind::kL1Norm, Tensor::scalar(s), {ia},
                         [ia](Tape& t, std::size_t, const Var& g) {
                           const Tensor x = t.node(ia).value;
                           Var sg = t.constant(map_values(x, sign));
                           return std::vector<Var>{mul(broadcast_scalar(g, x.shape()), sg)};
                         });
}

Var l2_norm(const Var& a) {
  double s = 0.0;
  for (double x : a.value().data()) s += x * x;
  const double norm = std::sqrt(s);
  const std::size_t ia = a.id();
  return a.tape().record(
      OpKind::kL2Norm, Tensor::scalar(norm), {ia},
      [ia, norm](Tape& t, std::size_t, const Var& g) {
        const Tensor x = t.node(ia).value;
        Var unit = t.constant(map_values(x, [norm](double v) { return norm > 0.0 ? v / norm : 0.0; }));
        return std::vector<Var>{mul(broadcast_scalar(g, x.shape()), unit)};
      },
      /*first_order_only=*/true);
}

Var row_l2_norm(const Var& a) {
  require_rank("row_l2_norm", a, 2);
  const std::size_t n = a.shape()[0], d = a.shape()[1];
  Tensor norms(Shape{n});
  for (std::size_t r = 0; r < n; ++r) {
    double s = 0.0;
    for (double v : a.value().row(r)) s += v * v;
    norms[r] = std::sqrt(s);
  }
  const std::size_t ia = a.id();
  Tensor norms_copy = norms;
  return a.tape().record(
      OpKind::kRowL2Norm, std::move(norms), {ia},
      [ia, d, norms_copy](Tape& t, std::size_t, const Var& g) {
        const Tensor& x = t.node(ia).value;
        Tensor unit(x.shape());
        for (std::size_t r = 0; r < x.rows(); ++r) {
          const double nr = norms_copy[r];
          for (std::size_t c = 0; c < d; ++c) unit.at(r, c) = nr > 0.0 ? x.at(r, c) / nr : 0.0;
        }
        return std::vector<Var>{mul(broadcast_cols(g, d), t.constant(std::move(unit)))};
      },
      /*first_order_only=*/true);
}

// ---------------------------------------------------------------------------
// Structural ops

Var concat(const Var& a, const Var& b) {
  require_same_tape(a, b);
  const Tensor& ta = a.value();
  const Tensor& tb = b.value();
  if (ta.rank() != tb.rank() || ta.rank() == 0 || ta.rank() > 2 || ta.rows() != tb.rows()) {
    throw ShapeError("concat: incompatible shapes " + to_string(ta.shape()) + " and " +
                     to_string(tb.shape()));
  }
  const std::size_t ca = last_axis(ta), cb = last_axis(tb), rows = ta.rows();
  Tensor out(with_last_axis(ta.shape(), ca + cb));
  for (std::size_t r = 0; r < rows; ++r) {
    auto ra = ta.row(r);
    auto rb = tb.row(r);
    std::copy(ra.begin(), ra.end(), out.data().begin() + static_cast<std::ptrdiff_t>(r * (ca + cb)));
    std::copy(rb.begin(), rb.end(),
              out.data().begin() + static_cast<std::ptrdiff_t>(r * (ca + cb) + ca));
  }
  return a.tape().record(OpKind::kConcat, std::move(out), {a.id(), b.id()},
                         [ca, cb](Tape&, std::size_t, const Var& g) {
                           return std::vector<Var>{slice(g, 0, ca), slice(g, ca, ca + cb)};
                         });
}

Var concat(std::span<const Var> parts) {
  if (parts.empty()) throw ShapeError("concat of zero tensors");
  Var out = parts.front();
  for (std::size_t i = 1; i < parts.size(); ++i) out = concat(out, parts[i]);
  return out;
}

Var slice(const Var& a, std::size_t begin, std::size_t end) {
  const Tensor& t = a.value();
  const std::size_t c = last_axis(t);
  if (t.rank() > 2 || begin > end || end > c) {
    throw ShapeError("slice [" + std::to_string(begin) + "," + std::to_string(end) + ") of " +
                     to_string(t.shape()));
  }
  const std::size_t w = end - begin;
  Tensor out(with_last_axis(t.shape(), w));
  for (std::size_t r = 0; r < t.rows(); ++r)
    for (std::size_t j = 0; j < w; ++j) out[r * w + j] = t[r * c + begin + j];
  return a.tape().record(OpKind::kSlice, std::move(out), {a.id()},
                         [begin, c](Tape&, std::size_t, const Var& g) {
                           return std::vector<Var>{pad_cols(g, begin, c)};
                         });
}

Var pad_cols(const Var& a, std::size_t begin, std::size_t width) {
  const Tensor& t = a.value();
  const std::size_t c = last_axis(t);
  if (t.rank() > 2 || begin + c > width) {
    throw ShapeError("pad_cols: " + to_string(t.shape()) + " at " + std::to_string(begin) +
                     " into width " + std::to_string(width));
  }
  Tensor out(with_last_axis(t.shape(), width));
  for (std::size_t r = 0; r < t.rows(); ++r)
    for (std::size_t j = 0; j < c; ++j) out[r * width + begin + j] = t[r * c + j];
  return a.tape().record(OpKind::kPadCols, std::move(out), {a.id()},
                         [begin, c](Tape&, std::size_t, const Var& g) {
                           return std::vector<Var>{slice(g, begin, begin + c)};
                         });
}

Var sum_rows(const Var& a) {
  require_rank("sum_rows", a, 2);
  const std::size_t n = a.shape()[0], d = a.shape()[1];
  Tensor out(Shape{d});
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < d; ++c) out[c] += a.value()[r * d + c];
  return a.tape().record(OpKind::kSumRows, std::move(out), {a.id()},
                         [n](Tape&, std::size_t, const Var& g) {
                           return std::vector<Var>{broadcast_rows(g, n)};
                         });
}

Var broadcast_rows(const Var& a, std::size_t n) {
  require_rank("broadcast_rows", a, 1);
  const std::size_t d = a.shape()[0];
  Tensor out(Shape{n, d});
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < d; ++c) out[r * d + c] = a.value()[c];
  return a.tape().record(OpKind::kBroadcastRows, std::move(out), {a.id()},
                         [](Tape&, std::size_t, const Var& g) {
                           return std::vector<Var>{sum_rows(g)};
                         });
}

Var sum_cols(const Var& a) {
  require_rank("sum_cols", a, 2);
  const std::size_t n = a.shape()[0], d = a.shape()[1];
  Tensor out(Shape{n});
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < d; ++c) out[r] += a.value()[r * d + c];
  return a.tape().record(OpKind::kSumCols, std::move(out), {a.id()},
                         [d](Tape&, std::size_t, const Var& g) {
                           return std::vector<Var>{broadcast_cols(g, d)};
                         });
}

Var broadcast_cols(const Var& a, std::size_t d) {
  require_rank("broadcast_cols", a, 1);
  const std::size_t n = a.shape()[0];
  Tensor out(Shape{n, d});
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < d; ++c) out[r * d + c] = a.value()[r];
  return a.tape().record(OpKind::kBroadcastCols, std::move(out), {a.id()},
                         [](Tape&, std::size_t, const Var& g) {
                           return std::vector<Var>{sum_cols(g)};
                         });
}

Var broadcast_scalar(const Var& a, Shape shape) {
  Tensor out(std::move(shape), a.value().item());
  return a.tape().record(OpKind::kBroadcastScalar, std::move(out), {a.id()},
                         [](Tape&, std::size_t, const Var& g) {
                           return std::vector<Var>{sum(g)};
                         });
}

Var opaque(const Var& a, const std::function<Tensor(const Tensor&)>& fn) {
  Tensor out = fn(a.value());
  return a.tape().record(OpKind::kOpaque, std::move(out), {}, VjpFn{});
}

// ---------------------------------------------------------------------------
// Finite differences

namespace {

// Inputs of every non-smooth op on the tape, in recording order.
std::vector<double> kink_arguments(const Tape& tape) {
  std::vector<double> out;
  for (std::size_t i = 0; i < tape.size(); ++i) {
    const Node& n = tape.node(i);
    if (n.parents.empty()) continue;
    switch (n.kind) {
      case OpKind::kRelu:
      case OpKind::kAbs:
      case OpKind::kL1Norm:
        for (double v : tape.node(n.parents[0]).value.data()) out.push_back(v);
        break;
      case OpKind::kL2Norm:
      case OpKind::kRowL2Norm:
        for (double v : n.value.data()) out.push_back(v);
        break;
      default:
        break;
    }
  }
  return out;
}

// True when some kink argument that moves along the stencil changes sign or
// gets within `band` of zero.
bool crosses_kink(const std::vector<double>& base, const std::vector<double>& plus,
                  const std::vector<double>& minus, double band) {
  if (plus.size() != base.size() || minus.size() != base.size()) return true;
  for (std::size_t k = 0; k < base.size(); ++k) {
    if (plus[k] == base[k] && minus[k] == base[k]) continue;
    if (sign(plus[k]) != sign(base[k]) || sign(minus[k]) != sign(base[k])) return true;
    if (std::abs(base[k]) < band || std::abs(plus[k]) < band || std::abs(minus[k]) < band) return true;
  }
  return false;
}

}  // namespace

FiniteDiffReport finite_diff_check(const ScalarFn& f, const Tensor& x, double h,
                                   double kink_band) {
  if (!(h > 0.0)) throw std::invalid_argument("finite_diff_check: step must be positive");

  Tensor analytic;
  std::vector<double> base;
  {
    Tape tape;
    Var xv = tape.variable(x);
    Var y = f(tape, xv);
    analytic = tape.backward(y).at(xv);
    base = kink_arguments(tape);
  }

  auto eval = [&](const Tensor& point, std::vector<double>* sig) {
    Tape tape;
    Var xv = tape.variable(point);
    Var y = f(tape, xv);
    if (sig) *sig = kink_arguments(tape);
    return y.value().item();
  };

  FiniteDiffReport report;
  for (std::size_t i = 0; i < x.size(); ++i) {
    Tensor plus = x, minus = x;
    plus[i] += h;
    minus[i] -= h;
    std::vector<double> sp, sm;
    const double fp = eval(plus, &sp);
    const double fm = eval(minus, &sm);
    if (crosses_kink(base, sp, sm, kink_band)) {
      ++report.skipped;
      continue;
    }
    const double fd = (fp - fm) / (2.0 * h);
    const double err = std::abs(analytic[i] - fd) / std::max(1.0, std::abs(fd));
    report.max_relative_error = std::max(report.max_relative_error, err);
    ++report.checked;
  }
  return report;
}

}  // namespace functorium::ad
