#pragma once

// Parameterized differentiable maps P x A -> B and their composition.
//
// Parameters are a flat vector. Composites lay out the left (first-applied)
// factor's block first, then the right factor's block, so the parameter
// space of a composite is the concatenation of its parts.

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "functorium/autodiff.hpp"
#include "functorium/tensor.hpp"

namespace functorium {

/// Forward body: params is [param_dim], input is [n, in_dim]; returns [n, out_dim].
using ParaForward =
    std::function<ad::Var(ad::Tape&, const ad::Var& params, const ad::Var& input)>;

class ParamFn {
 public:
  ParamFn() = default;
  ParamFn(std::size_t param_dim, std::size_t in_dim, std::size_t out_dim, ParaForward forward,
          std::string label = {});

  std::size_t param_dim() const noexcept { return param_dim_; }
  std::size_t in_dim() const noexcept { return in_dim_; }
  std::size_t out_dim() const noexcept { return out_dim_; }
  const std::string& label() const noexcept { return label_; }

  /// Records the map on `tape`. `input` may be a batch [n, in_dim] or a
  /// single point [in_dim]; the result has the matching rank.
  ad::Var operator()(ad::Tape& tape, const ad::Var& params, const ad::Var& input) const;

 private:
  std::size_t param_dim_ = 0;
  std::size_t in_dim_ = 0;
  std::size_t out_dim_ = 0;
  ParaForward forward_;
  std::string label_;
};

enum class Activation { kNone, kTanh, kRelu, kSigmoid };

const char* to_string(Activation a);
/// Parses "none", "tanh", "relu" or "sigmoid".
Activation parse_activation(const std::string& name);
ad::Var apply_activation(Activation a, const ad::Var& x);

/// Layer widths input, hidden..., output. Each hidden layer has its own
/// activation; the last layer has `output_activation`.
struct MLPSpec {
  std::vector<std::size_t> widths;
  std::vector<Activation> hidden_activations;
  Activation output_activation = Activation::kNone;

  /// Every hidden layer gets the same activation.
  static MLPSpec uniform(std::vector<std::size_t> widths, Activation hidden,
                         Activation output = Activation::kNone);
  void validate() const;
};

/// Parameter count of an MLP: sum over layers of (w_in * w_out + w_out).
std::size_t mlp_param_dim(const MLPSpec& spec);

/// Multi-layer perceptron. Per layer, the parameter block is the weight
/// matrix [w_out, w_in] in row-major order followed by the bias [w_out].
ParamFn mlp(const MLPSpec& spec);

/// f first, then g. Throws ShapeError if f.out_dim != g.in_dim.
ParamFn compose_para(const ParamFn& f, const ParamFn& g);

ParamFn identity_para(std::size_t dim);

/// Parallel pairing A x C -> B x D: the input's first f.in_dim coordinates
/// go through f and the rest through g; outputs are concatenated. Parameter
/// layout is f's block then g's block.
ParamFn pair_para(const ParamFn& f, const ParamFn& g);

/// Fixed affine map x -> W x + b with no parameters.
ParamFn fixed_affine(Tensor weight, Tensor bias, std::string label = {});

/// Parameter-free map given by a value-level function; not differentiable.
ParamFn opaque_para(std::size_t in_dim, std::size_t out_dim,
                    std::function<Tensor(const Tensor&)> rowwise_batch_fn, std::string label = {});

/// A morphism of Euc: a plain map obtained by fixing parameters.
class EucMap {
 public:
  EucMap(ParamFn fn, Tensor params);

  std::size_t in_dim() const noexcept { return fn_.in_dim(); }
  std::size_t out_dim() const noexcept { return fn_.out_dim(); }

  /// Evaluates on a point [in_dim] or a batch [n, in_dim].
  Tensor operator()(const Tensor& x) const;
  /// Records the map with frozen parameters on an existing tape.
  ad::Var operator()(ad::Tape& tape, const ad::Var& x) const;

 private:
  ParamFn fn_;
  Tensor params_;
};

/// Partial application f(p, -). Throws ShapeError if the length of `params`
/// differs from f.param_dim(), NumericError if any entry is not finite.
EucMap apply_partial(const ParamFn& f, const Tensor& params);

}  // namespace functorium
