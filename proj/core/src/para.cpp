#include "functorium/para.hpp"

#include <stdexcept>

namespace functorium {

using ad::Tape;
using ad::Var;

ParamFn::ParamFn(std::size_t param_dim, std::size_t in_dim, std::size_t out_dim,
                 ParaForward forward, std::string label)
    : param_dim_(param_dim),
      in_dim_(in_dim),
      out_dim_(out_dim),
      forward_(std::move(forward)),
      label_(std::move(label)) {
  if (in_dim == 0 || out_dim == 0) throw ShapeError("ParamFn dimensions must be positive");
  if (!forward_) throw std::invalid_argument("ParamFn without a forward body");
}

Var ParamFn::operator()(Tape& tape, const Var& params, const Var& input) const {
  if (params.value().rank() != 1 || params.shape()[0] != param_dim_) {
    throw ShapeError("parameters of shape " + to_string(params.shape()) + " for a map with " +
                     std::to_string(param_dim_) + " parameters");
  }
  const Tensor& x = input.value();
  if (x.rank() == 0 || x.rank() > 2 || x.cols() != in_dim_) {
    throw ShapeError("input of shape " + to_string(x.shape()) + " for a map from R^" +
                     std::to_string(in_dim_));
  }
  if (x.rank() == 1) {
    Var batch = ad::reshape(input, Shape{1, in_dim_});
    return ad::reshape((*this)(tape, params, batch), Shape{out_dim_});
  }
  const std::size_t rows = x.rows();
  Var out = forward_(tape, params, input);
  if (out.value().rank() != 2 || out.shape()[0] != rows || out.shape()[1] != out_dim_) {
    throw ShapeError("map '" + label_ + "' produced shape " + to_string(out.shape()) +
                     ", expected [" + std::to_string(rows) + "," + std::to_string(out_dim_) +
                     "]");
  }
  return out;
}

// ---------------------------------------------------------------------------
// Activations and MLPs

const char* to_string(Activation a) {
  switch (a) {
    case Activation::kNone: return "none";
    case Activation::kTanh: return "tanh";
    case Activation::kRelu: return "relu";
    case Activation::kSigmoid: return "sigmoid";
  }
  return "?";
}

Activation parse_activation(const std::string& name) {
  if (name == "none") return Activation::kNone;
  if (name == "tanh") return Activation::kTanh;
  if (name == "relu") return Activation::kRelu;
  if (name == "sigmoid") return Activation::kSigmoid;
  throw std::invalid_argument("unknown activation '" + name + "'");
}

Var apply_activation(Activation a, const Var& x) {
  switch (a) {
    case Activation::kNone: return x;
    case Activation::kTanh: return ad::tanh(x);
    case Activation::kRelu: return ad::relu(x);
    case Activation::kSigmoid: return ad::sigmoid(x);
  }
  return x;
}

MLPSpec MLPSpec::uniform(std::vector<std::size_t> widths, Activation hidden, Activation output) {
  MLPSpec spec;
  const std::size_t hidden_layers = widths.size() >= 2 ? widths.size() - 2 : 0;
  spec.widths = std::move(widths);
  spec.hidden_activations.assign(hidden_layers, hidden);
  spec.output_activation = output;
  return spec;
}

void MLPSpec::validate() const {
  if (widths.size() < 2) throw std::invalid_argument("MLP needs input and output widths");
  for (auto w : widths)
    if (w == 0) throw std::invalid_argument("MLP widths must be positive");
  if (hidden_activations.size() != widths.size() - 2) {
    throw std::invalid_argument("MLP needs one activation per hidden layer");
  }
}

std::size_t mlp_param_dim(const MLPSpec& spec) {
  spec.validate();
  std::size_t total = 0;
  for (std::size_t l = 0; l + 1 < spec.widths.size(); ++l) {
    total += spec.widths[l] * spec.widths[l + 1] + spec.widths[l + 1];
  }
  return total;
}

ParamFn mlp(const MLPSpec& spec) {
  const std::size_t pdim = mlp_param_dim(spec);
  std::string label = "mlp[";
  for (std::size_t i = 0; i < spec.widths.size(); ++i) {
    label += (i ? "," : "") + std::to_string(spec.widths[i]);
  }
  label += "]";
  return ParamFn(
      pdim, spec.widths.front(), spec.widths.back(),
      [spec](Tape&, const Var& params, const Var& input) {
        Var h = input;
        std::size_t offset = 0;
        const std::size_t layers = spec.widths.size() - 1;
        for (std::size_t l = 0; l < layers; ++l) {
          const std::size_t in = spec.widths[l], out = spec.widths[l + 1];
          Var w = ad::reshape(ad::slice(params, offset, offset + in * out), Shape{out, in});
          offset += in * out;
          Var b = ad::slice(params, offset, offset + out);
          offset += out;
          h = ad::affine(w, h, b);
          const Activation act =
              l + 1 == layers ? spec.output_activation : spec.hidden_activations[l];
          h = apply_activation(act, h);
        }
        return h;
      },
      label);
}

// ---------------------------------------------------------------------------
// Category structure

ParamFn compose_para(const ParamFn& f, const ParamFn& g) {
  if (f.out_dim() != g.in_dim()) {
    throw ShapeError("compose_para: " + f.label() + " lands in R^" + std::to_string(f.out_dim()) +
                     " but " + g.label() + " starts at R^" + std::to_string(g.in_dim()));
  }
  const std::size_t pf = f.param_dim(), pg = g.param_dim();
  return ParamFn(
      pf + pg, f.in_dim(), g.out_dim(),
      [f, g, pf, pg](Tape& tape, const Var& params, const Var& input) {
        Var mid = f(tape, ad::slice(params, 0, pf), input);
        return g(tape, ad::slice(params, pf, pf + pg), mid);
      },
      g.label() + "." + f.label());
}

ParamFn identity_para(std::size_t dim) {
  if (dim == 0) throw ShapeError("identity_para needs a positive dimension");
  return ParamFn(
      0, dim, dim, [](Tape&, const Var&, const Var& input) { return input; },
      "id" + std::to_string(dim));
}

ParamFn pair_para(const ParamFn& f, const ParamFn& g) {
  const std::size_t pf = f.param_dim(), pg = g.param_dim();
  const std::size_t af = f.in_dim(), ag = g.in_dim();
  return ParamFn(
      pf + pg, af + ag, f.out_dim() + g.out_dim(),
      [f, g, pf, pg, af, ag](Tape& tape, const Var& params, const Var& input) {
        Var left = f(tape, ad::slice(params, 0, pf), ad::slice(input, 0, af));
        Var right = g(tape, ad::slice(params, pf, pf + pg), ad::slice(input, af, af + ag));
        return ad::concat(left, right);
      },
      "<" + f.label() + "," + g.label() + ">");
}

ParamFn fixed_affine(Tensor weight, Tensor bias, std::string label) {
  if (weight.rank() != 2 || bias.rank() != 1 || bias.size() != weight.dim(0)) {
    throw ShapeError("fixed_affine: weight " + to_string(weight.shape()) + ", bias " +
                     to_string(bias.shape()));
  }
  const std::size_t in = weight.dim(1), out = weight.dim(0);
  return ParamFn(
      0, in, out,
      [weight, bias](Tape& tape, const Var&, const Var& input) {
        return ad::affine(tape.constant(weight), input, tape.constant(bias));
      },
      std::move(label));
}

ParamFn opaque_para(std::size_t in_dim, std::size_t out_dim,
                    std::function<Tensor(const Tensor&)> rowwise_batch_fn, std::string label) {
  return ParamFn(
      0, in_dim, out_dim,
      [fn = std::move(rowwise_batch_fn)](Tape&, const Var&, const Var& input) {
        return ad::opaque(input, fn);
      },
      std::move(label));
}

// ---------------------------------------------------------------------------
// Partial application

EucMap::EucMap(ParamFn fn, Tensor params) : fn_(std::move(fn)), params_(std::move(params)) {
  if (params_.rank() != 1 || params_.size() != fn_.param_dim()) {
    throw ShapeError("apply_partial: " + std::to_string(params_.size()) + " parameters for a map with " +
                     std::to_string(fn_.param_dim()));
  }
  if (!params_.all_finite()) throw NumericError("apply_partial: non-finite parameter");
}

Tensor EucMap::operator()(const Tensor& x) const {
  Tape tape;
  Tape::NoGradGuard guard(tape);
  return fn_(tape, tape.constant(params_), tape.constant(x)).value();
}

Var EucMap::operator()(Tape& tape, const Var& x) const {
  return fn_(tape, tape.constant(params_), x);
}

EucMap apply_partial(const ParamFn& f, const Tensor& params) { return EucMap(f, params); }

}  // namespace functorium
