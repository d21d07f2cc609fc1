#pragma once

// Architectures assign a Euclidean space to every object and a parameterized
// map to every generating arrow. Fixing one parameter tensor per generator
// gives a Model, which evaluates any path of the free category by composing
// generator maps.

#include <cstddef>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "functorium/autodiff.hpp"
#include "functorium/dataset.hpp"
#include "functorium/para.hpp"
#include "functorium/schema.hpp"
#include "functorium/tensor.hpp"

namespace functorium {

class Architecture {
 public:
  /// Throws std::invalid_argument unless every object and arrow is assigned
  /// and each generator runs from dim(source) to dim(target).
  Architecture(Schema schema, std::map<std::string, std::size_t> object_dims,
               std::map<std::string, ParamFn> generators);

  const Schema& schema() const noexcept { return schema_; }
  std::size_t object_dim(const std::string& object) const;
  const std::map<std::string, std::size_t>& object_dims() const noexcept { return object_dims_; }
  const ParamFn& generator(const std::string& arrow) const;
  /// Generator names in arrow declaration order.
  std::vector<std::string> generator_names() const;

 private:
  Schema schema_;
  std::map<std::string, std::size_t> object_dims_;
  std::map<std::string, ParamFn> generators_;
};

/// Sum of the generators' parameter dimensions.
std::size_t total_param_dim(const Architecture& arch);

/// One parameter vector per generator arrow.
class ParameterAssignment {
 public:
  ParameterAssignment() = default;
  explicit ParameterAssignment(std::map<std::string, Tensor> params)
      : params_(std::move(params)) {}

  static ParameterAssignment zeros(const Architecture& arch);
  /// Splits a flat vector in generator declaration order.
  static ParameterAssignment unflatten(const Architecture& arch, const Tensor& flat);

  /// Concatenation in generator declaration order.
  Tensor flatten(const Architecture& arch) const;

  const Tensor& at(const std::string& arrow) const;
  bool contains(const std::string& arrow) const { return params_.count(arrow) != 0; }
  const std::map<std::string, Tensor>& entries() const noexcept { return params_; }
  std::size_t total_dim() const;

  /// Throws std::invalid_argument on missing/extra keys or wrong lengths.
  void check_against(const Architecture& arch) const;

  friend bool operator==(const ParameterAssignment&, const ParameterAssignment&) = default;

 private:
  std::map<std::string, Tensor> params_;
};

/// An architecture together with a point of its parameter space.
class Model {
 public:
  Model(std::shared_ptr<const Architecture> arch, ParameterAssignment params);

  const Architecture& architecture() const noexcept { return *arch_; }
  std::shared_ptr<const Architecture> architecture_ptr() const noexcept { return arch_; }
  const ParameterAssignment& params() const noexcept { return params_; }
  const Schema& schema() const noexcept { return arch_->schema(); }

  /// The plain map of one generator.
  EucMap generator_map(const std::string& arrow) const;

  /// x is a point [dim] or batch [n, dim] of the arrow's source.
  Tensor eval_arrow(const std::string& arrow, const Tensor& x) const;
  Tensor eval_path(const Path& path, const Tensor& x) const;

  /// Same model with different parameters.
  Model with_params(ParameterAssignment params) const { return Model(arch_, std::move(params)); }

 private:
  std::shared_ptr<const Architecture> arch_;
  ParameterAssignment params_;
};

/// Partially applies every generator to its parameters.
Model pspec(std::shared_ptr<const Architecture> arch, ParameterAssignment params);
Model pspec(const Architecture& arch, ParameterAssignment params);

Tensor eval_path(const Model& model, const Path& path, const Tensor& x);

/// Tape-level path evaluation: `param_vars` maps each arrow on the path to
/// its parameter node. Identity paths return x itself.
ad::Var eval_path(ad::Tape& tape, const Architecture& arch,
                  const std::map<std::string, ad::Var>& param_vars, const Path& path,
                  const ad::Var& x);

/// "lhs = rhs" in DSL notation.
std::string relation_label(const Relation& r);

/// For each relation (in schema order), the mean over the sample rows of the
/// L1 distance between the two sides. `samples` maps objects to [n, dim]
/// batches; the relation's source must be present.
std::vector<double> functoriality_residual(const Model& model,
                                           const std::map<std::string, Tensor>& samples);

/// Points reached from the dataset under the model, per object.
using PointFamily = std::map<std::string, std::vector<Tensor>>;

/// Smallest family containing every dataset point and closed under the
/// images of all paths of length <= max_len. Worklist iteration over single
/// generators with bitwise-exact duplicate elimination; points are listed in
/// discovery order (dataset points first).
PointFamily restrict_to_dataset(const Model& model, const DatasetFunctor& dataset,
                                std::size_t max_len = 8);

/// Applies every generator once to every point of `family` and adds what is
/// new. Returns the enlarged family; equal to the input iff it is closed.
PointFamily closure_step(const Model& model, const PointFamily& family);

/// Bitwise set equality per object, ignoring order.
bool same_point_sets(const PointFamily& a, const PointFamily& b);

}  // namespace functorium
