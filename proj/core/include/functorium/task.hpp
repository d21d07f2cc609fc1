#pragma once

// Tasks bundle a schema, the spaces its objects live in, the data attached to
// them and, for synthetic tasks, reference maps that satisfy every equation.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "functorium/dataset.hpp"
#include "functorium/functor_model.hpp"
#include "functorium/para.hpp"
#include "functorium/rng.hpp"
#include "functorium/schema.hpp"

namespace functorium {

/// One factor of an object's space. Plain objects have a single data factor
/// named after the object; product objects such as A x B_Z list several.
struct Factor {
  std::string name;
  std::size_t dim = 0;
  bool latent = false;  ///< sampled from [0,1]^dim instead of the dataset
};

/// Reference maps for every generator of a synthetic task.
class GroundTruthOracle {
 public:
  /// Checks every relation on `samples` (object -> [n, dim]) and throws
  /// std::logic_error if a residual exceeds `tolerance`.
  GroundTruthOracle(const Schema& schema, std::map<std::string, std::size_t> object_dims,
                    std::map<std::string, ParamFn> maps,
                    const std::map<std::string, Tensor>& samples, double tolerance = 1e-9);

  const std::map<std::string, ParamFn>& maps() const noexcept { return maps_; }
  const ParamFn& map(const std::string& arrow) const { return maps_.at(arrow); }
  std::shared_ptr<const Architecture> architecture() const noexcept { return arch_; }
  /// Model whose generators are the reference maps (all parameter-free).
  Model model() const;

 private:
  std::map<std::string, ParamFn> maps_;
  std::shared_ptr<const Architecture> arch_;
};

/// Names the parts of a product task AB ~= A x B_Z.
struct ProductStructure {
  std::string compose_arrow;    ///< c : A x B_Z -> AB
  std::string decompose_arrow;  ///< d : AB -> A x B_Z
  std::string product_object;   ///< A x B_Z
  std::string composite_object; ///< AB
  std::string base_factor;      ///< A
  std::string latent_factor;    ///< B_Z
  /// Attribute carried by a composite point, row-wise on an [n, dim(AB)] batch.
  std::function<Tensor(const Tensor&)> attribute;
};

struct TaskSpec {
  std::string name;
  Schema schema;
  /// Dimensions of schema objects and of every factor.
  EmbeddingSpec embedding;
  /// Factor layout per schema object.
  std::map<std::string, std::vector<Factor>> factors;
  /// Points per data factor.
  DatasetFunctor dataset;
  std::vector<LatentSpec> latents;
  std::optional<GroundTruthOracle> oracle;
  std::optional<ProductStructure> product;
  /// Fresh draws from the same distributions, for held-out evaluation.
  std::function<DatasetFunctor(std::uint64_t seed, std::size_t n)> resample;

  std::size_t object_dim(const std::string& object) const { return embedding.dim(object); }
  std::map<std::string, std::size_t> object_dims() const;
  /// True if at least one factor of `object` is backed by data.
  bool has_data(const std::string& object) const;
  /// True if every data factor of `object` has points.
  bool samplable(const std::string& object, const DatasetFunctor& data) const;
  /// [n, dim] batch for `object`: data factors from `data`, latent factors
  /// uniform, concatenated in factor order.
  Tensor sample(const std::string& object, std::size_t n, Rng& rng,
                const DatasetFunctor& data) const;
  Tensor sample(const std::string& object, std::size_t n, Rng& rng) const {
    return sample(object, n, rng, dataset);
  }
  /// Checks factors against the schema and embedding, and the dataset
  /// against the embedding. Throws std::invalid_argument.
  void validate() const;
};

/// Task over a parsed schema where every object is its own data factor.
TaskSpec make_task(std::string name, Schema schema, EmbeddingSpec embedding,
                   DatasetFunctor dataset);

extern const char* const kCycleGanSchemaText;
extern const char* const kProductSchemaText;

/// Two 2-D domains: A ~ N((0,0), 0.5^2 I); B = T(fresh A draws) with T a
/// 90 degree rotation followed by translation by (2, 0). Oracle (T, T^-1).
TaskSpec gen_cyclegan_toy(std::uint64_t seed, std::size_t n);

/// Product task A x B_Z ~= AB with A in R^2 (N(0, 0.5^2 I)), B_Z = [0,1]^2
/// and AB in R^4. Composition c(a, z) = (a, a + r(z)) with
/// r(z) = 0.5 (cos 2 pi z1, sin 2 pi z1)(0.5 + 0.5 z2); decomposition is its
/// analytic inverse. D_E(AB) is built from draws independent of D_E(A).
TaskSpec gen_product_toy(std::uint64_t seed, std::size_t n);

/// Attachment offset r(z) for one latent point.
std::pair<double, double> product_offset(double z1, double z2);

/// Builtin synthetic tasks: "cyclegan-toy" and "product-toy".
std::vector<std::string> builtin_task_names();
TaskSpec make_builtin_task(const std::string& name, std::uint64_t seed, std::size_t n);

}  // namespace functorium
