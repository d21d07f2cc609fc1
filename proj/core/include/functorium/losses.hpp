#pragma once

// Wasserstein adversarial loss with gradient penalty, path-equivalence loss
// and their weighted total.
//
// Every loss comes in two flavours: a tape-level builder used by the
// trainer, and a value-level convenience wrapper.

#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include "functorium/autodiff.hpp"
#include "functorium/functor_model.hpp"
#include "functorium/para.hpp"
#include "functorium/rng.hpp"
#include "functorium/task.hpp"

namespace functorium {

inline constexpr double kDefaultGamma = 20.0;
inline constexpr double kDefaultPenaltyWeight = 10.0;

/// Objects that receive a critic: targets of some generator that carry at
/// least one data factor with points.
std::vector<std::string> critic_objects(const TaskSpec& task);

/// Generators whose target has a critic, in declaration order.
std::vector<std::string> adversarial_arrows(const TaskSpec& task);

/// One scalar-valued critic per object.
struct CriticSet {
  std::map<std::string, ParamFn> networks;
  std::map<std::string, Tensor> params;

  bool contains(const std::string& object) const { return networks.count(object) != 0; }
  std::vector<std::string> objects() const;
  /// Throws std::invalid_argument unless every network is R^dim -> R with a
  /// matching parameter vector.
  void validate(const std::map<std::string, std::size_t>& object_dims) const;
  /// Critic value on a batch [n, dim] -> [n].
  Tensor operator()(const std::string& object, const Tensor& batch) const;
};

// ---------------------------------------------------------------------------
// Tape-level builders

/// mean D(real) - mean D(fake).
ad::Var adversarial_loss(ad::Tape& tape, const ParamFn& critic, const ad::Var& critic_params,
                         const ad::Var& real, const ad::Var& fake);

/// lambda * mean_i (|grad D(x_i)|_2 - 1)^2 at x_i = e_i real_i + (1 - e_i) fake_i,
/// one e_i ~ U[0,1] per row. Differentiable w.r.t. the critic parameters.
ad::Var gradient_penalty(ad::Tape& tape, const ParamFn& critic, const ad::Var& critic_params,
                         const Tensor& real, const Tensor& fake, double lambda, Rng& rng);

/// Mean over rows of |lhs(a) - rhs(a)|_1.
ad::Var path_equiv_loss(ad::Tape& tape, const Architecture& arch,
                        const std::map<std::string, ad::Var>& param_vars,
                        const Relation& relation, const ad::Var& batch);

// ---------------------------------------------------------------------------
// Value-level wrappers

double adversarial_loss(const Model& model, const std::string& arrow, const ParamFn& critic,
                        const Tensor& critic_params, const Tensor& real, const Tensor& input);
double gradient_penalty(const ParamFn& critic, const Tensor& critic_params, const Tensor& real,
                        const Tensor& fake, double lambda, Rng& rng);
double path_equiv_loss(const Model& model, const Relation& relation, const Tensor& batch);

struct LossReport {
  std::vector<std::string> adversarial_labels;  ///< generator names
  std::vector<double> adversarial;
  std::vector<std::string> relation_labels;
  std::vector<double> path_equivalence;
  /// Penalty of the critic facing each adversarial generator; enters only
  /// the critic objective, so it is not part of `total`.
  std::vector<double> penalty;
  double total = 0.0;
};

/// Loss terms recorded on a tape.
struct LossTerms {
  std::vector<std::string> arrows;
  std::vector<ad::Var> adversarial;
  std::vector<std::string> relations;
  std::vector<ad::Var> path_equivalence;
  ad::Var total;  ///< sum adversarial + gamma * sum path equivalence
};

/// `batches` maps every object to a tape batch [n, dim]; generator inputs
/// come from the source batch and real samples from the target batch.
LossTerms total_loss(ad::Tape& tape, const Architecture& arch,
                     const std::map<std::string, ad::Var>& gen_params,
                     const CriticSet& critics,
                     const std::map<std::string, ad::Var>& critic_params,
                     const std::map<std::string, ad::Var>& batches, double gamma);

/// Value-level total. Penalties are computed with weight `lambda` and fake
/// samples from each adversarial generator.
LossReport total_loss(const Model& model, const CriticSet& critics,
                      const std::map<std::string, Tensor>& batches, double gamma,
                      double lambda, Rng& rng);

}  // namespace functorium
