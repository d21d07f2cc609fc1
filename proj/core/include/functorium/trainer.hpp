#pragma once

// Alternating WGAN-GP training of generators and critics with the
// path-equivalence regularizer.
//
// One time step is n_critic critic updates followed by one generator
// update. The generator descends the total loss; each critic descends the
// negated adversarial loss plus its gradient penalty.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "functorium/functor_model.hpp"
#include "functorium/losses.hpp"
#include "functorium/para.hpp"
#include "functorium/rng.hpp"
#include "functorium/task.hpp"

namespace functorium {

struct AdamConfig {
  double alpha = 1e-4;
  double beta1 = 0.5;
  double beta2 = 0.9;
  double epsilon = 1e-8;

  void validate() const;
};

/// n_critic is `warmup_value` for the first `warmup_steps` time steps and
/// `steady_value` afterwards.
struct CriticSchedule {
  std::size_t warmup_steps = 50;
  std::size_t warmup_value = 50;
  std::size_t steady_value = 5;

  std::size_t at(std::size_t step) const {
    return step < warmup_steps ? warmup_value : steady_value;
  }
};

struct TrainConfig {
  double gamma = kDefaultGamma;
  double lambda_gp = kDefaultPenaltyWeight;
  AdamConfig adam;
  std::size_t batch_size = 64;
  std::size_t steps = 20000;
  CriticSchedule n_critic;
  double init_std = 0.01;
  std::uint64_t seed = 0;

  /// Throws std::invalid_argument.
  void validate() const;
};

struct AdamState {
  Tensor m;
  Tensor v;
  std::size_t t = 0;

  static AdamState zeros(std::size_t n);
};

/// One bias-corrected Adam update. Throws NumericError naming `owner` if a
/// gradient entry is not finite, ShapeError on length mismatch.
std::pair<Tensor, AdamState> adam_step(const AdamState& state, const Tensor& params,
                                       const Tensor& grads, const AdamConfig& config,
                                       const std::string& owner = "parameters");

/// i.i.d. N(0, std^2) entries. Throws std::invalid_argument unless std > 0.
Tensor init_vector(std::size_t n, double std, Rng& rng);
ParameterAssignment init_params(const Architecture& arch, double std, Rng& rng);

// ---------------------------------------------------------------------------
// Default networks

// With init std 0.01, tanh generators settle into a collapsed map that
// ignores one input direction; one relu layer escapes it. Relu critics
// give sharper gradients and shorten that escape.
struct NetworkOptions {
  std::vector<std::size_t> generator_hidden{32};
  Activation generator_activation = Activation::kRelu;
  std::vector<std::size_t> critic_hidden{32, 32};
  Activation critic_activation = Activation::kRelu;
};

/// An MLP for every generator, sized from the task embedding.
std::shared_ptr<const Architecture> default_architecture(const TaskSpec& task,
                                                         const NetworkOptions& options = {});
/// An MLP R^dim -> R for every critic object of the task.
std::map<std::string, ParamFn> default_critics(const TaskSpec& task,
                                               const NetworkOptions& options = {});

// ---------------------------------------------------------------------------
// Log

struct TrainRecord {
  std::size_t step = 0;
  std::size_t critic_updates = 0;
  std::vector<double> adversarial;       ///< per adversarial generator
  std::vector<double> path_equivalence;  ///< per relation
  std::vector<double> penalty;           ///< per adversarial generator, last critic update
  double critic_loss = 0.0;              ///< last critic update
  double total = 0.0;
  double wall_seconds = 0.0;             ///< since the start of training
};

struct TrainLog {
  std::vector<std::string> adversarial_labels;
  std::vector<std::string> relation_labels;
  std::vector<TrainRecord> records;

  std::string csv_header() const;
  /// One row per step. Wall time is left out so reruns compare byte for byte.
  std::string to_csv() const;
};

// ---------------------------------------------------------------------------
// Steps

struct OptimizerState {
  std::map<std::string, AdamState> generators;
  std::map<std::string, AdamState> critics;
};

struct CriticStepReport {
  double loss = 0.0;
  std::vector<double> adversarial;
  std::vector<double> penalty;
};

/// One Adam update of every critic on fresh batches.
CriticStepReport critic_step(const TaskSpec& task, const Model& model, CriticSet& critics,
                             OptimizerState& opt, const TrainConfig& config, Rng& rng);

/// One Adam update of every generator on fresh batches; `model` is replaced
/// by the updated model. Returns the loss before the update.
LossReport generator_step(const TaskSpec& task, Model& model, const CriticSet& critics,
                          OptimizerState& opt, const TrainConfig& config, Rng& rng);

class Trainer {
 public:
  /// Initializes generator and critic parameters from config.seed.
  /// Throws std::invalid_argument if the architecture disagrees with the
  /// task embedding or an object that training samples from has no points.
  Trainer(const TaskSpec& task, std::shared_ptr<const Architecture> arch,
          std::map<std::string, ParamFn> critic_networks, TrainConfig config);

  /// One time step.
  const TrainRecord& step();
  void run(std::size_t steps, const std::function<void(const Trainer&)>& after_step = {});

  std::size_t steps_done() const noexcept { return steps_done_; }
  const Model& model() const noexcept { return model_; }
  const CriticSet& critics() const noexcept { return critics_; }
  const TrainLog& log() const noexcept { return log_; }
  const TrainConfig& config() const noexcept { return config_; }

 private:
  const TaskSpec& task_;
  TrainConfig config_;
  Model model_;
  CriticSet critics_;
  OptimizerState opt_;
  Rng rng_;
  TrainLog log_;
  std::size_t steps_done_ = 0;
  double elapsed_ = 0.0;
};

struct TrainResult {
  Model model;
  CriticSet critics;
  TrainLog log;
};

/// Runs config.steps time steps. Deterministic given the task and config.
TrainResult train(const TaskSpec& task, std::shared_ptr<const Architecture> arch,
                  std::map<std::string, ParamFn> critic_networks, const TrainConfig& config);

}  // namespace functorium
