#include "functorium/trainer.hpp"

#include <chrono>
#include <cmath>
#include <set>
#include <stdexcept>

#include "functorium/io.hpp"

namespace functorium {

using ad::Tape;
using ad::Var;

void AdamConfig::validate() const {
  if (!(alpha > 0.0)) throw std::invalid_argument("adam step size must be positive");
  if (!(beta1 > 0.0 && beta1 < 1.0)) throw std::invalid_argument("adam beta1 must lie in (0,1)");
  if (!(beta2 > 0.0 && beta2 < 1.0)) throw std::invalid_argument("adam beta2 must lie in (0,1)");
  if (!(epsilon > 0.0)) throw std::invalid_argument("adam epsilon must be positive");
}

void TrainConfig::validate() const {
  adam.validate();
  if (!(gamma >= 0.0) || !std::isfinite(gamma)) throw std::invalid_argument("gamma must be >= 0");
  if (!(lambda_gp >= 0.0) || !std::isfinite(lambda_gp)) {
    throw std::invalid_argument("penalty weight must be >= 0");
  }
  if (batch_size == 0) throw std::invalid_argument("batch size must be positive");
  if (!(init_std > 0.0) || !std::isfinite(init_std)) {
    throw std::invalid_argument("init std must be positive");
  }
  if (n_critic.warmup_value == 0 && n_critic.warmup_steps > 0) {
    throw std::invalid_argument("n_critic warmup value must be positive");
  }
  if (n_critic.steady_value == 0) throw std::invalid_argument("n_critic must be positive");
}

AdamState AdamState::zeros(std::size_t n) { return {Tensor(Shape{n}), Tensor(Shape{n}), 0}; }

std::pair<Tensor, AdamState> adam_step(const AdamState& state, const Tensor& params,
                                       const Tensor& grads, const AdamConfig& config,
                                       const std::string& owner) {
  const std::size_t n = params.size();
  if (grads.size() != n || state.m.size() != n || state.v.size() != n) {
    throw ShapeError("adam update for " + owner + ": " + std::to_string(n) + " parameters, " +
                     std::to_string(grads.size()) + " gradients, moments of length " +
                     std::to_string(state.m.size()));
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isfinite(grads[i])) {
      throw NumericError("non-finite gradient for " + owner + " at index " + std::to_string(i));
    }
  }
  AdamState next = state;
  next.t += 1;
  const double c1 = 1.0 - std::pow(config.beta1, static_cast<double>(next.t));
  const double c2 = 1.0 - std::pow(config.beta2, static_cast<double>(next.t));
  Tensor out = params;
  for (std::size_t i = 0; i < n; ++i) {
    const double g = grads[i];
    next.m[i] = config.beta1 * state.m[i] + (1.0 - config.beta1) * g;
    next.v[i] = config.beta2 * state.v[i] + (1.0 - config.beta2) * g * g;
    const double mhat = next.m[i] / c1;
    const double vhat = next.v[i] / c2;
    out[i] -= config.alpha * mhat / (std::sqrt(vhat) + config.epsilon);
  }
  return {std::move(out), std::move(next)};
}

Tensor init_vector(std::size_t n, double std, Rng& rng) {
  if (!(std > 0.0) || !std::isfinite(std)) {
    throw std::invalid_argument("initialization std must be positive");
  }
  Tensor out(Shape{n});
  for (auto& v : out.data()) v = rng.normal(0.0, std);
  return out;
}

ParameterAssignment init_params(const Architecture& arch, double std, Rng& rng) {
  std::map<std::string, Tensor> p;
  for (const auto& name : arch.generator_names()) {
    p.emplace(name, init_vector(arch.generator(name).param_dim(), std, rng));
  }
  return ParameterAssignment(std::move(p));
}

// ---------------------------------------------------------------------------
// Default networks

namespace {

MLPSpec widths_spec(std::size_t in, const std::vector<std::size_t>& hidden, std::size_t out,
                    Activation act) {
  std::vector<std::size_t> widths{in};
  widths.insert(widths.end(), hidden.begin(), hidden.end());
  widths.push_back(out);
  return MLPSpec::uniform(std::move(widths), act);
}

}  // namespace

std::shared_ptr<const Architecture> default_architecture(const TaskSpec& task,
                                                         const NetworkOptions& options) {
  std::map<std::string, ParamFn> gens;
  for (const auto& a : task.schema.graph().arrows()) {
    gens.emplace(a.name, mlp(widths_spec(task.object_dim(a.source), options.generator_hidden,
                                         task.object_dim(a.target),
                                         options.generator_activation)));
  }
  return std::make_shared<const Architecture>(task.schema, task.object_dims(), std::move(gens));
}

std::map<std::string, ParamFn> default_critics(const TaskSpec& task,
                                               const NetworkOptions& options) {
  std::map<std::string, ParamFn> out;
  for (const auto& o : critic_objects(task)) {
    out.emplace(o, mlp(widths_spec(task.object_dim(o), options.critic_hidden, 1,
                                   options.critic_activation)));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Log

std::string TrainLog::csv_header() const {
  std::string h = "step,n_critic";
  for (const auto& a : adversarial_labels) h += ",adv:" + a;
  for (const auto& r : relation_labels) h += ",pe:" + r;
  for (const auto& a : adversarial_labels) h += ",gp:" + a;
  h += ",critic_loss,total";
  return h;
}

std::string TrainLog::to_csv() const {
  std::string out = csv_header() + "\n";
  for (const auto& r : records) {
    out += std::to_string(r.step) + "," + std::to_string(r.critic_updates);
    for (double v : r.adversarial) out += "," + format_double(v);
    for (double v : r.path_equivalence) out += "," + format_double(v);
    for (double v : r.penalty) out += "," + format_double(v);
    out += "," + format_double(r.critic_loss) + "," + format_double(r.total) + "\n";
  }
  return out;
}

// ---------------------------------------------------------------------------
// Steps

namespace {

void check_finite(double v, const std::string& what) {
  if (!std::isfinite(v)) throw NumericError("non-finite " + what);
}

}  // namespace

CriticStepReport critic_step(const TaskSpec& task, const Model& model, CriticSet& critics,
                             OptimizerState& opt, const TrainConfig& config, Rng& rng) {
  const auto& graph = model.schema().graph();
  const std::size_t n = config.batch_size;
  Tape tape;
  std::map<std::string, Var> params;
  for (const auto& [o, p] : critics.params) params.emplace(o, tape.variable(p));

  CriticStepReport report;
  Var objective;
  auto accumulate = [&](const Var& v) { objective = objective.valid() ? ad::add(objective, v) : v; };
  for (const auto& a : graph.arrows()) {
    if (!critics.contains(a.target)) continue;
    const Tensor real = task.sample(a.target, n, rng);
    const Tensor fake = model.eval_arrow(a.name, task.sample(a.source, n, rng));
    const ParamFn& critic = critics.networks.at(a.target);
    Var adv = adversarial_loss(tape, critic, params.at(a.target), tape.constant(real),
                               tape.constant(fake));
    Var pen = gradient_penalty(tape, critic, params.at(a.target), real, fake, config.lambda_gp, rng);
    report.adversarial.push_back(adv.value().item());
    report.penalty.push_back(pen.value().item());
    accumulate(ad::sub(pen, adv));
  }
  if (!objective.valid()) return report;
  report.loss = objective.value().item();
  check_finite(report.loss, "critic loss");

  std::vector<std::string> names;
  std::vector<Var> wrt;
  for (const auto& [o, v] : params) {
    names.push_back(o);
    wrt.push_back(v);
  }
  const auto grads = tape.gradients(objective, wrt);
  for (std::size_t i = 0; i < names.size(); ++i) {
    const std::string& o = names[i];
    Tensor& p = critics.params.at(o);
    if (p.size() == 0) continue;
    auto it = opt.critics.try_emplace(o, AdamState::zeros(p.size())).first;
    auto [next, state] = adam_step(it->second, p, grads[i], config.adam, "critic on '" + o + "'");
    p = std::move(next);
    it->second = std::move(state);
  }
  return report;
}

LossReport generator_step(const TaskSpec& task, Model& model, const CriticSet& critics,
                          OptimizerState& opt, const TrainConfig& config, Rng& rng) {
  const auto& arch = model.architecture();
  const auto& schema = model.schema();
  std::set<std::string> needed;
  for (const auto& a : schema.graph().arrows()) {
    if (!critics.contains(a.target)) continue;
    needed.insert(a.source);
    needed.insert(a.target);
  }
  for (const auto& rel : schema.relations()) needed.insert(schema.source(rel.lhs));

  Tape tape;
  std::map<std::string, Var> gen_vars, critic_vars, batches;
  for (const auto& [name, p] : model.params().entries()) gen_vars.emplace(name, tape.variable(p));
  for (const auto& [o, p] : critics.params) critic_vars.emplace(o, tape.constant(p));
  for (const auto& o : needed) {
    batches.emplace(o, tape.constant(task.sample(o, config.batch_size, rng)));
  }
  LossTerms terms =
      total_loss(tape, arch, gen_vars, critics, critic_vars, batches, config.gamma);

  LossReport report;
  report.adversarial_labels = terms.arrows;
  for (const auto& v : terms.adversarial) report.adversarial.push_back(v.value().item());
  report.relation_labels = terms.relations;
  for (const auto& v : terms.path_equivalence) report.path_equivalence.push_back(v.value().item());
  report.total = terms.total.value().item();
  check_finite(report.total, "generator loss");

  std::vector<std::string> names = arch.generator_names();
  std::vector<Var> wrt;
  for (const auto& name : names) wrt.push_back(gen_vars.at(name));
  const auto grads = tape.gradients(terms.total, wrt);
  std::map<std::string, Tensor> updated;
  for (std::size_t i = 0; i < names.size(); ++i) {
    const Tensor& p = model.params().at(names[i]);
    if (p.size() == 0) {
      updated.emplace(names[i], p);
      continue;
    }
    auto it = opt.generators.try_emplace(names[i], AdamState::zeros(p.size())).first;
    auto [next, state] =
        adam_step(it->second, p, grads[i], config.adam, "generator '" + names[i] + "'");
    updated.emplace(names[i], std::move(next));
    it->second = std::move(state);
  }
  model = model.with_params(ParameterAssignment(std::move(updated)));
  return report;
}

// ---------------------------------------------------------------------------
// Trainer

namespace {

Model initial_model(const TaskSpec& task, std::shared_ptr<const Architecture> arch,
                    const TrainConfig& config) {
  config.validate();
  if (!arch) throw std::invalid_argument("trainer needs an architecture");
  if (arch->schema().name() != task.schema.name()) {
    throw std::invalid_argument("architecture is for schema '" + arch->schema().name() +
                                "' but the task uses '" + task.schema.name() + "'");
  }
  for (const auto& o : task.schema.graph().objects()) {
    if (arch->object_dim(o) != task.object_dim(o)) {
      throw std::invalid_argument("architecture embeds '" + o + "' in R^" +
                                  std::to_string(arch->object_dim(o)) + " but the task uses R^" +
                                  std::to_string(task.object_dim(o)));
    }
  }
  Rng rng = Rng(config.seed).split(1);
  return Model(arch, init_params(*arch, config.init_std, rng));
}

CriticSet initial_critics(const TaskSpec& task, std::map<std::string, ParamFn> networks,
                          const TrainConfig& config) {
  Rng rng = Rng(config.seed).split(2);
  CriticSet critics;
  critics.networks = std::move(networks);
  for (const auto& [o, fn] : critics.networks) {
    if (!task.samplable(o, task.dataset)) {
      throw std::invalid_argument("critic on '" + o + "' but the object has no data");
    }
    critics.params.emplace(o, init_vector(fn.param_dim(), config.init_std, rng));
  }
  critics.validate(task.object_dims());
  return critics;
}

}  // namespace

Trainer::Trainer(const TaskSpec& task, std::shared_ptr<const Architecture> arch,
                 std::map<std::string, ParamFn> critic_networks, TrainConfig config)
    : task_(task),
      config_(config),
      model_(initial_model(task, std::move(arch), config)),
      critics_(initial_critics(task, std::move(critic_networks), config)),
      rng_(Rng(config.seed).split(3)) {
  const auto& schema = task.schema;
  auto require = [&](const std::string& o, const std::string& why) {
    if (!task.samplable(o, task.dataset)) {
      throw std::invalid_argument("object '" + o + "' has no data but " + why);
    }
  };
  for (const auto& a : schema.graph().arrows()) {
    if (critics_.contains(a.target)) require(a.source, "generator '" + a.name + "' reads from it");
  }
  for (const auto& rel : schema.relations()) {
    require(schema.source(rel.lhs), "relation " + relation_label(rel) + " is evaluated on it");
  }
  for (const auto& a : schema.graph().arrows()) {
    if (critics_.contains(a.target)) log_.adversarial_labels.push_back(a.name);
  }
  for (const auto& rel : schema.relations()) log_.relation_labels.push_back(relation_label(rel));
}

const TrainRecord& Trainer::step() {
  const auto start = std::chrono::steady_clock::now();
  TrainRecord record;
  record.step = steps_done_;
  record.critic_updates = config_.n_critic.at(steps_done_);
  CriticStepReport last;
  for (std::size_t k = 0; k < record.critic_updates; ++k) {
    last = critic_step(task_, model_, critics_, opt_, config_, rng_);
  }
  LossReport report = generator_step(task_, model_, critics_, opt_, config_, rng_);
  record.adversarial = std::move(report.adversarial);
  record.path_equivalence = std::move(report.path_equivalence);
  record.penalty = last.penalty.empty() ? std::vector<double>(record.adversarial.size(), 0.0)
                                        : std::move(last.penalty);
  record.critic_loss = last.loss;
  record.total = report.total;
  elapsed_ += std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  record.wall_seconds = elapsed_;
  ++steps_done_;
  log_.records.push_back(std::move(record));
  return log_.records.back();
}

void Trainer::run(std::size_t steps, const std::function<void(const Trainer&)>& after_step) {
  for (std::size_t i = 0; i < steps; ++i) {
    step();
    if (after_step) after_step(*this);
  }
}

TrainResult train(const TaskSpec& task, std::shared_ptr<const Architecture> arch,
                  std::map<std::string, ParamFn> critic_networks, const TrainConfig& config) {
  Trainer trainer(task, std::move(arch), std::move(critic_networks), config);
  trainer.run(config.steps);
  return {trainer.model(), trainer.critics(), trainer.log()};
}

}  // namespace functorium
