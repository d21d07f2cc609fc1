#include "functorium/losses.hpp"

#include <algorithm>
#include <set>
#include <stdexcept>

namespace functorium {

using ad::Tape;
using ad::Var;

std::vector<std::string> critic_objects(const TaskSpec& task) {
  std::set<std::string> targets;
  for (const auto& a : task.schema.graph().arrows()) {
    if (task.has_data(a.target) && task.samplable(a.target, task.dataset)) targets.insert(a.target);
  }
  std::vector<std::string> out;
  for (const auto& o : task.schema.graph().objects()) {
    if (targets.count(o)) out.push_back(o);
  }
  return out;
}

std::vector<std::string> adversarial_arrows(const TaskSpec& task) {
  std::vector<std::string> out;
  const auto objects = critic_objects(task);
  for (const auto& a : task.schema.graph().arrows()) {
    if (std::find(objects.begin(), objects.end(), a.target) != objects.end()) out.push_back(a.name);
  }
  return out;
}

// ---------------------------------------------------------------------------
// CriticSet

std::vector<std::string> CriticSet::objects() const {
  std::vector<std::string> out;
  for (const auto& [o, _] : networks) out.push_back(o);
  return out;
}

void CriticSet::validate(const std::map<std::string, std::size_t>& object_dims) const {
  for (const auto& [o, fn] : networks) {
    auto d = object_dims.find(o);
    if (d == object_dims.end()) throw std::invalid_argument("critic for unknown object '" + o + "'");
    if (fn.in_dim() != d->second || fn.out_dim() != 1) {
      throw std::invalid_argument("critic for '" + o + "' maps R^" + std::to_string(fn.in_dim()) +
                                  " -> R^" + std::to_string(fn.out_dim()) + ", expected R^" +
                                  std::to_string(d->second) + " -> R");
    }
    auto p = params.find(o);
    if (p == params.end() || p->second.rank() != 1 || p->second.size() != fn.param_dim()) {
      throw std::invalid_argument("critic for '" + o + "' needs " +
                                  std::to_string(fn.param_dim()) + " parameters");
    }
  }
  if (params.size() != networks.size()) {
    throw std::invalid_argument("critic parameters without a matching network");
  }
}

Tensor CriticSet::operator()(const std::string& object, const Tensor& batch) const {
  auto it = networks.find(object);
  if (it == networks.end()) throw std::invalid_argument("no critic for '" + object + "'");
  Tensor out = apply_partial(it->second, params.at(object))(batch);
  return out.reshaped(Shape{out.size()});
}

// ---------------------------------------------------------------------------
// Tape-level builders

namespace {

void require_rows(const Tensor& t, const char* what) {
  if (t.rank() != 2 || t.rows() == 0) {
    throw std::invalid_argument(std::string(what) + " batch must be a non-empty [n, dim] matrix");
  }
}

}  // namespace

Var adversarial_loss(Tape& tape, const ParamFn& critic, const Var& critic_params, const Var& real,
                     const Var& fake) {
  require_rows(real.value(), "real");
  require_rows(fake.value(), "fake");
  Var on_real = critic(tape, critic_params, real);
  Var on_fake = critic(tape, critic_params, fake);
  return ad::sub(ad::mean(on_real), ad::mean(on_fake));
}

Var gradient_penalty(Tape& tape, const ParamFn& critic, const Var& critic_params,
                     const Tensor& real, const Tensor& fake, double lambda, Rng& rng) {
  require_rows(real, "real");
  require_rows(fake, "fake");
  if (real.shape() != fake.shape()) {
    throw ShapeError("gradient penalty needs equal batches, got " + to_string(real.shape()) +
                     " and " + to_string(fake.shape()));
  }
  const std::size_t n = real.rows(), d = real.cols();
  Tensor mixed(real.shape());
  for (std::size_t r = 0; r < n; ++r) {
    const double e = rng.uniform();
    for (std::size_t c = 0; c < d; ++c) {
      mixed.at(r, c) = e * real.at(r, c) + (1.0 - e) * fake.at(r, c);
    }
  }
  Var x = tape.variable(std::move(mixed));
  Var score = ad::sum(critic(tape, critic_params, x));
  const Var wrt[] = {x};
  Var g = tape.grad(score, wrt, /*create_graph=*/true)[0];
  Var gap = ad::add_scalar(ad::row_l2_norm(g), -1.0);
  return ad::scale(ad::mean(ad::mul(gap, gap)), lambda);
}

Var path_equiv_loss(Tape& tape, const Architecture& arch,
                    const std::map<std::string, Var>& param_vars, const Relation& relation,
                    const Var& batch) {
  arch.schema().check_path(relation.lhs);
  arch.schema().check_path(relation.rhs);
  if (arch.schema().source(relation.lhs) != arch.schema().source(relation.rhs) ||
      arch.schema().target(relation.lhs) != arch.schema().target(relation.rhs)) {
    throw std::invalid_argument("relation " + relation_label(relation) + " is not parallel");
  }
  require_rows(batch.value(), "relation");
  Var l = eval_path(tape, arch, param_vars, relation.lhs, batch);
  Var r = eval_path(tape, arch, param_vars, relation.rhs, batch);
  return ad::scale(ad::l1_norm(ad::sub(l, r)), 1.0 / static_cast<double>(batch.value().rows()));
}

// ---------------------------------------------------------------------------
// Value-level wrappers

double adversarial_loss(const Model& model, const std::string& arrow, const ParamFn& critic,
                        const Tensor& critic_params, const Tensor& real, const Tensor& input) {
  require_rows(input, "input");
  Tape tape;
  Tape::NoGradGuard guard(tape);
  Var fake = tape.constant(model.eval_arrow(arrow, input));
  return adversarial_loss(tape, critic, tape.constant(critic_params), tape.constant(real), fake)
      .value()
      .item();
}

double gradient_penalty(const ParamFn& critic, const Tensor& critic_params, const Tensor& real,
                        const Tensor& fake, double lambda, Rng& rng) {
  Tape tape;
  return gradient_penalty(tape, critic, tape.constant(critic_params), real, fake, lambda, rng)
      .value()
      .item();
}

double path_equiv_loss(const Model& model, const Relation& relation, const Tensor& batch) {
  Tape tape;
  Tape::NoGradGuard guard(tape);
  std::map<std::string, Var> vars;
  for (const auto& [name, p] : model.params().entries()) vars.emplace(name, tape.constant(p));
  return path_equiv_loss(tape, model.architecture(), vars, relation, tape.constant(batch))
      .value()
      .item();
}

// ---------------------------------------------------------------------------
// Total loss

LossTerms total_loss(Tape& tape, const Architecture& arch,
                     const std::map<std::string, Var>& gen_params, const CriticSet& critics,
                     const std::map<std::string, Var>& critic_params,
                     const std::map<std::string, Var>& batches, double gamma) {
  auto batch = [&](const std::string& object) -> const Var& {
    auto it = batches.find(object);
    if (it == batches.end()) throw std::invalid_argument("no batch for object '" + object + "'");
    return it->second;
  };
  LossTerms terms;
  Var total;
  auto accumulate = [&](const Var& v) { total = total.valid() ? ad::add(total, v) : v; };

  for (const auto& a : arch.schema().graph().arrows()) {
    if (!critics.contains(a.target)) continue;
    Var fake = arch.generator(a.name)(tape, gen_params.at(a.name), batch(a.source));
    Var adv = adversarial_loss(tape, critics.networks.at(a.target), critic_params.at(a.target),
                               batch(a.target), fake);
    terms.arrows.push_back(a.name);
    terms.adversarial.push_back(adv);
    accumulate(adv);
  }
  for (const auto& rel : arch.schema().relations()) {
    Var pe = path_equiv_loss(tape, arch, gen_params, rel, batch(arch.schema().source(rel.lhs)));
    terms.relations.push_back(relation_label(rel));
    terms.path_equivalence.push_back(pe);
    accumulate(ad::scale(pe, gamma));
  }
  terms.total = total.valid() ? total : tape.constant(Tensor::scalar(0.0));
  return terms;
}

LossReport total_loss(const Model& model, const CriticSet& critics,
                      const std::map<std::string, Tensor>& batches, double gamma, double lambda,
                      Rng& rng) {
  critics.validate(model.architecture().object_dims());
  Tape tape;
  std::map<std::string, Var> gen_vars, critic_vars, batch_vars;
  {
    Tape::NoGradGuard guard(tape);
    for (const auto& [name, p] : model.params().entries()) gen_vars.emplace(name, tape.constant(p));
    for (const auto& [o, p] : critics.params) critic_vars.emplace(o, tape.constant(p));
    for (const auto& [o, b] : batches) batch_vars.emplace(o, tape.constant(b));
  }
  LossReport report;
  {
    Tape::NoGradGuard guard(tape);
    LossTerms terms =
        total_loss(tape, model.architecture(), gen_vars, critics, critic_vars, batch_vars, gamma);
    report.adversarial_labels = terms.arrows;
    for (const auto& v : terms.adversarial) report.adversarial.push_back(v.value().item());
    report.relation_labels = terms.relations;
    for (const auto& v : terms.path_equivalence) report.path_equivalence.push_back(v.value().item());
    report.total = terms.total.value().item();
  }
  const auto& graph = model.schema().graph();
  for (const auto& name : report.adversarial_labels) {
    const Arrow& a = graph.arrow(name);
    const Tensor fake = model.eval_arrow(name, batches.at(a.source));
    report.penalty.push_back(gradient_penalty(critics.networks.at(a.target),
                                              critics.params.at(a.target), batches.at(a.target),
                                              fake, lambda, rng));
  }
  return report;
}

}  // namespace functorium
