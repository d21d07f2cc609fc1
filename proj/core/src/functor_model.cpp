#include "functorium/functor_model.hpp"

#include <cmath>
#include <cstring>
#include <deque>
#include <set>
#include <stdexcept>

namespace functorium {

using ad::Tape;
using ad::Var;

// ---------------------------------------------------------------------------
// Architecture

Architecture::Architecture(Schema schema, std::map<std::string, std::size_t> object_dims,
                           std::map<std::string, ParamFn> generators)
    : schema_(std::move(schema)),
      object_dims_(std::move(object_dims)),
      generators_(std::move(generators)) {
  const auto& graph = schema_.graph();
  for (const auto& o : graph.objects()) {
    auto it = object_dims_.find(o);
    if (it == object_dims_.end()) throw std::invalid_argument("no dimension for object '" + o + "'");
    if (it->second == 0) throw std::invalid_argument("object '" + o + "' has dimension 0");
  }
  for (const auto& [name, _] : object_dims_) {
    if (!graph.has_object(name)) throw std::invalid_argument("dimension for unknown object '" + name + "'");
  }
  for (const auto& a : graph.arrows()) {
    auto it = generators_.find(a.name);
    if (it == generators_.end()) throw std::invalid_argument("no map for generator '" + a.name + "'");
    const ParamFn& fn = it->second;
    if (fn.in_dim() != object_dims_.at(a.source) || fn.out_dim() != object_dims_.at(a.target)) {
      throw std::invalid_argument("generator '" + a.name + "' maps R^" +
                                  std::to_string(fn.in_dim()) + " -> R^" +
                                  std::to_string(fn.out_dim()) + " but " + a.source + " -> " +
                                  a.target + " needs R^" +
                                  std::to_string(object_dims_.at(a.source)) + " -> R^" +
                                  std::to_string(object_dims_.at(a.target)));
    }
  }
  for (const auto& [name, _] : generators_) {
    if (!graph.find_arrow(name)) throw std::invalid_argument("map for unknown arrow '" + name + "'");
  }
}

std::size_t Architecture::object_dim(const std::string& object) const {
  auto it = object_dims_.find(object);
  if (it == object_dims_.end()) throw std::invalid_argument("unknown object '" + object + "'");
  return it->second;
}

const ParamFn& Architecture::generator(const std::string& arrow) const {
  auto it = generators_.find(arrow);
  if (it == generators_.end()) throw std::invalid_argument("unknown arrow '" + arrow + "'");
  return it->second;
}

std::vector<std::string> Architecture::generator_names() const {
  std::vector<std::string> out;
  for (const auto& a : schema_.graph().arrows()) out.push_back(a.name);
  return out;
}

std::size_t total_param_dim(const Architecture& arch) {
  std::size_t total = 0;
  for (const auto& name : arch.generator_names()) total += arch.generator(name).param_dim();
  return total;
}

// ---------------------------------------------------------------------------
// ParameterAssignment

ParameterAssignment ParameterAssignment::zeros(const Architecture& arch) {
  std::map<std::string, Tensor> p;
  for (const auto& name : arch.generator_names()) {
    p.emplace(name, Tensor(Shape{arch.generator(name).param_dim()}));
  }
  return ParameterAssignment(std::move(p));
}

ParameterAssignment ParameterAssignment::unflatten(const Architecture& arch, const Tensor& flat) {
  if (flat.rank() != 1 || flat.size() != total_param_dim(arch)) {
    throw ShapeError("flat parameter vector of shape " + to_string(flat.shape()) +
                     " for an architecture with " + std::to_string(total_param_dim(arch)) +
                     " parameters");
  }
  std::map<std::string, Tensor> p;
  std::size_t offset = 0;
  for (const auto& name : arch.generator_names()) {
    const std::size_t n = arch.generator(name).param_dim();
    std::vector<double> v(flat.data().begin() + static_cast<std::ptrdiff_t>(offset),
                          flat.data().begin() + static_cast<std::ptrdiff_t>(offset + n));
    p.emplace(name, Tensor::vector(std::move(v)));
    offset += n;
  }
  return ParameterAssignment(std::move(p));
}

Tensor ParameterAssignment::flatten(const Architecture& arch) const {
  std::vector<double> out;
  for (const auto& name : arch.generator_names()) {
    const auto& t = at(name);
    out.insert(out.end(), t.data().begin(), t.data().end());
  }
  return Tensor::vector(std::move(out));
}

const Tensor& ParameterAssignment::at(const std::string& arrow) const {
  auto it = params_.find(arrow);
  if (it == params_.end()) throw std::invalid_argument("no parameters for '" + arrow + "'");
  return it->second;
}

std::size_t ParameterAssignment::total_dim() const {
  std::size_t n = 0;
  for (const auto& [_, t] : params_) n += t.size();
  return n;
}

void ParameterAssignment::check_against(const Architecture& arch) const {
  for (const auto& name : arch.generator_names()) {
    auto it = params_.find(name);
    if (it == params_.end()) throw std::invalid_argument("missing parameters for generator '" + name + "'");
    const std::size_t want = arch.generator(name).param_dim();
    if (it->second.rank() != 1 || it->second.size() != want) {
      throw std::invalid_argument("generator '" + name + "' needs " + std::to_string(want) +
                                  " parameters, got shape " + to_string(it->second.shape()));
    }
  }
  if (params_.size() != arch.generator_names().size()) {
    for (const auto& [name, _] : params_) {
      if (!arch.schema().graph().find_arrow(name)) {
        throw std::invalid_argument("parameters for unknown generator '" + name + "'");
      }
    }
  }
}

// ---------------------------------------------------------------------------
// Model

Model::Model(std::shared_ptr<const Architecture> arch, ParameterAssignment params)
    : arch_(std::move(arch)), params_(std::move(params)) {
  if (!arch_) throw std::invalid_argument("model without an architecture");
  params_.check_against(*arch_);
}

EucMap Model::generator_map(const std::string& arrow) const {
  return apply_partial(arch_->generator(arrow), params_.at(arrow));
}

Tensor Model::eval_arrow(const std::string& arrow, const Tensor& x) const {
  return generator_map(arrow)(x);
}

Tensor Model::eval_path(const Path& path, const Tensor& x) const {
  schema().check_path(path);
  const std::size_t d = arch_->object_dim(schema().source(path));
  if (x.rank() == 0 || x.rank() > 2 || x.cols() != d) {
    throw ShapeError("input of shape " + to_string(x.shape()) + " for path " + path.to_string() +
                     " starting in R^" + std::to_string(d));
  }
  Tensor cur = x;
  for (const auto& arrow : path.arrows()) cur = eval_arrow(arrow, cur);
  return cur;
}

Model pspec(std::shared_ptr<const Architecture> arch, ParameterAssignment params) {
  return Model(std::move(arch), std::move(params));
}

Model pspec(const Architecture& arch, ParameterAssignment params) {
  return Model(std::make_shared<const Architecture>(arch), std::move(params));
}

Tensor eval_path(const Model& model, const Path& path, const Tensor& x) {
  return model.eval_path(path, x);
}

Var eval_path(Tape& tape, const Architecture& arch, const std::map<std::string, Var>& param_vars,
              const Path& path, const Var& x) {
  Var cur = x;
  for (const auto& arrow : path.arrows()) {
    auto it = param_vars.find(arrow);
    if (it == param_vars.end()) throw std::invalid_argument("no parameter node for '" + arrow + "'");
    cur = arch.generator(arrow)(tape, it->second, cur);
  }
  return cur;
}

// ---------------------------------------------------------------------------
// Residuals

std::string relation_label(const Relation& r) {
  return r.lhs.to_string() + "=" + r.rhs.to_string();
}

std::vector<double> functoriality_residual(const Model& model,
                                           const std::map<std::string, Tensor>& samples) {
  std::vector<double> out;
  for (const auto& rel : model.schema().relations()) {
    const auto& src = model.schema().source(rel.lhs);
    auto it = samples.find(src);
    if (it == samples.end() || it->second.size() == 0) {
      throw std::invalid_argument("no samples for object '" + src + "' (relation " +
                                  relation_label(rel) + ")");
    }
    const Tensor& batch = it->second;
    const Tensor l = model.eval_path(rel.lhs, batch);
    const Tensor r = model.eval_path(rel.rhs, batch);
    double total = 0.0;
    for (std::size_t row = 0; row < l.rows(); ++row) {
      double dist = 0.0;
      auto lr = l.row(row);
      auto rr = r.row(row);
      for (std::size_t c = 0; c < lr.size(); ++c) dist += std::abs(lr[c] - rr[c]);
      total += dist;
    }
    out.push_back(total / static_cast<double>(l.rows()));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Restriction to the dataset

namespace {

// Orders tensors by their bit patterns so that "equal" means bitwise equal.
struct BitwiseLess {
  bool operator()(const Tensor& a, const Tensor& b) const {
    if (a.size() != b.size()) return a.size() < b.size();
    return std::memcmp(a.data().data(), b.data().data(), a.size() * sizeof(double)) < 0;
  }
};

using PointSet = std::set<Tensor, BitwiseLess>;

}  // namespace

PointFamily restrict_to_dataset(const Model& model, const DatasetFunctor& dataset,
                                std::size_t max_len) {
  const auto& arch = model.architecture();
  const auto& graph = model.schema().graph();
  PointFamily family;
  std::map<std::string, PointSet> seen;
  struct Item {
    std::string object;
    Tensor point;
    std::size_t depth;
  };
  std::deque<Item> work;

  auto add = [&](const std::string& object, Tensor p, std::size_t depth) {
    if (seen[object].insert(p).second) {
      family[object].push_back(p);
      work.push_back({object, std::move(p), depth});
    }
  };

  for (const auto& object : graph.objects()) {
    family[object];
    if (!dataset.embedding().contains(object)) continue;
    const Tensor& pts = dataset.points(object);
    if (pts.rows() == 0 || pts.size() == 0) continue;
    if (pts.cols() != arch.object_dim(object)) {
      throw ShapeError("dataset for '" + object + "' has dimension " + std::to_string(pts.cols()) +
                       " but the model embeds it in R^" + std::to_string(arch.object_dim(object)));
    }
    for (std::size_t r = 0; r < pts.rows(); ++r) add(object, pts.row_tensor(r), 0);
  }

  while (!work.empty()) {
    Item item = std::move(work.front());
    work.pop_front();
    if (item.depth >= max_len) continue;
    for (const Arrow* a : graph.arrows_from(item.object)) {
      add(a->target, model.eval_arrow(a->name, item.point), item.depth + 1);
    }
  }
  return family;
}

PointFamily closure_step(const Model& model, const PointFamily& family) {
  PointFamily out = family;
  std::map<std::string, PointSet> seen;
  for (const auto& [object, pts] : family) seen[object].insert(pts.begin(), pts.end());
  for (const auto& a : model.schema().graph().arrows()) {
    auto it = family.find(a.source);
    if (it == family.end()) continue;
    for (const auto& p : it->second) {
      Tensor image = model.eval_arrow(a.name, p);
      if (seen[a.target].insert(image).second) out[a.target].push_back(std::move(image));
    }
  }
  return out;
}

bool same_point_sets(const PointFamily& a, const PointFamily& b) {
  std::set<std::string> objects;
  for (const auto& [o, _] : a) objects.insert(o);
  for (const auto& [o, _] : b) objects.insert(o);
  for (const auto& o : objects) {
    PointSet sa, sb;
    if (auto it = a.find(o); it != a.end()) sa.insert(it->second.begin(), it->second.end());
    if (auto it = b.find(o); it != b.end()) sb.insert(it->second.begin(), it->second.end());
    if (sa.size() != sb.size()) return false;
    for (auto ia = sa.begin(), ib = sb.begin(); ia != sa.end(); ++ia, ++ib) {
      if (BitwiseLess{}(*ia, *ib) || BitwiseLess{}(*ib, *ia)) return false;
    }
  }
  return true;
}

}  // namespace functorium
