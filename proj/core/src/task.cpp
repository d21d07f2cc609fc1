#include "functorium/task.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace functorium {

const char* const kCycleGanSchemaText = R"(# Two domains with a translation each way; both round trips are identities.
schema CycleGAN {
  objects: A, B
  arrows: f : A -> B, g : B -> A
  equations: g . f = id_A, f . g = id_B
}
)";

const char* const kProductSchemaText = R"(# AB is isomorphic to the product of A and a latent factor B_Z.
schema Product {
  objects: AxB_Z, AB
  arrows: c : AxB_Z -> AB, d : AB -> AxB_Z
  equations: d . c = id_AxB_Z, c . d = id_AB
}
)";

// ---------------------------------------------------------------------------
// GroundTruthOracle

GroundTruthOracle::GroundTruthOracle(const Schema& schema,
                                     std::map<std::string, std::size_t> object_dims,
                                     std::map<std::string, ParamFn> maps,
                                     const std::map<std::string, Tensor>& samples,
                                     double tolerance)
    : maps_(maps),
      arch_(std::make_shared<const Architecture>(schema, std::move(object_dims), std::move(maps))) {
  for (const auto& [name, fn] : maps_) {
    if (fn.param_dim() != 0) {
      throw std::invalid_argument("oracle map '" + name + "' must be parameter-free");
    }
  }
  const auto residuals = functoriality_residual(model(), samples);
  for (std::size_t i = 0; i < residuals.size(); ++i) {
    if (!(residuals[i] <= tolerance)) {
      throw std::logic_error("oracle violates " + relation_label(schema.relations()[i]) +
                             " with residual " + std::to_string(residuals[i]));
    }
  }
}

Model GroundTruthOracle::model() const {
  return Model(arch_, ParameterAssignment::zeros(*arch_));
}

// ---------------------------------------------------------------------------
// TaskSpec

std::map<std::string, std::size_t> TaskSpec::object_dims() const {
  std::map<std::string, std::size_t> out;
  for (const auto& o : schema.graph().objects()) out.emplace(o, embedding.dim(o));
  return out;
}

bool TaskSpec::has_data(const std::string& object) const {
  auto it = factors.find(object);
  if (it == factors.end()) return false;
  for (const auto& f : it->second)
    if (!f.latent) return true;
  return false;
}

bool TaskSpec::samplable(const std::string& object, const DatasetFunctor& data) const {
  auto it = factors.find(object);
  if (it == factors.end()) return false;
  for (const auto& f : it->second)
    if (!f.latent && data.empty(f.name)) return false;
  return true;
}

Tensor TaskSpec::sample(const std::string& object, std::size_t n, Rng& rng,
                        const DatasetFunctor& data) const {
  auto it = factors.find(object);
  if (it == factors.end()) throw std::invalid_argument("task has no object '" + object + "'");
  std::vector<Tensor> parts;
  for (const auto& f : it->second) {
    parts.push_back(f.latent ? sample_batch(LatentSpec{f.name, f.dim}, n, rng)
                             : sample_batch(data, f.name, n, rng));
  }
  if (parts.size() == 1) return parts.front();
  const std::size_t d = embedding.dim(object);
  Tensor out(Shape{n, d});
  for (std::size_t r = 0; r < n; ++r) {
    std::size_t c = 0;
    for (const auto& p : parts) {
      for (double v : p.row(r)) out[r * d + c++] = v;
    }
  }
  return out;
}

void TaskSpec::validate() const {
  for (const auto& o : schema.graph().objects()) {
    auto it = factors.find(o);
    if (it == factors.end() || it->second.empty()) {
      throw std::invalid_argument("task '" + name + "' has no factor layout for object '" + o + "'");
    }
    std::size_t total = 0;
    for (const auto& f : it->second) {
      total += f.dim;
      if (f.latent) {
        bool declared = false;
        for (const auto& l : latents) declared |= (l.name == f.name && l.dim == f.dim);
        if (!declared) throw std::invalid_argument("latent factor '" + f.name + "' is not declared");
      } else {
        if (!dataset.embedding().contains(f.name) || dataset.embedding().dim(f.name) != f.dim) {
          throw std::invalid_argument("data factor '" + f.name + "' of '" + o +
                                      "' does not match the dataset embedding");
        }
      }
    }
    if (total != embedding.dim(o)) {
      throw std::invalid_argument("factors of '" + o + "' span R^" + std::to_string(total) +
                                  " but the object is embedded in R^" +
                                  std::to_string(embedding.dim(o)));
    }
  }
}

TaskSpec make_task(std::string name, Schema schema, EmbeddingSpec embedding,
                   DatasetFunctor dataset) {
  TaskSpec task{std::move(name), std::move(schema), std::move(embedding), {}, std::move(dataset),
                {},              std::nullopt,      std::nullopt,         {}};
  for (const auto& o : task.schema.graph().objects()) {
    task.factors[o] = {Factor{o, task.embedding.dim(o), false}};
  }
  task.validate();
  return task;
}

// ---------------------------------------------------------------------------
// CycleGAN toy

namespace {

constexpr double kBlobStd = 0.5;

Tensor gaussian_blob(std::size_t n, Rng& rng) {
  Tensor out(Shape{n, 2});
  for (auto& v : out.data()) v = rng.normal(0.0, kBlobStd);
  return out;
}

ParamFn translation_forward() {
  // Rotate by 90 degrees, then translate by (2, 0): (x, y) -> (2 - y, x).
  return fixed_affine(Tensor::matrix({{0.0, -1.0}, {1.0, 0.0}}), Tensor::vector({2.0, 0.0}),
                      "rotate90+shift");
}

ParamFn translation_inverse() {
  // (u, v) -> (v, 2 - u)
  return fixed_affine(Tensor::matrix({{0.0, 1.0}, {-1.0, 0.0}}), Tensor::vector({0.0, 2.0}),
                      "unshift+rotate-90");
}

DatasetFunctor cyclegan_dataset(std::uint64_t seed, std::size_t n) {
  Rng root(seed);
  Rng rng_a = root.split(1);
  Rng rng_b = root.split(2);
  Tensor a = gaussian_blob(n, rng_a);
  Tensor b = apply_partial(translation_forward(), Tensor(Shape{0}))(gaussian_blob(n, rng_b));
  EmbeddingSpec emb({{"A", 2}, {"B", 2}});
  return DatasetFunctor(emb, {{"A", std::move(a)}, {"B", std::move(b)}});
}

}  // namespace

TaskSpec gen_cyclegan_toy(std::uint64_t seed, std::size_t n) {
  if (n < 16) throw std::invalid_argument("gen_cyclegan_toy needs n >= 16");
  Schema schema = parse_schema(kCycleGanSchemaText);
  TaskSpec task = make_task("cyclegan-toy", schema, EmbeddingSpec({{"A", 2}, {"B", 2}}),
                            cyclegan_dataset(seed, n));
  task.oracle.emplace(schema, task.object_dims(),
                      std::map<std::string, ParamFn>{{"f", translation_forward()},
                                                     {"g", translation_inverse()}},
                      std::map<std::string, Tensor>{{"A", task.dataset.points("A")},
                                                    {"B", task.dataset.points("B")}});
  task.resample = [](std::uint64_t s, std::size_t m) { return cyclegan_dataset(s, m); };
  return task;
}

// ---------------------------------------------------------------------------
// Product toy

std::pair<double, double> product_offset(double z1, double z2) {
  const double radius = 0.5 * (0.5 + 0.5 * z2);
  const double angle = 2.0 * std::numbers::pi * z1;
  return {radius * std::cos(angle), radius * std::sin(angle)};
}

namespace {

Tensor compose_rows(const Tensor& az) {
  Tensor out(Shape{az.rows(), 4});
  for (std::size_t r = 0; r < az.rows(); ++r) {
    const double a1 = az.at(r, 0), a2 = az.at(r, 1);
    const auto [o1, o2] = product_offset(az.at(r, 2), az.at(r, 3));
    out.at(r, 0) = a1;
    out.at(r, 1) = a2;
    out.at(r, 2) = a1 + o1;
    out.at(r, 3) = a2 + o2;
  }
  return out;
}

Tensor decompose_rows(const Tensor& ab) {
  Tensor out(Shape{ab.rows(), 4});
  for (std::size_t r = 0; r < ab.rows(); ++r) {
    const double a1 = ab.at(r, 0), a2 = ab.at(r, 1);
    const double o1 = ab.at(r, 2) - a1, o2 = ab.at(r, 3) - a2;
    double z1 = std::atan2(o2, o1) / (2.0 * std::numbers::pi);
    if (z1 < 0.0) z1 += 1.0;
    const double z2 = 4.0 * std::hypot(o1, o2) - 1.0;
    out.at(r, 0) = a1;
    out.at(r, 1) = a2;
    out.at(r, 2) = z1;
    out.at(r, 3) = z2;
  }
  return out;
}

Tensor attribute_rows(const Tensor& ab) {
  Tensor out(Shape{ab.rows(), 2});
  for (std::size_t r = 0; r < ab.rows(); ++r) {
    out.at(r, 0) = ab.at(r, 2) - ab.at(r, 0);
    out.at(r, 1) = ab.at(r, 3) - ab.at(r, 1);
  }
  return out;
}

Tensor uniform_latents(std::size_t n, Rng& rng) {
  return sample_batch(LatentSpec{"B_Z", 2}, n, rng);
}

Tensor join_columns(const Tensor& a, const Tensor& b) {
  Tensor out(Shape{a.rows(), a.cols() + b.cols()});
  for (std::size_t r = 0; r < a.rows(); ++r) {
    std::size_t c = 0;
    for (double v : a.row(r)) out.at(r, c++) = v;
    for (double v : b.row(r)) out.at(r, c++) = v;
  }
  return out;
}

EmbeddingSpec product_embedding() {
  return EmbeddingSpec({{"AxB_Z", 4}, {"AB", 4}, {"A", 2}, {"B_Z", 2}});
}

DatasetFunctor product_dataset(std::uint64_t seed, std::size_t n) {
  Rng root(seed);
  Rng rng_a = root.split(1);
  Rng rng_ab = root.split(2);
  Tensor a = gaussian_blob(n, rng_a);
  // Composite points come from their own base draws, so nothing pairs
  // D_E(A) with D_E(AB).
  Tensor base = gaussian_blob(n, rng_ab);
  Tensor z = uniform_latents(n, rng_ab);
  Tensor ab = compose_rows(join_columns(base, z));
  return DatasetFunctor(EmbeddingSpec({{"A", 2}, {"AB", 4}}), {{"A", std::move(a)}, {"AB", std::move(ab)}});
}

}  // namespace

TaskSpec gen_product_toy(std::uint64_t seed, std::size_t n) {
  if (n < 16) throw std::invalid_argument("gen_product_toy needs n >= 16");
  Schema schema = parse_schema(kProductSchemaText);
  TaskSpec task;
  task.name = "product-toy";
  task.schema = schema;
  task.embedding = product_embedding();
  task.factors = {{"AxB_Z", {Factor{"A", 2, false}, Factor{"B_Z", 2, true}}},
                  {"AB", {Factor{"AB", 4, false}}}};
  task.dataset = product_dataset(seed, n);
  task.latents = {LatentSpec{"B_Z", 2}};
  task.validate();

  Rng check_rng = Rng(seed).split(3);
  const std::size_t m = std::min<std::size_t>(n, 1000);
  std::map<std::string, Tensor> samples{{"AxB_Z", task.sample("AxB_Z", m, check_rng)},
                                        {"AB", task.sample("AB", m, check_rng)}};
  task.oracle.emplace(schema, task.object_dims(),
                      std::map<std::string, ParamFn>{
                          {"c", opaque_para(4, 4, compose_rows, "attach")},
                          {"d", opaque_para(4, 4, decompose_rows, "detach")}},
                      samples);
  task.product = ProductStructure{"c", "d", "AxB_Z", "AB", "A", "B_Z", attribute_rows};
  task.resample = [](std::uint64_t s, std::size_t k) { return product_dataset(s, k); };
  return task;
}

// ---------------------------------------------------------------------------

std::vector<std::string> builtin_task_names() { return {"cyclegan-toy", "product-toy"}; }

TaskSpec make_builtin_task(const std::string& name, std::uint64_t seed, std::size_t n) {
  if (name == "cyclegan-toy") return gen_cyclegan_toy(seed, n);
  if (name == "product-toy") return gen_product_toy(seed, n);
  std::string valid;
  for (const auto& v : builtin_task_names()) valid += (valid.empty() ? "" : ", ") + v;
  throw std::invalid_argument("unknown task '" + name + "' (valid: " + valid + ")");
}

}  // namespace functorium
