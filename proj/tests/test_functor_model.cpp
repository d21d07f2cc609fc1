#include "doctest.h"

#include <random>

#include "functorium/functor_model.hpp"
#include "functorium/losses.hpp"
#include "functorium/rewrite.hpp"
#include "functorium/trainer.hpp"

using namespace functorium;

namespace {

Schema cycle_schema() {
  return parse_schema(
      "schema CycleGAN { objects: A, B arrows: f : A -> B, g : B -> A "
      "equations: g . f = id_A, f . g = id_B }");
}

std::shared_ptr<const Architecture> cycle_arch() {
  ParamFn net = mlp(MLPSpec::uniform({2, 3, 2}, Activation::kTanh));
  return std::make_shared<const Architecture>(cycle_schema(),
                                              std::map<std::string, std::size_t>{{"A", 2}, {"B", 2}},
                                              std::map<std::string, ParamFn>{{"f", net}, {"g", net}});
}

Tensor random_batch(std::size_t n, std::size_t d, std::mt19937_64& gen) {
  std::normal_distribution<double> nd(0.0, 1.0);
  Tensor t(Shape{n, d});
  for (auto& v : t.data()) v = nd(gen);
  return t;
}

}  // namespace

TEST_CASE("architecture validation") {
  ParamFn net = mlp(MLPSpec::uniform({2, 2}, Activation::kNone));
  ParamFn wrong = mlp(MLPSpec::uniform({3, 2}, Activation::kNone));
  const std::map<std::string, std::size_t> dims{{"A", 2}, {"B", 2}};
  CHECK_NOTHROW(Architecture(cycle_schema(), dims, {{"f", net}, {"g", net}}));
  CHECK_THROWS_AS(Architecture(cycle_schema(), dims, {{"f", net}}), std::invalid_argument);
  CHECK_THROWS_AS(Architecture(cycle_schema(), dims, {{"f", net}, {"g", wrong}}), std::invalid_argument);
  CHECK_THROWS_AS(Architecture(cycle_schema(), {{"A", 2}}, {{"f", net}, {"g", net}}), std::invalid_argument);
  CHECK_THROWS_AS(Architecture(cycle_schema(), dims, {{"f", net}, {"g", net}, {"h", net}}),
                  std::invalid_argument);
}

TEST_CASE("total parameter dimension") {
  ParamFn net = mlp(MLPSpec::uniform({2, 4, 1}, Activation::kTanh));
  ParamFn back = mlp(MLPSpec::uniform({1, 4, 2}, Activation::kTanh));
  CHECK(net.param_dim() == 17);
  Schema s = parse_schema("schema S { objects: A, B arrows: f : A -> B, g : B -> A }");
  Architecture arch(s, {{"A", 2}, {"B", 1}}, {{"f", net}, {"g", back}});
  CHECK(total_param_dim(arch) == 17 + back.param_dim());
  Schema none = parse_schema("schema N { objects: A }");
  CHECK(total_param_dim(Architecture(none, {{"A", 3}}, {})) == 0);
  Schema one = parse_schema("schema O { objects: A, B arrows: f : A -> B }");
  CHECK(total_param_dim(Architecture(one, {{"A", 2}, {"B", 1}}, {{"f", net}})) == 17);
}

TEST_CASE("parameter assignments flatten in declaration order") {
  auto arch = cycle_arch();
  std::vector<double> flat(total_param_dim(*arch));
  for (std::size_t i = 0; i < flat.size(); ++i) flat[i] = static_cast<double>(i);
  auto p = ParameterAssignment::unflatten(*arch, Tensor::vector(flat));
  CHECK(p.at("f")[0] == 0.0);
  CHECK(p.at("g")[0] == static_cast<double>(arch->generator("f").param_dim()));
  CHECK(p.flatten(*arch) == Tensor::vector(flat));
  CHECK_THROWS_AS(ParameterAssignment::unflatten(*arch, Tensor(Shape{3})), ShapeError);
}

TEST_CASE("pspec") {
  auto arch = cycle_arch();
  Model zero = pspec(arch, ParameterAssignment::zeros(*arch));
  const Tensor x = Tensor::matrix({{1, 2}, {-1, 0.5}});
  CHECK(zero.eval_arrow("f", x) == Tensor(Shape{2, 2}));
  std::mt19937_64 gen(4);
  Rng rng(4);
  auto params = init_params(*arch, 0.5, rng);
  Model m = pspec(arch, params);
  CHECK(m.eval_arrow("g", x) == apply_partial(arch->generator("g"), params.at("g"))(x));
  CHECK_THROWS_AS(pspec(arch, ParameterAssignment({{"f", params.at("f")}})), std::invalid_argument);
  CHECK_THROWS_AS(pspec(arch, ParameterAssignment({{"f", params.at("f")}, {"g", Tensor(Shape{2})}})),
                  std::invalid_argument);
}

TEST_CASE("path evaluation is functorial") {
  auto arch = cycle_arch();
  Rng rng(12);
  Model m(arch, init_params(*arch, 0.8, rng));
  std::mt19937_64 gen(12);
  const Tensor x = random_batch(5, 2, gen);
  CHECK(m.eval_path(Path::identity("A"), x) == x);
  CHECK(m.eval_path(Path("A", {"f", "g"}), x) == m.eval_arrow("g", m.eval_arrow("f", x)));
  const auto& s = m.schema();
  auto paths = enumerate_paths(s, "A", 3);
  for (const auto& p : paths)
    for (const auto& q : enumerate_all_paths(s, 2)) {
      if (s.target(p) != s.source(q)) continue;
      const Tensor lhs = m.eval_path(compose(s.graph(), p, q), x);
      const Tensor rhs = m.eval_path(q, m.eval_path(p, x));
      CHECK(max_abs_diff(lhs, rhs) <= 1e-12);
    }
  CHECK_THROWS_AS(m.eval_path(Path("A", {"f"}), random_batch(2, 3, gen)), ShapeError);
  CHECK_THROWS(m.eval_path(Path("A", {"q"}), x));
}

TEST_CASE("identity maps satisfy the cycle relations") {
  ParamFn id = identity_para(2);
  auto arch = std::make_shared<const Architecture>(
      cycle_schema(), std::map<std::string, std::size_t>{{"A", 2}, {"B", 2}},
      std::map<std::string, ParamFn>{{"f", id}, {"g", id}});
  Model m(arch, ParameterAssignment::zeros(*arch));
  const Tensor x = Tensor::matrix({{1, 2}, {3, 4}});
  CHECK(m.eval_path(Path("A", {"f", "g"}), x) == x);
  auto r = functoriality_residual(m, {{"A", x}, {"B", x}});
  CHECK(r == std::vector<double>{0.0, 0.0});
}

TEST_CASE("residual of x and x+1 on {0, 2} is 1") {
  Schema s = parse_schema("schema L { objects: X arrows: p : X -> X, q : X -> X equations: p = q }");
  ParamFn idf = identity_para(1);
  ParamFn plus1 = fixed_affine(Tensor::matrix({{1}}), Tensor::vector({1}));
  auto arch = std::make_shared<const Architecture>(s, std::map<std::string, std::size_t>{{"X", 1}},
                                                   std::map<std::string, ParamFn>{{"p", idf}, {"q", plus1}});
  Model m(arch, ParameterAssignment::zeros(*arch));
  const Tensor batch = Tensor::matrix({{0}, {2}});
  CHECK(functoriality_residual(m, {{"X", batch}}) == std::vector<double>{1.0});
  CHECK(path_equiv_loss(m, s.relations()[0], batch) == 1.0);
  CHECK_THROWS_AS(functoriality_residual(m, {}), std::invalid_argument);
}

TEST_CASE("residual agrees with the path-equivalence loss") {
  auto arch = cycle_arch();
  Rng rng(1);
  Model m(arch, init_params(*arch, 0.6, rng));
  std::mt19937_64 gen(1);
  const Tensor a = random_batch(16, 2, gen), b = random_batch(16, 2, gen);
  auto r = functoriality_residual(m, {{"A", a}, {"B", b}});
  CHECK(r[0] > 0.0);
  CHECK(std::abs(r[0] - path_equiv_loss(m, m.schema().relations()[0], a)) <= 1e-12);
  CHECK(std::abs(r[1] - path_equiv_loss(m, m.schema().relations()[1], b)) <= 1e-12);
}

TEST_CASE("restriction along one arrow") {
  Schema s = parse_schema("schema O { objects: A, B arrows: f : A -> B }");
  ParamFn twice = fixed_affine(Tensor::matrix({{2, 0}, {0, 2}}), Tensor::vector({0, 0}));
  auto arch = std::make_shared<const Architecture>(
      s, std::map<std::string, std::size_t>{{"A", 2}, {"B", 2}}, std::map<std::string, ParamFn>{{"f", twice}});
  Model m(arch, ParameterAssignment::zeros(*arch));
  EmbeddingSpec emb({{"A", 2}, {"B", 2}});
  DatasetFunctor data(emb, {{"A", Tensor::matrix({{1, 3}})}});
  PointFamily fam = restrict_to_dataset(m, data);
  CHECK(fam.at("A") == std::vector<Tensor>{Tensor::vector({1, 3})});
  CHECK(fam.at("B") == std::vector<Tensor>{Tensor::vector({2, 6})});
  CHECK(same_point_sets(closure_step(m, fam), fam));
}

TEST_CASE("restriction without arrows is the dataset") {
  Schema s = parse_schema("schema N { objects: A, B }");
  auto arch = std::make_shared<const Architecture>(s, std::map<std::string, std::size_t>{{"A", 1}, {"B", 1}},
                                                   std::map<std::string, ParamFn>{});
  Model m(arch, ParameterAssignment{});
  DatasetFunctor data(EmbeddingSpec({{"A", 1}, {"B", 1}}),
                      {{"A", Tensor::matrix({{1}, {2}})}, {"B", Tensor::matrix({{5}})}});
  PointFamily fam = restrict_to_dataset(m, data);
  CHECK(fam.at("A").size() == 2);
  CHECK(fam.at("B").size() == 1);
}

TEST_CASE("restriction under an exact cycle stops at two points") {
  ParamFn t = fixed_affine(Tensor::matrix({{0, -1}, {1, 0}}), Tensor::vector({2, 0}));
  ParamFn tinv = fixed_affine(Tensor::matrix({{0, 1}, {-1, 0}}), Tensor::vector({0, 2}));
  auto arch = std::make_shared<const Architecture>(
      cycle_schema(), std::map<std::string, std::size_t>{{"A", 2}, {"B", 2}},
      std::map<std::string, ParamFn>{{"f", t}, {"g", tinv}});
  Model m(arch, ParameterAssignment::zeros(*arch));
  DatasetFunctor data(EmbeddingSpec({{"A", 2}, {"B", 2}}), {{"A", Tensor::matrix({{0.25, -0.5}})}});
  PointFamily fam = restrict_to_dataset(m, data);
  CHECK(fam.at("A").size() == 1);
  REQUIRE(fam.at("B").size() == 1);
  CHECK(fam.at("B")[0] == Tensor::vector({2.5, 0.25}));
  CHECK(same_point_sets(closure_step(m, fam), fam));
}

TEST_CASE("restriction contains the data and sits inside the enumerated image") {
  auto arch = cycle_arch();
  Rng rng(3);
  Model m(arch, init_params(*arch, 0.5, rng));
  std::mt19937_64 gen(3);
  DatasetFunctor data(EmbeddingSpec({{"A", 2}, {"B", 2}}), {{"A", random_batch(3, 2, gen)}});
  // Non-exact maps never close, so the depth bound decides the size.
  PointFamily fam = restrict_to_dataset(m, data, 3);
  std::size_t total = 0;
  for (const auto& [o, pts] : fam) total += pts.size();
  CHECK(total == 3 * 4);  // each point, then 3 successive images
  PointFamily image;
  const auto& s = m.schema();
  for (const auto& p : enumerate_paths(s, "A", 3))
    for (std::size_t r = 0; r < 3; ++r)
      image[s.target(p)].push_back(m.eval_path(p, data.points("A").row_tensor(r)));
  CHECK(same_point_sets(fam, image));
  CHECK_THROWS_AS(restrict_to_dataset(m, DatasetFunctor(EmbeddingSpec({{"A", 3}}), {{"A", Tensor(Shape{1, 3})}})),
                  ShapeError);
}
