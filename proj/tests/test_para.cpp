#include "doctest.h"

#include <random>

#include "functorium/para.hpp"

using namespace functorium;

namespace {

Tensor random_tensor(Shape shape, std::mt19937_64& gen) {
  std::normal_distribution<double> n(0.0, 0.7);
  Tensor t(std::move(shape));
  for (auto& v : t.data()) v = n(gen);
  return t;
}

Tensor concat_params(const Tensor& a, const Tensor& b) {
  std::vector<double> v(a.data().begin(), a.data().end());
  v.insert(v.end(), b.data().begin(), b.data().end());
  return Tensor::vector(std::move(v));
}

ParamFn random_mlp(std::size_t in, std::size_t out, std::mt19937_64& gen) {
  std::uniform_int_distribution<std::size_t> width(1, 4), depth(0, 2), act(0, 3);
  std::vector<std::size_t> widths{in};
  const std::size_t hidden = depth(gen);
  std::vector<Activation> acts;
  for (std::size_t i = 0; i < hidden; ++i) {
    widths.push_back(width(gen));
    acts.push_back(static_cast<Activation>(1 + act(gen) % 3));
  }
  widths.push_back(out);
  return mlp(MLPSpec{widths, acts, static_cast<Activation>(act(gen))});
}

}  // namespace

TEST_CASE("mlp parameter layout") {
  CHECK(mlp_param_dim(MLPSpec::uniform({2, 4, 1}, Activation::kTanh)) == 17);
  CHECK(mlp(MLPSpec::uniform({2, 4, 1}, Activation::kTanh)).param_dim() == 17);
  CHECK_THROWS(MLPSpec::uniform({3}, Activation::kTanh).validate());
  CHECK_THROWS(MLPSpec::uniform({3, 0, 1}, Activation::kTanh).validate());

  ParamFn affine1 = mlp(MLPSpec::uniform({1, 1}, Activation::kNone));
  CHECK(apply_partial(affine1, Tensor::vector({2, 1}))(Tensor::vector({3})) == Tensor::vector({7}));

  ParamFn zero = mlp(MLPSpec::uniform({3, 3}, Activation::kNone, Activation::kSigmoid));
  CHECK(apply_partial(zero, Tensor(Shape{12}))(Tensor::vector({1, -2, 3})) ==
        Tensor::vector({0.5, 0.5, 0.5}));

  // Weight rows are outputs: W = [[1,2],[3,4]], b = [10, 20].
  ParamFn lin = mlp(MLPSpec::uniform({2, 2}, Activation::kNone));
  CHECK(apply_partial(lin, Tensor::vector({1, 2, 3, 4, 10, 20}))(Tensor::vector({1, 1})) ==
        Tensor::vector({13, 27}));
}

TEST_CASE("activations parse") {
  CHECK(parse_activation("tanh") == Activation::kTanh);
  CHECK(parse_activation("none") == Activation::kNone);
  CHECK(std::string(to_string(Activation::kRelu)) == "relu");
  CHECK_THROWS(parse_activation("softmax"));
}

TEST_CASE("identity and composition") {
  ParamFn id2 = identity_para(2);
  CHECK(id2.param_dim() == 0);
  CHECK(apply_partial(id2, Tensor(Shape{0}))(Tensor::vector({1.5, -2})) == Tensor::vector({1.5, -2}));
  CHECK(identity_para(7).param_dim() == 0);
  CHECK(compose_para(id2, id2).param_dim() == 0);

  ParamFn f = mlp(MLPSpec::uniform({2, 1}, Activation::kNone));  // p = 3
  ParamFn g = mlp(MLPSpec::uniform({1, 2}, Activation::kTanh));  // p = 4
  CHECK(compose_para(f, g).param_dim() == 7);
  CHECK_THROWS_AS(compose_para(f, f), ShapeError);

  std::mt19937_64 gen(2);
  const Tensor p = random_tensor(Shape{3}, gen);
  const Tensor x = random_tensor(Shape{5, 2}, gen);
  CHECK(max_abs_diff(apply_partial(compose_para(id2, f), p)(x), apply_partial(f, p)(x)) == 0.0);
}

TEST_CASE("partial application is functorial") {
  std::mt19937_64 gen(31);
  std::uniform_int_distribution<std::size_t> dim(1, 4);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t a = dim(gen), b = dim(gen), c = dim(gen);
    ParamFn f = random_mlp(a, b, gen);
    ParamFn g = random_mlp(b, c, gen);
    const Tensor pf = random_tensor(Shape{f.param_dim()}, gen);
    const Tensor pg = random_tensor(Shape{g.param_dim()}, gen);
    const Tensor x = random_tensor(Shape{3, a}, gen);
    const Tensor whole = apply_partial(compose_para(f, g), concat_params(pf, pg))(x);
    const Tensor piecewise = apply_partial(g, pg)(apply_partial(f, pf)(x));
    CHECK(max_abs_diff(whole, piecewise) <= 1e-12);
  }
}

TEST_CASE("composition is associative on flat parameters") {
  std::mt19937_64 gen(8);
  for (int trial = 0; trial < 30; ++trial) {
    ParamFn f = random_mlp(2, 3, gen), g = random_mlp(3, 2, gen), h = random_mlp(2, 1, gen);
    ParamFn left = compose_para(compose_para(f, g), h);
    ParamFn right = compose_para(f, compose_para(g, h));
    REQUIRE(left.param_dim() == f.param_dim() + g.param_dim() + h.param_dim());
    const Tensor p = random_tensor(Shape{left.param_dim()}, gen);
    const Tensor x = random_tensor(Shape{4, 2}, gen);
    CHECK(max_abs_diff(apply_partial(left, p)(x), apply_partial(right, p)(x)) <= 1e-12);
  }
}

TEST_CASE("pairing acts blockwise") {
  ParamFn f = mlp(MLPSpec::uniform({2, 1}, Activation::kNone));
  ParamFn g = identity_para(3);
  ParamFn fg = pair_para(f, g);
  CHECK(fg.in_dim() == 5);
  CHECK(fg.out_dim() == 4);
  CHECK(fg.param_dim() == 3);
  const Tensor out =
      apply_partial(fg, Tensor::vector({1, 1, 0.5}))(Tensor::vector({1, 2, 7, 8, 9}));
  CHECK(out == Tensor::vector({3.5, 7, 8, 9}));
}

TEST_CASE("fixed and opaque maps") {
  ParamFn rot = fixed_affine(Tensor::matrix({{0, -1}, {1, 0}}), Tensor::vector({2, 0}));
  CHECK(rot.param_dim() == 0);
  CHECK(apply_partial(rot, Tensor(Shape{0}))(Tensor::vector({1, 0})) == Tensor::vector({2, 1}));
  CHECK_THROWS_AS(fixed_affine(Tensor::matrix({{1, 0}}), Tensor::vector({1, 2})), ShapeError);
  ParamFn dbl = opaque_para(1, 1, [](const Tensor& t) {
    Tensor o = t;
    for (auto& v : o.data()) v *= 2;
    return o;
  });
  CHECK(apply_partial(dbl, Tensor(Shape{0}))(Tensor::matrix({{1}, {2}})) == Tensor::matrix({{2}, {4}}));
}

TEST_CASE("apply_partial validates parameters and inputs") {
  ParamFn f = mlp(MLPSpec::uniform({2, 1}, Activation::kNone));
  CHECK_THROWS_AS(apply_partial(f, Tensor(Shape{2})), ShapeError);
  CHECK_THROWS_AS(apply_partial(f, Tensor::vector({1, NAN, 0})), NumericError);
  CHECK_THROWS_AS(apply_partial(f, Tensor(Shape{3}))(Tensor::vector({1, 2, 3})), ShapeError);
}
