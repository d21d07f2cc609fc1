#include <benchmark/benchmark.h>

#include "functorium/autodiff.hpp"
#include "functorium/losses.hpp"
#include "functorium/para.hpp"
#include "functorium/trainer.hpp"

using namespace functorium;
using namespace functorium::ad;

namespace {

Tensor filled(Shape shape, Rng& rng) {
  Tensor t(std::move(shape));
  for (auto& v : t.data()) v = rng.normal(0.0, 1.0);
  return t;
}

void BM_MatmulBackward(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng rng(1);
  const Tensor a = filled(Shape{n, n}, rng), b = filled(Shape{n, n}, rng);
  for (auto _ : state) {
    Tape tape;
    Var x = tape.variable(a), y = tape.variable(b);
    GradientMap g = tape.backward(sum(matmul(x, y)));
    benchmark::DoNotOptimize(g.at(x));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n * n * n));
}
BENCHMARK(BM_MatmulBackward)->Arg(16)->Arg(32)->Arg(64);

void BM_MlpForwardBackward(benchmark::State& state) {
  const auto batch = static_cast<std::size_t>(state.range(0));
  ParamFn net = mlp(MLPSpec::uniform({2, 32, 32, 2}, Activation::kTanh));
  Rng rng(2);
  const Tensor p = init_vector(net.param_dim(), 0.1, rng);
  const Tensor x = filled(Shape{batch, 2}, rng);
  for (auto _ : state) {
    Tape tape;
    Var pv = tape.variable(p);
    GradientMap g = tape.backward(l1_norm(net(tape, pv, tape.constant(x))));
    benchmark::DoNotOptimize(g.at(pv));
  }
}
BENCHMARK(BM_MlpForwardBackward)->Arg(64)->Arg(256);

void BM_GradientPenaltyBackward(benchmark::State& state) {
  ParamFn critic = mlp(MLPSpec::uniform({2, 32, 32, 1}, Activation::kTanh));
  Rng rng(3);
  const Tensor p = init_vector(critic.param_dim(), 0.1, rng);
  const Tensor real = filled(Shape{64, 2}, rng), fake = filled(Shape{64, 2}, rng);
  for (auto _ : state) {
    Tape tape;
    Var pv = tape.variable(p);
    GradientMap g =
        tape.backward(gradient_penalty(tape, critic, pv, real, fake, kDefaultPenaltyWeight, rng));
    benchmark::DoNotOptimize(g.at(pv));
  }
}
BENCHMARK(BM_GradientPenaltyBackward);

void BM_TrainingStep(benchmark::State& state) {
  TaskSpec task = gen_cyclegan_toy(7, 2048);
  TrainConfig config;
  config.n_critic = CriticSchedule{0, 5, 5};
  Trainer trainer(task, default_architecture(task), default_critics(task), config);
  for (auto _ : state) benchmark::DoNotOptimize(trainer.step().total);
}
BENCHMARK(BM_TrainingStep)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
