#include <benchmark/benchmark.h>

#include "functorium/rewrite.hpp"
#include "functorium/schema.hpp"
#include "functorium/task.hpp"

using namespace functorium;

namespace {

void BM_NormalizeAlternating(benchmark::State& state) {
  const Schema schema = parse_schema(kCycleGanSchemaText);
  const RewriteSystem rw(schema, 1 << 20);
  std::vector<std::string> word;
  for (int i = 0; i < state.range(0); ++i) word.push_back(i % 2 ? "g" : "f");
  const Path p("A", word);
  for (auto _ : state) benchmark::DoNotOptimize(normalize(p, rw));
}
BENCHMARK(BM_NormalizeAlternating)->Arg(8)->Arg(64)->Arg(512);

void BM_CongruenceClosure(benchmark::State& state) {
  const Schema schema = parse_schema(kCycleGanSchemaText);
  const auto max_len = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(congruence_closure_bounded(schema, max_len).paths().size());
}
BENCHMARK(BM_CongruenceClosure)->Arg(4)->Arg(8)->Unit(benchmark::kMillisecond);

void BM_EquivalentUpToSix(benchmark::State& state) {
  const Schema schema = parse_schema(kCycleGanSchemaText);
  const auto paths = enumerate_all_paths(schema, 6);
  const EquivalenceChecker checker(schema);
  for (auto _ : state) {
    std::size_t equal = 0;
    for (const auto& p : paths)
      for (const auto& q : paths)
        if (schema.source(p) == schema.source(q) && schema.target(p) == schema.target(q))
          equal += checker.equivalent(p, q) == Equivalence::kEqual;
    benchmark::DoNotOptimize(equal);
  }
}
BENCHMARK(BM_EquivalentUpToSix)->Unit(benchmark::kMillisecond);

void BM_ParseSchema(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(parse_schema(kProductSchemaText));
}
BENCHMARK(BM_ParseSchema);

}  // namespace

BENCHMARK_MAIN();
