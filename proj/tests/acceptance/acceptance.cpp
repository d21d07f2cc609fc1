// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits non-zero if any fails.
//
//   acceptance [--cli <path to functorium>] [criterion numbers...]

#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "functorium/autodiff.hpp"
#include "functorium/evaluate.hpp"
#include "functorium/functor_model.hpp"
#include "functorium/losses.hpp"
#include "functorium/para.hpp"
#include "functorium/rewrite.hpp"
#include "functorium/task.hpp"
#include "functorium/trainer.hpp"

using namespace functorium;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

std::string g(double v) { return fmt("%.4g", v); }

Tensor join(const Tensor& a, const Tensor& b) {
  std::vector<double> v(a.data().begin(), a.data().end());
  v.insert(v.end(), b.data().begin(), b.data().end());
  return Tensor::vector(std::move(v));
}

Tensor normal_tensor(Shape shape, std::mt19937_64& gen, double sd = 1.0) {
  std::normal_distribution<double> n(0.0, sd);
  Tensor t(std::move(shape));
  for (auto& v : t.data()) v = n(gen);
  return t;
}

// ---------------------------------------------------------------------------
// 1. Rewriting agrees with the bounded congruence closure.

Outcome rewriting() {
  const auto t0 = Clock::now();
  const Schema s = parse_schema(kCycleGanSchemaText);
  const EquivalenceChecker checker(s);
  const PathPartition closure = congruence_closure_bounded(s, 8);
  const auto paths = enumerate_all_paths(s, 6);
  std::size_t pairs = 0, agree = 0;
  for (const auto& p : paths) {
    for (const auto& q : paths) {
      if (path_source(s.graph(), p) != path_source(s.graph(), q) ||
          path_target(s.graph(), p) != path_target(s.graph(), q)) {
        continue;
      }
      ++pairs;
      const bool by_rules = checker.equivalent(p, q) == Equivalence::kEqual;
      const bool by_closure = closure.class_of(p) == closure.class_of(q);
      if (by_rules == by_closure) ++agree;
    }
  }
  std::set<Path> forms;
  for (const auto& p : paths) forms.insert(normalize(p, checker.rewrite_system()));
  const std::set<Path> expected{Path::identity("A"), Path::identity("B"), Path("A", {"f"}),
                                Path("B", {"g"})};
  const double secs = seconds_since(t0);
  std::string names;
  for (const auto& f : forms) names += (names.empty() ? "" : ", ") + f.to_string();
  return {agree == pairs && forms == expected && secs < 1.0,
          std::to_string(paths.size()) + " paths, " + std::to_string(agree) + "/" +
              std::to_string(pairs) + " parallel pairs agree, normal forms {" + names + "}, " +
              fmt("%.3f s", secs)};
}

// ---------------------------------------------------------------------------
// 2. Reverse mode against central differences.

struct FdTally {
  double worst = 0.0;
  std::size_t trials = 0;
  std::size_t empty = 0;  // trials where every coordinate sat on a kink

  void add(const ad::FiniteDiffReport& r) {
    ++trials;
    if (r.checked == 0) ++empty;
    worst = std::max(worst, r.max_relative_error);
  }
};

Outcome autodiff_soundness() {
  using namespace functorium::ad;
  const auto t0 = Clock::now();
  constexpr int kTrials = 100;
  constexpr double kStep = 1e-5;
  std::mt19937_64 gen(2024);
  std::map<std::string, FdTally> tally;
  auto check = [&](const std::string& op, const ScalarFn& f, const Tensor& x) {
    tally[op].add(finite_diff_check(f, x, kStep));
  };

  for (int trial = 0; trial < kTrials; ++trial) {
    const Tensor m = normal_tensor(Shape{3, 2}, gen);
    const Tensor other = normal_tensor(Shape{3, 2}, gen);
    const Tensor rhs = normal_tensor(Shape{2, 4}, gen);
    const Tensor w = normal_tensor(Shape{4, 2}, gen);
    const Tensor bias = normal_tensor(Shape{4}, gen);
    const Tensor weights = normal_tensor(Shape{3, 2}, gen);
    auto weighted = [weights](Tape& t, const Var& v) { return sum(mul(v, t.constant(weights))); };

    check("add", [&](Tape& t, const Var& x) { return weighted(t, add(x, t.constant(other))); }, m);
    check("sub", [&](Tape& t, const Var& x) { return weighted(t, sub(t.constant(other), x)); }, m);
    check("mul", [&](Tape& t, const Var& x) { return weighted(t, mul(x, x)); }, m);
    check("matmul", [&](Tape& t, const Var& x) {
      return sum(ad::tanh(matmul(x, t.constant(rhs))));
    }, m);
    check("affine", [&](Tape& t, const Var& x) {
      return sum(ad::tanh(affine(reshape(slice(x, 0, 8), Shape{4, 2}), t.constant(m), slice(x, 8, 12))));
    }, join(w, bias));
    check("tanh", [&](Tape& t, const Var& x) { return weighted(t, ad::tanh(x)); }, m);
    check("relu", [&](Tape& t, const Var& x) { return weighted(t, ad::relu(x)); }, m);
    check("sigmoid", [&](Tape& t, const Var& x) { return weighted(t, ad::sigmoid(x)); }, m);
    check("abs", [&](Tape& t, const Var& x) { return weighted(t, ad::abs(x)); }, m);
    check("sum", [&](Tape&, const Var& x) { return mul(sum(x), sum(x)); }, m);
    check("mean", [&](Tape&, const Var& x) { return mul(mean(x), sum(x)); }, m);
    check("l1_norm", [&](Tape&, const Var& x) { return l1_norm(x); }, m);
    check("l2_norm", [&](Tape&, const Var& x) { return l2_norm(x); }, m);
    check("concat", [&](Tape& t, const Var& x) {
      return sum(mul(concat(x, t.constant(other)), concat(t.constant(weights), x)));
    }, m);
    check("slice", [&](Tape& t, const Var& x) {
      return weighted(t, concat(slice(x, 1, 2), slice(x, 0, 1)));
    }, m);
    check("scale", [&](Tape& t, const Var& x) { return weighted(t, scale(x, -2.5)); }, m);
  }

  // Full objective on a two-domain problem with widths <= 4.
  const Schema s = parse_schema(kCycleGanSchemaText);
  ParamFn f_net = mlp(MLPSpec::uniform({2, 4, 2}, Activation::kTanh));
  ParamFn g_net = mlp(MLPSpec::uniform({2, 3, 2}, Activation::kRelu));
  auto arch = std::make_shared<const Architecture>(
      s, std::map<std::string, std::size_t>{{"A", 2}, {"B", 2}},
      std::map<std::string, ParamFn>{{"f", f_net}, {"g", g_net}});
  ParamFn critic_net = mlp(MLPSpec::uniform({2, 4, 1}, Activation::kTanh));
  CriticSet critics;
  critics.networks = {{"A", critic_net}, {"B", critic_net}};
  const std::size_t ng = total_param_dim(*arch), nc = critic_net.param_dim();
  for (int trial = 0; trial < kTrials; ++trial) {
    const Tensor a = normal_tensor(Shape{4, 2}, gen), b = normal_tensor(Shape{4, 2}, gen);
    const Tensor x = normal_tensor(Shape{ng + 2 * nc}, gen, 0.8);
    const double gamma = trial % 2 == 0 ? kDefaultGamma : 1.0;
    check("total_loss", [&](Tape& tape, const Var& v) {
      std::map<std::string, Var> gen_vars, critic_vars, batches;
      std::size_t off = 0;
      for (const auto& name : arch->generator_names()) {
        const std::size_t n = arch->generator(name).param_dim();
        gen_vars.emplace(name, slice(v, off, off + n));
        off += n;
      }
      critic_vars.emplace("A", slice(v, off, off + nc));
      critic_vars.emplace("B", slice(v, off + nc, off + 2 * nc));
      batches.emplace("A", tape.constant(a));
      batches.emplace("B", tape.constant(b));
      return total_loss(tape, *arch, gen_vars, critics, critic_vars, batches, gamma).total;
    }, x);
    const Tensor cp = normal_tensor(Shape{nc}, gen, 0.8);
    const auto penalty_seed = static_cast<std::uint64_t>(500 + trial);
    check("gradient_penalty", [&](Tape& tape, const Var& v) {
      Rng rng(penalty_seed);
      return gradient_penalty(tape, critic_net, v, a, b, kDefaultPenaltyWeight, rng);
    }, cp);
  }

  const double secs = seconds_since(t0);
  bool ok = secs < 30.0;
  double worst = 0.0;
  std::string weakest;
  std::size_t total = 0;
  for (const auto& [op, t] : tally) {
    total += t.trials;
    if (t.trials < static_cast<std::size_t>(kTrials) || t.empty > 0 || t.worst >= 1e-4) ok = false;
    if (t.worst >= worst) worst = t.worst, weakest = op;
  }
  return {ok, std::to_string(tally.size()) + " ops, " + std::to_string(total) +
                  " trials, max relative error " + g(worst) + " (" + weakest + "), " +
                  fmt("%.1f s", secs)};
}

// ---------------------------------------------------------------------------
// 3. Partial application of a composite equals the composite of partials.

ParamFn random_mlp(std::size_t in, std::size_t out, std::mt19937_64& gen) {
  std::uniform_int_distribution<std::size_t> width(1, 5), depth(0, 3), act(0, 3);
  std::vector<std::size_t> widths{in};
  std::vector<Activation> acts;
  const std::size_t hidden = depth(gen);
  for (std::size_t i = 0; i < hidden; ++i) {
    widths.push_back(width(gen));
    acts.push_back(static_cast<Activation>(1 + act(gen) % 3));
  }
  widths.push_back(out);
  return mlp(MLPSpec{widths, acts, static_cast<Activation>(act(gen))});
}

Outcome para_functoriality() {
  std::mt19937_64 gen(99);
  std::uniform_int_distribution<std::size_t> dim(1, 4), rows(1, 6);
  double worst = 0.0;
  for (int draw = 0; draw < 100; ++draw) {
    const std::size_t a = dim(gen), b = dim(gen), c = dim(gen);
    ParamFn f = random_mlp(a, b, gen);
    ParamFn h = random_mlp(b, c, gen);
    const Tensor pf = normal_tensor(Shape{f.param_dim()}, gen);
    const Tensor ph = normal_tensor(Shape{h.param_dim()}, gen);
    const Tensor x = normal_tensor(Shape{rows(gen), a}, gen, 2.0);
    const Tensor whole = apply_partial(compose_para(f, h), join(pf, ph))(x);
    const Tensor parts = apply_partial(h, ph)(apply_partial(f, pf)(x));
    worst = std::max(worst, max_abs_diff(whole, parts));
  }
  return {worst <= 1e-12, "100 draws, max deviation " + g(worst)};
}

// ---------------------------------------------------------------------------
// 4. The reference maps of the product task form an exact model.

Outcome oracle_semantics() {
  const TaskSpec task = gen_product_toy(7, 2048);
  const Model model = task.oracle->model();
  Rng rng(4);
  std::map<std::string, Tensor> samples;
  for (const auto& o : task.schema.graph().objects()) samples.emplace(o, task.sample(o, 1000, rng));
  double worst_residual = 0.0;
  for (double r : functoriality_residual(model, samples)) worst_residual = std::max(worst_residual, r);

  const EquivalenceChecker checker(task.schema);
  const auto paths = enumerate_all_paths(task.schema, 4);
  double worst_path = 0.0;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < paths.size(); ++i) {
    for (std::size_t j = i + 1; j < paths.size(); ++j) {
      const auto& src = path_source(task.schema.graph(), paths[i]);
      if (src != path_source(task.schema.graph(), paths[j]) ||
          path_target(task.schema.graph(), paths[i]) != path_target(task.schema.graph(), paths[j]) ||
          checker.equivalent(paths[i], paths[j]) != Equivalence::kEqual) {
        continue;
      }
      ++pairs;
      const Tensor& x = samples.at(src);
      worst_path = std::max(worst_path, max_abs_diff(model.eval_path(paths[i], x),
                                                     model.eval_path(paths[j], x)));
    }
  }
  return {worst_residual < 1e-9 && worst_path <= 1e-8 && pairs > 0,
          "max relation residual " + g(worst_residual) + ", " + std::to_string(pairs) +
              " equivalent path pairs, max deviation " + g(worst_path)};
}

// ---------------------------------------------------------------------------
// Training runs shared by 5-7.

struct RunResult {
  Metrics before;
  Metrics after;
  double seconds = 0.0;
};

RunResult train_run(const TaskSpec& task, const TrainConfig& config, const NetworkOptions& nets,
                    std::size_t n_eval, std::uint64_t eval_seed) {
  const auto t0 = Clock::now();
  Trainer trainer(task, default_architecture(task, nets), default_critics(task, nets), config);
  RunResult r;
  r.before = evaluate(trainer.model(), task, n_eval, eval_seed);
  trainer.run(config.steps);
  r.after = evaluate(trainer.model(), task, n_eval, eval_seed);
  r.seconds = seconds_since(t0);
  return r;
}

double energy_of(const Metrics& m, const std::string& arrow) {
  const auto it = std::find(m.energy_arrows.begin(), m.energy_arrows.end(), arrow);
  if (it == m.energy_arrows.end()) throw std::logic_error("no energy for " + arrow);
  return m.energy[static_cast<std::size_t>(it - m.energy_arrows.begin())];
}

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

const std::uint64_t kSeeds[] = {1, 2, 3};

// Step size used by the training criteria; see README.
constexpr double kTrainAlpha = 1e-3;
constexpr std::size_t kCycleSteps = 12000;
constexpr std::size_t kAblationSteps = 4000;
constexpr std::size_t kProductSteps = 10000;
// The product critic needs larger batches to pin down the latent factor.
constexpr std::size_t kProductBatch = 256;

TrainConfig training_config(std::uint64_t seed, std::size_t steps) {
  TrainConfig c;
  c.seed = seed;
  c.steps = steps;
  c.adam.alpha = kTrainAlpha;
  return c;
}

// 5. Two-domain training.
Outcome cycle_training() {
  const TaskSpec task = gen_cyclegan_toy(7, 2048);
  std::size_t passed = 0;
  double secs = 0.0;
  std::string detail;
  for (auto seed : kSeeds) {
    const RunResult r = train_run(task, training_config(seed, kCycleSteps), {}, 256, 1000 + seed);
    secs += r.seconds;
    const double e0 = energy_of(r.before, "f"), e1 = energy_of(r.after, "f");
    const bool ok = r.after.residuals[0] < 0.1 && r.after.residuals[1] < 0.1 && e1 < 0.25 * e0;
    passed += ok ? 1 : 0;
    detail += " seed " + std::to_string(seed) + ": cycle " + g(r.after.residuals[0]) + "/" +
              g(r.after.residuals[1]) + " energy " + g(e1) + " of " + g(e0) +
              (ok ? " ok;" : " miss;");
    std::fprintf(stderr, "  cyclegan seed %llu done in %.0f s\n",
                 static_cast<unsigned long long>(seed), r.seconds);
  }
  return {passed >= 2 && secs < 15 * 60.0,
          std::to_string(passed) + "/3 seeds," + detail + fmt(" %.0f s", secs)};
}

// 6. Without the path-equivalence weight the residual stays higher.
Outcome gamma_ablation() {
  const TaskSpec task = gen_cyclegan_toy(7, 2048);
  std::size_t better = 0;
  std::string detail;
  for (auto seed : kSeeds) {
    TrainConfig with = training_config(seed, kAblationSteps);
    TrainConfig without = with;
    without.gamma = 0.0;
    const double r20 = mean_of(train_run(task, with, {}, 256, 1000 + seed).after.residuals);
    const double r0 = mean_of(train_run(task, without, {}, 256, 1000 + seed).after.residuals);
    better += r20 < r0 ? 1 : 0;
    detail += " seed " + std::to_string(seed) + ": " + g(r20) + " vs " + g(r0) + ";";
  }
  return {better == 3, std::to_string(better) + "/3 seeds at " + std::to_string(kAblationSteps) +
                           " steps (gamma 20 vs 0):" + detail};
}

// 7. Product task: generation, reconstruction and latent consistency.
Outcome product_training() {
  const TaskSpec task = gen_product_toy(7, 2048);
  const std::string c = task.product->compose_arrow;
  std::size_t passed = 0;
  double secs = 0.0;
  std::string detail;
  for (auto seed : kSeeds) {
    TrainConfig cfg = training_config(seed, kProductSteps);
    cfg.batch_size = kProductBatch;
    const RunResult r = train_run(task, cfg, {}, 512, 1000 + seed);
    secs += r.seconds;
    const double e0 = energy_of(r.before, c), e1 = energy_of(r.after, c);
    const double recon = *r.after.reconstruction_error;
    const double spread = *r.after.latent_spread, attr = *r.after.attribute_std;
    const bool ok = e1 < 0.25 * e0 && recon < 0.15 && spread < 0.5 * attr;
    passed += ok ? 1 : 0;
    detail += " seed " + std::to_string(seed) + ": energy " + g(e1) + " of " + g(e0) +
              " recon " + g(recon) + " spread " + g(spread) + " of " + g(attr) +
              (ok ? " ok;" : " miss;");
    std::fprintf(stderr, "  product seed %llu done in %.0f s\n",
                 static_cast<unsigned long long>(seed), r.seconds);
  }
  return {passed >= 2 && secs < 20 * 60.0,
          std::to_string(passed) + "/3 seeds," + detail + fmt(" %.0f s", secs)};
}

// ---------------------------------------------------------------------------
// 8. Restriction to a dataset on a chain A -f-> B -g-> C.

Outcome restriction_closure() {
  const Schema s = parse_schema("schema Chain { objects: A, B, C arrows: f : A -> B, g : B -> C }");
  ParamFn f = fixed_affine(Tensor::matrix({{1, 2}, {0, 1}}), Tensor::vector({0, 0}));
  ParamFn h = fixed_affine(Tensor::matrix({{0, 1}, {1, 0}}), Tensor::vector({0.5, -0.25}));
  auto arch = std::make_shared<const Architecture>(
      s, std::map<std::string, std::size_t>{{"A", 2}, {"B", 2}, {"C", 2}},
      std::map<std::string, ParamFn>{{"f", f}, {"g", h}});
  const Model model(arch, ParameterAssignment::zeros(*arch));
  const EmbeddingSpec emb({{"A", 2}, {"B", 2}, {"C", 2}});
  // B's first point is also f's image of A's first point.
  const DatasetFunctor data(emb, {{"A", Tensor::matrix({{1, 0}, {0, 1}, {1, 1}})},
                                  {"B", Tensor::matrix({{1, 0}, {3, 3}})}});
  const PointFamily expected{
      {"A", {Tensor::vector({1, 0}), Tensor::vector({0, 1}), Tensor::vector({1, 1})}},
      {"B", {Tensor::vector({1, 0}), Tensor::vector({3, 3}), Tensor::vector({2, 1}),
             Tensor::vector({3, 1})}},
      {"C", {Tensor::vector({0.5, 0.75}), Tensor::vector({3.5, 2.75}),
             Tensor::vector({1.5, 1.75}), Tensor::vector({1.5, 2.75})}}};
  const PointFamily got = restrict_to_dataset(model, data);
  const bool exact = same_point_sets(got, expected);
  const bool fixed = same_point_sets(closure_step(model, got), got);
  std::string sizes;
  for (const auto& [o, pts] : got) sizes += " " + o + "=" + std::to_string(pts.size());
  return {exact && fixed, std::string("closure") + (exact ? " matches" : " differs") +
                              " (" + sizes.substr(1) + "), extra step " +
                              (fixed ? "is a fixed point" : "adds points")};
}

// ---------------------------------------------------------------------------
// 9. Two demo runs with the same seed.

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome demo_determinism(const std::string& cli) {
  if (cli.empty()) return {false, "no --cli given"};
  const fs::path root = fs::temp_directory_path() / ("functorium-accept-" + std::to_string(::getpid()));
  fs::remove_all(root);
  std::vector<std::string> logs;
  for (int i = 0; i < 2; ++i) {
    const fs::path out = root / ("run" + std::to_string(i));
    const std::string cmd = "\"" + cli + "\" demo cyclegan-toy --seed 7 --out \"" + out.string() +
                            "\" > \"" + (root / "stdout.txt").string() + "\" 2>&1";
    fs::create_directories(root);
    if (std::system(cmd.c_str()) != 0) {
      fs::remove_all(root);
      return {false, "demo run " + std::to_string(i + 1) + " failed"};
    }
    logs.push_back(read_file(out / "train_log.csv"));
  }
  fs::remove_all(root);
  const bool same = !logs[0].empty() && logs[0] == logs[1];
  return {same, std::to_string(logs[0].size()) + "-byte train logs " +
                    (same ? "identical" : "differ")};
}

}  // namespace

int main(int argc, char** argv) {
  std::string cli;
  std::set<int> only;
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--cli" && i + 1 < argc) {
      cli = argv[++i];
    } else {
      only.insert(std::atoi(a.c_str()));
    }
  }
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"rewriting agrees with congruence closure", rewriting},
      {"autodiff matches central differences", autodiff_soundness},
      {"para composition is functorial", para_functoriality},
      {"oracle model is exact", oracle_semantics},
      {"two-domain training", cycle_training},
      {"gamma ablation", gamma_ablation},
      {"product task training", product_training},
      {"restriction closure", restriction_closure},
      {"demo determinism", [&] { return demo_determinism(cli); }},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int number = static_cast<int>(i + 1);
    if (!only.empty() && !only.count(number)) continue;
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += o.pass ? 0 : 1;
    std::printf("%s %d %s: %s\n", o.pass ? "PASS" : "FAIL", number, criteria[i].first.c_str(),
                o.detail.c_str());
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
