#include <chrono>
#include <filesystem>
#include <sstream>

#include <CLI11.hpp>

#include "cli.hpp"
#include "functorium/checkpoint.hpp"
#include "functorium/evaluate.hpp"
#include "functorium/io.hpp"
#include "functorium/rewrite.hpp"

namespace functorium::cli {

namespace fs = std::filesystem;

namespace {

constexpr std::size_t kMaxPlotPoints = 512;

// Flag values as typed; applied over the config file in a fixed order.
struct SharedFlags {
  std::string schema, task, data, config, out, seed, steps, gamma, batch, init_std;
  std::string checkpoint_every;
  std::vector<std::string> settings;
};

void add_shared_flags(CLI::App* cmd, SharedFlags& f, bool with_task) {
  if (with_task) {
    cmd->add_option("--schema", f.schema, "Schema file (use with --data)");
    cmd->add_option("--task", f.task, "Builtin task: cyclegan-toy or product-toy");
    cmd->add_option("--data", f.data, "Directory of <object>.csv files");
  }
  cmd->add_option("--config", f.config, "key = value settings file; flags override it");
  cmd->add_option("--out", f.out, "Output directory");
  cmd->add_option("--seed", f.seed, "Seed for data generation, initialization and batches");
  cmd->add_option("--steps", f.steps, "Training time steps");
  cmd->add_option("--gamma", f.gamma, "Path-equivalence weight (0 disables the regularizer)");
  cmd->add_option("--batch", f.batch, "Batch size");
  cmd->add_option("--init-std", f.init_std, "Standard deviation of initial parameters");
  cmd->add_option("--set", f.settings, "Extra key=value setting, repeatable (see README)");
}

RunConfig resolve(const SharedFlags& f) {
  RunConfig c;
  if (!f.config.empty()) {
    std::string text;
    try {
      text = read_file(f.config);
    } catch (const std::exception& e) {
      throw CliError(kExitUsage, e.what());
    }
    for (const auto& [k, v] : parse_key_values(text)) apply_setting(c, k, v);
  }
  const std::pair<const char*, const std::string*> flags[] = {
      {"schema", &f.schema}, {"task", &f.task},   {"data", &f.data},
      {"out", &f.out},       {"seed", &f.seed},   {"steps", &f.steps},
      {"gamma", &f.gamma},   {"batch", &f.batch}, {"init_std", &f.init_std},
      {"checkpoint_every", &f.checkpoint_every}};
  for (const auto& [key, value] : flags) {
    if (!value->empty()) apply_setting(c, key, *value);
  }
  for (const auto& s : f.settings) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw CliError(kExitUsage, "--set expects key=value, got '" + s + "'");
    apply_setting(c, s.substr(0, eq), s.substr(eq + 1));
  }
  try {
    c.train.validate();
  } catch (const std::invalid_argument& e) {
    throw CliError(kExitUsage, e.what());
  }
  if (c.n_eval == 0) throw CliError(kExitUsage, "n_eval must be positive");
  c.threads = threads_from_env();
  return c;
}

void write_out(const fs::path& path, const std::string& content) {
  try {
    fs::create_directories(path.parent_path());
    write_file_atomic(path, content);
  } catch (const std::exception& e) {
    throw CliError(kExitUsage, "cannot write " + path.string() + ": " + e.what());
  }
}

Checkpoint make_checkpoint(const TaskSpec& task, const std::string& descriptor, const Model& model,
                           const CriticSet& critics) {
  Checkpoint ck;
  ck.schema_name = task.schema.name();
  ck.arch = descriptor;
  ck.generators = model.params().entries();
  ck.critics = critics.params;
  return ck;
}

std::string summary(const Metrics& m) {
  std::ostringstream s;
  for (std::size_t i = 0; i < m.residuals.size(); ++i) {
    s << (i ? ", " : "") << "residual " << m.relation_labels[i] << " " << format_double(m.residuals[i]);
  }
  for (std::size_t i = 0; i < m.energy.size(); ++i) {
    s << ", energy " << m.energy_arrows[i] << " " << format_double(m.energy[i]);
  }
  if (m.reconstruction_error) s << ", reconstruction " << format_double(*m.reconstruction_error);
  if (m.latent_spread) s << ", latent spread " << format_double(*m.latent_spread);
  if (m.attribute_std) s << ", attribute std " << format_double(*m.attribute_std);
  return s.str();
}

Tensor head_rows(const Tensor& t, std::size_t n) {
  const std::size_t k = std::min(n, t.rows());
  Tensor out(Shape{k, t.cols()});
  for (std::size_t r = 0; r < k; ++r)
    for (std::size_t c = 0; c < t.cols(); ++c) out.at(r, c) = t.at(r, c);
  return out;
}

// One SVG per 2-D object: held-out points, generator images and round trips.
// Returns one note per object.
std::vector<std::string> write_plots(const Model& model, const TaskSpec& task, const RunConfig& c,
                                     const fs::path& dir) {
  const DatasetFunctor data = task.resample ? task.resample(c.eval_seed, c.n_eval) : task.dataset;
  Rng rng = Rng(c.eval_seed).split(8);
  std::map<std::string, Tensor> held;
  auto batch = [&](const std::string& o) -> const Tensor& {
    auto it = held.find(o);
    if (it == held.end()) it = held.emplace(o, head_rows(heldout_batch(task, o, data, rng), kMaxPlotPoints)).first;
    return it->second;
  };
  const auto& schema = task.schema;
  std::vector<std::string> notes;
  for (const auto& o : schema.graph().objects()) {
    if (task.object_dim(o) != 2) {
      notes.push_back("no plot for " + o + " (dimension " + std::to_string(task.object_dim(o)) + ")");
      continue;
    }
    std::vector<ScatterLayer> layers;
    if (task.samplable(o, data)) layers.push_back({o + " held-out", "#555555", batch(o)});
    for (const auto* a : schema.graph().arrows_into(o)) {
      if (!task.samplable(a->source, data)) continue;
      layers.push_back({a->name + "(" + a->source + ")", "#1f77b4", model.eval_arrow(a->name, batch(a->source))});
    }
    if (task.samplable(o, data)) {
      for (const auto& rel : schema.relations()) {
        if (schema.source(rel.lhs) != o || schema.target(rel.lhs) != o) continue;
        for (const Path* p : {&rel.lhs, &rel.rhs}) {
          if (p->is_identity()) continue;
          layers.push_back({p->to_string() + "(" + o + ")", "#ff7f0e", model.eval_path(*p, batch(o))});
        }
      }
    }
    if (layers.empty()) {
      notes.push_back("no plot for " + o + " (no points)");
      continue;
    }
    write_out(dir / ("plot_" + o + ".svg"), scatter_svg(schema.name() + ": " + o, layers));
    notes.push_back("plot_" + o + ".svg");
  }
  return notes;
}

struct TrainOutcome {
  Metrics metrics;
  std::vector<std::string> plot_notes;
};

TrainOutcome train_and_write(const TaskSpec& task, const RunConfig& c, const fs::path& out_dir,
                             std::ostream& out) {
  Networks nets = build_networks(task, c);
  std::optional<Trainer> trainer;
  try {
    trainer.emplace(task, nets.arch, nets.critics, c.train);
  } catch (const NumericError&) {
    throw;
  } catch (const std::invalid_argument& e) {
    throw CliError(kExitMismatch, e.what());
  }
  const auto start = std::chrono::steady_clock::now();
  trainer->run(c.train.steps, [&](const Trainer& t) {
    if (c.checkpoint_every == 0 || t.steps_done() % c.checkpoint_every != 0) return;
    const auto name = "step_" + std::to_string(t.steps_done()) + ".txt";
    write_out(out_dir / "checkpoints" / name,
              serialize_checkpoint(make_checkpoint(task, nets.descriptor, t.model(), t.critics())));
  });
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  write_out(out_dir / "train_log.csv", trainer->log().to_csv());
  write_out(out_dir / "checkpoint.txt",
            serialize_checkpoint(make_checkpoint(task, nets.descriptor, trainer->model(), trainer->critics())));
  write_out(out_dir / "config.txt", format_config(c));
  TrainOutcome o;
  o.metrics = evaluate(trainer->model(), task, c.n_eval, c.eval_seed, c.threads);
  write_out(out_dir / "metrics.csv", o.metrics.to_csv());
  o.plot_notes = write_plots(trainer->model(), task, c, out_dir);
  out << "trained " << task.name << " for " << c.train.steps << " steps in "
      << std::to_string(seconds) << " s\n";
  out << "final: " << summary(o.metrics) << "\n";
  return o;
}

// ---------------------------------------------------------------------------

int cmd_validate(const std::string& path, std::ostream& out, std::ostream& err) {
  std::string text;
  try {
    text = read_file(path);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  Schema schema;
  try {
    schema = parse_schema(text);
  } catch (const SchemaError& e) {
    err << path << ":" << e.what() << "\n";
    return kExitUsage;
  }
  const auto& g = schema.graph();
  out << "schema " << schema.name() << ": " << g.objects().size() << " objects, "
      << g.arrows().size() << " arrows, " << schema.relations().size() << " relations\n";
  EquivalenceChecker checker(schema);
  const RewriteSystem& rw = checker.rewrite_system();
  for (const auto& rel : schema.relations()) {
    auto show = [&](const Path& p) {
      auto nf = rw.normalize(p);
      return nf ? nf->to_string() : std::string("undecided");
    };
    out << "  " << rel.lhs.to_string() << " = " << rel.rhs.to_string() << "  normal forms: "
        << show(rel.lhs) << " | " << show(rel.rhs) << "\n";
  }
  out << "rewrite system: " << rw.rules().size() << " rules, "
      << (checker.confluent() ? "confluent" : "not confluent (bounded closure used)") << "\n";
  return kExitOk;
}

int cmd_train(const SharedFlags& f, std::ostream& out, std::ostream& err) {
  RunConfig c = resolve(f);
  if (c.out_dir.empty()) throw CliError(kExitUsage, "train needs --out");
  std::vector<std::string> warnings;
  TaskSpec task = load_task(c, warnings);
  for (const auto& w : warnings) err << "warning: " << w << "\n";
  TrainOutcome o = train_and_write(task, c, c.out_dir, out);
  for (const auto& n : o.plot_notes) out << "  " << n << "\n";
  return kExitOk;
}

int cmd_eval(const SharedFlags& f, const std::string& checkpoint_path, std::ostream& out,
             std::ostream& err) {
  RunConfig c = resolve(f);
  if (c.out_dir.empty()) throw CliError(kExitUsage, "eval needs --out");
  std::vector<std::string> warnings;
  TaskSpec task = load_task(c, warnings);
  for (const auto& w : warnings) err << "warning: " << w << "\n";
  Checkpoint ck;
  try {
    ck = load_checkpoint(checkpoint_path);
  } catch (const std::exception& e) {
    throw CliError(kExitMismatch, e.what());
  }
  if (ck.schema_name != task.schema.name()) {
    throw CliError(kExitMismatch, "checkpoint schema '" + ck.schema_name +
                                      "' does not match task schema '" + task.schema.name() + "'");
  }
  auto arch = architecture_from_descriptor(task, ck.arch);
  for (const auto& name : arch->generator_names()) {
    const auto it = ck.generators.find(name);
    const std::size_t want = arch->generator(name).param_dim();
    if (it == ck.generators.end() || it->second.size() != want) {
      throw CliError(kExitMismatch, "checkpoint parameters for '" + name + "' do not match the architecture (" +
                                        std::to_string(want) + " expected)");
    }
  }
  if (ck.generators.size() != arch->generator_names().size()) {
    throw CliError(kExitMismatch, "checkpoint has generators the schema does not declare");
  }
  Model model(arch, ParameterAssignment(ck.generators));
  Metrics m = evaluate(model, task, c.n_eval, c.eval_seed, c.threads);
  write_out(fs::path(c.out_dir) / "metrics.csv", m.to_csv());
  out << "evaluated " << checkpoint_path << " on " << task.name << ": " << summary(m) << "\n";
  for (const auto& n : write_plots(model, task, c, c.out_dir)) out << "  " << n << "\n";
  return kExitOk;
}

int cmd_demo(const std::string& task_name, const SharedFlags& f, std::ostream& out,
             std::ostream& err) {
  RunConfig c = resolve(f);
  c.task = task_name;
  if (c.out_dir.empty()) c.out_dir = "demo-" + task_name;
  std::vector<std::string> warnings;
  TaskSpec task = load_task(c, warnings);
  for (const auto& w : warnings) err << "warning: " << w << "\n";
  const fs::path dir = c.out_dir;
  for (const auto& object : task.dataset.objects()) {
    if (task.dataset.empty(object)) continue;
    write_out(dir / "data" / (object + ".csv"), format_dataset_csv(object, task.dataset.points(object)));
  }
  TrainOutcome o = train_and_write(task, c, dir, out);

  std::string report = "# " + task.name + " demo\n\n";
  report += "Seed " + std::to_string(c.train.seed) + ", " + std::to_string(c.train.steps) +
            " steps, gamma " + format_double(c.train.gamma) + ".\n\n";
  report += "## Metrics\n\n| metric | value |\n|---|---|\n";
  std::istringstream rows(o.metrics.to_csv());
  std::string row;
  std::getline(rows, row);
  while (std::getline(rows, row)) {
    const auto comma = row.rfind(',');
    report += "| " + row.substr(0, comma) + " | " + row.substr(comma + 1) + " |\n";
  }
  report += "\n## Plots\n\n";
  for (const auto& n : o.plot_notes) {
    report += n.rfind("plot_", 0) == 0 ? "![" + n + "](" + n + ")\n" : "- " + n + "\n";
  }
  report += "\n## Files\n\n- `config.txt`: resolved settings\n- `data/`: training points\n"
            "- `train_log.csv`: per-step losses\n- `checkpoint.txt`: final parameters\n"
            "- `metrics.csv`: held-out evaluation\n";
  write_out(dir / "report.md", report);
  out << "report written to " << (dir / "report.md").string() << "\n";
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Train and evaluate networks whose architecture follows a categorical schema."};
  app.name("functorium");
  app.require_subcommand(1);

  std::string validate_path;
  auto* validate = app.add_subcommand("validate", "Parse a schema file and report its structure");
  validate->add_option("schema", validate_path, "Schema file")->required();

  SharedFlags train_flags;
  auto* train = app.add_subcommand("train", "Train generators and critics, then evaluate");
  add_shared_flags(train, train_flags, true);
  train->add_option("--checkpoint-every", train_flags.checkpoint_every,
                    "Also write checkpoints/step_<n>.txt every n steps");

  SharedFlags eval_flags;
  std::string checkpoint_path;
  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint and draw 2-D plots");
  add_shared_flags(eval, eval_flags, true);
  eval->add_option("--checkpoint", checkpoint_path, "Checkpoint file written by train")->required();

  SharedFlags demo_flags;
  std::string demo_task;
  auto* demo = app.add_subcommand("demo", "Generate a builtin task, train, evaluate and write a report");
  demo->add_option("task", demo_task, "cyclegan-toy or product-toy")->required();
  add_shared_flags(demo, demo_flags, false);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*validate) return cmd_validate(validate_path, out, err);
    if (*train) return cmd_train(train_flags, out, err);
    if (*eval) return cmd_eval(eval_flags, checkpoint_path, out, err);
    if (*demo) return cmd_demo(demo_task, demo_flags, out, err);
  } catch (const CliError& e) {
    err << "error: " << e.what() << "\n";
    return e.code();
  } catch (const NumericError& e) {
    err << "numeric failure: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitUsage;
}

}  // namespace functorium::cli
