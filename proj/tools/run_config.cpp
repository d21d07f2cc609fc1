#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <sstream>

#include "cli.hpp"
#include "functorium/io.hpp"
#include "functorium/losses.hpp"

namespace functorium::cli {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

CliError bad_value(const std::string& key, const std::string& value, const std::string& why) {
  return CliError(kExitUsage, "bad value '" + value + "' for " + key + ": " + why);
}

double to_double(const std::string& key, const std::string& value) {
  try {
    return parse_double(value);
  } catch (const std::invalid_argument&) {
    throw bad_value(key, value, "expected a number");
  }
}

std::uint64_t to_unsigned(const std::string& key, const std::string& value) {
  if (value.empty() || value.find_first_not_of("0123456789") != std::string::npos) {
    throw bad_value(key, value, "expected a non-negative integer");
  }
  try {
    return std::stoull(value);
  } catch (const std::out_of_range&) {
    throw bad_value(key, value, "out of range");
  }
}

std::vector<std::size_t> to_widths(const std::string& key, const std::string& value) {
  std::vector<std::size_t> out;
  if (trim(value).empty() || trim(value) == "none") return out;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto w = to_unsigned(key, trim(item));
    if (w == 0) throw bad_value(key, value, "widths must be positive");
    out.push_back(static_cast<std::size_t>(w));
  }
  return out;
}

Activation to_activation(const std::string& key, const std::string& value) {
  try {
    return parse_activation(value);
  } catch (const std::invalid_argument&) {
    throw bad_value(key, value, "expected none, tanh, relu or sigmoid");
  }
}

std::string widths_text(const std::vector<std::size_t>& w) {
  if (w.empty()) return "none";
  std::string s;
  for (std::size_t i = 0; i < w.size(); ++i) s += (i ? "," : "") + std::to_string(w[i]);
  return s;
}

NetSpec& override_for(std::map<std::string, NetSpec>& table, const std::string& name,
                      const std::vector<std::size_t>& hidden, Activation act) {
  auto it = table.find(name);
  if (it == table.end()) it = table.emplace(name, NetSpec{hidden, act}).first;
  return it->second;
}

}  // namespace

std::map<std::string, std::string> parse_key_values(const std::string& text) {
  std::map<std::string, std::string> out;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw CliError(kExitUsage, "config line " + std::to_string(lineno) + ": expected key = value");
    }
    const std::string key = trim(line.substr(0, eq));
    if (key.empty()) throw CliError(kExitUsage, "config line " + std::to_string(lineno) + ": empty key");
    out[key] = trim(line.substr(eq + 1));
  }
  return out;
}

void apply_setting(RunConfig& c, const std::string& key, const std::string& value) {
  TrainConfig& t = c.train;
  if (key == "task") c.task = value;
  else if (key == "schema") c.schema_path = value;
  else if (key == "data") c.data_dir = value;
  else if (key == "out") c.out_dir = value;
  else if (key == "seed") t.seed = to_unsigned(key, value);
  else if (key == "steps") t.steps = to_unsigned(key, value);
  else if (key == "gamma") t.gamma = to_double(key, value);
  else if (key == "lambda_gp") t.lambda_gp = to_double(key, value);
  else if (key == "batch") t.batch_size = to_unsigned(key, value);
  else if (key == "init_std") t.init_std = to_double(key, value);
  else if (key == "alpha") t.adam.alpha = to_double(key, value);
  else if (key == "beta1") t.adam.beta1 = to_double(key, value);
  else if (key == "beta2") t.adam.beta2 = to_double(key, value);
  else if (key == "epsilon") t.adam.epsilon = to_double(key, value);
  else if (key == "n_critic_warmup_steps") t.n_critic.warmup_steps = to_unsigned(key, value);
  else if (key == "n_critic_warmup") t.n_critic.warmup_value = to_unsigned(key, value);
  else if (key == "n_critic") t.n_critic.steady_value = to_unsigned(key, value);
  else if (key == "n_data") c.n_data = to_unsigned(key, value);
  else if (key == "n_eval") c.n_eval = to_unsigned(key, value);
  else if (key == "eval_seed") c.eval_seed = to_unsigned(key, value);
  else if (key == "checkpoint_every") c.checkpoint_every = to_unsigned(key, value);
  else if (key == "arch") {
    if (value != "mlp" && value != "oracle") throw bad_value(key, value, "expected mlp or oracle");
    c.oracle_arch = value == "oracle";
  } else if (key == "generator.hidden") c.nets.generator_hidden = to_widths(key, value);
  else if (key == "generator.activation") c.nets.generator_activation = to_activation(key, value);
  else if (key == "critic.hidden") c.nets.critic_hidden = to_widths(key, value);
  else if (key == "critic.activation") c.nets.critic_activation = to_activation(key, value);
  else if (key.rfind("dim.", 0) == 0 && key.size() > 4) {
    const auto d = to_unsigned(key, value);
    if (d == 0) throw bad_value(key, value, "dimensions must be positive");
    c.dims[key.substr(4)] = static_cast<std::size_t>(d);
  } else {
    // generator.<arrow>.<field> / critic.<object>.<field>
    const auto first = key.find('.');
    const auto last = key.rfind('.');
    if (first == std::string::npos || first == last) throw CliError(kExitUsage, "unknown setting '" + key + "'");
    const std::string kind = key.substr(0, first);
    const std::string name = key.substr(first + 1, last - first - 1);
    const std::string field = key.substr(last + 1);
    if ((kind != "generator" && kind != "critic") || name.empty() ||
        (field != "hidden" && field != "activation")) {
      throw CliError(kExitUsage, "unknown setting '" + key + "'");
    }
    const bool gen = kind == "generator";
    NetSpec& spec = gen ? override_for(c.generator_nets, name, c.nets.generator_hidden,
                                       c.nets.generator_activation)
                        : override_for(c.critic_nets, name, c.nets.critic_hidden,
                                       c.nets.critic_activation);
    if (field == "hidden") spec.hidden = to_widths(key, value);
    else spec.activation = to_activation(key, value);
  }
}

std::string format_config(const RunConfig& c) {
  const TrainConfig& t = c.train;
  std::string s;
  auto line = [&](const std::string& k, const std::string& v) {
    if (!v.empty()) s += k + " = " + v + "\n";
  };
  line("task", c.task);
  line("schema", c.schema_path);
  line("data", c.data_dir);
  line("seed", std::to_string(t.seed));
  line("steps", std::to_string(t.steps));
  line("gamma", format_double(t.gamma));
  line("lambda_gp", format_double(t.lambda_gp));
  line("batch", std::to_string(t.batch_size));
  line("init_std", format_double(t.init_std));
  line("alpha", format_double(t.adam.alpha));
  line("beta1", format_double(t.adam.beta1));
  line("beta2", format_double(t.adam.beta2));
  line("epsilon", format_double(t.adam.epsilon));
  line("n_critic_warmup_steps", std::to_string(t.n_critic.warmup_steps));
  line("n_critic_warmup", std::to_string(t.n_critic.warmup_value));
  line("n_critic", std::to_string(t.n_critic.steady_value));
  line("arch", c.oracle_arch ? "oracle" : "mlp");
  line("generator.hidden", widths_text(c.nets.generator_hidden));
  line("generator.activation", to_string(c.nets.generator_activation));
  line("critic.hidden", widths_text(c.nets.critic_hidden));
  line("critic.activation", to_string(c.nets.critic_activation));
  for (const auto& [n, spec] : c.generator_nets) {
    line("generator." + n + ".hidden", widths_text(spec.hidden));
    line("generator." + n + ".activation", to_string(spec.activation));
  }
  for (const auto& [n, spec] : c.critic_nets) {
    line("critic." + n + ".hidden", widths_text(spec.hidden));
    line("critic." + n + ".activation", to_string(spec.activation));
  }
  for (const auto& [o, d] : c.dims) line("dim." + o, std::to_string(d));
  line("n_data", std::to_string(c.n_data));
  line("n_eval", std::to_string(c.n_eval));
  line("eval_seed", std::to_string(c.eval_seed));
  line("checkpoint_every", std::to_string(c.checkpoint_every));
  return s;
}

std::size_t threads_from_env() {
  const char* v = std::getenv("FUNCTORIUM_THREADS");
  if (v == nullptr || *v == '\0') return 1;
  const auto n = to_unsigned("FUNCTORIUM_THREADS", v);
  if (n == 0) throw bad_value("FUNCTORIUM_THREADS", v, "must be at least 1");
  return static_cast<std::size_t>(n);
}

TaskSpec load_task(const RunConfig& c, std::vector<std::string>& warnings) {
  if (!c.task.empty()) {
    if (!c.schema_path.empty() || !c.data_dir.empty()) {
      throw CliError(kExitUsage, "--task cannot be combined with --schema or --data");
    }
    const auto names = builtin_task_names();
    if (std::find(names.begin(), names.end(), c.task) == names.end()) {
      std::string list;
      for (const auto& n : names) list += (list.empty() ? "" : ", ") + n;
      throw CliError(kExitUsage, "unknown task '" + c.task + "'; valid names: " + list);
    }
    if (c.n_data == 0) throw CliError(kExitUsage, "n_data must be positive");
    return make_builtin_task(c.task, c.train.seed, c.n_data);
  }
  if (c.schema_path.empty() || c.data_dir.empty()) {
    throw CliError(kExitUsage, "give --task, or --schema together with --data");
  }
  Schema schema;
  try {
    schema = parse_schema(read_file(c.schema_path));
  } catch (const SchemaError& e) {
    throw CliError(kExitUsage, c.schema_path + ":" + e.what());
  } catch (const std::runtime_error& e) {
    throw CliError(kExitUsage, e.what());
  }
  std::map<std::string, std::size_t> dims;
  for (const auto& object : schema.graph().objects()) {
    if (auto it = c.dims.find(object); it != c.dims.end()) {
      dims[object] = it->second;
      continue;
    }
    const auto file = std::filesystem::path(c.data_dir) / (object + ".csv");
    if (!std::filesystem::exists(file)) {
      throw CliError(kExitMismatch, "no dimension for object '" + object + "': add dim." + object +
                                        " to the config or provide " + file.string());
    }
    try {
      dims[object] = parse_dataset_csv(read_file(file)).second.cols();
    } catch (const NumericError& e) {
      throw CliError(kExitNumeric, file.string() + ": " + e.what());
    } catch (const std::exception& e) {
      throw CliError(kExitMismatch, file.string() + ": " + e.what());
    }
  }
  for (const auto& [o, d] : c.dims) {
    if (!schema.graph().has_object(o)) {
      throw CliError(kExitMismatch, "dim." + o + " names no object of schema '" + schema.name() + "'");
    }
  }
  EmbeddingSpec embedding(dims);
  DatasetFunctor data;
  try {
    data = load_dataset(c.data_dir, embedding, &warnings);
  } catch (const NumericError& e) {
    throw CliError(kExitNumeric, e.what());
  } catch (const std::exception& e) {
    throw CliError(kExitMismatch, e.what());
  }
  const std::string name = std::filesystem::path(c.schema_path).stem().string();
  TaskSpec task = make_task(name, std::move(schema), std::move(embedding), std::move(data));
  try {
    task.validate();
  } catch (const std::exception& e) {
    throw CliError(kExitMismatch, e.what());
  }
  return task;
}

namespace {

MLPSpec spec_for(std::size_t in, const NetSpec& net, std::size_t out) {
  std::vector<std::size_t> widths{in};
  widths.insert(widths.end(), net.hidden.begin(), net.hidden.end());
  widths.push_back(out);
  return MLPSpec::uniform(std::move(widths), net.activation);
}

std::string describe(const std::string& name, const MLPSpec& spec) {
  Activation act = spec.hidden_activations.empty() ? Activation::kNone : spec.hidden_activations[0];
  return name + "=" + widths_text(spec.widths) + ":" + to_string(act);
}

}  // namespace

Networks build_networks(const TaskSpec& task, const RunConfig& c) {
  for (const auto& [a, spec] : c.generator_nets) {
    if (task.schema.graph().find_arrow(a) == nullptr) {
      throw CliError(kExitUsage, "generator." + a + " names no arrow of schema '" + task.schema.name() + "'");
    }
  }
  const auto critic_objs = critic_objects(task);
  for (const auto& [o, spec] : c.critic_nets) {
    if (std::find(critic_objs.begin(), critic_objs.end(), o) == critic_objs.end()) {
      throw CliError(kExitUsage, "critic." + o + " names no object that gets a critic");
    }
  }
  Networks n;
  if (c.oracle_arch) {
    if (!task.oracle) throw CliError(kExitUsage, "task '" + task.name + "' has no reference maps");
    n.arch = task.oracle->architecture();
    n.descriptor = "oracle";
  } else {
    std::map<std::string, ParamFn> gens;
    n.descriptor = "mlp";
    for (const auto& a : task.schema.graph().arrows()) {
      auto it = c.generator_nets.find(a.name);
      const NetSpec net = it != c.generator_nets.end()
                              ? it->second
                              : NetSpec{c.nets.generator_hidden, c.nets.generator_activation};
      const MLPSpec spec = spec_for(task.object_dim(a.source), net, task.object_dim(a.target));
      n.descriptor += " " + describe(a.name, spec);
      gens.emplace(a.name, mlp(spec));
    }
    n.arch = std::make_shared<const Architecture>(task.schema, task.object_dims(), std::move(gens));
  }
  for (const auto& o : critic_objs) {
    auto it = c.critic_nets.find(o);
    const NetSpec net =
        it != c.critic_nets.end() ? it->second : NetSpec{c.nets.critic_hidden, c.nets.critic_activation};
    n.critics.emplace(o, mlp(spec_for(task.object_dim(o), net, 1)));
  }
  return n;
}

std::shared_ptr<const Architecture> architecture_from_descriptor(const TaskSpec& task,
                                                                 const std::string& descriptor) {
  std::istringstream in(descriptor);
  std::string kind;
  in >> kind;
  if (kind == "oracle") {
    if (!task.oracle) throw CliError(kExitMismatch, "checkpoint uses reference maps but task '" + task.name + "' has none");
    return task.oracle->architecture();
  }
  if (kind != "mlp") throw CliError(kExitMismatch, "unknown architecture descriptor '" + descriptor + "'");
  std::map<std::string, ParamFn> gens;
  std::string item;
  while (in >> item) {
    const auto eq = item.find('=');
    const auto colon = item.rfind(':');
    if (eq == std::string::npos || colon == std::string::npos || colon < eq) {
      throw CliError(kExitMismatch, "malformed architecture entry '" + item + "'");
    }
    const std::string arrow = item.substr(0, eq);
    std::vector<std::size_t> widths;
    Activation act = Activation::kNone;
    try {
      widths = to_widths("arch", item.substr(eq + 1, colon - eq - 1));
      act = to_activation("arch", item.substr(colon + 1));
    } catch (const CliError& e) {
      throw CliError(kExitMismatch, e.what());
    }
    if (widths.size() < 2) throw CliError(kExitMismatch, "architecture entry '" + item + "' needs two widths");
    gens.emplace(arrow, mlp(MLPSpec::uniform(widths, act)));
  }
  try {
    return std::make_shared<const Architecture>(task.schema, task.object_dims(), std::move(gens));
  } catch (const std::invalid_argument& e) {
    throw CliError(kExitMismatch, std::string("checkpoint architecture does not fit task '") +
                                      task.name + "': " + e.what());
  }
}

}  // namespace functorium::cli
