#pragma once

// The functorium command-line tool as a library, so tests can drive it
// in-process.

#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "functorium/functor_model.hpp"
#include "functorium/para.hpp"
#include "functorium/task.hpp"
#include "functorium/trainer.hpp"

namespace functorium::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitMismatch = 2;
inline constexpr int kExitNumeric = 3;

class CliError : public std::runtime_error {
 public:
  CliError(int code, const std::string& message) : std::runtime_error(message), code_(code) {}
  int code() const noexcept { return code_; }

 private:
  int code_;
};

struct NetSpec {
  std::vector<std::size_t> hidden;
  Activation activation = Activation::kTanh;
};

struct RunConfig {
  std::string task;         ///< builtin task name
  std::string schema_path;  ///< or a schema file plus `data_dir`
  std::string data_dir;
  std::string out_dir;
  TrainConfig train;
  NetworkOptions nets;
  bool oracle_arch = false;  ///< use the task's reference maps as generators
  std::map<std::string, NetSpec> generator_nets;  ///< per-arrow overrides
  std::map<std::string, NetSpec> critic_nets;     ///< per-object overrides
  std::map<std::string, std::size_t> dims;        ///< object dims for CSV tasks
  std::size_t n_data = 2048;
  std::size_t n_eval = 512;
  std::uint64_t eval_seed = 1000;
  std::size_t checkpoint_every = 0;
  std::size_t threads = 1;
};

/// `key = value` lines; `#` starts a comment. Throws CliError(1).
std::map<std::string, std::string> parse_key_values(const std::string& text);

/// Applies one setting. Keys: task, schema, data, out, seed, steps, gamma,
/// lambda_gp, batch, init_std, alpha, beta1, beta2, epsilon,
/// n_critic_warmup_steps, n_critic_warmup, n_critic, arch (mlp | oracle),
/// generator.hidden, generator.activation, critic.hidden, critic.activation,
/// generator.<arrow>.hidden, generator.<arrow>.activation,
/// critic.<object>.hidden, critic.<object>.activation, dim.<object>, n_data,
/// n_eval, eval_seed, checkpoint_every. Throws CliError(1).
void apply_setting(RunConfig& config, const std::string& key, const std::string& value);

/// Resolved settings as `key = value` text that apply_setting reads back.
std::string format_config(const RunConfig& config);

/// FUNCTORIUM_THREADS, default 1. Throws CliError(1) on a bad value.
std::size_t threads_from_env();

/// Builtin task from `task`, or schema file plus CSV directory. Object dims
/// come from dim.<object> settings, then from CSV headers.
TaskSpec load_task(const RunConfig& config, std::vector<std::string>& warnings);

struct Networks {
  std::shared_ptr<const Architecture> arch;
  std::map<std::string, ParamFn> critics;
  std::string descriptor;  ///< stored in checkpoints
};

Networks build_networks(const TaskSpec& task, const RunConfig& config);

/// Rebuilds generators from a checkpoint descriptor ("oracle" or
/// "mlp <arrow>=<widths>:<activation> ..."). Throws CliError(2) when it does
/// not fit the task.
std::shared_ptr<const Architecture> architecture_from_descriptor(const TaskSpec& task,
                                                                 const std::string& descriptor);

struct ScatterLayer {
  std::string label;
  std::string color;
  Tensor points;  ///< [n, 2]
};

/// Self-contained SVG scatter plot with a legend.
std::string scatter_svg(const std::string& title, const std::vector<ScatterLayer>& layers);

/// Entry point. `args` excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace functorium::cli
