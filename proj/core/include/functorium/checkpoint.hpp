#pragma once

// Text checkpoint format, version 1:
//
//   functorium-checkpoint 1
//   schema <schema name>
//   arch <architecture descriptor, rest of line>
//   generators <count>
//   generator <arrow> <param_dim>
//   <param_dim whitespace-separated values>      (one line; empty if 0)
//   ...
//   critics <count>
//   critic <object> <param_dim>
//   <values>
//   ...
//   end
//
// Values use the shortest decimal form that parses back to the same double,
// so a write/read round trip is bit-exact.

#include <filesystem>
#include <map>
#include <string>

#include "functorium/tensor.hpp"

namespace functorium {

inline constexpr int kCheckpointVersion = 1;

struct Checkpoint {
  std::string schema_name;
  std::string arch;  ///< free-form descriptor used to rebuild the architecture
  std::map<std::string, Tensor> generators;
  std::map<std::string, Tensor> critics;

  friend bool operator==(const Checkpoint&, const Checkpoint&) = default;
};

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string serialize_checkpoint(const Checkpoint& ckpt);
Checkpoint deserialize_checkpoint(const std::string& text);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace functorium
