#include "functorium/checkpoint.hpp"

#include <sstream>

#include "functorium/io.hpp"

namespace functorium {

namespace {

void write_block(std::string& out, const char* kind, const std::string& name, const Tensor& t) {
  out += std::string(kind) + " " + name + " " + std::to_string(t.size()) + "\n";
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (i) out += " ";
    out += format_double(t[i]);
  }
  out += "\n";
}

class LineReader {
 public:
  explicit LineReader(const std::string& text) : in_(text) {}

  std::string next() {
    std::string line;
    if (!std::getline(in_, line)) throw CheckpointError("truncated checkpoint at line " + std::to_string(lineno_ + 1));
    ++lineno_;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return line;
  }

  /// Splits "<keyword> rest" and checks the keyword.
  std::string expect(const std::string& keyword) {
    std::string line = next();
    if (line.rfind(keyword + " ", 0) != 0 && line != keyword) {
      fail("expected '" + keyword + "'");
    }
    return line.size() > keyword.size() ? line.substr(keyword.size() + 1) : std::string();
  }

  [[noreturn]] void fail(const std::string& msg) const {
    throw CheckpointError("checkpoint line " + std::to_string(lineno_) + ": " + msg);
  }

 private:
  std::istringstream in_;
  std::size_t lineno_ = 0;
};

std::size_t parse_count(LineReader& r, const std::string& s) {
  try {
    std::size_t pos = 0;
    const unsigned long long v = std::stoull(s, &pos);
    if (pos != s.size()) r.fail("bad count '" + s + "'");
    return static_cast<std::size_t>(v);
  } catch (const std::logic_error&) {
    r.fail("bad count '" + s + "'");
  }
}

void read_blocks(LineReader& r, const std::string& header, const std::string& kind,
                 std::map<std::string, Tensor>& out) {
  const std::size_t count = parse_count(r, r.expect(header));
  for (std::size_t i = 0; i < count; ++i) {
    std::istringstream fields(r.expect(kind));
    std::string name, dim_text;
    if (!(fields >> name >> dim_text)) r.fail("expected '" + kind + " <name> <dim>'");
    const std::size_t dim = parse_count(r, dim_text);
    std::istringstream values(r.next());
    std::vector<double> v;
    std::string tok;
    while (values >> tok) {
      try {
        v.push_back(parse_double(tok));
      } catch (const std::invalid_argument& e) {
        r.fail(e.what());
      }
    }
    if (v.size() != dim) {
      r.fail(kind + " '" + name + "' declares " + std::to_string(dim) + " values, found " +
             std::to_string(v.size()));
    }
    Tensor t = Tensor::vector(std::move(v));
    if (!t.all_finite()) r.fail("non-finite value in " + kind + " '" + name + "'");
    if (!out.emplace(name, std::move(t)).second) r.fail("duplicate " + kind + " '" + name + "'");
  }
}

}  // namespace

std::string serialize_checkpoint(const Checkpoint& ckpt) {
  std::string out = "functorium-checkpoint " + std::to_string(kCheckpointVersion) + "\n";
  out += "schema " + ckpt.schema_name + "\n";
  out += "arch " + ckpt.arch + "\n";
  out += "generators " + std::to_string(ckpt.generators.size()) + "\n";
  for (const auto& [name, t] : ckpt.generators) write_block(out, "generator", name, t);
  out += "critics " + std::to_string(ckpt.critics.size()) + "\n";
  for (const auto& [name, t] : ckpt.critics) write_block(out, "critic", name, t);
  out += "end\n";
  return out;
}

Checkpoint deserialize_checkpoint(const std::string& text) {
  LineReader r(text);
  const std::string version = r.expect("functorium-checkpoint");
  if (version != std::to_string(kCheckpointVersion)) {
    r.fail("unsupported checkpoint version '" + version + "'");
  }
  Checkpoint ckpt;
  ckpt.schema_name = r.expect("schema");
  ckpt.arch = r.expect("arch");
  read_blocks(r, "generators", "generator", ckpt.generators);
  read_blocks(r, "critics", "critic", ckpt.critics);
  r.expect("end");
  return ckpt;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  write_file_atomic(path, serialize_checkpoint(ckpt));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  return deserialize_checkpoint(read_file(path));
}

}  // namespace functorium
