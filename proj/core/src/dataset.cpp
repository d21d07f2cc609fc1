#include "functorium/dataset.hpp"

#include <cctype>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "functorium/io.hpp"

namespace functorium {

EmbeddingSpec::EmbeddingSpec(std::map<std::string, std::size_t> dims) : dims_(std::move(dims)) {
  for (const auto& [name, d] : dims_) {
    if (d == 0) throw std::invalid_argument("embedding dimension of '" + name + "' must be >= 1");
  }
}

std::size_t EmbeddingSpec::dim(const std::string& object) const {
  auto it = dims_.find(object);
  if (it == dims_.end()) throw std::invalid_argument("no embedding for '" + object + "'");
  return it->second;
}

// ---------------------------------------------------------------------------

DatasetFunctor::DatasetFunctor(EmbeddingSpec embedding, std::map<std::string, Tensor> points)
    : embedding_(std::move(embedding)) {
  for (auto& [name, t] : points) {
    const std::size_t d = embedding_.dim(name);
    if (t.size() == 0) t = Tensor(Shape{0, d});
    if (t.rank() != 2 || t.cols() != d) {
      throw ShapeError("dataset for '" + name + "' has shape " + to_string(t.shape()) +
                       " but the embedding dimension is " + std::to_string(d));
    }
    if (!t.all_finite()) throw NumericError("non-finite point in dataset for '" + name + "'");
  }
  points_ = std::move(points);
  for (const auto& [name, d] : embedding_.dims()) {
    points_.try_emplace(name, Tensor(Shape{0, d}));
  }
}

const Tensor& DatasetFunctor::points(const std::string& object) const {
  auto it = points_.find(object);
  if (it == points_.end()) throw std::invalid_argument("dataset has no object '" + object + "'");
  return it->second;
}

std::vector<std::string> DatasetFunctor::objects() const {
  std::vector<std::string> out;
  for (const auto& [name, _] : points_) out.push_back(name);
  return out;
}

// ---------------------------------------------------------------------------

Tensor sample_batch(const DatasetFunctor& data, const std::string& object, std::size_t n,
                    Rng& rng) {
  if (n == 0) throw std::invalid_argument("batch size must be positive");
  const Tensor& pts = data.points(object);
  if (pts.rows() == 0 || pts.size() == 0) {
    throw std::invalid_argument("cannot sample from empty dataset object '" + object + "'");
  }
  const std::size_t d = pts.cols();
  Tensor out(Shape{n, d});
  for (std::size_t r = 0; r < n; ++r) {
    const std::size_t i = rng.index(pts.rows());
    for (std::size_t c = 0; c < d; ++c) out[r * d + c] = pts[i * d + c];
  }
  return out;
}

Tensor sample_batch(const LatentSpec& latent, std::size_t n, Rng& rng) {
  if (n == 0) throw std::invalid_argument("batch size must be positive");
  if (latent.dim == 0) throw std::invalid_argument("latent dimension must be >= 1");
  Tensor out(Shape{n, latent.dim});
  for (auto& v : out.data()) v = rng.uniform();
  return out;
}

// ---------------------------------------------------------------------------
// CSV

namespace {

std::string strip_comment(const std::string& line) {
  auto pos = line.find('#');
  std::string s = pos == std::string::npos ? line : line.substr(0, pos);
  while (!s.empty() && (s.back() == '\r' || s.back() == ' ' || s.back() == '\t')) s.pop_back();
  std::size_t b = 0;
  while (b < s.size() && (s[b] == ' ' || s[b] == '\t')) ++b;
  return s.substr(b);
}

std::vector<std::string> split_commas(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

bool is_identifier(const std::string& s) {
  if (s.empty() || !(std::isalpha(static_cast<unsigned char>(s[0])) || s[0] == '_')) return false;
  for (char c : s)
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_')) return false;
  return true;
}

}  // namespace

std::pair<std::string, Tensor> parse_dataset_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  std::string object;
  std::size_t dim = 0;
  std::vector<double> values;
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string s = strip_comment(line);
    if (s.empty()) continue;
    auto fields = split_commas(s);
    if (object.empty()) {
      if (fields.size() != 2) {
        throw std::runtime_error("line " + std::to_string(lineno) +
                                 ": expected header '<object>,<dim>'");
      }
      object = strip_comment(fields[0]);
      const double d = parse_double(fields[1]);
      if (!is_identifier(object) || d < 1 || d != static_cast<double>(static_cast<std::size_t>(d))) {
        throw std::runtime_error("line " + std::to_string(lineno) + ": bad header '" + s + "'");
      }
      dim = static_cast<std::size_t>(d);
      continue;
    }
    if (fields.size() != dim) {
      throw std::runtime_error("line " + std::to_string(lineno) + ": expected " +
                               std::to_string(dim) + " values, found " +
                               std::to_string(fields.size()));
    }
    for (const auto& f : fields) {
      double v = 0.0;
      try {
        v = parse_double(f);
      } catch (const std::invalid_argument& e) {
        throw std::runtime_error("line " + std::to_string(lineno) + ": " + e.what());
      }
      if (!std::isfinite(v)) {
        throw NumericError("line " + std::to_string(lineno) + ": non-finite value '" + f + "'");
      }
      values.push_back(v);
    }
    ++rows;
  }
  if (object.empty()) throw std::runtime_error("missing header '<object>,<dim>'");
  return {object, Tensor::from_external(Shape{rows, dim}, std::move(values))};
}

std::string format_dataset_csv(const std::string& object, const Tensor& points) {
  std::string out = object + "," + std::to_string(points.cols()) + "\n";
  for (std::size_t r = 0; r < points.rows() && points.size() > 0; ++r) {
    auto row = points.row(r);
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (c) out += ",";
      out += format_double(row[c]);
    }
    out += "\n";
  }
  return out;
}

DatasetFunctor load_dataset(const std::filesystem::path& directory,
                            const EmbeddingSpec& embedding, std::vector<std::string>* warnings) {
  std::map<std::string, Tensor> points;
  for (const auto& [object, dim] : embedding.dims()) {
    const auto file = directory / (object + ".csv");
    if (!std::filesystem::exists(file)) {
      if (warnings) warnings->push_back("no data file for '" + object + "' (" + file.string() +
                                        "); treating it as empty");
      continue;
    }
    std::pair<std::string, Tensor> parsed;
    try {
      parsed = parse_dataset_csv(read_file(file));
    } catch (const NumericError& e) {
      throw NumericError(file.string() + ": " + e.what());
    } catch (const std::exception& e) {
      throw std::runtime_error(file.string() + ": " + e.what());
    }
    auto& [name, t] = parsed;
    if (name != object) {
      throw std::runtime_error(file.string() + ": header names '" + name + "', expected '" +
                               object + "'");
    }
    if (t.cols() != dim) {
      throw std::runtime_error(file.string() + ": dimension " + std::to_string(t.cols()) +
                               " but the embedding of '" + object + "' has dimension " +
                               std::to_string(dim));
    }
    points.emplace(object, std::move(t));
  }
  return DatasetFunctor(embedding, std::move(points));
}

void save_dataset(const std::filesystem::path& directory, const DatasetFunctor& data) {
  for (const auto& object : data.objects()) {
    if (data.empty(object)) continue;
    write_file_atomic(directory / (object + ".csv"),
                      format_dataset_csv(object, data.points(object)));
  }
}

}  // namespace functorium
