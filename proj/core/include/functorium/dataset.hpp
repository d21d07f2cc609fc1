#pragma once

// Finite sample sets per object (dataset functors) and the CSV format they
// are stored in.

#include <cstddef>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "functorium/rng.hpp"
#include "functorium/tensor.hpp"

namespace functorium {

/// Object (or product factor) name -> embedding dimension.
class EmbeddingSpec {
 public:
  EmbeddingSpec() = default;
  explicit EmbeddingSpec(std::map<std::string, std::size_t> dims);

  std::size_t dim(const std::string& object) const;
  bool contains(const std::string& object) const { return dims_.count(object) != 0; }
  const std::map<std::string, std::size_t>& dims() const noexcept { return dims_; }

 private:
  std::map<std::string, std::size_t> dims_;
};

/// Points per object, stored as an [n, dim] matrix. No arrow action.
/// Objects without data hold an empty [0, dim] matrix.
class DatasetFunctor {
 public:
  DatasetFunctor() = default;
  /// Every object of `embedding` gets an entry; missing ones are empty.
  /// Throws ShapeError if a matrix width differs from the embedding and
  /// NumericError on non-finite values.
  DatasetFunctor(EmbeddingSpec embedding, std::map<std::string, Tensor> points);

  const EmbeddingSpec& embedding() const noexcept { return embedding_; }
  const Tensor& points(const std::string& object) const;
  std::size_t size(const std::string& object) const { return points(object).rows(); }
  bool empty(const std::string& object) const { return size(object) == 0; }
  std::vector<std::string> objects() const;

 private:
  EmbeddingSpec embedding_;
  std::map<std::string, Tensor> points_;
};

/// Uniform latent factor [0,1]^dim with no data, e.g. B_Z.
struct LatentSpec {
  std::string name;
  std::size_t dim = 1;
};

/// n rows drawn uniformly with replacement. Throws std::invalid_argument
/// when the object has no points or n == 0.
Tensor sample_batch(const DatasetFunctor& data, const std::string& object, std::size_t n,
                    Rng& rng);
/// n i.i.d. uniform [0,1]^k rows.
Tensor sample_batch(const LatentSpec& latent, std::size_t n, Rng& rng);

/// Reads `<object>.csv` for every object of `embedding` in `directory`.
/// A missing file yields an empty object and a message in `warnings`.
/// Throws std::runtime_error for malformed files or mismatched dimensions and
/// NumericError for non-finite values.
DatasetFunctor load_dataset(const std::filesystem::path& directory,
                            const EmbeddingSpec& embedding, std::vector<std::string>* warnings = nullptr);

/// Parses one CSV document: header `<object>,<dim>` then rows of dim floats.
/// `#` starts a comment. Returns the object name and an [n, dim] matrix.
std::pair<std::string, Tensor> parse_dataset_csv(const std::string& text);
std::string format_dataset_csv(const std::string& object, const Tensor& points);

/// Writes one CSV per non-empty object into `directory`.
void save_dataset(const std::filesystem::path& directory, const DatasetFunctor& data);

}  // namespace functorium
