#pragma once

// Numeric evaluation of a trained model on held-out samples.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "functorium/dataset.hpp"
#include "functorium/functor_model.hpp"
#include "functorium/rng.hpp"
#include "functorium/task.hpp"

namespace functorium {

/// 2 E|X - Y| - E|X - X'| - E|Y - Y'| with Euclidean distances, averaged over
/// all pairs (V-statistic). Both inputs are [n, d] with the same d.
/// `threads` splits the pairwise sums; the result is the same for any value.
double energy_distance(const Tensor& x, const Tensor& y, std::size_t threads = 1);

/// Square root of the mean squared distance of the rows to their mean.
double total_std(const Tensor& x);

/// Every held-out point of `object`: data factors taken row by row from
/// `data` (which must hold the same number of points for each), latent
/// factors drawn uniformly.
Tensor heldout_batch(const TaskSpec& task, const std::string& object, const DatasetFunctor& data,
                     Rng& rng);

struct Metrics {
  std::vector<std::string> relation_labels;
  std::vector<double> residuals;
  /// Generators whose target has data: generated images of held-out source
  /// points against held-out target points.
  std::vector<std::string> energy_arrows;
  std::vector<std::string> energy_objects;
  std::vector<double> energy;
  // Product tasks only.
  std::optional<double> reconstruction_error;  ///< mean |pi_A(d(c(a,z))) - a|_1
  std::optional<double> latent_spread;         ///< attribute std across base points, fixed z
  std::optional<double> attribute_std;         ///< attribute std over held-out composites

  /// "metric,value" rows.
  std::string to_csv() const;
  std::optional<double> find(const std::string& metric) const;
};

inline constexpr std::size_t kSpreadBasePoints = 32;
inline constexpr std::size_t kSpreadLatents = 16;

/// Draws `n_eval` held-out points per data factor from task.resample (or
/// uses the task dataset when no resampler exists) with `seed`.
Metrics evaluate(const Model& model, const TaskSpec& task, std::size_t n_eval,
                 std::uint64_t seed, std::size_t threads = 1);

}  // namespace functorium
