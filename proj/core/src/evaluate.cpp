#include "functorium/evaluate.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <thread>

#include "functorium/io.hpp"
#include "functorium/losses.hpp"

namespace functorium {

namespace {

double row_distance_sum(const Tensor& x, std::size_t i, const Tensor& y) {
  const std::size_t d = x.cols();
  const double* xi = x.data().data() + i * d;
  double total = 0.0;
  for (std::size_t j = 0; j < y.rows(); ++j) {
    const double* yj = y.data().data() + j * d;
    double s = 0.0;
    for (std::size_t c = 0; c < d; ++c) {
      const double diff = xi[c] - yj[c];
      s += diff * diff;
    }
    total += std::sqrt(s);
  }
  return total;
}

// Per-row sums are computed in parallel and added in row order, so the
// result does not depend on the thread count.
double mean_pairwise_distance(const Tensor& x, const Tensor& y, std::size_t threads) {
  std::vector<double> rows(x.rows(), 0.0);
  const std::size_t workers = std::max<std::size_t>(1, std::min(threads, x.rows()));
  if (workers == 1) {
    for (std::size_t i = 0; i < x.rows(); ++i) rows[i] = row_distance_sum(x, i, y);
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        for (std::size_t i = w; i < x.rows(); i += workers) rows[i] = row_distance_sum(x, i, y);
      });
    }
    for (auto& t : pool) t.join();
  }
  double total = 0.0;
  for (double r : rows) total += r;
  return total / static_cast<double>(x.rows() * y.rows());
}

}  // namespace

double energy_distance(const Tensor& x, const Tensor& y, std::size_t threads) {
  if (x.rank() != 2 || y.rank() != 2 || x.cols() != y.cols() || x.rows() == 0 || y.rows() == 0) {
    throw ShapeError("energy distance needs non-empty [n, d] batches of equal width, got " +
                     to_string(x.shape()) + " and " + to_string(y.shape()));
  }
  return 2.0 * mean_pairwise_distance(x, y, threads) - mean_pairwise_distance(x, x, threads) -
         mean_pairwise_distance(y, y, threads);
}

double total_std(const Tensor& x) {
  if (x.rank() != 2 || x.rows() == 0) throw ShapeError("total_std needs a non-empty [n, d] batch");
  const std::size_t n = x.rows(), d = x.cols();
  std::vector<double> mu(d, 0.0);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < d; ++c) mu[c] += x.at(r, c);
  for (auto& m : mu) m /= static_cast<double>(n);
  double ss = 0.0;
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < d; ++c) ss += (x.at(r, c) - mu[c]) * (x.at(r, c) - mu[c]);
  return std::sqrt(ss / static_cast<double>(n));
}

Tensor heldout_batch(const TaskSpec& task, const std::string& object, const DatasetFunctor& data,
                     Rng& rng) {
  const auto& factors = task.factors.at(object);
  std::size_t n = 0;
  for (const auto& f : factors) {
    if (f.latent) continue;
    const std::size_t rows = data.size(f.name);
    if (n != 0 && rows != n) {
      throw std::invalid_argument("held-out factors of '" + object + "' have different sizes");
    }
    n = rows;
  }
  if (n == 0) throw std::invalid_argument("no held-out points for '" + object + "'");
  const std::size_t dim = task.object_dim(object);
  Tensor out(Shape{n, dim});
  std::size_t offset = 0;
  for (const auto& f : factors) {
    const Tensor part =
        f.latent ? sample_batch(LatentSpec{f.name, f.dim}, n, rng) : data.points(f.name);
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t c = 0; c < f.dim; ++c) out.at(r, offset + c) = part.at(r, c);
    offset += f.dim;
  }
  return out;
}

std::string Metrics::to_csv() const {
  std::string out = "metric,value\n";
  auto row = [&](const std::string& k, double v) { out += k + "," + format_double(v) + "\n"; };
  for (std::size_t i = 0; i < residuals.size(); ++i) row("residual:" + relation_labels[i], residuals[i]);
  for (std::size_t i = 0; i < energy.size(); ++i) row("energy:" + energy_arrows[i], energy[i]);
  if (reconstruction_error) row("reconstruction_error", *reconstruction_error);
  if (latent_spread) row("latent_spread", *latent_spread);
  if (attribute_std) row("attribute_std", *attribute_std);
  return out;
}

std::optional<double> Metrics::find(const std::string& metric) const {
  for (std::size_t i = 0; i < residuals.size(); ++i)
    if (metric == "residual:" + relation_labels[i]) return residuals[i];
  for (std::size_t i = 0; i < energy.size(); ++i)
    if (metric == "energy:" + energy_arrows[i]) return energy[i];
  if (metric == "reconstruction_error") return reconstruction_error;
  if (metric == "latent_spread") return latent_spread;
  if (metric == "attribute_std") return attribute_std;
  return std::nullopt;
}

Metrics evaluate(const Model& model, const TaskSpec& task, std::size_t n_eval,
                 std::uint64_t seed, std::size_t threads) {
  if (n_eval == 0) throw std::invalid_argument("n_eval must be positive");
  const DatasetFunctor data = task.resample ? task.resample(seed, n_eval) : task.dataset;
  Rng rng = Rng(seed).split(7);
  const auto& schema = model.schema();

  std::map<std::string, Tensor> batches;
  auto batch = [&](const std::string& o) -> const Tensor& {
    auto it = batches.find(o);
    if (it == batches.end()) it = batches.emplace(o, heldout_batch(task, o, data, rng)).first;
    return it->second;
  };

  Metrics m;
  for (const auto& rel : schema.relations()) {
    const std::string& src = schema.source(rel.lhs);
    if (!task.samplable(src, data)) continue;
    m.relation_labels.push_back(relation_label(rel));
    m.residuals.push_back(path_equiv_loss(model, rel, batch(src)));
  }
  const auto objects = critic_objects(task);
  for (const auto& a : schema.graph().arrows()) {
    if (std::find(objects.begin(), objects.end(), a.target) == objects.end()) continue;
    if (!task.samplable(a.source, data) || !task.samplable(a.target, data)) continue;
    m.energy_arrows.push_back(a.name);
    m.energy_objects.push_back(a.target);
    m.energy.push_back(
        energy_distance(model.eval_arrow(a.name, batch(a.source)), batch(a.target), threads));
  }

  if (task.product) {
    const ProductStructure& ps = *task.product;
    const auto& factors = task.factors.at(ps.product_object);
    std::size_t base_offset = 0, base_dim = 0;
    for (const auto& f : factors) {
      if (f.name == ps.base_factor) {
        base_dim = f.dim;
        break;
      }
      base_offset += f.dim;
    }
    const Tensor& ax = batch(ps.product_object);
    const Tensor back =
        model.eval_arrow(ps.decompose_arrow, model.eval_arrow(ps.compose_arrow, ax));
    double err = 0.0;
    for (std::size_t r = 0; r < ax.rows(); ++r)
      for (std::size_t c = base_offset; c < base_offset + base_dim; ++c)
        err += std::abs(back.at(r, c) - ax.at(r, c));
    m.reconstruction_error = err / static_cast<double>(ax.rows());

    const std::size_t k = std::min(kSpreadBasePoints, ax.rows());
    double spread = 0.0;
    for (std::size_t s = 0; s < kSpreadLatents; ++s) {
      // Keep the base coordinates of the first k held-out points and give
      // them all the latent coordinates of row s.
      const std::size_t zrow = s % ax.rows();
      Tensor fixed(Shape{k, ax.cols()});
      for (std::size_t r = 0; r < k; ++r) {
        for (std::size_t c = 0; c < ax.cols(); ++c) {
          const bool base = c >= base_offset && c < base_offset + base_dim;
          fixed.at(r, c) = base ? ax.at(r, c) : ax.at(zrow, c);
        }
      }
      spread += total_std(ps.attribute(model.eval_arrow(ps.compose_arrow, fixed)));
    }
    m.latent_spread = spread / static_cast<double>(kSpreadLatents);
    if (task.samplable(ps.composite_object, data)) {
      m.attribute_std = total_std(ps.attribute(batch(ps.composite_object)));
    }
  }
  return m;
}

}  // namespace functorium
