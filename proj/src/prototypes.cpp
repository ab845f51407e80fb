#include <algorithm>
#include <cmath>
#include <limits>

#include "warmup/complexity.hpp"
#include "warmup/error.hpp"
#include "warmup/kernels.hpp"
#include "warmup/random.hpp"

namespace warmup {

namespace {

double dist2(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double diff = a[k] - b[k];
    s += diff * diff;
  }
  return s;
}

RowMatrix kmeans_plus_plus(const RowMatrix& x, std::size_t k, Rng& rng) {
  const std::size_t n = x.rows;
  RowMatrix centres(k, x.cols);
  std::vector<double> closest(n, std::numeric_limits<double>::infinity());
  std::vector<std::uint8_t> chosen(n, 0);

  std::size_t pick = rng.below(n);
  for (std::size_t c = 0; c < k; ++c) {
    if (c > 0) {
      double total = 0.0;
      for (double v : closest) total += v;
      if (total > 0.0) {
        const double target = rng.uniform() * total;
        double acc = 0.0;
        pick = n;
        for (std::size_t i = 0; i < n; ++i) {
          acc += closest[i];
          if (closest[i] > 0.0 && acc > target) {
            pick = i;
            break;
          }
        }
        // Rounding can leave target at the very top of the mass.
        if (pick == n) {
          for (std::size_t i = n; i-- > 0;) {
            if (closest[i] > 0.0) {
              pick = i;
              break;
            }
          }
        }
      } else {
        // Every point coincides with a chosen centre; take the first unused.
        pick = static_cast<std::size_t>(std::find(chosen.begin(), chosen.end(), 0) - chosen.begin());
      }
    }
    chosen[pick] = 1;
    std::copy(x.row(pick).begin(), x.row(pick).end(), centres.row(c).begin());
    for (std::size_t i = 0; i < n; ++i) closest[i] = std::min(closest[i], dist2(x.row(i), centres.row(c)));
  }
  return centres;
}

// Moves each empty centroid onto the point currently farthest from its own
// centroid (lowest index on ties); a point is used at most once.
std::size_t reseed_empty(const RowMatrix& x, std::span<const std::size_t> counts, std::vector<double> far,
                         RowMatrix& centroids) {
  std::size_t reseeded = 0;
  for (std::size_t c = 0; c < counts.size(); ++c) {
    if (counts[c] != 0) continue;
    const auto it = std::max_element(far.begin(), far.end());
    const auto i = static_cast<std::size_t>(it - far.begin());
    std::copy(x.row(i).begin(), x.row(i).end(), centroids.row(c).begin());
    far[i] = -1.0;
    ++reseeded;
  }
  return reseeded;
}

double max_shift(const RowMatrix& a, const RowMatrix& b) {
  double worst = 0.0;
  for (std::size_t c = 0; c < a.rows; ++c) worst = std::max(worst, std::sqrt(dist2(a.row(c), b.row(c))));
  return worst;
}

void lloyd(const RowMatrix& x, const KMeansOptions& opt, PrototypeModel& model) {
  RowMatrix sums(opt.k, x.cols);
  std::vector<std::size_t> counts;
  for (std::size_t it = 1; it <= opt.max_iters; ++it) {
    const auto assign = kernels::omp::nearest(x, model.centroids);
    model.inertia_history.push_back(kernels::omp::sum(assign.dist2));
    kernels::omp::cluster_sums(x, assign.label, sums, counts);

    RowMatrix next = model.centroids;
    for (std::size_t c = 0; c < opt.k; ++c) {
      if (counts[c] == 0) continue;
      for (std::size_t k = 0; k < x.cols; ++k) next(c, k) = sums(c, k) / static_cast<double>(counts[c]);
    }
    model.reseeds += reseed_empty(x, counts, assign.dist2, next);

    const double shift = max_shift(model.centroids, next);
    model.centroids = std::move(next);
    model.iterations = it;
    if (shift < opt.move_tol) {
      model.converged = true;
      break;
    }
  }
}

void mini_batch(const RowMatrix& x, const KMeansOptions& opt, Rng& rng, PrototypeModel& model) {
  const std::size_t b = std::min(*opt.batch, x.rows);
  RowMatrix batch(b, x.cols);
  std::vector<std::size_t> lifetime(opt.k, 0);
  for (std::size_t it = 1; it <= opt.max_iters; ++it) {
    for (std::size_t r = 0; r < b; ++r) {
      const auto src = x.row(rng.below(x.rows));
      std::copy(src.begin(), src.end(), batch.row(r).begin());
    }
    const auto assign = kernels::omp::nearest(batch, model.centroids);
    model.inertia_history.push_back(kernels::omp::sum(assign.dist2));

    RowMatrix next = model.centroids;
    for (std::size_t r = 0; r < b; ++r) {
      const std::uint32_t c = assign.label[r];
      const double eta = 1.0 / static_cast<double>(++lifetime[c]);
      auto mu = next.row(c);
      const auto p = batch.row(r);
      for (std::size_t k = 0; k < x.cols; ++k) mu[k] += eta * (p[k] - mu[k]);
    }
    model.reseeds += reseed_empty(batch, lifetime, assign.dist2, next);

    const double shift = max_shift(model.centroids, next);
    model.centroids = std::move(next);
    model.iterations = it;
    if (shift < opt.move_tol) {
      model.converged = true;
      break;
    }
  }
}

}  // namespace

PrototypeModel fit_prototypes(const RowMatrix& vectors, const KMeansOptions& options) {
  if (options.k == 0) throw ArgumentError("k-means needs K >= 1");
  if (vectors.rows < options.k) {
    throw ArgumentError("k-means needs N >= K (N = " + std::to_string(vectors.rows) +
                        ", K = " + std::to_string(options.k) + ")");
  }
  if (options.batch && *options.batch == 0) throw ArgumentError("mini-batch size must be positive");

  Rng rng(options.seed);
  PrototypeModel model;
  model.seed = options.seed;
  model.batch = options.batch;
  model.centroids = kmeans_plus_plus(vectors, options.k, rng);
  model.initial_centroids = model.centroids;

  if (options.batch) {
    mini_batch(vectors, options, rng, model);
  } else {
    lloyd(vectors, options, model);
  }
  model.inertia = kernels::omp::sum(kernels::omp::nearest(vectors, model.centroids).dist2);
  return model;
}

}  // namespace warmup
