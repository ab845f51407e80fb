#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "warmup/embedding_io.hpp"
#include "warmup/matrix.hpp"
#include "warmup/saliency.hpp"

namespace warmup {

// Sigmoid map from background ratio to foreground-dominance complexity.
struct DominanceParams {
  double kappa = 12.0;   // steepness
  double v_min = 0.002;  // value at r_bg = 0
  void validate() const;
};

// 1 / (1 + exp(-(kappa * r_bg + alpha))), alpha = ln(v_min / (1 - v_min)).
double dominance(double r_bg, const DominanceParams& params);

// Per image: mean of the foreground tokens, or of all tokens when the mask
// is empty. One row per image.
RowMatrix mean_foreground(const TokenEmbeddingSet& set, std::span<const ForegroundMask> masks);

inline constexpr std::size_t kDefaultClusters = 1000;
inline constexpr std::size_t kMiniBatchThreshold = 50000;
inline constexpr std::size_t kDefaultMiniBatch = 4096;

// min(requested, floor(N/10)), at least 1.
std::size_t desk_cluster_count(std::size_t num_images, std::size_t requested = kDefaultClusters);
// 4096 above 50 000 vectors, full batch otherwise.
std::optional<std::size_t> default_batch_size(std::size_t num_vectors);

struct KMeansOptions {
  std::size_t k = 1;
  std::uint64_t seed = 0;
  std::size_t max_iters = 300;
  std::optional<std::size_t> batch;  // mini-batch size; full batch when empty
  double move_tol = 1e-6;            // stop when every centroid moves less than this
};

struct PrototypeModel {
  RowMatrix centroids;  // K x d
  RowMatrix initial_centroids;
  std::size_t iterations = 0;
  bool converged = false;
  double inertia = 0.0;  // sum of squared distances under the final centroids
  // Inertia of the assignment step at each iteration (batch inertia in
  // mini-batch mode).
  std::vector<double> inertia_history;
  std::size_t reseeds = 0;
  std::uint64_t seed = 0;
  std::optional<std::size_t> batch;

  std::size_t k() const { return centroids.rows; }
  std::size_t dim() const { return centroids.cols; }
};

// k-means++ seeding followed by Lloyd (full batch) or Sculley mini-batch
// updates. A cluster left empty by an update is re-seeded at the point
// farthest from its assigned centroid.
PrototypeModel fit_prototypes(const RowMatrix& vectors, const KMeansOptions& options);

struct Typicality {
  std::uint32_t cluster_id = 0;
  double omega_prot = 0.0;
};

Typicality typicality(std::span<const double> vector, const PrototypeModel& model);
std::vector<Typicality> typicality_all(const RowMatrix& vectors, const PrototypeModel& model);

// omega = omega_dom * omega_prot, then min-max normalisation of omega within
// each cluster. Clusters whose members all share one omega get omega_norm 0.
std::vector<ComplexityRecord> combine_and_normalize(std::vector<ComplexityRecord> drafts);

}  // namespace warmup
