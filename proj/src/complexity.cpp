#include "warmup/complexity.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <unordered_map>

#include "warmup/error.hpp"
#include "warmup/kernels.hpp"

namespace warmup {

void DominanceParams::validate() const {
  if (!(kappa > 0.0) || !std::isfinite(kappa)) throw ArgumentError("kappa must be a positive finite number");
  if (!(v_min > 0.0 && v_min < 0.5)) throw ArgumentError("v_min must lie in (0, 0.5)");
}

double dominance(double r_bg, const DominanceParams& params) {
  params.validate();
  if (!(r_bg >= 0.0 && r_bg <= 1.0)) throw ArgumentError("r_bg must lie in [0, 1]");
  const double alpha = std::log(params.v_min / (1.0 - params.v_min));
  return 1.0 / (1.0 + std::exp(-(params.kappa * r_bg + alpha)));
}

RowMatrix mean_foreground(const TokenEmbeddingSet& set, std::span<const ForegroundMask> masks) {
  if (masks.size() != set.num_images()) throw ArgumentError("mask count does not match image count");
  const std::size_t n = set.num_images();
  const std::size_t l = set.tokens_per_image();
  const std::size_t d = set.dim();
  for (const auto& m : masks) {
    if (m.mask.size() != l) throw ArgumentError("mask length does not match tokens per image");
  }
  RowMatrix out(n, d);
  const auto ni = static_cast<std::ptrdiff_t>(n);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t ii = 0; ii < ni; ++ii) {
    const auto i = static_cast<std::size_t>(ii);
    const ForegroundMask& m = masks[i];
    const bool use_all = m.fg_count == 0;
    auto acc = out.row(i);
    std::size_t used = 0;
    for (std::size_t j = 0; j < l; ++j) {
      if (!use_all && !m.mask[j]) continue;
      const auto z = set.token(i, j);
      for (std::size_t k = 0; k < d; ++k) acc[k] += z[k];
      ++used;
    }
    for (auto& x : acc) x /= static_cast<double>(used);
  }
  return out;
}

std::size_t desk_cluster_count(std::size_t num_images, std::size_t requested) {
  return std::max<std::size_t>(1, std::min(requested, num_images / 10));
}

std::optional<std::size_t> default_batch_size(std::size_t num_vectors) {
  if (num_vectors > kMiniBatchThreshold) return kDefaultMiniBatch;
  return std::nullopt;
}

Typicality typicality(std::span<const double> vector, const PrototypeModel& model) {
  if (vector.size() != model.dim()) {
    throw ArgumentError("vector has dimension " + std::to_string(vector.size()) + ", prototypes have " +
                        std::to_string(model.dim()));
  }
  RowMatrix one(1, vector.size());
  std::copy(vector.begin(), vector.end(), one.data.begin());
  const auto r = kernels::serial::nearest(one, model.centroids);
  return {r.label[0], std::sqrt(r.dist2[0])};
}

std::vector<Typicality> typicality_all(const RowMatrix& vectors, const PrototypeModel& model) {
  if (vectors.cols != model.dim()) throw ArgumentError("vector dimension does not match prototypes");
  const auto r = kernels::omp::nearest(vectors, model.centroids);
  std::vector<Typicality> out(vectors.rows);
  for (std::size_t i = 0; i < vectors.rows; ++i) out[i] = {r.label[i], std::sqrt(r.dist2[i])};
  return out;
}

std::vector<ComplexityRecord> combine_and_normalize(std::vector<ComplexityRecord> drafts) {
  struct Range {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
  };
  std::unordered_map<std::uint32_t, Range> ranges;
  for (auto& r : drafts) {
    r.omega = r.omega_dom * r.omega_prot;
    Range& g = ranges[r.cluster_id];
    g.lo = std::min(g.lo, r.omega);
    g.hi = std::max(g.hi, r.omega);
  }
  for (auto& r : drafts) {
    const Range& g = ranges.at(r.cluster_id);
    r.omega_norm = g.hi > g.lo ? (r.omega - g.lo) / (g.hi - g.lo) : 0.0;
  }
  return drafts;
}

}  // namespace warmup
