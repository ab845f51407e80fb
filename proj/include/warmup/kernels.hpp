#pragma once

// Data-parallel inner loops of the pipeline.
//
// Every kernel has two implementations with the same signature:
//   kernels::omp    OpenMP version used by the library. Reductions run over
//                   fixed-size chunks combined in index order, so results are
//                   bit-identical for any thread count.
//   kernels::serial straightforward single-loop reference kept for tests and
//                   the benchmark. Agrees with omp to rounding (~1e-12 rel).

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "warmup/matrix.hpp"

namespace warmup::kernels {

// Chunk length for ordered reductions.
inline constexpr std::size_t kReduceChunk = 4096;

struct NearestResult {
  std::vector<std::uint32_t> label;
  std::vector<double> dist2;
};

namespace serial {
// Mean of the f32 rows (length dim) stored contiguously in tokens.
std::vector<double> token_mean(std::span<const float> tokens, std::size_t dim);
// Population covariance (divided by the row count) of the rows about mean.
RowMatrix token_covariance(std::span<const float> tokens, std::size_t dim, std::span<const double> mean);
// out[t] = direction . (row_t - mean)
void project(std::span<const float> tokens, std::size_t dim, std::span<const double> mean,
             std::span<const double> direction, std::span<double> out);
// Lowest-index argmin of squared Euclidean distance, per point.
NearestResult nearest(const RowMatrix& points, const RowMatrix& centroids);
// Per-cluster member sums and counts for a labelling. sums must be K x d.
void cluster_sums(const RowMatrix& points, std::span<const std::uint32_t> label, RowMatrix& sums,
                  std::vector<std::size_t>& counts);
// out[i] = exp(-(scores[i] - min_score) / tau); returns the sum of out.
double softmin_weights(std::span<const double> scores, double min_score, double tau, std::span<double> out);
// sum_i 1 - (1 - p_i)^draws, evaluated as -expm1(draws * log1p(-p_i)).
double expected_distinct(std::span<const double> probs, double draws);
double sum(std::span<const double> values);
}  // namespace serial

// Same contracts as serial::.
namespace omp {
std::vector<double> token_mean(std::span<const float> tokens, std::size_t dim);
RowMatrix token_covariance(std::span<const float> tokens, std::size_t dim, std::span<const double> mean);
void project(std::span<const float> tokens, std::size_t dim, std::span<const double> mean,
             std::span<const double> direction, std::span<double> out);
NearestResult nearest(const RowMatrix& points, const RowMatrix& centroids);
void cluster_sums(const RowMatrix& points, std::span<const std::uint32_t> label, RowMatrix& sums,
                  std::vector<std::size_t>& counts);
double softmin_weights(std::span<const double> scores, double min_score, double tau, std::span<double> out);
double expected_distinct(std::span<const double> probs, double draws);
double sum(std::span<const double> values);
}  // namespace omp

// Applies WARMUP_THREADS (if set) as the OpenMP thread cap. Returns the cap
// in effect.
int configure_threads_from_env();

}  // namespace warmup::kernels
