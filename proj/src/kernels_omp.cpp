#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <string>

#include <omp.h>

#include "warmup/kernels.hpp"

namespace warmup::kernels {

namespace {

// Sums f(begin, end) over fixed chunks of [0, n) and combines the chunk
// results in index order.
template <typename ChunkFn>
double ordered_reduce(std::size_t n, ChunkFn&& chunk_sum) {
  const std::size_t chunks = (n + kReduceChunk - 1) / kReduceChunk;
  std::vector<double> partial(chunks, 0.0);
  const auto nc = static_cast<std::ptrdiff_t>(chunks);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t c = 0; c < nc; ++c) {
    const std::size_t begin = static_cast<std::size_t>(c) * kReduceChunk;
    partial[c] = chunk_sum(begin, std::min(n, begin + kReduceChunk));
  }
  double total = 0.0;
  for (double p : partial) total += p;
  return total;
}

}  // namespace

int configure_threads_from_env() {
  if (const char* env = std::getenv("WARMUP_THREADS")) {
    const int cap = std::atoi(env);
    if (cap > 0) omp_set_num_threads(cap);
  }
  return omp_get_max_threads();
}

namespace omp {

std::vector<double> token_mean(std::span<const float> tokens, std::size_t dim) {
  constexpr std::size_t kRows = 1024;
  const std::size_t count = tokens.size() / dim;
  const std::size_t chunks = (count + kRows - 1) / kRows;
  RowMatrix partial(chunks, dim);
  const auto nc = static_cast<std::ptrdiff_t>(chunks);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t c = 0; c < nc; ++c) {
    auto acc = partial.row(static_cast<std::size_t>(c));
    const std::size_t end = std::min(count, (static_cast<std::size_t>(c) + 1) * kRows);
    for (std::size_t t = static_cast<std::size_t>(c) * kRows; t < end; ++t) {
      for (std::size_t k = 0; k < dim; ++k) acc[k] += tokens[t * dim + k];
    }
  }
  std::vector<double> mean(dim, 0.0);
  for (std::size_t c = 0; c < chunks; ++c) {
    for (std::size_t k = 0; k < dim; ++k) mean[k] += partial(c, k);
  }
  for (auto& m : mean) m /= static_cast<double>(count);
  return mean;
}

// Each thread owns a set of covariance rows and scans every token, so each
// entry is accumulated in token order regardless of the thread count.
RowMatrix token_covariance(std::span<const float> tokens, std::size_t dim, std::span<const double> mean) {
  constexpr std::size_t kBlock = 256;
  const std::size_t count = tokens.size() / dim;
  RowMatrix cov(dim, dim);
  RowMatrix centered(kBlock, dim);
  const auto nd = static_cast<std::ptrdiff_t>(dim);
  for (std::size_t start = 0; start < count; start += kBlock) {
    const std::size_t rows = std::min(kBlock, count - start);
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t k = 0; k < dim; ++k) centered(r, k) = tokens[(start + r) * dim + k] - mean[k];
    }
#pragma omp parallel for schedule(dynamic, 4)
    for (std::ptrdiff_t ai = 0; ai < nd; ++ai) {
      const auto a = static_cast<std::size_t>(ai);
      double* out = cov.data.data() + a * dim;
      for (std::size_t r = 0; r < rows; ++r) {
        const double* row = centered.data.data() + r * dim;
        const double ca = row[a];
        for (std::size_t b = a; b < dim; ++b) out[b] += ca * row[b];
      }
    }
  }
  const double inv = 1.0 / static_cast<double>(count);
  for (std::size_t a = 0; a < dim; ++a) {
    for (std::size_t b = a; b < dim; ++b) {
      cov(a, b) *= inv;
      cov(b, a) = cov(a, b);
    }
  }
  return cov;
}

void project(std::span<const float> tokens, std::size_t dim, std::span<const double> mean,
             std::span<const double> direction, std::span<double> out) {
  const auto count = static_cast<std::ptrdiff_t>(tokens.size() / dim);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t t = 0; t < count; ++t) {
    const float* row = tokens.data() + static_cast<std::size_t>(t) * dim;
    double s = 0.0;
    for (std::size_t k = 0; k < dim; ++k) s += direction[k] * (row[k] - mean[k]);
    out[t] = s;
  }
}

NearestResult nearest(const RowMatrix& points, const RowMatrix& centroids) {
  NearestResult r{std::vector<std::uint32_t>(points.rows), std::vector<double>(points.rows)};
  const auto n = static_cast<std::ptrdiff_t>(points.rows);
  const std::size_t dim = points.cols;
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const double* x = points.data.data() + static_cast<std::size_t>(i) * dim;
    double best = std::numeric_limits<double>::infinity();
    std::uint32_t arg = 0;
    for (std::size_t c = 0; c < centroids.rows; ++c) {
      const double* mu = centroids.data.data() + c * dim;
      double d2 = 0.0;
      for (std::size_t k = 0; k < dim; ++k) {
        const double diff = x[k] - mu[k];
        d2 += diff * diff;
      }
      if (d2 < best) {
        best = d2;
        arg = static_cast<std::uint32_t>(c);
      }
    }
    r.label[i] = arg;
    r.dist2[i] = best;
  }
  return r;
}

void cluster_sums(const RowMatrix& points, std::span<const std::uint32_t> label, RowMatrix& sums,
                  std::vector<std::size_t>& counts) {
  const std::size_t k_count = sums.rows;
  counts.assign(k_count, 0);
  for (std::size_t i = 0; i < points.rows; ++i) ++counts[label[i]];
  // Bucket members by cluster (stable in point index) then sum per cluster.
  std::vector<std::size_t> offset(k_count + 1, 0);
  for (std::size_t c = 0; c < k_count; ++c) offset[c + 1] = offset[c] + counts[c];
  std::vector<std::size_t> members(points.rows);
  std::vector<std::size_t> fill(offset.begin(), offset.end() - 1);
  for (std::size_t i = 0; i < points.rows; ++i) members[fill[label[i]]++] = i;

  const auto nk = static_cast<std::ptrdiff_t>(k_count);
#pragma omp parallel for schedule(dynamic, 8)
  for (std::ptrdiff_t ci = 0; ci < nk; ++ci) {
    const auto c = static_cast<std::size_t>(ci);
    auto acc = sums.row(c);
    std::fill(acc.begin(), acc.end(), 0.0);
    for (std::size_t m = offset[c]; m < offset[c + 1]; ++m) {
      const auto x = points.row(members[m]);
      for (std::size_t k = 0; k < points.cols; ++k) acc[k] += x[k];
    }
  }
}

double softmin_weights(std::span<const double> scores, double min_score, double tau, std::span<double> out) {
  return ordered_reduce(scores.size(), [&](std::size_t b, std::size_t e) {
    double s = 0.0;
    for (std::size_t i = b; i < e; ++i) {
      out[i] = std::exp(-(scores[i] - min_score) / tau);
      s += out[i];
    }
    return s;
  });
}

double expected_distinct(std::span<const double> probs, double draws) {
  return ordered_reduce(probs.size(), [&](std::size_t b, std::size_t e) {
    double s = 0.0;
    for (std::size_t i = b; i < e; ++i) s += -std::expm1(draws * std::log1p(-probs[i]));
    return s;
  });
}

double sum(std::span<const double> values) {
  return ordered_reduce(values.size(), [&](std::size_t b, std::size_t e) {
    double s = 0.0;
    for (std::size_t i = b; i < e; ++i) s += values[i];
    return s;
  });
}

}  // namespace omp
}  // namespace warmup::kernels
