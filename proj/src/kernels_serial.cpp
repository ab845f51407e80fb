#include <cmath>
#include <limits>

#include "warmup/kernels.hpp"

namespace warmup::kernels::serial {

std::vector<double> token_mean(std::span<const float> tokens, std::size_t dim) {
  const std::size_t count = tokens.size() / dim;
  std::vector<double> mean(dim, 0.0);
  for (std::size_t t = 0; t < count; ++t) {
    for (std::size_t k = 0; k < dim; ++k) mean[k] += tokens[t * dim + k];
  }
  for (auto& m : mean) m /= static_cast<double>(count);
  return mean;
}

RowMatrix token_covariance(std::span<const float> tokens, std::size_t dim, std::span<const double> mean) {
  const std::size_t count = tokens.size() / dim;
  RowMatrix cov(dim, dim);
  std::vector<double> c(dim);
  for (std::size_t t = 0; t < count; ++t) {
    for (std::size_t k = 0; k < dim; ++k) c[k] = tokens[t * dim + k] - mean[k];
    for (std::size_t a = 0; a < dim; ++a) {
      for (std::size_t b = 0; b < dim; ++b) cov(a, b) += c[a] * c[b];
    }
  }
  for (auto& v : cov.data) v /= static_cast<double>(count);
  return cov;
}

void project(std::span<const float> tokens, std::size_t dim, std::span<const double> mean,
             std::span<const double> direction, std::span<double> out) {
  const std::size_t count = tokens.size() / dim;
  for (std::size_t t = 0; t < count; ++t) {
    double s = 0.0;
    for (std::size_t k = 0; k < dim; ++k) s += direction[k] * (tokens[t * dim + k] - mean[k]);
    out[t] = s;
  }
}

NearestResult nearest(const RowMatrix& points, const RowMatrix& centroids) {
  NearestResult r{std::vector<std::uint32_t>(points.rows), std::vector<double>(points.rows)};
  for (std::size_t i = 0; i < points.rows; ++i) {
    double best = std::numeric_limits<double>::infinity();
    std::uint32_t arg = 0;
    for (std::size_t c = 0; c < centroids.rows; ++c) {
      double d2 = 0.0;
      for (std::size_t k = 0; k < points.cols; ++k) {
        const double diff = points(i, k) - centroids(c, k);
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
  std::fill(sums.data.begin(), sums.data.end(), 0.0);
  counts.assign(sums.rows, 0);
  for (std::size_t i = 0; i < points.rows; ++i) {
    ++counts[label[i]];
    for (std::size_t k = 0; k < points.cols; ++k) sums(label[i], k) += points(i, k);
  }
}

double softmin_weights(std::span<const double> scores, double min_score, double tau, std::span<double> out) {
  double total = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    out[i] = std::exp(-(scores[i] - min_score) / tau);
    total += out[i];
  }
  return total;
}

double expected_distinct(std::span<const double> probs, double draws) {
  double total = 0.0;
  for (double p : probs) total += -std::expm1(draws * std::log1p(-p));
  return total;
}

double sum(std::span<const double> values) {
  double total = 0.0;
  for (double v : values) total += v;
  return total;
}

}  // namespace warmup::kernels::serial
