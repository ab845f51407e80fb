#pragma once

// Independent reference computations used only by the tests. None of these
// call into the library's numeric code paths.

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "warmup/embedding_io.hpp"
#include "warmup/matrix.hpp"

namespace oracle {

// Dense symmetric eigendecomposition of the centred token covariance;
// returns the eigenvector of the largest eigenvalue.
inline Eigen::VectorXd dense_pc1(const warmup::TokenEmbeddingSet& set, double* eigenvalue = nullptr) {
  const auto n = static_cast<Eigen::Index>(set.num_tokens());
  const auto d = static_cast<Eigen::Index>(set.dim());
  Eigen::MatrixXd x(n, d);
  for (Eigen::Index t = 0; t < n; ++t)
    for (Eigen::Index k = 0; k < d; ++k) x(t, k) = set.data()[static_cast<std::size_t>(t * d + k)];
  const Eigen::RowVectorXd mean = x.colwise().mean();
  x.rowwise() -= mean;
  const Eigen::MatrixXd cov = (x.transpose() * x) / static_cast<double>(n);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
  if (eigenvalue) *eigenvalue = es.eigenvalues()(d - 1);
  return es.eigenvectors().col(d - 1);
}

inline Eigen::MatrixXd dense_covariance(const warmup::TokenEmbeddingSet& set) {
  const auto n = static_cast<Eigen::Index>(set.num_tokens());
  const auto d = static_cast<Eigen::Index>(set.dim());
  Eigen::MatrixXd x(n, d);
  for (Eigen::Index t = 0; t < n; ++t)
    for (Eigen::Index k = 0; k < d; ++k) x(t, k) = set.data()[static_cast<std::size_t>(t * d + k)];
  x.rowwise() -= x.colwise().mean();
  return (x.transpose() * x) / static_cast<double>(n);
}

inline double partition_inertia(const warmup::RowMatrix& pts, const std::vector<int>& label, int k) {
  double total = 0.0;
  for (int c = 0; c < k; ++c) {
    std::vector<double> mean(pts.cols, 0.0);
    std::size_t count = 0;
    for (std::size_t i = 0; i < pts.rows; ++i) {
      if (label[i] != c) continue;
      ++count;
      for (std::size_t j = 0; j < pts.cols; ++j) mean[j] += pts(i, j);
    }
    if (count == 0) continue;
    for (auto& m : mean) m /= static_cast<double>(count);
    for (std::size_t i = 0; i < pts.rows; ++i) {
      if (label[i] != c) continue;
      for (std::size_t j = 0; j < pts.cols; ++j) total += (pts(i, j) - mean[j]) * (pts(i, j) - mean[j]);
    }
  }
  return total;
}

struct TwoPartition {
  double inertia = 0.0;
  std::vector<int> label;
  bool lloyd_fixed_point = false;  // every point is nearest its own group mean
};

// Enumerates every split of the points into two non-empty groups.
inline std::vector<TwoPartition> all_two_partitions(const warmup::RowMatrix& pts) {
  const std::size_t n = pts.rows;
  std::vector<TwoPartition> out;
  // Point 0 is pinned to group 0 to skip mirror images.
  for (std::uint64_t mask = 1; mask < (std::uint64_t{1} << (n - 1)); ++mask) {
    TwoPartition p;
    p.label.assign(n, 0);
    for (std::size_t i = 1; i < n; ++i) p.label[i] = (mask >> (i - 1)) & 1 ? 1 : 0;
    p.inertia = partition_inertia(pts, p.label, 2);
    std::vector<double> m0(pts.cols, 0.0), m1(pts.cols, 0.0);
    double c0 = 0, c1 = 0;
    for (std::size_t i = 0; i < n; ++i) {
      auto& m = p.label[i] ? m1 : m0;
      (p.label[i] ? c1 : c0) += 1;
      for (std::size_t j = 0; j < pts.cols; ++j) m[j] += pts(i, j);
    }
    for (auto& v : m0) v /= c0;
    for (auto& v : m1) v /= c1;
    p.lloyd_fixed_point = true;
    for (std::size_t i = 0; i < n; ++i) {
      double d0 = 0, d1 = 0;
      for (std::size_t j = 0; j < pts.cols; ++j) {
        d0 += (pts(i, j) - m0[j]) * (pts(i, j) - m0[j]);
        d1 += (pts(i, j) - m1[j]) * (pts(i, j) - m1[j]);
      }
      if ((d1 < d0 ? 1 : 0) != p.label[i]) p.lloyd_fixed_point = false;
    }
    out.push_back(std::move(p));
  }
  return out;
}

// Monte Carlo mean number of distinct indices in `draws` draws from probs,
// using a generator unrelated to the library's sampler.
struct DistinctEstimate {
  double mean = 0.0;
  double standard_error = 0.0;
};

inline DistinctEstimate monte_carlo_distinct(const std::vector<double>& probs, std::size_t epochs, std::uint32_t seed) {
  std::mt19937 gen(seed);
  std::discrete_distribution<std::size_t> dist(probs.begin(), probs.end());
  const std::size_t n = probs.size();
  std::vector<std::uint32_t> stamp(n, 0);
  double sum = 0.0, sum2 = 0.0;
  for (std::size_t e = 1; e <= epochs; ++e) {
    std::size_t distinct = 0;
    for (std::size_t k = 0; k < n; ++k) {
      const std::size_t i = dist(gen);
      if (stamp[i] != e) {
        stamp[i] = static_cast<std::uint32_t>(e);
        ++distinct;
      }
    }
    sum += static_cast<double>(distinct);
    sum2 += static_cast<double>(distinct) * static_cast<double>(distinct);
  }
  const double m = sum / static_cast<double>(epochs);
  const double var = (sum2 / static_cast<double>(epochs) - m * m) * static_cast<double>(epochs) /
                     static_cast<double>(epochs - 1);
  return {m, std::sqrt(std::max(var, 0.0) / static_cast<double>(epochs))};
}

// Direct evaluation of sum_i 1 - (1 - p_i)^N with long double pow.
inline double effective_size_direct(const std::vector<double>& probs) {
  long double total = 0.0L;
  const auto n = static_cast<long double>(probs.size());
  for (double p : probs) total += 1.0L - std::pow(1.0L - static_cast<long double>(p), n);
  return static_cast<double>(total);
}

// Softmax by the textbook formula in long double, no max subtraction.
inline std::vector<double> softmax_direct(const std::vector<double>& scores, double tau) {
  std::vector<long double> w(scores.size());
  long double total = 0.0L;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    w[i] = std::exp(-static_cast<long double>(scores[i]) / tau);
    total += w[i];
  }
  std::vector<double> p(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) p[i] = static_cast<double>(w[i] / total);
  return p;
}

}  // namespace oracle
