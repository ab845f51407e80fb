#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "warmup/embedding_io.hpp"
#include "warmup/matrix.hpp"

namespace warmup {

inline constexpr double kDefaultTheta = 0.05;

// Dataset-level saliency direction: the first principal component of all
// mean-centred spatial tokens.
struct SaliencyModel {
  std::vector<double> direction;  // unit length
  std::vector<double> mean;       // centring vector
  double theta = kDefaultTheta;
  // +1 when the direction follows the default orientation rule, -1 when the
  // caller asked for it to be flipped.
  int orientation = 1;
  double eigenvalue = 0.0;
  std::size_t iterations = 0;
  double residual = 0.0;
};

struct Pc1Options {
  double tol = 1e-9;
  std::size_t max_iters = 10000;
  std::uint64_t seed = 0;  // start vector for power iteration
  bool flip = false;
  double theta = kDefaultTheta;
};

struct EigenPair {
  std::vector<double> vector;
  double value = 0.0;
  std::size_t iterations = 0;
  double residual = 0.0;
};

// Power iteration on a symmetric positive semi-definite matrix. Stops when
// ||Cv - lambda v|| / lambda <= tol; throws ConvergenceError otherwise.
EigenPair dominant_eigenpair(const RowMatrix& cov, double tol, std::size_t max_iters, std::uint64_t seed);

// Orientation: the direction is signed so that tokens in the top decile by
// raw L2 norm have positive mean saliency.
SaliencyModel fit_pc1(const TokenEmbeddingSet& set, const Pc1Options& options = {});

// s[i*L + j] = direction . (z_ij - mean)
std::vector<double> saliency_scores(const TokenEmbeddingSet& set, const SaliencyModel& model);

struct ForegroundMask {
  std::vector<std::uint8_t> mask;  // 1 = foreground
  std::size_t fg_count = 0;
  double bg_ratio = 1.0;
};

// Foreground where s > theta (strict).
std::vector<ForegroundMask> foreground_mask(std::span<const double> scores, std::size_t tokens_per_image,
                                            double theta);

// .masks.jsonl debug dump: {"image_id", "mask": "0110...", "r_bg"} per line.
void write_masks(std::span<const std::string> image_ids, std::span<const ForegroundMask> masks, std::ostream& out);

}  // namespace warmup
