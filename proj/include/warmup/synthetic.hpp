#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <vector>

#include "warmup/embedding_io.hpp"

namespace warmup {

// Planted-foreground fixture description. Every token is
//   cluster_centre(image) + noise * N(0, I)
// and foreground tokens are additionally shifted by offset * e_axis.
// Cluster centres are orthogonal to e_axis with norm cluster_spread.
struct SyntheticSpec {
  std::size_t num_images = 10;
  std::size_t tokens_per_image = 16;
  std::size_t dim = 8;
  std::size_t clusters = 2;
  // Per-image foreground fraction drawn uniformly from [fg_min, fg_max].
  double fg_min = 0.5;
  double fg_max = 0.5;
  double offset = 10.0;
  double noise = 1.0;
  double cluster_spread = 3.0;
  std::size_t axis = 0;

  void validate() const;
};

struct SyntheticFixture {
  TokenEmbeddingSet set;
  std::vector<double> direction;                 // planted unit direction
  std::vector<std::vector<std::uint8_t>> masks;  // planted foreground per image
  std::vector<std::size_t> cluster;              // planted cluster per image
  std::vector<double> bg_ratio;                  // planted background ratio per image
};

// Pure function of (spec, seed).
SyntheticFixture generate_synthetic(const SyntheticSpec& spec, std::uint64_t seed);

// .truth.jsonl: first line {"direction": [...]}, then one line per image with
// image_id, cluster, mask bit-string and r_bg.
void write_truth(const SyntheticFixture& fixture, std::ostream& out);

SyntheticSpec load_synthetic_spec(const std::filesystem::path& path);

}  // namespace warmup
