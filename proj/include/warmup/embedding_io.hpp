#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "warmup/matrix.hpp"

namespace warmup {

inline constexpr char kTokenMagic[8] = {'T', 'O', 'K', 'E', 'M', 'B', '0', '1'};
inline constexpr char kProtoMagic[7] = {'P', 'R', 'O', 'T', 'O', '0', '1'};

// N images, each a grid of L spatial tokens of dimension d, stored
// image-major, token-major, dimension-minor.
//
// The constructor enforces the shape and id-uniqueness invariants. Finiteness
// is checked by the loader (read_embeddings), so an in-memory set may carry
// non-finite values that will be rejected on the next load.
class TokenEmbeddingSet {
 public:
  TokenEmbeddingSet(std::uint64_t num_images, std::uint32_t tokens_per_image, std::uint32_t dim,
                    std::vector<float> data, std::vector<std::string> image_ids);

  std::size_t num_images() const { return num_images_; }
  std::size_t tokens_per_image() const { return tokens_per_image_; }
  std::size_t dim() const { return dim_; }
  std::size_t num_tokens() const { return num_images_ * tokens_per_image_; }

  std::span<const float> data() const { return data_; }
  std::span<const float> image(std::size_t i) const {
    return {data_.data() + i * tokens_per_image_ * dim_, tokens_per_image_ * dim_};
  }
  std::span<const float> token(std::size_t i, std::size_t j) const {
    return {data_.data() + (i * tokens_per_image_ + j) * dim_, dim_};
  }
  const std::vector<std::string>& image_ids() const { return image_ids_; }

  // Index of the first image holding a NaN or infinity, if any.
  std::optional<std::size_t> first_non_finite_image() const;

  friend bool operator==(const TokenEmbeddingSet&, const TokenEmbeddingSet&) = default;

 private:
  std::size_t num_images_;
  std::size_t tokens_per_image_;
  std::size_t dim_;
  std::vector<float> data_;
  std::vector<std::string> image_ids_;
};

// .tokemb layout (all integers and floats little-endian):
//   "TOKEMB01" | N:u64 | L:u32 | d:u32 | N*L*d f32 | id block
// id block: total_bytes:u64, then N entries of (length:u32, UTF-8 bytes),
// where total_bytes counts every byte after the total_bytes field.
void write_embeddings(const TokenEmbeddingSet& set, std::ostream& out);
TokenEmbeddingSet read_embeddings(std::istream& in);

void save_embeddings(const TokenEmbeddingSet& set, const std::filesystem::path& path);
TokenEmbeddingSet load_embeddings(const std::filesystem::path& path);

// One line of a .scores.jsonl file.
struct ComplexityRecord {
  std::string image_id;
  double r_bg = 0.0;
  double omega_dom = 0.0;
  double omega_prot = 0.0;
  std::uint32_t cluster_id = 0;
  double omega = 0.0;
  double omega_norm = 0.0;

  friend bool operator==(const ComplexityRecord&, const ComplexityRecord&) = default;
};

void write_scores(std::span<const ComplexityRecord> records, std::ostream& out);
// Validates ranges and the omega = omega_dom * omega_prot identity.
// When expected_count is given the record count must match it.
std::vector<ComplexityRecord> read_scores(std::istream& in,
                                          std::optional<std::size_t> expected_count = std::nullopt);
std::vector<ComplexityRecord> load_scores(const std::filesystem::path& path,
                                          std::optional<std::size_t> expected_count = std::nullopt);

// .protos.bin: "PROTO01" | K:u32 | d:u32 | K*d f32, little-endian.
void write_prototypes(const RowMatrix& centroids, std::ostream& out);
RowMatrix read_prototypes(std::istream& in);

}  // namespace warmup
