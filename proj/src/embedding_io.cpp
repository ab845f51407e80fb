#include "warmup/embedding_io.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <string_view>
#include <unordered_set>

#include <json.hpp>

#include "warmup/error.hpp"

namespace warmup {

namespace {

class LeWriter {
 public:
  explicit LeWriter(std::ostream& out) : out_(out) {}

  void bytes(const void* p, std::size_t n) {
    out_.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
    if (!out_) throw IoError("write failed at byte offset " + std::to_string(offset_));
    offset_ += n;
  }
  void u32(std::uint32_t v) {
    std::array<unsigned char, 4> b{};
    for (int k = 0; k < 4; ++k) b[k] = static_cast<unsigned char>(v >> (8 * k));
    bytes(b.data(), b.size());
  }
  void u64(std::uint64_t v) {
    std::array<unsigned char, 8> b{};
    for (int k = 0; k < 8; ++k) b[k] = static_cast<unsigned char>(v >> (8 * k));
    bytes(b.data(), b.size());
  }
  void f32_array(std::span<const float> values) {
    std::vector<unsigned char> buf;
    constexpr std::size_t kChunk = 1 << 16;
    for (std::size_t start = 0; start < values.size(); start += kChunk) {
      const std::size_t n = std::min(kChunk, values.size() - start);
      buf.resize(n * 4);
      for (std::size_t i = 0; i < n; ++i) {
        const auto bits = std::bit_cast<std::uint32_t>(values[start + i]);
        for (int k = 0; k < 4; ++k) buf[i * 4 + k] = static_cast<unsigned char>(bits >> (8 * k));
      }
      bytes(buf.data(), buf.size());
    }
  }

 private:
  std::ostream& out_;
  std::uint64_t offset_ = 0;
};

class LeReader {
 public:
  explicit LeReader(std::istream& in) : in_(in) {}

  // Reads up to n bytes; returns the count actually read.
  std::size_t some(void* p, std::size_t n) {
    in_.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
    const auto got = static_cast<std::size_t>(in_.gcount());
    offset_ += got;
    return got;
  }
  void exact(void* p, std::size_t n, const char* what) {
    const std::size_t got = some(p, n);
    if (got != n) {
      throw LengthError(std::string("truncated ") + what + ": expected " + std::to_string(n) +
                        " bytes, got " + std::to_string(got) + " (short by " + std::to_string(n - got) +
                        ") at byte offset " + std::to_string(offset_));
    }
  }
  std::uint32_t u32(const char* what) {
    std::array<unsigned char, 4> b{};
    exact(b.data(), 4, what);
    std::uint32_t v = 0;
    for (int k = 0; k < 4; ++k) v |= std::uint32_t{b[k]} << (8 * k);
    return v;
  }
  std::uint64_t u64(const char* what) {
    std::array<unsigned char, 8> b{};
    exact(b.data(), 8, what);
    std::uint64_t v = 0;
    for (int k = 0; k < 8; ++k) v |= std::uint64_t{b[k]} << (8 * k);
    return v;
  }
  // Reads count floats, streaming in chunks so a corrupt header cannot force
  // a huge allocation before the shortfall is detected.
  std::vector<float> f32_array(std::uint64_t count, const char* what) {
    std::vector<float> out;
    std::vector<unsigned char> buf;
    constexpr std::uint64_t kChunk = 1 << 16;
    std::uint64_t done = 0;
    while (done < count) {
      const std::uint64_t n = std::min(kChunk, count - done);
      buf.resize(n * 4);
      const std::size_t got = some(buf.data(), buf.size());
      if (got != buf.size()) {
        const std::uint64_t expected = count * 4;
        const std::uint64_t actual = done * 4 + got;
        throw LengthError(std::string("truncated ") + what + ": expected " + std::to_string(expected) +
                          " bytes, got " + std::to_string(actual) + " (short by " +
                          std::to_string(expected - actual) + ")");
      }
      for (std::uint64_t i = 0; i < n; ++i) {
        std::uint32_t bits = 0;
        for (int k = 0; k < 4; ++k) bits |= std::uint32_t{buf[i * 4 + k]} << (8 * k);
        out.push_back(std::bit_cast<float>(bits));
      }
      done += n;
    }
    return out;
  }
  bool at_end() { return in_.peek() == std::char_traits<char>::eof(); }

 private:
  std::istream& in_;
  std::uint64_t offset_ = 0;
};

bool checked_mul(std::uint64_t a, std::uint64_t b, std::uint64_t& out) {
  if (a != 0 && b > std::numeric_limits<std::uint64_t>::max() / a) return false;
  out = a * b;
  return true;
}

}  // namespace

TokenEmbeddingSet::TokenEmbeddingSet(std::uint64_t num_images, std::uint32_t tokens_per_image,
                                     std::uint32_t dim, std::vector<float> data,
                                     std::vector<std::string> image_ids)
    : num_images_(num_images),
      tokens_per_image_(tokens_per_image),
      dim_(dim),
      data_(std::move(data)),
      image_ids_(std::move(image_ids)) {
  if (num_images == 0 || tokens_per_image == 0 || dim == 0) {
    throw ArgumentError("embedding set needs N, L, d >= 1");
  }
  std::uint64_t expected = 0;
  if (!checked_mul(num_images, tokens_per_image, expected) || !checked_mul(expected, dim, expected)) {
    throw ArgumentError("embedding set shape overflows");
  }
  if (data_.size() != expected) {
    throw ArgumentError("embedding data has " + std::to_string(data_.size()) + " values, shape needs " +
                        std::to_string(expected));
  }
  if (image_ids_.size() != num_images) {
    throw ArgumentError("expected " + std::to_string(num_images) + " image ids, got " +
                        std::to_string(image_ids_.size()));
  }
  std::unordered_set<std::string_view> seen;
  for (const auto& id : image_ids_) {
    if (!seen.insert(id).second) throw ValidationError("duplicate image id '" + id + "'");
  }
}

std::optional<std::size_t> TokenEmbeddingSet::first_non_finite_image() const {
  const std::size_t stride = tokens_per_image_ * dim_;
  for (std::size_t i = 0; i < data_.size(); ++i) {
    if (!std::isfinite(data_[i])) return i / stride;
  }
  return std::nullopt;
}

void write_embeddings(const TokenEmbeddingSet& set, std::ostream& out) {
  LeWriter w(out);
  w.bytes(kTokenMagic, sizeof(kTokenMagic));
  w.u64(set.num_images());
  w.u32(static_cast<std::uint32_t>(set.tokens_per_image()));
  w.u32(static_cast<std::uint32_t>(set.dim()));
  w.f32_array(set.data());

  std::uint64_t block = 0;
  for (const auto& id : set.image_ids()) block += 4 + id.size();
  w.u64(block);
  for (const auto& id : set.image_ids()) {
    if (id.size() > std::numeric_limits<std::uint32_t>::max()) throw ArgumentError("image id too long");
    w.u32(static_cast<std::uint32_t>(id.size()));
    w.bytes(id.data(), id.size());
  }
}

TokenEmbeddingSet read_embeddings(std::istream& in) {
  LeReader r(in);
  char magic[sizeof(kTokenMagic)];
  const std::size_t got = r.some(magic, sizeof(magic));
  if (got != sizeof(magic) || std::memcmp(magic, kTokenMagic, sizeof(magic)) != 0) {
    throw FormatError("bad magic: expected \"TOKEMB01\"");
  }
  const std::uint64_t n = r.u64("header");
  const std::uint32_t l = r.u32("header");
  const std::uint32_t d = r.u32("header");
  if (n == 0 || l == 0 || d == 0) throw FormatError("header declares an empty shape");
  std::uint64_t count = 0;
  if (!checked_mul(n, l, count) || !checked_mul(count, d, count) || count > (UINT64_MAX / 4)) {
    throw FormatError("header shape overflows");
  }
  std::vector<float> data = r.f32_array(count, "token payload");

  const std::uint64_t block = r.u64("id block");
  std::uint64_t consumed = 0;
  std::vector<std::string> ids;
  ids.reserve(std::min<std::uint64_t>(n, 1 << 20));
  for (std::uint64_t i = 0; i < n; ++i) {
    const std::uint32_t len = r.u32("id block");
    consumed += 4;
    if (consumed + len > block) {
      throw LengthError("id block overruns its declared size of " + std::to_string(block) + " bytes");
    }
    std::string id(len, '\0');
    r.exact(id.data(), len, "id block");
    consumed += len;
    ids.push_back(std::move(id));
  }
  if (consumed != block) {
    throw LengthError("id block declares " + std::to_string(block) + " bytes but ids use " +
                      std::to_string(consumed));
  }
  if (!r.at_end()) throw LengthError("trailing bytes after id block; header N*L*d disagrees with payload");

  TokenEmbeddingSet set(n, l, d, std::move(data), std::move(ids));
  if (auto bad = set.first_non_finite_image()) {
    throw ValidationError("non-finite value in image " + std::to_string(*bad));
  }
  return set;
}

void save_embeddings(const TokenEmbeddingSet& set, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  write_embeddings(set, out);
  out.flush();
  if (!out) throw IoError("flush failed for " + path.string());
}

TokenEmbeddingSet load_embeddings(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return read_embeddings(in);
}

void write_scores(std::span<const ComplexityRecord> records, std::ostream& out) {
  for (const auto& r : records) {
    nlohmann::ordered_json j;
    j["image_id"] = r.image_id;
    j["r_bg"] = r.r_bg;
    j["omega_dom"] = r.omega_dom;
    j["omega_prot"] = r.omega_prot;
    j["cluster_id"] = r.cluster_id;
    j["omega"] = r.omega;
    j["omega_norm"] = r.omega_norm;
    out << j.dump() << '\n';
  }
  if (!out) throw IoError("score write failed");
}

std::vector<ComplexityRecord> read_scores(std::istream& in, std::optional<std::size_t> expected_count) {
  std::vector<ComplexityRecord> records;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const std::string where = "score line " + std::to_string(line_no);
    ComplexityRecord r;
    try {
      const auto j = nlohmann::json::parse(line);
      r.image_id = j.at("image_id").get<std::string>();
      r.r_bg = j.at("r_bg").get<double>();
      r.omega_dom = j.at("omega_dom").get<double>();
      r.omega_prot = j.at("omega_prot").get<double>();
      r.cluster_id = j.at("cluster_id").get<std::uint32_t>();
      r.omega = j.at("omega").get<double>();
      r.omega_norm = j.at("omega_norm").get<double>();
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(where + ": " + e.what());
    }
    if (!(r.r_bg >= 0.0 && r.r_bg <= 1.0)) throw ValidationError(where + ": r_bg outside [0,1]");
    if (!(r.omega_dom > 0.0 && r.omega_dom < 1.0)) throw ValidationError(where + ": omega_dom outside (0,1)");
    if (!(r.omega_prot >= 0.0) || !std::isfinite(r.omega_prot)) {
      throw ValidationError(where + ": omega_prot must be finite and >= 0");
    }
    if (!(r.omega >= 0.0) || !std::isfinite(r.omega)) throw ValidationError(where + ": omega must be finite and >= 0");
    if (!(r.omega_norm >= 0.0 && r.omega_norm <= 1.0)) throw ValidationError(where + ": omega_norm outside [0,1]");
    const double product = r.omega_dom * r.omega_prot;
    if (std::abs(r.omega - product) > 1e-6 * std::max(std::abs(product), std::abs(r.omega))) {
      throw ValidationError(where + ": omega != omega_dom * omega_prot");
    }
    records.push_back(std::move(r));
  }
  if (records.empty()) throw ValidationError("score file holds no records");
  if (expected_count && records.size() != *expected_count) {
    throw ValidationError("score file has " + std::to_string(records.size()) + " records, expected " +
                          std::to_string(*expected_count));
  }
  return records;
}

std::vector<ComplexityRecord> load_scores(const std::filesystem::path& path,
                                          std::optional<std::size_t> expected_count) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  return read_scores(in, expected_count);
}

void write_prototypes(const RowMatrix& centroids, std::ostream& out) {
  LeWriter w(out);
  w.bytes(kProtoMagic, sizeof(kProtoMagic));
  w.u32(static_cast<std::uint32_t>(centroids.rows));
  w.u32(static_cast<std::uint32_t>(centroids.cols));
  std::vector<float> values(centroids.data.begin(), centroids.data.end());
  w.f32_array(values);
}

RowMatrix read_prototypes(std::istream& in) {
  LeReader r(in);
  char magic[sizeof(kProtoMagic)];
  if (r.some(magic, sizeof(magic)) != sizeof(magic) || std::memcmp(magic, kProtoMagic, sizeof(magic)) != 0) {
    throw FormatError("bad magic: expected \"PROTO01\"");
  }
  const std::uint32_t k = r.u32("header");
  const std::uint32_t d = r.u32("header");
  const auto values = r.f32_array(std::uint64_t{k} * d, "centroid payload");
  if (!r.at_end()) throw LengthError("trailing bytes after centroid payload");
  RowMatrix m(k, d);
  std::copy(values.begin(), values.end(), m.data.begin());
  return m;
}

}  // namespace warmup
