#include "warmup/synthetic.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <ostream>

#include <json.hpp>

#include "warmup/error.hpp"
#include "warmup/random.hpp"

namespace warmup {

void SyntheticSpec::validate() const {
  if (num_images == 0) throw ArgumentError("synthetic spec needs at least one image");
  if (clusters == 0) throw ArgumentError("synthetic spec needs at least one cluster");
  if (tokens_per_image == 0 || dim == 0) throw ArgumentError("synthetic spec needs L, d >= 1");
  if (axis >= dim) throw ArgumentError("planted axis outside the embedding dimension");
  if (!(fg_min >= 0.0 && fg_min <= fg_max && fg_max <= 1.0)) {
    throw ArgumentError("foreground fractions must satisfy 0 <= fg_min <= fg_max <= 1");
  }
  if (!(noise >= 0.0) || !(cluster_spread >= 0.0) || !std::isfinite(offset)) {
    throw ArgumentError("noise, spread and offset must be finite and non-negative");
  }
}

SyntheticFixture generate_synthetic(const SyntheticSpec& spec, std::uint64_t seed) {
  spec.validate();
  Rng rng(seed);
  const std::size_t n = spec.num_images, l = spec.tokens_per_image, d = spec.dim;

  std::vector<std::vector<double>> centres(spec.clusters, std::vector<double>(d, 0.0));
  for (auto& c : centres) {
    double norm = 0.0;
    for (std::size_t k = 0; k < d; ++k) {
      c[k] = k == spec.axis ? 0.0 : rng.normal();
      norm += c[k] * c[k];
    }
    norm = std::sqrt(norm);
    for (auto& x : c) x = norm > 0.0 ? x * spec.cluster_spread / norm : 0.0;
  }

  std::vector<float> data(n * l * d);
  std::vector<std::string> ids(n);
  std::vector<std::vector<std::uint8_t>> masks(n, std::vector<std::uint8_t>(l, 0));
  std::vector<std::size_t> cluster(n);
  std::vector<double> bg(n);
  std::vector<std::size_t> slots(l);
  for (std::size_t i = 0; i < n; ++i) {
    char id[32];
    std::snprintf(id, sizeof(id), "img_%06zu", i);
    ids[i] = id;
    cluster[i] = i % spec.clusters;

    const double frac = spec.fg_min + (spec.fg_max - spec.fg_min) * rng.uniform();
    const auto fg = static_cast<std::size_t>(std::lround(frac * static_cast<double>(l)));
    std::iota(slots.begin(), slots.end(), 0);
    for (std::size_t j = l; j > 1; --j) std::swap(slots[j - 1], slots[rng.below(j)]);
    for (std::size_t s = 0; s < fg; ++s) masks[i][slots[s]] = 1;
    bg[i] = static_cast<double>(l - fg) / static_cast<double>(l);

    const auto& c = centres[cluster[i]];
    for (std::size_t j = 0; j < l; ++j) {
      float* z = data.data() + (i * l + j) * d;
      for (std::size_t k = 0; k < d; ++k) z[k] = static_cast<float>(c[k] + spec.noise * rng.normal());
      if (masks[i][j]) z[spec.axis] += static_cast<float>(spec.offset);
    }
  }

  std::vector<double> direction(d, 0.0);
  direction[spec.axis] = 1.0;
  return {TokenEmbeddingSet(n, static_cast<std::uint32_t>(l), static_cast<std::uint32_t>(d), std::move(data),
                            std::move(ids)),
          std::move(direction), std::move(masks), std::move(cluster), std::move(bg)};
}

void write_truth(const SyntheticFixture& fixture, std::ostream& out) {
  nlohmann::ordered_json head;
  head["direction"] = fixture.direction;
  out << head.dump() << '\n';
  const auto& ids = fixture.set.image_ids();
  for (std::size_t i = 0; i < ids.size(); ++i) {
    std::string bits(fixture.masks[i].size(), '0');
    for (std::size_t j = 0; j < bits.size(); ++j) bits[j] = fixture.masks[i][j] ? '1' : '0';
    nlohmann::ordered_json j;
    j["image_id"] = ids[i];
    j["cluster"] = fixture.cluster[i];
    j["mask"] = bits;
    j["r_bg"] = fixture.bg_ratio[i];
    out << j.dump() << '\n';
  }
  if (!out) throw IoError("truth sidecar write failed");
}

SyntheticSpec load_synthetic_spec(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  SyntheticSpec spec;
  try {
    const auto j = nlohmann::json::parse(in);
    spec.num_images = j.value("num_images", spec.num_images);
    spec.tokens_per_image = j.value("tokens_per_image", spec.tokens_per_image);
    spec.dim = j.value("dim", spec.dim);
    spec.clusters = j.value("clusters", spec.clusters);
    if (j.contains("fg_fraction")) spec.fg_min = spec.fg_max = j["fg_fraction"].get<double>();
    spec.fg_min = j.value("fg_min", spec.fg_min);
    spec.fg_max = j.value("fg_max", spec.fg_max);
    spec.offset = j.value("offset", spec.offset);
    spec.noise = j.value("noise", spec.noise);
    spec.cluster_spread = j.value("cluster_spread", spec.cluster_spread);
    spec.axis = j.value("axis", spec.axis);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("synthetic spec " + path.string() + ": " + e.what());
  }
  spec.validate();
  return spec;
}

}  // namespace warmup
