#include "warmup/saliency.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>

#include <json.hpp>

#include "warmup/error.hpp"
#include "warmup/kernels.hpp"
#include "warmup/random.hpp"

namespace warmup {

namespace {

double norm2(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

void matvec(const RowMatrix& m, std::span<const double> v, std::span<double> out) {
  for (std::size_t a = 0; a < m.rows; ++a) {
    double s = 0.0;
    const auto row = m.row(a);
    for (std::size_t b = 0; b < m.cols; ++b) s += row[b] * v[b];
    out[a] = s;
  }
}

bool all_tokens_identical(const TokenEmbeddingSet& set) {
  const auto first = set.token(0, 0);
  const auto data = set.data();
  for (std::size_t i = first.size(); i < data.size(); ++i) {
    if (data[i] != first[i % first.size()]) return false;
  }
  return true;
}

}  // namespace

EigenPair dominant_eigenpair(const RowMatrix& cov, double tol, std::size_t max_iters, std::uint64_t seed) {
  const std::size_t d = cov.rows;
  double trace = 0.0;
  for (std::size_t a = 0; a < d; ++a) trace += cov(a, a);
  if (!(trace > 0.0)) throw DegenerateInputError("covariance is zero; tokens carry no variance");

  Rng rng(seed);
  std::vector<double> v(d);
  for (auto& x : v) x = rng.normal();
  double n = norm2(v);
  for (auto& x : v) x /= n;

  std::vector<double> w(d);
  double residual = std::numeric_limits<double>::infinity();
  for (std::size_t it = 1; it <= max_iters; ++it) {
    matvec(cov, v, w);
    const double lambda = std::inner_product(v.begin(), v.end(), w.begin(), 0.0);
    n = norm2(w);
    if (n == 0.0) {
      // Start vector fell in the null space; restart from a fresh draw.
      for (auto& x : v) x = rng.normal();
      const double m = norm2(v);
      for (auto& x : v) x /= m;
      continue;
    }
    double r2 = 0.0;
    for (std::size_t a = 0; a < d; ++a) {
      const double e = w[a] - lambda * v[a];
      r2 += e * e;
    }
    residual = std::sqrt(r2) / lambda;
    if (residual <= tol) return {v, lambda, it, residual};
    for (std::size_t a = 0; a < d; ++a) v[a] = w[a] / n;
  }
  throw ConvergenceError("power iteration did not converge in " + std::to_string(max_iters) +
                             " iterations; final residual " + std::to_string(residual),
                         residual);
}

SaliencyModel fit_pc1(const TokenEmbeddingSet& set, const Pc1Options& options) {
  if (set.num_tokens() < 2) throw DegenerateInputError("need at least two tokens for PCA");
  if (all_tokens_identical(set)) throw DegenerateInputError("all tokens are identical");

  const std::size_t d = set.dim();
  SaliencyModel model;
  model.theta = options.theta;
  model.mean = kernels::omp::token_mean(set.data(), d);
  const RowMatrix cov = kernels::omp::token_covariance(set.data(), d, model.mean);
  EigenPair pc = dominant_eigenpair(cov, options.tol, options.max_iters, options.seed);
  model.direction = std::move(pc.vector);
  model.eigenvalue = pc.value;
  model.iterations = pc.iterations;
  model.residual = pc.residual;

  // Orientation from the top decile of tokens by raw norm.
  const std::size_t count = set.num_tokens();
  std::vector<double> norms(count);
  for (std::size_t t = 0; t < count; ++t) {
    const auto z = set.data().subspan(t * d, d);
    double s = 0.0;
    for (float x : z) s += double{x} * x;
    norms[t] = s;
  }
  const std::size_t top = std::max<std::size_t>(1, (count + 9) / 10);
  std::vector<std::size_t> order(count);
  std::iota(order.begin(), order.end(), 0);
  std::nth_element(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(top - 1), order.end(),
                   [&](std::size_t a, std::size_t b) { return norms[a] != norms[b] ? norms[a] > norms[b] : a < b; });
  std::vector<double> proj(count);
  kernels::omp::project(set.data(), d, model.mean, model.direction, proj);
  double top_mean = 0.0;
  for (std::size_t k = 0; k < top; ++k) top_mean += proj[order[k]];

  bool negate = top_mean < 0.0;
  if (top_mean == 0.0) {
    const auto it = std::max_element(model.direction.begin(), model.direction.end(),
                                     [](double a, double b) { return std::abs(a) < std::abs(b); });
    negate = *it < 0.0;
  }
  if (options.flip) {
    negate = !negate;
    model.orientation = -1;
  }
  if (negate) {
    for (auto& x : model.direction) x = -x;
  }
  return model;
}

std::vector<double> saliency_scores(const TokenEmbeddingSet& set, const SaliencyModel& model) {
  if (model.direction.size() != set.dim() || model.mean.size() != set.dim()) {
    throw ArgumentError("saliency model has dimension " + std::to_string(model.direction.size()) +
                        ", embeddings have " + std::to_string(set.dim()));
  }
  std::vector<double> scores(set.num_tokens());
  kernels::omp::project(set.data(), set.dim(), model.mean, model.direction, scores);
  return scores;
}

std::vector<ForegroundMask> foreground_mask(std::span<const double> scores, std::size_t tokens_per_image,
                                            double theta) {
  if (tokens_per_image == 0 || scores.size() % tokens_per_image != 0) {
    throw ArgumentError("score count is not a multiple of tokens per image");
  }
  const std::size_t n = scores.size() / tokens_per_image;
  std::vector<ForegroundMask> masks(n);
  const auto ni = static_cast<std::ptrdiff_t>(n);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t ii = 0; ii < ni; ++ii) {
    const auto i = static_cast<std::size_t>(ii);
    ForegroundMask& m = masks[i];
    m.mask.resize(tokens_per_image);
    for (std::size_t j = 0; j < tokens_per_image; ++j) {
      m.mask[j] = scores[i * tokens_per_image + j] > theta ? 1 : 0;
      m.fg_count += m.mask[j];
    }
    m.bg_ratio = static_cast<double>(tokens_per_image - m.fg_count) / static_cast<double>(tokens_per_image);
  }
  return masks;
}

void write_masks(std::span<const std::string> image_ids, std::span<const ForegroundMask> masks, std::ostream& out) {
  if (image_ids.size() != masks.size()) throw ArgumentError("mask count does not match image ids");
  for (std::size_t i = 0; i < masks.size(); ++i) {
    std::string bits(masks[i].mask.size(), '0');
    for (std::size_t j = 0; j < bits.size(); ++j) bits[j] = masks[i].mask[j] ? '1' : '0';
    nlohmann::ordered_json j;
    j["image_id"] = image_ids[i];
    j["mask"] = bits;
    j["r_bg"] = masks[i].bg_ratio;
    out << j.dump() << '\n';
  }
}

}  // namespace warmup
