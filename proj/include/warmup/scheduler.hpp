#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "warmup/random.hpp"

namespace warmup {

// Softmax temperature. Infinite temperature (exactly uniform sampling) is an
// explicit state rather than a large float.
class Temperature {
 public:
  static Temperature finite(double tau);
  static Temperature uniform() { return Temperature(); }

  bool is_uniform() const { return uniform_; }
  // +infinity for the uniform sentinel.
  double value() const;
  std::string to_string() const;

  friend bool operator==(const Temperature&, const Temperature&) = default;

 private:
  Temperature() = default;
  double tau_ = 0.0;
  bool uniform_ = true;
};

// P(i) = exp(-s_i / tau) / sum_j exp(-s_j / tau), evaluated after shifting by
// min(s). The uniform sentinel gives exactly 1/N.
std::vector<double> sampling_probs(std::span<const double> scores, Temperature tau);

// Expected number of distinct items in N draws with replacement from probs,
// where N = probs.size().
double effective_size(std::span<const double> probs);

// Effective size of the uniform distribution over n items,
// n * (1 - (1 - 1/n)^n).
double max_effective_size(std::size_t n);

// Limit of the effective size as tau -> 0+: all mass on the items sharing the
// minimal score.
double min_effective_size(std::span<const double> scores);

struct TemperatureSolution {
  Temperature tau = Temperature::uniform();
  double achieved = 0.0;  // effective size at tau
  std::size_t iterations = 0;
  bool flat = false;  // all scores equal; effective size does not depend on tau
};

// Temperature whose effective size matches target within max(0.5, 1e-6 * target).
// Bisection on log(tau); the bracket starts at [1e-6, 1e6] and widens as needed.
// Throws RangeError when target is outside (min_effective_size, max_effective_size].
TemperatureSolution solve_temperature(std::span<const double> scores, double target);

// 1 - s elementwise; scores must lie in [0, 1].
std::vector<double> inverse_scores(std::span<const double> scores);

enum class AnnealCurve { Power2, Linear };

struct WarmupSchedule {
  std::uint64_t warmup_iters = 1;  // T_w
  double initial_size = 0.1;       // D0, absolute or a fraction of N
  bool initial_is_fraction = true;
  std::size_t num_images = 1;
  bool inverse = false;
  std::uint64_t seed = 0;
  std::uint64_t recompute_stride = 1;
  AnnealCurve curve = AnnealCurve::Power2;

  double d0() const;
  double d_max() const { return max_effective_size(num_images); }
  // Throws ConfigError on a broken schedule.
  void validate() const;
};

// Scheduled effective size at iteration t:
// D0 + (Dmax - D0) * (1 - [1 - t/T_w]_+^2) up to T_w, Dmax afterwards.
double schedule_target(std::uint64_t t, const WarmupSchedule& schedule);

struct SamplerState {
  explicit SamplerState(std::uint64_t seed) : rng(seed) {}

  std::uint64_t t = 0;
  Temperature tau = Temperature::uniform();
  double target = 0.0;
  double realized = 0.0;  // effective size of probs
  std::vector<double> probs;
  std::vector<double> cdf;  // inclusive prefix sums of probs; unused when uniform
  Rng rng;
};

// batch_size draws with replacement from state.probs by inverse CDF, or by
// uniform index draws when state.tau is the uniform sentinel.
std::vector<std::size_t> sample_batch(SamplerState& state, std::size_t batch_size);

// Drives a SamplerState through the warmup schedule.
class CurriculumSampler {
 public:
  // scores are normalised complexities in [0, 1]; inverse mode reflects them.
  // Throws ConfigError when D0 is not above the tau -> 0 effective size.
  CurriculumSampler(std::vector<double> scores, WarmupSchedule schedule);

  // Moves to iteration t (t >= 1), refreshing probabilities when due.
  void advance(std::uint64_t t);
  std::vector<std::size_t> sample_batch(std::size_t batch_size) { return warmup::sample_batch(state_, batch_size); }

  const SamplerState& state() const { return state_; }
  const WarmupSchedule& schedule() const { return schedule_; }
  // Scores the sampler draws from (reflected in inverse mode).
  const std::vector<double>& scores() const { return scores_; }
  double min_feasible_size() const { return s_min_; }

 private:
  void refresh(std::uint64_t t);

  std::vector<double> scores_;
  WarmupSchedule schedule_;
  SamplerState state_;
  double s_min_ = 0.0;
  bool fresh_ = false;
};

}  // namespace warmup
