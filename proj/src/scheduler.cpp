#include "warmup/scheduler.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "warmup/error.hpp"
#include "warmup/kernels.hpp"

namespace warmup {

namespace {

constexpr std::size_t kMaxBisection = 200;

void fill_probs(std::span<const double> scores, double min_score, double tau, std::span<double> out) {
  const double total = kernels::omp::softmin_weights(scores, min_score, tau, out);
  const double inv = 1.0 / total;
  // exp underflows for scores far above the minimum at small tau; every item
  // keeps a positive (if negligible) probability.
  constexpr double floor = std::numeric_limits<double>::min();
  for (double& p : out) p = std::max(p * inv, floor);
}

std::string interval(double lo, double hi) {
  std::ostringstream os;
  os.precision(10);
  os << "(" << lo << ", " << hi << "]";
  return os.str();
}

}  // namespace

Temperature Temperature::finite(double tau) {
  if (!(tau > 0.0) || !std::isfinite(tau)) throw ArgumentError("temperature must be positive and finite");
  Temperature t;
  t.tau_ = tau;
  t.uniform_ = false;
  return t;
}

double Temperature::value() const { return uniform_ ? std::numeric_limits<double>::infinity() : tau_; }

std::string Temperature::to_string() const {
  if (uniform_) return "inf";
  std::ostringstream os;
  os.precision(17);
  os << tau_;
  return os.str();
}

std::vector<double> sampling_probs(std::span<const double> scores, Temperature tau) {
  if (scores.empty()) throw ArgumentError("no scores");
  for (double s : scores) {
    if (!std::isfinite(s)) throw ArgumentError("scores must be finite");
  }
  std::vector<double> probs(scores.size());
  if (tau.is_uniform()) {
    std::fill(probs.begin(), probs.end(), 1.0 / static_cast<double>(scores.size()));
    return probs;
  }
  const double min_score = *std::min_element(scores.begin(), scores.end());
  fill_probs(scores, min_score, tau.value(), probs);
  return probs;
}

double effective_size(std::span<const double> probs) {
  return kernels::omp::expected_distinct(probs, static_cast<double>(probs.size()));
}

double max_effective_size(std::size_t n) {
  if (n == 0) return 0.0;
  const double nd = static_cast<double>(n);
  return nd * -std::expm1(nd * std::log1p(-1.0 / nd));
}

double min_effective_size(std::span<const double> scores) {
  if (scores.empty()) return 0.0;
  const double lo = *std::min_element(scores.begin(), scores.end());
  const auto m = static_cast<double>(std::count(scores.begin(), scores.end(), lo));
  const auto n = static_cast<double>(scores.size());
  return m * -std::expm1(n * std::log1p(-1.0 / m));
}

TemperatureSolution solve_temperature(std::span<const double> scores, double target) {
  if (scores.empty()) throw ArgumentError("no scores");
  const auto [lo_it, hi_it] = std::minmax_element(scores.begin(), scores.end());
  const double min_score = *lo_it;
  const double d_max = max_effective_size(scores.size());
  if (*lo_it == *hi_it) return {Temperature::uniform(), d_max, 0, true};

  const double s_min = min_effective_size(scores);
  if (!(target > s_min && target <= d_max)) {
    throw RangeError("target effective size " + std::to_string(target) + " outside feasible interval " +
                         interval(s_min, d_max),
                     s_min, d_max);
  }
  if (target == d_max) return {Temperature::uniform(), d_max, 0, false};

  const double tol = std::max(0.5, 1e-6 * target);
  const auto n = static_cast<double>(scores.size());
  std::vector<double> probs(scores.size());
  auto eff = [&](double tau) {
    fill_probs(scores, min_score, tau, probs);
    return kernels::omp::expected_distinct(probs, n);
  };

  std::size_t evals = 0;
  double lo = 1e-6, hi = 1e6;
  double f_lo = eff(lo), f_hi = eff(hi);
  evals += 2;
  while (f_lo > target && lo > 1e-300) {
    lo *= 1e-3;
    f_lo = eff(lo);
    ++evals;
  }
  while (f_hi < target && hi < 1e300) {
    hi *= 1e3;
    f_hi = eff(hi);
    ++evals;
  }
  if (std::abs(f_lo - target) <= tol) return {Temperature::finite(lo), f_lo, evals, false};
  if (std::abs(f_hi - target) <= tol) return {Temperature::finite(hi), f_hi, evals, false};
  if (f_hi < target) {
    // Only reachable when target sits within rounding of d_max.
    if (d_max - target <= tol) return {Temperature::uniform(), d_max, evals, false};
    throw ConvergenceError("temperature bracket could not reach the target", target - f_hi);
  }

  double best_tau = lo, best_gap = std::abs(f_lo - target), best_f = f_lo;
  for (std::size_t it = 0; it < kMaxBisection; ++it) {
    const double mid = std::sqrt(lo) * std::sqrt(hi);
    const double f = eff(mid);
    ++evals;
    const double gap = std::abs(f - target);
    if (gap < best_gap) {
      best_tau = mid;
      best_gap = gap;
      best_f = f;
    }
    if (gap <= tol) return {Temperature::finite(mid), f, evals, false};
    (f < target ? lo : hi) = mid;
  }
  if (best_gap <= tol) return {Temperature::finite(best_tau), best_f, evals, false};
  throw ConvergenceError("temperature bisection did not reach tolerance", best_gap);
}

std::vector<double> inverse_scores(std::span<const double> scores) {
  std::vector<double> out(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (!(scores[i] >= 0.0 && scores[i] <= 1.0)) throw ArgumentError("normalised scores must lie in [0, 1]");
    out[i] = 1.0 - scores[i];
  }
  return out;
}

double WarmupSchedule::d0() const {
  return initial_is_fraction ? initial_size * static_cast<double>(num_images) : initial_size;
}

void WarmupSchedule::validate() const {
  if (num_images == 0) throw ConfigError("schedule needs at least one image");
  if (warmup_iters < 1) throw ConfigError("T_w must be >= 1");
  if (recompute_stride < 1) throw ConfigError("recompute_stride must be >= 1");
  const double lo = d0();
  if (!(lo >= 1.0 && lo <= d_max())) {
    throw ConfigError("D0 = " + std::to_string(lo) + " must lie in [1, D_max = " + std::to_string(d_max()) + "]");
  }
}

double schedule_target(std::uint64_t t, const WarmupSchedule& schedule) {
  const double d_max = schedule.d_max();
  if (t >= schedule.warmup_iters) return d_max;
  const double d0 = schedule.d0();
  const double remaining = 1.0 - static_cast<double>(t) / static_cast<double>(schedule.warmup_iters);
  const double progress = schedule.curve == AnnealCurve::Power2 ? 1.0 - remaining * remaining : 1.0 - remaining;
  return std::min(d_max, d0 + (d_max - d0) * progress);
}

std::vector<std::size_t> sample_batch(SamplerState& state, std::size_t batch_size) {
  if (batch_size == 0) throw ArgumentError("batch size must be positive");
  if (state.probs.empty()) throw ArgumentError("sampler state has no probabilities");
  std::vector<std::size_t> out(batch_size);
  const std::size_t n = state.probs.size();
  if (state.tau.is_uniform()) {
    for (auto& idx : out) idx = state.rng.below(n);
    return out;
  }
  const double total = state.cdf.back();
  for (auto& idx : out) {
    const double u = state.rng.uniform() * total;
    const auto it = std::upper_bound(state.cdf.begin(), state.cdf.end(), u);
    idx = std::min(static_cast<std::size_t>(it - state.cdf.begin()), n - 1);
  }
  return out;
}

CurriculumSampler::CurriculumSampler(std::vector<double> scores, WarmupSchedule schedule)
    : schedule_(schedule), state_(schedule.seed) {
  if (scores.empty()) throw ConfigError("no scores");
  schedule_.num_images = scores.size();
  schedule_.validate();
  scores_ = schedule_.inverse ? inverse_scores(scores) : std::move(scores);
  s_min_ = min_effective_size(scores_);
  const bool flat = std::all_of(scores_.begin(), scores_.end(), [&](double s) { return s == scores_.front(); });
  if (!flat && !(schedule_.d0() > s_min_)) {
    throw ConfigError("D0 = " + std::to_string(schedule_.d0()) + " is not above the smallest reachable effective size " +
                      std::to_string(s_min_));
  }
}

void CurriculumSampler::refresh(std::uint64_t t) {
  state_.target = schedule_target(t, schedule_);
  if (t > schedule_.warmup_iters) {
    state_.tau = Temperature::uniform();
  } else {
    state_.tau = solve_temperature(scores_, state_.target).tau;
  }
  state_.probs = sampling_probs(scores_, state_.tau);
  state_.realized = effective_size(state_.probs);
  state_.cdf.resize(state_.probs.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < state_.probs.size(); ++i) {
    acc += state_.probs[i];
    state_.cdf[i] = acc;
  }
  fresh_ = true;
}

void CurriculumSampler::advance(std::uint64_t t) {
  if (t == 0) throw ArgumentError("iterations start at 1");
  const bool uniform_phase = t > schedule_.warmup_iters;
  const bool due = !fresh_ || (uniform_phase && !state_.tau.is_uniform()) ||
                   (!uniform_phase && (t - 1) % schedule_.recompute_stride == 0);
  state_.t = t;
  if (due) {
    refresh(t);
  } else {
    state_.target = schedule_target(t, schedule_);
  }
}

}  // namespace warmup
