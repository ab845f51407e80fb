#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "warmup/complexity.hpp"
#include "warmup/embedding_io.hpp"
#include "warmup/saliency.hpp"
#include "warmup/scheduler.hpp"

namespace warmup {

// Parameters shared by the CLI subcommands. JSON keys in parentheses.
struct RunConfig {
  // Schedule
  std::uint64_t warmup_iters = 1000;  // (T_w)
  double d0 = 0.1;                    // (D0)
  bool d0_is_fraction = true;         // (D0_is_fraction)
  bool inverse = false;               // (inverse)
  std::uint64_t seed = 0;             // (seed) also seeds PCA and k-means
  std::uint64_t recompute_stride = 1; // (recompute_stride)
  AnnealCurve curve = AnnealCurve::Power2;  // (curve: "power2" | "linear")

  // Scoring
  double theta = kDefaultTheta;            // (theta)
  DominanceParams dominance;               // (kappa, v_min)
  std::optional<std::size_t> clusters;     // (K) unset: min(1000, N/10)
  bool flip_saliency = false;              // (flip_saliency)
  double pca_tol = 1e-9;                   // (pca_tol)
  std::size_t pca_max_iters = 10000;       // (pca_max_iters)
  std::size_t kmeans_max_iters = 300;      // (kmeans_max_iters)
  std::optional<std::size_t> kmeans_batch; // (kmeans_batch) unset: 4096 above 50k images

  WarmupSchedule schedule(std::size_t num_images) const;
};

// Overlays the keys present in j onto config. Unknown keys are rejected.
void apply_config_json(RunConfig& config, const nlohmann::json& j);
RunConfig load_run_config(const std::filesystem::path& path);

struct StageTiming {
  std::string stage;
  double seconds = 0.0;
};

struct ScoringResult {
  SaliencyModel saliency;
  std::vector<ForegroundMask> masks;
  PrototypeModel prototypes;
  std::vector<ComplexityRecord> records;
  std::vector<StageTiming> timings;
};

// Offline scoring from saliency masks through per-cluster normalised
// complexity.
ScoringResult score_dataset(const TokenEmbeddingSet& set, const RunConfig& config);

// Writes scores.jsonl, protos.bin and summary.txt (plus masks.jsonl when
// dump_masks) into out_dir. Outputs are staged and removed on failure.
ScoringResult cmd_score(const RunConfig& config, const std::filesystem::path& input,
                        const std::filesystem::path& out_dir, std::ostream& log, bool dump_masks = false);

// One epoch-equivalent window: N consecutive draws.
struct WindowCheck {
  std::size_t first_draw = 0;
  double mean_target = 0.0;    // draw-weighted scheduled effective size
  std::size_t distinct = 0;    // distinct images among the window's N draws
  // Expected distinct count given the probabilities actually used in the
  // window, sum_i 1 - prod_t (1 - p_i,t); free of sampling noise.
  double expected_distinct = 0.0;
  double relative_error = 0.0;           // |distinct - mean_target| / mean_target
  double expected_relative_error = 0.0;  // |expected_distinct - mean_target| / mean_target
};

struct SimulationSummary {
  std::uint64_t iterations = 0;
  double d0 = 0.0;
  double d_max = 0.0;
  double s_min = 0.0;
  std::size_t distinct_seen = 0;
  // Mean sampled omega_norm (original orientation) per 1% of warmup; NaN when
  // a bin has no iterations.
  std::vector<double> warmup_profile;
  double mean_first_5pct = 0.0;   // t in [1, 0.05 T_w]
  double mean_last_5pct = 0.0;    // t in [0.95 T_w, T_w]
  std::vector<WindowCheck> windows;  // consecutive windows of N draws
};

// Stage-2 loop with the training step replaced by statistics recording.
// When trace is given, one CSV row per iteration is written to it:
// t,tau,target_effective_size,realized_effective_size,distinct_seen_cumulative
SimulationSummary simulate(std::span<const double> omega_norm, const RunConfig& config, std::uint64_t iterations,
                           std::size_t batch_size, std::ostream* trace);

// Writes trace.csv, profile.csv and windows.csv into out_dir and a report to
// log.
SimulationSummary cmd_simulate(const RunConfig& config, const std::filesystem::path& scores,
                               std::uint64_t iterations, std::size_t batch_size,
                               const std::filesystem::path& out_dir, std::ostream& log);

struct ClusterExemplars {
  std::uint32_t cluster_id = 0;
  std::size_t count = 0;
  std::vector<std::pair<std::string, double>> lowest;   // by omega, ascending
  std::vector<std::pair<std::string, double>> highest;  // by omega, descending
};

struct StatsReport {
  std::size_t count = 0;
  std::vector<std::pair<double, double>> quantiles;  // (probability, omega)
  double median = 0.0;
  // Pearson correlation of omega_dom and omega_prot; NaN if either is constant.
  double dom_prot_correlation = 0.0;
  std::vector<ClusterExemplars> clusters;
};

inline constexpr std::size_t kExemplarsPerCluster = 20;

// Linear-interpolation quantile of sorted values.
double quantile_sorted(std::span<const double> sorted, double p);
StatsReport compute_stats(std::span<const ComplexityRecord> records);
void write_stats_text(const StatsReport& report, std::ostream& out);
void write_stats_csv(const StatsReport& report, std::ostream& out);

StatsReport cmd_stats(const std::filesystem::path& scores, const std::optional<std::filesystem::path>& csv,
                      std::ostream& out);

}  // namespace warmup
