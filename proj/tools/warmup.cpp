// warmup: curriculum scoring and schedule simulation front end.
//
//   warmup score    --input data.tokemb --out dir/ [--config cfg.json]
//   warmup simulate --scores dir/scores.jsonl --iters 1000 --batch 256 [--config cfg.json]
//   warmup stats    --scores dir/scores.jsonl [--csv report.csv]
//   warmup synth    --spec spec.json --seed 7 --out toy.tokemb
//
// Exit codes: 0 success, 2 configuration/argument error, 3 I/O or file
// format error, 4 numeric failure, 1 anything else.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include <CLI11.hpp>

#include "warmup/error.hpp"
#include "warmup/harness.hpp"
#include "warmup/kernels.hpp"
#include "warmup/synthetic.hpp"

namespace fs = std::filesystem;
using namespace warmup;

namespace {

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Argument:
    case ErrorKind::Config:
      return 2;
    case ErrorKind::Io:
    case ErrorKind::Format:
    case ErrorKind::Length:
    case ErrorKind::Validation:
      return 3;
    case ErrorKind::Degenerate:
    case ErrorKind::Convergence:
    case ErrorKind::Range:
      return 4;
  }
  return 1;
}

// Flag overrides; each is applied only when given on the command line.
struct Overrides {
  std::optional<std::uint64_t> warmup_iters, seed, stride;
  std::optional<double> d0, theta, kappa, v_min;
  std::optional<std::size_t> clusters, kmeans_batch;
  bool d0_absolute = false, inverse = false, flip = false, linear = false;

  void add_to(CLI::App* app) {
    app->add_option("--T_w", warmup_iters, "warmup iterations");
    app->add_option("--D0", d0, "initial effective size (fraction of N unless --D0-absolute)");
    app->add_flag("--D0-absolute", d0_absolute, "treat --D0 as an image count");
    app->add_option("--seed", seed, "RNG seed");
    app->add_option("--stride", stride, "iterations between probability refreshes");
    app->add_option("--theta", theta, "saliency threshold");
    app->add_option("--kappa", kappa, "dominance steepness");
    app->add_option("--v-min", v_min, "dominance value at r_bg = 0");
    app->add_option("-K,--clusters", clusters, "number of prototypes");
    app->add_option("--kmeans-batch", kmeans_batch, "mini-batch size for k-means");
    app->add_flag("--inverse", inverse, "hard-first (inverse) curriculum");
    app->add_flag("--flip-saliency", flip, "flip the saliency direction");
    app->add_flag("--linear", linear, "linear annealing curve instead of power-2");
  }

  void apply(RunConfig& c) const {
    if (warmup_iters) c.warmup_iters = *warmup_iters;
    if (d0) {
      c.d0 = *d0;
      c.d0_is_fraction = !d0_absolute;
    }
    if (seed) c.seed = *seed;
    if (stride) c.recompute_stride = *stride;
    if (theta) c.theta = *theta;
    if (kappa) c.dominance.kappa = *kappa;
    if (v_min) c.dominance.v_min = *v_min;
    if (clusters) c.clusters = *clusters;
    if (kmeans_batch) c.kmeans_batch = *kmeans_batch;
    if (inverse) c.inverse = true;
    if (flip) c.flip_saliency = true;
    if (linear) c.curve = AnnealCurve::Linear;
  }
};

RunConfig resolve_config(const std::optional<fs::path>& path, const Overrides& o) {
  RunConfig c = path ? load_run_config(*path) : RunConfig{};
  o.apply(c);
  return c;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Data warmup curriculum: complexity scoring and schedule simulation"};
  app.require_subcommand(1);

  std::optional<fs::path> config_path;
  Overrides overrides;

  auto* score = app.add_subcommand("score", "score every image of a .tokemb dataset");
  fs::path input, out_dir;
  bool dump_masks = false;
  score->add_option("--input", input, "token embeddings (.tokemb)")->required()->check(CLI::ExistingFile);
  score->add_option("--out", out_dir, "output directory")->required();
  score->add_option("--config", config_path, "JSON config")->check(CLI::ExistingFile);
  score->add_flag("--dump-masks", dump_masks, "also write masks.jsonl");
  overrides.add_to(score);

  auto* sim = app.add_subcommand("simulate", "run the warmup sampler and record statistics");
  fs::path scores_path;
  std::optional<fs::path> sim_out;
  std::uint64_t iterations = 0;
  std::size_t batch = 256;
  sim->add_option("--scores", scores_path, "scores.jsonl")->required()->check(CLI::ExistingFile);
  sim->add_option("--iters", iterations, "iterations to simulate")->required();
  sim->add_option("--batch", batch, "batch size")->capture_default_str();
  sim->add_option("--config", config_path, "JSON config")->check(CLI::ExistingFile);
  sim->add_option("--out", sim_out, "output directory (default: next to the scores)");
  overrides.add_to(sim);

  auto* stats = app.add_subcommand("stats", "summarise a score file");
  fs::path stats_scores;
  std::optional<fs::path> csv;
  stats->add_option("--scores", stats_scores, "scores.jsonl")->required()->check(CLI::ExistingFile);
  stats->add_option("--csv", csv, "also write the report as CSV");

  auto* synth = app.add_subcommand("synth", "generate a planted-foreground fixture");
  fs::path spec_path, synth_out;
  std::uint64_t synth_seed = 0;
  synth->add_option("--spec", spec_path, "fixture spec JSON")->required()->check(CLI::ExistingFile);
  synth->add_option("--seed", synth_seed, "RNG seed")->capture_default_str();
  synth->add_option("--out", synth_out, "output .tokemb (a .truth.jsonl sidecar is written next to it)")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    kernels::configure_threads_from_env();
    if (*score) {
      cmd_score(resolve_config(config_path, overrides), input, out_dir, std::cout, dump_masks);
    } else if (*sim) {
      const fs::path out = sim_out ? *sim_out : fs::absolute(scores_path).parent_path();
      cmd_simulate(resolve_config(config_path, overrides), scores_path, iterations, batch, out, std::cout);
    } else if (*stats) {
      cmd_stats(stats_scores, csv, std::cout);
    } else if (*synth) {
      const auto fixture = generate_synthetic(load_synthetic_spec(spec_path), synth_seed);
      save_embeddings(fixture.set, synth_out);
      fs::path truth = synth_out;
      truth.replace_extension(".truth.jsonl");
      std::ofstream out(truth, std::ios::trunc);
      if (!out) throw IoError("cannot open " + truth.string());
      write_truth(fixture, out);
      std::cout << "wrote " << synth_out.string() << " and " << truth.string() << "\n";
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
