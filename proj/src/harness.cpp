#include "warmup/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <ostream>
#include <set>

#include "warmup/error.hpp"

namespace warmup {

namespace fs = std::filesystem;

namespace {

class StageClock {
 public:
  explicit StageClock(std::vector<StageTiming>& out) : out_(out), start_(std::chrono::steady_clock::now()) {}
  void lap(const std::string& stage) {
    const auto now = std::chrono::steady_clock::now();
    out_.push_back({stage, std::chrono::duration<double>(now - start_).count()});
    start_ = now;
  }

 private:
  std::vector<StageTiming>& out_;
  std::chrono::steady_clock::time_point start_;
};

// Files written under their final name only after every output is complete.
class StagedOutputs {
 public:
  std::ofstream open(const fs::path& final_path, std::ios::openmode mode = std::ios::out) {
    fs::path tmp = final_path;
    tmp += ".partial";
    staged_.push_back({tmp, final_path});
    std::ofstream out(tmp, mode | std::ios::trunc);
    if (!out) throw IoError("cannot open " + tmp.string() + " for writing");
    return out;
  }
  void commit() {
    for (const auto& [tmp, final_path] : staged_) fs::rename(tmp, final_path);
    staged_.clear();
  }
  ~StagedOutputs() {
    std::error_code ec;
    for (const auto& [tmp, final_path] : staged_) fs::remove(tmp, ec);
  }

 private:
  std::vector<std::pair<fs::path, fs::path>> staged_;
};

void close_checked(std::ofstream& out, const fs::path& what) {
  out.flush();
  if (!out) throw IoError("write failed for " + what.string());
  out.close();
}

template <typename Fn>
auto run_stage(const char* stage, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (Error& e) {
    e.prepend(stage);
    throw;
  }
}

void write_summary(const ScoringResult& r, std::ostream& out) {
  std::vector<double> omega, norm;
  std::map<std::uint32_t, std::size_t> counts;
  for (const auto& rec : r.records) {
    omega.push_back(rec.omega);
    norm.push_back(rec.omega_norm);
    ++counts[rec.cluster_id];
  }
  std::sort(omega.begin(), omega.end());
  std::sort(norm.begin(), norm.end());
  out << std::setprecision(9);
  out << "images " << r.records.size() << "\n";
  out << "clusters " << r.prototypes.k() << "\n";
  out << "pca_eigenvalue " << r.saliency.eigenvalue << "\n";
  out << "pca_iterations " << r.saliency.iterations << "\n";
  out << "kmeans_iterations " << r.prototypes.iterations << "\n";
  out << "kmeans_inertia " << r.prototypes.inertia << "\n";
  out << "decile omega omega_norm\n";
  for (int q = 0; q <= 10; ++q) {
    out << q * 10 << "% " << quantile_sorted(omega, q / 10.0) << " " << quantile_sorted(norm, q / 10.0) << "\n";
  }
  out << "cluster count\n";
  for (const auto& [c, n] : counts) out << c << " " << n << "\n";
}

}  // namespace

WarmupSchedule RunConfig::schedule(std::size_t num_images) const {
  WarmupSchedule s;
  s.warmup_iters = warmup_iters;
  s.initial_size = d0;
  s.initial_is_fraction = d0_is_fraction;
  s.num_images = num_images;
  s.inverse = inverse;
  s.seed = seed;
  s.recompute_stride = recompute_stride;
  s.curve = curve;
  return s;
}

void apply_config_json(RunConfig& c, const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  static const std::set<std::string> known = {
      "T_w",   "D0",    "D0_is_fraction", "inverse",       "seed",    "recompute_stride", "theta",
      "kappa", "v_min", "K",              "curve",         "flip_saliency", "pca_tol", "pca_max_iters",
      "kmeans_max_iters", "kmeans_batch"};
  for (const auto& [key, value] : j.items()) {
    if (!known.contains(key)) throw ConfigError("unknown config key '" + key + "'");
  }
  try {
    if (j.contains("T_w")) c.warmup_iters = j["T_w"].get<std::uint64_t>();
    if (j.contains("D0")) c.d0 = j["D0"].get<double>();
    if (j.contains("D0_is_fraction")) c.d0_is_fraction = j["D0_is_fraction"].get<bool>();
    if (j.contains("inverse")) c.inverse = j["inverse"].get<bool>();
    if (j.contains("seed")) c.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("recompute_stride")) c.recompute_stride = j["recompute_stride"].get<std::uint64_t>();
    if (j.contains("theta")) c.theta = j["theta"].get<double>();
    if (j.contains("kappa")) c.dominance.kappa = j["kappa"].get<double>();
    if (j.contains("v_min")) c.dominance.v_min = j["v_min"].get<double>();
    if (j.contains("K") && !j["K"].is_null()) c.clusters = j["K"].get<std::size_t>();
    if (j.contains("curve")) {
      const auto name = j["curve"].get<std::string>();
      if (name == "power2") {
        c.curve = AnnealCurve::Power2;
      } else if (name == "linear") {
        c.curve = AnnealCurve::Linear;
      } else {
        throw ConfigError("curve must be \"power2\" or \"linear\"");
      }
    }
    if (j.contains("flip_saliency")) c.flip_saliency = j["flip_saliency"].get<bool>();
    if (j.contains("pca_tol")) c.pca_tol = j["pca_tol"].get<double>();
    if (j.contains("pca_max_iters")) c.pca_max_iters = j["pca_max_iters"].get<std::size_t>();
    if (j.contains("kmeans_max_iters")) c.kmeans_max_iters = j["kmeans_max_iters"].get<std::size_t>();
    if (j.contains("kmeans_batch") && !j["kmeans_batch"].is_null()) {
      c.kmeans_batch = j["kmeans_batch"].get<std::size_t>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
}

RunConfig load_run_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  RunConfig c;
  try {
    apply_config_json(c, nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("config " + path.string() + ": " + e.what());
  }
  return c;
}

ScoringResult score_dataset(const TokenEmbeddingSet& set, const RunConfig& config) {
  run_stage("config", [&] { config.dominance.validate(); });
  ScoringResult r;
  StageClock clock(r.timings);

  Pc1Options pca;
  pca.tol = config.pca_tol;
  pca.max_iters = config.pca_max_iters;
  pca.seed = config.seed;
  pca.flip = config.flip_saliency;
  pca.theta = config.theta;
  r.saliency = run_stage("fit_pc1", [&] { return fit_pc1(set, pca); });
  clock.lap("fit_pc1");

  r.masks = run_stage("foreground_mask", [&] {
    return foreground_mask(saliency_scores(set, r.saliency), set.tokens_per_image(), config.theta);
  });
  clock.lap("foreground_mask");

  std::vector<ComplexityRecord> drafts(set.num_images());
  run_stage("dominance", [&] {
    for (std::size_t i = 0; i < drafts.size(); ++i) {
      drafts[i].image_id = set.image_ids()[i];
      drafts[i].r_bg = r.masks[i].bg_ratio;
      drafts[i].omega_dom = dominance(r.masks[i].bg_ratio, config.dominance);
    }
  });
  clock.lap("dominance");

  const RowMatrix means = run_stage("mean_foreground", [&] { return mean_foreground(set, r.masks); });
  clock.lap("mean_foreground");

  KMeansOptions km;
  km.k = config.clusters.value_or(desk_cluster_count(set.num_images()));
  km.seed = config.seed;
  km.max_iters = config.kmeans_max_iters;
  km.batch = config.kmeans_batch ? config.kmeans_batch : default_batch_size(set.num_images());
  r.prototypes = run_stage("fit_prototypes", [&] { return fit_prototypes(means, km); });
  clock.lap("fit_prototypes");

  const auto typ = run_stage("typicality", [&] { return typicality_all(means, r.prototypes); });
  for (std::size_t i = 0; i < drafts.size(); ++i) {
    drafts[i].cluster_id = typ[i].cluster_id;
    drafts[i].omega_prot = typ[i].omega_prot;
  }
  clock.lap("typicality");

  r.records = combine_and_normalize(std::move(drafts));
  clock.lap("combine_and_normalize");
  return r;
}

ScoringResult cmd_score(const RunConfig& config, const fs::path& input, const fs::path& out_dir, std::ostream& log,
                        bool dump_masks) {
  if (!fs::exists(input)) throw IoError("input " + input.string() + " does not exist");
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (!fs::is_directory(out_dir)) throw IoError("cannot create output directory " + out_dir.string());

  const auto start = std::chrono::steady_clock::now();
  const TokenEmbeddingSet set = run_stage("load", [&] { return load_embeddings(input); });
  const double load_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  ScoringResult r = score_dataset(set, config);
  r.timings.insert(r.timings.begin(), {"load", load_seconds});

  StagedOutputs staged;
  {
    auto out = staged.open(out_dir / "scores.jsonl");
    write_scores(r.records, out);
    close_checked(out, out_dir / "scores.jsonl");
  }
  {
    auto out = staged.open(out_dir / "protos.bin", std::ios::out | std::ios::binary);
    write_prototypes(r.prototypes.centroids, out);
    close_checked(out, out_dir / "protos.bin");
  }
  {
    auto out = staged.open(out_dir / "summary.txt");
    write_summary(r, out);
    close_checked(out, out_dir / "summary.txt");
  }
  if (dump_masks) {
    auto out = staged.open(out_dir / "masks.jsonl");
    write_masks(set.image_ids(), r.masks, out);
    close_checked(out, out_dir / "masks.jsonl");
  }
  staged.commit();

  double total = 0.0;
  log << std::fixed << std::setprecision(3);
  for (const auto& t : r.timings) {
    log << "  " << std::left << std::setw(24) << t.stage << t.seconds << " s\n";
    total += t.seconds;
  }
  log << "  " << std::left << std::setw(24) << "total" << total << " s\n";
  log.unsetf(std::ios::floatfield);
  log << "scored " << r.records.size() << " images into " << r.prototypes.k() << " clusters -> " << out_dir.string()
      << "\n";
  return r;
}

SimulationSummary simulate(std::span<const double> omega_norm, const RunConfig& config, std::uint64_t iterations,
                           std::size_t batch_size, std::ostream* trace) {
  if (iterations == 0) throw ConfigError("iterations must be positive");
  if (batch_size == 0) throw ConfigError("batch size must be positive");
  const std::size_t n = omega_norm.size();
  CurriculumSampler sampler(std::vector<double>(omega_norm.begin(), omega_norm.end()), config.schedule(n));
  const WarmupSchedule& sched = sampler.schedule();

  SimulationSummary s;
  s.iterations = iterations;
  s.d0 = sched.d0();
  s.d_max = sched.d_max();
  s.s_min = sampler.min_feasible_size();

  const std::uint64_t tw = sched.warmup_iters;
  const auto first_end = std::max<std::uint64_t>(1, tw / 20);
  const auto last_begin = static_cast<std::uint64_t>(std::ceil(0.95 * static_cast<double>(tw)));
  double first_sum = 0.0, last_sum = 0.0;
  std::size_t first_n = 0, last_n = 0;
  std::vector<double> bin_sum(100, 0.0);
  std::vector<std::size_t> bin_n(100, 0);

  std::vector<std::uint8_t> seen(n, 0);
  std::vector<std::uint64_t> window_mark(n, std::numeric_limits<std::uint64_t>::max());
  std::uint64_t draws = 0;
  WindowCheck window;
  double window_target_sum = 0.0;
  // Per image, sum over the window's draws of log(1 - p_i).
  std::vector<double> log_miss(n, 0.0);
  auto close_window = [&] {
    window.mean_target = window_target_sum / static_cast<double>(n);
    window.relative_error = std::abs(static_cast<double>(window.distinct) - window.mean_target) / window.mean_target;
    double expected = 0.0;
    for (double lm : log_miss) expected += -std::expm1(lm);
    window.expected_distinct = expected;
    window.expected_relative_error = std::abs(expected - window.mean_target) / window.mean_target;
    s.windows.push_back(window);
    window = WindowCheck{};
    window.first_draw = draws;
    window_target_sum = 0.0;
    std::fill(log_miss.begin(), log_miss.end(), 0.0);
  };
  auto add_miss = [&](const std::vector<double>& probs, std::size_t count) {
    if (count == 0) return;
    const auto c = static_cast<double>(count);
    for (std::size_t i = 0; i < n; ++i) log_miss[i] += c * std::log1p(-probs[i]);
  };

  if (trace) *trace << "t,tau,target_effective_size,realized_effective_size,distinct_seen_cumulative\n";
  for (std::uint64_t t = 1; t <= iterations; ++t) {
    sampler.advance(t);
    const auto batch = sampler.sample_batch(batch_size);
    const SamplerState& st = sampler.state();
    double batch_sum = 0.0;
    std::size_t pending = 0;  // draws of this batch not yet folded into log_miss
    for (std::size_t idx : batch) {
      batch_sum += omega_norm[idx];
      if (!seen[idx]) {
        seen[idx] = 1;
        ++s.distinct_seen;
      }
      const std::uint64_t w = draws / n;
      if (window_mark[idx] != w) {
        window_mark[idx] = w;
        ++window.distinct;
      }
      window_target_sum += st.target;
      ++draws;
      ++pending;
      if (draws % n == 0) {
        add_miss(st.probs, pending);
        pending = 0;
        close_window();
      }
    }
    add_miss(st.probs, pending);
    if (t <= tw) {
      const auto bin = std::min<std::uint64_t>(99, (t - 1) * 100 / tw);
      bin_sum[bin] += batch_sum;
      bin_n[bin] += batch.size();
      if (t <= first_end) {
        first_sum += batch_sum;
        first_n += batch.size();
      }
      if (t >= last_begin) {
        last_sum += batch_sum;
        last_n += batch.size();
      }
    }
    if (trace) {
      *trace << t << ',' << st.tau.to_string() << ',' << std::setprecision(17) << st.target << ',' << st.realized << ','
             << s.distinct_seen << '\n';
      if (t % 100 == 0) trace->flush();
    }
  }
  if (trace) trace->flush();

  const double nan = std::numeric_limits<double>::quiet_NaN();
  s.warmup_profile.resize(100);
  for (std::size_t b = 0; b < 100; ++b) s.warmup_profile[b] = bin_n[b] ? bin_sum[b] / static_cast<double>(bin_n[b]) : nan;
  s.mean_first_5pct = first_n ? first_sum / static_cast<double>(first_n) : nan;
  s.mean_last_5pct = last_n ? last_sum / static_cast<double>(last_n) : nan;
  return s;
}

SimulationSummary cmd_simulate(const RunConfig& config, const fs::path& scores, std::uint64_t iterations,
                               std::size_t batch_size, const fs::path& out_dir, std::ostream& log) {
  const auto records = load_scores(scores);
  std::vector<double> norm(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) norm[i] = records[i].omega_norm;

  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (!fs::is_directory(out_dir)) throw IoError("cannot create output directory " + out_dir.string());

  // The trace is streamed, so it is written in place rather than staged.
  std::ofstream trace(out_dir / "trace.csv", std::ios::trunc);
  if (!trace) throw IoError("cannot open " + (out_dir / "trace.csv").string());
  const auto start = std::chrono::steady_clock::now();
  SimulationSummary s;
  try {
    s = simulate(norm, config, iterations, batch_size, &trace);
  } catch (...) {
    trace.close();
    fs::remove(out_dir / "trace.csv", ec);
    throw;
  }
  close_checked(trace, out_dir / "trace.csv");
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  {
    std::ofstream out(out_dir / "profile.csv", std::ios::trunc);
    out << "warmup_percent,mean_omega_norm\n" << std::setprecision(17);
    for (std::size_t b = 0; b < s.warmup_profile.size(); ++b) out << b << ',' << s.warmup_profile[b] << '\n';
    close_checked(out, out_dir / "profile.csv");
  }
  double worst = 0.0;
  {
    std::ofstream out(out_dir / "windows.csv", std::ios::trunc);
    out << "first_draw,mean_target,distinct,relative_error,expected_distinct,expected_relative_error\n"
        << std::setprecision(17);
    for (const auto& w : s.windows) {
      out << w.first_draw << ',' << w.mean_target << ',' << w.distinct << ',' << w.relative_error << ','
          << w.expected_distinct << ',' << w.expected_relative_error << '\n';
      worst = std::max(worst, w.expected_relative_error);
    }
    close_checked(out, out_dir / "windows.csv");
  }

  log << std::setprecision(6);
  log << "images                 " << norm.size() << "\n";
  log << "iterations             " << iterations << " (T_w = " << config.warmup_iters << ", batch " << batch_size
      << (config.inverse ? ", inverse" : "") << ")\n";
  log << "D0 / D_max / S_min     " << s.d0 << " / " << s.d_max << " / " << s.s_min << "\n";
  log << "distinct seen          " << s.distinct_seen << "\n";
  log << "mean omega_norm first 5% of warmup  " << s.mean_first_5pct << "\n";
  log << "mean omega_norm last 5% of warmup   " << s.mean_last_5pct << "\n";
  log << "epoch windows          " << s.windows.size() << " (max relative error of expected distinct vs target " << worst << ")\n";
  log << "elapsed                " << seconds << " s\n";
  log << "wrote trace.csv, profile.csv, windows.csv -> " << out_dir.string() << "\n";
  return s;
}

double quantile_sorted(std::span<const double> sorted, double p) {
  if (sorted.empty()) return std::numeric_limits<double>::quiet_NaN();
  const double pos = p * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

StatsReport compute_stats(std::span<const ComplexityRecord> records) {
  if (records.empty()) throw ValidationError("no score records");
  StatsReport r;
  r.count = records.size();

  std::vector<double> omega;
  for (const auto& rec : records) omega.push_back(rec.omega);
  std::sort(omega.begin(), omega.end());
  for (double p : {0.0, 0.1, 0.25, 0.5, 0.75, 0.9, 1.0}) r.quantiles.emplace_back(p, quantile_sorted(omega, p));
  r.median = quantile_sorted(omega, 0.5);

  double mx = 0.0, my = 0.0;
  for (const auto& rec : records) {
    mx += rec.omega_dom;
    my += rec.omega_prot;
  }
  mx /= static_cast<double>(r.count);
  my /= static_cast<double>(r.count);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (const auto& rec : records) {
    const double dx = rec.omega_dom - mx, dy = rec.omega_prot - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  r.dom_prot_correlation =
      sxx > 0.0 && syy > 0.0 ? sxy / std::sqrt(sxx * syy) : std::numeric_limits<double>::quiet_NaN();

  std::map<std::uint32_t, std::vector<const ComplexityRecord*>> by_cluster;
  for (const auto& rec : records) by_cluster[rec.cluster_id].push_back(&rec);
  for (auto& [cid, members] : by_cluster) {
    std::stable_sort(members.begin(), members.end(),
                     [](const ComplexityRecord* a, const ComplexityRecord* b) { return a->omega < b->omega; });
    ClusterExemplars ex;
    ex.cluster_id = cid;
    ex.count = members.size();
    const std::size_t take = std::min(kExemplarsPerCluster, members.size());
    for (std::size_t i = 0; i < take; ++i) ex.lowest.emplace_back(members[i]->image_id, members[i]->omega);
    for (std::size_t i = 0; i < take; ++i) {
      const auto* m = members[members.size() - 1 - i];
      ex.highest.emplace_back(m->image_id, m->omega);
    }
    r.clusters.push_back(std::move(ex));
  }
  return r;
}

void write_stats_text(const StatsReport& r, std::ostream& out) {
  out << std::setprecision(9);
  out << "records " << r.count << "\n";
  out << "omega quantiles\n";
  for (const auto& [p, v] : r.quantiles) out << "  " << std::setw(5) << p * 100 << "%  " << v << "\n";
  out << "median omega " << r.median << "\n";
  out << "corr(omega_dom, omega_prot) " << r.dom_prot_correlation << "\n";
  for (const auto& c : r.clusters) {
    out << "cluster " << c.cluster_id << " (" << c.count << " images)\n";
    out << "  lowest omega:";
    for (const auto& [id, v] : c.lowest) out << " " << id << "=" << v;
    out << "\n  highest omega:";
    for (const auto& [id, v] : c.highest) out << " " << id << "=" << v;
    out << "\n";
  }
}

void write_stats_csv(const StatsReport& r, std::ostream& out) {
  out << "kind,cluster,rank,image_id,value\n" << std::setprecision(17);
  for (const auto& [p, v] : r.quantiles) out << "quantile,," << p << ",," << v << "\n";
  out << "correlation,,,," << r.dom_prot_correlation << "\n";
  for (const auto& c : r.clusters) {
    for (std::size_t i = 0; i < c.lowest.size(); ++i) {
      out << "lowest," << c.cluster_id << ',' << i << ',' << c.lowest[i].first << ',' << c.lowest[i].second << "\n";
    }
    for (std::size_t i = 0; i < c.highest.size(); ++i) {
      out << "highest," << c.cluster_id << ',' << i << ',' << c.highest[i].first << ',' << c.highest[i].second << "\n";
    }
  }
}

StatsReport cmd_stats(const fs::path& scores, const std::optional<fs::path>& csv, std::ostream& out) {
  const auto records = load_scores(scores);
  StatsReport r = compute_stats(records);
  write_stats_text(r, out);
  if (csv) {
    std::ofstream f(*csv, std::ios::trunc);
    if (!f) throw IoError("cannot open " + csv->string());
    write_stats_csv(r, f);
    close_checked(f, *csv);
  }
  return r;
}

}  // namespace warmup
