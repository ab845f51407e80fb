// Acceptance suite. Prints one PASS/FAIL line per criterion and exits
// non-zero if any criterion fails or exceeds its time budget.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <sstream>

#include <omp.h>

#include "oracles.hpp"
#include "warmup/complexity.hpp"
#include "warmup/error.hpp"
#include "warmup/harness.hpp"
#include "warmup/random.hpp"
#include "warmup/saliency.hpp"
#include "warmup/scheduler.hpp"
#include "warmup/synthetic.hpp"

using namespace warmup;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

// Accumulates the first failure message while letting the check run to the end.
struct Verdict {
  bool pass = true;
  std::ostringstream note;
  void require(bool ok, const std::string& why) {
    if (!ok && pass) note << "first failure: " << why << "; ";
    pass = pass && ok;
  }
};

std::vector<double> random_probs(std::size_t n, Rng& rng) {
  std::vector<double> p(n);
  double total = 0.0;
  for (auto& x : p) total += (x = -std::log(rng.uniform() + 1e-300));  // flat Dirichlet
  for (auto& x : p) x /= total;
  return p;
}

fs::path scratch_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("warmup_acceptance_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

Outcome effective_size_monte_carlo() {
  Verdict v;
  Rng rng(2024);
  const std::size_t sizes[] = {10, 50, 100};
  double worst = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const auto p = random_probs(sizes[trial % 3], rng);
    const auto mc = oracle::monte_carlo_distinct(p, 20000, static_cast<std::uint32_t>(7919 * (trial + 1)));
    const double z = std::abs(effective_size(p) - mc.mean) / mc.standard_error;
    worst = std::max(worst, z);
    v.require(z <= 3.0, "vector " + std::to_string(trial) + " deviates by " + std::to_string(z) + " SE");
  }
  v.note << "50 vectors, worst deviation " << worst << " SE (limit 3)";
  return {v.pass, v.note.str()};
}

Outcome uniform_endpoint() {
  Verdict v;
  double worst = 0.0;
  for (std::size_t n : {1u, 2u, 3u, 10u, 100u, 1000u, 4096u, 100000u}) {
    const std::vector<double> u(n, 1.0 / static_cast<double>(n));
    const double direct =
        static_cast<double>(static_cast<long double>(n) *
                            (1.0L - std::pow(1.0L - 1.0L / static_cast<long double>(n), static_cast<long double>(n))));
    const double err = std::abs(effective_size(u) - direct);
    worst = std::max(worst, err);
    v.require(err <= 1e-9, "N = " + std::to_string(n) + " off by " + std::to_string(err));
  }
  const double e1000 = effective_size(std::vector<double>(1000, 1e-3));
  const double asym = 1000.0 * (1.0 - std::exp(-1.0));
  const double rel = std::abs(e1000 / asym - 1.0);
  v.require(rel <= 0.002, "N = 1000 is " + std::to_string(rel) + " from N(1 - 1/e)");
  v.note << "max abs error " << worst << "; N=1000 gives " << std::setprecision(10) << e1000 << " vs " << asym
         << " (rel " << rel << ", limit 0.002)";
  return {v.pass, v.note.str()};
}

Outcome temperature_round_trip() {
  Verdict v;
  Rng rng(99);
  double worst_ratio = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 20 + rng.below(2000);
    std::vector<double> s(n);
    for (auto& x : s) x = rng.uniform();
    const double tau_star = std::pow(10.0, -3.0 + 6.0 * rng.uniform());
    const double target = effective_size(sampling_probs(s, Temperature::finite(tau_star)));
    const double tol = std::max(0.5, 1e-6 * target);
    try {
      const auto sol = solve_temperature(s, target);
      const double got = effective_size(sampling_probs(s, sol.tau));
      worst_ratio = std::max(worst_ratio, std::abs(got - target) / tol);
      v.require(std::abs(got - target) <= tol, "trial " + std::to_string(trial) + " missed by " +
                                                   std::to_string(std::abs(got - target)));
    } catch (const Error& e) {
      v.require(false, "trial " + std::to_string(trial) + " (tau* = " + std::to_string(tau_star) + "): " + e.what());
    }
  }
  v.note << "100 planted temperatures in [1e-3, 1e3], worst miss " << worst_ratio << " x tolerance";
  return {v.pass, v.note.str()};
}

Outcome schedule_shape() {
  Verdict v;
  WarmupSchedule sched;
  sched.warmup_iters = 10000;
  sched.num_images = 5000;
  sched.initial_size = 0.1;
  v.require(schedule_target(0, sched) == sched.d0(), "target(0) != D0");
  v.require(schedule_target(sched.warmup_iters, sched) == sched.d_max(), "target(T_w) != D_max");
  double prev = -1.0;
  bool monotone = true;
  for (std::uint64_t t = 0; t <= 10000; ++t) {
    const double x = schedule_target(t, sched);
    monotone = monotone && x >= prev;
    prev = x;
  }
  v.require(monotone, "schedule decreases somewhere on the grid");

  // Post-warmup: constant target and the uniform sentinel.
  Rng rng(5);
  std::vector<double> scores(500);
  for (auto& x : scores) x = rng.uniform();
  WarmupSchedule small;
  small.warmup_iters = 50;
  small.recompute_stride = 7;
  CurriculumSampler sampler(scores, small);
  bool uniform_after = true;
  for (std::uint64_t t = 1; t <= 150; ++t) {
    sampler.advance(t);
    if (t > small.warmup_iters) {
      const auto& st = sampler.state();
      uniform_after = uniform_after && st.tau.is_uniform() && st.target == sampler.schedule().d_max() &&
                      st.probs == std::vector<double>(500, 1.0 / 500.0);
    }
  }
  v.require(uniform_after, "sampler not exactly uniform after T_w");
  v.note << "D0 = " << sched.d0() << ", D_max = " << std::setprecision(10) << sched.d_max()
         << ", 10001-point grid monotone, uniform phase exact";
  return {v.pass, v.note.str()};
}

Outcome dominance_anchors() {
  Verdict v;
  Rng rng(12);
  double worst = 0.0;
  for (int i = 0; i < 20; ++i) {
    const DominanceParams p{0.5 + 40.0 * rng.uniform(), 1e-5 + (0.5 - 2e-5) * rng.uniform()};
    const double err = std::abs(dominance(0.0, p) - p.v_min);
    worst = std::max(worst, err);
    v.require(err <= 1e-12, "v_min anchor off by " + std::to_string(err));
  }
  const DominanceParams def;
  double prev = dominance(0.0, def);
  bool strict = true;
  for (int i = 1; i < 1000; ++i) {
    const double x = dominance(i / 999.0, def);
    strict = strict && x > prev;
    prev = x;
  }
  v.require(strict, "not strictly increasing at kappa = 12, v_min = 0.002");
  v.note << "20 parameter pairs, max anchor error " << worst << "; 1000-point grid strictly increasing";
  return {v.pass, v.note.str()};
}

Outcome curriculum_direction() {
  Verdict v;
  const fs::path dir = scratch_dir("direction");
  // Score set produced by the scoring pipeline on a 10 000-image planted
  // fixture with 20 visual concepts.
  SyntheticSpec spec;
  spec.num_images = 10000;
  spec.tokens_per_image = 16;
  spec.dim = 16;
  spec.clusters = 20;
  spec.fg_min = 0.1;
  spec.fg_max = 0.9;
  save_embeddings(generate_synthetic(spec, 7).set, dir / "fixture.tokemb");
  RunConfig score_cfg;
  score_cfg.clusters = spec.clusters;
  std::ostringstream score_log;
  cmd_score(score_cfg, dir / "fixture.tokemb", dir, score_log);
  std::ostringstream log;
  RunConfig cfg;
  cfg.warmup_iters = 2000;
  const auto fwd = cmd_simulate(cfg, dir / "scores.jsonl", 2000, 256, dir / "forward", log);
  cfg.inverse = true;
  const auto inv = cmd_simulate(cfg, dir / "scores.jsonl", 2000, 256, dir / "inverse", log);
  const double fwd_gap = fwd.mean_last_5pct - fwd.mean_first_5pct;
  const double inv_gap = inv.mean_first_5pct - inv.mean_last_5pct;
  v.require(fwd_gap >= 0.2, "forward gap " + std::to_string(fwd_gap) + " < 0.2");
  v.require(inv_gap > 0.0, "inverse mode does not reverse the ordering");
  v.note << std::setprecision(4) << "forward first/last 5% mean omega_norm " << fwd.mean_first_5pct << " / "
         << fwd.mean_last_5pct << " (gap " << fwd_gap << ", need >= 0.2); inverse " << inv.mean_first_5pct << " / "
         << inv.mean_last_5pct << " (reversed gap " << inv_gap << ")";
  fs::remove_all(dir);
  return {v.pass, v.note.str()};
}

Outcome cluster_symmetry() {
  Verdict v;
  Rng rng(31);
  double worst = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t m = 1 + rng.below(200);
    std::vector<double> a(m);
    for (auto& x : a) x = rng.uniform();
    a[0] = 0.0;
    a[m - 1] = 1.0;
    auto b = a;
    for (std::size_t j = m; j > 1; --j) std::swap(b[j - 1], b[rng.below(j)]);
    // Cluster 0, cluster 1 and an unrelated third cluster, shuffled together.
    std::vector<std::pair<double, int>> items;
    for (double x : a) items.emplace_back(x, 0);
    for (double x : b) items.emplace_back(x, 1);
    for (std::size_t k = 0; k < 1 + rng.below(100); ++k) items.emplace_back(rng.uniform(), 2);
    for (std::size_t j = items.size(); j > 1; --j) std::swap(items[j - 1], items[rng.below(j)]);
    std::vector<double> s;
    for (const auto& [x, c] : items) s.push_back(x);
    for (double tau : {0.01, 0.1, 1.0, 10.0}) {
      const auto p = sampling_probs(s, Temperature::finite(tau));
      double m0 = 0.0, m1 = 0.0;
      for (std::size_t i = 0; i < p.size(); ++i) {
        if (items[i].second == 0) m0 += p[i];
        if (items[i].second == 1) m1 += p[i];
      }
      worst = std::max(worst, std::abs(m0 - m1));
      v.require(std::abs(m0 - m1) <= 1e-9, "mass gap " + std::to_string(std::abs(m0 - m1)));
    }
  }
  v.note << "50 cluster pairs x 4 temperatures, max mass gap " << worst << " (limit 1e-9)";
  return {v.pass, v.note.str()};
}

Outcome saliency_recovery() {
  Verdict v;
  double worst_align = 1.0, worst_agree = 1.0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    SyntheticSpec spec;
    spec.num_images = 300;
    spec.tokens_per_image = 16;
    spec.dim = 32;
    spec.clusters = 4;
    spec.fg_min = 0.2;
    spec.fg_max = 0.8;
    spec.noise = 1.0;
    spec.offset = 10.0 * spec.noise;
    spec.axis = static_cast<std::size_t>(seed % spec.dim);
    const auto f = generate_synthetic(spec, seed);
    const auto model = fit_pc1(f.set);
    double align = 0.0;
    for (std::size_t k = 0; k < spec.dim; ++k) align += model.direction[k] * f.direction[k];
    align = std::abs(align);
    const auto masks = foreground_mask(saliency_scores(f.set, model), spec.tokens_per_image, model.theta);
    std::size_t agree = 0, total = 0;
    for (std::size_t i = 0; i < masks.size(); ++i)
      for (std::size_t j = 0; j < spec.tokens_per_image; ++j, ++total) agree += masks[i].mask[j] == f.masks[i][j];
    const double rate = static_cast<double>(agree) / static_cast<double>(total);
    worst_align = std::min(worst_align, align);
    worst_agree = std::min(worst_agree, rate);
    v.require(align > 0.99, "alignment " + std::to_string(align));
    v.require(rate >= 0.95, "mask agreement " + std::to_string(rate));
  }

  double worst_dense = 0.0;
  Rng rng(8);
  for (std::uint32_t d = 1; d <= 16; ++d) {
    const std::size_t n = 30, l = 7;
    std::vector<float> data(n * l * d);
    for (std::size_t t = 0; t < n * l; ++t)
      for (std::size_t k = 0; k < d; ++k) data[t * d + k] = static_cast<float>(rng.normal() * (1.0 + 0.7 * k));
    std::vector<std::string> ids;
    for (std::size_t i = 0; i < n; ++i) ids.push_back(std::to_string(i));
    const TokenEmbeddingSet set(n, static_cast<std::uint32_t>(l), d, std::move(data), std::move(ids));
    const auto model = fit_pc1(set);
    const Eigen::VectorXd ref = oracle::dense_pc1(set);
    double sign_dot = 0.0;
    for (std::uint32_t k = 0; k < d; ++k) sign_dot += ref(k) * model.direction[k];
    const double sign = sign_dot < 0.0 ? -1.0 : 1.0;
    double err = 0.0;
    for (std::uint32_t k = 0; k < d; ++k) err = std::max(err, std::abs(sign * ref(k) - model.direction[k]));
    worst_dense = std::max(worst_dense, err);
    v.require(err <= 1e-6, "d = " + std::to_string(d) + " differs from the dense solver by " + std::to_string(err));
  }
  v.note << std::setprecision(6) << "min |<u1, truth>| " << worst_align << ", min mask agreement " << worst_agree
         << ", max component error vs dense eigensolver (d <= 16) " << worst_dense;
  return {v.pass, v.note.str()};
}

// Labels under the final centroids, with point 0 in group 0.
std::vector<int> final_labels(const RowMatrix& x, const PrototypeModel& m) {
  std::vector<int> out(x.rows);
  std::vector<std::uint32_t> raw(x.rows);
  for (std::size_t i = 0; i < x.rows; ++i) raw[i] = typicality(x.row(i), m).cluster_id;
  for (std::size_t i = 0; i < x.rows; ++i) out[i] = raw[i] == raw[0] ? 0 : 1;
  return out;
}

Outcome kmeans_oracle() {
  Verdict v;
  Rng rng(4242);
  std::size_t instances = 0, optimal = 0;
  double worst = 0.0;
  bool monotone = true;
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 3 + rng.below(10);
    RowMatrix x(n, 2);
    const double sep = 4.0 * rng.uniform();
    for (std::size_t i = 0; i < n; ++i) {
      x(i, 0) = rng.normal() + (i % 2 ? sep : 0.0);
      x(i, 1) = rng.normal();
    }
    const auto m = fit_prototypes(x, {.k = 2, .seed = static_cast<std::uint64_t>(trial)});
    ++instances;
    for (std::size_t i = 1; i < m.inertia_history.size(); ++i)
      monotone = monotone && m.inertia_history[i] <= m.inertia_history[i - 1];
    v.require(m.converged, "instance " + std::to_string(trial) + " did not converge");

    // The partition Lloyd converged to, as an enumerated two-way split.
    const auto near = final_labels(x, m);
    const auto parts = oracle::all_two_partitions(x);
    const oracle::TwoPartition* basin = nullptr;
    double best = INFINITY;
    for (const auto& p : parts) {
      best = std::min(best, p.inertia);
      if (p.label == near) basin = &p;
    }
    if (basin == nullptr || !basin->lloyd_fixed_point) {
      v.require(false, "instance " + std::to_string(trial) + " did not stop at an enumerated fixed point");
      continue;
    }
    const double err = std::abs(m.inertia - basin->inertia);
    worst = std::max(worst, err);
    v.require(err <= 1e-9, "inertia off its basin optimum by " + std::to_string(err));
    if (std::abs(m.inertia - best) <= 1e-9) ++optimal;
  }
  v.require(monotone, "inertia increased during Lloyd iterations");
  v.note << instances << " instances (N <= 12), max |inertia - basin fixed point| " << worst
         << ", global optimum reached in " << optimal << ", inertia non-increasing: " << (monotone ? "yes" : "no");
  return {v.pass, v.note.str()};
}

Outcome end_to_end_determinism() {
  Verdict v;
  const fs::path dir = scratch_dir("determinism");
  SyntheticSpec spec;
  spec.num_images = 400;
  spec.tokens_per_image = 16;
  spec.dim = 24;
  spec.clusters = 5;
  spec.fg_min = 0.1;
  spec.fg_max = 0.9;
  save_embeddings(generate_synthetic(spec, 21).set, dir / "fixture.tokemb");
  RunConfig cfg;
  cfg.seed = 1234;
  std::ostringstream log;
  const int threads = omp_get_max_threads();
  cmd_score(cfg, dir / "fixture.tokemb", dir / "a", log);
  cmd_score(cfg, dir / "fixture.tokemb", dir / "b", log);
  omp_set_num_threads(1);
  cmd_score(cfg, dir / "fixture.tokemb", dir / "t1", log);
  omp_set_num_threads(4);
  cmd_score(cfg, dir / "fixture.tokemb", dir / "t4", log);
  omp_set_num_threads(threads);
  for (const char* name : {"scores.jsonl", "protos.bin"}) {
    const auto a = slurp(dir / "a" / name);
    v.require(!a.empty(), std::string(name) + " is empty");
    v.require(a == slurp(dir / "b" / name), std::string(name) + " differs between reruns");
    v.require(a == slurp(dir / "t1" / name), std::string(name) + " differs at 1 thread");
    v.require(a == slurp(dir / "t4" / name), std::string(name) + " differs at 4 threads");
  }
  v.note << "scores.jsonl and protos.bin byte-identical across reruns and at 1, 4 and " << threads << " threads";
  fs::remove_all(dir);
  return {v.pass, v.note.str()};
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* name;
    double budget_seconds;  // 0: no budget
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria = {
      {1, "effective size matches Monte Carlo distinct counts", 60, effective_size_monte_carlo},
      {2, "uniform endpoint of the effective size", 1, uniform_endpoint},
      {3, "temperature solver round trip", 30, temperature_round_trip},
      {4, "schedule endpoints, monotonicity, uniform phase", 1, schedule_shape},
      {5, "dominance anchor and monotonicity", 1, dominance_anchors},
      {6, "easy-first ordering and its inverse", 120, curriculum_direction},
      {7, "cluster symmetry of sampling mass", 0, cluster_symmetry},
      {8, "saliency direction and mask recovery", 0, saliency_recovery},
      {9, "k-means against exhaustive partitions", 0, kmeans_oracle},
      {10, "end-to-end scoring determinism", 0, end_to_end_determinism},
  };

  int failures = 0;
  for (const auto& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::ostringstream timing;
    timing << std::fixed << std::setprecision(2) << secs << " s";
    if (c.budget_seconds > 0) {
      timing << " / budget " << c.budget_seconds << " s";
      if (secs > c.budget_seconds) {
        o.pass = false;
        o.detail += "; over time budget";
      }
    }
    if (!o.pass) ++failures;
    std::cout << (o.pass ? "PASS" : "FAIL") << " [" << c.id << "] " << c.name << " (" << timing.str() << "): "
              << o.detail << std::endl;
  }
  std::cout << (failures == 0 ? "all acceptance criteria passed" : std::to_string(failures) + " criteria failed")
            << std::endl;
  return failures == 0 ? 0 : 1;
}
