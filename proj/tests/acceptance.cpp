// Acceptance runner: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails. Usage: aad_acceptance <path to aad CLI>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "aad/adapt.hpp"
#include "aad/datasets.hpp"
#include "aad/error.hpp"
#include "aad/memory_bank.hpp"
#include "aad/metrics.hpp"
#include "aad/objectives.hpp"
#include "instances.hpp"
#include "oracles.hpp"

using namespace aad;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

int failures = 0;

void report(int id, const char* name, bool ok, const std::string& detail) {
  std::printf("%s  %d %s: %s\n", ok ? "PASS" : "FAIL", id, name, detail.c_str());
  std::fflush(stdout);
  if (!ok) ++failures;
}

std::string format(const char* fmt, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, fmt, args...);
  return buf;
}

constexpr int kSeeds = 5;

struct ToySeed {
  Dataset target;
  MlpModel source_model;
  double source_acc = 0.0;
  double target_acc_before = 0.0;
};

ToySeed toy_seed(std::uint64_t seed) {
  const Dataset src = make_twin_moons({300, 0.1, 0.0, seed});
  PretrainConfig pc;
  pc.seed = seed;
  auto pre = pretrain_source(init_model({2, 15, 15, 2}, seed), src, pc);
  ToySeed t{rotate_dataset(src, 30.0), std::move(pre.model), pre.report.accuracy, 0.0};
  t.target_acc_before = evaluate(t.source_model, t.target).accuracy;
  return t;
}

void gradient_fidelity() {
  using instances::GradObjective;
  const auto t0 = Clock::now();
  double worst = 0.0;
  std::string per;
  for (GradObjective o : {GradObjective::AaD, GradObjective::MI, GradObjective::BnmFNorm, GradObjective::NC,
                          GradObjective::InfoNCE, GradObjective::CrossEntropy}) {
    double w = 0.0;
    for (std::uint64_t seed = 0; seed < 100; ++seed)
      w = std::max(w, instances::gradient_instance_error(o, seed + 10000));
    worst = std::max(worst, w);
    per += format(" %s=%.1e", instances::name(o), w);
  }
  const double elapsed = seconds_since(t0);
  report(1, "gradient fidelity", worst <= 1e-4 && elapsed < 30.0,
         format("max rel err %.2e over 6x100 instances (%s), %.2f s", worst, per.c_str() + 1, elapsed));
}

void jensen_dominance() {
  const auto t0 = Clock::now();
  double min_gap = INFINITY, max_tight = 0.0;
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    const auto inst = instances::bound_instance(seed + 20000);
    min_gap = std::min(min_gap, jensen_upper_bound(inst.anchor, inst.preds, inst.close, inst.background) -
                                    exact_aad_nll(inst.anchor, inst.preds, inst.close, inst.background));
  }
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const auto inst = instances::bound_instance(seed + 30000, true);
    max_tight = std::max(max_tight, std::abs(jensen_upper_bound(inst.anchor, inst.preds, inst.close, inst.background) -
                                             exact_aad_nll(inst.anchor, inst.preds, inst.close, inst.background)));
  }
  const double elapsed = seconds_since(t0);
  report(2, "bound dominance", min_gap >= -1e-9 && max_tight <= 1e-9 && elapsed < 10.0,
         format("min(bound - exact) = %.3e over 1000 instances, max |gap| on 200 identical-row instances = %.1e, "
                "%.2f s",
                min_gap, max_tight, elapsed));
}

void knn_oracle() {
  std::size_t mismatches = 0, insufficient = 0;
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const auto inst = instances::bank_instance(seed + 40000);
    const auto expected =
        oracle::brute_force_knn(inst.bank.features(), inst.bank.sample_ids(), inst.query, inst.k, inst.exclude);
    if (expected.size() < inst.k) {
      ++insufficient;
      try {
        inst.bank.knn(inst.query, inst.k, inst.exclude);
        ++mismatches;
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::InsufficientData) ++mismatches;
      }
      continue;
    }
    if (inst.bank.knn(inst.query, inst.k, inst.exclude).ids != expected) ++mismatches;
  }

  std::size_t ring_bad = 0;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    auto g = oracle::rng(seed + 50000);
    const std::size_t capacity = instances::pick(g, 1, 128);
    MemoryBank bank(BankMode::Ring, capacity, 3, 2);
    std::vector<std::int64_t> history;
    const std::size_t steps = instances::pick(g, 1, 40);
    for (std::size_t s = 0; s < steps; ++s) {
      const std::size_t n = instances::pick(g, 1, 32);
      std::vector<std::int64_t> ids(n);
      for (auto& id : ids) id = static_cast<std::int64_t>(instances::pick(g, 0, 100000));
      bank.update(ids, oracle::random_matrix(g, n, 3), oracle::random_simplex_rows(g, n, 2));
      history.insert(history.end(), ids.begin(), ids.end());
    }
    const std::size_t keep = std::min(capacity, history.size());
    std::multiset<std::int64_t> expected(history.end() - static_cast<std::ptrdiff_t>(keep), history.end());
    std::multiset<std::int64_t> held;
    for (auto id : bank.sample_ids())
      if (id >= 0) held.insert(id);
    if (held != expected || bank.filled() != keep) ++ring_bad;
  }
  report(3, "knn oracle", mismatches == 0 && ring_bad == 0,
         format("%zu/200 banks differ from brute force (%zu expected InsufficientData), %zu/50 ring sequences wrong",
                mismatches, insufficient, ring_bad));
}

struct ToyRuns {
  std::vector<ToySeed> seeds;
  std::vector<AdaptResult> aad, attract, no_decay;
};

ToyRuns toy_reproduction() {
  const auto t0 = Clock::now();
  ToyRuns runs;
  bool sources_ok = true;
  std::string table;
  for (std::uint64_t s = 0; s < kSeeds; ++s) {
    runs.seeds.push_back(toy_seed(s));
    const ToySeed& t = runs.seeds.back();
    sources_ok = sources_ok && t.source_acc >= 0.99;
    AdaptConfig cfg;
    cfg.seed = s;
    cfg.objective = Objective::AaD;
    runs.aad.push_back(adapt(t.source_model, t.target, cfg));
    cfg.objective = Objective::AttractOnly;
    runs.attract.push_back(adapt(t.source_model, t.target, cfg));
    cfg.objective = Objective::AaDNoDecay;
    runs.no_decay.push_back(adapt(t.source_model, t.target, cfg));
    table += format("      seed %d: source %.4f | target before %.4f | aad %.4f  attract-only %.4f  aad-no-decay %.4f\n",
                    static_cast<int>(s), t.source_acc, t.target_acc_before, *runs.aad.back().history.acc.back(),
                    *runs.attract.back().history.acc.back(), *runs.no_decay.back().history.acc.back());
  }
  const double elapsed = seconds_since(t0);

  std::vector<double> aad_acc;
  int beats_source = 0, ge_attract = 0, ge_no_decay = 0;
  for (int s = 0; s < kSeeds; ++s) {
    const double a = *runs.aad[s].history.acc.back();
    aad_acc.push_back(a);
    beats_source += a > runs.seeds[s].target_acc_before;
    ge_attract += a >= *runs.attract[s].history.acc.back();
    ge_no_decay += a >= *runs.no_decay[s].history.acc.back();
  }
  std::vector<double> sorted = aad_acc;
  std::sort(sorted.begin(), sorted.end());
  const double median = sorted[kSeeds / 2];
  std::fputs(table.c_str(), stdout);
  const bool ok = sources_ok && median >= 0.95 && beats_source == kSeeds && ge_attract >= 4 && ge_no_decay >= 4 &&
                  elapsed < 120.0;
  report(4, "toy reproduction", ok,
         format("source >= 0.99 on all seeds: %s; AaD median %.4f; beats source-only %d/5; >= attract-only %d/5; "
                ">= aad-no-decay %d/5; %.1f s",
                sources_ok ? "yes" : "no", median, beats_source, ge_attract, ge_no_decay, elapsed));
  return runs;
}

void open_set_arithmetic() {
  const double h1 = open_set_scores(67.0, 28.0, 25).hos;
  const double h2 = open_set_scores(81.8, 26.3, 25).hos;
  auto g = oracle::rng(60000);
  int violations = 0;
  for (int i = 0; i < 1000; ++i) {
    const double a = oracle::uniform(g, 0.0, 100.0), b = oracle::uniform(g, 0.0, 100.0);
    const double hos = open_set_scores(a, b, 10).hos;
    if (hos > 0.5 * (a + b) + 1e-12 || hos > 2.0 * std::min(a, b) + 1e-12) ++violations;
  }
  report(5, "open-set arithmetic",
         std::abs(h1 - 39.5) <= 0.05 && std::abs(h2 - 39.8) <= 0.05 && violations == 0,
         format("HOS(67.0, 28.0) = %.4f, HOS(81.8, 26.3) = %.4f, %d/1000 harmonic > arithmetic", h1, h2, violations));
}

void lambda_checks() {
  bool ok = lambda_schedule(0, 1000, 3.7) == 1.0;
  for (std::size_t it = 0; it <= 1000; it += 37) ok = ok && lambda_schedule(it, 1000, 0.0) == 1.0;
  const double end = lambda_schedule(1000, 1000, 1.0);
  ok = ok && std::abs(end - 1.0 / 11.0) <= 1e-12;
  bool monotone = true;
  for (double beta : {0.5, 1.0, 2.0, 5.0}) {
    double prev = lambda_schedule(0, 9999, beta);
    for (std::size_t it = 1; it <= 9999; ++it) {
      const double v = lambda_schedule(it, 9999, beta);
      monotone = monotone && v <= prev;
      prev = v;
    }
  }
  report(6, "lambda schedule", ok && monotone,
         format("lambda(0) = 1, beta = 0 constant, lambda(max, 1) - 1/11 = %.1e, monotone on 10^4 grid: %s",
                end - 1.0 / 11.0, monotone ? "yes" : "no"));
}

void snd_selection(const ToyRuns& runs) {
  const std::vector<double> betas{0.0, 1.0, 2.0, 5.0};
  int hits = 0;
  std::printf("      seed  beta   snd       accuracy  selected\n");
  for (int s = 0; s < kSeeds; ++s) {
    const ToySeed& t = runs.seeds[s];
    const std::vector<std::uint64_t> seeds{static_cast<std::uint64_t>(s)};
    const SweepResult sweep = sweep_beta(t.source_model, t.target, betas, AdaptConfig{}, seeds);
    std::vector<double> acc;
    for (const auto& row : sweep.rows) acc.push_back(*row.accuracy);
    std::vector<double> sorted = acc;
    std::sort(sorted.rbegin(), sorted.rend());
    const bool hit = acc[sweep.selected] >= sorted[1];
    hits += hit;
    for (const auto& row : sweep.rows)
      std::printf("      %4d  %4.1f  %.5f  %.4f    %s\n", s, row.beta, row.snd, *row.accuracy,
                  row.selected ? (hit ? "*" : "* (outside top-2)") : "");
  }
  report(7, "SND selection", hits >= 3, format("argmax-SND beta within top-2 by accuracy in %d/5 seed groups", hits));
}

void ratio_trend(const ToyRuns& runs) {
  int passing = 0, rising = 0;
  std::string detail;
  for (int s = 0; s < kSeeds; ++s) {
    const auto& h = runs.aad[s].history;
    if (*h.acc.back() < 0.95) continue;
    ++passing;
    rising += h.ratio_same.back() >= h.ratio_same.front();
    detail += format(" seed %d %.4f->%.4f;", s, h.ratio_same.front(), h.ratio_same.back());
  }
  report(8, "same-prediction trend", passing > 0 && rising == passing,
         format("%d/%d AaD runs with accuracy >= 0.95 end at least as high as epoch 1:%s", rising, passing,
                detail.c_str()));
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void cli_determinism(const std::string& cli) {
  const fs::path root = fs::temp_directory_path() / ("aad_acceptance_" + std::to_string(::getpid()));
  fs::remove_all(root);
  fs::create_directories(root / "a");
  fs::create_directories(root / "b");
  const std::string quoted = "'" + cli + "'";
  const std::string pre = quoted + " pretrain --data moons:seed=3 --seed 3 --out '" + (root / "src.json").string() +
                          "' > /dev/null";
  const std::string adapt_args = " adapt --ckpt ../src.json --target moons:seed=3,rot=30 --seed 7 --k 3 --beta 5 "
                                 "--out-history history.json --out-ckpt adapted.json > /dev/null";
  bool ran = std::system(pre.c_str()) == 0;
  for (const char* dir : {"a", "b"}) {
    const std::string cmd = "cd '" + (root / dir).string() + "' && " + quoted + adapt_args;
    ran = ran && std::system(cmd.c_str()) == 0;
  }
  const std::string ha = slurp(root / "a/history.json"), hb = slurp(root / "b/history.json");
  const std::string ca = slurp(root / "a/adapted.json"), cb = slurp(root / "b/adapted.json");
  const bool same = ran && !ha.empty() && !ca.empty() && ha == hb && ca == cb;
  report(9, "CLI determinism", same,
         format("two adapt invocations: history %zu bytes %s, checkpoint %zu bytes %s", ha.size(),
                ha == hb ? "identical" : "DIFFER", ca.size(), ca == cb ? "identical" : "DIFFER"));
  fs::remove_all(root);
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 2) {
    std::fprintf(stderr, "usage: %s <path to aad CLI>\n", argv[0]);
    return 2;
  }
  gradient_fidelity();
  jensen_dominance();
  knn_oracle();
  const ToyRuns runs = toy_reproduction();
  open_set_arithmetic();
  lambda_checks();
  snd_selection(runs);
  ratio_trend(runs);
  cli_determinism(fs::absolute(argv[1]).string());
  std::printf("%d criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
