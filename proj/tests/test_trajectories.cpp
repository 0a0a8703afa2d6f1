#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>

#include "pcert/errors.hpp"
#include "pcert/trajectories.hpp"

using namespace pcert;

namespace {

ExperimentConfig small_config() {
  ExperimentConfig cfg;
  cfg.model.layer_sizes = {2, 8, 2};
  cfg.optimizer.kind = OptKind::GD;
  cfg.optimizer.learning_rate = 0.1;
  cfg.dataset.kind = DatasetSpec::Kind::Blobs;
  cfg.dataset.n_train = 120;
  cfg.dataset.n_test = 120;
  cfg.dataset.separation = 6.0;
  cfg.horizon = 150;
  cfg.mode = Mode::TrainTime;
  cfg.budget_grid = {0.0, 1.0, 2.0, 4.0};
  cfg.p = Norm::L2;
  cfg.rho = 1.0;
  cfg.attack = AttackKind::PGD;
  cfg.attack_steps = 20;
  cfg.alpha = 0.15;
  cfg.clean_runs = 3;
  cfg.master_seed = 71;
  return cfg;
}

TrajectorySample synthetic_sample(int index, double delta, double g_p,
                                  double g_c, double alpha) {
  TrajectorySample s;
  s.index = index;
  s.seed = 1000 + index;
  s.delta = delta;
  s.theta0 = {0.1 * index};
  s.theta0_succ = {0.1 * index + 0.01};
  s.theta_final = {1.0 * index};
  s.theta_final_succ = {1.0 * index + 0.01};
  s.g_p = g_p;
  s.gap = g_c - g_p;
  s.safe = s.gap <= alpha;
  return s;
}

}  // namespace

TEST_CASE("clean_baseline: K = 1 equals a single clean run") {
  const auto cfg = small_config();
  const auto rep = clean_baseline(cfg, 1);
  REQUIRE(rep.per_run.size() == 1);
  CHECK(rep.g_c == rep.per_run[0]);
  CHECK_FALSE(rep.user_set);
}

TEST_CASE("clean_baseline: override is returned unchanged and flagged") {
  auto cfg = small_config();
  cfg.g_c_override = 0.9;
  const auto rep = clean_baseline(cfg, 5);
  CHECK(rep.g_c == 0.9);
  CHECK(rep.user_set);
  CHECK(rep.per_run.empty());
}

TEST_CASE("clean_baseline: median matches an independent sort") {
  const auto cfg = small_config();
  const auto rep = clean_baseline(cfg, 5);
  REQUIRE(rep.per_run.size() == 5);
  auto sorted = rep.per_run;
  std::sort(sorted.begin(), sorted.end());
  CHECK(rep.g_c == sorted[2]);
}

TEST_CASE("generate: deterministic in the master seed, bit-exact") {
  const auto cfg = small_config();
  const double g_c = clean_baseline(cfg, 3).g_c;
  const auto a = generate(cfg, 4, g_c, 2);
  const auto b = generate(cfg, 4, g_c, 1);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].gap == b[i].gap);
    CHECK(a[i].theta_final == b[i].theta_final);
    CHECK(a[i].theta0_succ == b[i].theta0_succ);
    CHECK(a[i].theta_final_succ == b[i].theta_final_succ);
  }
}

TEST_CASE("generate: zero-budget trajectory reproduces a clean run") {
  auto cfg = small_config();
  cfg.budget_grid = {0.0};
  const double g_c = clean_baseline(cfg, 1).g_c;
  const auto samples = generate(cfg, 1, g_c);
  REQUIRE(samples.size() == 1);

  // Re-run the clean pipeline with the trajectory's own derived seeds.
  auto [train_set, test_set] = materialize(cfg.dataset, cfg.master_seed);
  const std::uint64_t seed = derive_seed(cfg.master_seed, kStreamTraining, 0);
  OptimizerConfig oc = cfg.optimizer;
  oc.seed = derive_seed(seed, 2);
  Mlp net = init_mlp(cfg.model, derive_seed(seed, 1));
  const TrainRecord rec = train(net, train_set, oc, cfg.horizon);
  CHECK(samples[0].g_p == accuracy(Mlp{cfg.model, rec.theta_final}, test_set));
  CHECK(samples[0].theta_final == rec.theta_final);
}

TEST_CASE("generate: all-zero budgets stay safe at a loose threshold") {
  auto cfg = small_config();
  cfg.budget_grid = {0.0, 0.0, 0.0};
  cfg.alpha = 0.2;
  const double g_c = clean_baseline(cfg, 3).g_c;
  const auto samples = generate(cfg, 3, g_c);
  for (const auto& s : samples) {
    CHECK(std::fabs(s.gap) < 0.2);
    CHECK(s.safe);
  }
}

TEST_CASE("generate: frozen poisoning sweep degrades with the budget") {
  const auto cfg = small_config();
  const double g_c = clean_baseline(cfg, 3).g_c;
  const auto samples = generate(cfg, 4, g_c);
  REQUIRE(samples.size() == 4);
  // Frozen regression on this instance: the largest budget hurts most.
  CHECK(samples.back().gap > samples.front().gap);
  CHECK(samples.back().gap > 0.2);
  CHECK(std::fabs(samples.front().gap) < 0.1);
}

TEST_CASE("label: partitions terminal parameters by the threshold") {
  std::vector<TrajectorySample> samples;
  samples.push_back(synthetic_sample(0, 0.0, 0.85, 0.9, 0.1));  // gap 0.05
  samples.push_back(synthetic_sample(1, 1.0, 0.70, 0.9, 0.1));  // gap 0.20
  const auto sets = label(samples, 0.1, 0.9);
  CHECK(sets.initial.size() == 2);
  CHECK(sets.safe_set.size() == 1);
  CHECK(sets.unsafe_set.size() == 1);

  const auto all_safe = label(samples, 0.5, 0.9);
  CHECK(all_safe.unsafe_set.empty());

  const auto all_unsafe = label(samples, -1.0, 0.9);
  CHECK(all_unsafe.safe_set.empty());
}

TEST_CASE("label: every terminal lands in exactly one set") {
  const auto cfg = small_config();
  const double g_c = clean_baseline(cfg, 3).g_c;
  const auto samples = generate(cfg, 4, g_c);
  const auto sets = label(samples, cfg.alpha, g_c);
  CHECK(sets.safe_set.size() + sets.unsafe_set.size() +
            static_cast<std::size_t>(sets.skipped_diverged) ==
        samples.size());
  CHECK(sets.initial.size() + static_cast<std::size_t>(sets.skipped_diverged) ==
        samples.size());
}

TEST_CASE("empirical_radius: prefix rule on the spec patterns") {
  const double g_c = 1.0;
  const double alpha = 0.1;
  auto mk = [&](double delta, bool safe) {
    return synthetic_sample(0, delta, safe ? 1.0 : 0.5, g_c, alpha);
  };
  {
    std::vector<TrajectorySample> s{mk(0.0, true), mk(0.05, true), mk(0.1, true),
                                    mk(0.15, false)};
    CHECK(empirical_radius(s, alpha, g_c) == 0.1);
    CHECK(empirical_radius_max_rule(s, alpha, g_c) == 0.1);
  }
  {
    std::vector<TrajectorySample> s{mk(0.0, true), mk(0.05, true),
                                    mk(0.1, true), mk(0.15, true)};
    CHECK(empirical_radius(s, alpha, g_c) == 0.15);
  }
  {
    // Non-monotone case: the prefix rule stops at the first unsafe budget
    // while the bare max would report the top of the grid.
    std::vector<TrajectorySample> s{mk(0.0, true), mk(0.05, false),
                                    mk(0.1, true), mk(0.15, true)};
    CHECK(empirical_radius(s, alpha, g_c) == 0.0);
    CHECK(empirical_radius_max_rule(s, alpha, g_c) == 0.15);
    CHECK(empirical_radius(s, alpha, g_c) <=
          empirical_radius_max_rule(s, alpha, g_c));
  }
}

TEST_CASE("empirical_radius: prefix value never exceeds the max rule") {
  Rng rng(123);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<TrajectorySample> s;
    for (int i = 0; i < 8; ++i) {
      s.push_back(synthetic_sample(i, 0.1 * i,
                                   rng.uniform() < 0.5 ? 1.0 : 0.5, 1.0, 0.1));
    }
    CHECK(empirical_radius(s, 0.1, 1.0) <=
          empirical_radius_max_rule(s, 0.1, 1.0));
  }
}

TEST_CASE("test-time mode: paired seeds give identical clean dynamics") {
  auto cfg = small_config();
  cfg.mode = Mode::TestTime;
  cfg.budget_grid = {0.0, 0.5, 1.0};
  cfg.paired_init = true;
  const double g_c = clean_baseline(cfg, 1).g_c;
  const auto samples = generate(cfg, 3, g_c);
  REQUIRE(samples.size() == 3);
  // One pair spans the grid: training never sees the evasion budget.
  CHECK(samples[0].theta_final == samples[1].theta_final);
  CHECK(samples[1].theta_final == samples[2].theta_final);
  CHECK(samples[0].theta_final_succ == samples[2].theta_final_succ);
  // The evasion budget still moves the measured accuracy.
  CHECK(samples[0].delta == 0.0);
  CHECK(samples[2].delta == 1.0);
}

TEST_CASE("trajectory csv and sidecar round-trip") {
  const auto cfg = small_config();
  const double g_c = clean_baseline(cfg, 1).g_c;
  const auto samples = generate(cfg, 2, g_c);

  namespace fs = std::filesystem;
  const std::string csv = (fs::temp_directory_path() / "pcert_traj.csv").string();
  const std::string bin = (fs::temp_directory_path() / "pcert_traj.bin").string();
  write_trajectory_csv(csv, samples, cfg.mode);
  write_param_sidecar(bin, samples);

  auto loaded = read_trajectory_csv(csv);
  REQUIRE(loaded.size() == samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    CHECK(loaded[i].index == samples[i].index);
    CHECK(loaded[i].seed == samples[i].seed);
    CHECK(loaded[i].delta == samples[i].delta);
    CHECK(loaded[i].g_p == samples[i].g_p);
    CHECK(loaded[i].gap == samples[i].gap);
    CHECK(loaded[i].safe == samples[i].safe);
  }
  read_param_sidecar(bin, loaded);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    CHECK(loaded[i].theta0 == samples[i].theta0);
    CHECK(loaded[i].theta0_succ == samples[i].theta0_succ);
    CHECK(loaded[i].theta_final == samples[i].theta_final);
    CHECK(loaded[i].theta_final_succ == samples[i].theta_final_succ);
  }
  std::remove(csv.c_str());
  std::remove(bin.c_str());
}

TEST_CASE("materialize: idx datasets honor the configured subset sizes") {
  // Covered in the data tests; here only the blobs/moons paths.
  DatasetSpec spec;
  spec.kind = DatasetSpec::Kind::Moons;
  spec.n_train = 100;
  spec.n_test = 60;
  spec.noise = 0.05;
  const auto [train_set, test_set] = materialize(spec, 99);
  CHECK(train_set.n == 100);
  CHECK(test_set.n == 60);
  CHECK(train_set.k == 2);
}
