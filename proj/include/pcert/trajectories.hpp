#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "pcert/attacks.hpp"
#include "pcert/data.hpp"
#include "pcert/nn.hpp"

namespace pcert {

enum class Mode { TrainTime, TestTime };
enum class AttackKind { PGD, BDA };

const char* to_string(Mode m);
const char* to_string(AttackKind a);
const char* to_string(Norm p);

// Seed streams; all per-run seeds derive from (master_seed, stream, index),
// which keeps baseline, training, scenario, and held-out draws disjoint.
inline constexpr std::uint64_t kStreamData = 0x64617461;      // experiment datasets
inline constexpr std::uint64_t kStreamBaseline = 0x62617365;  // clean baseline runs
inline constexpr std::uint64_t kStreamSurrogate = 0x73757272; // attack surrogate
inline constexpr std::uint64_t kStreamTraining = 0x74726169;  // barrier training set
inline constexpr std::uint64_t kStreamScenario = 0x7363656e;  // scenario pool
inline constexpr std::uint64_t kStreamTopup = 0x746f7075;     // scenario top-ups
inline constexpr std::uint64_t kStreamHoldout = 0x686f6c64;   // held-out scenarios
inline constexpr std::uint64_t kStreamBarrier = 0x62617272;   // barrier init

struct DatasetSpec {
  enum class Kind { Blobs, Moons, Idx };
  Kind kind = Kind::Blobs;
  int n_train = 400;
  int n_test = 400;
  int feature_dim = 2;      // blobs
  int classes = 2;          // blobs
  double separation = 6.0;  // blobs
  double noise = 0.1;       // moons
  std::string idx_train_images, idx_train_labels;
  std::string idx_test_images, idx_test_labels;
};

/// Deterministic train/test pair for the experiment.
std::pair<LabeledDataset, LabeledDataset> materialize(const DatasetSpec& spec,
                                                      std::uint64_t seed);

struct ExperimentConfig {
  MlpSpec model;
  OptimizerConfig optimizer;
  DatasetSpec dataset;
  int horizon = 200;
  Mode mode = Mode::TrainTime;
  std::vector<double> budget_grid;  // sorted ascending, starts at 0
  Norm p = Norm::Linf;
  double rho = 1.0;
  AttackKind attack = AttackKind::PGD;
  int attack_steps = 40;
  double attack_step_size = 0.0;  // <= 0 selects 2.5*delta/steps
  TriggerSpec trigger;
  double alpha = 0.1;
  int clean_runs = 5;  // K
  std::optional<double> g_c_override;
  std::uint64_t master_seed = 1;
  bool paired_init = false;  // share the initialization across grid budgets

  void validate() const;
};

/// One poisoned (or evaded) training run.
struct TrajectorySample {
  int index = 0;
  std::uint64_t seed = 0;
  double delta = 0.0;  // train budget in TrainTime mode, test budget otherwise
  ParamVector theta0, theta0_succ;
  ParamVector theta_final, theta_final_succ;
  double g_p = 0.0;
  double gap = 0.0;
  bool safe = false;
  bool diverged = false;
};

struct BaselineReport {
  double g_c = 0.0;
  std::vector<double> per_run;
  std::vector<std::uint64_t> seeds;
  bool user_set = false;
};

/// Median test accuracy of K independent clean runs; diverged runs are
/// dropped, and a configured override short-circuits the runs entirely.
BaselineReport clean_baseline(const ExperimentConfig& config, int K,
                              int jobs = 1);

/// N runs cycling through the budget grid, labeled against g_c at
/// config.alpha. Deterministic in (master_seed, seed_stream) regardless of
/// the worker count.
std::vector<TrajectorySample> generate(const ExperimentConfig& config, int N,
                                       double g_c, int jobs = 1,
                                       std::uint64_t seed_stream = kStreamTraining);

/// N runs at i.i.d. budgets uniform in [0, budget_cap]; used for scenario
/// draws.
std::vector<TrajectorySample> generate_uniform_budgets(
    const ExperimentConfig& config, int N, double budget_cap, double g_c,
    int jobs, std::uint64_t seed_stream, std::uint64_t index_offset = 0);

struct ParamWithSucc {
  ParamVector value;
  ParamVector succ;
};

/// Initial / safe / unsafe parameter sets with successors. Diverged runs
/// contribute no parameter points (they are unsafe for radius purposes but
/// carry no usable terminal state).
struct LabeledParamSets {
  std::vector<ParamWithSucc> initial;
  std::vector<ParamWithSucc> safe_set;
  std::vector<ParamWithSucc> unsafe_set;
  int skipped_diverged = 0;
};

LabeledParamSets label(std::span<const TrajectorySample> samples, double alpha,
                       double g_c);

/// Largest grid budget such that every sample at that budget or below is
/// safe (prefix rule); 0 when the zero-budget sample itself is unsafe.
double empirical_radius(std::span<const TrajectorySample> samples,
                        double alpha, double g_c);

/// The bare max-over-safe-budgets variant, reported alongside the prefix
/// rule so non-monotone accuracy curves are visible.
double empirical_radius_max_rule(std::span<const TrajectorySample> samples,
                                 double alpha, double g_c);

// Trajectory log (CSV) and parameter sidecar (binary, little-endian f64).
void write_trajectory_csv(const std::string& path,
                          std::span<const TrajectorySample> samples, Mode mode);
std::vector<TrajectorySample> read_trajectory_csv(const std::string& path);

void write_param_sidecar(const std::string& path,
                         std::span<const TrajectorySample> samples);
void read_param_sidecar(const std::string& path,
                        std::vector<TrajectorySample>& samples);

}  // namespace pcert
