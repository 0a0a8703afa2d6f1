#include "pcert/trajectories.hpp"

#include <algorithm>
#include <atomic>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <map>
#include <thread>

#include "pcert/errors.hpp"

namespace pcert {

const char* to_string(Mode m) {
  return m == Mode::TrainTime ? "train" : "test";
}
const char* to_string(AttackKind a) { return a == AttackKind::PGD ? "pgd" : "bda"; }
const char* to_string(Norm p) { return p == Norm::L2 ? "l2" : "linf"; }

std::pair<LabeledDataset, LabeledDataset> materialize(const DatasetSpec& spec,
                                                      std::uint64_t seed) {
  const std::uint64_t draw_seed = derive_seed(seed, kStreamData, 0);
  const std::uint64_t split_seed = derive_seed(seed, kStreamData, 1);
  switch (spec.kind) {
    // Synthetic pairs come from one draw so train and test share the same
    // geometry; the split is random but order-preserving.
    case DatasetSpec::Kind::Blobs: {
      const LabeledDataset all =
          make_blobs(draw_seed, spec.n_train + spec.n_test, spec.feature_dim,
                     spec.classes, spec.separation);
      return split_dataset(all, split_seed, spec.n_train);
    }
    case DatasetSpec::Kind::Moons: {
      const LabeledDataset all =
          make_moons(draw_seed, spec.n_train + spec.n_test, spec.noise);
      return split_dataset(all, split_seed, spec.n_train);
    }
    case DatasetSpec::Kind::Idx: {
      LabeledDataset train = load_idx(spec.idx_train_images, spec.idx_train_labels);
      LabeledDataset test = load_idx(spec.idx_test_images, spec.idx_test_labels);
      if (spec.n_train > 0 && spec.n_train < train.n) {
        train = subsample(train, draw_seed, spec.n_train);
      }
      if (spec.n_test > 0 && spec.n_test < test.n) {
        test = subsample(test, split_seed, spec.n_test);
      }
      return {std::move(train), std::move(test)};
    }
  }
  throw ArgumentError("unknown dataset kind");
}

void ExperimentConfig::validate() const {
  model.validate();
  optimizer.validate();
  if (horizon < 1) throw ConfigError("horizon must be >= 1");
  if (budget_grid.empty()) throw ConfigError("budget grid must be non-empty");
  if (budget_grid.front() != 0.0) throw ConfigError("budget grid must start at 0");
  if (!std::is_sorted(budget_grid.begin(), budget_grid.end())) {
    throw ConfigError("budget grid must be sorted ascending");
  }
  if (rho < 0.0 || rho > 1.0) throw ConfigError("rho must lie in [0, 1]");
  if (alpha < 0.0 || alpha > 1.0) throw ConfigError("alpha must lie in [0, 1]");
  if (clean_runs < 1) throw ConfigError("clean_runs must be >= 1");
}

namespace {

struct Pipeline {
  LabeledDataset train_set;
  LabeledDataset test_set;
  Mlp surrogate;       // clean-trained; used by train-time PGD
  bool has_surrogate = false;
};

Pipeline build_pipeline(const ExperimentConfig& config) {
  Pipeline pl;
  std::tie(pl.train_set, pl.test_set) =
      materialize(config.dataset, config.master_seed);
  if (config.mode == Mode::TrainTime && config.attack == AttackKind::PGD) {
    const std::uint64_t s = derive_seed(config.master_seed, kStreamSurrogate, 0);
    OptimizerConfig oc = config.optimizer;
    oc.seed = derive_seed(s, 1);
    Mlp net = init_mlp(config.model, derive_seed(s, 0));
    const TrainRecord rec = train(net, pl.train_set, oc, config.horizon);
    pl.surrogate = Mlp{config.model, rec.theta_final};
    pl.has_surrogate = true;
  }
  return pl;
}

// One full trajectory at the given budget. Any DivergenceError is recorded
// on the sample rather than propagated.
TrajectorySample run_one(const ExperimentConfig& config, const Pipeline& pl,
                         int index, std::uint64_t seed, double budget,
                         double g_c) {
  TrajectorySample s;
  s.index = index;
  s.seed = seed;
  s.delta = budget;

  OptimizerConfig oc = config.optimizer;
  oc.seed = derive_seed(seed, 2);
  Mlp net = init_mlp(config.model, derive_seed(seed, 1));
  s.theta0 = net.params;

  PerturbationBudget budget_spec{config.p, budget, config.rho};
  const std::uint64_t attack_seed = derive_seed(seed, 3, index);

  try {
    if (config.mode == Mode::TrainTime) {
      AttackResult atk;
      if (config.attack == AttackKind::PGD) {
        atk = pgd_poison(pl.train_set, pl.surrogate, budget_spec,
                         config.attack_steps, config.attack_step_size,
                         attack_seed);
      } else {
        atk = backdoor_poison(pl.train_set, config.trigger, budget_spec,
                              attack_seed);
      }
      s.theta0_succ = full_batch_successor(net, atk.dataset, oc);
      const TrainRecord rec = train(net, atk.dataset, oc, config.horizon);
      s.theta_final = rec.theta_final;
      s.theta_final_succ = rec.succ_of_final;
      s.g_p = accuracy(Mlp{config.model, rec.theta_final}, pl.test_set);
    } else {
      s.theta0_succ = full_batch_successor(net, pl.train_set, oc);
      const TrainRecord rec = train(net, pl.train_set, oc, config.horizon);
      s.theta_final = rec.theta_final;
      s.theta_final_succ = rec.succ_of_final;
      const Mlp victim{config.model, rec.theta_final};
      AttackResult atk;
      budget_spec.rho = config.rho;
      if (config.attack == AttackKind::PGD) {
        atk = pgd_evade(pl.test_set, victim, budget_spec, config.attack_steps,
                        config.attack_step_size, attack_seed);
      } else {
        atk = backdoor_poison(pl.test_set, config.trigger, budget_spec,
                              attack_seed);
      }
      s.g_p = accuracy(victim, atk.dataset);
    }
    s.gap = g_c - s.g_p;
    s.safe = s.gap <= config.alpha;
  } catch (const DivergenceError&) {
    s.diverged = true;
    s.g_p = 0.0;
    s.gap = g_c;
    s.safe = false;
    s.theta_final.clear();
    s.theta_final_succ.clear();
  }
  return s;
}

// Index-keyed fan-out; results land in index order, so the output does not
// depend on the worker count.
template <typename Fn>
void parallel_for(int n, int jobs, Fn&& fn) {
  if (jobs <= 0) jobs = static_cast<int>(std::thread::hardware_concurrency());
  jobs = std::max(1, std::min(jobs, n));
  if (jobs == 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  pool.reserve(jobs);
  for (int w = 0; w < jobs; ++w) {
    pool.emplace_back([&] {
      for (int i = next.fetch_add(1); i < n; i = next.fetch_add(1)) fn(i);
    });
  }
  for (auto& t : pool) t.join();
}

}  // namespace

BaselineReport clean_baseline(const ExperimentConfig& config, int K, int jobs) {
  if (K < 1) throw ArgumentError("clean_baseline: K must be >= 1");
  BaselineReport rep;
  if (config.g_c_override) {
    rep.g_c = *config.g_c_override;
    rep.user_set = true;
    return rep;
  }
  auto [train_set, test_set] = materialize(config.dataset, config.master_seed);
  rep.seeds.resize(K);
  std::vector<double> acc(K, -1.0);
  for (int i = 0; i < K; ++i) {
    rep.seeds[i] = derive_seed(config.master_seed, kStreamBaseline, i);
  }
  parallel_for(K, jobs, [&](int i) {
    OptimizerConfig oc = config.optimizer;
    oc.seed = derive_seed(rep.seeds[i], 2);
    Mlp net = init_mlp(config.model, derive_seed(rep.seeds[i], 1));
    try {
      const TrainRecord rec = train(net, train_set, oc, config.horizon);
      acc[i] = accuracy(Mlp{config.model, rec.theta_final}, test_set);
    } catch (const DivergenceError&) {
      acc[i] = -1.0;  // excluded below
    }
  });
  for (double a : acc) {
    if (a >= 0.0) rep.per_run.push_back(a);
  }
  if (rep.per_run.empty()) {
    throw BaselineError("all clean baseline runs diverged");
  }
  std::vector<double> sorted = rep.per_run;
  std::sort(sorted.begin(), sorted.end());
  const std::size_t h = sorted.size() / 2;
  rep.g_c = (sorted.size() % 2 == 1) ? sorted[h]
                                     : 0.5 * (sorted[h - 1] + sorted[h]);
  return rep;
}

std::vector<TrajectorySample> generate(const ExperimentConfig& config, int N,
                                       double g_c, int jobs,
                                       std::uint64_t seed_stream) {
  config.validate();
  if (N < 1) throw ArgumentError("generate: N must be >= 1");
  const Pipeline pl = build_pipeline(config);
  const int grid = static_cast<int>(config.budget_grid.size());
  std::vector<TrajectorySample> samples(N);
  parallel_for(N, jobs, [&](int i) {
    const std::uint64_t key = config.paired_init ? i / grid : i;
    const std::uint64_t seed = derive_seed(config.master_seed, seed_stream, key);
    samples[i] = run_one(config, pl, i, seed, config.budget_grid[i % grid], g_c);
  });
  return samples;
}

std::vector<TrajectorySample> generate_uniform_budgets(
    const ExperimentConfig& config, int N, double budget_cap, double g_c,
    int jobs, std::uint64_t seed_stream, std::uint64_t index_offset) {
  config.validate();
  if (N < 1) throw ArgumentError("generate: N must be >= 1");
  if (budget_cap < 0.0) throw ArgumentError("budget cap must be >= 0");
  const Pipeline pl = build_pipeline(config);
  std::vector<TrajectorySample> samples(N);
  parallel_for(N, jobs, [&](int i) {
    const std::uint64_t seed =
        derive_seed(config.master_seed, seed_stream, index_offset + i);
    Rng budget_rng(derive_seed(seed, 4));
    const double budget = budget_rng.uniform(0.0, budget_cap);
    samples[i] = run_one(config, pl, i, seed, budget, g_c);
  });
  return samples;
}

LabeledParamSets label(std::span<const TrajectorySample> samples, double alpha,
                       double g_c) {
  if (samples.empty()) throw ArgumentError("label: no samples");
  LabeledParamSets sets;
  for (const auto& s : samples) {
    if (s.diverged) {
      ++sets.skipped_diverged;
      continue;
    }
    sets.initial.push_back({s.theta0, s.theta0_succ});
    const double gap = g_c - s.g_p;
    if (gap <= alpha) {
      sets.safe_set.push_back({s.theta_final, s.theta_final_succ});
    } else {
      sets.unsafe_set.push_back({s.theta_final, s.theta_final_succ});
    }
  }
  return sets;
}

namespace {

bool sample_safe(const TrajectorySample& s, double alpha, double g_c) {
  if (s.diverged) return false;
  return (g_c - s.g_p) <= alpha;
}

}  // namespace

double empirical_radius(std::span<const TrajectorySample> samples,
                        double alpha, double g_c) {
  // Largest budget whose entire prefix (all samples at budgets <= it) is
  // safe.
  std::vector<std::pair<double, bool>> by_budget;
  by_budget.reserve(samples.size());
  for (const auto& s : samples) {
    by_budget.emplace_back(s.delta, sample_safe(s, alpha, g_c));
  }
  std::sort(by_budget.begin(), by_budget.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  double radius = 0.0;
  bool any_safe_prefix = false;
  for (const auto& [budget, safe] : by_budget) {
    if (!safe) break;
    radius = budget;
    any_safe_prefix = true;
  }
  return any_safe_prefix ? radius : 0.0;
}

double empirical_radius_max_rule(std::span<const TrajectorySample> samples,
                                 double alpha, double g_c) {
  double radius = 0.0;
  for (const auto& s : samples) {
    if (sample_safe(s, alpha, g_c)) radius = std::max(radius, s.delta);
  }
  return radius;
}

// ---------------------------------------------------------------------------
// Trajectory log CSV and parameter sidecar.
// ---------------------------------------------------------------------------

void write_trajectory_csv(const std::string& path,
                          std::span<const TrajectorySample> samples,
                          Mode mode) {
  std::ofstream f(path);
  if (!f) throw IoError("cannot write " + path);
  f << "index,seed,mode,delta,g_p,gap,safe,diverged\n";
  char buf[256];
  for (const auto& s : samples) {
    std::snprintf(buf, sizeof(buf), "%d,%" PRIu64 ",%s,%.17g,%.17g,%.17g,%d,%d\n",
                  s.index, s.seed, to_string(mode), s.delta, s.g_p, s.gap,
                  s.safe ? 1 : 0, s.diverged ? 1 : 0);
    f << buf;
  }
}

std::vector<TrajectorySample> read_trajectory_csv(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot read " + path);
  std::string line;
  if (!std::getline(f, line)) throw FormatError("empty trajectory csv: " + path);
  std::vector<TrajectorySample> out;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    TrajectorySample s;
    char mode_buf[16];
    int safe_i = 0, div_i = 0;
    const int got = std::sscanf(line.c_str(),
                                "%d,%" SCNu64 ",%15[^,],%lg,%lg,%lg,%d,%d",
                                &s.index, &s.seed, mode_buf, &s.delta, &s.g_p,
                                &s.gap, &safe_i, &div_i);
    if (got != 8) throw FormatError("malformed trajectory row in " + path);
    s.safe = safe_i != 0;
    s.diverged = div_i != 0;
    out.push_back(std::move(s));
  }
  return out;
}

namespace {

constexpr char kSidecarMagic[4] = {'P', 'C', 'P', 'B'};
constexpr std::uint32_t kSidecarVersion = 1;

enum class ParamRole : std::uint8_t {
  Theta0 = 0,
  Theta0Succ = 1,
  Final = 2,
  Succ = 3,
};

void write_u32(std::ofstream& f, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                        static_cast<unsigned char>((v >> 8) & 0xff),
                        static_cast<unsigned char>((v >> 16) & 0xff),
                        static_cast<unsigned char>((v >> 24) & 0xff)};
  f.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t read_u32(std::ifstream& f, const std::string& path) {
  unsigned char b[4];
  f.read(reinterpret_cast<char*>(b), 4);
  if (!f) throw IoError("truncated sidecar: " + path);
  return std::uint32_t(b[0]) | (std::uint32_t(b[1]) << 8) |
         (std::uint32_t(b[2]) << 16) | (std::uint32_t(b[3]) << 24);
}

void write_vec(std::ofstream& f, std::uint32_t index, ParamRole role,
               const ParamVector& v) {
  write_u32(f, index);
  const unsigned char r = static_cast<unsigned char>(role);
  f.write(reinterpret_cast<const char*>(&r), 1);
  write_u32(f, static_cast<std::uint32_t>(v.size()));
  for (double x : v) {
    std::uint64_t bits;
    std::memcpy(&bits, &x, 8);
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(bits >> (8 * i));
    f.write(reinterpret_cast<const char*>(b), 8);
  }
}

}  // namespace

void write_param_sidecar(const std::string& path,
                         std::span<const TrajectorySample> samples) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot write " + path);
  f.write(kSidecarMagic, 4);
  write_u32(f, kSidecarVersion);
  std::uint32_t records = 0;
  for (const auto& s : samples) {
    records += 2 + (s.diverged ? 0 : 2);
  }
  write_u32(f, records);
  for (const auto& s : samples) {
    const auto idx = static_cast<std::uint32_t>(s.index);
    write_vec(f, idx, ParamRole::Theta0, s.theta0);
    write_vec(f, idx, ParamRole::Theta0Succ, s.theta0_succ);
    if (!s.diverged) {
      write_vec(f, idx, ParamRole::Final, s.theta_final);
      write_vec(f, idx, ParamRole::Succ, s.theta_final_succ);
    }
  }
}

void read_param_sidecar(const std::string& path,
                        std::vector<TrajectorySample>& samples) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot read " + path);
  char magic[4];
  f.read(magic, 4);
  if (!f || std::memcmp(magic, kSidecarMagic, 4) != 0) {
    throw FormatError("bad sidecar magic: " + path);
  }
  const std::uint32_t version = read_u32(f, path);
  if (version != kSidecarVersion) throw FormatError("unsupported sidecar version");
  const std::uint32_t records = read_u32(f, path);
  std::map<int, std::size_t> by_index;
  for (std::size_t i = 0; i < samples.size(); ++i) by_index[samples[i].index] = i;
  for (std::uint32_t r = 0; r < records; ++r) {
    const std::uint32_t index = read_u32(f, path);
    unsigned char role;
    f.read(reinterpret_cast<char*>(&role), 1);
    const std::uint32_t len = read_u32(f, path);
    ParamVector v(len);
    for (std::uint32_t i = 0; i < len; ++i) {
      unsigned char b[8];
      f.read(reinterpret_cast<char*>(b), 8);
      if (!f) throw IoError("truncated sidecar: " + path);
      std::uint64_t bits = 0;
      for (int j = 0; j < 8; ++j) bits |= std::uint64_t(b[j]) << (8 * j);
      double x;
      std::memcpy(&x, &bits, 8);
      v[i] = x;
    }
    auto it = by_index.find(static_cast<int>(index));
    if (it == by_index.end()) continue;
    TrajectorySample& s = samples[it->second];
    switch (static_cast<ParamRole>(role)) {
      case ParamRole::Theta0: s.theta0 = std::move(v); break;
      case ParamRole::Theta0Succ: s.theta0_succ = std::move(v); break;
      case ParamRole::Final: s.theta_final = std::move(v); break;
      case ParamRole::Succ: s.theta_final_succ = std::move(v); break;
      default: throw FormatError("unknown sidecar role");
    }
  }
}

}  // namespace pcert
