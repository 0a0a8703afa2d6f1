#include "pcert/certifier.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>

#include "json.hpp"
#include "pcert/errors.hpp"
#include "pcert/version.hpp"

namespace pcert {

using ordered_json = nlohmann::ordered_json;

long long PacRequest::resolve_n_hat() const {
  if (n_hat) {
    if (*n_hat < 1) throw ConfigError("n_hat must be >= 1");
    return *n_hat;
  }
  if (epsilon) return required_scenarios(*epsilon, beta);
  throw ConfigError("either n_hat or epsilon must be given");
}

void CertRequest::validate() const {
  experiment.validate();
  if (n_train < 1) throw ConfigError("n_trajectories must be >= 1");
  if (d_delta <= 0.0) throw ConfigError("d_delta must be > 0");
  if (barrier.attempts < 1) throw ConfigError("barrier attempts must be >= 1");
  if (barrier.max_iters < 1) throw ConfigError("barrier max_iters must be >= 1");
  if (!(pac.beta > 0.0 && pac.beta < 1.0)) {
    throw ConfigError("beta must lie in (0, 1)");
  }
  pac.resolve_n_hat();
}

const char* to_string(CertStatus s) {
  switch (s) {
    case CertStatus::Certified: return "certified";
    case CertStatus::ZeroRadius: return "zero_radius";
    case CertStatus::NotCertifiable: return "not_certifiable";
  }
  return "?";
}

bool audit_disjoint_seeds(std::span<const TrajectorySample> training,
                          std::span<const TrajectorySample> scenarios) {
  std::set<std::uint64_t> seen;
  for (const auto& s : training) seen.insert(s.seed);
  for (const auto& s : scenarios) {
    if (seen.count(s.seed) != 0) return false;
  }
  return true;
}

namespace {

constexpr double kRadiusEps = 1e-12;

struct Corpus {
  BaselineReport baseline;
  std::vector<TrajectorySample> training;
  std::vector<TrajectorySample> pool;  // scenario pool (pooled mode)
  double grid_max = 0.0;
};

Corpus build_corpus(const CertRequest& req) {
  Corpus c;
  const ExperimentConfig& exp = req.experiment;
  c.baseline = clean_baseline(exp, exp.clean_runs, req.jobs);
  c.training =
      generate(exp, req.n_train, c.baseline.g_c, req.jobs, kStreamTraining);
  c.grid_max = exp.budget_grid.back();
  if (!req.strict_scenarios) {
    c.pool = generate_uniform_budgets(exp, static_cast<int>(req.pac.resolve_n_hat()),
                                      c.grid_max, c.baseline.g_c, req.jobs,
                                      kStreamScenario);
  }
  return c;
}

// Barrier training sets at a candidate radius: initial states and successor
// data come from trajectories within the radius; unsafe terminal states
// sample a budget-independent region, so the whole corpus contributes them.
LabeledParamSets sets_at_radius(std::span<const TrajectorySample> samples,
                                double radius, double alpha, double g_c) {
  LabeledParamSets sets;
  for (const auto& s : samples) {
    if (s.diverged) {
      ++sets.skipped_diverged;
      continue;
    }
    const bool within = s.delta <= radius + kRadiusEps;
    const bool unsafe = (g_c - s.g_p) > alpha;
    if (within) {
      sets.initial.push_back({s.theta0, s.theta0_succ});
      if (!unsafe) {
        sets.safe_set.push_back({s.theta_final, s.theta_final_succ});
      }
    }
    if (unsafe) {
      sets.unsafe_set.push_back({s.theta_final, s.theta_final_succ});
    }
  }
  return sets;
}

double max_observed_gap(std::span<const TrajectorySample> samples) {
  double mx = 0.0;
  bool any = false;
  for (const auto& s : samples) {
    if (s.diverged) continue;
    mx = any ? std::max(mx, s.gap) : s.gap;
    any = true;
  }
  return any ? mx : 0.0;
}

struct LoopState {
  int topup_counter = 0;
  int strict_rounds = 0;
};

// Scenario draw at budgets <= radius: pooled mode reuses pool members within
// the radius and tops the set up with fresh runs; strict mode regenerates
// everything.
std::vector<TrajectorySample> scenarios_at_radius(const CertRequest& req,
                                                  const Corpus& corpus,
                                                  double radius,
                                                  long long n_hat,
                                                  LoopState& state,
                                                  int* topups_out) {
  const ExperimentConfig& exp = req.experiment;
  if (req.strict_scenarios) {
    const std::uint64_t offset =
        static_cast<std::uint64_t>(state.strict_rounds) * n_hat;
    ++state.strict_rounds;
    if (topups_out != nullptr) *topups_out = 0;
    return generate_uniform_budgets(exp, static_cast<int>(n_hat), radius,
                                    corpus.baseline.g_c, req.jobs,
                                    kStreamScenario, offset);
  }
  std::vector<TrajectorySample> out;
  out.reserve(n_hat);
  for (const auto& s : corpus.pool) {
    if (s.delta <= radius + kRadiusEps) out.push_back(s);
  }
  if (out.size() > static_cast<std::size_t>(n_hat)) out.resize(n_hat);
  const int missing = static_cast<int>(n_hat - out.size());
  if (missing > 0) {
    auto extra = generate_uniform_budgets(exp, missing, radius,
                                          corpus.baseline.g_c, req.jobs,
                                          kStreamTopup, state.topup_counter);
    state.topup_counter += missing;
    for (auto& s : extra) {
      s.index += 1000000;  // keep scenario indices distinct from pool indices
      out.push_back(std::move(s));
    }
  }
  if (topups_out != nullptr) *topups_out = std::max(0, missing);
  return out;
}

struct RadiusLoopResult {
  Certificate cert;
  std::optional<BarrierNet> barrier;
  std::vector<TrajectorySample> final_scenarios;
};

// Core certification at one threshold over a prebuilt corpus.
RadiusLoopResult certify_at_alpha(const CertRequest& req, const Corpus& corpus,
                                  double alpha, LoopState& state) {
  const ExperimentConfig& exp = req.experiment;
  const long long n_hat = req.pac.resolve_n_hat();

  RadiusLoopResult out;
  Certificate& cert = out.cert;
  cert.mode = exp.mode;
  cert.alpha_requested = alpha;
  cert.alpha_effective = alpha;
  cert.g_c = corpus.baseline.g_c;
  cert.g_c_user_set = corpus.baseline.user_set;
  cert.beta = req.pac.beta;
  cert.n = req.n_train;
  cert.n_hat = n_hat;
  cert.p = exp.p;
  cert.rho = exp.rho;
  cert.attack = exp.attack;
  cert.master_seed = exp.master_seed;
  cert.config_hash = req.config_hash;
  cert.tool_version = kToolVersion;
  cert.scenario_mode = req.strict_scenarios ? "strict" : "pooled";
  cert.epsilon = achieved_epsilon(n_hat, req.pac.beta);
  cert.delta_emp = empirical_radius(corpus.training, alpha, cert.g_c);
  cert.delta_emp_max_rule =
      empirical_radius_max_rule(corpus.training, alpha, cert.g_c);
  cert.g_p_star = cert.g_c - cert.alpha_effective;

  const LabeledParamSets full = label(corpus.training, alpha, cert.g_c);

  if (full.safe_set.empty()) {
    cert.status = CertStatus::ZeroRadius;
    cert.empty_safe_convention = true;
    cert.delta_cert = 0.0;
    return out;
  }
  if (full.unsafe_set.empty() && full.skipped_diverged > 0) {
    cert.status = CertStatus::NotCertifiable;
    return out;
  }
  if (full.unsafe_set.empty()) {
    // Every sampled budget stayed within the threshold: nothing to separate.
    // Record the smallest threshold the observations actually support and
    // return the full sampled radius.
    cert.status = CertStatus::Certified;
    cert.empty_unsafe_convention = true;
    cert.alpha_effective = std::max(0.0, max_observed_gap(corpus.training));
    cert.g_p_star = cert.g_c - cert.alpha_effective;
    cert.delta_cert = cert.delta_emp;
    return out;
  }

  if (cert.delta_emp <= 0.0) {
    cert.status = CertStatus::ZeroRadius;
    cert.delta_cert = 0.0;
    return out;
  }

  const int d = static_cast<int>(exp.model.param_count());
  BarrierLossWeights weights;  // 1/|set| normalization
  bool barrier_ever_trained = false;
  int radius_index = 0;
  for (double radius = cert.delta_emp; radius > kRadiusEps;
       radius -= req.d_delta, ++radius_index) {
    const LabeledParamSets sets =
        sets_at_radius(corpus.training, radius, alpha, cert.g_c);

    std::optional<BarrierNet> net;
    for (int attempt = 0; attempt < req.barrier.attempts; ++attempt) {
      BarrierTrainConfig cfg;
      cfg.hidden = req.barrier.hidden;
      cfg.learning_rate = req.barrier.learning_rate;
      cfg.max_iters = req.barrier.max_iters;
      cfg.tau_loss = req.barrier.tau_loss;
      cfg.seed = derive_seed(exp.master_seed, kStreamBarrier,
                             static_cast<std::uint64_t>(radius_index) * 1000 +
                                 attempt);
      BarrierTrainResult res = train_barrier(sets, weights, cfg, d);
      ++cert.barrier_attempts_used;
      if (res.net) {
        net = std::move(res.net);
        break;
      }
    }
    if (!net) continue;
    barrier_ever_trained = true;

    int topups = 0;
    std::vector<TrajectorySample> scen =
        scenarios_at_radius(req, corpus, radius, n_hat, state, &topups);
    cert.scenario_topups += topups;
    const ScenarioSet scen_set = make_scenario_set(scen, alpha, cert.g_c);
    if (scen_set.diverged > 0) continue;  // conservatively reject this radius
    const Margin margin = solve_scp(*net, scen_set);
    if (margin.feasible) {
      cert.status = CertStatus::Certified;
      cert.delta_cert = radius;
      cert.eta_s = margin.eta_s;
      switch (margin.binding.kind) {
        case ConstraintKind::Initial: cert.binding_kind = "initial"; break;
        case ConstraintKind::Unsafe: cert.binding_kind = "unsafe"; break;
        case ConstraintKind::Successor: cert.binding_kind = "successor"; break;
      }
      out.barrier = std::move(net);
      out.final_scenarios = std::move(scen);
      return out;
    }
  }

  cert.delta_cert = 0.0;
  cert.status = barrier_ever_trained ? CertStatus::ZeroRadius
                                     : CertStatus::NotCertifiable;
  return out;
}

}  // namespace

CertOutcome run_certification(const CertRequest& request) {
  request.validate();
  Corpus corpus = build_corpus(request);
  LoopState state;
  RadiusLoopResult res =
      certify_at_alpha(request, corpus, request.experiment.alpha, state);
  CertOutcome out;
  out.certificate = std::move(res.cert);
  out.baseline = std::move(corpus.baseline);
  out.training_samples = std::move(corpus.training);
  out.scenario_samples = std::move(res.final_scenarios);
  out.barrier = std::move(res.barrier);
  return out;
}

Certificate certify_train(const CertRequest& request) {
  CertRequest req = request;
  req.experiment.mode = Mode::TrainTime;
  return run_certification(req).certificate;
}

Certificate certify_test(const CertRequest& request) {
  CertRequest req = request;
  req.experiment.mode = Mode::TestTime;
  return run_certification(req).certificate;
}

std::vector<Certificate> monotone_alpha_sweep(const CertRequest& request,
                                              std::vector<double> alphas) {
  request.validate();
  if (alphas.empty()) throw ArgumentError("sweep needs at least one alpha");
  if (!std::is_sorted(alphas.rbegin(), alphas.rend())) {
    throw ArgumentError("sweep alphas must be sorted descending");
  }
  const Corpus corpus = build_corpus(request);
  LoopState state;
  std::vector<Certificate> out;
  out.reserve(alphas.size());
  std::optional<double> prev_radius;
  for (double alpha : alphas) {
    RadiusLoopResult res = certify_at_alpha(request, corpus, alpha, state);
    Certificate cert = std::move(res.cert);
    if (prev_radius) {
      if (cert.status != CertStatus::Certified) {
        cert.delta_cert = *prev_radius;
        cert.radius_reused = true;
      } else if (cert.delta_cert > *prev_radius) {
        cert.delta_cert = *prev_radius;
        cert.radius_capped = true;
      }
    }
    prev_radius = cert.delta_cert;
    out.push_back(std::move(cert));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Serialization.
// ---------------------------------------------------------------------------

namespace {

ordered_json certificate_json(const Certificate& c) {
  ordered_json j;
  j["mode"] = to_string(c.mode);
  j["status"] = to_string(c.status);
  j["alpha"] = {{"requested", c.alpha_requested},
                {"effective", c.alpha_effective}};
  j["g_c"] = c.g_c;
  j["g_c_source"] = c.g_c_user_set ? "user" : "median";
  j["g_p_star"] = c.g_p_star;
  j["delta"] = {{"emp", c.delta_emp},
                {"emp_max_rule", c.delta_emp_max_rule},
                {"cert", c.delta_cert}};
  if (c.eta_s) {
    j["eta_s"] = *c.eta_s;
  } else {
    j["eta_s"] = nullptr;
  }
  j["binding_constraint"] = c.binding_kind.empty() ? "none" : c.binding_kind;
  j["pac"] = {{"epsilon", c.epsilon}, {"beta", c.beta}, {"n_hat", c.n_hat}};
  j["threat"] = {{"p", to_string(c.p)}, {"rho", c.rho}, {"attack", to_string(c.attack)}};
  j["n_trajectories"] = c.n;
  j["conventions"] = {{"empty_unsafe", c.empty_unsafe_convention},
                      {"empty_safe", c.empty_safe_convention}};
  j["sweep"] = {{"radius_reused", c.radius_reused},
                {"radius_capped", c.radius_capped}};
  j["provenance"] = {{"master_seed", c.master_seed},
                     {"config_hash", c.config_hash},
                     {"tool_version", c.tool_version},
                     {"scenario_mode", c.scenario_mode},
                     {"barrier_attempts_used", c.barrier_attempts_used},
                     {"scenario_topups", c.scenario_topups}};
  return j;
}

Certificate certificate_from(const ordered_json& j) {
  Certificate c;
  const std::string mode = j.at("mode");
  c.mode = (mode == "train") ? Mode::TrainTime : Mode::TestTime;
  const std::string status = j.at("status");
  if (status == "certified") c.status = CertStatus::Certified;
  else if (status == "zero_radius") c.status = CertStatus::ZeroRadius;
  else c.status = CertStatus::NotCertifiable;
  c.alpha_requested = j.at("alpha").at("requested");
  c.alpha_effective = j.at("alpha").at("effective");
  c.g_c = j.at("g_c");
  c.g_c_user_set = j.at("g_c_source") == "user";
  c.g_p_star = j.at("g_p_star");
  c.delta_emp = j.at("delta").at("emp");
  c.delta_emp_max_rule = j.at("delta").at("emp_max_rule");
  c.delta_cert = j.at("delta").at("cert");
  if (!j.at("eta_s").is_null()) c.eta_s = j.at("eta_s").get<double>();
  c.binding_kind = j.at("binding_constraint");
  c.epsilon = j.at("pac").at("epsilon");
  c.beta = j.at("pac").at("beta");
  c.n_hat = j.at("pac").at("n_hat");
  c.p = (j.at("threat").at("p") == "l2") ? Norm::L2 : Norm::Linf;
  c.rho = j.at("threat").at("rho");
  c.attack = (j.at("threat").at("attack") == "pgd") ? AttackKind::PGD
                                                    : AttackKind::BDA;
  c.n = j.at("n_trajectories");
  c.empty_unsafe_convention = j.at("conventions").at("empty_unsafe");
  c.empty_safe_convention = j.at("conventions").at("empty_safe");
  c.radius_reused = j.at("sweep").at("radius_reused");
  c.radius_capped = j.at("sweep").at("radius_capped");
  const auto& prov = j.at("provenance");
  c.master_seed = prov.at("master_seed");
  c.config_hash = prov.at("config_hash");
  c.tool_version = prov.at("tool_version");
  c.scenario_mode = prov.at("scenario_mode");
  c.barrier_attempts_used = prov.at("barrier_attempts_used");
  c.scenario_topups = prov.at("scenario_topups");
  return c;
}

}  // namespace

std::string certificate_to_json(const Certificate& cert) {
  return certificate_json(cert).dump(2) + "\n";
}

Certificate certificate_from_json(const std::string& text) {
  return certificate_from(ordered_json::parse(text));
}

void write_certificate(const std::string& path, const Certificate& cert) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot write " + path);
  f << certificate_to_json(cert);
}

Certificate read_certificate(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot read " + path);
  std::string text((std::istreambuf_iterator<char>(f)),
                   std::istreambuf_iterator<char>());
  return certificate_from_json(text);
}

void write_curve_csv(const std::string& path,
                     std::span<const Certificate> certs) {
  std::ofstream f(path);
  if (!f) throw IoError("cannot write " + path);
  f << "alpha,g_p_star,delta_emp,delta_cert,eta_s,epsilon,status\n";
  char buf[320];
  for (const auto& c : certs) {
    char eta[40];
    if (c.eta_s) {
      std::snprintf(eta, sizeof(eta), "%.17g", *c.eta_s);
    } else {
      std::snprintf(eta, sizeof(eta), "nan");
    }
    std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%.17g,%.17g,%s,%.17g,%s\n",
                  c.alpha_effective, c.g_p_star, c.delta_emp, c.delta_cert,
                  eta, c.epsilon, to_string(c.status));
    f << buf;
  }
}

}  // namespace pcert
