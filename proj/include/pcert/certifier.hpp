#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "pcert/barrier.hpp"
#include "pcert/trajectories.hpp"
#include "pcert/verification.hpp"

namespace pcert {

struct BarrierRequest {
  std::vector<int> hidden = {64, 64};
  double learning_rate = 1e-3;
  int max_iters = 5000;
  int attempts = 3;  // retrain budget T per candidate radius
  double tau_loss = 1e-6;
};

struct PacRequest {
  double beta = 1e-4;
  std::optional<long long> n_hat;
  std::optional<double> epsilon;  // alternative to n_hat

  long long resolve_n_hat() const;
};

struct CertRequest {
  ExperimentConfig experiment;
  BarrierRequest barrier;
  PacRequest pac;
  double d_delta = 0.1;  // radius decrement
  int n_train = 200;     // trajectories behind the barrier training sets
  bool strict_scenarios = false;  // regenerate all scenarios per radius
  int jobs = 0;
  std::string config_hash;

  void validate() const;
};

enum class CertStatus { Certified, ZeroRadius, NotCertifiable };

const char* to_string(CertStatus s);

struct Certificate {
  Mode mode = Mode::TrainTime;
  CertStatus status = CertStatus::NotCertifiable;
  double alpha_requested = 0.0;
  double alpha_effective = 0.0;
  double g_c = 0.0;
  bool g_c_user_set = false;
  double g_p_star = 0.0;  // g_c - alpha_effective
  double delta_emp = 0.0;
  double delta_emp_max_rule = 0.0;
  double delta_cert = 0.0;
  std::optional<double> eta_s;
  std::string binding_kind;  // constraint kind behind eta_s
  double epsilon = 0.0;
  double beta = 0.0;
  int n = 0;
  long long n_hat = 0;
  Norm p = Norm::Linf;
  double rho = 0.0;
  AttackKind attack = AttackKind::PGD;
  bool empty_unsafe_convention = false;
  bool empty_safe_convention = false;
  bool radius_reused = false;  // sweep fallback
  bool radius_capped = false;  // sweep monotonicity enforcement
  // provenance
  std::uint64_t master_seed = 0;
  std::string config_hash;
  std::string tool_version;
  std::string scenario_mode;  // "pooled" or "strict"
  int barrier_attempts_used = 0;
  int scenario_topups = 0;
};

/// Full pipeline result; the certificate plus the artifacts behind it.
struct CertOutcome {
  Certificate certificate;
  BaselineReport baseline;
  std::vector<TrajectorySample> training_samples;
  std::vector<TrajectorySample> scenario_samples;  // set behind the final SCP
  std::optional<BarrierNet> barrier;
};

CertOutcome run_certification(const CertRequest& request);

/// Train-time certification loop (mode forced to TrainTime).
Certificate certify_train(const CertRequest& request);

/// Test-time mirror (mode forced to TestTime).
Certificate certify_test(const CertRequest& request);

/// Re-certifies one shared trajectory corpus at each threshold, descending.
/// A failed threshold conservatively reuses the previous certified radius
/// (flagged), and radii are capped to keep the curve monotone.
std::vector<Certificate> monotone_alpha_sweep(const CertRequest& request,
                                              std::vector<double> alphas);

/// True when the training- and scenario-sample seed sets are disjoint.
bool audit_disjoint_seeds(std::span<const TrajectorySample> training,
                          std::span<const TrajectorySample> scenarios);

std::string certificate_to_json(const Certificate& cert);
Certificate certificate_from_json(const std::string& text);

void write_certificate(const std::string& path, const Certificate& cert);
Certificate read_certificate(const std::string& path);

void write_curve_csv(const std::string& path,
                     std::span<const Certificate> certs);

}  // namespace pcert
