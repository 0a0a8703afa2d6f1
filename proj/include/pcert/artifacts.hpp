#pragma once

#include <optional>
#include <string>
#include <vector>

#include "pcert/certifier.hpp"
#include "pcert/config.hpp"

namespace pcert {

/// Throws ConfigError when the directory already holds run artifacts and
/// force is false; creates the directory otherwise.
void prepare_output_dir(const std::string& dir, bool force);

std::string baseline_to_json(const BaselineReport& rep,
                             const std::string& config_hash);

/// Runs the clean baseline and writes baseline.json; returns the summary.
std::string run_baseline_to_dir(const RunConfig& cfg, const std::string& dir,
                                bool force, int jobs);

/// Generates the trajectory corpus and writes trajectories.csv, params.bin,
/// and generate.json; returns the summary.
std::string run_generate_to_dir(const RunConfig& cfg, const std::string& dir,
                                bool force, int jobs);

struct CertifyOptions {
  bool force = false;
  int jobs = 0;
  bool strict_scenarios = false;
  std::optional<Mode> mode_override;
};

/// Full certification; writes certificate.json, trajectories.csv,
/// params.bin, scenario_trajectories.csv, curve.csv, and barrier.bin when a
/// barrier was validated. Returns the certificate.
Certificate run_certify_to_dir(const RunConfig& cfg, const std::string& dir,
                               const CertifyOptions& options);

/// Threshold sweep over one corpus; writes certificates.json and curve.csv.
std::vector<Certificate> run_sweep_to_dir(const RunConfig& cfg,
                                          const std::string& dir,
                                          const CertifyOptions& options);

/// Reads a finished certify/sweep directory and writes plot_accuracy.csv
/// (delta, empirical_accuracy, certified_flag) plus plot_staircase.csv
/// (alpha, delta_cert). Throws IoError when no run is present.
void run_plot_data(const std::string& cert_dir);

}  // namespace pcert
