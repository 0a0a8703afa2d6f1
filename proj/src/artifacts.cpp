#include "pcert/artifacts.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>

#include "json.hpp"
#include "pcert/errors.hpp"
#include "pcert/version.hpp"

namespace pcert {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

namespace {

const char* const kRunArtifacts[] = {
    "baseline.json",     "generate.json",  "trajectories.csv",
    "params.bin",        "certificate.json", "certificates.json",
    "curve.csv",         "barrier.bin",    "scenario_trajectories.csv",
};

void write_text(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot write " + path);
  f << text;
}

std::string read_text(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot read " + path);
  return std::string((std::istreambuf_iterator<char>(f)),
                     std::istreambuf_iterator<char>());
}

}  // namespace

void prepare_output_dir(const std::string& dir, bool force) {
  fs::path p(dir);
  if (fs::exists(p)) {
    if (!fs::is_directory(p)) {
      throw ConfigError("output path exists and is not a directory: " + dir);
    }
    for (const char* name : kRunArtifacts) {
      if (fs::exists(p / name) && !force) {
        throw ConfigError("output directory already holds run artifacts (" +
                          dir + "/" + name + "); pass --force to overwrite");
      }
    }
  } else {
    std::error_code ec;
    fs::create_directories(p, ec);
    if (ec) throw IoError("cannot create output directory " + dir);
  }
}

std::string baseline_to_json(const BaselineReport& rep,
                             const std::string& config_hash) {
  ordered_json j;
  j["g_c"] = rep.g_c;
  j["source"] = rep.user_set ? "user" : "median";
  j["per_run"] = rep.per_run;
  j["seeds"] = rep.seeds;
  j["config_hash"] = config_hash;
  j["tool_version"] = kToolVersion;
  return j.dump(2) + "\n";
}

std::string run_baseline_to_dir(const RunConfig& cfg, const std::string& dir,
                                bool force, int jobs) {
  const CertRequest req = cfg.to_request();
  prepare_output_dir(dir, force);
  const BaselineReport rep =
      clean_baseline(req.experiment, req.experiment.clean_runs, jobs);
  const std::string text = baseline_to_json(rep, cfg.hash);
  write_text(dir + "/baseline.json", text);
  return text;
}

std::string run_generate_to_dir(const RunConfig& cfg, const std::string& dir,
                                bool force, int jobs) {
  CertRequest req = cfg.to_request();
  if (jobs > 0) req.jobs = jobs;
  prepare_output_dir(dir, force);
  const BaselineReport rep =
      clean_baseline(req.experiment, req.experiment.clean_runs, req.jobs);
  const auto samples = generate(req.experiment, req.n_train, rep.g_c, req.jobs,
                                kStreamTraining);
  write_trajectory_csv(dir + "/trajectories.csv", samples, req.experiment.mode);
  write_param_sidecar(dir + "/params.bin", samples);

  ordered_json j;
  j["mode"] = to_string(req.experiment.mode);
  j["n"] = req.n_train;
  j["g_c"] = rep.g_c;
  j["delta_emp"] =
      empirical_radius(samples, req.experiment.alpha, rep.g_c);
  j["delta_emp_max_rule"] =
      empirical_radius_max_rule(samples, req.experiment.alpha, rep.g_c);
  j["config_hash"] = cfg.hash;
  j["tool_version"] = kToolVersion;
  const std::string text = j.dump(2) + "\n";
  write_text(dir + "/generate.json", text);
  return text;
}

Certificate run_certify_to_dir(const RunConfig& cfg, const std::string& dir,
                               const CertifyOptions& options) {
  CertRequest req = cfg.to_request();
  if (options.jobs > 0) req.jobs = options.jobs;
  req.strict_scenarios = options.strict_scenarios;
  if (options.mode_override) req.experiment.mode = *options.mode_override;
  prepare_output_dir(dir, options.force);

  CertOutcome outcome = run_certification(req);
  write_text(dir + "/baseline.json",
             baseline_to_json(outcome.baseline, cfg.hash));
  write_certificate(dir + "/certificate.json", outcome.certificate);
  write_trajectory_csv(dir + "/trajectories.csv", outcome.training_samples,
                       req.experiment.mode);
  write_param_sidecar(dir + "/params.bin", outcome.training_samples);
  if (!outcome.scenario_samples.empty()) {
    write_trajectory_csv(dir + "/scenario_trajectories.csv",
                         outcome.scenario_samples, req.experiment.mode);
  }
  if (outcome.barrier) {
    save_barrier(dir + "/barrier.bin", *outcome.barrier);
  }
  const Certificate certs[] = {outcome.certificate};
  write_curve_csv(dir + "/curve.csv", certs);
  return outcome.certificate;
}

std::vector<Certificate> run_sweep_to_dir(const RunConfig& cfg,
                                          const std::string& dir,
                                          const CertifyOptions& options) {
  CertRequest req = cfg.to_request();
  if (options.jobs > 0) req.jobs = options.jobs;
  req.strict_scenarios = options.strict_scenarios;
  if (options.mode_override) req.experiment.mode = *options.mode_override;
  const std::vector<double> alphas = cfg.sweep_alphas();
  prepare_output_dir(dir, options.force);

  const std::vector<Certificate> certs = monotone_alpha_sweep(req, alphas);
  ordered_json arr = ordered_json::array();
  for (const auto& c : certs) {
    arr.push_back(ordered_json::parse(certificate_to_json(c)));
  }
  write_text(dir + "/certificates.json", arr.dump(2) + "\n");
  write_curve_csv(dir + "/curve.csv", certs);
  return certs;
}

void run_plot_data(const std::string& cert_dir) {
  const fs::path dir(cert_dir);
  std::vector<Certificate> certs;
  if (fs::exists(dir / "certificates.json")) {
    const auto arr = ordered_json::parse(read_text((dir / "certificates.json").string()));
    for (const auto& j : arr) {
      certs.push_back(certificate_from_json(j.dump()));
    }
  } else if (fs::exists(dir / "certificate.json")) {
    certs.push_back(read_certificate((dir / "certificate.json").string()));
  } else {
    throw IoError("no certify or sweep run found in " + cert_dir);
  }

  double max_certified = 0.0;
  for (const auto& c : certs) {
    if (c.status == CertStatus::Certified) {
      max_certified = std::max(max_certified, c.delta_cert);
    }
  }

  {
    std::ofstream f(dir / "plot_staircase.csv");
    if (!f) throw IoError("cannot write plot_staircase.csv");
    f << "alpha,delta_cert\n";
    char buf[96];
    for (const auto& c : certs) {
      std::snprintf(buf, sizeof(buf), "%.17g,%.17g\n", c.alpha_effective,
                    c.delta_cert);
      f << buf;
    }
  }

  if (fs::exists(dir / "trajectories.csv")) {
    const auto samples =
        read_trajectory_csv((dir / "trajectories.csv").string());
    std::map<double, std::pair<double, int>> by_delta;  // sum, count
    for (const auto& s : samples) {
      auto& acc = by_delta[s.delta];
      acc.first += s.g_p;
      acc.second += 1;
    }
    std::ofstream f(dir / "plot_accuracy.csv");
    if (!f) throw IoError("cannot write plot_accuracy.csv");
    f << "delta,empirical_accuracy,certified_flag\n";
    char buf[96];
    for (const auto& [delta, acc] : by_delta) {
      std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%d\n", delta,
                    acc.first / acc.second,
                    delta <= max_certified ? 1 : 0);
      f << buf;
    }
  }
}

}  // namespace pcert
