#include "pcert.h"

#include <exception>
#include <string>

#include "pcert/artifacts.hpp"
#include "pcert/config.hpp"
#include "pcert/errors.hpp"
#include "pcert/version.hpp"

struct pcert_result {
  std::string json;
  std::string message;
};

namespace {

using namespace pcert;

pcert_result* make_result(std::string json, std::string message) {
  auto* r = new pcert_result;
  r->json = std::move(json);
  r->message = std::move(message);
  return r;
}

pcert_status fail(pcert_result** out, pcert_status code,
                  const std::string& message) {
  if (out != nullptr) *out = make_result("", message);
  return code;
}

pcert_status classify(const std::exception& e, pcert_result** out) {
  if (dynamic_cast<const ConfigError*>(&e) != nullptr ||
      dynamic_cast<const ArgumentError*>(&e) != nullptr ||
      dynamic_cast<const ShapeError*>(&e) != nullptr) {
    return fail(out, PCERT_E_CONFIG, e.what());
  }
  if (dynamic_cast<const IoError*>(&e) != nullptr ||
      dynamic_cast<const FormatError*>(&e) != nullptr) {
    return fail(out, PCERT_E_MISSING_INPUT, e.what());
  }
  return fail(out, PCERT_E_RUNTIME, e.what());
}

std::optional<Mode> parse_mode_override(const char* mode_override) {
  if (mode_override == nullptr || *mode_override == '\0') return std::nullopt;
  const std::string m(mode_override);
  if (m == "train") return Mode::TrainTime;
  if (m == "test") return Mode::TestTime;
  throw ConfigError("mode override must be train or test");
}

}  // namespace

extern "C" {

const char* pcert_version(void) { return pcert::kToolVersion; }

pcert_status pcert_baseline(const char* config_text, const char* out_dir,
                            int force, int jobs, pcert_result** out) {
  if (config_text == nullptr || out_dir == nullptr) {
    return fail(out, PCERT_E_CONFIG, "null argument");
  }
  try {
    const RunConfig cfg = parse_config_text(config_text);
    const std::string json =
        run_baseline_to_dir(cfg, out_dir, force != 0, jobs);
    if (out != nullptr) *out = make_result(json, "");
    return PCERT_OK;
  } catch (const std::exception& e) {
    return classify(e, out);
  }
}

pcert_status pcert_generate(const char* config_text, const char* out_dir,
                            int force, int jobs, pcert_result** out) {
  if (config_text == nullptr || out_dir == nullptr) {
    return fail(out, PCERT_E_CONFIG, "null argument");
  }
  try {
    const RunConfig cfg = parse_config_text(config_text);
    const std::string json =
        run_generate_to_dir(cfg, out_dir, force != 0, jobs);
    if (out != nullptr) *out = make_result(json, "");
    return PCERT_OK;
  } catch (const std::exception& e) {
    return classify(e, out);
  }
}

pcert_status pcert_certify(const char* config_text, const char* out_dir,
                           int force, int jobs, int strict_scenarios,
                           const char* mode_override, pcert_result** out) {
  if (config_text == nullptr || out_dir == nullptr) {
    return fail(out, PCERT_E_CONFIG, "null argument");
  }
  try {
    const RunConfig cfg = parse_config_text(config_text);
    CertifyOptions options;
    options.force = force != 0;
    options.jobs = jobs;
    options.strict_scenarios = strict_scenarios != 0;
    options.mode_override = parse_mode_override(mode_override);
    const Certificate cert = run_certify_to_dir(cfg, out_dir, options);
    if (out != nullptr) *out = make_result(certificate_to_json(cert), "");
    return cert.status == CertStatus::NotCertifiable ? PCERT_E_NOT_CERTIFIABLE
                                                     : PCERT_OK;
  } catch (const std::exception& e) {
    return classify(e, out);
  }
}

pcert_status pcert_sweep(const char* config_text, const char* out_dir,
                         int force, int jobs, int strict_scenarios,
                         const char* mode_override, pcert_result** out) {
  if (config_text == nullptr || out_dir == nullptr) {
    return fail(out, PCERT_E_CONFIG, "null argument");
  }
  try {
    const RunConfig cfg = parse_config_text(config_text);
    CertifyOptions options;
    options.force = force != 0;
    options.jobs = jobs;
    options.strict_scenarios = strict_scenarios != 0;
    options.mode_override = parse_mode_override(mode_override);
    const auto certs = run_sweep_to_dir(cfg, out_dir, options);
    std::string json = "[";
    for (std::size_t i = 0; i < certs.size(); ++i) {
      if (i > 0) json += ",";
      json += certificate_to_json(certs[i]);
    }
    json += "]\n";
    if (out != nullptr) *out = make_result(json, "");
    return PCERT_OK;
  } catch (const std::exception& e) {
    return classify(e, out);
  }
}

pcert_status pcert_plot_data(const char* cert_dir, pcert_result** out) {
  if (cert_dir == nullptr) return fail(out, PCERT_E_CONFIG, "null argument");
  try {
    run_plot_data(cert_dir);
    if (out != nullptr) *out = make_result("", "");
    return PCERT_OK;
  } catch (const std::exception& e) {
    return classify(e, out);
  }
}

const char* pcert_result_json(const pcert_result* result) {
  return result == nullptr ? "" : result->json.c_str();
}

const char* pcert_result_message(const pcert_result* result) {
  return result == nullptr ? "" : result->message.c_str();
}

void pcert_result_free(pcert_result* result) { delete result; }

pcert_status pcert_required_scenarios(double epsilon, double beta,
                                      long long* out_n) {
  if (out_n == nullptr) return PCERT_E_CONFIG;
  try {
    *out_n = required_scenarios(epsilon, beta);
    return PCERT_OK;
  } catch (const std::exception&) {
    return PCERT_E_CONFIG;
  }
}

pcert_status pcert_achieved_epsilon(long long n_hat, double beta,
                                    double* out_epsilon) {
  if (out_epsilon == nullptr) return PCERT_E_CONFIG;
  try {
    *out_epsilon = achieved_epsilon(n_hat, beta);
    return PCERT_OK;
  } catch (const std::exception&) {
    return PCERT_E_CONFIG;
  }
}

}  // extern "C"
