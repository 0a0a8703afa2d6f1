#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "pcert/certifier.hpp"

namespace pcert {

/// Strictly validated flat key-value run configuration. Unknown keys are
/// rejected with their line number; missing required keys are named.
struct RunConfig {
  std::map<std::string, std::string> values;
  std::string canonical_text;  // sorted key=value lines
  std::string hash;            // FNV-1a 64 over the canonical text

  CertRequest to_request() const;
  std::vector<double> sweep_alphas() const;  // required for sweeps
};

RunConfig parse_config_text(const std::string& text);
RunConfig load_config(const std::string& path);

std::string fnv1a_hex(const std::string& text);

}  // namespace pcert
