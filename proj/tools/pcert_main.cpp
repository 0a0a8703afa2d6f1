// Command-line front end; all work happens behind the shared C API.

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "pcert.h"

namespace {

struct CommonArgs {
  std::string config_path;
  std::string out_dir;
  int jobs = 0;
  bool force = false;
  bool strict_scenarios = false;
  std::string mode;
};

std::optional<std::string> read_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) return std::nullopt;
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

std::string default_out_dir(const std::string& config_path) {
  const char* root = std::getenv("PCERT_OUT_ROOT");
  std::string base = (root != nullptr && *root != '\0') ? root : ".";
  // Name the run after the config file stem.
  std::string stem = config_path;
  const auto slash = stem.find_last_of('/');
  if (slash != std::string::npos) stem = stem.substr(slash + 1);
  const auto dot = stem.find_last_of('.');
  if (dot != std::string::npos && dot > 0) stem = stem.substr(0, dot);
  if (stem.empty()) stem = "run";
  return base + "/" + stem;
}

int finish(pcert_status status, pcert_result* result) {
  if (result != nullptr) {
    const char* json = pcert_result_json(result);
    if (json[0] != '\0') std::fputs(json, stdout);
    const char* msg = pcert_result_message(result);
    if (msg[0] != '\0') std::fprintf(stderr, "pcert: %s\n", msg);
    pcert_result_free(result);
  }
  return static_cast<int>(status);
}

int run_command(const std::string& name, const CommonArgs& args) {
  if (name == "plot-data") {
    pcert_result* result = nullptr;
    return finish(pcert_plot_data(args.out_dir.c_str(), &result), result);
  }

  const auto config = read_file(args.config_path);
  if (!config) {
    std::fprintf(stderr, "pcert: cannot read config file %s\n",
                 args.config_path.c_str());
    return static_cast<int>(PCERT_E_CONFIG);
  }
  const std::string out =
      args.out_dir.empty() ? default_out_dir(args.config_path) : args.out_dir;
  const char* mode = args.mode.empty() ? nullptr : args.mode.c_str();

  pcert_result* result = nullptr;
  pcert_status status = PCERT_E_RUNTIME;
  if (name == "baseline") {
    status = pcert_baseline(config->c_str(), out.c_str(), args.force ? 1 : 0,
                            args.jobs, &result);
  } else if (name == "generate") {
    status = pcert_generate(config->c_str(), out.c_str(), args.force ? 1 : 0,
                            args.jobs, &result);
  } else if (name == "certify") {
    status = pcert_certify(config->c_str(), out.c_str(), args.force ? 1 : 0,
                           args.jobs, args.strict_scenarios ? 1 : 0, mode,
                           &result);
  } else if (name == "sweep") {
    status = pcert_sweep(config->c_str(), out.c_str(), args.force ? 1 : 0,
                         args.jobs, args.strict_scenarios ? 1 : 0, mode,
                         &result);
  }
  return finish(status, result);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Poisoning-robustness certification toolkit"};
  app.require_subcommand(1);
  app.set_version_flag("--version", pcert_version());

  CommonArgs args;
  const char* const commands[] = {"baseline", "generate", "certify", "sweep"};
  for (const char* name : commands) {
    CLI::App* sub = app.add_subcommand(name);
    sub->add_option("--config", args.config_path, "run configuration file")
        ->required();
    sub->add_option("--out", args.out_dir,
                    "output directory (default: $PCERT_OUT_ROOT/<config stem>)");
    sub->add_option("--jobs", args.jobs, "worker threads (0 = auto)");
    sub->add_flag("--force", args.force, "overwrite existing run artifacts");
    if (std::string(name) == "certify" || std::string(name) == "sweep") {
      sub->add_option("--mode", args.mode, "override mode: train or test")
          ->check(CLI::IsMember({"train", "test"}));
      sub->add_flag("--strict-scenarios", args.strict_scenarios,
                    "regenerate all scenarios at every candidate radius");
    }
  }
  CLI::App* plot = app.add_subcommand("plot-data");
  plot->add_option("--out", args.out_dir, "finished certify/sweep directory")
      ->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : static_cast<int>(PCERT_E_CONFIG);
  }

  return run_command(app.get_subcommands().front()->get_name(), args);
}
