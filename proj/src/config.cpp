#include "pcert/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "pcert/errors.hpp"

namespace pcert {

namespace {

const std::set<std::string>& known_keys() {
  static const std::set<std::string> keys = {
      "mode", "dataset", "n_train", "n_test", "feature_dim", "classes",
      "separation", "noise", "idx_train_images", "idx_train_labels",
      "idx_test_images", "idx_test_labels", "model_hidden", "optimizer",
      "learning_rate", "batch_size", "adam_beta1", "adam_beta2",
      "adam_epsilon", "horizon", "attack", "norm", "rho", "attack_steps",
      "attack_step_size", "trigger_coords", "trigger_values", "alpha",
      "clean_runs", "g_c_override", "delta_max", "grid_points",
      "n_trajectories", "n_scenarios", "epsilon", "beta", "d_delta",
      "barrier_hidden", "barrier_learning_rate", "barrier_max_iters",
      "barrier_attempts", "master_seed", "paired_init", "sweep_alphas",
  };
  return keys;
}

std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

class Reader {
 public:
  explicit Reader(const std::map<std::string, std::string>& v) : values_(v) {}

  bool has(const std::string& key) const { return values_.count(key) != 0; }

  std::string required(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) {
      throw ConfigError("missing required key '" + key + "'");
    }
    return it->second;
  }

  std::string get(const std::string& key, const std::string& fallback) const {
    auto it = values_.find(key);
    return it == values_.end() ? fallback : it->second;
  }

  double number(const std::string& key) const {
    return parse_number(key, required(key));
  }
  double number(const std::string& key, double fallback) const {
    return has(key) ? parse_number(key, values_.at(key)) : fallback;
  }
  long long integer(const std::string& key) const {
    return parse_integer(key, required(key));
  }
  long long integer(const std::string& key, long long fallback) const {
    return has(key) ? parse_integer(key, values_.at(key)) : fallback;
  }
  bool boolean(const std::string& key, bool fallback) const {
    if (!has(key)) return fallback;
    const std::string v = values_.at(key);
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw ConfigError("key '" + key + "' must be true or false");
  }

  std::vector<double> number_list(const std::string& key) const {
    std::vector<double> out;
    std::stringstream ss(required(key));
    std::string item;
    while (std::getline(ss, item, ',')) {
      out.push_back(parse_number(key, trim(item)));
    }
    if (out.empty()) throw ConfigError("key '" + key + "' must list values");
    return out;
  }

  std::vector<int> int_list(const std::string& key,
                            const std::vector<int>& fallback) const {
    if (!has(key)) return fallback;
    std::vector<int> out;
    std::stringstream ss(values_.at(key));
    std::string item;
    while (std::getline(ss, item, ',')) {
      out.push_back(static_cast<int>(parse_integer(key, trim(item))));
    }
    if (out.empty()) throw ConfigError("key '" + key + "' must list values");
    return out;
  }

 private:
  static double parse_number(const std::string& key, const std::string& v) {
    try {
      std::size_t used = 0;
      const double x = std::stod(v, &used);
      if (used != v.size()) throw std::invalid_argument(v);
      return x;
    } catch (const std::exception&) {
      throw ConfigError("key '" + key + "' has a non-numeric value '" + v + "'");
    }
  }
  static long long parse_integer(const std::string& key, const std::string& v) {
    long long x = 0;
    const auto res = std::from_chars(v.data(), v.data() + v.size(), x);
    if (res.ec != std::errc() || res.ptr != v.data() + v.size()) {
      throw ConfigError("key '" + key + "' has a non-integer value '" + v + "'");
    }
    return x;
  }

  const std::map<std::string, std::string>& values_;
};

}  // namespace

std::string fnv1a_hex(const std::string& text) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

RunConfig parse_config_text(const std::string& text) {
  RunConfig cfg;
  std::stringstream ss(text);
  std::string line;
  int line_no = 0;
  while (std::getline(ss, line)) {
    ++line_no;
    const std::size_t hash_pos = line.find('#');
    if (hash_pos != std::string::npos) line = line.substr(0, hash_pos);
    line = trim(line);
    if (line.empty()) continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("line " + std::to_string(line_no) +
                        ": expected key = value");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (known_keys().count(key) == 0) {
      throw ConfigError("unknown key '" + key + "' (line " +
                        std::to_string(line_no) + ")");
    }
    if (value.empty()) {
      throw ConfigError("key '" + key + "' has an empty value (line " +
                        std::to_string(line_no) + ")");
    }
    if (cfg.values.count(key) != 0) {
      throw ConfigError("duplicate key '" + key + "' (line " +
                        std::to_string(line_no) + ")");
    }
    cfg.values[key] = value;
  }
  std::ostringstream canon;
  for (const auto& [k, v] : cfg.values) canon << k << "=" << v << "\n";
  cfg.canonical_text = canon.str();
  cfg.hash = fnv1a_hex(cfg.canonical_text);
  return cfg;
}

RunConfig load_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot read config " + path);
  std::string text((std::istreambuf_iterator<char>(f)),
                   std::istreambuf_iterator<char>());
  return parse_config_text(text);
}

CertRequest RunConfig::to_request() const {
  Reader r(values);
  CertRequest req;
  ExperimentConfig& exp = req.experiment;

  const std::string mode = r.required("mode");
  if (mode == "train") exp.mode = Mode::TrainTime;
  else if (mode == "test") exp.mode = Mode::TestTime;
  else throw ConfigError("key 'mode' must be train or test");

  const std::string dataset = r.required("dataset");
  if (dataset == "blobs") exp.dataset.kind = DatasetSpec::Kind::Blobs;
  else if (dataset == "moons") exp.dataset.kind = DatasetSpec::Kind::Moons;
  else if (dataset == "idx") exp.dataset.kind = DatasetSpec::Kind::Idx;
  else throw ConfigError("key 'dataset' must be blobs, moons, or idx");

  exp.dataset.n_train = static_cast<int>(r.integer("n_train", 400));
  exp.dataset.n_test = static_cast<int>(r.integer("n_test", 400));
  exp.dataset.feature_dim = static_cast<int>(r.integer("feature_dim", 2));
  exp.dataset.classes = static_cast<int>(r.integer("classes", 2));
  exp.dataset.separation = r.number("separation", 6.0);
  exp.dataset.noise = r.number("noise", 0.1);
  if (exp.dataset.kind == DatasetSpec::Kind::Idx) {
    exp.dataset.idx_train_images = r.required("idx_train_images");
    exp.dataset.idx_train_labels = r.required("idx_train_labels");
    exp.dataset.idx_test_images = r.required("idx_test_images");
    exp.dataset.idx_test_labels = r.required("idx_test_labels");
  }

  int input_dim = exp.dataset.feature_dim;
  int n_classes = exp.dataset.classes;
  if (exp.dataset.kind == DatasetSpec::Kind::Moons) {
    input_dim = 2;
    n_classes = 2;
  } else if (exp.dataset.kind == DatasetSpec::Kind::Idx) {
    // Dimensions come from the files; probe them once here so the model
    // spec is complete before any computation.
    const LabeledDataset probe =
        load_idx(exp.dataset.idx_train_images, exp.dataset.idx_train_labels);
    input_dim = probe.m;
    n_classes = probe.k;
  }
  exp.model.layer_sizes.clear();
  exp.model.layer_sizes.push_back(input_dim);
  for (int h : r.int_list("model_hidden", {16, 16})) {
    exp.model.layer_sizes.push_back(h);
  }
  exp.model.layer_sizes.push_back(n_classes);

  const std::string opt = r.get("optimizer", "sgd");
  if (opt == "gd") exp.optimizer.kind = OptKind::GD;
  else if (opt == "sgd") exp.optimizer.kind = OptKind::SGD;
  else if (opt == "adam") exp.optimizer.kind = OptKind::Adam;
  else throw ConfigError("key 'optimizer' must be gd, sgd, or adam");
  exp.optimizer.learning_rate = r.number("learning_rate", 0.05);
  exp.optimizer.batch_size = static_cast<int>(r.integer("batch_size", 64));
  exp.optimizer.adam_beta1 = r.number("adam_beta1", 0.9);
  exp.optimizer.adam_beta2 = r.number("adam_beta2", 0.999);
  exp.optimizer.adam_epsilon = r.number("adam_epsilon", 1e-8);

  exp.horizon = static_cast<int>(r.integer("horizon"));

  const std::string attack = r.get("attack", "pgd");
  if (attack == "pgd") exp.attack = AttackKind::PGD;
  else if (attack == "bda") exp.attack = AttackKind::BDA;
  else throw ConfigError("key 'attack' must be pgd or bda");
  if (exp.attack == AttackKind::BDA) {
    const auto coords = r.int_list("trigger_coords", {});
    if (coords.empty()) throw ConfigError("missing required key 'trigger_coords'");
    exp.trigger.patch_coords = coords;
    for (double v : r.number_list("trigger_values")) {
      exp.trigger.patch_values.push_back(v);
    }
  }

  const std::string norm = r.get("norm", "linf");
  if (norm == "l2") exp.p = Norm::L2;
  else if (norm == "linf") exp.p = Norm::Linf;
  else throw ConfigError("key 'norm' must be l2 or linf");

  exp.rho = r.number("rho");
  exp.attack_steps = static_cast<int>(r.integer("attack_steps", 40));
  exp.attack_step_size = r.number("attack_step_size", 0.0);
  exp.alpha = r.number("alpha");
  exp.clean_runs = static_cast<int>(r.integer("clean_runs", 5));
  if (r.has("g_c_override")) exp.g_c_override = r.number("g_c_override");
  exp.master_seed = static_cast<std::uint64_t>(r.integer("master_seed"));
  exp.paired_init = r.boolean("paired_init", false);

  const double delta_max = r.number("delta_max");
  const int grid_points = static_cast<int>(r.integer("grid_points"));
  if (grid_points < 1) throw ConfigError("key 'grid_points' must be >= 1");
  if (delta_max < 0.0) throw ConfigError("key 'delta_max' must be >= 0");
  exp.budget_grid.clear();
  for (int i = 0; i < grid_points; ++i) {
    exp.budget_grid.push_back(grid_points == 1
                                  ? 0.0
                                  : delta_max * i / (grid_points - 1));
  }

  req.n_train = static_cast<int>(r.integer("n_trajectories"));
  req.pac.beta = r.number("beta");
  if (r.has("n_scenarios")) req.pac.n_hat = r.integer("n_scenarios");
  if (r.has("epsilon")) req.pac.epsilon = r.number("epsilon");
  if (!req.pac.n_hat && !req.pac.epsilon) {
    throw ConfigError("missing required key 'n_scenarios' (or 'epsilon')");
  }
  req.d_delta = r.number("d_delta");

  req.barrier.hidden = r.int_list("barrier_hidden", {64, 64});
  req.barrier.learning_rate = r.number("barrier_learning_rate", 1e-3);
  req.barrier.max_iters = static_cast<int>(r.integer("barrier_max_iters", 5000));
  req.barrier.attempts = static_cast<int>(r.integer("barrier_attempts", 3));

  req.config_hash = hash;
  req.validate();
  return req;
}

std::vector<double> RunConfig::sweep_alphas() const {
  Reader r(values);
  std::vector<double> alphas = r.number_list("sweep_alphas");
  if (!std::is_sorted(alphas.rbegin(), alphas.rend())) {
    throw ConfigError("key 'sweep_alphas' must be sorted descending");
  }
  return alphas;
}

}  // namespace pcert
