#include "pcert/barrier.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include "pcert/errors.hpp"

namespace pcert {

double eval_barrier(const BarrierNet& net, std::span<const double> theta) {
  if (net.spec.output_size() != 1) {
    throw ShapeError("barrier network must have scalar output");
  }
  thread_local MlpWorkspace ws;
  thread_local std::vector<double> out;
  forward(net, theta, out, ws);
  return out[0];
}

namespace {

struct LossTerms {
  double term_init = 0.0, term_unsafe = 0.0, term_succ = 0.0;
  int z_size = 0;
};

double relu(double x) { return x > 0.0 ? x : 0.0; }

// Evaluates the three hinge sums (optionally shifted by training margins)
// and, when grad != nullptr, accumulates the exact parameter gradient with
// sublevel-set membership frozen at the current parameters.
LossTerms accumulate(const BarrierNet& net, const LabeledParamSets& sets,
                     const BarrierLossWeights& weights, double m_init,
                     double m_unsafe, double m_succ, ParamVector* grad,
                     const std::vector<bool>* z_mask_override = nullptr,
                     std::vector<bool>* z_mask_out = nullptr) {
  thread_local MlpWorkspace ws;
  thread_local std::vector<double> logits;

  const std::size_t n_theta =
      sets.initial.size() + sets.safe_set.size() + sets.unsafe_set.size();
  auto member = [&](std::size_t i) -> const ParamWithSucc& {
    if (i < sets.initial.size()) return sets.initial[i];
    i -= sets.initial.size();
    if (i < sets.safe_set.size()) return sets.safe_set[i];
    return sets.unsafe_set[i - sets.safe_set.size()];
  };

  // Barrier values on every member of the union, defining Z.
  std::vector<double> b_theta(n_theta);
  for (std::size_t i = 0; i < n_theta; ++i) {
    b_theta[i] = eval_barrier(net, member(i).value);
  }
  std::vector<bool> z_mask(n_theta);
  if (z_mask_override != nullptr) {
    z_mask = *z_mask_override;
  } else {
    for (std::size_t i = 0; i < n_theta; ++i) z_mask[i] = b_theta[i] <= 0.0;
  }
  if (z_mask_out != nullptr) *z_mask_out = z_mask;

  LossTerms t;
  for (std::size_t i = 0; i < n_theta; ++i) {
    if (z_mask[i]) ++t.z_size;
  }
  const double c_i =
      weights.c_init ? *weights.c_init
                     : (sets.initial.empty() ? 0.0 : 1.0 / sets.initial.size());
  const double c_u = weights.c_unsafe
                         ? *weights.c_unsafe
                         : (sets.unsafe_set.empty() ? 0.0 : 1.0 / sets.unsafe_set.size());
  const double c_z =
      weights.c_succ ? *weights.c_succ : (t.z_size == 0 ? 0.0 : 1.0 / t.z_size);

  if (grad != nullptr) grad->assign(net.params.size(), 0.0);

  // Backprops coeff * dB(x)/dphi into grad.
  auto backprop_point = [&](std::span<const double> x, double coeff) {
    forward(net, x, logits, ws);
    ws.delta.back()[0] = coeff;
    // Reuse the classifier backward pass through a one-output head.
    // (forward already filled ws.act.)
    const auto& sizes = net.spec.layer_sizes;
    std::size_t off = net.spec.param_count();
    for (std::size_t l = sizes.size() - 1; l-- > 0;) {
      const int in = sizes[l];
      const int out = sizes[l + 1];
      off -= static_cast<std::size_t>(out) * in + out;
      const double* w = net.params.data() + off;
      const double* a = ws.act[l].data();
      const double* d_out = ws.delta[l + 1].data();
      double* gw = grad->data() + off;
      double* gb = gw + static_cast<std::size_t>(out) * in;
      for (int j = 0; j < out; ++j) {
        const double dj = d_out[j];
        if (dj == 0.0) continue;
        double* gwr = gw + static_cast<std::size_t>(j) * in;
        for (int i2 = 0; i2 < in; ++i2) gwr[i2] += dj * a[i2];
        gb[j] += dj;
      }
      if (l == 0) break;
      double* d_in = ws.delta[l].data();
      std::fill(d_in, d_in + in, 0.0);
      for (int j = 0; j < out; ++j) {
        const double dj = d_out[j];
        if (dj == 0.0) continue;
        const double* wr = w + static_cast<std::size_t>(j) * in;
        for (int i2 = 0; i2 < in; ++i2) d_in[i2] += dj * wr[i2];
      }
      for (int i2 = 0; i2 < in; ++i2) {
        if (ws.act[l][i2] <= 0.0) d_in[i2] = 0.0;
      }
    }
  };

  for (std::size_t i = 0; i < sets.initial.size(); ++i) {
    const double b = b_theta[i];
    t.term_init += relu(b + m_init);
    if (grad != nullptr && b + m_init > 0.0) {
      backprop_point(sets.initial[i].value, c_i);
    }
  }
  const std::size_t unsafe_base = sets.initial.size() + sets.safe_set.size();
  for (std::size_t i = 0; i < sets.unsafe_set.size(); ++i) {
    const double b = b_theta[unsafe_base + i];
    t.term_unsafe += relu(m_unsafe - b);
    if (grad != nullptr && m_unsafe - b > 0.0) {
      backprop_point(sets.unsafe_set[i].value, -c_u);
    }
  }
  for (std::size_t i = 0; i < n_theta; ++i) {
    if (!z_mask[i]) continue;
    const auto& p = member(i);
    if (p.succ.empty()) {
      throw DataError("successor missing for a sublevel-set member");
    }
    const double b = eval_barrier(net, p.succ);
    t.term_succ += relu(b + m_succ);
    if (grad != nullptr && b + m_succ > 0.0) backprop_point(p.succ, c_z);
  }
  t.term_init *= c_i;
  t.term_unsafe *= c_u;
  t.term_succ *= c_z;
  return t;
}

}  // namespace

BarrierEval barrier_loss_value(const BarrierNet& net,
                               const LabeledParamSets& sets,
                               const BarrierLossWeights& weights) {
  const LossTerms t = accumulate(net, sets, weights, 0.0, 0.0, 0.0, nullptr);
  BarrierEval ev;
  ev.term_init = t.term_init;
  ev.term_unsafe = t.term_unsafe;
  ev.term_succ = t.term_succ;
  ev.z_size = t.z_size;
  ev.loss = t.term_init + t.term_unsafe + t.term_succ;
  return ev;
}

std::pair<double, ParamVector> barrier_loss(const BarrierNet& net,
                                            const LabeledParamSets& sets,
                                            const BarrierLossWeights& weights) {
  ParamVector grad;
  const LossTerms t =
      accumulate(net, sets, weights, 0.0, 0.0, 0.0, &grad);
  return {t.term_init + t.term_unsafe + t.term_succ, std::move(grad)};
}

bool check_sign_conditions(const BarrierNet& net, const LabeledParamSets& sets,
                           double tau_sign, double gamma_unsafe,
                           BarrierTrainReport* report) {
  double worst_init = -1e300, worst_unsafe = 1e300, worst_succ = -1e300;
  for (const auto& p : sets.initial) {
    worst_init = std::max(worst_init, eval_barrier(net, p.value));
  }
  for (const auto& p : sets.unsafe_set) {
    worst_unsafe = std::min(worst_unsafe, eval_barrier(net, p.value));
  }
  auto scan_succ = [&](const std::vector<ParamWithSucc>& v) {
    for (const auto& p : v) {
      if (eval_barrier(net, p.value) <= 0.0) {
        worst_succ = std::max(worst_succ, eval_barrier(net, p.succ));
      }
    }
  };
  scan_succ(sets.initial);
  scan_succ(sets.safe_set);
  scan_succ(sets.unsafe_set);

  const bool ok = worst_init <= tau_sign && worst_unsafe >= gamma_unsafe &&
                  worst_succ <= tau_sign;
  if (report != nullptr) {
    report->resid_init = worst_init;
    report->resid_unsafe = worst_unsafe;
    report->resid_succ = worst_succ;
    report->sign_check_ok = ok;
  }
  return ok;
}

BarrierTrainResult train_barrier(const LabeledParamSets& sets,
                                 const BarrierLossWeights& weights,
                                 const BarrierTrainConfig& config,
                                 int param_dim) {
  if (sets.initial.empty()) {
    throw DataError("train_barrier: initial set is empty");
  }
  if (sets.unsafe_set.empty()) {
    throw DataError("train_barrier: unsafe set is empty");
  }

  MlpSpec spec;
  spec.layer_sizes.push_back(param_dim);
  for (int h : config.hidden) spec.layer_sizes.push_back(h);
  spec.layer_sizes.push_back(1);

  BarrierNet net = init_mlp(spec, config.seed);
  OptimizerConfig adam;
  adam.kind = OptKind::Adam;
  adam.learning_rate = config.learning_rate;
  adam.seed = config.seed;
  OptimizerState st = make_optimizer_state(net, adam);

  BarrierTrainResult result;
  ParamVector grad;
  ParamVector snapshot;
  bool have_snapshot = false;
  std::vector<bool> z_mask;
  int iter = 0;
  int stop_at = config.max_iters;
  for (; iter < stop_at; ++iter) {
    const bool refresh = (iter % std::max(1, config.z_refresh_interval)) == 0;
    LossTerms t;
    if (refresh) {
      t = accumulate(net, sets, weights, config.margin_init,
                     config.margin_unsafe, config.margin_succ, &grad, nullptr,
                     &z_mask);
    } else {
      t = accumulate(net, sets, weights, config.margin_init,
                     config.margin_unsafe, config.margin_succ, &grad, &z_mask);
    }
    const double shifted = t.term_init + t.term_unsafe + t.term_succ;
    if (shifted == 0.0) {
      // Feasible at the shifted margins; keep polishing under decay and
      // remember the feasible parameters.
      snapshot = net.params;
      if (!have_snapshot) {
        have_snapshot = true;
        stop_at = std::min(config.max_iters, iter + config.polish_iters);
      }
      if (config.weight_decay <= 0.0) break;
    } else {
      st.step_count += 1;
      const double b1 = adam.adam_beta1, b2 = adam.adam_beta2;
      const double tc = static_cast<double>(st.step_count);
      const double c1 = 1.0 - std::pow(b1, tc);
      const double c2 = 1.0 - std::pow(b2, tc);
      for (std::size_t i = 0; i < net.params.size(); ++i) {
        double& m = st.first_moment[i];
        double& v = st.second_moment[i];
        m = b1 * m + (1.0 - b1) * grad[i];
        v = b2 * v + (1.0 - b2) * grad[i] * grad[i];
        net.params[i] -= adam.learning_rate * (m / c1) /
                         (std::sqrt(v / c2) + adam.adam_epsilon);
      }
    }
    if (config.weight_decay > 0.0) {
      for (double& p : net.params) p *= 1.0 - config.weight_decay;
    }
  }
  if (have_snapshot) net.params = snapshot;

  BarrierTrainReport& rep = result.report;
  rep.iterations = iter;
  const BarrierEval exact = barrier_loss_value(net, sets, weights);
  rep.final_loss = exact.loss;
  rep.converged = exact.loss <= config.tau_loss;
  const bool signs =
      check_sign_conditions(net, sets, config.tau_sign, config.gamma_unsafe, &rep);
  if (rep.converged && signs) {
    result.net = std::move(net);
  } else if (!rep.converged) {
    rep.failure = "loss did not reach the zero-loss threshold";
  } else {
    rep.failure = "sign conditions violated at the trained parameters";
  }
  return result;
}

// ---------------------------------------------------------------------------
// Checkpoint format.
// ---------------------------------------------------------------------------

namespace {

constexpr char kBarrierMagic[4] = {'P', 'C', 'B', 'C'};
constexpr std::uint32_t kBarrierVersion = 1;

void put_u32(std::ofstream& f, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                        static_cast<unsigned char>((v >> 8) & 0xff),
                        static_cast<unsigned char>((v >> 16) & 0xff),
                        static_cast<unsigned char>((v >> 24) & 0xff)};
  f.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32(std::ifstream& f, const std::string& path) {
  unsigned char b[4];
  f.read(reinterpret_cast<char*>(b), 4);
  if (!f) throw IoError("truncated barrier checkpoint: " + path);
  return std::uint32_t(b[0]) | (std::uint32_t(b[1]) << 8) |
         (std::uint32_t(b[2]) << 16) | (std::uint32_t(b[3]) << 24);
}

}  // namespace

void save_barrier(const std::string& path, const BarrierNet& net) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot write " + path);
  f.write(kBarrierMagic, 4);
  put_u32(f, kBarrierVersion);
  put_u32(f, static_cast<std::uint32_t>(net.spec.layer_sizes.size()));
  for (int s : net.spec.layer_sizes) put_u32(f, static_cast<std::uint32_t>(s));
  put_u32(f, static_cast<std::uint32_t>(net.params.size()));
  for (double x : net.params) {
    std::uint64_t bits;
    std::memcpy(&bits, &x, 8);
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(bits >> (8 * i));
    f.write(reinterpret_cast<const char*>(b), 8);
  }
}

BarrierNet load_barrier(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot read " + path);
  char magic[4];
  f.read(magic, 4);
  if (!f || std::memcmp(magic, kBarrierMagic, 4) != 0) {
    throw FormatError("bad barrier checkpoint magic: " + path);
  }
  if (get_u32(f, path) != kBarrierVersion) {
    throw FormatError("unsupported barrier checkpoint version");
  }
  const std::uint32_t n_layers = get_u32(f, path);
  MlpSpec spec;
  for (std::uint32_t i = 0; i < n_layers; ++i) {
    spec.layer_sizes.push_back(static_cast<int>(get_u32(f, path)));
  }
  spec.validate();
  const std::uint32_t n_params = get_u32(f, path);
  if (n_params != spec.param_count()) {
    throw FormatError("barrier checkpoint parameter count mismatch");
  }
  ParamVector params(n_params);
  for (std::uint32_t i = 0; i < n_params; ++i) {
    unsigned char b[8];
    f.read(reinterpret_cast<char*>(b), 8);
    if (!f) throw IoError("truncated barrier checkpoint: " + path);
    std::uint64_t bits = 0;
    for (int j = 0; j < 8; ++j) bits |= std::uint64_t(b[j]) << (8 * j);
    std::memcpy(&params[i], &bits, 8);
  }
  return {std::move(spec), std::move(params)};
}

}  // namespace pcert
