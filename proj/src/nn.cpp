#include "pcert/nn.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "pcert/errors.hpp"

namespace pcert {

bool all_finite(std::span<const double> v) {
  for (double x : v) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

std::size_t MlpSpec::param_count() const {
  std::size_t d = 0;
  for (std::size_t i = 0; i + 1 < layer_sizes.size(); ++i) {
    d += static_cast<std::size_t>(layer_sizes[i]) * layer_sizes[i + 1] +
         layer_sizes[i + 1];
  }
  return d;
}

void MlpSpec::validate() const {
  if (layer_sizes.size() < 2) {
    throw ShapeError("MlpSpec needs at least input and output sizes");
  }
  for (int s : layer_sizes) {
    if (s <= 0) throw ShapeError("MlpSpec layer sizes must be positive");
  }
}

Mlp make_mlp(MlpSpec spec) {
  spec.validate();
  ParamVector params(spec.param_count(), 0.0);
  return {std::move(spec), std::move(params)};
}

Mlp init_mlp(MlpSpec spec, std::uint64_t seed) {
  spec.validate();
  Rng rng(seed);
  ParamVector params(spec.param_count(), 0.0);
  std::size_t off = 0;
  for (std::size_t l = 0; l + 1 < spec.layer_sizes.size(); ++l) {
    const int fan_in = spec.layer_sizes[l];
    const int fan_out = spec.layer_sizes[l + 1];
    const double limit = std::sqrt(6.0 / (fan_in + fan_out));
    for (int i = 0; i < fan_out * fan_in; ++i) {
      params[off + i] = rng.uniform(-limit, limit);
    }
    off += static_cast<std::size_t>(fan_out) * fan_in;
    off += fan_out;  // biases stay zero
  }
  return {std::move(spec), std::move(params)};
}

namespace {

void ensure_workspace(const MlpSpec& spec, MlpWorkspace& ws) {
  const std::size_t n_layers = spec.layer_sizes.size();
  if (ws.act.size() != n_layers) {
    ws.act.assign(n_layers, {});
    ws.delta.assign(n_layers, {});
  }
  for (std::size_t l = 0; l < n_layers; ++l) {
    ws.act[l].resize(spec.layer_sizes[l]);
    ws.delta[l].resize(spec.layer_sizes[l]);
  }
}

// Forward pass leaving post-activations in ws.act; the last layer holds raw
// logits (identity output).
void forward_into_ws(const Mlp& net, std::span<const double> input,
                     MlpWorkspace& ws) {
  const auto& sizes = net.spec.layer_sizes;
  ensure_workspace(net.spec, ws);
  std::copy(input.begin(), input.end(), ws.act[0].begin());
  const double* p = net.params.data();
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
    const int in = sizes[l];
    const int out = sizes[l + 1];
    const double* w = p;
    const double* b = p + static_cast<std::size_t>(out) * in;
    const double* a = ws.act[l].data();
    double* z = ws.act[l + 1].data();
    for (int j = 0; j < out; ++j) {
      double s = b[j];
      const double* wr = w + static_cast<std::size_t>(j) * in;
      for (int i = 0; i < in; ++i) s += wr[i] * a[i];
      z[j] = s;
    }
    if (l + 2 < sizes.size()) {
      for (int j = 0; j < out; ++j) {
        if (z[j] < 0.0) z[j] = 0.0;
      }
    }
    p = b + out;
  }
}

// Backward pass from ws.delta.back() (d loss / d logits); accumulates the
// parameter gradient and optionally writes d loss / d input.
void backward_from_ws(const Mlp& net, MlpWorkspace& ws, double* grad,
                      double* input_grad = nullptr) {
  const auto& sizes = net.spec.layer_sizes;
  const std::size_t n_layers = sizes.size();

  // Per-layer parameter offsets.
  std::size_t off = net.spec.param_count();
  for (std::size_t l = n_layers - 1; l-- > 0;) {
    const int in = sizes[l];
    const int out = sizes[l + 1];
    off -= static_cast<std::size_t>(out) * in + out;
    const double* w = net.params.data() + off;
    const double* a = ws.act[l].data();
    const double* d_out = ws.delta[l + 1].data();
    if (grad != nullptr) {
      double* gw = grad + off;
      double* gb = gw + static_cast<std::size_t>(out) * in;
      for (int j = 0; j < out; ++j) {
        const double dj = d_out[j];
        if (dj == 0.0) continue;
        double* gwr = gw + static_cast<std::size_t>(j) * in;
        for (int i = 0; i < in; ++i) gwr[i] += dj * a[i];
        gb[j] += dj;
      }
    }
    const bool need_input = (l > 0) || (input_grad != nullptr);
    if (!need_input) break;
    double* d_in = (l > 0) ? ws.delta[l].data() : input_grad;
    std::fill(d_in, d_in + in, 0.0);
    for (int j = 0; j < out; ++j) {
      const double dj = d_out[j];
      if (dj == 0.0) continue;
      const double* wr = w + static_cast<std::size_t>(j) * in;
      for (int i = 0; i < in; ++i) d_in[i] += dj * wr[i];
    }
    if (l > 0) {
      // ReLU gate: post-activation is zero exactly where the unit is off.
      for (int i = 0; i < in; ++i) {
        if (ws.act[l][i] <= 0.0) d_in[i] = 0.0;
      }
    }
  }
}

void check_input_size(const Mlp& net, std::span<const double> input) {
  if (static_cast<int>(input.size()) != net.spec.input_size()) {
    throw ShapeError("input length does not match network input size");
  }
}

void softmax_into(std::span<const double> logits, std::vector<double>& out) {
  out.resize(logits.size());
  double mx = logits[0];
  for (double z : logits) mx = std::max(mx, z);
  double sum = 0.0;
  for (std::size_t j = 0; j < logits.size(); ++j) {
    out[j] = std::exp(logits[j] - mx);
    sum += out[j];
  }
  for (double& p : out) p /= sum;
}

}  // namespace

void forward(const Mlp& net, std::span<const double> input,
             std::vector<double>& logits, MlpWorkspace& ws) {
  check_input_size(net, input);
  forward_into_ws(net, input, ws);
  logits = ws.act.back();
}

std::vector<double> forward(const Mlp& net, std::span<const double> input) {
  MlpWorkspace ws;
  std::vector<double> logits;
  forward(net, input, logits, ws);
  return logits;
}

std::vector<double> softmax(std::span<const double> logits) {
  std::vector<double> out;
  softmax_into(logits, out);
  return out;
}

void loss_and_grad_into(const Mlp& net, const LabeledDataset& data,
                        std::span<const int> indices, double& loss,
                        ParamVector& grad, MlpWorkspace& ws) {
  if (data.m != net.spec.input_size()) {
    throw ShapeError("dataset feature dim does not match network input");
  }
  const int batch =
      indices.empty() ? data.n : static_cast<int>(indices.size());
  if (batch == 0) throw ArgumentError("loss_and_grad: empty batch");
  grad.assign(net.spec.param_count(), 0.0);
  loss = 0.0;
  const double inv = 1.0 / batch;
  for (int b = 0; b < batch; ++b) {
    const int row = indices.empty() ? b : indices[b];
    const int y = data.labels[row];
    forward_into_ws(net, data.row(row), ws);
    const auto& z = ws.act.back();
    double mx = z[0];
    for (double v : z) mx = std::max(mx, v);
    double sum = 0.0;
    for (double v : z) sum += std::exp(v - mx);
    // Log-space cross-entropy: stays exact when the logits saturate.
    loss += inv * ((mx - z[y]) + std::log(sum));
    ws.probs.resize(z.size());
    for (std::size_t j = 0; j < z.size(); ++j) {
      ws.probs[j] = std::exp(z[j] - mx) / sum;
    }
    auto& d_logits = ws.delta.back();
    for (std::size_t j = 0; j < ws.probs.size(); ++j) {
      d_logits[j] = inv * (ws.probs[j] - (static_cast<int>(j) == y ? 1.0 : 0.0));
    }
    backward_from_ws(net, ws, grad.data());
  }
}

LossGrad loss_and_grad(const Mlp& net, const LabeledDataset& data,
                       std::span<const int> indices) {
  MlpWorkspace ws;
  LossGrad out;
  loss_and_grad_into(net, data, indices, out.loss, out.grad, ws);
  return out;
}

void input_gradient(const Mlp& net, std::span<const double> x, int label,
                    std::vector<double>& gx, MlpWorkspace& ws) {
  check_input_size(net, x);
  forward_into_ws(net, x, ws);
  softmax_into(ws.act.back(), ws.probs);
  auto& d_logits = ws.delta.back();
  for (std::size_t j = 0; j < ws.probs.size(); ++j) {
    d_logits[j] = ws.probs[j] - (static_cast<int>(j) == label ? 1.0 : 0.0);
  }
  gx.resize(x.size());
  backward_from_ws(net, ws, nullptr, gx.data());
}

void OptimizerConfig::validate() const {
  if (learning_rate <= 0.0) throw ArgumentError("learning_rate must be > 0");
  if (kind != OptKind::GD && batch_size <= 0) {
    throw ArgumentError("batch_size must be positive");
  }
  if (kind == OptKind::Adam) {
    if (adam_beta1 <= 0.0 || adam_beta1 >= 1.0 || adam_beta2 <= 0.0 ||
        adam_beta2 >= 1.0) {
      throw ArgumentError("adam betas must lie in (0, 1)");
    }
    if (adam_epsilon <= 0.0) throw ArgumentError("adam_epsilon must be > 0");
  }
}

OptimizerState make_optimizer_state(const Mlp& net,
                                    const OptimizerConfig& config) {
  OptimizerState st;
  st.rng = Rng(config.seed);
  if (config.kind == OptKind::Adam) {
    st.first_moment.assign(net.params.size(), 0.0);
    st.second_moment.assign(net.params.size(), 0.0);
  }
  return st;
}

namespace {

void apply_update(Mlp& net, OptimizerState& state,
                  const OptimizerConfig& config, const ParamVector& grad) {
  state.step_count += 1;
  const double lr = config.learning_rate;
  switch (config.kind) {
    case OptKind::GD:
    case OptKind::SGD:
      for (std::size_t i = 0; i < net.params.size(); ++i) {
        net.params[i] -= lr * grad[i];
      }
      break;
    case OptKind::Adam: {
      const double b1 = config.adam_beta1;
      const double b2 = config.adam_beta2;
      const double t = static_cast<double>(state.step_count);
      const double c1 = 1.0 - std::pow(b1, t);
      const double c2 = 1.0 - std::pow(b2, t);
      for (std::size_t i = 0; i < net.params.size(); ++i) {
        double& m = state.first_moment[i];
        double& v = state.second_moment[i];
        m = b1 * m + (1.0 - b1) * grad[i];
        v = b2 * v + (1.0 - b2) * grad[i] * grad[i];
        const double m_hat = m / c1;
        const double v_hat = v / c2;
        net.params[i] -= lr * m_hat / (std::sqrt(v_hat) + config.adam_epsilon);
      }
      break;
    }
  }
}

// Next mini-batch for SGD/Adam; reshuffles at epoch boundaries and keeps the
// last partial batch.
std::vector<int> next_batch(OptimizerState& state,
                            const OptimizerConfig& config, int n) {
  if (state.order.empty() || state.cursor >= state.order.size()) {
    if (state.order.empty()) {
      state.order.resize(n);
      std::iota(state.order.begin(), state.order.end(), 0);
    }
    state.rng.shuffle(state.order);
    state.cursor = 0;
  }
  const std::size_t take = std::min<std::size_t>(
      config.batch_size, state.order.size() - state.cursor);
  std::vector<int> batch(state.order.begin() + state.cursor,
                         state.order.begin() + state.cursor + take);
  state.cursor += take;
  return batch;
}

}  // namespace

double train_step(Mlp& net, OptimizerState& state,
                  const OptimizerConfig& config, const LabeledDataset& data,
                  std::span<const int> batch_indices) {
  config.validate();
  thread_local MlpWorkspace ws;
  thread_local ParamVector grad;
  double loss = 0.0;
  loss_and_grad_into(net, data, batch_indices, loss, grad, ws);
  apply_update(net, state, config, grad);
  return loss;
}

TrainRecord train(Mlp net, const LabeledDataset& train_data,
                  const OptimizerConfig& config, int horizon) {
  if (horizon < 1) throw ArgumentError("train: horizon must be >= 1");
  config.validate();
  TrainRecord rec;
  rec.theta0 = net.params;
  OptimizerState state = make_optimizer_state(net, config);
  for (int t = 0; t < horizon; ++t) {
    double loss = 0.0;
    if (config.kind == OptKind::GD) {
      loss = train_step(net, state, config, train_data, {});
    } else {
      const std::vector<int> batch = next_batch(state, config, train_data.n);
      loss = train_step(net, state, config, train_data, batch);
    }
    if (!std::isfinite(loss) || loss > 1e6) {
      throw DivergenceError("training diverged at iteration " +
                                std::to_string(t),
                            t);
    }
  }
  rec.theta_final = net.params;
  rec.succ_of_final = full_batch_successor(net, train_data, config, &state);
  return rec;
}

ParamVector full_batch_successor(const Mlp& net, const LabeledDataset& data,
                                 const OptimizerConfig& config,
                                 const OptimizerState* state) {
  Mlp copy = net;
  OptimizerState st = state ? *state : make_optimizer_state(net, config);
  train_step(copy, st, config, data, {});
  return std::move(copy.params);
}

double accuracy(const Mlp& net, const LabeledDataset& test_data) {
  if (test_data.n == 0) throw ArgumentError("accuracy: empty dataset");
  if (test_data.m != net.spec.input_size()) {
    throw ShapeError("dataset feature dim does not match network input");
  }
  MlpWorkspace ws;
  int correct = 0;
  for (int i = 0; i < test_data.n; ++i) {
    forward_into_ws(net, test_data.row(i), ws);
    const auto& z = ws.act.back();
    int arg = 0;
    for (std::size_t j = 1; j < z.size(); ++j) {
      if (z[j] > z[arg]) arg = static_cast<int>(j);
    }
    if (arg == test_data.labels[i]) ++correct;
  }
  return static_cast<double>(correct) / test_data.n;
}

}  // namespace pcert
