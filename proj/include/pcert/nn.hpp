#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "pcert/data.hpp"
#include "pcert/rng.hpp"

namespace pcert {

/// Flattened network parameters: per layer, weights (out x in, row-major)
/// followed by biases.
using ParamVector = std::vector<double>;

bool all_finite(std::span<const double> v);

/// Dense network shape: ReLU hidden layers, identity output.
struct MlpSpec {
  std::vector<int> layer_sizes;

  int input_size() const { return layer_sizes.front(); }
  int output_size() const { return layer_sizes.back(); }
  std::size_t param_count() const;
  void validate() const;
};

struct Mlp {
  MlpSpec spec;
  ParamVector params;
};

using Classifier = Mlp;
using BarrierNet = Mlp;

/// All-zero parameters.
Mlp make_mlp(MlpSpec spec);

/// Weights uniform in ±sqrt(6/(fan_in+fan_out)), biases zero.
Mlp init_mlp(MlpSpec spec, std::uint64_t seed);

/// Reusable per-thread forward/backward buffers.
struct MlpWorkspace {
  std::vector<std::vector<double>> act;    // post-activation per layer
  std::vector<std::vector<double>> delta;  // backprop errors per layer
  std::vector<double> probs;
};

void forward(const Mlp& net, std::span<const double> input,
             std::vector<double>& logits, MlpWorkspace& ws);
std::vector<double> forward(const Mlp& net, std::span<const double> input);

/// Numerically stable softmax.
std::vector<double> softmax(std::span<const double> logits);

struct LossGrad {
  double loss = 0.0;
  ParamVector grad;
};

/// Mean softmax cross-entropy over the batch and its exact parameter
/// gradient. `indices` selects batch rows; empty means the whole dataset.
LossGrad loss_and_grad(const Mlp& net, const LabeledDataset& data,
                       std::span<const int> indices = {});
void loss_and_grad_into(const Mlp& net, const LabeledDataset& data,
                        std::span<const int> indices, double& loss,
                        ParamVector& grad, MlpWorkspace& ws);

/// d(cross-entropy)/d(input) for a single example; used by input-space
/// attacks.
void input_gradient(const Mlp& net, std::span<const double> x, int label,
                    std::vector<double>& gx, MlpWorkspace& ws);

enum class OptKind { GD, SGD, Adam };

struct OptimizerConfig {
  OptKind kind = OptKind::SGD;
  double learning_rate = 0.01;
  int batch_size = 32;  // SGD/Adam; GD is always full batch
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
  std::uint64_t seed = 0;

  void validate() const;
};

struct OptimizerState {
  std::int64_t step_count = 0;
  ParamVector first_moment;   // Adam
  ParamVector second_moment;  // Adam
  Rng rng{0};                 // batch shuffling
  std::vector<int> order;
  std::size_t cursor = 0;
};

OptimizerState make_optimizer_state(const Mlp& net,
                                    const OptimizerConfig& config);

/// One update on the given batch; returns the batch loss before the step.
double train_step(Mlp& net, OptimizerState& state,
                  const OptimizerConfig& config, const LabeledDataset& data,
                  std::span<const int> batch_indices);

struct TrainRecord {
  ParamVector theta0;
  ParamVector theta_final;
  ParamVector succ_of_final;  // one full-batch update past the horizon
};

/// Runs `horizon` optimizer iterations from the supplied initialization.
/// GD consumes the full dataset each step; SGD/Adam shuffle once per epoch
/// (trajectory seed), keeping the last partial batch. Throws DivergenceError
/// if the loss is non-finite or exceeds 1e6.
TrainRecord train(Mlp net, const LabeledDataset& train_data,
                  const OptimizerConfig& config, int horizon);

/// One full-batch update of `net`. With `state` null, a fresh optimizer
/// state is used (Adam starts from zero moments).
ParamVector full_batch_successor(const Mlp& net, const LabeledDataset& data,
                                 const OptimizerConfig& config,
                                 const OptimizerState* state = nullptr);

/// Fraction of examples whose argmax logit matches the label; argmax ties
/// resolve to the smallest class index.
double accuracy(const Mlp& net, const LabeledDataset& test_data);

}  // namespace pcert
