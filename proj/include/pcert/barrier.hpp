#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "pcert/nn.hpp"
#include "pcert/trajectories.hpp"

namespace pcert {

/// Term weights for the composite barrier loss; nullopt selects the
/// 1/|set| normalization (recomputed as the sublevel set changes).
struct BarrierLossWeights {
  std::optional<double> c_init;
  std::optional<double> c_unsafe;
  std::optional<double> c_succ;
};

struct BarrierEval {
  double loss = 0.0;
  double term_init = 0.0;
  double term_unsafe = 0.0;
  double term_succ = 0.0;
  int z_size = 0;
};

double eval_barrier(const BarrierNet& net, std::span<const double> theta);

/// Composite hinge loss over the labeled sets:
///   sum_I ReLU(B(theta)) + sum_U ReLU(-B(theta)) + sum_Z ReLU(B(succ(theta)))
/// with Z = { theta in I u S u U : B(theta) <= 0 } recomputed from the
/// current parameters; membership is held fixed while differentiating.
BarrierEval barrier_loss_value(const BarrierNet& net,
                               const LabeledParamSets& sets,
                               const BarrierLossWeights& weights);
std::pair<double, ParamVector> barrier_loss(const BarrierNet& net,
                                            const LabeledParamSets& sets,
                                            const BarrierLossWeights& weights);

struct BarrierTrainConfig {
  std::vector<int> hidden = {64, 64};
  double learning_rate = 1e-3;
  int max_iters = 5000;
  double tau_loss = 1e-6;   // "zero loss" threshold on the exact loss
  double tau_sign = 1e-6;   // tolerance for the non-strict sign conditions
  double gamma_unsafe = 1e-4;  // required strict margin on the unsafe side
  // Hinge shifts used only while optimizing, so the trained net clears the
  // sign checks instead of stalling on the boundary.
  double margin_init = 0.05;
  double margin_unsafe = 0.05;
  double margin_succ = 0.05;
  // Per-step multiplicative weight decay plus extra iterations after the
  // shifted hinge first reaches zero; together they settle the net on a
  // low-norm separator instead of the first razor found, which is what
  // makes the conditions hold off the training points.
  double weight_decay = 1e-4;
  int polish_iters = 800;
  int z_refresh_interval = 1;  // sublevel-set recomputation cadence
  std::uint64_t seed = 0;
};

struct BarrierTrainReport {
  double final_loss = 0.0;  // exact composite loss at the returned parameters
  int iterations = 0;
  bool converged = false;  // final_loss <= tau_loss
  double resid_init = 0.0;
  double resid_unsafe = 0.0;
  double resid_succ = 0.0;
  bool sign_check_ok = false;
  std::string failure;
};

struct BarrierTrainResult {
  std::optional<BarrierNet> net;  // set only when converged and signs hold
  BarrierTrainReport report;
};

/// Trains a fresh ReLU barrier on the labeled sets. Requires non-empty
/// initial and unsafe sets. Non-convergence is reported, not thrown.
BarrierTrainResult train_barrier(const LabeledParamSets& sets,
                                 const BarrierLossWeights& weights,
                                 const BarrierTrainConfig& config,
                                 int param_dim);

/// Post-hoc sign conditions at the given tolerances; fills the residual
/// fields of the report.
bool check_sign_conditions(const BarrierNet& net, const LabeledParamSets& sets,
                           double tau_sign, double gamma_unsafe,
                           BarrierTrainReport* report = nullptr);

// Checkpoint: versioned header, layer sizes, then parameters as
// little-endian 64-bit floats.
void save_barrier(const std::string& path, const BarrierNet& net);
BarrierNet load_barrier(const std::string& path);

}  // namespace pcert
