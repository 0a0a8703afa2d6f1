#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "pcert/data.hpp"
#include "pcert/nn.hpp"

namespace pcert {

enum class Norm { L2, Linf };

double lp_norm(std::span<const double> v, Norm p);

/// Per-row lp bound `delta` over a fraction `rho` of the samples.
struct PerturbationBudget {
  Norm p = Norm::Linf;
  double delta = 0.0;
  double rho = 0.0;

  void validate() const;
  /// Number of perturbed rows for a dataset of size n.
  int rows_for(int n) const;
};

/// Which rows were perturbed and by how much. Rows not listed carry an
/// implicit zero perturbation.
struct PoisonPlan {
  std::vector<int> indices;          // sorted
  std::vector<double> delta_matrix;  // |indices| x m, row-major
  int m = 0;

  std::span<const double> row(int r) const {
    return {delta_matrix.data() + static_cast<std::size_t>(r) * m,
            static_cast<std::size_t>(m)};
  }
  double max_row_norm(Norm p) const;
};

/// Sparse additive trigger pattern.
struct TriggerSpec {
  std::vector<int> patch_coords;
  std::vector<double> patch_values;  // direction over patch_coords
  std::optional<int> target_label;   // informational only (clean-label attack)
};

/// Projection onto the lp ball of radius delta: coordinate clamp for l-inf,
/// radial rescale for l2. Idempotent.
void project_lp(std::span<double> v, Norm p, double delta);
std::vector<double> project_lp(std::vector<double> v, Norm p, double delta);

struct AttackResult {
  LabeledDataset dataset;
  PoisonPlan plan;
};

/// Gradient-ascent poisoning of the training features against a frozen
/// surrogate: sign steps for l-inf, normalized steps for l2, projecting onto
/// the delta ball after every step. Labels are never touched. step_size <= 0
/// selects the 2.5*delta/steps heuristic.
AttackResult pgd_poison(const LabeledDataset& data, const Mlp& surrogate,
                        const PerturbationBudget& budget, int steps,
                        double step_size, std::uint64_t seed);

/// Additive trigger patch scaled to the budget, then projected.
AttackResult backdoor_poison(const LabeledDataset& data,
                             const TriggerSpec& trigger,
                             const PerturbationBudget& budget,
                             std::uint64_t seed);

/// Test-time analogue of pgd_poison against the trained victim.
AttackResult pgd_evade(const LabeledDataset& test_set, const Mlp& victim,
                       const PerturbationBudget& budget, int steps,
                       double step_size, std::uint64_t seed);

}  // namespace pcert
