#include "pcert/attacks.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "pcert/errors.hpp"
#include "pcert/rng.hpp"

namespace pcert {

double lp_norm(std::span<const double> v, Norm p) {
  if (p == Norm::Linf) {
    double mx = 0.0;
    for (double x : v) mx = std::max(mx, std::abs(x));
    return mx;
  }
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

void PerturbationBudget::validate() const {
  if (delta < 0.0) throw ArgumentError("budget delta must be >= 0");
  if (rho < 0.0 || rho > 1.0) throw ArgumentError("budget rho must lie in [0, 1]");
}

int PerturbationBudget::rows_for(int n) const {
  return static_cast<int>(std::ceil(rho * n));
}

double PoisonPlan::max_row_norm(Norm p) const {
  double mx = 0.0;
  for (std::size_t r = 0; r < indices.size(); ++r) {
    mx = std::max(mx, lp_norm(row(static_cast<int>(r)), p));
  }
  return mx;
}

void project_lp(std::span<double> v, Norm p, double delta) {
  if (delta < 0.0) throw ArgumentError("project_lp: delta must be >= 0");
  if (p == Norm::Linf) {
    for (double& x : v) x = std::clamp(x, -delta, delta);
    return;
  }
  const double norm = lp_norm(v, Norm::L2);
  if (norm > delta) {
    const double scale = (norm > 0.0) ? delta / norm : 0.0;
    for (double& x : v) x *= scale;
    // Rounding can leave the norm a few ulps above delta; nudge down until
    // the result is a fixed point of the projection.
    while (lp_norm(v, Norm::L2) > delta) {
      for (double& x : v) x *= 0.9999999999999999;
    }
  }
}

std::vector<double> project_lp(std::vector<double> v, Norm p, double delta) {
  project_lp(std::span<double>(v), p, delta);
  return v;
}

namespace {

// Uniform without-replacement row selection, sorted ascending.
std::vector<int> select_rows(int n, int r, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<int> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  for (int i = 0; i < r; ++i) {
    const int j = i + static_cast<int>(rng.below(n - i));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(r);
  std::sort(idx.begin(), idx.end());
  return idx;
}

AttackResult degenerate(const LabeledDataset& data) {
  AttackResult out;
  out.dataset = data;
  out.plan.m = data.m;
  return out;
}

// Shared PGD driver; `model` supplies the loss gradient w.r.t. the inputs.
AttackResult pgd_attack(const LabeledDataset& data, const Mlp& model,
                        const PerturbationBudget& budget, int steps,
                        double step_size, std::uint64_t seed) {
  budget.validate();
  if (model.spec.input_size() != data.m) {
    throw ShapeError("attack model input size does not match dataset");
  }
  if (steps < 1) throw ArgumentError("pgd: steps must be >= 1");
  const int r = budget.rows_for(data.n);
  if (budget.delta == 0.0 || r == 0) return degenerate(data);
  if (step_size <= 0.0) step_size = 2.5 * budget.delta / steps;

  AttackResult out;
  out.dataset = data;
  out.plan.m = data.m;
  out.plan.indices = select_rows(data.n, r, seed);
  out.plan.delta_matrix.assign(static_cast<std::size_t>(r) * data.m, 0.0);

  MlpWorkspace ws;
  std::vector<double> x(data.m), g(data.m);
  for (int pos = 0; pos < r; ++pos) {
    const int row = out.plan.indices[pos];
    const auto x0 = data.row(row);
    std::copy(x0.begin(), x0.end(), x.begin());
    std::span<double> pert(
        out.plan.delta_matrix.data() + static_cast<std::size_t>(pos) * data.m,
        static_cast<std::size_t>(data.m));
    for (int s = 0; s < steps; ++s) {
      input_gradient(model, x, data.labels[row], g, ws);
      if (budget.p == Norm::Linf) {
        for (int j = 0; j < data.m; ++j) {
          const double sg = (g[j] > 0.0) ? 1.0 : (g[j] < 0.0 ? -1.0 : 0.0);
          pert[j] += step_size * sg;
        }
      } else {
        const double norm = lp_norm(g, Norm::L2);
        if (norm > 0.0) {
          for (int j = 0; j < data.m; ++j) {
            pert[j] += step_size * g[j] / norm;
          }
        }
      }
      project_lp(pert, budget.p, budget.delta);
      for (int j = 0; j < data.m; ++j) x[j] = x0[j] + pert[j];
    }
    auto dst = out.dataset.row(row);
    for (int j = 0; j < data.m; ++j) dst[j] = x0[j] + pert[j];
  }
  return out;
}

}  // namespace

AttackResult pgd_poison(const LabeledDataset& data, const Mlp& surrogate,
                        const PerturbationBudget& budget, int steps,
                        double step_size, std::uint64_t seed) {
  return pgd_attack(data, surrogate, budget, steps, step_size, seed);
}

AttackResult pgd_evade(const LabeledDataset& test_set, const Mlp& victim,
                       const PerturbationBudget& budget, int steps,
                       double step_size, std::uint64_t seed) {
  return pgd_attack(test_set, victim, budget, steps, step_size, seed);
}

AttackResult backdoor_poison(const LabeledDataset& data,
                             const TriggerSpec& trigger,
                             const PerturbationBudget& budget,
                             std::uint64_t seed) {
  budget.validate();
  if (trigger.patch_coords.size() != trigger.patch_values.size() ||
      trigger.patch_coords.empty()) {
    throw ArgumentError("trigger patch coords/values must align and be non-empty");
  }
  for (int c : trigger.patch_coords) {
    if (c < 0 || c >= data.m) throw ArgumentError("trigger coordinate out of range");
  }
  const int r = budget.rows_for(data.n);
  if (budget.delta == 0.0 || r == 0) return degenerate(data);

  // Normalize the patch direction to unit lp norm so the additive shift
  // saturates the budget exactly.
  std::vector<double> dir(data.m, 0.0);
  for (std::size_t i = 0; i < trigger.patch_coords.size(); ++i) {
    dir[trigger.patch_coords[i]] = trigger.patch_values[i];
  }
  const double norm = lp_norm(dir, budget.p);
  if (norm == 0.0) throw ArgumentError("trigger direction is zero");
  for (double& d : dir) d *= budget.delta / norm;

  AttackResult out;
  out.dataset = data;
  out.plan.m = data.m;
  out.plan.indices = select_rows(data.n, r, seed);
  out.plan.delta_matrix.assign(static_cast<std::size_t>(r) * data.m, 0.0);
  for (int pos = 0; pos < r; ++pos) {
    const int row = out.plan.indices[pos];
    std::span<double> pert(
        out.plan.delta_matrix.data() + static_cast<std::size_t>(pos) * data.m,
        static_cast<std::size_t>(data.m));
    std::copy(dir.begin(), dir.end(), pert.begin());
    project_lp(pert, budget.p, budget.delta);
    auto dst = out.dataset.row(row);
    for (int j = 0; j < data.m; ++j) dst[j] += pert[j];
  }
  return out;
}

}  // namespace pcert
