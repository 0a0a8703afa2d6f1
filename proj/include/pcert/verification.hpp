#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "pcert/barrier.hpp"
#include "pcert/trajectories.hpp"

namespace pcert {

/// Validation draw for the scenario program: fresh initializations, unsafe
/// terminal parameters, and the full union of parameters with successors
/// from which the sublevel-set constraints are derived at solve time.
struct ScenarioSet {
  std::vector<ParamWithSucc> initial;   // one per scenario
  std::vector<ParamWithSucc> terminal;  // non-diverged scenarios
  std::vector<bool> terminal_unsafe;
  std::vector<int> initial_scenario;  // provenance indices
  std::vector<int> terminal_scenario;
  int n_hat = 0;
  int diverged = 0;
};

/// Builds the validation sets from i.i.d. scenario trajectories, labeling
/// terminals against (alpha, g_c).
ScenarioSet make_scenario_set(std::span<const TrajectorySample> samples,
                              double alpha, double g_c);

enum class ConstraintKind { Initial = 1, Unsafe = 2, Successor = 3 };

/// One margin-free constraint part: the scenario program requires
/// eta >= value for each of these.
struct QPart {
  double value = 0.0;
  ConstraintKind kind = ConstraintKind::Initial;
  int scenario = -1;
};

/// Constraint parts under a fixed barrier: B(theta) on initializations,
/// -B(theta) on unsafe terminals, B(succ(theta)) on union members with
/// B(theta) <= 0.
std::vector<QPart> q_values(const BarrierNet& net, const ScenarioSet& scenarios);

struct Margin {
  double eta_s = 0.0;
  bool feasible = false;  // eta_s <= 0
  QPart binding;
};

/// The one-variable scenario program in closed form: the optimum is the
/// largest constraint part; feasible iff it is non-positive.
Margin solve_scp(const BarrierNet& net, const ScenarioSet& scenarios);

struct PacParams {
  double beta = 0.0;
  double epsilon = 0.0;
  long long n_hat = 0;
};

/// Minimal i.i.d. scenario count N with (1-eps)^N <= beta, i.e.
/// ceil(ln(beta)/ln(1-eps)) with a one-ULP guard before the ceiling.
long long required_scenarios(double epsilon, double beta);

/// Smallest violation probability certified by n_hat scenarios at
/// confidence 1-beta: 1 - beta^(1/n_hat).
double achieved_epsilon(long long n_hat, double beta);

/// Fraction of fresh scenarios with at least one constraint part above the
/// solved margin. Diverged scenarios count as violations.
double held_out_violation_rate(const BarrierNet& net, const Margin& margin,
                               const ScenarioSet& fresh);

}  // namespace pcert
