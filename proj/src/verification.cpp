#include "pcert/verification.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "pcert/errors.hpp"

namespace pcert {

ScenarioSet make_scenario_set(std::span<const TrajectorySample> samples,
                              double alpha, double g_c) {
  ScenarioSet out;
  out.n_hat = static_cast<int>(samples.size());
  for (const auto& s : samples) {
    if (s.diverged) {
      ++out.diverged;
      continue;
    }
    out.initial.push_back({s.theta0, s.theta0_succ});
    out.initial_scenario.push_back(s.index);
    out.terminal.push_back({s.theta_final, s.theta_final_succ});
    out.terminal_scenario.push_back(s.index);
    out.terminal_unsafe.push_back((g_c - s.g_p) > alpha);
  }
  return out;
}

std::vector<QPart> q_values(const BarrierNet& net, const ScenarioSet& scenarios) {
  std::vector<QPart> parts;
  parts.reserve(scenarios.initial.size() * 2 + scenarios.terminal.size() * 2);
  auto succ_part = [&](const ParamWithSucc& p, int scenario) {
    if (eval_barrier(net, p.value) <= 0.0) {
      if (p.succ.empty()) throw DataError("scenario member lacks a successor");
      parts.push_back({eval_barrier(net, p.succ), ConstraintKind::Successor,
                       scenario});
    }
  };
  for (std::size_t i = 0; i < scenarios.initial.size(); ++i) {
    parts.push_back({eval_barrier(net, scenarios.initial[i].value),
                     ConstraintKind::Initial, scenarios.initial_scenario[i]});
    succ_part(scenarios.initial[i], scenarios.initial_scenario[i]);
  }
  for (std::size_t i = 0; i < scenarios.terminal.size(); ++i) {
    if (scenarios.terminal_unsafe[i]) {
      parts.push_back({-eval_barrier(net, scenarios.terminal[i].value),
                       ConstraintKind::Unsafe, scenarios.terminal_scenario[i]});
    }
    succ_part(scenarios.terminal[i], scenarios.terminal_scenario[i]);
  }
  return parts;
}

Margin solve_scp(const BarrierNet& net, const ScenarioSet& scenarios) {
  const std::vector<QPart> parts = q_values(net, scenarios);
  if (parts.empty()) {
    throw ArgumentError("solve_scp: no constraints to solve");
  }
  Margin m;
  m.eta_s = parts[0].value;
  m.binding = parts[0];
  for (const auto& p : parts) {
    if (p.value > m.eta_s) {
      m.eta_s = p.value;
      m.binding = p;
    }
  }
  m.feasible = m.eta_s <= 0.0;
  return m;
}

long long required_scenarios(double epsilon, double beta) {
  if (!(epsilon > 0.0 && epsilon < 1.0)) {
    throw ArgumentError("required_scenarios: epsilon must lie in (0, 1)");
  }
  if (!(beta > 0.0 && beta < 1.0)) {
    throw ArgumentError("required_scenarios: beta must lie in (0, 1)");
  }
  const double ratio = std::log(beta) / std::log1p(-epsilon);
  long long n = static_cast<long long>(
      std::ceil(std::nextafter(ratio, -1.0 / 0.0)));
  if (n < 1) n = 1;
  // Settle boundary cases in the same arithmetic the bound is stated in.
  while (std::pow(1.0 - epsilon, static_cast<double>(n)) > beta) ++n;
  while (n > 1 && std::pow(1.0 - epsilon, static_cast<double>(n - 1)) <= beta) --n;
  return n;
}

double achieved_epsilon(long long n_hat, double beta) {
  if (n_hat < 1) throw ArgumentError("achieved_epsilon: n_hat must be >= 1");
  if (!(beta > 0.0 && beta < 1.0)) {
    throw ArgumentError("achieved_epsilon: beta must lie in (0, 1)");
  }
  return -std::expm1(std::log(beta) / static_cast<double>(n_hat));
}

double held_out_violation_rate(const BarrierNet& net, const Margin& margin,
                               const ScenarioSet& fresh) {
  if (fresh.n_hat == 0) {
    throw ArgumentError("held_out_violation_rate: empty scenario set");
  }
  const std::vector<QPart> parts = q_values(net, fresh);
  std::set<int> violating;
  for (const auto& p : parts) {
    if (p.value > margin.eta_s) violating.insert(p.scenario);
  }
  const int bad = static_cast<int>(violating.size()) + fresh.diverged;
  return static_cast<double>(bad) / fresh.n_hat;
}

}  // namespace pcert
