#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>

#include "pcert/errors.hpp"
#include "pcert/rng.hpp"
#include "pcert/verification.hpp"

using namespace pcert;

namespace {

BarrierNet identity_barrier() {
  // B(theta) = theta for scalar theta.
  BarrierNet net = make_mlp(MlpSpec{{1, 1}});
  net.params = {1.0, 0.0};
  return net;
}

ScenarioSet hand_set(std::vector<double> z1, std::vector<double> z2,
                     std::vector<std::pair<double, double>> pairs) {
  ScenarioSet s;
  int scenario = 0;
  for (double v : z1) {
    s.initial.push_back({{v}, {v}});
    s.initial_scenario.push_back(scenario++);
  }
  for (double v : z2) {
    s.terminal.push_back({{v}, {v}});
    s.terminal_unsafe.push_back(true);
    s.terminal_scenario.push_back(scenario++);
  }
  for (const auto& [value, succ] : pairs) {
    s.terminal.push_back({{value}, {succ}});
    s.terminal_unsafe.push_back(false);
    s.terminal_scenario.push_back(scenario++);
  }
  s.n_hat = scenario;
  return s;
}

// Independent constraint enumeration for the oracle-equivalence check.
std::vector<double> brute_force_parts(const BarrierNet& net,
                                      const ScenarioSet& s) {
  std::vector<double> parts;
  for (const auto& p : s.initial) {
    parts.push_back(eval_barrier(net, p.value));
    if (eval_barrier(net, p.value) <= 0.0) {
      parts.push_back(eval_barrier(net, p.succ));
    }
  }
  for (std::size_t i = 0; i < s.terminal.size(); ++i) {
    if (s.terminal_unsafe[i]) {
      parts.push_back(-eval_barrier(net, s.terminal[i].value));
    }
    if (eval_barrier(net, s.terminal[i].value) <= 0.0) {
      parts.push_back(eval_barrier(net, s.terminal[i].succ));
    }
  }
  return parts;
}

ScenarioSet random_set(Rng& rng, const BarrierNet& net, int d) {
  (void)net;
  ScenarioSet s;
  const int n1 = 1 + static_cast<int>(rng.below(6));
  const int n2 = static_cast<int>(rng.below(5));
  int scenario = 0;
  for (int i = 0; i < n1; ++i) {
    ParamVector v(d), q(d);
    for (auto& x : v) x = rng.uniform(-2.0, 2.0);
    for (auto& x : q) x = rng.uniform(-2.0, 2.0);
    s.initial.push_back({v, q});
    s.initial_scenario.push_back(scenario++);
  }
  for (int i = 0; i < n2; ++i) {
    ParamVector v(d), q(d);
    for (auto& x : v) x = rng.uniform(-2.0, 2.0);
    for (auto& x : q) x = rng.uniform(-2.0, 2.0);
    s.terminal.push_back({v, q});
    s.terminal_unsafe.push_back(rng.uniform() < 0.5);
    s.terminal_scenario.push_back(scenario++);
  }
  s.n_hat = scenario;
  return s;
}

}  // namespace

TEST_CASE("q_values: zero barrier emits all-zero parts") {
  BarrierNet net = make_mlp(MlpSpec{{1, 1}});
  const auto s = hand_set({-0.5, 0.25}, {0.5}, {{-0.3, 0.1}});
  const auto parts = q_values(net, s);
  CHECK_FALSE(parts.empty());
  for (const auto& p : parts) CHECK(p.value == 0.0);
}

TEST_CASE("q_values: indicator empties the sublevel constraints") {
  // B(theta) = theta; all points positive, so no successor parts at all.
  const BarrierNet net = identity_barrier();
  const auto s = hand_set({0.4}, {0.7}, {{0.2, 0.9}});
  const auto parts = q_values(net, s);
  REQUIRE(parts.size() == 2);
  CHECK(parts[0].kind == ConstraintKind::Initial);
  CHECK(parts[0].value == doctest::Approx(0.4));
  CHECK(parts[1].kind == ConstraintKind::Unsafe);
  CHECK(parts[1].value == doctest::Approx(-0.7));
}

TEST_CASE("q_values: hand-evaluated one-dimensional instance") {
  const BarrierNet net = identity_barrier();
  // z1 = {-0.3}; unsafe z2 = {0.2}; union pair (-0.4 -> -0.1).
  ScenarioSet s;
  s.initial.push_back({{-0.3}, {0.5}});  // successor positive: B(-0.3)<=0 emits it
  s.initial_scenario.push_back(0);
  s.terminal.push_back({{0.2}, {0.2}});
  s.terminal_unsafe.push_back(true);
  s.terminal_scenario.push_back(1);
  s.terminal.push_back({{-0.4}, {-0.1}});
  s.terminal_unsafe.push_back(false);
  s.terminal_scenario.push_back(2);
  s.n_hat = 3;

  // Make the initial successor harmless for the hand check.
  s.initial[0].succ = {-0.3};
  const auto parts = q_values(net, s);
  std::vector<double> values;
  for (const auto& p : parts) values.push_back(p.value);
  std::sort(values.begin(), values.end());
  CHECK(values == std::vector<double>{-0.3, -0.3, -0.2, -0.1});
}

TEST_CASE("solve_scp: closed form equals the max part and records binding") {
  const BarrierNet net = identity_barrier();
  // Parts: initial -0.3, its successor -0.3, unsafe -(0.2) = -0.2,
  // union pair successor -0.1 -> optimum -0.1.
  ScenarioSet s;
  s.initial.push_back({{-0.3}, {-0.3}});
  s.initial_scenario.push_back(0);
  s.terminal.push_back({{0.2}, {0.2}});
  s.terminal_unsafe.push_back(true);
  s.terminal_scenario.push_back(1);
  s.terminal.push_back({{-0.4}, {-0.1}});
  s.terminal_unsafe.push_back(false);
  s.terminal_scenario.push_back(2);
  s.n_hat = 3;
  const Margin m = solve_scp(net, s);
  CHECK(m.eta_s == doctest::Approx(-0.1));
  CHECK(m.feasible);
  CHECK(m.binding.kind == ConstraintKind::Successor);
}

TEST_CASE("solve_scp: an unsafe point inside the sublevel set is infeasible") {
  const BarrierNet net = identity_barrier();
  ScenarioSet s;
  s.initial.push_back({{-0.5}, {-0.5}});
  s.initial_scenario.push_back(0);
  s.terminal.push_back({{-0.1}, {-0.1}});  // unsafe but B = -0.1 <= 0
  s.terminal_unsafe.push_back(true);
  s.terminal_scenario.push_back(1);
  s.n_hat = 2;
  const Margin m = solve_scp(net, s);
  CHECK(m.eta_s == doctest::Approx(0.1));
  CHECK_FALSE(m.feasible);
}

TEST_CASE("solve_scp: single near-zero slack mirrors the reported magnitudes") {
  const BarrierNet net = identity_barrier();
  ScenarioSet s;
  s.initial.push_back({{-0.01}, {-0.01}});
  s.initial_scenario.push_back(0);
  s.n_hat = 1;
  const Margin m = solve_scp(net, s);
  CHECK(m.eta_s == doctest::Approx(-0.01));
  CHECK(m.feasible);
}

TEST_CASE("solve_scp: equals brute force on random instances, single support") {
  Rng rng(2024);
  const BarrierNet net = init_mlp(MlpSpec{{3, 8, 1}}, 55);
  for (int trial = 0; trial < 100; ++trial) {
    const ScenarioSet s = random_set(rng, net, 3);
    auto parts = brute_force_parts(net, s);
    if (parts.empty()) continue;
    const double want = *std::max_element(parts.begin(), parts.end());
    const Margin m = solve_scp(net, s);
    CHECK(m.eta_s == want);

    // Removing any non-binding constraint leaves the optimum unchanged;
    // removing the binding one weakly decreases it.
    for (std::size_t i = 0; i < parts.size(); ++i) {
      std::vector<double> reduced = parts;
      reduced.erase(reduced.begin() + i);
      if (reduced.empty()) continue;
      const double opt = *std::max_element(reduced.begin(), reduced.end());
      if (parts[i] == want) {
        CHECK(opt <= want);
      } else {
        CHECK(opt == want);
      }
    }
  }
}

TEST_CASE("solve_scp: empty constraint set is a degenerate input") {
  const BarrierNet net = identity_barrier();
  ScenarioSet s;
  s.n_hat = 0;
  CHECK_THROWS_AS(solve_scp(net, s), ArgumentError);
}

TEST_CASE("required_scenarios: pinned values") {
  CHECK(required_scenarios(0.5, 0.5) == 1);
  CHECK(required_scenarios(0.005, 1e-4) == 1838);
  CHECK(required_scenarios(0.05, 1e-3) == 135);
}

TEST_CASE("required_scenarios: minimality on a random grid") {
  Rng rng(31337);
  for (int trial = 0; trial < 1000; ++trial) {
    const double eps = rng.uniform(1e-4, 0.999);
    const double beta = std::pow(10.0, rng.uniform(-12.0, -0.001));
    const long long n = required_scenarios(eps, beta);
    REQUIRE(n >= 1);
    CHECK(std::pow(1.0 - eps, static_cast<double>(n)) <= beta);
    if (n > 1) {
      CHECK(std::pow(1.0 - eps, static_cast<double>(n - 1)) > beta);
    }
  }
}

TEST_CASE("required_scenarios: domain errors") {
  CHECK_THROWS_AS(required_scenarios(0.0, 0.5), ArgumentError);
  CHECK_THROWS_AS(required_scenarios(1.0, 0.5), ArgumentError);
  CHECK_THROWS_AS(required_scenarios(0.5, 0.0), ArgumentError);
  CHECK_THROWS_AS(required_scenarios(0.5, 1.0), ArgumentError);
}

TEST_CASE("achieved_epsilon: reproduces the reported three-decimal values") {
  auto rounded3 = [](double x) { return std::round(x * 1000.0) / 1000.0; };
  CHECK(rounded3(achieved_epsilon(1800, 1e-4)) == doctest::Approx(0.005));
  CHECK(rounded3(achieved_epsilon(1500, 1e-4)) == doctest::Approx(0.006));
  CHECK(rounded3(achieved_epsilon(700, 1e-4)) == doctest::Approx(0.013));
  CHECK(rounded3(achieved_epsilon(600, 1e-4)) == doctest::Approx(0.015));
}

TEST_CASE("pac arithmetic: monotonicity and round-trip consistency") {
  Rng rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    const double eps = rng.uniform(0.001, 0.5);
    const double beta = rng.uniform(1e-8, 0.5);
    const long long n = required_scenarios(eps, beta);
    // Larger tolerance or weaker confidence never needs more scenarios.
    CHECK(required_scenarios(std::min(0.999, eps * 2.0), beta) <= n);
    CHECK(required_scenarios(eps, std::min(0.999, beta * 10.0)) <= n);
    // achieved_epsilon is the inverse direction of the bound.
    CHECK(achieved_epsilon(n, beta) <= eps + 1e-12);
    CHECK(achieved_epsilon(n + 1, beta) < achieved_epsilon(n, beta));
    // The emitted epsilon satisfies the defining inequality.
    const double eps_star = achieved_epsilon(n, beta);
    CHECK(std::pow(1.0 - eps_star, static_cast<double>(n)) <= beta + 1e-12);
  }
}

TEST_CASE("held_out_violation_rate: the solving set never violates itself") {
  Rng rng(77);
  const BarrierNet net = init_mlp(MlpSpec{{3, 8, 1}}, 91);
  const ScenarioSet s = random_set(rng, net, 3);
  if (s.n_hat == 0) return;
  const Margin m = solve_scp(net, s);
  CHECK(held_out_violation_rate(net, m, s) == 0.0);
}

TEST_CASE("held_out_violation_rate: a single violating scenario counts fully") {
  const BarrierNet net = identity_barrier();
  ScenarioSet solving;
  solving.initial.push_back({{-0.1}, {-0.1}});
  solving.initial_scenario.push_back(0);
  solving.n_hat = 1;
  const Margin m = solve_scp(net, solving);  // eta = -0.1

  ScenarioSet fresh;
  fresh.initial.push_back({{-0.05}, {-0.05}});
  fresh.initial_scenario.push_back(0);
  fresh.n_hat = 1;
  CHECK(held_out_violation_rate(net, m, fresh) == 1.0);
}

TEST_CASE("held_out_violation_rate: empty set rejected") {
  const BarrierNet net = identity_barrier();
  ScenarioSet fresh;
  fresh.n_hat = 0;
  Margin m;
  m.eta_s = -0.5;
  CHECK_THROWS_AS(held_out_violation_rate(net, m, fresh), ArgumentError);
}
