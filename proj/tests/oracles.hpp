// Test-only reference implementations, written independently of the library
// paths they check: a long-double re-evaluation of the dense ReLU chain,
// central finite differences, and a brute-force scenario-program solver.
#pragma once

#include <cmath>
#include <functional>
#include <span>
#include <vector>

#include "pcert/nn.hpp"

namespace oracle {

// Walks the flattened parameter layout on its own and evaluates the network
// in long double.
inline std::vector<double> mlp_forward(const std::vector<int>& sizes,
                                       const std::vector<double>& params,
                                       std::span<const double> input) {
  std::vector<long double> act(input.begin(), input.end());
  std::size_t off = 0;
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
    const int in = sizes[l];
    const int out = sizes[l + 1];
    std::vector<long double> next(out, 0.0L);
    for (int j = 0; j < out; ++j) {
      long double s = params[off + static_cast<std::size_t>(out) * in + j];
      for (int i = 0; i < in; ++i) {
        s += static_cast<long double>(params[off + static_cast<std::size_t>(j) * in + i]) *
             act[i];
      }
      next[j] = s;
    }
    if (l + 2 < sizes.size()) {
      for (auto& v : next) v = v > 0.0L ? v : 0.0L;
    }
    act = std::move(next);
    off += static_cast<std::size_t>(out) * in + out;
  }
  return std::vector<double>(act.begin(), act.end());
}

// Central differences of an arbitrary scalar function of a parameter vector.
inline std::vector<double> finite_difference(
    const std::function<double(const std::vector<double>&)>& f,
    std::vector<double> params, double h = 1e-5) {
  std::vector<double> grad(params.size(), 0.0);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double saved = params[i];
    params[i] = saved + h;
    const double hi = f(params);
    params[i] = saved - h;
    const double lo = f(params);
    params[i] = saved;
    grad[i] = (hi - lo) / (2.0 * h);
  }
  return grad;
}

inline bool grad_close(std::span<const double> got, std::span<const double> want,
                       double rel = 1e-4, double abs = 1e-7) {
  if (got.size() != want.size()) return false;
  for (std::size_t i = 0; i < got.size(); ++i) {
    const double diff = std::fabs(got[i] - want[i]);
    const double scale = std::fabs(want[i]);
    if (diff > abs && diff > rel * scale) return false;
  }
  return true;
}

// Independent per-example accuracy recount.
inline double recount_accuracy(const pcert::Mlp& net,
                               const pcert::LabeledDataset& data) {
  int correct = 0;
  for (int i = 0; i < data.n; ++i) {
    const auto z = mlp_forward(net.spec.layer_sizes, net.params, data.row(i));
    int best = 0;
    for (std::size_t j = 1; j < z.size(); ++j) {
      if (z[j] > z[best]) best = static_cast<int>(j);
    }
    if (best == data.labels[i]) ++correct;
  }
  return static_cast<double>(correct) / data.n;
}

}  // namespace oracle
