#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "warpada/tensor.hpp"

namespace warpada {

/// Builds a scalar on `tape` from the leaf `x`.
using ScalarGraph = std::function<Var(Tape&, Var)>;

/// Reverse-mode gradient of f at x.
inline Tensor analytic_gradient(const ScalarGraph& f, const Tensor& x) {
  Tape tape;
  Var leaf = tape.leaf(x, true);
  Var out = f(tape, leaf);
  tape.backward(out);
  return tape.grad(leaf);
}

inline double evaluate_scalar(const ScalarGraph& f, const Tensor& x) {
  Tape tape;
  return f(tape, tape.constant(x)).item();
}

/// Max over the checked coordinates of |analytic - numeric| / max(|analytic|, |numeric|, 1e-8),
/// with the numeric derivative from central differences of step h. An empty
/// `coords` checks every coordinate.
inline double finite_diff_check(const ScalarGraph& f, const Tensor& x, double h = 1e-5,
                                const std::vector<std::size_t>& coords = {}) {
  const Tensor grad = analytic_gradient(f, x);
  std::vector<std::size_t> todo = coords;
  if (todo.empty()) {
    todo.resize(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) todo[i] = i;
  }
  double worst = 0.0;
  Tensor probe = x;
  for (std::size_t i : todo) {
    const double orig = probe[i];
    probe[i] = orig + h;
    const double fp = evaluate_scalar(f, probe);
    probe[i] = orig - h;
    const double fm = evaluate_scalar(f, probe);
    probe[i] = orig;
    const double numeric = (fp - fm) / (2.0 * h);
    const double analytic = grad[i];
    const double denom = std::max({std::fabs(analytic), std::fabs(numeric), 1e-8});
    worst = std::max(worst, std::fabs(analytic - numeric) / denom);
  }
  return worst;
}

}  // namespace warpada
