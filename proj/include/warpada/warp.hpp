#pragma once

// Warping paths from unconstrained parameters.
//
// h1 makes increments non-negative and accumulates them (monotone), h2
// rescales the accumulated curve onto [0, N-1] and subtracts the index
// (boundary displacements are zero), h3 rescales globally so that no
// displacement exceeds phi_max. All three stay on the tape.

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "warpada/tensor.hpp"

namespace warpada {

/// Ranges of (max - min) below this collapse to the identity path.
inline constexpr double kDegenerateRange = 1e-12;

inline Var h1_monotone(Var phi) {
  if (phi.shape().size() != 1 || phi.size() < 2) {
    throw Error("h1_monotone: need a vector of at least 2 parameters, got " + shape_string(phi.shape()));
  }
  return cumsum(phi - min_reduce(phi));
}

inline Var h2_boundary(Var cum) {
  const std::size_t n = cum.size();
  if (cum.shape().size() != 1 || n < 2) {
    throw Error("h2_boundary: need a vector of at least 2 entries, got " + shape_string(cum.shape()));
  }
  Tape& tape = cum.tape();
  Var lo = min_reduce(cum);
  Var hi = max_reduce(cum);
  if (hi.item() - lo.item() < kDegenerateRange) return tape.constant(Tensor::zeros({n}));

  std::vector<double> index(n);
  for (std::size_t i = 0; i < n; ++i) index[i] = static_cast<double>(i);
  Var warped = (cum - lo) / (hi - lo) * static_cast<double>(n - 1);
  return warped - tape.constant(Tensor::vector(std::move(index)));
}

inline Var h3_clip(Var delta, double phi_max) {
  if (!(phi_max > 0.0)) throw Error("h3_clip: phi_max must be positive, got " + std::to_string(phi_max));
  Var peak = max_reduce(abs(delta));
  testing_hooks::note_kink(peak.item() - phi_max);
  if (peak.item() <= phi_max) return delta;
  return delta * (delta.tape().constant(Tensor(phi_max)) / peak);
}

/// h3(h2(h1(phi))) without the window headroom check; for generators that
/// are not tied to a particular window size.
inline Var constrain_path(Var phi, double phi_max) { return h3_clip(h2_boundary(h1_monotone(phi)), phi_max); }

/// Displacement path for warping with window half-width M. Requires
/// phi_max <= M - 1 so fractional shifts stay inside the window.
inline Var make_path(Var phi, double phi_max, std::size_t half_width) {
  if (phi_max > static_cast<double>(half_width) - 1.0) {
    throw Error("make_path: phi_max " + std::to_string(phi_max) + " exceeds M - 1 = " +
                std::to_string(static_cast<double>(half_width) - 1.0));
  }
  return constrain_path(phi, phi_max);
}

/// Which warping-path conditions a concrete path breaks.
struct PathCheck {
  bool monotone = true;
  bool boundary = true;
  bool bounded = true;
  bool ok() const { return monotone && boundary && bounded; }
};

inline PathCheck check_path(std::span<const double> path, double phi_max, double tol = 1e-9) {
  PathCheck check;
  if (path.empty()) return check;
  check.boundary = std::fabs(path.front()) < tol && std::fabs(path.back()) < tol;
  for (std::size_t i = 0; i < path.size(); ++i) {
    if (std::fabs(path[i]) > phi_max + tol) check.bounded = false;
    if (i > 0 && static_cast<double>(i) + path[i] < static_cast<double>(i - 1) + path[i - 1] - tol) {
      check.monotone = false;
    }
  }
  return check;
}

}  // namespace warpada
