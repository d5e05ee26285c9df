#pragma once

#include <cstddef>

#include "fstta/linalg.hpp"

namespace fstta::slow {

using linalg::Vec;

// Recorded model states feeding one slow update. Slot 0 is the anchor (the
// state produced by the previous slow update); slots 1..N are the
// end-of-sample states recorded since then.
struct Trajectory {
  std::vector<Vec> states;

  std::size_t samples() const {
    return states.empty() ? 0 : states.size() - 1;
  }
  const Vec& anchor() const { return states.front(); }
};

struct SlowConfig {
  std::size_t samples = 4;  // recorded states per slow update (N)
  double lr = 1e-3;
  double decay = 0.1;       // geometric weight on older deviations (q)
  double eig_tol = linalg::kDefaultEigTol;
  double sign_tol = 1e-10;  // relative threshold below which an axis has no
                            // defined orientation against the reference
};

// Geometrically weighted average of anchor-to-state deviations; more
// recent states dominate. decay must lie in (0,1).
Vec reference_direction(const Trajectory& traj, double decay);

// Eigen-axes of the centered state trajectory, sign-aligned with the
// reference direction and re-accumulated with eigenvalue-proportional
// weights scaled to ||h||. Axes orthogonal to h (within sign_tol) are
// dropped. Returns zero when h vanishes or no axes survive.
Vec slow_gradient(const Trajectory& traj, const Vec& h, double eig_tol,
                  double sign_tol);

// The slow step applies from the anchor, never from the current
// fast-updated parameters: theta_l = anchor - lr * grad.
Vec slow_step(const Vec& anchor, const Vec& grad, double lr);

}  // namespace fstta::slow
