#pragma once

#include <cstddef>
#include <functional>

#include "fstta/linalg.hpp"

namespace fstta::fast {

using linalg::Vec;

// Rolling buffer of per-step gradients feeding one fast update.
class GradientWindow {
public:
  explicit GradientWindow(std::size_t capacity) : capacity_(capacity) {}

  void push(Vec grad);
  void clear() { grads_.clear(); }

  std::size_t count() const { return grads_.size(); }
  std::size_t capacity() const { return capacity_; }
  bool full() const { return grads_.size() >= capacity_; }
  const std::vector<Vec>& grads() const { return grads_; }

private:
  std::size_t capacity_;
  std::vector<Vec> grads_;
};

struct FastConfig {
  std::size_t window = 3;    // gradients per update (M)
  double base_lr = 6e-4;     // base fast learning rate
  double threshold = 0.7;    // deviation allowance in the LR multiplier (tau)
  double momentum = 0.95;    // running-variance update momentum (rho)
  double trunc_lo = 0.9;     // truncation interval for the LR multiplier
  double trunc_hi = 1.1;
  double phi_eps = 1e-6;     // relative regularizer inside the axis weights
  double eig_tol = linalg::kDefaultEigTol;
};

// Running statistic of the gradient-scatter trace, kept across the whole
// test stream (one per adaptation session).
struct FastPhaseState {
  double sigma_bar = 0.0;
  bool initialized = false;
};

struct ConcordantGradient {
  Vec grad;      // concordant direction, length-calibrated to ||mean||
  double sigma;  // scatter trace, feeds dynamic LR scaling
};

// Axis weight as a function of the axis eigenvalue and the scatter trace.
// The default is the regularized inverse 1/(lambda + phi_eps * trace); the
// null-space component is accumulated with the lambda -> 0 limit of the
// same weight.
using AxisWeightFn = std::function<double(double lambda, double trace)>;

// Decomposes the window's gradients over the eigen-axes of their scatter
// matrix and re-accumulates the mean gradient's components with
// inverse-variance weights, then calibrates the result back to the mean's
// length. Requires at least two gradients.
ConcordantGradient concordant_gradient(const GradientWindow& window,
                                       double phi_eps, double eig_tol);

// Same decomposition-accumulation with a caller-supplied axis weight.
// Exposed so the weight function's algebraic properties can be tested.
ConcordantGradient concordant_gradient_with_weight(
    const GradientWindow& window, const AxisWeightFn& weight, double eig_tol);

// Truncated learning-rate multiplier driven by the deviation of the
// current scatter trace from its running average. Updates the running
// average in place. Result is always in [trunc_lo, trunc_hi] * base_lr.
double dynamic_lr(double sigma, FastPhaseState& state, const FastConfig& cfg);

// One fast parameter step: theta - lr * grad. Clears the window.
Vec fast_step(const Vec& theta, GradientWindow& window, FastPhaseState& state,
              const FastConfig& cfg);

}  // namespace fstta::fast
