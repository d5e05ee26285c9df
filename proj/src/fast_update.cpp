#include "fstta/fast_update.hpp"

#include <algorithm>
#include <cmath>

namespace fstta::fast {

using linalg::axpy;
using linalg::center_rows;
using linalg::dot;
using linalg::norm2;
using linalg::RowMatrix;
using linalg::scale_inplace;
using linalg::scatter_eigen;

void GradientWindow::push(Vec grad) {
  if (!grads_.empty() && grad.size() != grads_.front().size())
    throw ValidityError("GradientWindow: gradient dimension mismatch");
  if (!linalg::all_finite(grad))
    throw ValidityError("GradientWindow: non-finite gradient");
  grads_.push_back(std::move(grad));
}

ConcordantGradient concordant_gradient_with_weight(
    const GradientWindow& window, const AxisWeightFn& weight, double eig_tol) {
  if (window.count() < 2)
    throw InsufficientWindowError(
        "concordant_gradient: need at least 2 gradients, have " +
        std::to_string(window.count()));

  const RowMatrix g = RowMatrix::from_rows(window.grads());
  auto [mean, centered] = center_rows(g);
  const auto es = scatter_eigen(centered, window.count() - 1, eig_tol);
  const double sigma = es.trace;

  const double mean_norm = norm2(mean);
  if (mean_norm == 0.0) return {Vec(g.cols, 0.0), sigma};
  // Zero scatter: every gradient equals the mean, which is maximally
  // concordant already.
  if (sigma == 0.0 && es.rank() == 0) return {std::move(mean), sigma};

  // Accumulate the mean's projections onto the scatter axes, then the
  // residual (null-space) component with the zero-eigenvalue weight.
  Vec out(g.cols, 0.0);
  Vec residual = mean;
  for (std::size_t d = 0; d < es.rank(); ++d) {
    const double proj = dot(mean, es.eigenvectors[d]);
    axpy(weight(es.eigenvalues[d], sigma) * proj, es.eigenvectors[d], out);
    axpy(-proj, es.eigenvectors[d], residual);
  }
  if (norm2(residual) > 0.0) axpy(weight(0.0, sigma), residual, out);

  // Length calibration: the weights control only the direction.
  const double out_norm = norm2(out);
  if (out_norm == 0.0) return {std::move(mean), sigma};
  scale_inplace(out, mean_norm / out_norm);
  return {std::move(out), sigma};
}

ConcordantGradient concordant_gradient(const GradientWindow& window,
                                       double phi_eps, double eig_tol) {
  return concordant_gradient_with_weight(
      window,
      [phi_eps](double lambda, double trace) {
        return 1.0 / (lambda + phi_eps * trace);
      },
      eig_tol);
}

double dynamic_lr(double sigma, FastPhaseState& state, const FastConfig& cfg) {
  if (sigma < 0.0) throw ValidityError("dynamic_lr: negative sigma");
  const auto trunc = [&](double x) {
    return std::clamp(x, cfg.trunc_lo, cfg.trunc_hi);
  };
  if (!state.initialized) {
    state.sigma_bar = sigma;
    state.initialized = true;
    return trunc(1.0 + cfg.threshold) * cfg.base_lr;
  }
  const double lr =
      trunc(1.0 + cfg.threshold - std::abs(sigma - state.sigma_bar)) *
      cfg.base_lr;
  state.sigma_bar =
      cfg.momentum * state.sigma_bar + (1.0 - cfg.momentum) * sigma;
  return lr;
}

Vec fast_step(const Vec& theta, GradientWindow& window, FastPhaseState& state,
              const FastConfig& cfg) {
  const ConcordantGradient cg =
      concordant_gradient(window, cfg.phi_eps, cfg.eig_tol);
  const double lr = dynamic_lr(cg.sigma, state, cfg);
  Vec next = theta;
  axpy(-lr, cg.grad, next);
  window.clear();
  return next;
}

}  // namespace fstta::fast
