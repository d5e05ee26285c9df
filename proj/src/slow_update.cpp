#include "fstta/slow_update.hpp"

#include <cmath>

namespace fstta::slow {

using linalg::axpy;
using linalg::center_rows;
using linalg::dot;
using linalg::norm2;
using linalg::RowMatrix;
using linalg::scatter_eigen;

Vec reference_direction(const Trajectory& traj, double decay) {
  if (traj.states.size() < 2)
    throw ValidityError("reference_direction: trajectory needs an anchor and "
                        "at least one recorded state");
  if (!(decay > 0.0 && decay < 1.0))
    throw ValidityError("reference_direction: decay must be in (0,1)");

  const std::size_t n = traj.samples();
  const Vec& anchor = traj.anchor();

  double normalizer = 0.0;
  for (std::size_t i = 0; i < n; ++i) normalizer += std::pow(decay, i);

  Vec h(anchor.size(), 0.0);
  for (std::size_t k = 1; k <= n; ++k) {
    const double w = std::pow(decay, n - k);
    const Vec& state = traj.states[k];
    for (std::size_t i = 0; i < h.size(); ++i)
      h[i] += w * (anchor[i] - state[i]);
  }
  for (double& v : h) v /= normalizer;
  return h;
}

Vec slow_gradient(const Trajectory& traj, const Vec& h, double eig_tol,
                  double sign_tol) {
  if (traj.states.size() < 2)
    throw ValidityError("slow_gradient: incomplete trajectory");
  const std::size_t dim = traj.anchor().size();

  const double h_norm = norm2(h);
  if (h_norm == 0.0) return Vec(dim, 0.0);

  const RowMatrix m = RowMatrix::from_rows(traj.states);
  auto [mean, centered] = center_rows(m);
  const auto es = scatter_eigen(centered, traj.samples(), eig_tol);
  if (es.rank() == 0) return Vec(dim, 0.0);

  // Norm of the retained eigenvalues; axes later dropped for undefined
  // orientation still count here, which is what makes the output norm a
  // (tight) lower bound of ||h||.
  double eps_norm = 0.0;
  for (double e : es.eigenvalues) eps_norm += e * e;
  eps_norm = std::sqrt(eps_norm);

  Vec out(dim, 0.0);
  for (std::size_t d = 0; d < es.rank(); ++d) {
    const double align = dot(h, es.eigenvectors[d]);
    if (std::abs(align) <= sign_tol * h_norm) continue;  // sign undefined
    const double weight = es.eigenvalues[d] * h_norm / eps_norm;
    axpy(align > 0.0 ? weight : -weight, es.eigenvectors[d], out);
  }
  return out;
}

Vec slow_step(const Vec& anchor, const Vec& grad, double lr) {
  if (anchor.size() != grad.size())
    throw ValidityError("slow_step: dimension mismatch");
  Vec next = anchor;
  axpy(-lr, grad, next);
  return next;
}

}  // namespace fstta::slow
