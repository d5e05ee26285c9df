#include <cmath>

#include "doctest.h"
#include "fstta/rng.hpp"
#include "fstta/slow_update.hpp"

using namespace fstta;
using namespace fstta::slow;
using linalg::dot;
using linalg::norm2;
using linalg::Vec;

namespace {

Trajectory random_trajectory(Rng& rng, std::size_t n, std::size_t d,
                             double step = 0.1) {
  Trajectory t;
  Vec state(d);
  for (double& x : state) x = rng.normal(0.0, 1.0);
  t.states.push_back(state);
  for (std::size_t k = 0; k < n; ++k) {
    for (double& x : state) x += rng.normal(0.0, step);
    t.states.push_back(state);
  }
  return t;
}

}  // namespace

TEST_SUITE_BEGIN("slow-update");

TEST_CASE("reference direction hand example") {
  Trajectory t;
  t.states = {{1.0}, {0.8}, {0.5}};
  Vec h = reference_direction(t, 0.5);
  CHECK(h[0] == doctest::Approx(0.4).epsilon(1e-12));
}

TEST_CASE("reference direction of identical states is zero") {
  Trajectory t;
  t.states = {{2.0, -1.0}, {2.0, -1.0}, {2.0, -1.0}};
  Vec h = reference_direction(t, 0.1);
  CHECK(h[0] == 0.0);
  CHECK(h[1] == 0.0);
}

TEST_CASE("reference direction weights favor recent deviations") {
  // N=4 at decay 0.1: most recent deviation carries weight 1/1.111
  Trajectory t;
  t.states = {{0.0}, {0.0}, {0.0}, {0.0}, {-1.0}};  // only last state deviates
  Vec h = reference_direction(t, 0.1);
  const double normalizer = 1.0 + 0.1 + 0.01 + 0.001;
  CHECK(h[0] == doctest::Approx(1.0 / normalizer).epsilon(1e-12));
}

TEST_CASE("one-dimensional slow gradient equals the reference direction") {
  Trajectory t;
  t.states = {{1.0}, {0.8}, {0.5}};
  Vec h = reference_direction(t, 0.5);
  Vec g = slow_gradient(t, h, linalg::kDefaultEigTol, 1e-10);
  CHECK(g[0] == doctest::Approx(h[0]).epsilon(1e-12));

  Rng rng(31);
  for (int iter = 0; iter < 100; ++iter) {
    Trajectory rt = random_trajectory(rng, 4, 1);
    Vec rh = reference_direction(rt, 0.1);
    Vec rg = slow_gradient(rt, rh, linalg::kDefaultEigTol, 1e-10);
    CHECK(rg[0] == doctest::Approx(rh[0]).epsilon(1e-12).scale(1.0));
  }
}

TEST_CASE("identical states give a zero slow gradient") {
  Trajectory t;
  t.states = {{1.0, 2.0}, {1.0, 2.0}, {1.0, 2.0}};
  Vec h = reference_direction(t, 0.1);
  Vec g = slow_gradient(t, h, linalg::kDefaultEigTol, 1e-10);
  CHECK(norm2(g) == 0.0);
}

TEST_CASE("sign alignment and norm bound over random trajectories") {
  Rng rng(37);
  for (int iter = 0; iter < 200; ++iter) {
    const std::size_t d = 1 + rng.uniform_int(0, 15);
    Trajectory t = random_trajectory(rng, 4, d);
    Vec h = reference_direction(t, 0.1);
    Vec g = slow_gradient(t, h, linalg::kDefaultEigTol, 1e-10);
    CHECK(dot(g, h) >= -1e-12);
    CHECK(norm2(g) <= norm2(h) * (1.0 + 1e-9));
  }
}

TEST_CASE("norm identity is exact when every axis keeps an orientation") {
  Rng rng(41);
  int exact_cases = 0;
  for (int iter = 0; iter < 200; ++iter) {
    const std::size_t d = 2 + rng.uniform_int(0, 8);
    Trajectory t = random_trajectory(rng, 4, d);
    Vec h = reference_direction(t, 0.1);
    if (norm2(h) == 0.0) continue;

    // count retained axes vs sign-dropped axes
    auto [mean, centered] = linalg::center_rows(
        linalg::RowMatrix::from_rows(t.states));
    auto es = linalg::scatter_eigen(centered, t.samples());
    bool any_dropped = false;
    for (std::size_t k = 0; k < es.rank(); ++k)
      if (std::abs(dot(h, es.eigenvectors[k])) <= 1e-10 * norm2(h))
        any_dropped = true;
    if (any_dropped) continue;

    Vec g = slow_gradient(t, h, linalg::kDefaultEigTol, 1e-10);
    CHECK(norm2(g) == doctest::Approx(norm2(h)).epsilon(1e-9));
    ++exact_cases;
  }
  CHECK(exact_cases > 100);  // generic trajectories rarely drop axes
}

TEST_CASE("slow step applies from the anchor") {
  Vec anchor{1.0};
  Vec grad{0.4};
  Vec next = slow_step(anchor, grad, 1e-3);
  CHECK(next[0] == doctest::Approx(0.9996).epsilon(1e-12));

  // zero gradient and zero lr both leave the anchor unchanged
  CHECK(slow_step(anchor, {0.0}, 1e-3)[0] == 1.0);
  CHECK(slow_step(anchor, grad, 0.0)[0] == 1.0);
}

TEST_CASE("axes orthogonal to the reference direction are dropped") {
  // Build a trajectory whose variation is exactly orthogonal to h by
  // wiggling dimension 1 while drifting dimension 0 symmetrically so the
  // weighted deviations cancel in dim 1.
  Trajectory t;
  t.states = {{0.0, 0.0}, {0.1, 1.0}, {0.2, -1.0}};
  // anchor-to-state deviations: (-0.1,-1), (-0.2,1). With decay q the
  // h vector mixes both; pick h manually orthogonal to the dominant axis.
  Vec h{1.0, 0.0};
  Vec g = slow_gradient(t, h, linalg::kDefaultEigTol, 1e-10);
  // dominant variation axis is nearly e1 (variance ~1); its alignment with
  // h is small but nonzero, so nothing is guaranteed dropped here. Use an
  // exactly orthogonal h against a pure e1 trajectory instead:
  Trajectory t2;
  t2.states = {{0.0, 0.0}, {0.0, 1.0}, {0.0, -1.0}};
  Vec g2 = slow_gradient(t2, {1.0, 0.0}, linalg::kDefaultEigTol, 1e-10);
  CHECK(norm2(g2) == 0.0);
  (void)g;
}

TEST_SUITE_END();
