#include <cmath>

#include "doctest.h"
#include "fstta/fast_update.hpp"
#include "fstta/rng.hpp"

using namespace fstta;
using namespace fstta::fast;
using linalg::norm2;
using linalg::Vec;

namespace {

GradientWindow make_window(const std::vector<Vec>& grads,
                           std::size_t capacity = 0) {
  GradientWindow w(capacity == 0 ? grads.size() : capacity);
  for (const Vec& g : grads) w.push(g);
  return w;
}

Vec random_vec(Rng& rng, std::size_t d, double scale = 1.0) {
  Vec v(d);
  for (double& x : v) x = rng.normal(0.0, scale);
  return v;
}

}  // namespace

TEST_SUITE_BEGIN("fast-update");

TEST_CASE("concordant gradient hand example") {
  auto w = make_window({{1, 0}, {0, 1}, {1, 1}});
  auto cg = concordant_gradient(w, 1e-6, linalg::kDefaultEigTol);
  CHECK(cg.sigma == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
  CHECK(cg.grad[0] == doctest::Approx(2.0 / 3.0).epsilon(1e-9));
  CHECK(cg.grad[1] == doctest::Approx(2.0 / 3.0).epsilon(1e-9));
}

TEST_CASE("identical gradients return the mean with zero sigma") {
  auto w = make_window({{3, 4}, {3, 4}, {3, 4}});
  auto cg = concordant_gradient(w, 1e-6, linalg::kDefaultEigTol);
  CHECK(cg.sigma == doctest::Approx(0.0));
  CHECK(cg.grad[0] == doctest::Approx(3.0).epsilon(1e-12));
  CHECK(cg.grad[1] == doctest::Approx(4.0).epsilon(1e-12));
}

TEST_CASE("zero mean short-circuits to the zero vector") {
  auto w = make_window({{1, 0}, {-1, 0}});
  auto cg = concordant_gradient(w, 1e-6, linalg::kDefaultEigTol);
  CHECK(cg.grad[0] == 0.0);
  CHECK(cg.grad[1] == 0.0);
  CHECK(cg.sigma == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("window of one gradient is rejected") {
  auto w = make_window({{1.0, 2.0}}, 3);
  CHECK_THROWS_AS(concordant_gradient(w, 1e-6, linalg::kDefaultEigTol),
                  InsufficientWindowError);
}

TEST_CASE("length calibration over random windows") {
  Rng rng(11);
  for (int iter = 0; iter < 200; ++iter) {
    const std::size_t m = 2 + rng.uniform_int(0, 3);
    const std::size_t d = 2 + rng.uniform_int(0, 14);
    std::vector<Vec> grads;
    for (std::size_t i = 0; i < m; ++i) grads.push_back(random_vec(rng, d));
    auto w = make_window(grads);

    // independent mean
    Vec mean(d, 0.0);
    for (const Vec& g : grads)
      for (std::size_t i = 0; i < d; ++i) mean[i] += g[i] / double(m);

    auto cg = concordant_gradient(w, 1e-6, linalg::kDefaultEigTol);
    CHECK(norm2(cg.grad) ==
          doctest::Approx(norm2(mean)).epsilon(1e-9));
  }
}

TEST_CASE("constant axis weight degenerates to the mean gradient") {
  Rng rng(13);
  for (int iter = 0; iter < 50; ++iter) {
    const std::size_t m = 2 + rng.uniform_int(0, 3);
    const std::size_t d = 3 + rng.uniform_int(0, 12);
    std::vector<Vec> grads;
    for (std::size_t i = 0; i < m; ++i) grads.push_back(random_vec(rng, d));
    auto w = make_window(grads);

    Vec mean(d, 0.0);
    for (const Vec& g : grads)
      for (std::size_t i = 0; i < d; ++i) mean[i] += g[i] / double(m);

    auto cg = concordant_gradient_with_weight(
        w, [](double, double) { return 2.5; }, linalg::kDefaultEigTol);
    for (std::size_t i = 0; i < d; ++i)
      CHECK(cg.grad[i] ==
            doctest::Approx(mean[i]).epsilon(1e-9).scale(norm2(mean)));
  }
}

TEST_CASE("axis weight scale invariance") {
  Rng rng(17);
  for (int iter = 0; iter < 50; ++iter) {
    const std::size_t m = 3;
    const std::size_t d = 6;
    std::vector<Vec> grads;
    for (std::size_t i = 0; i < m; ++i) grads.push_back(random_vec(rng, d));
    auto w = make_window(grads);

    const double phi_eps = 1e-6;
    auto base = concordant_gradient(w, phi_eps, linalg::kDefaultEigTol);
    auto scaled = concordant_gradient_with_weight(
        w,
        [phi_eps](double lambda, double trace) {
          return 7.25 / (lambda + phi_eps * trace);
        },
        linalg::kDefaultEigTol);
    for (std::size_t i = 0; i < d; ++i)
      CHECK(scaled.grad[i] ==
            doctest::Approx(base.grad[i]).epsilon(1e-10).scale(1.0));
  }
}

TEST_CASE("low-variance axes gain relative weight") {
  // Two orthogonal deviation axes with unequal variance, mean projecting
  // equally on both: the quieter axis must carry the larger component
  // before calibration (ordering survives calibration's uniform scaling).
  std::vector<Vec> grads = {
      {1.0 + 1.0, 1.0 + 0.2}, {1.0 - 1.0, 1.0 - 0.2}};  // mean (1,1)
  auto w = make_window(grads);
  auto cg = concordant_gradient(w, 1e-6, linalg::kDefaultEigTol);
  // axis 0 = e0 with variance 2, axis 1 = e1 with variance 0.08
  CHECK(std::abs(cg.grad[1]) > std::abs(cg.grad[0]));
}

TEST_CASE("dynamic lr truncation cases") {
  FastConfig cfg;  // defaults: tau 0.7, [0.9, 1.1], base 6e-4
  FastPhaseState state;

  // first observation initializes sigma_bar and hits the ceiling
  double lr = dynamic_lr(0.5, state, cfg);
  CHECK(lr == doctest::Approx(1.1 * 6e-4).epsilon(1e-12));
  CHECK(state.sigma_bar == doctest::Approx(0.5));

  // |sigma - sigma_bar| = 0 -> ceiling again
  lr = dynamic_lr(0.5, state, cfg);
  CHECK(lr == doctest::Approx(6.6e-4).epsilon(1e-12));

  // interior value: deviation 0.8 -> multiplier 0.9 exactly
  FastPhaseState s2{0.0, true};
  lr = dynamic_lr(0.8, s2, cfg);
  CHECK(lr == doctest::Approx(0.9 * 6e-4).epsilon(1e-12));

  // huge deviation floors out
  FastPhaseState s3{0.0, true};
  lr = dynamic_lr(5.0, s3, cfg);
  CHECK(lr == doctest::Approx(0.9 * 6e-4).epsilon(1e-12));
}

TEST_CASE("sigma_bar recurrence is exact under constant sigma") {
  FastConfig cfg;
  FastPhaseState state;
  const double s = 1.37;
  dynamic_lr(s, state, cfg);
  for (int i = 0; i < 50; ++i) dynamic_lr(s, state, cfg);
  CHECK(state.sigma_bar == s);
}

TEST_CASE("lr always within the truncation bounds") {
  FastConfig cfg;
  Rng rng(23);
  FastPhaseState state;
  for (int i = 0; i < 1000; ++i) {
    const double sigma = std::abs(rng.normal(0.0, 3.0));
    const double lr = dynamic_lr(sigma, state, cfg);
    CHECK(lr >= cfg.trunc_lo * cfg.base_lr);
    CHECK(lr <= cfg.trunc_hi * cfg.base_lr);
  }
}

TEST_CASE("fast step composes gradient and lr, clears window") {
  FastConfig cfg;
  FastPhaseState state;
  auto w = make_window({{1, 0}, {0, 1}, {1, 1}});
  Vec theta{0.0, 0.0};
  Vec next = fast_step(theta, w, state, cfg);
  CHECK(w.count() == 0);
  CHECK(next[0] == doctest::Approx(-6.6e-4 * 2.0 / 3.0).epsilon(1e-9));
  CHECK(next[1] == doctest::Approx(-6.6e-4 * 2.0 / 3.0).epsilon(1e-9));
}

TEST_CASE("fast step with zero gradients leaves theta unchanged") {
  FastConfig cfg;
  FastPhaseState state;
  auto w = make_window({{0, 0}, {0, 0}, {0, 0}});
  Vec theta{1.5, -2.5};
  Vec next = fast_step(theta, w, state, cfg);
  CHECK(next[0] == 1.5);
  CHECK(next[1] == -2.5);
}

TEST_CASE("two identical gradients step along the gradient") {
  FastConfig cfg;
  cfg.window = 2;
  FastPhaseState state;
  auto w = make_window({{2, -1}, {2, -1}});
  Vec theta{0.0, 0.0};
  Vec next = fast_step(theta, w, state, cfg);
  // zero scatter -> grad = mean = (2,-1); uninitialized state -> lr ceiling
  CHECK(next[0] == doctest::Approx(-6.6e-4 * 2.0).epsilon(1e-12));
  CHECK(next[1] == doctest::Approx(6.6e-4).epsilon(1e-12));
}

TEST_SUITE_END();
