#include <cmath>

#include "doctest.h"
#include "fstta/linalg.hpp"
#include "fstta/rng.hpp"

using namespace fstta;
using namespace fstta::linalg;

namespace {

RowMatrix random_matrix(Rng& rng, std::size_t r, std::size_t c,
                        double scale = 1.0) {
  RowMatrix m(r, c);
  for (double& v : m.data) v = rng.normal(0.0, scale);
  return m;
}

// Dense scatter (1/denom) X^T X, for cross-checking the Gram path.
RowMatrix dense_scatter(const RowMatrix& x, std::size_t denom) {
  RowMatrix s(x.cols, x.cols);
  for (std::size_t i = 0; i < x.cols; ++i)
    for (std::size_t j = 0; j < x.cols; ++j) {
      double acc = 0.0;
      for (std::size_t r = 0; r < x.rows; ++r)
        acc += x.at(r, i) * x.at(r, j);
      s.at(i, j) = acc / static_cast<double>(denom);
    }
  return s;
}

}  // namespace

TEST_SUITE_BEGIN("linalg");

TEST_CASE("center_rows hand example") {
  RowMatrix x = RowMatrix::from_rows({{1, 0}, {0, 1}, {1, 1}});
  auto [mean, centered] = center_rows(x);
  CHECK(mean[0] == doctest::Approx(2.0 / 3.0).epsilon(1e-14));
  CHECK(mean[1] == doctest::Approx(2.0 / 3.0).epsilon(1e-14));
  CHECK(centered.at(0, 0) == doctest::Approx(1.0 / 3.0).epsilon(1e-14));
  CHECK(centered.at(0, 1) == doctest::Approx(-2.0 / 3.0).epsilon(1e-14));
  CHECK(centered.at(1, 0) == doctest::Approx(-2.0 / 3.0).epsilon(1e-14));
  CHECK(centered.at(2, 1) == doctest::Approx(1.0 / 3.0).epsilon(1e-14));
  // column sums of the centered matrix vanish
  for (std::size_t c = 0; c < 2; ++c) {
    double s = 0.0;
    for (std::size_t r = 0; r < 3; ++r) s += centered.at(r, c);
    CHECK(std::abs(s) <= 1e-12 * 3.0);
  }
}

TEST_CASE("center_rows single row and identical rows") {
  auto [mean1, c1] = center_rows(RowMatrix::from_rows({{5, -3}}));
  CHECK(mean1[0] == 5.0);
  CHECK(mean1[1] == -3.0);
  CHECK(c1.at(0, 0) == 0.0);
  CHECK(c1.at(0, 1) == 0.0);

  auto [mean2, c2] =
      center_rows(RowMatrix::from_rows({{2, 7}, {2, 7}, {2, 7}}));
  for (double v : c2.data) CHECK(v == 0.0);
  CHECK(mean2[0] == doctest::Approx(2.0));
}

TEST_CASE("center_rows rejects non-finite input") {
  RowMatrix x(2, 2);
  x.at(0, 0) = std::nan("");
  CHECK_THROWS_AS(center_rows(x), ValidityError);
}

TEST_CASE("scatter_eigen 2x2 hand example") {
  // centered rows of {(1,0),(0,1),(1,1)}; scatter = [[1/3,-1/6],[-1/6,1/3]]
  RowMatrix centered = RowMatrix::from_rows(
      {{1.0 / 3, -2.0 / 3}, {-2.0 / 3, 1.0 / 3}, {1.0 / 3, 1.0 / 3}});
  EigenSystem es = scatter_eigen(centered, 2);
  check_eigen_invariants(es);
  REQUIRE(es.rank() == 2);
  CHECK(es.eigenvalues[0] == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(es.eigenvalues[1] == doctest::Approx(1.0 / 6.0).epsilon(1e-12));
  CHECK(es.trace == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
  const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
  // sign convention: largest-magnitude entry positive
  CHECK(es.eigenvectors[0][0] == doctest::Approx(inv_sqrt2).epsilon(1e-10));
  CHECK(es.eigenvectors[0][1] == doctest::Approx(-inv_sqrt2).epsilon(1e-10));
  CHECK(es.eigenvectors[1][0] == doctest::Approx(inv_sqrt2).epsilon(1e-10));
  CHECK(es.eigenvectors[1][1] == doctest::Approx(inv_sqrt2).epsilon(1e-10));
}

TEST_CASE("scatter_eigen second hand example") {
  RowMatrix centered = RowMatrix::from_rows(
      {{1.0 / 3, -1.0}, {-2.0 / 3, 1.0}, {1.0 / 3, 0.0}});
  EigenSystem es = scatter_eigen(centered, 2);
  REQUIRE(es.rank() == 2);
  const double s13 = std::sqrt(13.0);
  CHECK(es.eigenvalues[0] == doctest::Approx((4 + s13) / 6).epsilon(1e-12));
  CHECK(es.eigenvalues[1] == doctest::Approx((4 - s13) / 6).epsilon(1e-12));
}

TEST_CASE("scatter_eigen zero matrix yields empty system") {
  RowMatrix zero(3, 4);
  EigenSystem es = scatter_eigen(zero, 2);
  CHECK(es.rank() == 0);
  CHECK(es.trace == 0.0);
}

TEST_CASE("sym_eigen_dense trivial cases") {
  RowMatrix eye(3, 3);
  for (int i = 0; i < 3; ++i) eye.at(i, i) = 1.0;
  EigenSystem es = sym_eigen_dense(eye);
  REQUIRE(es.rank() == 3);
  for (double v : es.eigenvalues) CHECK(v == doctest::Approx(1.0));

  RowMatrix diag = RowMatrix::from_rows({{2, 0}, {0, 3}});
  es = sym_eigen_dense(diag);
  CHECK(es.eigenvalues[0] == doctest::Approx(3.0));
  CHECK(es.eigenvalues[1] == doctest::Approx(2.0));
  CHECK(std::abs(es.eigenvectors[0][1]) == doctest::Approx(1.0));
  CHECK(std::abs(es.eigenvectors[1][0]) == doctest::Approx(1.0));

  RowMatrix m = RowMatrix::from_rows(
      {{1.0 / 3, -1.0 / 6}, {-1.0 / 6, 1.0 / 3}});
  es = sym_eigen_dense(m);
  CHECK(es.eigenvalues[0] == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(es.eigenvalues[1] == doctest::Approx(1.0 / 6).epsilon(1e-12));
}

TEST_CASE("sym_eigen_dense rejects asymmetric input") {
  RowMatrix m = RowMatrix::from_rows({{1, 2}, {0, 1}});
  CHECK_THROWS_AS(sym_eigen_dense(m), ValidityError);
}

TEST_CASE("sym_eigen_dense reconstruction on random matrices") {
  Rng rng(42);
  for (int iter = 0; iter < 50; ++iter) {
    const std::size_t n = 1 + rng.uniform_int(0, 9);
    RowMatrix s(n, n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i; j < n; ++j) {
        double v = rng.normal(0.0, 2.0);
        s.at(i, j) = v;
        s.at(j, i) = v;
      }
    EigenSystem es = sym_eigen_dense(s);
    check_eigen_invariants(es);
    // || S - V L V^T ||_F <= 1e-9 (1 + ||S||_F)
    double err = 0.0, snorm = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        double recon = 0.0;
        for (std::size_t k = 0; k < es.rank(); ++k)
          recon += es.eigenvalues[k] * es.eigenvectors[k][i] *
                   es.eigenvectors[k][j];
        err += (s.at(i, j) - recon) * (s.at(i, j) - recon);
        snorm += s.at(i, j) * s.at(i, j);
      }
    CHECK(std::sqrt(err) <= 1e-9 * (1.0 + std::sqrt(snorm)));
  }
}

TEST_CASE("gram path agrees with dense oracle on random matrices") {
  Rng rng(7);
  for (int iter = 0; iter < 100; ++iter) {
    const std::size_t r = 2 + rng.uniform_int(0, 6);  // up to 8 rows
    const std::size_t c = 2 + rng.uniform_int(0, 14);  // up to 16 cols
    RowMatrix x = random_matrix(rng, r, c);
    auto [mean, centered] = center_rows(x);
    const std::size_t denom = r - 1;

    EigenSystem gram = scatter_eigen(centered, denom);
    check_eigen_invariants(gram);
    EigenSystem dense = sym_eigen_dense(dense_scatter(centered, denom));

    // rank bound
    CHECK(gram.rank() <= std::min(r - 1, c));
    // trace identity: sum of all Gram eigenvalues == scatter trace
    double dense_trace = 0.0;
    for (double v : dense.eigenvalues) dense_trace += v;
    CHECK(gram.trace ==
          doctest::Approx(dense_trace).epsilon(1e-9).scale(1.0));
    // eigenvalue agreement on retained pairs
    for (std::size_t k = 0; k < gram.rank(); ++k)
      CHECK(gram.eigenvalues[k] ==
            doctest::Approx(dense.eigenvalues[k]).epsilon(1e-8).scale(1e-8));
    // eigenvector agreement via residual || S v - mu v ||
    RowMatrix s = dense_scatter(centered, denom);
    for (std::size_t k = 0; k < gram.rank(); ++k) {
      const Vec& v = gram.eigenvectors[k];
      double resid = 0.0;
      for (std::size_t i = 0; i < c; ++i) {
        double sv = 0.0;
        for (std::size_t j = 0; j < c; ++j) sv += s.at(i, j) * v[j];
        const double d = sv - gram.eigenvalues[k] * v[i];
        resid += d * d;
      }
      CHECK(std::sqrt(resid) <= 1e-8 * (1.0 + gram.trace));
    }
  }
}

TEST_SUITE_END();
