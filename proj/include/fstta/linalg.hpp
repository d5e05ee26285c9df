#pragma once

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "fstta/errors.hpp"

namespace fstta::linalg {

using Vec = std::vector<double>;

// Dense row-major matrix. Small by construction: every matrix this library
// ever decomposes has at most a handful of rows.
struct RowMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;  // row-major, rows*cols entries

  RowMatrix() = default;
  RowMatrix(std::size_t r, std::size_t c)
      : rows(r), cols(c), data(r * c, 0.0) {}

  static RowMatrix from_rows(const std::vector<Vec>& row_list);

  double& at(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

  std::span<const double> row(std::size_t r) const {
    return {data.data() + r * cols, cols};
  }
  std::span<double> row(std::size_t r) {
    return {data.data() + r * cols, cols};
  }
};

// Retained eigenpairs of a symmetric matrix, eigenvalues descending,
// eigenvectors orthonormal. `trace` carries the trace of the decomposed
// matrix (the sum of *all* its eigenvalues, including any that were below
// the retention threshold).
struct EigenSystem {
  std::vector<double> eigenvalues;
  std::vector<Vec> eigenvectors;
  double trace = 0.0;

  std::size_t rank() const { return eigenvalues.size(); }
};

inline constexpr double kDefaultEigTol = 1e-12;
// Additive floor inside the retention threshold tol*(trace + floor) so a
// zero-trace scatter still yields an empty (not all-pass) eigensystem.
inline constexpr double kTraceFloor = 1e-300;

bool all_finite(std::span<const double> v);

double dot(std::span<const double> a, std::span<const double> b);
double norm2(std::span<const double> v);
// y += alpha * x
void axpy(double alpha, std::span<const double> x, std::span<double> y);
void scale_inplace(std::span<double> v, double alpha);

// Column-wise mean and the matrix with that mean removed from every row.
// Rejects non-finite input.
std::pair<Vec, RowMatrix> center_rows(const RowMatrix& x);

// Eigenpairs of (1/denom) * centered^T * centered with eigenvalue above
// tol*(trace + floor), computed through the rows x rows Gram matrix and
// mapped back to column space. `trace` in the result is the full scatter
// trace (sum of all Gram eigenvalues). Throws NumericalError if the
// underlying Jacobi sweep budget is exhausted.
EigenSystem scatter_eigen(const RowMatrix& centered, std::size_t denom,
                          double tol = kDefaultEigTol);

// Full eigendecomposition of a square symmetric matrix by cyclic Jacobi
// rotations. Serves as the independent dense oracle for the Gram path.
EigenSystem sym_eigen_dense(const RowMatrix& s);

// Throws NumericalError unless eigenvalues are sorted descending and the
// eigenvectors are orthonormal within tolerance.
void check_eigen_invariants(const EigenSystem& es);

}  // namespace fstta::linalg
