#include "fstta/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace fstta::linalg {

namespace {

constexpr int kMaxJacobiSweeps = 100;

double off_diagonal_norm(const RowMatrix& a) {
  double sum = 0.0;
  for (std::size_t p = 0; p < a.rows; ++p)
    for (std::size_t q = p + 1; q < a.cols; ++q)
      sum += a.at(p, q) * a.at(p, q);
  return std::sqrt(2.0 * sum);
}

double frobenius_norm(const RowMatrix& a) {
  double sum = 0.0;
  for (double v : a.data) sum += v * v;
  return std::sqrt(sum);
}

// Cyclic Jacobi on a symmetric n x n matrix. Returns eigenvalues (unsorted)
// in `vals` and accumulates rotations into the columns of `vecs`.
void jacobi_rotate_all(RowMatrix a, Vec& vals, RowMatrix& vecs) {
  const std::size_t n = a.rows;
  vecs = RowMatrix(n, n);
  for (std::size_t i = 0; i < n; ++i) vecs.at(i, i) = 1.0;

  const double stop = 1e-15 * std::max(frobenius_norm(a), 0.0);
  int sweep = 0;
  for (; sweep < kMaxJacobiSweeps; ++sweep) {
    if (off_diagonal_norm(a) <= stop) break;
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a.at(p, q);
        if (apq == 0.0) continue;
        const double app = a.at(p, p);
        const double aqq = a.at(q, q);
        const double theta = (aqq - app) / (2.0 * apq);
        double t;
        if (std::abs(theta) > 1e150) {
          t = 1.0 / (2.0 * theta);  // tan(phi) ~ 1/(2 theta) for huge theta
        } else if (theta >= 0.0) {
          t = 1.0 / (theta + std::sqrt(theta * theta + 1.0));
        } else {
          t = 1.0 / (theta - std::sqrt(theta * theta + 1.0));
        }
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;

        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a.at(k, p);
          const double akq = a.at(k, q);
          a.at(k, p) = c * akp - s * akq;
          a.at(k, q) = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a.at(p, k);
          const double aqk = a.at(q, k);
          a.at(p, k) = c * apk - s * aqk;
          a.at(q, k) = s * apk + c * aqk;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = vecs.at(k, p);
          const double vkq = vecs.at(k, q);
          vecs.at(k, p) = c * vkp - s * vkq;
          vecs.at(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }
  if (off_diagonal_norm(a) > stop && sweep == kMaxJacobiSweeps)
    throw NumericalError("jacobi eigen iteration did not converge within " +
                         std::to_string(kMaxJacobiSweeps) + " sweeps");

  vals.resize(n);
  for (std::size_t i = 0; i < n; ++i) vals[i] = a.at(i, i);
}

// Deterministic sign: largest-magnitude entry made positive.
void canonicalize_sign(Vec& v) {
  std::size_t arg = 0;
  double best = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (std::abs(v[i]) > best) {
      best = std::abs(v[i]);
      arg = i;
    }
  }
  if (best > 0.0 && v[arg] < 0.0)
    for (double& x : v) x = -x;
}

std::vector<std::size_t> descending_order(const Vec& vals) {
  std::vector<std::size_t> idx(vals.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    return vals[a] > vals[b];
  });
  return idx;
}

}  // namespace

RowMatrix RowMatrix::from_rows(const std::vector<Vec>& row_list) {
  RowMatrix m;
  if (row_list.empty()) return m;
  m.rows = row_list.size();
  m.cols = row_list.front().size();
  m.data.reserve(m.rows * m.cols);
  for (const Vec& r : row_list) {
    if (r.size() != m.cols)
      throw ValidityError("from_rows: ragged row lengths");
    m.data.insert(m.data.end(), r.begin(), r.end());
  }
  return m;
}

bool all_finite(std::span<const double> v) {
  for (double x : v)
    if (!std::isfinite(x)) return false;
  return true;
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm2(std::span<const double> v) { return std::sqrt(dot(v, v)); }

void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

void scale_inplace(std::span<double> v, double alpha) {
  for (double& x : v) x *= alpha;
}

std::pair<Vec, RowMatrix> center_rows(const RowMatrix& x) {
  if (x.rows < 1 || x.cols < 1)
    throw ValidityError("center_rows: empty matrix");
  if (!all_finite(x.data))
    throw ValidityError("center_rows: non-finite input");

  Vec mean(x.cols, 0.0);
  for (std::size_t r = 0; r < x.rows; ++r)
    for (std::size_t c = 0; c < x.cols; ++c) mean[c] += x.at(r, c);
  for (double& m : mean) m /= static_cast<double>(x.rows);

  RowMatrix centered(x.rows, x.cols);
  for (std::size_t r = 0; r < x.rows; ++r)
    for (std::size_t c = 0; c < x.cols; ++c)
      centered.at(r, c) = x.at(r, c) - mean[c];
  return {std::move(mean), std::move(centered)};
}

EigenSystem scatter_eigen(const RowMatrix& centered, std::size_t denom,
                          double tol) {
  if (denom < 1) throw ValidityError("scatter_eigen: denom must be >= 1");
  if (tol < 0.0) throw ValidityError("scatter_eigen: negative tolerance");
  if (!all_finite(centered.data))
    throw ValidityError("scatter_eigen: non-finite input");

  const std::size_t r = centered.rows;
  RowMatrix gram(r, r);
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t j = i; j < r; ++j) {
      const double g = dot(centered.row(i), centered.row(j)) /
                       static_cast<double>(denom);
      gram.at(i, j) = g;
      gram.at(j, i) = g;
    }
  }

  Vec vals;
  RowMatrix vecs;
  jacobi_rotate_all(gram, vals, vecs);

  EigenSystem out;
  out.trace = std::accumulate(vals.begin(), vals.end(), 0.0);
  const double threshold = tol * (out.trace + kTraceFloor);

  for (std::size_t k : descending_order(vals)) {
    const double mu = vals[k];
    if (!(mu > threshold)) continue;
    // Map the Gram eigenvector w back to column space: v = centered^T w,
    // with ||centered^T w||^2 = denom * mu.
    Vec v(centered.cols, 0.0);
    for (std::size_t i = 0; i < r; ++i)
      axpy(vecs.at(i, k), centered.row(i), v);
    const double len = norm2(v);
    if (len <= 0.0) continue;  // fully annihilated; treat as null direction
    scale_inplace(v, 1.0 / len);
    canonicalize_sign(v);
    out.eigenvalues.push_back(mu);
    out.eigenvectors.push_back(std::move(v));
  }
  return out;
}

EigenSystem sym_eigen_dense(const RowMatrix& s) {
  if (s.rows != s.cols || s.rows < 1)
    throw ValidityError("sym_eigen_dense: matrix must be square");
  if (!all_finite(s.data))
    throw ValidityError("sym_eigen_dense: non-finite input");
  double max_abs = 0.0;
  for (double v : s.data) max_abs = std::max(max_abs, std::abs(v));
  for (std::size_t i = 0; i < s.rows; ++i)
    for (std::size_t j = i + 1; j < s.cols; ++j)
      if (std::abs(s.at(i, j) - s.at(j, i)) > 1e-10 * std::max(1.0, max_abs))
        throw ValidityError("sym_eigen_dense: matrix is not symmetric");

  Vec vals;
  RowMatrix vecs;
  jacobi_rotate_all(s, vals, vecs);

  EigenSystem out;
  out.trace = std::accumulate(vals.begin(), vals.end(), 0.0);
  for (std::size_t k : descending_order(vals)) {
    Vec v(s.rows);
    for (std::size_t i = 0; i < s.rows; ++i) v[i] = vecs.at(i, k);
    canonicalize_sign(v);
    out.eigenvalues.push_back(vals[k]);
    out.eigenvectors.push_back(std::move(v));
  }
  return out;
}

void check_eigen_invariants(const EigenSystem& es) {
  for (std::size_t i = 0; i + 1 < es.eigenvalues.size(); ++i)
    if (es.eigenvalues[i] < es.eigenvalues[i + 1])
      throw NumericalError("eigenvalues not sorted descending");
  for (std::size_t i = 0; i < es.eigenvectors.size(); ++i) {
    if (std::abs(norm2(es.eigenvectors[i]) - 1.0) > 1e-10)
      throw NumericalError("eigenvector not unit length");
    for (std::size_t j = i + 1; j < es.eigenvectors.size(); ++j)
      if (std::abs(dot(es.eigenvectors[i], es.eigenvectors[j])) > 1e-8)
        throw NumericalError("eigenvectors not orthogonal");
  }
}

}  // namespace fstta::linalg
