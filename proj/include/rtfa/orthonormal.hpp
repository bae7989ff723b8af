#pragma once

// Shared-scale orthonormal column extension. Given square matrices A_s, build
// B_s (upper triangular, unit diagonal) cancelling all pairwise column inner
// products of the stack [A_s; B_s], take l as the largest stacked column norm
// across the whole family, and pad with diagonal C_s so every column of
// (1/l)[A_s; B_s; C_s] is unit length. The same l must serve every member --
// that is what lets one global scale factor survive a product of steps.

#include "rtfa/matrix.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

namespace rtfa {

struct OrthonormalExtension {
  std::vector<Matrix<Cplx>> b;
  std::vector<Matrix<Cplx>> c;
  double l = 0;
};

inline OrthonormalExtension orthonormal_extend(const std::vector<Matrix<Cplx>> &family) {
  if (family.empty()) throw std::invalid_argument("orthonormal_extend: empty family");
  int m = family.front().rows();
  for (const auto &a : family)
    if (a.rows() != m || a.cols() != m)
      throw std::invalid_argument("orthonormal_extend: members must be square with equal size");

  OrthonormalExtension ext;
  std::vector<std::vector<double>> norm_sq(family.size(), std::vector<double>(m, 0.0));
  double max_norm_sq = 0;

  for (std::size_t s = 0; s < family.size(); ++s) {
    const Matrix<Cplx> &a = family[s];
    Matrix<Cplx> b(m, m);
    for (int i = 0; i < m; ++i) b(i, i) = 1.0;
    // Solve for b(i,j) in lexicographic (i,j) order; each choice zeroes the
    // inner product of stacked columns i and j.
    for (int i = 0; i < m; ++i)
      for (int j = i + 1; j < m; ++j) {
        Cplx s_ij{};
        for (int r = 0; r < m; ++r) s_ij += std::conj(a(r, i)) * a(r, j);
        for (int k = 0; k < i; ++k) s_ij += std::conj(b(k, i)) * b(k, j);
        b(i, j) = -s_ij;
      }
    for (int j = 0; j < m; ++j) {
      double ns = 0;
      for (int r = 0; r < m; ++r) ns += std::norm(a(r, j));
      for (int k = 0; k < m; ++k) ns += std::norm(b(k, j));
      norm_sq[s][j] = ns;
      if (ns > max_norm_sq) max_norm_sq = ns;
    }
    ext.b.push_back(std::move(b));
  }

  ext.l = std::sqrt(max_norm_sq);
  for (std::size_t s = 0; s < family.size(); ++s) {
    Matrix<Cplx> c(m, m);
    for (int j = 0; j < m; ++j) {
      double gap = max_norm_sq - norm_sq[s][j];
      c(j, j) = std::sqrt(gap > 0 ? gap : 0.0);
    }
    ext.c.push_back(std::move(c));
  }
  return ext;
}

// (1/l) [A; B; C], the isometry whose columns the extension made orthonormal.
inline Matrix<Cplx> stack_scaled(const Matrix<Cplx> &a, const Matrix<Cplx> &b,
                                 const Matrix<Cplx> &c, double l) {
  int m = a.rows();
  Matrix<Cplx> s(3 * m, m);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) {
      s(i, j) = a(i, j) / l;
      s(m + i, j) = b(i, j) / l;
      s(2 * m + i, j) = c(i, j) / l;
    }
  return s;
}

// Completes an isometry (orthonormal columns) to a full unitary. The added
// columns come from scanning standard basis vectors in index order and keeping
// whichever survive orthogonalization against everything accepted so far, so
// the output is deterministic. The isometry's own columns are copied verbatim.
inline Matrix<Cplx> unitary_complete(const Matrix<Cplx> &iso, double tol = kDefaultSolveTol) {
  int n = iso.rows(), k = iso.cols();
  if (k > n) throw std::invalid_argument("unitary_complete: more columns than rows");
  {
    double dev = max_abs_diff(mul(dagger(iso), iso), Matrix<Cplx>::identity(k));
    if (dev > tol)
      throw std::invalid_argument("unitary_complete: input columns are not orthonormal (deviation " +
                                  format_double(dev) + ")");
  }

  std::vector<std::vector<Cplx>> cols;
  cols.reserve(n);
  for (int j = 0; j < k; ++j) {
    std::vector<Cplx> c(n);
    for (int i = 0; i < n; ++i) c[i] = iso(i, j);
    cols.push_back(std::move(c));
  }
  for (int e = 0; e < n && int(cols.size()) < n; ++e) {
    std::vector<Cplx> r(n, Cplx{});
    r[e] = 1.0;
    for (int pass = 0; pass < 2; ++pass) // re-orthogonalize once for stability
      for (const auto &c : cols) {
        Cplx coef = inner(c, r);
        for (int i = 0; i < n; ++i) r[i] -= coef * c[i];
      }
    double nr = std::sqrt(norm_sq(r));
    if (nr <= tol) continue;
    for (int i = 0; i < n; ++i) r[i] /= nr;
    cols.push_back(std::move(r));
  }
  if (int(cols.size()) < n)
    throw std::runtime_error("unitary_complete: degenerate input, completion failed");

  Matrix<Cplx> u(n, n);
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i) u(i, j) = cols[j][i];
  {
    double dev = max_abs_diff(mul(dagger(u), u), Matrix<Cplx>::identity(n));
    if (dev > 10 * tol)
      throw std::runtime_error("unitary_complete: completion lost orthonormality (deviation " +
                               format_double(dev) + ")");
  }
  return u;
}

} // namespace rtfa
