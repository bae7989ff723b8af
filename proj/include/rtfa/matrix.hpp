#pragma once

// Dense row-major matrices over either scalar backend, plus the handful of
// kernels everything else is built from (product, Kronecker product, adjoint).
// Zero entries are skipped during products; machine transition matrices are
// mostly sparse and exact-rational multiplies are not free.

#include "rtfa/scalar.hpp"

#include <cstddef>
#include <stdexcept>
#include <vector>

namespace rtfa {

template <typename T> class Matrix {
public:
  Matrix() = default;
  Matrix(int rows, int cols) : rows_(rows), cols_(cols), d_(std::size_t(rows) * cols) {
    if (rows < 0 || cols < 0) throw std::invalid_argument("negative matrix dimension");
  }

  static Matrix identity(int n) {
    Matrix m(n, n);
    for (int i = 0; i < n; ++i) m(i, i) = T(1);
    return m;
  }

  int rows() const { return rows_; }
  int cols() const { return cols_; }

  T &operator()(int i, int j) { return d_[std::size_t(i) * cols_ + j]; }
  const T &operator()(int i, int j) const { return d_[std::size_t(i) * cols_ + j]; }

  friend bool operator==(const Matrix &a, const Matrix &b) {
    return a.rows_ == b.rows_ && a.cols_ == b.cols_ && a.d_ == b.d_;
  }

private:
  int rows_ = 0, cols_ = 0;
  std::vector<T> d_;
};

template <typename T>
std::vector<T> apply(const Matrix<T> &a, const std::vector<T> &v) {
  if (a.cols() != int(v.size())) throw std::invalid_argument("matrix/vector size mismatch");
  std::vector<T> out(a.rows(), T{});
  for (int j = 0; j < a.cols(); ++j) {
    const T &x = v[j];
    if (is_zero(x)) continue;
    for (int i = 0; i < a.rows(); ++i) {
      const T &e = a(i, j);
      if (is_zero(e)) continue;
      out[i] += e * x;
    }
  }
  return out;
}

template <typename T>
Matrix<T> mul(const Matrix<T> &a, const Matrix<T> &b) {
  if (a.cols() != b.rows()) throw std::invalid_argument("matrix product size mismatch");
  Matrix<T> out(a.rows(), b.cols());
  for (int i = 0; i < a.rows(); ++i)
    for (int k = 0; k < a.cols(); ++k) {
      const T &e = a(i, k);
      if (is_zero(e)) continue;
      for (int j = 0; j < b.cols(); ++j) {
        const T &f = b(k, j);
        if (is_zero(f)) continue;
        out(i, j) += e * f;
      }
    }
  return out;
}

template <typename T>
Matrix<T> dagger(const Matrix<T> &a) {
  Matrix<T> out(a.cols(), a.rows());
  for (int i = 0; i < a.rows(); ++i)
    for (int j = 0; j < a.cols(); ++j) out(j, i) = conj_of(a(i, j));
  return out;
}

// kron(A, B)[(i1*B.rows+i2),(j1*B.cols+j2)] = A(i1,j1) * B(i2,j2).
// Product states compose as (i-1)*n2 + j in 1-based state numbering.
template <typename T>
Matrix<T> kron(const Matrix<T> &a, const Matrix<T> &b) {
  Matrix<T> out(a.rows() * b.rows(), a.cols() * b.cols());
  for (int i1 = 0; i1 < a.rows(); ++i1)
    for (int j1 = 0; j1 < a.cols(); ++j1) {
      const T &e = a(i1, j1);
      if (is_zero(e)) continue;
      for (int i2 = 0; i2 < b.rows(); ++i2)
        for (int j2 = 0; j2 < b.cols(); ++j2) {
          const T &f = b(i2, j2);
          if (is_zero(f)) continue;
          out(i1 * b.rows() + i2, j1 * b.cols() + j2) = e * f;
        }
    }
  return out;
}

template <typename T>
real_of_t<T> max_abs_diff(const Matrix<T> &a, const Matrix<T> &b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw std::invalid_argument("matrix size mismatch");
  real_of_t<T> worst{};
  for (int i = 0; i < a.rows(); ++i)
    for (int j = 0; j < a.cols(); ++j) {
      real_of_t<T> v = mag(T(a(i, j) - b(i, j)));
      if (v > worst) worst = v;
    }
  return worst;
}

// Conjugate-linear in the first argument.
inline Cplx inner(const std::vector<Cplx> &u, const std::vector<Cplx> &v) {
  Cplx s{};
  for (std::size_t k = 0; k < u.size(); ++k) s += std::conj(u[k]) * v[k];
  return s;
}

inline double norm_sq(const std::vector<Cplx> &u) {
  double s = 0;
  for (const Cplx &x : u) s += std::norm(x);
  return s;
}

} // namespace rtfa
