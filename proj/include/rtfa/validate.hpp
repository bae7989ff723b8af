#pragma once

// Structural validation for transition-matrix families. Column-stochastic
// checks on rationals are exact and demand tol == 0; the float checks report
// the worst max-norm violation found.

#include "rtfa/matrix.hpp"

#include <stdexcept>
#include <vector>

namespace rtfa {

inline constexpr double kDefaultValidationTol = 1e-9;
inline constexpr double kDefaultSolveTol = 1e-12;

enum class FamilyKind { column_stochastic, unitary, admissible };

template <typename T> struct ValidationEntry {
  real_of_t<T> violation{};
  bool pass = false;
};

template <typename T> struct ValidationReport {
  std::vector<ValidationEntry<T>> entries; // per matrix; one entry for admissible
  bool all_pass = false;
};

namespace detail {

template <typename T>
real_of_t<T> stochastic_violation(const Matrix<T> &m) {
  real_of_t<T> worst{};
  for (int j = 0; j < m.cols(); ++j) {
    T sum{};
    for (int i = 0; i < m.rows(); ++i) {
      const T &e = m(i, j);
      sum += e;
      if constexpr (is_rational_scalar<T>) {
        if (sgn(e) < 0 && -e > worst) worst = -e;
      } else {
        // Probabilistic entries must be real and nonnegative.
        double bad = std::abs(e.imag());
        if (e.real() < 0 && -e.real() > bad) bad = -e.real();
        if (bad > worst) worst = bad;
      }
    }
    real_of_t<T> dev = mag(T(sum - T(1)));
    if (dev > worst) worst = dev;
  }
  return worst;
}

template <typename T>
real_of_t<T> unitary_violation(const Matrix<T> &m) {
  if (m.rows() != m.cols())
    throw std::invalid_argument("unitarity check requires a square matrix");
  return max_abs_diff(mul(dagger(m), m), Matrix<T>::identity(m.cols()));
}

} // namespace detail

template <typename T>
ValidationReport<T> validate_family(FamilyKind kind, const std::vector<Matrix<T>> &family,
                                    real_of_t<T> tol) {
  if (family.empty()) throw std::invalid_argument("validate_family: empty matrix family");
  if constexpr (is_rational_scalar<T>) {
    if (sgn(tol) != 0)
      throw std::invalid_argument("validate_family: rational checks are exact, tol must be 0");
  } else {
    if (tol < 0) throw std::invalid_argument("validate_family: negative tolerance");
  }

  ValidationReport<T> report;
  report.all_pass = true;
  auto push = [&](real_of_t<T> violation) {
    bool pass = !(violation > tol);
    report.entries.push_back({violation, pass});
    if (!pass) report.all_pass = false;
  };

  switch (kind) {
  case FamilyKind::column_stochastic:
    for (const auto &m : family) push(detail::stochastic_violation(m));
    break;
  case FamilyKind::unitary:
    for (const auto &m : family) push(detail::unitary_violation(m));
    break;
  case FamilyKind::admissible: {
    // The whole sequence is one Kraus collection: sum of E^dagger E must be I.
    int dim = family.front().cols();
    Matrix<T> acc(dim, dim);
    for (const auto &m : family) {
      if (m.cols() != dim || m.rows() != family.front().rows())
        throw std::invalid_argument("admissible check requires uniform dimensions");
      Matrix<T> p = mul(dagger(m), m);
      for (int i = 0; i < dim; ++i)
        for (int j = 0; j < dim; ++j) acc(i, j) += p(i, j);
    }
    push(max_abs_diff(acc, Matrix<T>::identity(dim)));
    break;
  }
  }
  return report;
}

} // namespace rtfa
