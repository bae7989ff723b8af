#pragma once

// Shared test helpers: word enumeration in length-then-lex order and
// deterministic random machine generators. The generators use a fixed
// algorithm on top of mt19937_64 (no std distributions) so the same seed
// produces the same machine everywhere.

#include "rtfa/rtfa.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <random>
#include <string>
#include <vector>

namespace testsup {

using namespace rtfa;

template <typename F> void for_each_word(const Alphabet &a, int max_len, F &&f) {
  std::vector<std::string> layer{""};
  for (int len = 0; len <= max_len; ++len) {
    std::vector<std::string> next;
    for (const std::string &w : layer) {
      f(w);
      if (len < max_len)
        for (char c : a.symbols) next.push_back(w + c);
    }
    layer = std::move(next);
  }
}

inline std::vector<std::string> all_words(const Alphabet &a, int max_len) {
  std::vector<std::string> out;
  for_each_word(a, max_len, [&](const std::string &w) { out.push_back(w); });
  return out;
}

inline double urand(std::mt19937_64 &eng) { return double(eng() >> 11) * 0x1.0p-53; }

// Column-stochastic rational matrix with denominator-64 entries.
inline Matrix<Rat> random_stochastic(int n, std::mt19937_64 &eng) {
  Matrix<Rat> m(n, n);
  for (int j = 0; j < n; ++j) {
    std::vector<long> parts(std::size_t(n), 0);
    long left = 64;
    for (int i = 0; i + 1 < n; ++i) {
      long take = long(urand(eng) * double(left + 1));
      if (take > left) take = left;
      parts[std::size_t(i)] = take;
      left -= take;
    }
    parts[std::size_t(n - 1)] = left;
    for (int i = 0; i < n; ++i) m(i, j) = rat(parts[std::size_t(i)], 64);
  }
  return m;
}

inline Matrix<Cplx> random_unitary(int n, std::mt19937_64 &eng) {
  // Gram-Schmidt on a random complex matrix, two passes per column.
  std::vector<std::vector<Cplx>> cols;
  for (int j = 0; j < n; ++j) {
    std::vector<Cplx> c(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) c[std::size_t(i)] = {urand(eng) * 2 - 1, urand(eng) * 2 - 1};
    for (int pass = 0; pass < 2; ++pass)
      for (const auto &prev : cols) {
        Cplx coef = inner(prev, c);
        for (int i = 0; i < n; ++i) c[std::size_t(i)] -= coef * prev[std::size_t(i)];
      }
    double nr = std::sqrt(norm_sq(c));
    REQUIRE(nr > 1e-6); // random matrices are never this degenerate
    for (auto &x : c) x /= nr;
    cols.push_back(std::move(c));
  }
  Matrix<Cplx> u(n, n);
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i) u(i, j) = cols[std::size_t(j)][std::size_t(i)];
  return u;
}

// A trace-preserving collection of `count` Kraus operators: slice the first n
// columns of a random (count*n) x (count*n) unitary into row blocks.
inline std::vector<Matrix<Cplx>> random_kraus(int n, int count, std::mt19937_64 &eng) {
  Matrix<Cplx> u = random_unitary(count * n, eng);
  std::vector<Matrix<Cplx>> ops;
  for (int b = 0; b < count; ++b) {
    Matrix<Cplx> e(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) e(i, j) = u(b * n + i, j);
    ops.push_back(std::move(e));
  }
  return ops;
}

inline RestartQfa random_restart_qfa(int n, std::uint64_t seed) {
  REQUIRE(n >= 2);
  std::mt19937_64 eng(seed);
  QfaMachine base;
  base.states = n;
  base.alphabet = Alphabet("ab");
  base.kraus.cent = random_kraus(n, 2, eng);
  base.kraus.sigma.push_back(random_kraus(n, 2, eng));
  base.kraus.sigma.push_back(random_kraus(n, 2, eng));
  base.kraus.dollar = random_kraus(n, 2, eng);
  base.accept = {1};
  return RestartQfa{std::move(base), {2}};
}

// Random measured-every-step machine: state 1 continues, 2 accepts, 3 rejects,
// any further states restart.
inline KwqfaMachine random_kwqfa(int n, std::uint64_t seed) {
  REQUIRE(n >= 3);
  std::mt19937_64 eng(seed);
  KwqfaMachine m;
  m.states = n;
  m.alphabet = Alphabet("ab");
  m.unitaries.cent = random_unitary(n, eng);
  m.unitaries.sigma.push_back(random_unitary(n, eng));
  m.unitaries.sigma.push_back(random_unitary(n, eng));
  m.unitaries.dollar = random_unitary(n, eng);
  m.accept = {2};
  m.reject = {3};
  for (int q = 4; q <= n; ++q) m.restart.insert(q);
  return m;
}

inline Rat rat_pow(Rat base, int e) {
  Rat out = 1;
  for (int i = 0; i < e; ++i) out *= base;
  return out;
}

} // namespace testsup
