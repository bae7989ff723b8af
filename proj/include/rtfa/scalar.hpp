#pragma once

// Scalar ground types shared by every machine kind: exact arbitrary-precision
// rationals (GMP) for probabilistic machines, complex<double> for quantum ones.
// Text round-trips are lossless in both directions: rationals are emitted in
// lowest terms, doubles with 17 significant digits.

#include <gmpxx.h>

#include <cmath>
#include <complex>
#include <cstdio>
#include <cstdlib>
#include <stdexcept>
#include <string>
#include <string_view>
#include <type_traits>

namespace rtfa {

using Rat = mpq_class;
using Cplx = std::complex<double>;

template <typename T> struct real_of;
template <> struct real_of<Rat> { using type = Rat; };
template <> struct real_of<Cplx> { using type = double; };
template <typename T> using real_of_t = typename real_of<T>::type;

template <typename T>
inline constexpr bool is_rational_scalar = std::is_same_v<T, Rat>;

inline bool is_zero(const Rat &x) { return sgn(x) == 0; }
inline bool is_zero(const Cplx &x) { return x.real() == 0.0 && x.imag() == 0.0; }

inline Rat conj_of(const Rat &x) { return x; }
inline Cplx conj_of(const Cplx &x) { return std::conj(x); }

// Magnitude used for violation reports: exact |x| for rationals, |x| for complex.
inline Rat mag(const Rat &x) { return abs(x); }
inline double mag(const Cplx &x) { return std::abs(x); }

inline double rat_to_double(const Rat &x) { return mpq_get_d(x.get_mpq_t()); }

inline Rat rat(long num, long den = 1) {
  Rat q(num, den);
  q.canonicalize();
  return q;
}

// Accepts "p", "-p", or "p/q" with decimal digits only; no whitespace, no floats.
inline Rat parse_rational(std::string_view text) {
  auto fail = [&] {
    throw std::invalid_argument("invalid rational '" + std::string(text) +
                                "' (expected integer or p/q)");
  };
  if (text.empty()) fail();
  std::size_t i = 0;
  auto scan_int = [&] {
    if (i < text.size() && text[i] == '-') ++i;
    std::size_t start = i;
    while (i < text.size() && text[i] >= '0' && text[i] <= '9') ++i;
    if (i == start) fail();
  };
  scan_int();
  if (i < text.size()) {
    if (text[i] != '/') fail();
    ++i;
    scan_int();
    if (i != text.size()) fail();
  }
  Rat q;
  try {
    q = Rat(std::string(text), 10);
  } catch (const std::invalid_argument &) {
    fail();
  }
  if (q.get_den() == 0)
    throw std::invalid_argument("invalid rational '" + std::string(text) +
                                "' (zero denominator)");
  q.canonicalize();
  return q;
}

inline std::string format_rational(const Rat &x) {
  if (x.get_den() == 1) return x.get_num().get_str();
  return x.get_num().get_str() + "/" + x.get_den().get_str();
}

inline std::string format_double(double x) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

inline double parse_double(std::string_view text) {
  std::string s(text);
  if (s.empty()) throw std::invalid_argument("empty number");
  char *end = nullptr;
  double v = std::strtod(s.c_str(), &end);
  if (end != s.c_str() + s.size())
    throw std::invalid_argument("invalid number '" + s + "'");
  if (!std::isfinite(v))
    throw std::invalid_argument("non-finite number '" + s + "'");
  return v;
}

inline std::string format_complex(const Cplx &z) {
  return "(" + format_double(z.real()) + "," + format_double(z.imag()) + ")";
}

// Accepts "(re,im)"; also bare "x" or "p/q" as a pure real, which keeps
// hand-written machine files readable.
inline Cplx parse_complex(std::string_view text) {
  if (!text.empty() && text.front() == '(') {
    if (text.back() != ')')
      throw std::invalid_argument("invalid complex '" + std::string(text) + "'");
    std::string_view body = text.substr(1, text.size() - 2);
    auto comma = body.find(',');
    if (comma == std::string_view::npos)
      throw std::invalid_argument("invalid complex '" + std::string(text) + "'");
    return {parse_double(body.substr(0, comma)), parse_double(body.substr(comma + 1))};
  }
  if (text.find('/') != std::string_view::npos)
    return {rat_to_double(parse_rational(text)), 0.0};
  return {parse_double(text), 0.0};
}

} // namespace rtfa
