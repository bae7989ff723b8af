#pragma once

// Ready-made machines over the alphabet {a, b}:
//
//   build_leq      restart machine for "same number of a's and b's", any error
//                  bound below 1/2
//   build_leqeq    postselection machine for "first symbol a and remainder
//                  balanced, or first symbol b and remainder unbalanced"
//   build_lpal     measured-every-step machine whose reject mass is nonzero
//                  exactly on non-palindromes (and bitwise zero on palindromes)
//   build_lpal_conqal  plain quantum machine accepting non-palindromes with
//                  positive probability, i.e. cutpoint zero for the complement
//
// plus a handful of deterministic automata used as sources for the zero-error
// postselection embedding.

#include "rtfa/orthonormal.hpp"
#include "rtfa/transforms.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace rtfa {

// ---------------------------------------------------------------------------
// Balanced strings. One branch carries the accept hypothesis and decays by
// alpha per symbol; two reject branches decay by alpha^2 per a (resp. per b).
// With x a's and y b's a round ends with
//   p_accept = rho * alpha^(x+y)
//   p_reject = (1-rho)/2 * (alpha^(2x) + alpha^(2y))
// so balanced strings give the ratio (1-rho)/rho exactly and unbalanced ones
// at most 2 rho alpha / (1-rho); alpha is chosen to push that below the bound.

struct LeqParams {
  Rat rho, alpha;
};

inline LeqParams leq_params_for(const Rat &eps) {
  if (sgn(eps) <= 0 || eps >= Rat(1, 2))
    throw std::invalid_argument("error bound must lie in (0, 1/2)");
  Rat rho = 1 - eps;
  Rat limit = eps * eps / (2 * (1 - eps) * (1 - eps));
  Rat alpha(1, 2);
  while (alpha > limit) alpha /= 2;
  return {rho, alpha};
}

inline RestartPfa build_leq(const LeqParams &p) {
  // 1 start, 2 accept-track, 3/4 reject-tracks, 5 dead, 6 accept, 7 reject,
  // 8 restart.
  const Rat &rho = p.rho, &alpha = p.alpha;
  auto with_columns =
      [&](std::initializer_list<std::pair<int, std::vector<std::pair<int, Rat>>>> cols) {
        Matrix<Rat> m = Matrix<Rat>::identity(8);
        for (const auto &[col, entries] : cols) {
          for (int i = 0; i < 8; ++i) m(i, col - 1) = 0;
          for (const auto &[row, val] : entries) m(row - 1, col - 1) = val;
        }
        return m;
      };

  PfaMachine base;
  base.states = 8;
  base.alphabet = Alphabet("ab");
  base.transitions.cent =
      with_columns({{1, {{2, rho}, {3, (1 - rho) / 2}, {4, (1 - rho) / 2}}}});
  base.transitions.sigma.push_back(with_columns({
      {2, {{2, alpha}, {5, 1 - alpha}}},
      {3, {{3, alpha * alpha}, {5, 1 - alpha * alpha}}},
  }));
  base.transitions.sigma.push_back(with_columns({
      {2, {{2, alpha}, {5, 1 - alpha}}},
      {4, {{4, alpha * alpha}, {5, 1 - alpha * alpha}}},
  }));
  base.transitions.dollar = with_columns({
      {2, {{6, Rat(1)}}},
      {3, {{7, Rat(1)}}},
      {4, {{7, Rat(1)}}},
      {5, {{8, Rat(1)}}},
  });
  base.accept = {6};
  return RestartPfa{std::move(base), {7}, {8}, HaltTiming::at_end};
}

inline RestartPfa build_leq(const Rat &eps) { return build_leq(leq_params_for(eps)); }

inline PostMachine build_leq_post(const Rat &eps) { return restart_to_post(build_leq(eps)); }

inline bool leq_language(const std::string &w) {
  long a = 0, b = 0;
  for (char c : w) (c == 'a' ? a : b) += 1;
  return a == b;
}

// ---------------------------------------------------------------------------
// Dispatch language: the first symbol picks which machine judges the rest.
// Two copies of the balanced-string machine run as postselection blocks, the
// second with its postselection roles swapped; the empty word is rejected with
// certainty by the dollar step.

inline PostMachine build_leqeq(const Rat &eps) {
  RestartPfa leq = build_leq(eps);
  const auto &t = leq.base.transitions;
  int nb = leq.base.states; // 8; copies sit at offsets 1 and 1 + nb

  auto combined = [&](const Matrix<Rat> &block, const Matrix<Rat> *dispatch, int dispatch_off) {
    Matrix<Rat> m(2 * nb + 1, 2 * nb + 1);
    for (int i = 0; i < nb; ++i)
      for (int j = 0; j < nb; ++j) {
        m(1 + i, 1 + j) = block(i, j);
        m(1 + nb + i, 1 + nb + j) = block(i, j);
      }
    if (dispatch) // column 1: feed the chosen copy as its cent step would
      for (int i = 0; i < nb; ++i) m(dispatch_off + i, 0) = (*dispatch)(i, 0);
    else
      m(0, 0) = 1;
    return m;
  };

  PfaMachine base;
  base.states = 2 * nb + 1;
  base.alphabet = leq.base.alphabet;
  base.transitions.cent = combined(Matrix<Rat>::identity(nb), nullptr, 0);
  base.transitions.sigma.push_back(combined(t.sigma[0], &t.cent, 1));
  base.transitions.sigma.push_back(combined(t.sigma[1], &t.cent, 1 + nb));
  base.transitions.dollar = combined(t.dollar, nullptr, 0);
  // Empty word: the dispatch state runs into the first copy's reject state.
  base.transitions.dollar(0, 0) = 0;
  base.transitions.dollar(1 + 7 - 1, 0) = 1;

  int acc = *leq.base.accept.begin(), rej = *leq.reject.begin();
  return PostMachine{std::move(base),
                     {1 + acc, 1 + nb + rej},  // copy 1 accepts, copy 2 inverted
                     {1 + rej, 1 + nb + acc}};
}

inline bool leqeq_language(const std::string &w) {
  if (w.empty()) return false;
  std::string rest = w.substr(1);
  return w[0] == 'a' ? leq_language(rest) : !leq_language(rest);
}

// ---------------------------------------------------------------------------
// Palindromes. A six-track linear system reads the word as a base-4 number
// twice, little-endian (x) and big-endian (y), using digits 1 and 2:
//
//   tracks: u1 (4^k), x, u2 (constant 1), y, accept, reject
//   sigma:  u1 <- 4 u1,  x <- c u1 + x,  y <- c u2 + 4 y   (c_a = 1, c_b = 2)
//   dollar: accept <- u2 / 2,  reject <- x - y
//
// The word is a palindrome exactly when x = y. The shared scale is forced up
// from its natural value to the next power of two so that every amplitude a
// round can produce is a dyadic rational with a small integer numerator --
// exact in doubles -- making "reject mass == 0" a bitwise test.

struct LpalTemplate {
  Alphabet alphabet;
  std::vector<Matrix<Cplx>> family; // cent, a, b, dollar over six tracks
  double scale = 0;                 // forced power-of-two column bound
};

inline LpalTemplate lpal_template() {
  LpalTemplate t;
  t.alphabet = Alphabet("ab");
  Matrix<Cplx> cent(6, 6);
  cent(0, 0) = 1.0; // u1 = 1
  cent(2, 0) = 1.0; // u2 = 1
  auto step = [&](double c) {
    Matrix<Cplx> m(6, 6);
    m(0, 0) = 4.0;            // u1 *= 4
    m(1, 0) = c; m(1, 1) = 1; // x += c * u1
    m(2, 2) = 1.0;            // u2 unchanged
    m(3, 2) = c; m(3, 3) = 4; // y = c * u2 + 4 y
    return m;
  };
  Matrix<Cplx> dollar(6, 6);
  dollar(4, 2) = 0.5;                      // accept amplitude mu * u2
  dollar(5, 1) = 1.0; dollar(5, 3) = -1.0; // reject amplitude x - y
  t.family = {cent, step(1.0), step(2.0), dollar};

  OrthonormalExtension natural = orthonormal_extend(t.family);
  t.scale = 1.0;
  while (t.scale < natural.l) t.scale *= 2;
  return t;
}

namespace detail {

// Orthonormal extension with a caller-chosen scale (at least the natural one):
// reuse the cancellation rows, then widen the diagonal padding to the new l.
inline OrthonormalExtension rescaled_extension(const std::vector<Matrix<Cplx>> &family,
                                               double l) {
  OrthonormalExtension ext = orthonormal_extend(family);
  if (l < ext.l)
    throw std::invalid_argument("requested scale is below the natural column bound");
  for (std::size_t s = 0; s < family.size(); ++s) {
    int m = family[s].rows();
    for (int j = 0; j < m; ++j) {
      double ns = 0;
      for (int r = 0; r < m; ++r) ns += std::norm(family[s](r, j));
      for (int k = 0; k < m; ++k) ns += std::norm(ext.b[s](k, j));
      ext.c[s](j, j) = std::sqrt(l * l - ns);
    }
  }
  ext.l = l;
  return ext;
}

} // namespace detail

inline KwqfaMachine build_lpal() {
  LpalTemplate t = lpal_template();
  OrthonormalExtension ext = detail::rescaled_extension(t.family, t.scale);

  std::vector<Matrix<Cplx>> unitaries;
  for (std::size_t s = 0; s < t.family.size(); ++s)
    unitaries.push_back(unitary_complete(stack_scaled(t.family[s], ext.b[s], ext.c[s], ext.l)));

  KwqfaMachine m;
  m.states = 18;
  m.alphabet = t.alphabet;
  m.unitaries.cent = unitaries[0];
  m.unitaries.sigma = {unitaries[1], unitaries[2]};
  m.unitaries.dollar = unitaries[3];
  m.accept = {5};
  m.reject = {6};
  for (int q = 7; q <= 18; ++q) m.restart.insert(q);
  return m;
}

inline bool lpal_language(const std::string &w) {
  return std::equal(w.begin(), w.begin() + long(w.size()) / 2, w.rbegin());
}

// Same six tracks packaged as a plain quantum machine: one Kraus branch keeps
// the computation alive scaled by 1/l, the rest of each column's weight moves
// into dead states. Measuring the reject track at the end gives positive
// probability exactly on non-palindromes, so this machine recognizes the
// complement of the palindromes with cutpoint zero.
inline QfaMachine build_lpal_conqal() {
  LpalTemplate t = lpal_template();
  OrthonormalExtension ext = detail::rescaled_extension(t.family, t.scale);
  int n = 6, N = 3 * n;

  auto lift = [&](std::size_t s) {
    std::vector<Matrix<Cplx>> ops;
    Matrix<Cplx> live(N, N), spill(N, N), dead(N, N);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        live(i, j) = t.family[s](i, j) / ext.l;
        spill(n + i, j) = ext.b[s](i, j) / ext.l;
        spill(2 * n + i, j) = ext.c[s](i, j) / ext.l;
      }
    for (int i = n; i < N; ++i) dead(i, i) = 1.0;
    ops.push_back(std::move(live));
    ops.push_back(std::move(spill));
    ops.push_back(std::move(dead));
    return ops;
  };

  QfaMachine m;
  m.states = N;
  m.alphabet = t.alphabet;
  m.kraus.cent = lift(0);
  m.kraus.sigma = {lift(1), lift(2)};
  m.kraus.dollar = lift(3);
  m.accept = {6};
  return m;
}

// ---------------------------------------------------------------------------
// Deterministic automata over {a, b} with total transition functions.

namespace detail {

inline Dfa make_dfa(int states, std::vector<std::vector<int>> next, std::set<int> accept) {
  Dfa d;
  d.states = states;
  d.alphabet = Alphabet("ab");
  d.next = std::move(next);
  d.accept = std::move(accept);
  check_dfa(d);
  return d;
}

} // namespace detail

inline Dfa dfa_ab_star() { // (ab)*
  return detail::make_dfa(3, {{2, 3}, {3, 1}, {3, 3}}, {1});
}

inline Dfa dfa_even_a() { // even number of a's
  return detail::make_dfa(2, {{2, 1}, {1, 2}}, {1});
}

inline Dfa dfa_ends_b() { // nonempty, last symbol b
  return detail::make_dfa(2, {{1, 2}, {1, 2}}, {2});
}

inline Dfa dfa_contains_aba() {
  return detail::make_dfa(4, {{2, 1}, {2, 3}, {4, 1}, {4, 4}}, {4});
}

inline Dfa dfa_a_star_b_star() {
  return detail::make_dfa(3, {{1, 2}, {3, 2}, {3, 3}}, {1, 2});
}

} // namespace rtfa
