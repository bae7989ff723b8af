#pragma once

// Machine descriptions for real-time automata over a framed input: every word
// w is processed as cent-w-dollar, starting from state 1. State indices are
// 1-based in every public field and report; matrices are indexed 0-based.
//
// Kinds:
//   PfaMachine        column-stochastic rational transitions, accept states
//   QfaMachine        Kraus collections per symbol, accept states (trace semantics)
//   KwqfaMachine      unitary per symbol + projective measurement after each
//                     step, partition accept / reject / restart / nonhalting
//   RestartPfa        PfaMachine plus reject and restart sets; halting is
//                     checked per step or only after dollar (timing flag)
//   RestartQfa        QfaMachine plus reject set; one measurement after dollar,
//                     everything outside accept/reject restarts
//   PostMachine       PFA or QFA base whose acceptance is conditioned on the
//                     postselection sets (the base accept set stays empty)
//   LatvianPostMachine  PostMachine plus a default verdict for inputs whose
//                     postselection mass is zero

#include "rtfa/validate.hpp"

#include <algorithm>
#include <set>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace rtfa {

inline constexpr int kInitialState = 1;

struct Alphabet {
  std::vector<char> symbols;

  Alphabet() = default;
  explicit Alphabet(std::string_view chars) : symbols(chars.begin(), chars.end()) {}

  int size() const { return int(symbols.size()); }
  int index_of(char c) const {
    for (std::size_t i = 0; i < symbols.size(); ++i)
      if (symbols[i] == c) return int(i);
    return -1;
  }
  int index_of_checked(char c) const {
    int i = index_of(c);
    if (i < 0)
      throw std::invalid_argument(std::string("symbol '") + c + "' is not in the alphabet");
    return i;
  }
  bool operator==(const Alphabet &) const = default;
};

inline void check_alphabet(const Alphabet &a) {
  if (a.symbols.empty()) throw std::invalid_argument("alphabet must be nonempty");
  for (char c : a.symbols) {
    if (c == '$' || c == '#' || !(c > ' ' && c < 127))
      throw std::invalid_argument(std::string("alphabet symbol '") + c + "' is reserved or unprintable");
    if (std::count(a.symbols.begin(), a.symbols.end(), c) != 1)
      throw std::invalid_argument(std::string("duplicate alphabet symbol '") + c + "'");
  }
}

// Per-symbol payload over the framed alphabet: cent, each alphabet symbol, dollar.
template <typename T> struct SymbolMap {
  T cent{};
  std::vector<T> sigma;
  T dollar{};
  bool operator==(const SymbolMap &) const = default;
};

// Feeds f the payloads for cent, each character of w, then dollar.
template <typename T, typename F>
void scan_word(const SymbolMap<T> &map, const Alphabet &a, std::string_view w, F &&f) {
  f(map.cent);
  for (char ch : w) f(map.sigma[std::size_t(a.index_of_checked(ch))]);
  f(map.dollar);
}

enum class HaltTiming { per_step, at_end };
enum class Tau { accept, reject };

struct PfaMachine {
  int states = 0;
  Alphabet alphabet;
  SymbolMap<Matrix<Rat>> transitions;
  std::set<int> accept;
  bool operator==(const PfaMachine &) const = default;
};

struct QfaMachine {
  int states = 0;
  Alphabet alphabet;
  SymbolMap<std::vector<Matrix<Cplx>>> kraus;
  std::set<int> accept;
  bool operator==(const QfaMachine &) const = default;
};

struct KwqfaMachine {
  int states = 0;
  Alphabet alphabet;
  SymbolMap<Matrix<Cplx>> unitaries;
  std::set<int> accept, reject, restart; // remaining states are nonhalting
  bool operator==(const KwqfaMachine &) const = default;
};

struct RestartPfa {
  PfaMachine base; // base.accept doubles as the accept set
  std::set<int> reject, restart;
  HaltTiming timing = HaltTiming::per_step;
  bool operator==(const RestartPfa &) const = default;
};

struct RestartQfa {
  QfaMachine base; // base.accept is the accept set; non accept/reject restarts
  std::set<int> reject;
  bool operator==(const RestartQfa &) const = default;
};

struct PostMachine {
  std::variant<PfaMachine, QfaMachine> base; // base accept set stays empty
  std::set<int> post_accept, post_reject;
  bool operator==(const PostMachine &) const = default;
};

struct LatvianPostMachine {
  PostMachine post;
  Tau tau = Tau::reject;
  bool operator==(const LatvianPostMachine &) const = default;
};

using MachineDescription =
    std::variant<PfaMachine, QfaMachine, KwqfaMachine, RestartPfa, RestartQfa,
                 PostMachine, LatvianPostMachine>;

// Deterministic finite automaton, used as a zoo source and as the target of
// the zero-postselection-support construction. next[q-1][s] is the 1-based
// successor of state q on alphabet symbol s, or 0 where undefined.
struct Dfa {
  int states = 0;
  Alphabet alphabet;
  int start = kInitialState;
  std::vector<std::vector<int>> next;
  std::set<int> accept;
  bool operator==(const Dfa &) const = default;

  bool accepts(std::string_view w) const {
    int q = start;
    for (char ch : w) {
      int t = next[std::size_t(q - 1)][std::size_t(alphabet.index_of_checked(ch))];
      if (t == 0) return false;
      q = t;
    }
    return accept.count(q) != 0;
  }
};

struct RecognitionJudgment {
  enum class Mode { strict_cutpoint, nonstrict_cutpoint, bounded_error, zero_error, cutpoint_zero };
  Mode mode = Mode::bounded_error;
  Rat lambda;  // strict / nonstrict cutpoint
  Rat epsilon; // bounded error

  static RecognitionJudgment strict(Rat l) { return {Mode::strict_cutpoint, std::move(l), {}}; }
  static RecognitionJudgment nonstrict(Rat l) { return {Mode::nonstrict_cutpoint, std::move(l), {}}; }
  static RecognitionJudgment bounded(Rat e) { return {Mode::bounded_error, {}, std::move(e)}; }
  static RecognitionJudgment zero_error() { return {Mode::zero_error, {}, {}}; }
  static RecognitionJudgment cutpoint_zero() { return {Mode::cutpoint_zero, {}, {}}; }
};

namespace detail {

inline void check_state_set(const std::set<int> &s, int n, const char *what) {
  for (int q : s)
    if (q < 1 || q > n)
      throw std::invalid_argument(std::string(what) + ": state index " + std::to_string(q) +
                                  " out of range 1.." + std::to_string(n));
}

inline void check_disjoint(const std::set<int> &a, const std::set<int> &b, const char *what) {
  for (int q : a)
    if (b.count(q))
      throw std::invalid_argument(std::string(what) + ": state " + std::to_string(q) +
                                  " appears in two roles");
}

template <typename T>
std::vector<Matrix<T>> family_of(const SymbolMap<Matrix<T>> &map) {
  std::vector<Matrix<T>> fam;
  fam.push_back(map.cent);
  for (const auto &m : map.sigma) fam.push_back(m);
  fam.push_back(map.dollar);
  return fam;
}

inline std::string framed_symbol_name(const Alphabet &a, std::size_t family_index) {
  if (family_index == 0) return "cent";
  if (family_index == std::size_t(a.size()) + 1) return "dollar";
  return std::string(1, a.symbols[family_index - 1]);
}

template <typename T>
void check_dims(const SymbolMap<Matrix<T>> &map, int n, int sigma_count) {
  if (int(map.sigma.size()) != sigma_count)
    throw std::invalid_argument("matrix family does not cover the alphabet");
  for (const auto &m : family_of(map))
    if (m.rows() != n || m.cols() != n)
      throw std::invalid_argument("transition matrix is not states x states");
}

} // namespace detail

inline void check_machine(const PfaMachine &m) {
  if (m.states < 1) throw std::invalid_argument("machine needs at least one state");
  check_alphabet(m.alphabet);
  detail::check_dims(m.transitions, m.states, m.alphabet.size());
  auto family = detail::family_of(m.transitions);
  auto report = validate_family(FamilyKind::column_stochastic, family, Rat(0));
  for (std::size_t i = 0; i < report.entries.size(); ++i)
    if (!report.entries[i].pass)
      throw std::invalid_argument("matrix for " + detail::framed_symbol_name(m.alphabet, i) +
                                  " is not column-stochastic (violation " +
                                  format_rational(report.entries[i].violation) + ")");
  detail::check_state_set(m.accept, m.states, "accept");
}

inline void check_machine(const QfaMachine &m) {
  if (m.states < 1) throw std::invalid_argument("machine needs at least one state");
  check_alphabet(m.alphabet);
  if (int(m.kraus.sigma.size()) != m.alphabet.size())
    throw std::invalid_argument("Kraus family does not cover the alphabet");
  auto check_collection = [&](const std::vector<Matrix<Cplx>> &ops, const std::string &sym) {
    if (ops.empty())
      throw std::invalid_argument("empty Kraus collection for " + sym);
    for (const auto &e : ops) {
      if (e.rows() != m.states || e.cols() != m.states)
        throw std::invalid_argument("Kraus operator is not states x states");
      for (int i = 0; i < e.rows(); ++i)
        for (int j = 0; j < e.cols(); ++j)
          if (!std::isfinite(e(i, j).real()) || !std::isfinite(e(i, j).imag()))
            throw std::invalid_argument("non-finite Kraus entry");
    }
    auto rep = validate_family(FamilyKind::admissible, ops, kDefaultValidationTol);
    if (!rep.all_pass)
      throw std::invalid_argument("Kraus collection for " + sym +
                                  " is not trace preserving (violation " +
                                  format_double(rep.entries.front().violation) + ")");
  };
  check_collection(m.kraus.cent, "cent");
  for (int s = 0; s < m.alphabet.size(); ++s)
    check_collection(m.kraus.sigma[std::size_t(s)], std::string(1, m.alphabet.symbols[std::size_t(s)]));
  check_collection(m.kraus.dollar, "dollar");
  detail::check_state_set(m.accept, m.states, "accept");
}

inline void check_machine(const KwqfaMachine &m) {
  if (m.states < 1) throw std::invalid_argument("machine needs at least one state");
  check_alphabet(m.alphabet);
  detail::check_dims(m.unitaries, m.states, m.alphabet.size());
  auto family = detail::family_of(m.unitaries);
  auto rep = validate_family(FamilyKind::unitary, family, kDefaultValidationTol);
  for (std::size_t i = 0; i < rep.entries.size(); ++i)
    if (!rep.entries[i].pass)
      throw std::invalid_argument("matrix for " + detail::framed_symbol_name(m.alphabet, i) +
                                  " is not unitary (violation " +
                                  format_double(rep.entries[i].violation) + ")");
  detail::check_state_set(m.accept, m.states, "accept");
  detail::check_state_set(m.reject, m.states, "reject");
  detail::check_state_set(m.restart, m.states, "restart");
  detail::check_disjoint(m.accept, m.reject, "partition");
  detail::check_disjoint(m.accept, m.restart, "partition");
  detail::check_disjoint(m.reject, m.restart, "partition");
}

namespace detail {

// States reachable with positive probability after cent and any number of
// alphabet symbols (the portion of a round that precedes dollar).
inline std::set<int> reachable_before_dollar(const PfaMachine &m) {
  auto support_step = [&](const Matrix<Rat> &a, const std::set<int> &from) {
    std::set<int> to;
    for (int q : from)
      for (int i = 0; i < m.states; ++i)
        if (sgn(a(i, q - 1)) > 0) to.insert(i + 1);
    return to;
  };
  std::set<int> reach = support_step(m.transitions.cent, {kInitialState});
  for (bool grew = true; grew;) {
    grew = false;
    for (const auto &a : m.transitions.sigma) {
      std::set<int> next = support_step(a, reach);
      for (int q : next)
        if (reach.insert(q).second) grew = true;
    }
  }
  return reach;
}

} // namespace detail

inline void check_machine(const RestartPfa &m) {
  check_machine(m.base);
  detail::check_state_set(m.reject, m.base.states, "reject");
  detail::check_state_set(m.restart, m.base.states, "restart");
  detail::check_disjoint(m.base.accept, m.reject, "partition");
  detail::check_disjoint(m.base.accept, m.restart, "partition");
  detail::check_disjoint(m.reject, m.restart, "partition");
  if (m.timing == HaltTiming::at_end) {
    // Deferred halting is only meaningful if no halting or restart state can
    // carry probability before dollar; otherwise the two timings disagree.
    std::set<int> reach = detail::reachable_before_dollar(m.base);
    for (int q : reach)
      if (m.base.accept.count(q) || m.reject.count(q) || m.restart.count(q))
        throw std::invalid_argument("at-end machine reaches halting state " +
                                    std::to_string(q) + " before dollar");
  }
}

inline void check_machine(const RestartQfa &m) {
  check_machine(m.base);
  detail::check_state_set(m.reject, m.base.states, "reject");
  detail::check_disjoint(m.base.accept, m.reject, "partition");
}

inline void check_machine(const PostMachine &m) {
  int n = 0;
  std::visit([&](const auto &base) {
    check_machine(base);
    if (!base.accept.empty())
      throw std::invalid_argument("postselection machine must keep the base accept set empty");
    n = base.states;
  }, m.base);
  detail::check_state_set(m.post_accept, n, "postaccept");
  detail::check_state_set(m.post_reject, n, "postreject");
  detail::check_disjoint(m.post_accept, m.post_reject, "postselection");
}

inline void check_machine(const LatvianPostMachine &m) { check_machine(m.post); }

inline void check_machine(const MachineDescription &m) {
  std::visit([](const auto &x) { check_machine(x); }, m);
}

inline int machine_states(const MachineDescription &m) {
  return std::visit([](const auto &x) -> int {
    using X = std::decay_t<decltype(x)>;
    if constexpr (std::is_same_v<X, RestartPfa> || std::is_same_v<X, RestartQfa>)
      return x.base.states;
    else if constexpr (std::is_same_v<X, PostMachine>)
      return std::visit([](const auto &b) { return b.states; }, x.base);
    else if constexpr (std::is_same_v<X, LatvianPostMachine>)
      return std::visit([](const auto &b) { return b.states; }, x.post.base);
    else
      return x.states;
  }, m);
}

inline const Alphabet &machine_alphabet(const MachineDescription &m) {
  return *std::visit([](const auto &x) -> const Alphabet * {
    using X = std::decay_t<decltype(x)>;
    if constexpr (std::is_same_v<X, RestartPfa> || std::is_same_v<X, RestartQfa>)
      return &x.base.alphabet;
    else if constexpr (std::is_same_v<X, PostMachine>)
      return std::visit([](const auto &b) { return &b.alphabet; }, x.base);
    else if constexpr (std::is_same_v<X, LatvianPostMachine>)
      return std::visit([](const auto &b) { return &b.alphabet; }, x.post.base);
    else
      return &x.alphabet;
  }, m);
}

inline std::string machine_kind_name(const MachineDescription &m) {
  return std::visit([](const auto &x) -> std::string {
    using X = std::decay_t<decltype(x)>;
    if constexpr (std::is_same_v<X, PfaMachine>) return "pfa";
    else if constexpr (std::is_same_v<X, QfaMachine>) return "qfa";
    else if constexpr (std::is_same_v<X, KwqfaMachine>)
      return x.restart.empty() ? "kwqfa" : "kwqfa-restart";
    else if constexpr (std::is_same_v<X, RestartPfa>) return "pfa-restart";
    else if constexpr (std::is_same_v<X, RestartQfa>) return "qfa-restart";
    else if constexpr (std::is_same_v<X, PostMachine>)
      return std::holds_alternative<PfaMachine>(x.base) ? "post-pfa" : "post-qfa";
    else
      return std::holds_alternative<PfaMachine>(x.post.base) ? "lpost-pfa" : "lpost-qfa";
  }, m);
}

inline void check_dfa(const Dfa &d) {
  if (d.states < 1) throw std::invalid_argument("automaton needs at least one state");
  check_alphabet(d.alphabet);
  if (d.start < 1 || d.start > d.states) throw std::invalid_argument("start state out of range");
  if (int(d.next.size()) != d.states)
    throw std::invalid_argument("transition table does not cover all states");
  for (const auto &row : d.next) {
    if (int(row.size()) != d.alphabet.size())
      throw std::invalid_argument("transition table does not cover the alphabet");
    for (int t : row)
      if (t < 0 || t > d.states)
        throw std::invalid_argument("transition target out of range");
  }
  detail::check_state_set(d.accept, d.states, "accept");
}

} // namespace rtfa
