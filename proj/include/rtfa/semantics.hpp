#pragma once

// Evaluation semantics. Every machine processes cent-w-dollar from state 1.
//
//   PfaMachine    exact distribution vector, acceptance = accept-state mass
//   QfaMachine    density operator through the per-symbol Kraus channels,
//                 acceptance = trace over accept states
//   KwqfaMachine  unnormalized amplitude vector; after each unitary the
//                 accept/reject/restart components are measured off and the
//                 nonhalting part continues
//   RestartPfa    halting mass is collected per step or only after dollar
//   RestartQfa    one measurement after dollar; everything else restarts
//
// A restart machine repeats independent rounds until a round halts, so the
// overall acceptance is p_accept / (p_accept + p_reject): the closed form of
// the geometric series over non-halting rounds. Postselection machines reuse
// the same normalization with the postselection masses as the round outcome.

#include "rtfa/machine.hpp"

#include <algorithm>
#include <cstdio>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace rtfa {

inline constexpr double kCutpointAmbiguityTol = 1e-9;

template <typename R> struct RoundOutcome {
  R p_accept{}, p_reject{};
  bool operator==(const RoundOutcome &) const = default;
};

template <typename R> struct Verdict {
  R f_accept{}, f_reject{};
  bool valid = false; // false when the conditioning mass is zero
  std::optional<RoundOutcome<R>> basis;
};

template <typename R> Verdict<R> restart_overall(const RoundOutcome<R> &r) {
  Verdict<R> v;
  v.basis = r;
  R p = r.p_accept + r.p_reject;
  if (!(p > R(0))) return v; // no halting mass: acceptance undefined
  v.f_accept = r.p_accept / p;
  v.f_reject = r.p_reject / p;
  v.valid = true;
  return v;
}

// Expected number of processed symbols until some round halts: rounds are
// geometric with success p, each costs s symbols, so s/p. Empty when p = 0.
// Concrete overloads so GMP sum expressions land on the rational one.
inline std::optional<Rat> expected_runtime(const Rat &p, long s) {
  if (!(p > 0)) return std::nullopt;
  return Rat(s) / p;
}

inline std::optional<double> expected_runtime(double p, long s) {
  if (!(p > 0)) return std::nullopt;
  return double(s) / p;
}

namespace detail {

inline Rat mass_in(const std::vector<Rat> &v, const std::set<int> &s) {
  Rat t;
  for (int q : s) t += v[std::size_t(q - 1)];
  return t;
}

inline double amp_mass_in(const std::vector<Cplx> &v, const std::set<int> &s) {
  double t = 0;
  for (int q : s) t += std::norm(v[std::size_t(q - 1)]);
  return t;
}

using Density = Matrix<Cplx>;

inline Density density_start(int n) {
  Density rho(n, n);
  rho(0, 0) = 1.0;
  return rho;
}

inline Density channel_step(const std::vector<Matrix<Cplx>> &kraus, const Density &rho) {
  int n = rho.rows();
  Density out(n, n);
  for (const auto &e : kraus) {
    Density t = mul(mul(e, rho), dagger(e));
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) out(i, j) += t(i, j);
  }
  return out;
}

inline double trace_in(const Density &rho, const std::set<int> &s) {
  double t = 0;
  for (int q : s) t += rho(q - 1, q - 1).real();
  return t;
}

inline double trace_of(const Density &rho) {
  double t = 0;
  for (int i = 0; i < rho.rows(); ++i) t += rho(i, i).real();
  return t;
}

// Per-string evaluation record produced by the engines below.
template <typename R> struct StringEval {
  R p_accept{}, p_reject{}; // round / postselection masses where meaningful
  R f_accept{}, f_reject{};
  bool valid = true;
  bool has_round = false;
};

// Engines expose: State, initial() [after cent], advance(State, symbol index),
// finish(State) [applies dollar]. finish must not observe later advances, so
// states are passed by value along the enumeration tree.

struct PfaEngine {
  const PfaMachine *m;
  using State = std::vector<Rat>;
  State initial() const {
    State v(std::size_t(m->states));
    v[0] = 1;
    return rtfa::apply(m->transitions.cent, v);
  }
  State advance(State v, int sym) const {
    return rtfa::apply(m->transitions.sigma[std::size_t(sym)], v);
  }
  StringEval<Rat> finish(State v) const {
    v = rtfa::apply(m->transitions.dollar, v);
    StringEval<Rat> ev;
    ev.f_accept = mass_in(v, m->accept);
    ev.f_reject = 1 - ev.f_accept;
    return ev;
  }
};

struct QfaEngine {
  const QfaMachine *m;
  using State = Density;
  State initial() const { return channel_step(m->kraus.cent, density_start(m->states)); }
  State advance(State rho, int sym) const {
    return channel_step(m->kraus.sigma[std::size_t(sym)], rho);
  }
  StringEval<double> finish(State rho) const {
    rho = channel_step(m->kraus.dollar, rho);
    StringEval<double> ev;
    ev.f_accept = trace_in(rho, m->accept);
    ev.f_reject = 1.0 - ev.f_accept;
    return ev;
  }
};

struct RestartPfaEngine {
  const RestartPfa *m;
  struct State {
    std::vector<Rat> v;
    Rat acc, rej;
  };
  void collect(State &s) const {
    for (int q : m->base.accept) {
      s.acc += s.v[std::size_t(q - 1)];
      s.v[std::size_t(q - 1)] = 0;
    }
    for (int q : m->reject) {
      s.rej += s.v[std::size_t(q - 1)];
      s.v[std::size_t(q - 1)] = 0;
    }
    for (int q : m->restart) s.v[std::size_t(q - 1)] = 0; // mass restarts
  }
  State initial() const {
    State s{std::vector<Rat>(std::size_t(m->base.states)), Rat(0), Rat(0)};
    s.v[0] = 1;
    s.v = rtfa::apply(m->base.transitions.cent, s.v);
    if (m->timing == HaltTiming::per_step) collect(s);
    return s;
  }
  State advance(State s, int sym) const {
    s.v = rtfa::apply(m->base.transitions.sigma[std::size_t(sym)], s.v);
    if (m->timing == HaltTiming::per_step) collect(s);
    return s;
  }
  StringEval<Rat> finish(State s) const {
    s.v = rtfa::apply(m->base.transitions.dollar, s.v);
    StringEval<Rat> ev;
    ev.has_round = true;
    if (m->timing == HaltTiming::per_step) {
      collect(s);
      ev.p_accept = s.acc;
      ev.p_reject = s.rej;
    } else {
      ev.p_accept = mass_in(s.v, m->base.accept);
      ev.p_reject = mass_in(s.v, m->reject);
    }
    Verdict<Rat> v = restart_overall(RoundOutcome<Rat>{ev.p_accept, ev.p_reject});
    ev.f_accept = v.f_accept;
    ev.f_reject = v.f_reject;
    ev.valid = v.valid;
    return ev;
  }
};

struct RestartQfaEngine {
  const RestartQfa *m;
  using State = Density;
  State initial() const {
    return channel_step(m->base.kraus.cent, density_start(m->base.states));
  }
  State advance(State rho, int sym) const {
    return channel_step(m->base.kraus.sigma[std::size_t(sym)], rho);
  }
  StringEval<double> finish(State rho) const {
    rho = channel_step(m->base.kraus.dollar, rho);
    StringEval<double> ev;
    ev.has_round = true;
    ev.p_accept = trace_in(rho, m->base.accept);
    ev.p_reject = trace_in(rho, m->reject);
    Verdict<double> v = restart_overall(RoundOutcome<double>{ev.p_accept, ev.p_reject});
    ev.f_accept = v.f_accept;
    ev.f_reject = v.f_reject;
    ev.valid = v.valid;
    return ev;
  }
};

struct KwqfaEngine {
  const KwqfaMachine *m;
  struct State {
    std::vector<Cplx> psi;
    double acc = 0, rej = 0, res = 0;
  };
  void step(State &s, const Matrix<Cplx> &u) const {
    s.psi = rtfa::apply(u, s.psi);
    s.acc += amp_mass_in(s.psi, m->accept);
    s.rej += amp_mass_in(s.psi, m->reject);
    s.res += amp_mass_in(s.psi, m->restart);
    for (int q : m->accept) s.psi[std::size_t(q - 1)] = 0;
    for (int q : m->reject) s.psi[std::size_t(q - 1)] = 0;
    for (int q : m->restart) s.psi[std::size_t(q - 1)] = 0;
  }
  State initial() const {
    State s;
    s.psi.assign(std::size_t(m->states), Cplx{});
    s.psi[0] = 1.0;
    step(s, m->unitaries.cent);
    return s;
  }
  State advance(State s, int sym) const {
    step(s, m->unitaries.sigma[std::size_t(sym)]);
    return s;
  }
  StringEval<double> finish(State s) const {
    step(s, m->unitaries.dollar);
    StringEval<double> ev;
    ev.has_round = true;
    ev.p_accept = s.acc;
    ev.p_reject = s.rej;
    Verdict<double> v = restart_overall(RoundOutcome<double>{ev.p_accept, ev.p_reject});
    ev.f_accept = v.f_accept;
    ev.f_reject = v.f_reject;
    ev.valid = v.valid;
    return ev;
  }
};

// Postselection over either base. With latvian set, zero conditioning mass is
// decided by tau instead of being undecided.
struct PostPfaEngine {
  const PfaMachine *base;
  const PostMachine *post;
  std::optional<Tau> latvian;
  using State = std::vector<Rat>;
  State initial() const {
    State v(std::size_t(base->states));
    v[0] = 1;
    return rtfa::apply(base->transitions.cent, v);
  }
  State advance(State v, int sym) const {
    return rtfa::apply(base->transitions.sigma[std::size_t(sym)], v);
  }
  StringEval<Rat> finish(State v) const {
    v = rtfa::apply(base->transitions.dollar, v);
    StringEval<Rat> ev;
    ev.has_round = true;
    ev.p_accept = mass_in(v, post->post_accept);
    ev.p_reject = mass_in(v, post->post_reject);
    Verdict<Rat> vd = restart_overall(RoundOutcome<Rat>{ev.p_accept, ev.p_reject});
    if (!vd.valid && latvian) {
      ev.f_accept = *latvian == Tau::accept ? 1 : 0;
      ev.f_reject = 1 - ev.f_accept;
      ev.valid = true;
      return ev;
    }
    ev.f_accept = vd.f_accept;
    ev.f_reject = vd.f_reject;
    ev.valid = vd.valid;
    return ev;
  }
};

struct PostQfaEngine {
  const QfaMachine *base;
  const PostMachine *post;
  std::optional<Tau> latvian;
  using State = Density;
  State initial() const { return channel_step(base->kraus.cent, density_start(base->states)); }
  State advance(State rho, int sym) const {
    return channel_step(base->kraus.sigma[std::size_t(sym)], rho);
  }
  StringEval<double> finish(State rho) const {
    rho = channel_step(base->kraus.dollar, rho);
    StringEval<double> ev;
    ev.has_round = true;
    ev.p_accept = trace_in(rho, post->post_accept);
    ev.p_reject = trace_in(rho, post->post_reject);
    Verdict<double> vd = restart_overall(RoundOutcome<double>{ev.p_accept, ev.p_reject});
    if (!vd.valid && latvian) {
      ev.f_accept = *latvian == Tau::accept ? 1.0 : 0.0;
      ev.f_reject = 1.0 - ev.f_accept;
      ev.valid = true;
      return ev;
    }
    ev.f_accept = vd.f_accept;
    ev.f_reject = vd.f_reject;
    ev.valid = vd.valid;
    return ev;
  }
};

template <typename Engine, typename F>
void walk_one(const Engine &e, const Alphabet &a, std::string_view w, F &&f) {
  auto st = e.initial();
  for (char ch : w) st = e.advance(std::move(st), a.index_of_checked(ch));
  f(e.finish(std::move(st)));
}

// Depth-first enumeration of all strings up to max_len, sharing the evaluation
// state of common prefixes. Visit order is prefix order, not length order;
// reports sort afterwards.
template <typename Engine, typename F>
void walk_tree(const Engine &e, const Alphabet &a, int max_len, F &&f) {
  std::string w;
  auto rec = [&](auto &&self, const typename Engine::State &st) -> void {
    f(w, e.finish(st));
    if (int(w.size()) >= max_len) return;
    for (int s = 0; s < a.size(); ++s) {
      w.push_back(a.symbols[std::size_t(s)]);
      self(self, e.advance(st, s));
      w.pop_back();
    }
  };
  rec(rec, e.initial());
}

template <typename M> struct engine_for;

} // namespace detail

// ---------------------------------------------------------------------------
// Single-string operations.

inline Rat pfa_accept(const PfaMachine &m, std::string_view w) {
  Rat out;
  detail::walk_one(detail::PfaEngine{&m}, m.alphabet, w,
                   [&](const detail::StringEval<Rat> &ev) { out = ev.f_accept; });
  return out;
}

inline double qfa_accept(const QfaMachine &m, std::string_view w) {
  double out = 0;
  detail::walk_one(detail::QfaEngine{&m}, m.alphabet, w,
                   [&](const detail::StringEval<double> &ev) { out = ev.f_accept; });
  return out;
}

inline RoundOutcome<Rat> restart_round(const RestartPfa &m, std::string_view w) {
  RoundOutcome<Rat> out;
  detail::walk_one(detail::RestartPfaEngine{&m}, m.base.alphabet, w,
                   [&](const detail::StringEval<Rat> &ev) {
                     out = {ev.p_accept, ev.p_reject};
                   });
  return out;
}

inline RoundOutcome<double> restart_round(const RestartQfa &m, std::string_view w) {
  RoundOutcome<double> out;
  detail::walk_one(detail::RestartQfaEngine{&m}, m.base.alphabet, w,
                   [&](const detail::StringEval<double> &ev) {
                     out = {ev.p_accept, ev.p_reject};
                   });
  return out;
}

// Full per-round accounting for measured-every-step machines; the four parts
// sum to 1 up to float error.
struct KwqfaRoundAccounting {
  double accept = 0, reject = 0, restart = 0, leftover = 0;
};

inline KwqfaRoundAccounting kwqfa_round(const KwqfaMachine &m, std::string_view w) {
  detail::KwqfaEngine e{&m};
  auto st = e.initial();
  for (char ch : w) st = e.advance(std::move(st), m.alphabet.index_of_checked(ch));
  e.step(st, m.unitaries.dollar);
  return {st.acc, st.rej, st.res, norm_sq(st.psi)};
}

inline RoundOutcome<double> restart_round(const KwqfaMachine &m, std::string_view w) {
  KwqfaRoundAccounting acct = kwqfa_round(m, w);
  return {acct.accept, acct.reject};
}

using AnyVerdict = std::variant<Verdict<Rat>, Verdict<double>>;

template <typename R>
Verdict<R> verdict_from_eval(const detail::StringEval<R> &ev) {
  Verdict<R> v;
  v.f_accept = ev.f_accept;
  v.f_reject = ev.f_reject;
  v.valid = ev.valid;
  if (ev.has_round) v.basis = RoundOutcome<R>{ev.p_accept, ev.p_reject};
  return v;
}

inline AnyVerdict post_evaluate(const PostMachine &m, std::string_view w,
                                std::optional<Tau> latvian = std::nullopt) {
  if (const auto *pfa = std::get_if<PfaMachine>(&m.base)) {
    AnyVerdict out = Verdict<Rat>{};
    detail::walk_one(detail::PostPfaEngine{pfa, &m, latvian}, pfa->alphabet, w,
                     [&](const detail::StringEval<Rat> &ev) { out = verdict_from_eval(ev); });
    return out;
  }
  const auto &qfa = std::get<QfaMachine>(m.base);
  AnyVerdict out = Verdict<double>{};
  detail::walk_one(detail::PostQfaEngine{&qfa, &m, latvian}, qfa.alphabet, w,
                   [&](const detail::StringEval<double> &ev) { out = verdict_from_eval(ev); });
  return out;
}

inline AnyVerdict post_evaluate(const LatvianPostMachine &m, std::string_view w) {
  return post_evaluate(m.post, w, m.tau);
}

inline AnyVerdict machine_verdict(const MachineDescription &desc, std::string_view w) {
  return std::visit([&](const auto &m) -> AnyVerdict {
    using M = std::decay_t<decltype(m)>;
    if constexpr (std::is_same_v<M, PfaMachine>) {
      Verdict<Rat> v;
      v.f_accept = pfa_accept(m, w);
      v.f_reject = 1 - v.f_accept;
      v.valid = true;
      return v;
    } else if constexpr (std::is_same_v<M, QfaMachine>) {
      Verdict<double> v;
      v.f_accept = qfa_accept(m, w);
      v.f_reject = 1.0 - v.f_accept;
      v.valid = true;
      return v;
    } else if constexpr (std::is_same_v<M, RestartPfa>) {
      return restart_overall(restart_round(m, w));
    } else if constexpr (std::is_same_v<M, RestartQfa> || std::is_same_v<M, KwqfaMachine>) {
      return restart_overall(restart_round(m, w));
    } else if constexpr (std::is_same_v<M, PostMachine>) {
      return post_evaluate(m, w);
    } else {
      return post_evaluate(m, w);
    }
  }, desc);
}

// ---------------------------------------------------------------------------
// Language checking.

using LanguagePredicate = std::function<bool(const std::string &)>;

struct RecognitionReport {
  bool pass = false;
  long strings_checked = 0;
  struct Item {
    std::string w;
    bool member = false;
    std::string detail;
  };
  std::vector<Item> counterexamples;
  std::vector<Item> ambiguous; // float verdicts within tolerance of the cutpoint
};

namespace detail {

template <typename R> std::string format_value(const R &x) {
  if constexpr (is_rational_scalar<R>) return format_rational(x);
  else {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.12g", x);
    return buf;
  }
}

template <typename R>
void judge_string(const std::string &w, const StringEval<R> &ev, bool member,
                  const RecognitionJudgment &j, RecognitionReport &rep) {
  auto cex = [&](const std::string &detail) {
    rep.counterexamples.push_back({w, member, detail});
  };
  if (!ev.valid) {
    cex("undecided: zero conditioning mass");
    return;
  }

  R lambda{}, one_minus_eps{}, eps{};
  if constexpr (is_rational_scalar<R>) {
    lambda = j.lambda;
    eps = j.epsilon;
    one_minus_eps = 1 - j.epsilon;
  } else {
    lambda = rat_to_double(j.lambda);
    eps = rat_to_double(j.epsilon);
    one_minus_eps = rat_to_double(1 - j.epsilon);
  }

  using Mode = RecognitionJudgment::Mode;
  switch (j.mode) {
  case Mode::strict_cutpoint:
  case Mode::nonstrict_cutpoint: {
    if constexpr (!is_rational_scalar<R>) {
      if (std::abs(ev.f_accept - lambda) <= kCutpointAmbiguityTol) {
        rep.ambiguous.push_back({w, member, "f_accept=" + format_value(ev.f_accept) +
                                                " within 1e-9 of the cutpoint"});
        return;
      }
    }
    bool above = j.mode == Mode::strict_cutpoint ? ev.f_accept > lambda : ev.f_accept >= lambda;
    if (above != member)
      cex("f_accept=" + format_value(ev.f_accept) + " vs cutpoint " + format_value(lambda));
    break;
  }
  case Mode::bounded_error: {
    bool direct_ok = member ? ev.f_accept >= one_minus_eps : ev.f_reject >= one_minus_eps;
    if (ev.has_round) {
      // Same criterion stated on the round masses; cross-multiplied so zero
      // masses need no special casing.
      bool ratio_ok = member ? ev.p_reject * one_minus_eps <= ev.p_accept * eps
                             : ev.p_accept * one_minus_eps <= ev.p_reject * eps;
      if (ratio_ok != direct_ok) {
        cex("internal: ratio and f-value criteria disagree (f_accept=" +
            format_value(ev.f_accept) + ")");
        break;
      }
    }
    if (!direct_ok)
      cex(std::string(member ? "f_accept=" : "f_reject=") +
          format_value(member ? ev.f_accept : ev.f_reject) + " < 1-epsilon");
    break;
  }
  case Mode::zero_error: {
    bool ok = member ? ev.f_accept == R(1) : ev.f_reject == R(1);
    if (!ok)
      cex(std::string(member ? "f_accept=" : "f_reject=") +
          format_value(member ? ev.f_accept : ev.f_reject) + " != 1");
    break;
  }
  case Mode::cutpoint_zero: {
    bool accepted = ev.f_accept > R(0);
    if (accepted != member)
      cex("f_accept=" + format_value(ev.f_accept) + (member ? " but member" : " but nonmember"));
    break;
  }
  }
}

template <typename Engine>
void run_recognition(const Engine &e, const Alphabet &a, const LanguagePredicate &lang,
                     const RecognitionJudgment &j, int max_len, RecognitionReport &rep) {
  walk_tree(e, a, max_len, [&](const std::string &w, const auto &ev) {
    ++rep.strings_checked;
    judge_string(w, ev, lang(w), j, rep);
  });
}

} // namespace detail

inline RecognitionReport check_recognition(const MachineDescription &desc,
                                           const LanguagePredicate &lang,
                                           const RecognitionJudgment &judgment, int max_len) {
  RecognitionReport rep;
  const Alphabet &alpha = machine_alphabet(desc);
  std::visit([&](const auto &m) {
    using M = std::decay_t<decltype(m)>;
    if constexpr (std::is_same_v<M, PfaMachine>)
      detail::run_recognition(detail::PfaEngine{&m}, alpha, lang, judgment, max_len, rep);
    else if constexpr (std::is_same_v<M, QfaMachine>)
      detail::run_recognition(detail::QfaEngine{&m}, alpha, lang, judgment, max_len, rep);
    else if constexpr (std::is_same_v<M, RestartPfa>)
      detail::run_recognition(detail::RestartPfaEngine{&m}, alpha, lang, judgment, max_len, rep);
    else if constexpr (std::is_same_v<M, RestartQfa>)
      detail::run_recognition(detail::RestartQfaEngine{&m}, alpha, lang, judgment, max_len, rep);
    else if constexpr (std::is_same_v<M, KwqfaMachine>)
      detail::run_recognition(detail::KwqfaEngine{&m}, alpha, lang, judgment, max_len, rep);
    else if constexpr (std::is_same_v<M, PostMachine>) {
      if (const auto *pfa = std::get_if<PfaMachine>(&m.base))
        detail::run_recognition(detail::PostPfaEngine{pfa, &m, std::nullopt}, alpha, lang,
                                judgment, max_len, rep);
      else
        detail::run_recognition(detail::PostQfaEngine{&std::get<QfaMachine>(m.base), &m,
                                                      std::nullopt},
                                alpha, lang, judgment, max_len, rep);
    } else { // LatvianPostMachine
      if (const auto *pfa = std::get_if<PfaMachine>(&m.post.base))
        detail::run_recognition(detail::PostPfaEngine{pfa, &m.post, m.tau}, alpha, lang,
                                judgment, max_len, rep);
      else
        detail::run_recognition(detail::PostQfaEngine{&std::get<QfaMachine>(m.post.base),
                                                      &m.post, m.tau},
                                alpha, lang, judgment, max_len, rep);
    }
  }, desc);

  // Deterministic report order: length, then alphabet-lexicographic.
  auto sort_items = [&](std::vector<RecognitionReport::Item> &items) {
    std::sort(items.begin(), items.end(), [&](const auto &x, const auto &y) {
      if (x.w.size() != y.w.size()) return x.w.size() < y.w.size();
      for (std::size_t i = 0; i < x.w.size(); ++i)
        if (x.w[i] != y.w[i]) return alpha.index_of(x.w[i]) < alpha.index_of(y.w[i]);
      return false;
    });
  };
  sort_items(rep.counterexamples);
  sort_items(rep.ambiguous);
  rep.pass = rep.counterexamples.empty();
  return rep;
}

template <typename M>
RecognitionReport check_recognition(const M &machine, const LanguagePredicate &lang,
                                    const RecognitionJudgment &judgment, int max_len) {
  return check_recognition(MachineDescription(machine), lang, judgment, max_len);
}

} // namespace rtfa
