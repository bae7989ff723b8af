#pragma once

// Sampled execution. Every machine kind gets a faithful per-round sampler:
// probabilistic machines walk one state per step through cumulative tables
// built once from the exact transition columns, quantum machines unravel the
// evolution branch by branch using the exact branch probabilities, and
// measured-every-step machines draw each measurement outcome as it happens.
// Rounds repeat until accept or reject; a trial that exceeds the round cap
// raises MonteCarloDivergence naming the trial.
//
// Determinism: trial i under seed s always produces the same run, on any
// platform -- each trial seeds its own mt19937_64 from a splitmix64 mix of
// (s, i), and uniform doubles come from a fixed 53-bit mapping rather than
// std::uniform_real_distribution (whose output is implementation-defined).

#include "rtfa/semantics.hpp"

#include <cstdint>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>

namespace rtfa {

inline constexpr long kDefaultRoundCap = 1000000;

class MonteCarloDivergence : public std::runtime_error {
public:
  MonteCarloDivergence(long trial, long cap)
      : std::runtime_error("trial " + std::to_string(trial) + " exceeded the round cap (" +
                           std::to_string(cap) + " rounds) without halting"),
        trial_(trial) {}
  long trial() const { return trial_; }

private:
  long trial_;
};

struct TrialStats {
  long trials = 0, accepts = 0, rejects = 0;
  long long total_steps = 0, total_rounds = 0;
  std::uint64_t seed = 0;
};

struct EstimateReport {
  TrialStats stats;
  double empirical_accept = 0;
  double mean_steps = 0;
  std::optional<double> exact_accept;   // from the exact semantics, when defined
  std::optional<double> expected_steps; // s/p; exact for full-length rounds,
                                        // an upper bound when rounds can halt early
  bool low_confidence = false;          // fewer than 100 trials
};

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t &x) {
  x += 0x9e3779b97f4a7c15ULL;
  std::uint64_t z = x;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline std::mt19937_64 trial_engine(std::uint64_t seed, long trial) {
  std::uint64_t x = seed ^ (0x9e3779b97f4a7c15ULL * (std::uint64_t(trial) + 1));
  return std::mt19937_64(splitmix64(x));
}

inline double uniform01(std::mt19937_64 &eng) {
  return double(eng() >> 11) * 0x1.0p-53;
}

enum class McOutcome { accept, reject, restart };

// Cumulative sampling tables for one rational matrix, one entry per column.
// Deterministic columns (a single nonzero) skip the generator entirely.
struct McColumn {
  std::vector<int> rows; // 0-based targets
  std::vector<double> cum;
};

struct McTable {
  std::vector<McColumn> cols;
};

inline McTable mc_table(const Matrix<Rat> &a) {
  McTable t;
  t.cols.resize(std::size_t(a.cols()));
  for (int j = 0; j < a.cols(); ++j) {
    McColumn &c = t.cols[std::size_t(j)];
    double acc = 0;
    for (int i = 0; i < a.rows(); ++i) {
      if (sgn(a(i, j)) == 0) continue;
      acc += rat_to_double(a(i, j));
      c.rows.push_back(i);
      c.cum.push_back(acc);
    }
  }
  return t;
}

inline int mc_step(const McTable &t, int q0, std::mt19937_64 &eng) {
  const McColumn &c = t.cols[std::size_t(q0)];
  if (c.rows.size() == 1) return c.rows.front();
  double u = uniform01(eng) * c.cum.back(); // scale absorbs conversion rounding
  for (std::size_t i = 0; i < c.cum.size(); ++i)
    if (u < c.cum[i]) return c.rows[i];
  return c.rows.back();
}

struct McTables {
  SymbolMap<McTable> framed;
};

inline McTables mc_tables(const SymbolMap<Matrix<Rat>> &ts) {
  McTables out;
  out.framed.cent = mc_table(ts.cent);
  for (const auto &a : ts.sigma) out.framed.sigma.push_back(mc_table(a));
  out.framed.dollar = mc_table(ts.dollar);
  return out;
}

// Pick an index from unnormalized nonnegative weights.
inline std::size_t pick_weighted(const std::vector<double> &w, std::mt19937_64 &eng) {
  double total = 0;
  for (double x : w) total += x;
  double u = uniform01(eng) * total;
  double acc = 0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    acc += w[i];
    if (u < acc) return i;
  }
  for (std::size_t i = w.size(); i-- > 0;)
    if (w[i] > 0) return i;
  return 0;
}

struct RoundResult {
  McOutcome outcome = McOutcome::restart;
  long steps = 0;
};

// --- probabilistic rounds ---------------------------------------------------

struct PfaRoundConfig {
  const McTables *tables;
  const std::set<int> *accept, *reject, *restart; // any may be empty
  bool check_each_step = false;
  bool plain = false; // accept set vs everything-else, no restart outcome
};

inline RoundResult pfa_round(const PfaRoundConfig &cfg, const Alphabet &alpha,
                             std::string_view w, std::mt19937_64 &eng) {
  RoundResult r;
  int q = 0; // 0-based state
  auto classify = [&](int state1) -> std::optional<McOutcome> {
    if (cfg.accept->count(state1)) return McOutcome::accept;
    if (cfg.reject->count(state1)) return McOutcome::reject;
    if (cfg.restart->count(state1)) return McOutcome::restart;
    return std::nullopt;
  };
  auto step = [&](const McTable &t) -> std::optional<McOutcome> {
    q = mc_step(t, q, eng);
    ++r.steps;
    if (cfg.check_each_step) return classify(q + 1);
    return std::nullopt;
  };
  if (auto out = step(cfg.tables->framed.cent)) { r.outcome = *out; return r; }
  for (char ch : w) {
    const McTable &t = cfg.tables->framed.sigma[std::size_t(alpha.index_of_checked(ch))];
    if (auto out = step(t)) { r.outcome = *out; return r; }
  }
  q = mc_step(cfg.tables->framed.dollar, q, eng);
  ++r.steps;
  if (cfg.plain) {
    r.outcome = cfg.accept->count(q + 1) ? McOutcome::accept : McOutcome::reject;
    return r;
  }
  if (auto out = classify(q + 1)) r.outcome = *out;
  else r.outcome = McOutcome::restart;
  return r;
}

// --- quantum rounds ---------------------------------------------------------

inline void normalize_amps(std::vector<Cplx> &psi) {
  double n = std::sqrt(norm_sq(psi));
  for (auto &x : psi) x /= n;
}

// Kraus unraveling over one framed word; ends with a projective measurement
// over the given sets (plain: accept vs rest).
struct QfaRoundConfig {
  const QfaMachine *base;
  const std::set<int> *accept, *reject; // reject may be empty (plain machines)
  bool plain = false;
};

inline RoundResult qfa_round(const QfaRoundConfig &cfg, std::string_view w,
                             std::mt19937_64 &eng) {
  RoundResult r;
  std::vector<Cplx> psi(std::size_t(cfg.base->states));
  psi[0] = 1.0;
  std::vector<double> weights;
  std::vector<std::vector<Cplx>> branches;
  auto kraus_step = [&](const std::vector<Matrix<Cplx>> &ops) {
    weights.clear();
    branches.clear();
    for (const auto &e : ops) {
      branches.push_back(rtfa::apply(e, psi));
      weights.push_back(norm_sq(branches.back()));
    }
    std::size_t pick = pick_weighted(weights, eng);
    psi = std::move(branches[pick]);
    normalize_amps(psi);
    ++r.steps;
  };
  scan_word(cfg.base->kraus, cfg.base->alphabet, w,
            [&](const std::vector<Matrix<Cplx>> &ops) { kraus_step(ops); });

  double p_acc = amp_mass_in(psi, *cfg.accept);
  if (cfg.plain) {
    r.outcome = uniform01(eng) < p_acc ? McOutcome::accept : McOutcome::reject;
    return r;
  }
  double p_rej = amp_mass_in(psi, *cfg.reject);
  std::size_t pick = pick_weighted({p_acc, p_rej, std::max(0.0, 1.0 - p_acc - p_rej)}, eng);
  r.outcome = pick == 0 ? McOutcome::accept : pick == 1 ? McOutcome::reject : McOutcome::restart;
  return r;
}

// Measured-every-step round: draw each measurement from the exact outcome
// probabilities, continue in the normalized nonhalting part.
inline RoundResult kwqfa_round_sampled(const KwqfaMachine &m, std::string_view w,
                                       std::mt19937_64 &eng) {
  RoundResult r;
  std::vector<Cplx> psi(std::size_t(m.states));
  psi[0] = 1.0;
  bool halted = false;
  auto step = [&](const Matrix<Cplx> &u) {
    if (halted) return;
    std::vector<Cplx> phi = rtfa::apply(u, psi);
    ++r.steps;
    double p_acc = amp_mass_in(phi, m.accept);
    double p_rej = amp_mass_in(phi, m.reject);
    double p_res = amp_mass_in(phi, m.restart);
    double p_cont = std::max(0.0, norm_sq(phi) - p_acc - p_rej - p_res);
    std::size_t pick = pick_weighted({p_acc, p_rej, p_res, p_cont}, eng);
    if (pick == 0) { r.outcome = McOutcome::accept; halted = true; return; }
    if (pick == 1) { r.outcome = McOutcome::reject; halted = true; return; }
    if (pick == 2) { r.outcome = McOutcome::restart; halted = true; return; }
    for (int q : m.accept) phi[std::size_t(q - 1)] = 0;
    for (int q : m.reject) phi[std::size_t(q - 1)] = 0;
    for (int q : m.restart) phi[std::size_t(q - 1)] = 0;
    psi = std::move(phi);
    normalize_amps(psi);
  };
  scan_word(m.unitaries, m.alphabet, w, [&](const Matrix<Cplx> &u) { step(u); });
  if (!halted) r.outcome = McOutcome::restart; // leftover mass restarts
  return r;
}

} // namespace detail

inline TrialStats run_trials(const MachineDescription &desc, std::string_view w, long trials,
                             std::uint64_t seed, long round_cap = kDefaultRoundCap) {
  if (trials < 1) throw std::invalid_argument("need at least one trial");
  if (round_cap < 1) throw std::invalid_argument("round cap must be positive");

  TrialStats stats;
  stats.seed = seed;

  // One sampler closure per machine kind; bound data outlives the loop.
  std::optional<detail::McTables> tables;
  static const std::set<int> empty_set;
  std::function<detail::RoundResult(std::mt19937_64 &)> round;
  bool single_round = false;

  std::visit([&](const auto &m) {
    using M = std::decay_t<decltype(m)>;
    if constexpr (std::is_same_v<M, PfaMachine>) {
      tables = detail::mc_tables(m.transitions);
      single_round = true;
      round = [&m, &t = *tables, w](std::mt19937_64 &eng) {
        detail::PfaRoundConfig cfg{&t, &m.accept, &empty_set, &empty_set, false, true};
        return detail::pfa_round(cfg, m.alphabet, w, eng);
      };
    } else if constexpr (std::is_same_v<M, RestartPfa>) {
      tables = detail::mc_tables(m.base.transitions);
      round = [&m, &t = *tables, w](std::mt19937_64 &eng) {
        detail::PfaRoundConfig cfg{&t, &m.base.accept, &m.reject, &m.restart,
                                   m.timing == HaltTiming::per_step, false};
        return detail::pfa_round(cfg, m.base.alphabet, w, eng);
      };
    } else if constexpr (std::is_same_v<M, QfaMachine>) {
      single_round = true;
      round = [&m, w](std::mt19937_64 &eng) {
        detail::QfaRoundConfig cfg{&m, &m.accept, &empty_set, true};
        return detail::qfa_round(cfg, w, eng);
      };
    } else if constexpr (std::is_same_v<M, RestartQfa>) {
      round = [&m, w](std::mt19937_64 &eng) {
        detail::QfaRoundConfig cfg{&m.base, &m.base.accept, &m.reject, false};
        return detail::qfa_round(cfg, w, eng);
      };
    } else if constexpr (std::is_same_v<M, KwqfaMachine>) {
      round = [&m, w](std::mt19937_64 &eng) {
        return detail::kwqfa_round_sampled(m, w, eng);
      };
    } else if constexpr (std::is_same_v<M, PostMachine>) {
      if (const auto *pfa = std::get_if<PfaMachine>(&m.base)) {
        tables = detail::mc_tables(pfa->transitions);
        round = [&m, pfa, &t = *tables, w](std::mt19937_64 &eng) {
          detail::PfaRoundConfig cfg{&t, &m.post_accept, &m.post_reject, &empty_set,
                                     false, false};
          return detail::pfa_round(cfg, pfa->alphabet, w, eng);
        };
      } else {
        const auto &qfa = std::get<QfaMachine>(m.base);
        round = [&m, &qfa, w](std::mt19937_64 &eng) {
          detail::QfaRoundConfig cfg{&qfa, &m.post_accept, &m.post_reject, false};
          return detail::qfa_round(cfg, w, eng);
        };
      }
    } else { // LatvianPostMachine: sampled exactly like its postselection core
      const PostMachine &p = m.post;
      if (const auto *pfa = std::get_if<PfaMachine>(&p.base)) {
        tables = detail::mc_tables(pfa->transitions);
        round = [&p, pfa, &t = *tables, w](std::mt19937_64 &eng) {
          detail::PfaRoundConfig cfg{&t, &p.post_accept, &p.post_reject, &empty_set,
                                     false, false};
          return detail::pfa_round(cfg, pfa->alphabet, w, eng);
        };
      } else {
        const auto &qfa = std::get<QfaMachine>(p.base);
        round = [&p, &qfa, w](std::mt19937_64 &eng) {
          detail::QfaRoundConfig cfg{&qfa, &p.post_accept, &p.post_reject, false};
          return detail::qfa_round(cfg, w, eng);
        };
      }
    }
  }, desc);

  for (long trial = 0; trial < trials; ++trial) {
    std::mt19937_64 eng = detail::trial_engine(seed, trial);
    bool done = false;
    for (long r = 0; r < round_cap && !done; ++r) {
      detail::RoundResult res = round(eng);
      stats.total_steps += res.steps;
      ++stats.total_rounds;
      switch (res.outcome) {
      case detail::McOutcome::accept:
        ++stats.accepts;
        done = true;
        break;
      case detail::McOutcome::reject:
        ++stats.rejects;
        done = true;
        break;
      case detail::McOutcome::restart:
        if (single_round)
          throw std::logic_error("single-round machine produced a restart");
        break;
      }
    }
    if (!done) throw MonteCarloDivergence(trial, round_cap);
    ++stats.trials;
  }
  return stats;
}

inline EstimateReport estimate(const MachineDescription &desc, std::string_view w, long trials,
                               std::uint64_t seed, long round_cap = kDefaultRoundCap) {
  EstimateReport rep;
  rep.stats = run_trials(desc, w, trials, seed, round_cap);
  rep.empirical_accept = double(rep.stats.accepts) / double(rep.stats.trials);
  rep.mean_steps = double(rep.stats.total_steps) / double(rep.stats.trials);
  rep.low_confidence = trials < 100;

  AnyVerdict v = machine_verdict(desc, w);
  long s = long(w.size()) + 2;
  std::visit([&](const auto &verdict) {
    using R = std::decay_t<decltype(verdict.f_accept)>;
    auto to_double = [](const R &x) {
      if constexpr (is_rational_scalar<R>) return rat_to_double(x);
      else return x;
    };
    if (verdict.valid) rep.exact_accept = to_double(verdict.f_accept);
    if (verdict.basis) {
      R p = verdict.basis->p_accept + verdict.basis->p_reject;
      if (p > R(0)) rep.expected_steps = double(s) / to_double(p);
    } else {
      rep.expected_steps = double(s); // single pass, fixed length
    }
  }, v);
  return rep;
}

} // namespace rtfa
