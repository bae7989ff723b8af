#pragma once

// Constructive transformations between the machine kinds. Each builder
// preserves the acceptance value exactly (rational machines) or up to float
// rounding (quantum machines); the mapping notes above each function say what
// is preserved and which preconditions the input must satisfy.

#include "rtfa/machine_io.hpp"
#include "rtfa/orthonormal.hpp"
#include "rtfa/semantics.hpp"

#include <map>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace rtfa {

namespace detail {

// Top-left block embedding with identity on the appended coordinates.
inline Matrix<Rat> embed_block(const Matrix<Rat> &a, int extra) {
  Matrix<Rat> out(a.rows() + extra, a.cols() + extra);
  for (int i = 0; i < a.rows(); ++i)
    for (int j = 0; j < a.cols(); ++j) out(i, j) = a(i, j);
  for (int k = 0; k < extra; ++k) out(a.rows() + k, a.cols() + k) = 1;
  return out;
}

inline Matrix<Cplx> conj_mat(const Matrix<Cplx> &a) {
  Matrix<Cplx> out(a.rows(), a.cols());
  for (int i = 0; i < a.rows(); ++i)
    for (int j = 0; j < a.cols(); ++j) out(i, j) = std::conj(a(i, j));
  return out;
}

inline int post_states(const PostMachine &m) {
  return std::visit([](const auto &b) { return b.states; }, m.base);
}

inline const Alphabet &post_alphabet(const PostMachine &m) {
  return *std::visit([](const auto &b) { return &b.alphabet; }, m.base);
}

inline std::set<int> set_union_of(const std::set<int> &a, const std::set<int> &b) {
  std::set<int> out = a;
  out.insert(b.begin(), b.end());
  return out;
}

// Composite 1-based index of a state pair under the Kronecker convention.
inline std::set<int> pair_states(const std::set<int> &s1, const std::set<int> &s2, int n2) {
  std::set<int> out;
  for (int i : s1)
    for (int j : s2) out.insert((i - 1) * n2 + j);
  return out;
}

} // namespace detail

// ---------------------------------------------------------------------------
// Restart <-> postselection. A restart machine that halts only after dollar
// and a postselection machine with the same halting sets produce the same
// acceptance value p_a / (p_a + p_r), so the translation is just a relabeling
// of roles -- plus, in one direction, sink states that keep the halting roles
// unreachable before dollar.

inline PostMachine restart_to_post(const RestartPfa &m) {
  if (m.timing != HaltTiming::at_end)
    throw std::invalid_argument(
        "restart_to_post needs an at-end machine; run defer_halting first");
  PfaMachine base = m.base;
  std::set<int> accept = std::move(base.accept);
  base.accept.clear();
  return PostMachine{std::move(base), std::move(accept), m.reject};
}

inline PostMachine restart_to_post(const RestartQfa &m) {
  QfaMachine base = m.base;
  std::set<int> accept = std::move(base.accept);
  base.accept.clear();
  return PostMachine{std::move(base), std::move(accept), m.reject};
}

// Postselection machine -> restart machine with the same acceptance value.
// For a probabilistic base the postselection states themselves may carry
// probability before dollar, which an at-end restart machine must not allow,
// so the dollar step is rerouted into three fresh sink states (accept, reject,
// restart) that nothing reaches earlier. A quantum base needs no sinks: the
// single end-of-round measurement reads the sets directly.
inline std::variant<RestartPfa, RestartQfa> post_to_restart(const PostMachine &m) {
  if (const auto *qfa = std::get_if<QfaMachine>(&m.base)) {
    QfaMachine base = *qfa;
    base.accept = m.post_accept;
    return RestartQfa{std::move(base), m.post_reject};
  }
  const PfaMachine &src = std::get<PfaMachine>(m.base);
  int n = src.states, N = n + 3;
  int s_acc = n + 1, s_rej = n + 2, s_res = n + 3;

  Matrix<Rat> route(N, N);
  for (int q = 1; q <= n; ++q) {
    int target = m.post_accept.count(q) ? s_acc : m.post_reject.count(q) ? s_rej : s_res;
    route(target - 1, q - 1) = 1;
  }
  for (int s : {s_acc, s_rej, s_res}) route(s - 1, s - 1) = 1;

  PfaMachine base;
  base.states = N;
  base.alphabet = src.alphabet;
  base.transitions.cent = detail::embed_block(src.transitions.cent, 3);
  for (const auto &a : src.transitions.sigma)
    base.transitions.sigma.push_back(detail::embed_block(a, 3));
  base.transitions.dollar = mul(route, detail::embed_block(src.transitions.dollar, 3));
  base.accept = {s_acc};
  return RestartPfa{std::move(base), {s_rej}, {s_res}, HaltTiming::at_end};
}

// Rewrites any restart machine into an equivalent at-end one. Probability that
// halts (or restarts) mid-word is parked in three absorbing carrier states and
// released into fresh final states by the dollar step, so both round outcomes
// are preserved exactly; the price is that every round now runs full length.
inline RestartPfa defer_halting(const RestartPfa &m) {
  int n = m.base.states, N = n + 6;
  int c_acc = n + 1, c_rej = n + 2, c_res = n + 3;
  int f_acc = n + 4, f_rej = n + 5, f_res = n + 6;

  Matrix<Rat> mid(N, N); // halting states -> carriers, everything else in place
  for (int q = 1; q <= n; ++q) {
    int target = m.base.accept.count(q) ? c_acc
                 : m.reject.count(q)    ? c_rej
                 : m.restart.count(q)   ? c_res
                                        : q;
    mid(target - 1, q - 1) = 1;
  }
  for (int s : {c_acc, c_rej, c_res, f_acc, f_rej, f_res}) mid(s - 1, s - 1) = 1;

  Matrix<Rat> fin(N, N); // carriers and halting states -> finals
  for (int q = 1; q <= n; ++q) {
    int target = m.base.accept.count(q) ? f_acc
                 : m.reject.count(q)    ? f_rej
                 : m.restart.count(q)   ? f_res
                                        : q;
    fin(target - 1, q - 1) = 1;
  }
  fin(f_acc - 1, c_acc - 1) = 1;
  fin(f_rej - 1, c_rej - 1) = 1;
  fin(f_res - 1, c_res - 1) = 1;
  for (int s : {f_acc, f_rej, f_res}) fin(s - 1, s - 1) = 1;

  bool collect_mid = m.timing == HaltTiming::per_step;
  auto lift = [&](const Matrix<Rat> &a) {
    Matrix<Rat> e = detail::embed_block(a, 6);
    return collect_mid ? mul(mid, e) : e;
  };

  PfaMachine base;
  base.states = N;
  base.alphabet = m.base.alphabet;
  base.transitions.cent = lift(m.base.transitions.cent);
  for (const auto &a : m.base.transitions.sigma) base.transitions.sigma.push_back(lift(a));
  base.transitions.dollar = mul(fin, mul(mid, detail::embed_block(m.base.transitions.dollar, 6)));
  base.accept = {f_acc};
  return RestartPfa{std::move(base), {f_rej}, {f_res}, HaltTiming::at_end};
}

// ---------------------------------------------------------------------------
// Measured-every-step machine -> general quantum machine, exactly. Each step
// becomes four Kraus operators: evolve the nonhalting part, or freeze the
// branch in its restart / accept / reject subspace.

inline RestartQfa kwqfa_restart_to_qfa_restart(const KwqfaMachine &m) {
  int n = m.states;
  auto projector = [&](const std::set<int> &s) {
    Matrix<Cplx> p(n, n);
    for (int q : s) p(q - 1, q - 1) = 1.0;
    return p;
  };
  std::set<int> halting = detail::set_union_of(
      detail::set_union_of(m.accept, m.reject), m.restart);
  Matrix<Cplx> nonhalt(n, n);
  for (int q = 1; q <= n; ++q)
    if (!halting.count(q)) nonhalt(q - 1, q - 1) = 1.0;

  auto lift = [&](const Matrix<Cplx> &u) {
    std::vector<Matrix<Cplx>> ops;
    ops.push_back(mul(u, nonhalt));       // continue the computation
    ops.push_back(projector(m.restart));  // frozen restart branch
    ops.push_back(projector(m.accept));   // frozen accept branch
    ops.push_back(projector(m.reject));   // frozen reject branch
    return ops;
  };

  QfaMachine base;
  base.states = n;
  base.alphabet = m.alphabet;
  base.kraus.cent = lift(m.unitaries.cent);
  for (const auto &u : m.unitaries.sigma) base.kraus.sigma.push_back(lift(u));
  base.kraus.dollar = lift(m.unitaries.dollar);
  base.accept = m.accept;
  return RestartQfa{std::move(base), m.reject};
}

// ---------------------------------------------------------------------------
// Linearization: track the vectorized density operator of a quantum restart
// machine with one matrix per symbol. Coordinates 1..n^2 hold vec(rho) in
// row-major order; the two extra coordinates accumulate the round's accept and
// reject probabilities, fed once by the dollar matrix.

struct LinearizedSystem {
  int dimension = 0;     // n^2 + 2
  int source_states = 0; // n
  Alphabet alphabet;
  SymbolMap<Matrix<Cplx>> matrices;
  int q_accept = 0, q_reject = 0; // 1-based accumulator coordinates
  bool operator==(const LinearizedSystem &) const = default;
};

inline LinearizedSystem linearize(const RestartQfa &m) {
  int n = m.base.states;
  int d = n * n, N = d + 2;

  auto channel_matrix = [&](const std::vector<Matrix<Cplx>> &kraus) {
    Matrix<Cplx> a(d, d);
    for (const auto &e : kraus) {
      Matrix<Cplx> t = kron(e, detail::conj_mat(e));
      for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) a(i, j) += t(i, j);
    }
    return a;
  };
  auto augment_mid = [&](const Matrix<Cplx> &a) {
    Matrix<Cplx> out(N, N);
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) out(i, j) = a(i, j);
    out(d, d) = 1.0;
    out(d + 1, d + 1) = 1.0;
    return out;
  };

  LinearizedSystem sys;
  sys.dimension = N;
  sys.source_states = n;
  sys.alphabet = m.base.alphabet;
  sys.q_accept = d + 1;
  sys.q_reject = d + 2;

  sys.matrices.cent = augment_mid(channel_matrix(m.base.kraus.cent));
  for (const auto &kraus : m.base.kraus.sigma)
    sys.matrices.sigma.push_back(augment_mid(channel_matrix(kraus)));

  // Reading a trace over a state set from vec(rho) picks the matching diagonal
  // coordinates (q-1)*n + q.
  Matrix<Cplx> collapse(2, d);
  for (int q : m.base.accept) collapse(0, (q - 1) * n + (q - 1)) = 1.0;
  for (int q : m.reject) collapse(1, (q - 1) * n + (q - 1)) = 1.0;
  Matrix<Cplx> readout = mul(collapse, channel_matrix(m.base.kraus.dollar));

  Matrix<Cplx> dollar(N, N);
  for (int j = 0; j < d; ++j) {
    dollar(d, j) = readout(0, j);
    dollar(d + 1, j) = readout(1, j);
  }
  dollar(d, d) = 1.0;
  dollar(d + 1, d + 1) = 1.0;
  sys.matrices.dollar = dollar;
  return sys;
}

inline RoundOutcome<double> linearized_run(const LinearizedSystem &sys, std::string_view w) {
  std::vector<Cplx> v(std::size_t(sys.dimension));
  v[0] = 1.0; // vec of |1><1|
  scan_word(sys.matrices, sys.alphabet, w, [&](const Matrix<Cplx> &a) { v = rtfa::apply(a, v); });
  return {v[std::size_t(sys.q_accept - 1)].real(), v[std::size_t(sys.q_reject - 1)].real()};
}

inline std::string emit_linearized(const LinearizedSystem &sys) {
  std::ostringstream out;
  detail::emit_header(out, "linearized", sys.dimension, sys.alphabet);
  out << "source-states: " << sys.source_states << "\n";
  detail::emit_single_matrices(out, sys.alphabet, sys.matrices);
  return out.str();
}

inline LinearizedSystem parse_linearized(const std::string &text) {
  detail::RawMachine raw = detail::split_machine_text(text);
  auto key = [&](const std::string &name) -> const std::vector<std::string> & {
    auto it = raw.keys.find(name);
    if (it == raw.keys.end()) throw ParseError(0, "missing required key '" + name + "'");
    return it->second.second;
  };
  auto int_key = [&](const std::string &name) {
    const auto &v = key(name);
    if (v.size() != 1) throw ParseError(raw.keys.at(name).first, name + " expects one integer");
    try {
      return std::stoi(v[0]);
    } catch (...) {
      throw ParseError(raw.keys.at(name).first, name + " expects one integer");
    }
  };
  if (key("kind") != std::vector<std::string>{"linearized"})
    throw ParseError(raw.keys.at("kind").first, "expected kind linearized");
  for (const auto &[k, v] : raw.keys)
    if (k != "kind" && k != "states" && k != "alphabet" && k != "source-states")
      throw ParseError(v.first, "unknown key '" + k + "' for kind linearized");

  LinearizedSystem sys;
  sys.dimension = int_key("states");
  sys.source_states = int_key("source-states");
  if (sys.dimension != sys.source_states * sys.source_states + 2)
    throw ParseError(raw.keys.at("states").first,
                     "states must equal source-states^2 + 2");
  for (const std::string &tok : key("alphabet")) {
    if (tok.size() != 1)
      throw ParseError(raw.keys.at("alphabet").first, "alphabet symbols are single characters");
    sys.alphabet.symbols.push_back(tok[0]);
  }
  check_alphabet(sys.alphabet);
  sys.q_accept = sys.dimension - 1;
  sys.q_reject = sys.dimension;

  sys.matrices.sigma.resize(std::size_t(sys.alphabet.size()));
  std::set<int> seen;
  for (const detail::MatrixBlock &b : raw.blocks) {
    if (b.kraus_index)
      throw ParseError(b.header_line, "kind linearized does not take kraus indices");
    int slot;
    if (b.symbol == "cent") slot = -1;
    else if (b.symbol == "dollar") slot = -2;
    else if (b.symbol.size() == 1 && sys.alphabet.index_of(b.symbol[0]) >= 0)
      slot = sys.alphabet.index_of(b.symbol[0]);
    else
      throw ParseError(b.header_line, "matrix symbol '" + b.symbol + "' is not in the alphabet");
    if (!seen.insert(slot).second)
      throw ParseError(b.header_line, "duplicate matrix for '" + b.symbol + "'");
    Matrix<Cplx> m = detail::parse_matrix_rows<Cplx>(b.rows, sys.dimension);
    if (slot == -1) sys.matrices.cent = std::move(m);
    else if (slot == -2) sys.matrices.dollar = std::move(m);
    else sys.matrices.sigma[std::size_t(slot)] = std::move(m);
  }
  if (int(seen.size()) != sys.alphabet.size() + 2)
    throw ParseError(0, "missing matrix blocks (need cent, dollar, and every symbol)");
  return sys;
}

// ---------------------------------------------------------------------------
// Quantum restart machine -> measured-every-step machine. The linearized
// matrices are completed to unitaries over three stacked copies of the
// linearized space with one shared scale 1/l; amplitude that leaks into the
// second and third copies restarts. A round then holds the linearized vector
// times l^-(|w|+2), so the outcome probabilities become the squares
// (p_a / l^k)^2 and (p_r / l^k)^2 and the acceptance value maps through
// x -> x^2 / (x^2 + (1-x)^2).

struct KwqfaCompilation {
  LinearizedSystem linearized;
  double scale = 0; // shared column norm l
  KwqfaMachine machine;
};

inline KwqfaCompilation compile_qfa_restart(const RestartQfa &m) {
  KwqfaCompilation out;
  out.linearized = linearize(m);
  int N = out.linearized.dimension;

  std::vector<Matrix<Cplx>> family = detail::family_of(out.linearized.matrices);
  OrthonormalExtension ext = orthonormal_extend(family);
  out.scale = ext.l;

  std::vector<Matrix<Cplx>> unitaries;
  for (std::size_t s = 0; s < family.size(); ++s)
    unitaries.push_back(unitary_complete(stack_scaled(family[s], ext.b[s], ext.c[s], ext.l)));

  KwqfaMachine k;
  k.states = 3 * N;
  k.alphabet = out.linearized.alphabet;
  k.unitaries.cent = unitaries.front();
  for (std::size_t s = 1; s + 1 < unitaries.size(); ++s)
    k.unitaries.sigma.push_back(unitaries[s]);
  k.unitaries.dollar = unitaries.back();
  k.accept = {out.linearized.q_accept};
  k.reject = {out.linearized.q_reject};
  for (int q = N + 1; q <= 3 * N; ++q) k.restart.insert(q);
  out.machine = std::move(k);
  return out;
}

inline KwqfaMachine qfa_restart_to_kwqfa_restart(const RestartQfa &m) {
  return compile_qfa_restart(m).machine;
}

// Error bound surviving the squaring of the round masses: a bounded-error
// machine with error eps maps to one with error eps^2 / (1 - 2 eps + 2 eps^2).
inline Rat squared_ratio_error_bound(const Rat &eps) {
  Rat denom = 1 - 2 * eps + 2 * eps * eps;
  return eps * eps / denom;
}

// ---------------------------------------------------------------------------
// Tensor combinations of postselection machines. Both factors run in parallel
// on the same input; the product postselects on the chosen pattern of the
// factors' postselection verdicts.

enum class TensorSets {
  union_lang,        // reject only when both reject
  intersection_lang, // accept only when both accept
  unanimity          // keep only agreeing pairs (error amplification)
};

namespace detail {

inline std::variant<PfaMachine, QfaMachine> tensor_base_pair(const PostMachine &x,
                                                             const PostMachine &y) {
  if (std::holds_alternative<PfaMachine>(x.base) && std::holds_alternative<PfaMachine>(y.base)) {
    const PfaMachine &p = std::get<PfaMachine>(x.base);
    const PfaMachine &q = std::get<PfaMachine>(y.base);
    if (!(p.alphabet == q.alphabet))
      throw std::invalid_argument("tensor product: alphabets must match");
    PfaMachine out;
    out.states = p.states * q.states;
    out.alphabet = p.alphabet;
    out.transitions.cent = kron(p.transitions.cent, q.transitions.cent);
    for (std::size_t s = 0; s < p.transitions.sigma.size(); ++s)
      out.transitions.sigma.push_back(kron(p.transitions.sigma[s], q.transitions.sigma[s]));
    out.transitions.dollar = kron(p.transitions.dollar, q.transitions.dollar);
    return out;
  }
  if (std::holds_alternative<QfaMachine>(x.base) && std::holds_alternative<QfaMachine>(y.base)) {
    const QfaMachine &p = std::get<QfaMachine>(x.base);
    const QfaMachine &q = std::get<QfaMachine>(y.base);
    if (!(p.alphabet == q.alphabet))
      throw std::invalid_argument("tensor product: alphabets must match");
    QfaMachine out;
    out.states = p.states * q.states;
    out.alphabet = p.alphabet;
    auto pairwise = [](const std::vector<Matrix<Cplx>> &a, const std::vector<Matrix<Cplx>> &b) {
      std::vector<Matrix<Cplx>> ops;
      for (const auto &e : a)
        for (const auto &f : b) ops.push_back(kron(e, f));
      return ops;
    };
    out.kraus.cent = pairwise(p.kraus.cent, q.kraus.cent);
    for (std::size_t s = 0; s < p.kraus.sigma.size(); ++s)
      out.kraus.sigma.push_back(pairwise(p.kraus.sigma[s], q.kraus.sigma[s]));
    out.kraus.dollar = pairwise(p.kraus.dollar, q.kraus.dollar);
    return out;
  }
  throw std::invalid_argument(
      "unsupported combination: tensor product needs two pfa-based or two qfa-based machines");
}

} // namespace detail

inline PostMachine tensor_post(const PostMachine &x, const PostMachine &y, TensorSets op) {
  int n2 = detail::post_states(y);
  PostMachine out{detail::tensor_base_pair(x, y), {}, {}};
  std::set<int> post1 = detail::set_union_of(x.post_accept, x.post_reject);
  std::set<int> post2 = detail::set_union_of(y.post_accept, y.post_reject);
  std::set<int> all_pairs = detail::pair_states(post1, post2, n2);
  switch (op) {
  case TensorSets::union_lang: {
    out.post_reject = detail::pair_states(x.post_reject, y.post_reject, n2);
    for (int q : all_pairs)
      if (!out.post_reject.count(q)) out.post_accept.insert(q);
    break;
  }
  case TensorSets::intersection_lang: {
    out.post_accept = detail::pair_states(x.post_accept, y.post_accept, n2);
    for (int q : all_pairs)
      if (!out.post_accept.count(q)) out.post_reject.insert(q);
    break;
  }
  case TensorSets::unanimity:
    out.post_accept = detail::pair_states(x.post_accept, y.post_accept, n2);
    out.post_reject = detail::pair_states(x.post_reject, y.post_reject, n2);
    break;
  }
  return out;
}

// Swapping the postselection roles inverts the acceptance value, so bounded
// error for a language becomes bounded error for its complement.
inline PostMachine complement_post(const PostMachine &m) {
  return PostMachine{m.base, m.post_reject, m.post_accept};
}

inline PostMachine union_post(const PostMachine &x, const PostMachine &y) {
  return tensor_post(x, y, TensorSets::union_lang);
}

inline PostMachine intersection_post(const PostMachine &x, const PostMachine &y) {
  return tensor_post(x, y, TensorSets::intersection_lang);
}

// k independent copies postselected on unanimous verdicts: round masses become
// p_a^k and p_r^k, so a reject/accept ratio r drops to r^k.
inline PostMachine amplify(const PostMachine &m, int k) {
  if (k < 1) throw std::invalid_argument("amplification order must be at least 1");
  PostMachine out = m;
  for (int i = 1; i < k; ++i) out = tensor_post(out, m, TensorSets::unanimity);
  return out;
}

struct AmplificationPlan {
  int k = 1;
  Rat epsilon_in, epsilon_out; // epsilon_out = r^k / (1 + r^k), r = eps/(1-eps)
};

// Smallest k with (eps/(1-eps))^k <= target/(1-target), by exact iteration.
inline int choose_k(const Rat &eps, const Rat &target) {
  if (sgn(eps) < 0 || eps >= Rat(1, 2))
    throw std::invalid_argument("choose_k: error bound must lie in [0, 1/2)");
  if (sgn(target) < 0 || target >= 1)
    throw std::invalid_argument("choose_k: target must lie in [0, 1)");
  if (sgn(target) == 0 && sgn(eps) > 0)
    throw std::invalid_argument("choose_k: cannot amplify a positive error to zero");
  Rat r = eps / (1 - eps);
  Rat threshold = target / (1 - target);
  int k = 1;
  Rat cur = r;
  while (cur > threshold) {
    cur *= r;
    ++k;
  }
  return k;
}

inline AmplificationPlan plan_amplification(const Rat &eps, const Rat &target) {
  AmplificationPlan plan;
  plan.k = choose_k(eps, target);
  plan.epsilon_in = eps;
  Rat r = eps / (1 - eps);
  Rat rk = 1;
  for (int i = 0; i < plan.k; ++i) rk *= r;
  plan.epsilon_out = rk / (1 + rk);
  return plan;
}

// ---------------------------------------------------------------------------
// Postselection -> plain machine with cutpoint 1/2. The dollar step spreads
// all non-postselection mass evenly over two fresh sink states, only one of
// which accepts, so the acceptance probability becomes
// p_a + (1 - p_a - p_r)/2, which exceeds 1/2 exactly when p_a > p_r.

inline std::variant<PfaMachine, QfaMachine> post_to_cutpoint(const PostMachine &m) {
  std::set<int> post = detail::set_union_of(m.post_accept, m.post_reject);

  if (const auto *src = std::get_if<PfaMachine>(&m.base)) {
    int n = src->states, N = n + 2;
    int s_yes = n + 1, s_no = n + 2;
    Matrix<Rat> route(N, N);
    for (int q = 1; q <= n; ++q) {
      if (post.count(q)) route(q - 1, q - 1) = 1;
      else {
        route(s_yes - 1, q - 1) = rat(1, 2);
        route(s_no - 1, q - 1) = rat(1, 2);
      }
    }
    route(s_yes - 1, s_yes - 1) = 1;
    route(s_no - 1, s_no - 1) = 1;

    PfaMachine out;
    out.states = N;
    out.alphabet = src->alphabet;
    out.transitions.cent = detail::embed_block(src->transitions.cent, 2);
    for (const auto &a : src->transitions.sigma)
      out.transitions.sigma.push_back(detail::embed_block(a, 2));
    out.transitions.dollar = mul(route, detail::embed_block(src->transitions.dollar, 2));
    out.accept = m.post_accept;
    out.accept.insert(s_yes);
    return out;
  }

  const QfaMachine &src = std::get<QfaMachine>(m.base);
  int n = src.states, N = n + 2;
  int s_yes = n + 1, s_no = n + 2;

  // Routing channel applied after the base dollar step: keep postselection
  // states in place, send each other state's mass half to each sink.
  std::vector<Matrix<Cplx>> routing;
  {
    Matrix<Cplx> keep(N, N);
    for (int q : post) keep(q - 1, q - 1) = 1.0;
    routing.push_back(std::move(keep));
    double half = 1.0 / std::sqrt(2.0);
    for (int q = 1; q <= n; ++q) {
      if (post.count(q)) continue;
      Matrix<Cplx> yes(N, N), no(N, N);
      yes(s_yes - 1, q - 1) = half;
      no(s_no - 1, q - 1) = half;
      routing.push_back(std::move(yes));
      routing.push_back(std::move(no));
    }
    Matrix<Cplx> sinks(N, N);
    sinks(s_yes - 1, s_yes - 1) = 1.0;
    sinks(s_no - 1, s_no - 1) = 1.0;
    routing.push_back(std::move(sinks));
  }

  // Embed the base operators; the first of each collection carries the
  // identity on the sink coordinates so the family stays trace preserving.
  auto lift = [&](const std::vector<Matrix<Cplx>> &ops, bool with_sink_identity) {
    std::vector<Matrix<Cplx>> out_ops;
    for (std::size_t i = 0; i < ops.size(); ++i) {
      Matrix<Cplx> e(N, N);
      for (int r = 0; r < n; ++r)
        for (int c = 0; c < n; ++c) e(r, c) = ops[i](r, c);
      if (i == 0 && with_sink_identity) {
        e(s_yes - 1, s_yes - 1) = 1.0;
        e(s_no - 1, s_no - 1) = 1.0;
      }
      out_ops.push_back(std::move(e));
    }
    return out_ops;
  };
  auto is_zero_matrix = [](const Matrix<Cplx> &a) {
    for (int i = 0; i < a.rows(); ++i)
      for (int j = 0; j < a.cols(); ++j)
        if (!is_zero(a(i, j))) return false;
    return true;
  };

  QfaMachine out;
  out.states = N;
  out.alphabet = src.alphabet;
  out.kraus.cent = lift(src.kraus.cent, true);
  for (const auto &ops : src.kraus.sigma) out.kraus.sigma.push_back(lift(ops, true));
  for (const auto &e : lift(src.kraus.dollar, true))
    for (const auto &k : routing) {
      Matrix<Cplx> composed = mul(k, e);
      if (!is_zero_matrix(composed)) out.kraus.dollar.push_back(std::move(composed));
    }
  out.accept = m.post_accept;
  out.accept.insert(s_yes);
  return out;
}

// For a machine whose acceptance value is always 0 or 1, membership reduces to
// "some postselection-accept mass exists" -- a cutpoint-zero question -- and
// likewise for the complement through the postselection-reject states.
enum class LanguageSide { language, complement };

inline std::variant<PfaMachine, QfaMachine>
zero_error_post_to_cutpoint_zero(const PostMachine &m, LanguageSide side) {
  const std::set<int> &mark = side == LanguageSide::language ? m.post_accept : m.post_reject;
  if (const auto *src = std::get_if<PfaMachine>(&m.base)) {
    PfaMachine out = *src;
    out.accept = mark;
    return out;
  }
  QfaMachine out = std::get<QfaMachine>(m.base);
  out.accept = mark;
  return out;
}

// ---------------------------------------------------------------------------
// Zero-postselection-support automaton: the deterministic automaton of
// reachable state supports, accepting exactly the inputs whose postselection
// mass is zero. Exact because supports of nonnegative rational vectors add.

inline Dfa zero_support_dfa(const PostMachine &m) {
  const auto *base = std::get_if<PfaMachine>(&m.base);
  if (!base)
    throw std::invalid_argument("zero_support_dfa needs a probabilistic base");
  int n = base->states;
  std::set<int> post = detail::set_union_of(m.post_accept, m.post_reject);

  auto support_step = [&](const Matrix<Rat> &a, const std::set<int> &from) {
    std::set<int> to;
    for (int q : from)
      for (int i = 0; i < n; ++i)
        if (sgn(a(i, q - 1)) > 0) to.insert(i + 1);
    return to;
  };

  std::map<std::set<int>, int> ids;
  std::vector<std::set<int>> supports;
  auto id_of = [&](const std::set<int> &s) {
    auto [it, fresh] = ids.emplace(s, int(supports.size()) + 1);
    if (fresh) supports.push_back(s);
    return it->second;
  };

  Dfa d;
  d.alphabet = base->alphabet;
  d.start = id_of(support_step(base->transitions.cent, {kInitialState}));
  for (std::size_t q = 0; q < supports.size(); ++q) {
    d.next.emplace_back();
    for (int s = 0; s < d.alphabet.size(); ++s)
      d.next.back().push_back(
          id_of(support_step(base->transitions.sigma[std::size_t(s)], supports[q])));
  }
  d.states = int(supports.size());
  for (std::size_t q = 0; q < supports.size(); ++q) {
    std::set<int> final = support_step(base->transitions.dollar, supports[q]);
    bool touches_post = false;
    for (int t : final)
      if (post.count(t)) { touches_post = true; break; }
    if (!touches_post) d.accept.insert(int(q) + 1);
  }
  return d;
}

// ---------------------------------------------------------------------------
// Default-verdict elimination: a postselection machine with a default verdict
// for zero-mass inputs becomes a plain postselection machine by running the
// zero-support automaton in parallel and postselecting on its answer. Inputs
// with zero mass put all probability outside the postselection states, and
// there the automaton component decides; other inputs keep their masses.

inline PostMachine latvian_to_post(const LatvianPostMachine &m) {
  const auto *base = std::get_if<PfaMachine>(&m.post.base);
  if (!base)
    throw std::invalid_argument("latvian_to_post needs a probabilistic base");
  Dfa d = zero_support_dfa(m.post);
  int n = base->states, nd = d.states;
  std::set<int> post = detail::set_union_of(m.post.post_accept, m.post.post_reject);

  Matrix<Rat> d_start(nd, nd); // every column resets to the automaton start
  for (int j = 0; j < nd; ++j) d_start(d.start - 1, j) = 1;
  auto d_step = [&](int s) {
    Matrix<Rat> a(nd, nd);
    for (int q = 1; q <= nd; ++q) a(d.next[std::size_t(q - 1)][std::size_t(s)] - 1, q - 1) = 1;
    return a;
  };

  PfaMachine prod;
  prod.states = n * nd;
  prod.alphabet = base->alphabet;
  prod.transitions.cent = kron(base->transitions.cent, d_start);
  for (int s = 0; s < base->alphabet.size(); ++s)
    prod.transitions.sigma.push_back(kron(base->transitions.sigma[std::size_t(s)], d_step(s)));
  prod.transitions.dollar = kron(base->transitions.dollar, Matrix<Rat>::identity(nd));

  std::set<int> nonpost, nondetect;
  for (int q = 1; q <= n; ++q)
    if (!post.count(q)) nonpost.insert(q);
  for (int j = 1; j <= nd; ++j)
    if (!d.accept.count(j)) nondetect.insert(j);

  std::set<int> default_pairs = detail::pair_states(nonpost, d.accept, nd);
  std::set<int> keep_accept = detail::pair_states(m.post.post_accept, nondetect, nd);
  std::set<int> keep_reject = detail::pair_states(m.post.post_reject, nondetect, nd);

  PostMachine out{std::move(prod), {}, {}};
  if (m.tau == Tau::accept) {
    out.post_accept = detail::set_union_of(keep_accept, default_pairs);
    out.post_reject = keep_reject;
  } else {
    out.post_accept = keep_accept;
    out.post_reject = detail::set_union_of(keep_reject, default_pairs);
  }
  return out;
}

// Cutpoint-zero recognizer -> zero-error machine with a default verdict.
// side == language: the input machine accepts members with positive value, so
// postselect on its accept states and default to reject when none are hit.
// side == complement: the input machine recognizes the complement; its accept
// states become postselection-reject and silence means accept.
inline LatvianPostMachine cutpoint_zero_to_latvian(const PfaMachine &m, LanguageSide side) {
  PfaMachine base = m;
  std::set<int> mark = std::move(base.accept);
  base.accept.clear();
  PostMachine post{std::move(base), {}, {}};
  if (side == LanguageSide::language) {
    post.post_accept = std::move(mark);
    return LatvianPostMachine{std::move(post), Tau::reject};
  }
  post.post_reject = std::move(mark);
  return LatvianPostMachine{std::move(post), Tau::accept};
}

inline LatvianPostMachine cutpoint_zero_to_latvian(const QfaMachine &m, LanguageSide side) {
  QfaMachine base = m;
  std::set<int> mark = std::move(base.accept);
  base.accept.clear();
  PostMachine post{std::move(base), {}, {}};
  if (side == LanguageSide::language) {
    post.post_accept = std::move(mark);
    return LatvianPostMachine{std::move(post), Tau::reject};
  }
  post.post_reject = std::move(mark);
  return LatvianPostMachine{std::move(post), Tau::accept};
}

// ---------------------------------------------------------------------------
// Deterministic automaton -> zero-error postselection machine: embed the
// transition function as 0/1 matrices; every input ends with mass 1 on one
// state, postselected as accept or reject.

inline PostMachine dfa_to_zero_error_post(const Dfa &d) {
  check_dfa(d);
  for (const auto &row : d.next)
    for (int t : row)
      if (t == 0)
        throw std::invalid_argument(
            "dfa_to_zero_error_post needs a total transition function");
  int n = d.states;
  PfaMachine base;
  base.states = n;
  base.alphabet = d.alphabet;
  Matrix<Rat> start(n, n);
  for (int j = 0; j < n; ++j) start(d.start - 1, j) = 1;
  base.transitions.cent = std::move(start);
  for (int s = 0; s < d.alphabet.size(); ++s) {
    Matrix<Rat> a(n, n);
    for (int q = 1; q <= n; ++q) a(d.next[std::size_t(q - 1)][std::size_t(s)] - 1, q - 1) = 1;
    base.transitions.sigma.push_back(std::move(a));
  }
  base.transitions.dollar = Matrix<Rat>::identity(n);

  PostMachine out{std::move(base), d.accept, {}};
  for (int q = 1; q <= n; ++q)
    if (!d.accept.count(q)) out.post_reject.insert(q);
  return out;
}

} // namespace rtfa
