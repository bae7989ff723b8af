#include "support.hpp"

using namespace rtfa;
using Catch::Approx;

namespace {

RestartPfa drip_restart() { // per-step: 'a' halts 1/4+1/4, 'b' idles
  RestartPfa m;
  m.base.states = 3;
  m.base.alphabet = Alphabet("ab");
  Matrix<Rat> drip(3, 3);
  drip(0, 0) = rat(1, 2);
  drip(1, 0) = rat(1, 4);
  drip(2, 0) = rat(1, 4);
  drip(1, 1) = 1;
  drip(2, 2) = 1;
  m.base.transitions.cent = Matrix<Rat>::identity(3);
  m.base.transitions.sigma = {drip, Matrix<Rat>::identity(3)};
  m.base.transitions.dollar = Matrix<Rat>::identity(3);
  m.base.accept = {2};
  m.reject = {3};
  m.timing = HaltTiming::per_step;
  return m;
}

Verdict<Rat> rat_verdict(const MachineDescription &md, const std::string &w) {
  return std::get<Verdict<Rat>>(machine_verdict(md, w));
}

void check_same_rat_verdicts(const MachineDescription &x, const MachineDescription &y,
                             int max_len) {
  testsup::for_each_word(machine_alphabet(x), max_len, [&](const std::string &w) {
    Verdict<Rat> a = rat_verdict(x, w);
    Verdict<Rat> b = rat_verdict(y, w);
    CHECK(a.valid == b.valid);
    if (a.valid && b.valid) {
      CHECK(a.f_accept == b.f_accept);
      CHECK(a.f_reject == b.f_reject);
    }
  });
}

// Deterministic one-symbol quantum machine whose only round has masses
// accept 1/2, reject 1/4, restart 1/4.
RestartQfa half_quarter_restart() {
  Matrix<Cplx> iso(3, 1);
  iso(0, 0) = 0.5;
  iso(1, 0) = 1.0 / std::sqrt(2.0);
  iso(2, 0) = 0.5;
  Matrix<Cplx> u = unitary_complete(iso);
  std::vector<Matrix<Cplx>> projectors;
  for (int q = 0; q < 3; ++q) {
    Matrix<Cplx> p(3, 3);
    p(q, q) = 1.0;
    projectors.push_back(std::move(p));
  }
  QfaMachine base;
  base.states = 3;
  base.alphabet = Alphabet("a");
  base.kraus.cent = {u};
  base.kraus.sigma = {{Matrix<Cplx>::identity(3)}};
  base.kraus.dollar = projectors;
  base.accept = {2};
  return RestartQfa{std::move(base), {3}};
}

} // namespace

TEST_CASE("restart to postselection needs halting deferred to dollar") {
  CHECK_THROWS_WITH(restart_to_post(drip_restart()),
                    Catch::Matchers::ContainsSubstring("defer_halting"));
}

TEST_CASE("halting deferral preserves both round masses exactly") {
  RestartPfa m = drip_restart();
  RestartPfa deferred = defer_halting(m);
  CHECK(deferred.base.states == m.base.states + 6);
  CHECK(deferred.timing == HaltTiming::at_end);
  CHECK_NOTHROW(check_machine(deferred));
  testsup::for_each_word(m.base.alphabet, 6, [&](const std::string &w) {
    CHECK(restart_round(m, w) == restart_round(deferred, w));
  });

  // Deferring an already at-end machine is also mass-preserving.
  RestartPfa leq = build_leq(rat(1, 4));
  RestartPfa leq2 = defer_halting(leq);
  CHECK_NOTHROW(check_machine(leq2));
  testsup::for_each_word(leq.base.alphabet, 4, [&](const std::string &w) {
    CHECK(restart_round(leq, w) == restart_round(leq2, w));
  });
}

TEST_CASE("restart and postselection give the same acceptance value") {
  RestartPfa leq = build_leq(rat(1, 4));
  PostMachine post = restart_to_post(leq);
  CHECK_NOTHROW(check_machine(post));
  check_same_rat_verdicts(leq, post, 6);

  auto back = post_to_restart(post);
  const auto *rp = std::get_if<RestartPfa>(&back);
  REQUIRE(rp != nullptr);
  CHECK(rp->timing == HaltTiming::at_end);
  CHECK(rp->base.states == 8 + 3); // three fresh sinks keep halts at dollar
  CHECK_NOTHROW(check_machine(*rp)); // includes the reachability invariant
  check_same_rat_verdicts(post, *rp, 6);

  // A per-step machine converts after deferral.
  RestartPfa drip = drip_restart();
  PostMachine drip_post = restart_to_post(defer_halting(drip));
  check_same_rat_verdicts(drip, drip_post, 6);
}

TEST_CASE("quantum restart and postselection are a pure relabeling") {
  RestartQfa m = testsup::random_restart_qfa(2, 91);
  PostMachine post = restart_to_post(m);
  CHECK_NOTHROW(check_machine(post));
  auto back = post_to_restart(post);
  const auto *rq = std::get_if<RestartQfa>(&back);
  REQUIRE(rq != nullptr);
  CHECK(*rq == m);
}

TEST_CASE("frozen combination values on the balanced-string machine") {
  PostMachine L = build_leq_post(rat(1, 4));

  auto value = [](const PostMachine &m, const std::string &w) {
    return std::get<Verdict<Rat>>(post_evaluate(m, w));
  };

  // Base machine: f_accept("ab") = 3/4, f_reject = 1/4.
  CHECK(value(L, "ab").f_accept == rat(3, 4));

  // Union rejects only when both factors reject: f_reject multiplies.
  PostMachine u = union_post(L, L);
  CHECK(value(u, "ab").f_reject == rat(1, 16));

  // Union with the complemented machine: f_reject = (1/4)(3/4).
  PostMachine u2 = union_post(L, complement_post(L));
  CHECK(value(u2, "ab").f_accept == rat(13, 16));

  // Intersection accepts only when both accept: f_accept multiplies.
  PostMachine i = intersection_post(L, L);
  Rat fa = rat(192, 1217); // value of the base machine on "a"
  CHECK(value(L, "a").f_accept == fa);
  CHECK(value(i, "a").f_accept == fa * fa);

  // Unanimous pairs square the round masses: 9/(9+1).
  PostMachine amp = amplify(L, 2);
  CHECK(detail::post_states(amp) == 64);
  CHECK(value(amp, "ab").f_accept == rat(9, 10));
}

TEST_CASE("product identities hold on every short word") {
  PostMachine L = build_leq_post(rat(1, 4));
  PostMachine co = complement_post(L);
  PostMachine u = union_post(L, co);
  PostMachine i = intersection_post(L, co);
  testsup::for_each_word(detail::post_alphabet(L), 5, [&](const std::string &w) {
    auto vl = std::get<Verdict<Rat>>(post_evaluate(L, w));
    auto vc = std::get<Verdict<Rat>>(post_evaluate(co, w));
    auto vu = std::get<Verdict<Rat>>(post_evaluate(u, w));
    auto vi = std::get<Verdict<Rat>>(post_evaluate(i, w));
    REQUIRE(vl.valid);
    CHECK(vc.f_accept == vl.f_reject);
    CHECK(vu.f_reject == vl.f_reject * vc.f_reject);
    CHECK(vi.f_accept == vl.f_accept * vc.f_accept);
  });
}

TEST_CASE("tensor products refuse mixed or mismatched bases") {
  PostMachine L = build_leq_post(rat(1, 4));

  PostMachine quantum;
  {
    QfaMachine base;
    base.states = 2;
    base.alphabet = Alphabet("ab");
    base.kraus.cent = {Matrix<Cplx>::identity(2)};
    base.kraus.sigma = {{Matrix<Cplx>::identity(2)}, {Matrix<Cplx>::identity(2)}};
    base.kraus.dollar = {Matrix<Cplx>::identity(2)};
    quantum.base = base;
    quantum.post_accept = {1};
    quantum.post_reject = {2};
  }
  CHECK_THROWS_WITH(union_post(L, quantum),
                    Catch::Matchers::ContainsSubstring("unsupported combination"));
  CHECK_NOTHROW(check_machine(intersection_post(quantum, quantum)));

  PostMachine other = L;
  std::visit([](auto &b) { b.alphabet = Alphabet("xy"); }, other.base);
  CHECK_THROWS_WITH(union_post(L, other),
                    Catch::Matchers::ContainsSubstring("alphabets must match"));

  CHECK_THROWS_AS(amplify(L, 0), std::invalid_argument);
}

TEST_CASE("amplification order is the smallest power meeting the target") {
  CHECK(choose_k(rat(1, 4), rat(1, 16)) == 3);
  CHECK(choose_k(rat(1, 3), rat(1, 9)) == 3);
  CHECK(choose_k(rat(1, 4), rat(1, 4)) == 1);
  CHECK(choose_k(Rat(0), rat(1, 100)) == 1);
  CHECK_THROWS_AS(choose_k(rat(1, 2), rat(1, 4)), std::invalid_argument);
  CHECK_THROWS_AS(choose_k(rat(1, 4), Rat(1)), std::invalid_argument);
  CHECK_THROWS_AS(choose_k(rat(1, 4), Rat(0)), std::invalid_argument);

  auto plan = plan_amplification(rat(1, 4), rat(1, 16));
  CHECK(plan.k == 3);
  CHECK(plan.epsilon_out == rat(1, 28)); // (1/3)^3 / (1 + (1/3)^3)
  CHECK(plan.epsilon_out <= rat(1, 16));

  // Minimality: one factor less misses the target.
  for (auto [eps, target] : std::vector<std::pair<Rat, Rat>>{
           {rat(1, 4), rat(1, 16)}, {rat(1, 3), rat(1, 9)}, {rat(2, 5), rat(1, 50)}}) {
    int k = choose_k(eps, target);
    Rat r = eps / (1 - eps);
    Rat threshold = target / (1 - target);
    CHECK(testsup::rat_pow(r, k) <= threshold);
    if (k > 1) CHECK(testsup::rat_pow(r, k - 1) > threshold);
  }
}

TEST_CASE("cutpoint embedding puts the acceptance value across one half") {
  PostMachine L = build_leq_post(rat(1, 4));
  auto out = post_to_cutpoint(L);
  const auto *pfa = std::get_if<PfaMachine>(&out);
  REQUIRE(pfa != nullptr);
  CHECK(pfa->states == 10);
  CHECK_NOTHROW(check_machine(*pfa));
  CHECK(pfa_accept(*pfa, "ab") == rat(2049, 4096));

  testsup::for_each_word(pfa->alphabet, 6, [&](const std::string &w) {
    auto v = std::get<Verdict<Rat>>(post_evaluate(L, w));
    Rat p = pfa_accept(*pfa, w);
    REQUIRE(v.basis.has_value());
    // p = p_a + (1 - p_a - p_r)/2 crosses 1/2 exactly with the mass order.
    CHECK(p == v.basis->p_accept + (1 - v.basis->p_accept - v.basis->p_reject) / 2);
    CHECK((p > rat(1, 2)) == (v.basis->p_accept > v.basis->p_reject));
  });
}

TEST_CASE("cutpoint embedding of a quantum postselection machine") {
  RestartQfa src = testsup::random_restart_qfa(2, 17);
  PostMachine post = restart_to_post(src);
  auto out = post_to_cutpoint(post);
  const auto *qfa = std::get_if<QfaMachine>(&out);
  REQUIRE(qfa != nullptr);
  CHECK(qfa->states == 4);
  CHECK_NOTHROW(check_machine(*qfa)); // the routing family is trace preserving

  testsup::for_each_word(qfa->alphabet, 4, [&](const std::string &w) {
    RoundOutcome<double> r = restart_round(src, w);
    double expected = r.p_accept + (1.0 - r.p_accept - r.p_reject) / 2.0;
    CHECK(qfa_accept(*qfa, w) == Approx(expected).margin(1e-9));
  });
}

TEST_CASE("zero-error postselection collapses to positive-cutpoint recognizers") {
  Dfa d = dfa_even_a();
  PostMachine post = dfa_to_zero_error_post(d);
  LanguagePredicate in_lang = [&](const std::string &w) { return d.accepts(w); };

  auto lang_side = zero_error_post_to_cutpoint_zero(post, LanguageSide::language);
  auto co_side = zero_error_post_to_cutpoint_zero(post, LanguageSide::complement);
  CHECK(check_recognition(MachineDescription(std::get<PfaMachine>(lang_side)), in_lang,
                          RecognitionJudgment::cutpoint_zero(), 6)
            .pass);
  LanguagePredicate out_lang = [&](const std::string &w) { return !d.accepts(w); };
  CHECK(check_recognition(MachineDescription(std::get<PfaMachine>(co_side)), out_lang,
                          RecognitionJudgment::cutpoint_zero(), 6)
            .pass);
}

TEST_CASE("linearization reproduces the round masses in two coordinates") {
  for (int n : {2, 3}) {
    RestartQfa m = testsup::random_restart_qfa(n, 40 + std::uint64_t(n));
    LinearizedSystem sys = linearize(m);
    CHECK(sys.dimension == n * n + 2);
    CHECK(sys.q_accept == n * n + 1);
    CHECK(sys.q_reject == n * n + 2);
    testsup::for_each_word(m.base.alphabet, n == 2 ? 5 : 4, [&](const std::string &w) {
      RoundOutcome<double> direct = restart_round(m, w);
      RoundOutcome<double> lin = linearized_run(sys, w);
      CHECK(lin.p_accept == Approx(direct.p_accept).margin(1e-9));
      CHECK(lin.p_reject == Approx(direct.p_reject).margin(1e-9));
    });
  }
}

TEST_CASE("linearized systems survive the file round trip") {
  LinearizedSystem sys = linearize(testsup::random_restart_qfa(2, 55));
  std::string text = emit_linearized(sys);
  LinearizedSystem back = parse_linearized(text);
  CHECK(back == sys);
  CHECK(emit_linearized(back) == text);

  CHECK_THROWS_WITH(parse_linearized("kind: pfa\nstates: 3\nalphabet: a\nsource-states: 1\n"),
                    Catch::Matchers::ContainsSubstring("expected kind linearized"));
  CHECK_THROWS_WITH(parse_linearized("kind: linearized\nstates: 5\nalphabet: a\n"
                                     "source-states: 2\n"),
                    Catch::Matchers::ContainsSubstring("source-states^2 + 2"));
}

TEST_CASE("compilation to measured steps squares the round masses") {
  RestartQfa m = testsup::random_restart_qfa(2, 60);
  KwqfaCompilation comp = compile_qfa_restart(m);
  int N = comp.linearized.dimension;
  CHECK(N == 6);
  CHECK(comp.machine.states == 3 * N);
  CHECK(comp.machine.accept == std::set<int>{5});
  CHECK(comp.machine.reject == std::set<int>{6});
  CHECK(comp.machine.restart.size() == std::size_t(2 * N));
  CHECK(comp.scale > 1.0);
  CHECK_NOTHROW(check_machine(comp.machine)); // all steps unitary

  testsup::for_each_word(m.base.alphabet, 4, [&](const std::string &w) {
    RoundOutcome<double> r = restart_round(m, w);
    auto acct = kwqfa_round(comp.machine, w);
    double boost = std::pow(comp.scale, 2.0 * double(w.size() + 2));
    CHECK(acct.accept * boost == Approx(r.p_accept * r.p_accept).margin(1e-8));
    CHECK(acct.reject * boost == Approx(r.p_reject * r.p_reject).margin(1e-8));
    double denom = r.p_accept * r.p_accept + r.p_reject * r.p_reject;
    if (denom > 1e-6) {
      Verdict<double> v = restart_overall(restart_round(comp.machine, w));
      REQUIRE(v.valid);
      CHECK(v.f_accept == Approx(r.p_accept * r.p_accept / denom).margin(1e-9));
    }
  });
}

TEST_CASE("compiled machine maps the half-quarter round to four fifths") {
  RestartQfa m = half_quarter_restart();
  RoundOutcome<double> r = restart_round(m, "");
  CHECK(r.p_accept == Approx(0.5).margin(1e-12));
  CHECK(r.p_reject == Approx(0.25).margin(1e-12));

  KwqfaMachine k = qfa_restart_to_kwqfa_restart(m);
  Verdict<double> v = restart_overall(restart_round(k, ""));
  REQUIRE(v.valid);
  CHECK(v.f_accept == Approx(0.8).margin(1e-9)); // (1/2)^2 / ((1/2)^2 + (1/4)^2)
}

TEST_CASE("squared-ratio error bound") {
  CHECK(squared_ratio_error_bound(rat(1, 3)) == rat(1, 5));
  CHECK(squared_ratio_error_bound(rat(1, 4)) == rat(1, 10));
  CHECK(squared_ratio_error_bound(Rat(0)) == Rat(0));
  // Always an improvement below one half.
  for (long num = 1; num < 8; ++num) {
    Rat eps(num, 16);
    CHECK(squared_ratio_error_bound(eps) < eps);
  }
}

TEST_CASE("measured machines unravel into channel form exactly") {
  for (std::uint64_t seed : {71u, 72u}) {
    KwqfaMachine m = testsup::random_kwqfa(4, seed);
    RestartQfa q = kwqfa_restart_to_qfa_restart(m);
    CHECK_NOTHROW(check_machine(q));
    testsup::for_each_word(m.alphabet, 4, [&](const std::string &w) {
      RoundOutcome<double> a = restart_round(m, w);
      RoundOutcome<double> b = restart_round(q, w);
      CHECK(a.p_accept == Approx(b.p_accept).margin(1e-9));
      CHECK(a.p_reject == Approx(b.p_reject).margin(1e-9));
    });
  }
}

TEST_CASE("zero-support automaton finds the silent inputs") {
  PostMachine pm;
  {
    PfaMachine base;
    base.states = 2;
    base.alphabet = Alphabet("ab");
    Matrix<Rat> all2(2, 2);
    all2(1, 0) = 1;
    all2(1, 1) = 1;
    base.transitions.cent = Matrix<Rat>::identity(2);
    base.transitions.sigma = {all2, Matrix<Rat>::identity(2)};
    base.transitions.dollar = Matrix<Rat>::identity(2);
    pm.base = base;
  }
  pm.post_accept = {2};

  Dfa d = zero_support_dfa(pm);
  CHECK_NOTHROW(check_dfa(d));
  CHECK(d.states == 2);
  testsup::for_each_word(Alphabet("ab"), 5, [&](const std::string &w) {
    bool silent = w.find('a') == std::string::npos;
    CHECK(d.accepts(w) == silent);
  });

  // The balanced-string machine always has postselection mass.
  Dfa noisy = zero_support_dfa(build_leq_post(rat(1, 4)));
  CHECK(noisy.accept.empty());

  PostMachine quantum;
  quantum.base = QfaMachine{};
  CHECK_THROWS_WITH(zero_support_dfa(quantum),
                    Catch::Matchers::ContainsSubstring("probabilistic base"));
}

TEST_CASE("default verdicts can be compiled away") {
  // Cutpoint-zero recognizer of "odd number of a's" with value exactly 0/1.
  PfaMachine det;
  det.states = 2;
  det.alphabet = Alphabet("ab");
  Matrix<Rat> swp(2, 2);
  swp(0, 1) = 1;
  swp(1, 0) = 1;
  det.transitions.cent = Matrix<Rat>::identity(2);
  det.transitions.sigma = {swp, Matrix<Rat>::identity(2)};
  det.transitions.dollar = Matrix<Rat>::identity(2);
  det.accept = {2};

  LanguagePredicate odd_a = [](const std::string &w) {
    return std::count(w.begin(), w.end(), 'a') % 2 == 1;
  };

  LatvianPostMachine lat = cutpoint_zero_to_latvian(det, LanguageSide::language);
  CHECK_NOTHROW(check_machine(lat));
  CHECK(check_recognition(lat, odd_a, RecognitionJudgment::zero_error(), 6).pass);

  PostMachine flat = latvian_to_post(lat);
  CHECK_NOTHROW(check_machine(flat));
  CHECK(check_recognition(flat, odd_a, RecognitionJudgment::zero_error(), 6).pass);
  check_same_rat_verdicts(lat, flat, 6);

  // The complement side defaults the silent inputs to accept.
  LatvianPostMachine co = cutpoint_zero_to_latvian(det, LanguageSide::complement);
  LanguagePredicate even_a = [&](const std::string &w) { return !odd_a(w); };
  CHECK(check_recognition(co, even_a, RecognitionJudgment::zero_error(), 6).pass);
  CHECK(check_recognition(latvian_to_post(co), even_a, RecognitionJudgment::zero_error(), 6).pass);

  LatvianPostMachine quantum;
  quantum.post.base = QfaMachine{};
  CHECK_THROWS_WITH(latvian_to_post(quantum),
                    Catch::Matchers::ContainsSubstring("probabilistic base"));
}

TEST_CASE("deterministic automata embed with zero error") {
  Dfa d = dfa_contains_aba();
  PostMachine post = dfa_to_zero_error_post(d);
  CHECK_NOTHROW(check_machine(post));
  LanguagePredicate in_lang = [&](const std::string &w) { return d.accepts(w); };
  CHECK(check_recognition(post, in_lang, RecognitionJudgment::zero_error(), 6).pass);

  Dfa partial;
  partial.states = 2;
  partial.alphabet = Alphabet("ab");
  partial.next = {{1, 2}, {0, 2}};
  partial.accept = {2};
  CHECK_THROWS_WITH(dfa_to_zero_error_post(partial),
                    Catch::Matchers::ContainsSubstring("total transition function"));
}
