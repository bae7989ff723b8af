#include "support.hpp"

using namespace rtfa;

namespace {

PfaMachine parity_pfa() { // deterministic: accepts an odd number of a's
  PfaMachine m;
  m.states = 2;
  m.alphabet = Alphabet("ab");
  Matrix<Rat> swp(2, 2);
  swp(0, 1) = 1;
  swp(1, 0) = 1;
  m.transitions.cent = Matrix<Rat>::identity(2);
  m.transitions.sigma = {swp, Matrix<Rat>::identity(2)};
  m.transitions.dollar = Matrix<Rat>::identity(2);
  m.accept = {2};
  return m;
}

QfaMachine hadamard_qfa() {
  QfaMachine m;
  m.states = 2;
  m.alphabet = Alphabet("ab");
  double r = 1.0 / std::sqrt(2.0);
  Matrix<Cplx> h(2, 2);
  h(0, 0) = r;
  h(0, 1) = r;
  h(1, 0) = r;
  h(1, 1) = -r;
  Matrix<Cplx> p1(2, 2), p2(2, 2);
  p1(0, 0) = 1;
  p2(1, 1) = 1;
  m.kraus.cent = {Matrix<Cplx>::identity(2)};
  m.kraus.sigma = {{h}, {Matrix<Cplx>::identity(2)}};
  m.kraus.dollar = {p1, p2};
  m.accept = {1};
  return m;
}

KwqfaMachine rotor_kwqfa() {
  KwqfaMachine m;
  m.states = 3;
  m.alphabet = Alphabet("ab");
  Matrix<Cplx> cyc(3, 3);
  cyc(1, 0) = 1;
  cyc(2, 1) = 1;
  cyc(0, 2) = 1;
  Matrix<Cplx> swp(3, 3);
  swp(1, 0) = 1;
  swp(0, 1) = 1;
  swp(2, 2) = 1;
  m.unitaries.cent = Matrix<Cplx>::identity(3);
  m.unitaries.sigma = {swp, cyc};
  m.unitaries.dollar = Matrix<Cplx>::identity(3);
  m.accept = {2};
  m.reject = {3};
  return m;
}

RestartPfa drip_restart() {
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

void check_same_stats(const TrialStats &a, const TrialStats &b) {
  CHECK(a.trials == b.trials);
  CHECK(a.accepts == b.accepts);
  CHECK(a.rejects == b.rejects);
  CHECK(a.total_steps == b.total_steps);
  CHECK(a.total_rounds == b.total_rounds);
}

} // namespace

TEST_CASE("the same seed reproduces every counter") {
  std::vector<MachineDescription> machines{
      parity_pfa(),
      hadamard_qfa(),
      rotor_kwqfa(),
      build_leq(rat(1, 4)),
      build_leq_post(rat(1, 4)),
      testsup::random_restart_qfa(2, 9),
  };
  for (const auto &md : machines) {
    TrialStats first = run_trials(md, "ab", 300, 12345);
    TrialStats again = run_trials(md, "ab", 300, 12345);
    check_same_stats(first, again);
  }
}

TEST_CASE("deterministic machines produce exact counts") {
  PfaMachine m = parity_pfa();
  TrialStats acc = run_trials(m, "a", 500, 7);
  CHECK(acc.trials == 500);
  CHECK(acc.accepts == 500);
  CHECK(acc.rejects == 0);
  CHECK(acc.total_rounds == 500);
  CHECK(acc.total_steps == 500 * 3); // cent + symbol + dollar, single round

  TrialStats rej = run_trials(m, "aa", 500, 7);
  CHECK(rej.accepts == 0);
  CHECK(rej.rejects == 500);
  CHECK(rej.total_steps == 500 * 4);

  KwqfaMachine k = rotor_kwqfa();
  TrialStats kw = run_trials(k, "a", 200, 7);
  CHECK(kw.accepts == 200);
  CHECK(kw.total_rounds == 200);
  CHECK(kw.total_steps == 200 * 2); // the 'a' step halts before dollar
}

TEST_CASE("sampling a fair coin stays inside the binomial band") {
  EstimateReport rep = estimate(hadamard_qfa(), "a", 4000, 99);
  REQUIRE(rep.exact_accept.has_value());
  CHECK(*rep.exact_accept > 0.49);
  CHECK(*rep.exact_accept < 0.51);
  // 4 sigma at p = 1/2, n = 4000 is about 0.032.
  CHECK(std::abs(rep.empirical_accept - 0.5) < 0.04);
  CHECK(rep.mean_steps == 3.0);
  REQUIRE(rep.expected_steps.has_value());
  CHECK(*rep.expected_steps == 3.0);
  CHECK_FALSE(rep.low_confidence);
}

TEST_CASE("restarting machine matches its exact value and runtime") {
  RestartPfa m = build_leq(rat(1, 4));
  EstimateReport rep = estimate(m, "ab", 2000, 4242);
  REQUIRE(rep.exact_accept.has_value());
  CHECK(*rep.exact_accept == 0.75);
  REQUIRE(rep.expected_steps.has_value());
  CHECK(*rep.expected_steps == 4096.0);
  // 4 sigma at p = 3/4, n = 2000 is about 0.039.
  CHECK(std::abs(rep.empirical_accept - 0.75) < 0.045);
  // Fixed-length rounds: the step count is exactly 4 per round.
  CHECK(rep.stats.total_steps == 4 * rep.stats.total_rounds);
  // Mean steps concentrate around 4096 (4 sigma of the mean is about 370).
  CHECK(std::abs(rep.mean_steps - 4096.0) < 450.0);
}

TEST_CASE("postselection cores and their default-verdict wrappers sample alike") {
  PostMachine post = build_leq_post(rat(1, 4));
  LatvianPostMachine lat{post, Tau::accept};
  TrialStats a = run_trials(post, "ab", 400, 5);
  TrialStats b = run_trials(lat, "ab", 400, 5);
  check_same_stats(a, b);
  CHECK(a.accepts + a.rejects == a.trials);
}

TEST_CASE("rounds that cannot halt raise a divergence error with the trial") {
  RestartPfa m = drip_restart(); // on "b" every round restarts
  try {
    run_trials(m, "b", 3, 1, 50);
    FAIL("expected a divergence error");
  } catch (const MonteCarloDivergence &e) {
    CHECK(e.trial() == 0);
    CHECK(std::string(e.what()).find("trial 0") != std::string::npos);
    CHECK(std::string(e.what()).find("50") != std::string::npos);
  }

  // Palindrome rounds halt with probability ~2^-30 on "ab": far over any
  // reasonable cap.
  CHECK_THROWS_AS(run_trials(build_lpal(), "ab", 1, 1, 1000), MonteCarloDivergence);
}

TEST_CASE("estimates flag thin sampling and reject bad arguments") {
  EstimateReport rep = estimate(parity_pfa(), "a", 50, 3);
  CHECK(rep.low_confidence);
  CHECK(rep.empirical_accept == 1.0);

  CHECK_THROWS_AS(run_trials(parity_pfa(), "a", 0, 3), std::invalid_argument);
  CHECK_THROWS_AS(run_trials(parity_pfa(), "a", 10, 3, 0), std::invalid_argument);
}

TEST_CASE("sampled measured machine agrees with its exact round masses") {
  KwqfaMachine m = testsup::random_kwqfa(3, 44);
  auto acct = kwqfa_round(m, "ab");
  // The exact accept share among halting outcomes.
  double p_halt = acct.accept + acct.reject;
  REQUIRE(p_halt > 0.05); // fixture sanity
  TrialStats st = run_trials(m, "ab", 3000, 2024);
  double exact = acct.accept / p_halt;
  double sigma = std::sqrt(exact * (1.0 - exact) / 3000.0);
  CHECK(std::abs(double(st.accepts) / 3000.0 - exact) < 4.0 * sigma + 0.01);
}
