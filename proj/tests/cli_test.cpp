#include "support.hpp"

#include "rtfa/cli.hpp"

#include <filesystem>
#include <fstream>

using namespace rtfa;

namespace {

struct CliResult {
  int code;
  std::string out, err;
};

CliResult run_cli(const std::vector<std::string> &args) {
  std::ostringstream out, err;
  int code = rtfa::cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::filesystem::path scratch_dir() {
  auto d = std::filesystem::temp_directory_path() / "rtfa-cli-scratch";
  std::filesystem::create_directories(d);
  return d;
}

std::string write_scratch(const std::string &name, const std::string &text) {
  auto p = scratch_dir() / name;
  std::ofstream f(p, std::ios::binary);
  f << text;
  return p.string();
}

bool has(const std::string &text, const std::string &needle) {
  return text.find(needle) != std::string::npos;
}

std::string read_back(const std::string &path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

PfaMachine parity_pfa() { // accepts an odd number of a's
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

RestartPfa drip_restart() { // on "b" every round restarts
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

std::string leq_file() {
  static std::string path = write_scratch("leq.rtfa", emit_machine(build_leq(rat(1, 4))));
  return path;
}

std::string parity_file() {
  static std::string path = write_scratch("parity.rtfa", emit_machine(parity_pfa()));
  return path;
}

std::string qfa_restart_file() {
  static std::string path =
      write_scratch("qr.rtfa", emit_machine(testsup::random_restart_qfa(2, 5)));
  return path;
}

} // namespace

TEST_CASE("eval prints the exact verdict of a machine file") {
  CliResult r = run_cli({"eval", leq_file(), "ab"});
  CHECK(r.code == 0);
  CHECK(r.err.empty());
  CHECK(has(r.out, "kind: pfa-restart\n"));
  CHECK(has(r.out, "word: \"ab\"\n"));
  CHECK(has(r.out, "f-accept: 3/4\n"));
  CHECK(has(r.out, "f-reject: 1/4\n"));
  CHECK(has(r.out, "valid: yes\n"));
  CHECK(has(r.out, "p-accept: 3/4096\n"));
  CHECK(has(r.out, "p-reject: 1/4096\n"));
  CHECK(has(r.out, "expected-steps: 4096\n"));

  CliResult empty = run_cli({"eval", leq_file()});
  CHECK(empty.code == 0);
  CHECK(has(empty.out, "word: \"\"\n"));
  CHECK(has(empty.out, "f-accept: 3/4\n"));
  CHECK(has(empty.out, "expected-steps: 2\n"));
}

TEST_CASE("eval on a one-shot machine omits the round masses") {
  CliResult r = run_cli({"eval", parity_file(), "ab"});
  CHECK(r.code == 0);
  CHECK(has(r.out, "kind: pfa\n"));
  CHECK(has(r.out, "f-accept: 1\n"));
  CHECK(has(r.out, "f-reject: 0\n"));
  CHECK_FALSE(has(r.out, "p-accept:"));
  CHECK(has(r.out, "expected-steps: 4\n"));
}

TEST_CASE("eval writes tab-separated rows on request") {
  CliResult r = run_cli({"eval", leq_file(), "ab", "--tsv"});
  CHECK(r.code == 0);
  CHECK(r.out ==
        "word\tf_accept\tf_reject\tvalid\tp_accept\tp_reject\texpected_steps\n"
        "ab\t3/4\t1/4\tyes\t3/4096\t1/4096\t4096\n");
}

TEST_CASE("eval reports unreadable and unparsable files") {
  CliResult missing = run_cli({"eval", "/nonexistent/machine.rtfa"});
  CHECK(missing.code == 2);
  CHECK(has(missing.err, "cannot open"));
  CHECK(missing.out.empty());

  std::string bad = write_scratch("bad.rtfa", "kind: pfa\nstates 2\n");
  CliResult parse = run_cli({"eval", bad, "a"});
  CHECK(parse.code == 2);
  CHECK(has(parse.err, "bad.rtfa"));
}

TEST_CASE("classify checks a machine against a named language") {
  CliResult ok = run_cli({"classify", leq_file(), "--lang", "eq", "--mode", "bounded",
                          "--epsilon", "1/4", "--max-len", "6"});
  CHECK(ok.code == 0);
  CHECK(has(ok.out, "checked: 127\n"));
  CHECK(has(ok.out, "counterexamples: 0\n"));
  CHECK(has(ok.out, "result: pass\n"));

  CliResult bad = run_cli({"classify", leq_file(), "--lang", "pal", "--mode", "bounded",
                           "--epsilon", "1/4", "--max-len", "4"});
  CHECK(bad.code == 1);
  CHECK(has(bad.out, "result: fail\n"));
  CHECK(has(bad.out, "counterexample: \"a\" member"));
}

TEST_CASE("classify supports cutpoints, zero error, and regex languages") {
  CliResult strict = run_cli({"classify", leq_file(), "--lang", "eq", "--mode", "strict",
                              "--lambda", "1/2", "--max-len", "5"});
  CHECK(strict.code == 0);
  CHECK(has(strict.out, "result: pass\n"));

  CliResult regex = run_cli({"classify", parity_file(), "--lang", "regex:(b*ab*a)*b*ab*",
                             "--mode", "zero-error", "--max-len", "5"});
  CHECK(regex.code == 0);
  CHECK(has(regex.out, "result: pass\n"));

  CliResult tsv = run_cli({"classify", leq_file(), "--lang", "eq", "--mode", "bounded",
                           "--epsilon", "1/4", "--max-len", "3", "--tsv"});
  CHECK(tsv.code == 0);
  CHECK(has(tsv.out, "summary\t15\t0\t0\tpass\n"));
}

TEST_CASE("classify rejects malformed requests") {
  auto expect_usage = [&](std::vector<std::string> args, const std::string &needle) {
    CliResult r = run_cli(args);
    INFO(needle);
    CHECK(r.code == 2);
    CHECK(has(r.err, needle));
  };
  expect_usage({"classify", leq_file(), "--lang", "eq", "--mode", "bounded"},
               "needs --epsilon");
  expect_usage({"classify", leq_file(), "--lang", "eq", "--mode", "strict"},
               "needs --lambda");
  expect_usage({"classify", leq_file(), "--lang", "eq", "--mode", "sideways"},
               "unknown mode");
  expect_usage({"classify", leq_file(), "--lang", "nope", "--mode", "zero-error"},
               "unknown language");
  expect_usage({"classify", leq_file(), "--lang", "regex:(", "--mode", "zero-error"},
               "bad regex");
  expect_usage({"classify", leq_file(), "--lang", "eq", "--mode", "zero-error",
                "--max-len", "-1"},
               "--max-len must be nonnegative");
  expect_usage({"classify", leq_file(), "--lang", "eq", "--mode", "bounded", "--epsilon",
                "0.25"},
               "exact rational");
}

TEST_CASE("convert runs the constructions end to end") {
  CliResult post = run_cli({"convert", leq_file(), "--to", "post"});
  REQUIRE(post.code == 0);
  MachineDescription pm = parse_machine(post.out);
  CHECK(machine_kind_name(pm) == std::string("post-pfa"));

  std::string post_path = (scratch_dir() / "leq-post.rtfa").string();
  CliResult to_file = run_cli({"convert", leq_file(), "--to", "post", "-o", post_path});
  REQUIRE(to_file.code == 0);
  CHECK(to_file.out.empty());
  CliResult round = run_cli({"eval", post_path, "ab"});
  CHECK(round.code == 0);
  CHECK(has(round.out, "f-accept: 3/4\n"));

  CliResult defer = run_cli({"convert", leq_file(), "--to", "defer"});
  REQUIRE(defer.code == 0);
  CHECK(machine_kind_name(parse_machine(defer.out)) == std::string("pfa-restart"));

  CliResult lin = run_cli({"convert", qfa_restart_file(), "--to", "linearized"});
  REQUIRE(lin.code == 0);
  CHECK(has(lin.out, "linearized"));
  CHECK(has(lin.out, "source-states: 2\n"));
  LinearizedSystem sys = parse_linearized(lin.out);
  CHECK(sys.dimension == 6);
}

TEST_CASE("convert reports misuse with exit code 2") {
  auto expect_usage = [&](std::vector<std::string> args, const std::string &needle) {
    CliResult r = run_cli(args);
    INFO(needle);
    CHECK(r.code == 2);
    CHECK(has(r.err, needle));
  };
  expect_usage({"convert", leq_file(), "--to", "restart"}, "needs a postselection machine");
  expect_usage({"convert", leq_file(), "--to", "union"}, "needs --with");
  expect_usage({"convert", leq_file(), "--to", "amplify:0"}, "at least 1");
  expect_usage({"convert", leq_file(), "--to", "amplify:xyz"}, "bad amplification order");
  expect_usage({"convert", leq_file(), "--to", "sideways"}, "unknown conversion");
  expect_usage({"convert", leq_file(), "--to", "linearized"}, "needs kind qfa-restart");

  // Mixing scalar backends in a product is refused by the construction itself.
  std::string post_p = write_scratch("mix-p.rtfa", emit_machine(build_leq_post(rat(1, 4))));
  std::string post_q = write_scratch(
      "mix-q.rtfa", emit_machine(restart_to_post(testsup::random_restart_qfa(2, 5))));
  CliResult mix = run_cli({"convert", post_p, "--to", "union", "--with", post_q});
  CHECK(mix.code == 2);
  CHECK(has(mix.err, "conversion failed"));
}

TEST_CASE("verify prints a structural report") {
  CliResult leq = run_cli({"verify", leq_file()});
  CHECK(leq.code == 0);
  CHECK(has(leq.out, "kind: pfa-restart\n"));
  CHECK(has(leq.out, "states: " + std::to_string(machine_states(build_leq(rat(1, 4)))) + "\n"));
  CHECK(has(leq.out, "alphabet: a b\n"));
  CHECK(has(leq.out, "worst-violation: 0 (exact)\n"));
  CHECK(has(leq.out, "valid: yes\n"));

  CliResult q = run_cli({"verify", qfa_restart_file()});
  CHECK(q.code == 0);
  CHECK(has(q.out, "kind: qfa-restart\n"));
  CHECK(has(q.out, "worst-violation: "));
  CHECK(has(q.out, "valid: yes\n"));

  PfaMachine broken = parity_pfa();
  broken.transitions.sigma[0](0, 0) = rat(1, 2); // column 1 now sums to 3/2
  std::string bad = write_scratch("broken.rtfa", emit_machine(broken));
  CliResult invalid = run_cli({"verify", bad});
  CHECK(invalid.code == 1);
  CHECK(has(invalid.err, "machine invalid"));

  std::string junk = write_scratch("junk.rtfa", "hello\n");
  CliResult garbage = run_cli({"verify", junk});
  CHECK(garbage.code == 2);
}

TEST_CASE("zoo emits machines that parse back") {
  CliResult leq = run_cli({"zoo", "leq"});
  REQUIRE(leq.code == 0);
  MachineDescription m = parse_machine(leq.out);
  CHECK(machine_kind_name(m) == std::string("pfa-restart"));
  CHECK(machine_states(m) == machine_states(build_leq(rat(1, 4))));

  std::string pal_path = (scratch_dir() / "lpal.rtfa").string();
  CliResult pal = run_cli({"zoo", "lpal", "-o", pal_path});
  REQUIRE(pal.code == 0);
  MachineDescription pm = parse_machine(read_back(pal_path));
  CHECK(machine_states(pm) == 18);

  CliResult eps = run_cli({"zoo", "leq", "--epsilon", "1/8"});
  CHECK(eps.code == 0);

  CliResult no_eps = run_cli({"zoo", "lpal", "--epsilon", "1/4"});
  CHECK(no_eps.code == 2);
  CHECK(has(no_eps.err, "does not take --epsilon"));

  CliResult unknown = run_cli({"zoo", "nope"});
  CHECK(unknown.code == 2);
  CHECK(has(unknown.err, "unknown zoo machine"));

  CliResult half = run_cli({"zoo", "leq", "--epsilon", "1/2"});
  CHECK(half.code == 2);

  CliResult fp = run_cli({"zoo", "leq", "--epsilon", "0.3"});
  CHECK(fp.code == 2);
  CHECK(has(fp.err, "exact rational"));
}

TEST_CASE("mc samples a machine with a fixed seed") {
  CliResult r = run_cli({"mc", leq_file(), "ab", "--trials", "500", "--seed", "3"});
  CHECK(r.code == 0);
  CHECK(has(r.out, "trials: 500\n"));
  CHECK(has(r.out, "exact-accept: 0.75\n"));
  CHECK(has(r.out, "expected-steps: 4096\n"));
  CHECK(has(r.out, "seed: 3\n"));

  CliResult again = run_cli({"mc", leq_file(), "ab", "--trials", "500", "--seed", "3"});
  CHECK(again.out == r.out);

  CliResult tsv = run_cli({"mc", leq_file(), "ab", "--trials", "200", "--seed", "3", "--tsv"});
  CHECK(tsv.code == 0);
  CHECK(has(tsv.out, "word\ttrials\taccepts\trejects\trounds\t"));

  std::string drip = write_scratch("drip.rtfa", emit_machine(drip_restart()));
  CliResult stuck = run_cli({"mc", drip, "b", "--trials", "3", "--round-cap", "20"});
  CHECK(stuck.code == 1);
  CHECK(has(stuck.err, "trial 0"));

  CliResult none = run_cli({"mc", leq_file(), "ab", "--trials", "0"});
  CHECK(none.code == 2);
}

TEST_CASE("usage errors and help land on the right streams") {
  CliResult none = run_cli({});
  CHECK(none.code == 2);

  CliResult help = run_cli({"--help"});
  CHECK(help.code == 0);
  CHECK(has(help.out, "eval"));
  CHECK(has(help.out, "zoo"));

  CliResult unknown = run_cli({"frobnicate"});
  CHECK(unknown.code == 2);

  CliResult missing = run_cli({"eval"});
  CHECK(missing.code == 2);
}
