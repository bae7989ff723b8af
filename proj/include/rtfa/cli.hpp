#pragma once

// Command-line front end. Verbs:
//
//   eval      exact acceptance value of a machine on one word
//   classify  sweep all words up to a length bound against a named language
//   convert   run one of the machine-to-machine constructions
//   verify    parse a machine file and report its validity
//   zoo       emit one of the built-in machines
//   mc        sampled execution with a fixed seed
//
// Exit codes: 0 success, 1 a check failed (counterexamples, invalid machine,
// divergent sampling), 2 usage or input errors. All output is deterministic:
// rationals are exact, floats use 17 significant digits, and report lines
// appear in a fixed order. --tsv swaps the keyed report for tab-separated
// rows meant for scripts.

#include "rtfa/montecarlo.hpp"
#include "rtfa/transforms.hpp"
#include "rtfa/zoo.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <fstream>
#include <functional>
#include <iostream>
#include <regex>
#include <sstream>
#include <string>
#include <vector>

namespace rtfa::cli {

namespace detail {

struct CliError {
  int code;
  std::string message;
};

inline std::string load_text(const std::string &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CliError{2, "cannot open '" + path + "'"};
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

inline MachineDescription load_machine(const std::string &path) {
  try {
    return parse_machine(load_text(path));
  } catch (const ParseError &e) {
    throw CliError{2, path + ": " + e.what()};
  }
}

inline Rat rational_arg(const std::string &text, const char *what) {
  try {
    return parse_rational(text);
  } catch (const std::exception &) {
    throw CliError{2, std::string(what) + " expects an exact rational like 1/4, got '" +
                          text + "'"};
  }
}

inline void write_output(const std::string &text, const std::string &path, std::ostream &out) {
  if (path.empty()) {
    out << text;
    return;
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw CliError{2, "cannot write '" + path + "'"};
  f << text;
}

// Uniform text for verdict fields across the two scalar backends.
struct VerdictText {
  std::string f_accept, f_reject, p_accept, p_reject, expected_steps;
  bool valid = false, has_round = false;
};

inline VerdictText verdict_text(const AnyVerdict &v, long s) {
  VerdictText t;
  std::visit([&](const auto &verdict) {
    using R = std::decay_t<decltype(verdict.f_accept)>;
    auto fmt = [](const R &x) {
      if constexpr (is_rational_scalar<R>) return format_rational(x);
      else return format_double(x);
    };
    t.valid = verdict.valid;
    t.f_accept = fmt(verdict.f_accept);
    t.f_reject = fmt(verdict.f_reject);
    if (verdict.basis) {
      t.has_round = true;
      t.p_accept = fmt(verdict.basis->p_accept);
      t.p_reject = fmt(verdict.basis->p_reject);
      R p = verdict.basis->p_accept + verdict.basis->p_reject;
      if (p > R(0)) t.expected_steps = fmt(R(s) / p);
      else t.expected_steps = "none";
    } else {
      t.expected_steps = std::to_string(s);
    }
  }, v);
  return t;
}

inline LanguagePredicate language_by_name(const std::string &name) {
  if (name == "eq") return [](const std::string &w) { return leq_language(w); };
  if (name == "pal") return [](const std::string &w) { return lpal_language(w); };
  if (name == "eqeq") return [](const std::string &w) { return leqeq_language(w); };
  if (name.rfind("regex:", 0) == 0) {
    try {
      auto re = std::make_shared<std::regex>(name.substr(6));
      return [re](const std::string &w) { return std::regex_match(w, *re); };
    } catch (const std::regex_error &e) {
      throw CliError{2, "bad regex '" + name.substr(6) + "': " + e.what()};
    }
  }
  throw CliError{2, "unknown language '" + name + "' (use eq, pal, eqeq, or regex:<pattern>)"};
}

// Worst structural violation for reporting; rational machines are exact.
inline std::optional<double> worst_violation(const MachineDescription &desc) {
  auto unitary_worst = [](const SymbolMap<Matrix<Cplx>> &m) {
    auto rep = validate_family(FamilyKind::unitary, rtfa::detail::family_of(m),
                               kDefaultValidationTol);
    double worst = 0;
    for (const auto &e : rep.entries) worst = std::max(worst, e.violation);
    return worst;
  };
  auto kraus_worst = [](const QfaMachine &m) {
    double worst = 0;
    auto one = [&](const std::vector<Matrix<Cplx>> &ops) {
      auto rep = validate_family(FamilyKind::admissible, ops, kDefaultValidationTol);
      worst = std::max(worst, rep.entries.front().violation);
    };
    one(m.kraus.cent);
    for (const auto &ops : m.kraus.sigma) one(ops);
    one(m.kraus.dollar);
    return worst;
  };
  return std::visit([&](const auto &m) -> std::optional<double> {
    using M = std::decay_t<decltype(m)>;
    if constexpr (std::is_same_v<M, QfaMachine>) return kraus_worst(m);
    else if constexpr (std::is_same_v<M, KwqfaMachine>) return unitary_worst(m.unitaries);
    else if constexpr (std::is_same_v<M, RestartQfa>) return kraus_worst(m.base);
    else if constexpr (std::is_same_v<M, PostMachine>) {
      if (const auto *q = std::get_if<QfaMachine>(&m.base)) return kraus_worst(*q);
      return std::nullopt;
    } else if constexpr (std::is_same_v<M, LatvianPostMachine>) {
      if (const auto *q = std::get_if<QfaMachine>(&m.post.base)) return kraus_worst(*q);
      return std::nullopt;
    } else
      return std::nullopt;
  }, desc);
}

inline const PostMachine &as_post(const MachineDescription &m, const char *what) {
  const auto *p = std::get_if<PostMachine>(&m);
  if (!p)
    throw CliError{2, std::string(what) + " needs a postselection machine, got kind " +
                          machine_kind_name(m)};
  return *p;
}

inline MachineDescription convert_machine(const MachineDescription &m, const std::string &to,
                                          const std::string &with_path) {
  auto with_post = [&](const char *what) {
    if (with_path.empty()) throw CliError{2, std::string(what) + " needs --with <machine>"};
    MachineDescription other = load_machine(with_path);
    return as_post(other, what);
  };
  try {
    if (to == "post") {
      if (const auto *r = std::get_if<RestartPfa>(&m)) return restart_to_post(*r);
      if (const auto *r = std::get_if<RestartQfa>(&m)) return restart_to_post(*r);
      if (const auto *l = std::get_if<LatvianPostMachine>(&m)) return latvian_to_post(*l);
      throw CliError{2, "--to post needs a restart machine or a default-verdict "
                        "postselection machine, got kind " +
                            machine_kind_name(m)};
    }
    if (to == "restart") {
      auto v = post_to_restart(as_post(m, "--to restart"));
      if (auto *r = std::get_if<RestartPfa>(&v)) return std::move(*r);
      return std::move(std::get<RestartQfa>(v));
    }
    if (to == "defer") {
      if (const auto *r = std::get_if<RestartPfa>(&m)) return defer_halting(*r);
      throw CliError{2, "--to defer needs kind pfa-restart, got " + machine_kind_name(m)};
    }
    if (to == "qfa-restart") {
      if (const auto *k = std::get_if<KwqfaMachine>(&m)) return kwqfa_restart_to_qfa_restart(*k);
      throw CliError{2, "--to qfa-restart needs kind kwqfa-restart, got " +
                            machine_kind_name(m)};
    }
    if (to == "kwqfa-restart") {
      if (const auto *r = std::get_if<RestartQfa>(&m)) return qfa_restart_to_kwqfa_restart(*r);
      throw CliError{2, "--to kwqfa-restart needs kind qfa-restart, got " +
                            machine_kind_name(m)};
    }
    if (to == "cutpoint") {
      auto v = post_to_cutpoint(as_post(m, "--to cutpoint"));
      if (auto *p = std::get_if<PfaMachine>(&v)) return std::move(*p);
      return std::move(std::get<QfaMachine>(v));
    }
    if (to == "cutpoint-zero:language" || to == "cutpoint-zero:complement") {
      LanguageSide side = to.ends_with("language") ? LanguageSide::language
                                                   : LanguageSide::complement;
      auto v = zero_error_post_to_cutpoint_zero(as_post(m, "--to cutpoint-zero"), side);
      if (auto *p = std::get_if<PfaMachine>(&v)) return std::move(*p);
      return std::move(std::get<QfaMachine>(v));
    }
    if (to == "latvian:language" || to == "latvian:complement") {
      LanguageSide side = to.ends_with("language") ? LanguageSide::language
                                                   : LanguageSide::complement;
      if (const auto *p = std::get_if<PfaMachine>(&m)) return cutpoint_zero_to_latvian(*p, side);
      if (const auto *q = std::get_if<QfaMachine>(&m)) return cutpoint_zero_to_latvian(*q, side);
      throw CliError{2, "--to latvian needs kind pfa or qfa, got " + machine_kind_name(m)};
    }
    if (to == "complement") return complement_post(as_post(m, "--to complement"));
    if (to == "union")
      return union_post(as_post(m, "--to union"), with_post("--to union"));
    if (to == "intersection")
      return intersection_post(as_post(m, "--to intersection"), with_post("--to intersection"));
    if (to.rfind("amplify:", 0) == 0) {
      int k = 0;
      try {
        k = std::stoi(to.substr(8));
      } catch (...) {
        throw CliError{2, "bad amplification order '" + to.substr(8) + "'"};
      }
      if (k < 1) throw CliError{2, "amplification order must be at least 1"};
      return amplify(as_post(m, "--to amplify"), k);
    }
  } catch (const std::invalid_argument &e) {
    throw CliError{2, std::string("conversion failed: ") + e.what()};
  }
  throw CliError{2,
                 "unknown conversion '" + to +
                     "' (use post, restart, defer, qfa-restart, kwqfa-restart, linearized, "
                     "cutpoint, cutpoint-zero:language, cutpoint-zero:complement, "
                     "latvian:language, latvian:complement, complement, union, intersection, "
                     "or amplify:<k>)"};
}

} // namespace detail

inline int run(const std::vector<std::string> &args, std::ostream &out, std::ostream &err) {
  CLI::App app{"real-time restart and postselection automata", "rtfa"};
  app.require_subcommand(1);
  int exit_code = 0;

  // --- eval ---
  std::string eval_file, eval_word;
  bool eval_tsv = false;
  auto *eval = app.add_subcommand("eval", "exact acceptance value on one word");
  eval->add_option("machine", eval_file, "machine file")->required();
  eval->add_option("word", eval_word, "input word (default empty)");
  eval->add_flag("--tsv", eval_tsv, "tab-separated output");
  eval->callback([&] {
    MachineDescription m = detail::load_machine(eval_file);
    AnyVerdict v = machine_verdict(m, eval_word);
    detail::VerdictText t = detail::verdict_text(v, long(eval_word.size()) + 2);
    const char *valid = t.valid ? "yes" : "no";
    if (eval_tsv) {
      out << "word\tf_accept\tf_reject\tvalid\tp_accept\tp_reject\texpected_steps\n";
      out << eval_word << "\t" << t.f_accept << "\t" << t.f_reject << "\t" << valid << "\t"
          << (t.has_round ? t.p_accept : "-") << "\t" << (t.has_round ? t.p_reject : "-")
          << "\t" << t.expected_steps << "\n";
    } else {
      out << "kind: " << machine_kind_name(m) << "\n";
      out << "word: \"" << eval_word << "\"\n";
      out << "f-accept: " << t.f_accept << "\n";
      out << "f-reject: " << t.f_reject << "\n";
      out << "valid: " << valid << "\n";
      if (t.has_round) {
        out << "p-accept: " << t.p_accept << "\n";
        out << "p-reject: " << t.p_reject << "\n";
      }
      out << "expected-steps: " << t.expected_steps << "\n";
    }
  });

  // --- classify ---
  std::string cls_file, cls_lang, cls_mode = "bounded", cls_lambda, cls_epsilon;
  int cls_max_len = 8;
  bool cls_tsv = false;
  auto *cls = app.add_subcommand("classify", "check recognition over all short words");
  cls->add_option("machine", cls_file, "machine file")->required();
  cls->add_option("--lang", cls_lang, "language: eq, pal, eqeq, regex:<pattern>")->required();
  cls->add_option("--mode", cls_mode,
                  "strict, nonstrict, bounded, zero-error, cutpoint-zero (default bounded)");
  cls->add_option("--lambda", cls_lambda, "cutpoint for strict/nonstrict");
  cls->add_option("--epsilon", cls_epsilon, "error bound for bounded");
  cls->add_option("--max-len", cls_max_len, "maximum word length (default 8)");
  cls->add_flag("--tsv", cls_tsv, "tab-separated output");
  cls->callback([&] {
    MachineDescription m = detail::load_machine(cls_file);
    LanguagePredicate lang = detail::language_by_name(cls_lang);
    RecognitionJudgment j;
    if (cls_mode == "strict" || cls_mode == "nonstrict") {
      if (cls_lambda.empty()) throw detail::CliError{2, "--mode " + cls_mode + " needs --lambda"};
      Rat l = detail::rational_arg(cls_lambda, "--lambda");
      j = cls_mode == "strict" ? RecognitionJudgment::strict(l)
                               : RecognitionJudgment::nonstrict(l);
    } else if (cls_mode == "bounded") {
      if (cls_epsilon.empty()) throw detail::CliError{2, "--mode bounded needs --epsilon"};
      j = RecognitionJudgment::bounded(detail::rational_arg(cls_epsilon, "--epsilon"));
    } else if (cls_mode == "zero-error") {
      j = RecognitionJudgment::zero_error();
    } else if (cls_mode == "cutpoint-zero") {
      j = RecognitionJudgment::cutpoint_zero();
    } else {
      throw detail::CliError{2, "unknown mode '" + cls_mode + "'"};
    }
    if (cls_max_len < 0) throw detail::CliError{2, "--max-len must be nonnegative"};

    RecognitionReport rep = check_recognition(m, lang, j, cls_max_len);
    auto item_line = [&](const char *tag, const RecognitionReport::Item &it) {
      const char *member = it.member ? "member" : "nonmember";
      if (cls_tsv) out << tag << "\t" << it.w << "\t" << member << "\t" << it.detail << "\n";
      else out << tag << ": \"" << it.w << "\" " << member << " " << it.detail << "\n";
    };
    for (const auto &it : rep.counterexamples) item_line("counterexample", it);
    for (const auto &it : rep.ambiguous) item_line("ambiguous", it);
    if (cls_tsv) {
      out << "summary\t" << rep.strings_checked << "\t" << rep.counterexamples.size() << "\t"
          << rep.ambiguous.size() << "\t" << (rep.pass ? "pass" : "fail") << "\n";
    } else {
      out << "checked: " << rep.strings_checked << "\n";
      out << "counterexamples: " << rep.counterexamples.size() << "\n";
      out << "ambiguous: " << rep.ambiguous.size() << "\n";
      out << "result: " << (rep.pass ? "pass" : "fail") << "\n";
    }
    if (!rep.pass) exit_code = 1;
  });

  // --- convert ---
  std::string cnv_file, cnv_to, cnv_with, cnv_out;
  auto *cnv = app.add_subcommand("convert", "apply a machine-to-machine construction");
  cnv->add_option("machine", cnv_file, "machine file")->required();
  cnv->add_option("--to", cnv_to,
                  "post, restart, defer, qfa-restart, kwqfa-restart, linearized, cutpoint, "
                  "cutpoint-zero:language|complement, latvian:language|complement, "
                  "complement, union, intersection, amplify:<k>")
      ->required();
  cnv->add_option("--with", cnv_with, "second machine for union/intersection");
  cnv->add_option("-o,--output", cnv_out, "output file (default stdout)");
  cnv->callback([&] {
    MachineDescription m = detail::load_machine(cnv_file);
    if (cnv_to == "linearized") {
      const auto *r = std::get_if<RestartQfa>(&m);
      if (!r)
        throw detail::CliError{2, "--to linearized needs kind qfa-restart, got " +
                                      machine_kind_name(m)};
      detail::write_output(emit_linearized(linearize(*r)), cnv_out, out);
      return;
    }
    MachineDescription result = detail::convert_machine(m, cnv_to, cnv_with);
    try {
      check_machine(result);
    } catch (const std::exception &e) {
      throw detail::CliError{1, std::string("conversion produced an invalid machine: ") +
                                    e.what()};
    }
    detail::write_output(emit_machine(result), cnv_out, out);
  });

  // --- verify ---
  std::string ver_file;
  auto *ver = app.add_subcommand("verify", "parse a machine file and check its invariants");
  ver->add_option("machine", ver_file, "machine file")->required();
  ver->callback([&] {
    std::string text = detail::load_text(ver_file);
    MachineDescription m;
    try {
      m = parse_machine(text);
    } catch (const ParseError &e) {
      std::string what = e.what();
      bool invalid = what.find("machine invalid:") != std::string::npos;
      throw detail::CliError{invalid ? 1 : 2, ver_file + ": " + what};
    }
    out << "kind: " << machine_kind_name(m) << "\n";
    out << "states: " << machine_states(m) << "\n";
    out << "alphabet:";
    for (char c : machine_alphabet(m).symbols) out << " " << c;
    out << "\n";
    if (auto worst = detail::worst_violation(m))
      out << "worst-violation: " << format_double(*worst) << "\n";
    else
      out << "worst-violation: 0 (exact)\n";
    out << "valid: yes\n";
  });

  // --- zoo ---
  std::string zoo_name, zoo_eps, zoo_out;
  auto *zoo = app.add_subcommand("zoo", "emit a built-in machine");
  zoo->add_option("name", zoo_name, "leq, leq-post, leqeq, lpal, lpal-conqal")->required();
  zoo->add_option("--epsilon", zoo_eps, "error bound for leq machines (default 1/4)");
  zoo->add_option("-o,--output", zoo_out, "output file (default stdout)");
  zoo->callback([&] {
    MachineDescription m;
    bool wants_eps = zoo_name == "leq" || zoo_name == "leq-post" || zoo_name == "leqeq";
    if (!wants_eps && !zoo_eps.empty())
      throw detail::CliError{2, "zoo machine '" + zoo_name + "' does not take --epsilon"};
    Rat eps = zoo_eps.empty() ? rat(1, 4) : detail::rational_arg(zoo_eps, "--epsilon");
    try {
      if (zoo_name == "leq") m = build_leq(eps);
      else if (zoo_name == "leq-post") m = build_leq_post(eps);
      else if (zoo_name == "leqeq") m = build_leqeq(eps);
      else if (zoo_name == "lpal") m = build_lpal();
      else if (zoo_name == "lpal-conqal") m = build_lpal_conqal();
      else
        throw detail::CliError{
            2, "unknown zoo machine '" + zoo_name +
                   "' (use leq, leq-post, leqeq, lpal, lpal-conqal)"};
    } catch (const std::invalid_argument &e) {
      throw detail::CliError{2, e.what()};
    }
    detail::write_output(emit_machine(m), zoo_out, out);
  });

  // --- mc ---
  std::string mc_file, mc_word;
  long mc_trials = 10000, mc_cap = kDefaultRoundCap;
  std::uint64_t mc_seed = 1;
  bool mc_tsv = false;
  auto *mc = app.add_subcommand("mc", "sampled execution with a fixed seed");
  mc->add_option("machine", mc_file, "machine file")->required();
  mc->add_option("word", mc_word, "input word (default empty)");
  mc->add_option("--trials", mc_trials, "number of trials (default 10000)");
  mc->add_option("--seed", mc_seed, "random seed (default 1)");
  mc->add_option("--round-cap", mc_cap, "maximum rounds per trial (default 1000000)");
  mc->add_flag("--tsv", mc_tsv, "tab-separated output");
  mc->callback([&] {
    MachineDescription m = detail::load_machine(mc_file);
    EstimateReport rep;
    try {
      rep = estimate(m, mc_word, mc_trials, mc_seed, mc_cap);
    } catch (const MonteCarloDivergence &e) {
      throw detail::CliError{1, e.what()};
    } catch (const std::invalid_argument &e) {
      throw detail::CliError{2, e.what()};
    }
    auto opt = [&](const std::optional<double> &x) {
      return x ? format_double(*x) : std::string("-");
    };
    if (mc_tsv) {
      out << "word\ttrials\taccepts\trejects\trounds\tempirical_accept\texact_accept\t"
             "mean_steps\texpected_steps\tseed\tlow_confidence\n";
      out << mc_word << "\t" << rep.stats.trials << "\t" << rep.stats.accepts << "\t"
          << rep.stats.rejects << "\t" << rep.stats.total_rounds << "\t"
          << format_double(rep.empirical_accept) << "\t" << opt(rep.exact_accept) << "\t"
          << format_double(rep.mean_steps) << "\t" << opt(rep.expected_steps) << "\t"
          << rep.stats.seed << "\t" << (rep.low_confidence ? "yes" : "no") << "\n";
    } else {
      out << "word: \"" << mc_word << "\"\n";
      out << "trials: " << rep.stats.trials << "\n";
      out << "accepts: " << rep.stats.accepts << "\n";
      out << "rejects: " << rep.stats.rejects << "\n";
      out << "rounds: " << rep.stats.total_rounds << "\n";
      out << "empirical-accept: " << format_double(rep.empirical_accept) << "\n";
      out << "exact-accept: " << opt(rep.exact_accept) << "\n";
      out << "mean-steps: " << format_double(rep.mean_steps) << "\n";
      out << "expected-steps: " << opt(rep.expected_steps) << "\n";
      out << "seed: " << rep.stats.seed << "\n";
      if (rep.low_confidence) out << "low-confidence: yes\n";
    }
  });

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(std::move(reversed));
  } catch (const CLI::CallForHelp &e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForVersion &e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError &e) {
    app.exit(e, out, err);
    return 2;
  } catch (const detail::CliError &e) {
    err << "rtfa: " << e.message << "\n";
    return e.code;
  } catch (const std::exception &e) {
    err << "rtfa: " << e.what() << "\n";
    return 1;
  }
  return exit_code;
}

} // namespace rtfa::cli
