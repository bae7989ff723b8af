#pragma once

// Line-oriented machine files. '#' starts a comment, blank lines are ignored.
//
//   kind: pfa | qfa | kwqfa | kwqfa-restart | pfa-restart | qfa-restart |
//         post-pfa | post-qfa | lpost-pfa | lpost-qfa
//   states: <n>
//   alphabet: a b
//   accept/reject/restart/postaccept/postreject: <1-based indices>
//   tau: A | R              (lpost kinds)
//   halt: per-step | at-end (pfa-restart)
//   matrix <symbol|cent|dollar> [<kraus-index>]:
//     <n rows of n entries>
//
// Rational entries are "p/q" or integers and are parsed exactly; complex
// entries are "(re,im)". Emission is canonical: rationals in lowest terms,
// floats with 17 significant digits (so emit . parse is the identity), role
// lines in a fixed order, matrices ordered cent, alphabet order, dollar.

#include "rtfa/machine.hpp"

#include <istream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace rtfa {

class ParseError : public std::runtime_error {
public:
  ParseError(int line, const std::string &msg)
      : std::runtime_error(line > 0 ? "line " + std::to_string(line) + ": " + msg
                                    : "machine file: " + msg),
        line_(line) {}
  int line() const { return line_; }

private:
  int line_;
};

namespace detail {

struct RawLine {
  int number = 0;
  std::string text;
};

inline std::vector<std::string> split_ws(const std::string &s) {
  std::vector<std::string> out;
  std::istringstream in(s);
  std::string tok;
  while (in >> tok) out.push_back(tok);
  return out;
}

inline std::vector<RawLine> significant_lines(const std::string &text) {
  std::vector<RawLine> out;
  std::istringstream in(text);
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::size_t a = line.find_first_not_of(" \t\r");
    if (a == std::string::npos) continue;
    std::size_t b = line.find_last_not_of(" \t\r");
    out.push_back({number, line.substr(a, b - a + 1)});
  }
  return out;
}

struct MatrixBlock {
  int header_line = 0;
  std::string symbol; // "cent", "dollar", or a single alphabet character
  std::optional<int> kraus_index;
  std::vector<RawLine> rows;
};

struct RawMachine {
  std::map<std::string, std::pair<int, std::vector<std::string>>> keys;
  std::vector<MatrixBlock> blocks;
};

inline RawMachine split_machine_text(const std::string &text) {
  auto lines = significant_lines(text);
  RawMachine raw;
  std::size_t i = 0;
  int states = -1;
  auto is_matrix_header = [](const std::string &s) { return s.rfind("matrix", 0) == 0; };

  while (i < lines.size() && !is_matrix_header(lines[i].text)) {
    const RawLine &l = lines[i];
    auto colon = l.text.find(':');
    if (colon == std::string::npos)
      throw ParseError(l.number, "expected 'key: value'");
    std::string key = l.text.substr(0, colon);
    if (key.find(' ') != std::string::npos)
      throw ParseError(l.number, "malformed key '" + key + "'");
    if (raw.keys.count(key)) throw ParseError(l.number, "duplicate key '" + key + "'");
    raw.keys[key] = {l.number, split_ws(l.text.substr(colon + 1))};
    if (key == "states") {
      if (raw.keys[key].second.size() != 1)
        throw ParseError(l.number, "states expects one integer");
      try {
        states = std::stoi(raw.keys[key].second[0]);
      } catch (...) {
        throw ParseError(l.number, "states expects one integer");
      }
    }
    ++i;
  }

  while (i < lines.size()) {
    const RawLine &l = lines[i];
    if (!is_matrix_header(l.text))
      throw ParseError(l.number, "expected a matrix header, got '" + l.text + "'");
    if (states < 1)
      throw ParseError(l.number, "matrix block before a valid 'states' key");
    if (l.text.back() != ':')
      throw ParseError(l.number, "matrix header must end with ':'");
    auto tokens = split_ws(l.text.substr(0, l.text.size() - 1));
    if (tokens.size() < 2 || tokens.size() > 3 || tokens[0] != "matrix")
      throw ParseError(l.number, "malformed matrix header");
    MatrixBlock block;
    block.header_line = l.number;
    block.symbol = tokens[1];
    if (tokens.size() == 3) {
      try {
        block.kraus_index = std::stoi(tokens[2]);
      } catch (...) {
        throw ParseError(l.number, "malformed kraus index '" + tokens[2] + "'");
      }
    }
    ++i;
    for (int r = 0; r < states; ++r, ++i) {
      if (i >= lines.size() || is_matrix_header(lines[i].text))
        throw ParseError(l.number, "matrix block needs " + std::to_string(states) + " rows");
      block.rows.push_back(lines[i]);
    }
    raw.blocks.push_back(std::move(block));
  }
  return raw;
}

template <typename T> T parse_entry(const std::string &tok);
template <> inline Rat parse_entry<Rat>(const std::string &tok) { return parse_rational(tok); }
template <> inline Cplx parse_entry<Cplx>(const std::string &tok) { return parse_complex(tok); }

template <typename T>
Matrix<T> parse_matrix_rows(const std::vector<RawLine> &rows, int n) {
  Matrix<T> m(n, n);
  for (int i = 0; i < n; ++i) {
    auto tokens = split_ws(rows[std::size_t(i)].text);
    if (int(tokens.size()) != n)
      throw ParseError(rows[std::size_t(i)].number,
                       "expected " + std::to_string(n) + " entries, got " +
                           std::to_string(tokens.size()));
    for (int j = 0; j < n; ++j) {
      try {
        m(i, j) = parse_entry<T>(tokens[std::size_t(j)]);
      } catch (const std::exception &e) {
        throw ParseError(rows[std::size_t(i)].number, e.what());
      }
    }
  }
  return m;
}

class MachineReader {
public:
  explicit MachineReader(const std::string &text) : raw_(split_machine_text(text)) {}

  MachineDescription read() {
    kind_ = single_token("kind");
    states_ = int_key("states");
    if (states_ < 1) throw ParseError(key_line("states"), "states must be at least 1");
    for (const std::string &tok : require_key("alphabet")) {
      if (tok.size() != 1)
        throw ParseError(key_line("alphabet"), "alphabet symbols are single characters");
      alphabet_.symbols.push_back(tok[0]);
    }

    MachineDescription m = build_kind();
    for (const auto &[key, value] : raw_.keys)
      if (!consumed_.count(key))
        throw ParseError(value.first, "unknown key '" + key + "' for kind " + kind_);
    try {
      check_machine(m);
    } catch (const std::exception &e) {
      throw ParseError(0, std::string("machine invalid: ") + e.what());
    }
    return m;
  }

private:
  RawMachine raw_;
  std::string kind_;
  int states_ = 0;
  Alphabet alphabet_;
  std::set<std::string> consumed_;

  int key_line(const std::string &key) { return raw_.keys.at(key).first; }

  const std::vector<std::string> &require_key(const std::string &key) {
    auto it = raw_.keys.find(key);
    if (it == raw_.keys.end()) throw ParseError(0, "missing required key '" + key + "'");
    consumed_.insert(key);
    return it->second.second;
  }

  std::string single_token(const std::string &key) {
    const auto &v = require_key(key);
    if (v.size() != 1) throw ParseError(key_line(key), key + " expects one token");
    return v[0];
  }

  int int_key(const std::string &key) {
    try {
      return std::stoi(single_token(key));
    } catch (const ParseError &) {
      throw;
    } catch (...) {
      throw ParseError(key_line(key), key + " expects an integer");
    }
  }

  std::set<int> state_set(const std::string &key) {
    auto it = raw_.keys.find(key);
    if (it == raw_.keys.end()) return {};
    consumed_.insert(key);
    std::set<int> out;
    for (const std::string &tok : it->second.second) {
      int q = 0;
      try {
        q = std::stoi(tok);
      } catch (...) {
        throw ParseError(it->second.first, "bad state index '" + tok + "'");
      }
      if (!out.insert(q).second)
        throw ParseError(it->second.first, "repeated state index " + tok);
    }
    return out;
  }

  int symbol_slot(const MatrixBlock &b) { // -1 cent, -2 dollar, else alphabet index
    if (b.symbol == "cent") return -1;
    if (b.symbol == "dollar") return -2;
    if (b.symbol.size() == 1) {
      int idx = alphabet_.index_of(b.symbol[0]);
      if (idx >= 0) return idx;
    }
    throw ParseError(b.header_line, "matrix symbol '" + b.symbol + "' is not in the alphabet");
  }

  template <typename T> SymbolMap<Matrix<T>> single_matrices() {
    SymbolMap<Matrix<T>> map;
    map.sigma.resize(std::size_t(alphabet_.size()));
    std::set<int> seen;
    for (const MatrixBlock &b : raw_.blocks) {
      if (b.kraus_index)
        throw ParseError(b.header_line, "kind " + kind_ + " does not take kraus indices");
      int slot = symbol_slot(b);
      if (!seen.insert(slot).second)
        throw ParseError(b.header_line, "duplicate matrix for '" + b.symbol + "'");
      Matrix<T> m = parse_matrix_rows<T>(b.rows, states_);
      if (slot == -1) map.cent = std::move(m);
      else if (slot == -2) map.dollar = std::move(m);
      else map.sigma[std::size_t(slot)] = std::move(m);
    }
    if (int(seen.size()) != alphabet_.size() + 2)
      throw ParseError(0, "missing matrix blocks (need cent, dollar, and every symbol)");
    return map;
  }

  SymbolMap<std::vector<Matrix<Cplx>>> kraus_matrices() {
    SymbolMap<std::vector<Matrix<Cplx>>> map;
    map.sigma.resize(std::size_t(alphabet_.size()));
    for (const MatrixBlock &b : raw_.blocks) {
      int slot = symbol_slot(b);
      auto &list = slot == -1 ? map.cent : slot == -2 ? map.dollar : map.sigma[std::size_t(slot)];
      int expected = int(list.size()) + 1;
      if (b.kraus_index && *b.kraus_index != expected)
        throw ParseError(b.header_line, "kraus indices for '" + b.symbol +
                                            "' must run 1,2,... in order (expected " +
                                            std::to_string(expected) + ")");
      if (!b.kraus_index && !list.empty())
        throw ParseError(b.header_line,
                         "repeated matrix for '" + b.symbol + "' needs explicit kraus indices");
      list.push_back(parse_matrix_rows<Cplx>(b.rows, states_));
    }
    if (map.cent.empty() || map.dollar.empty())
      throw ParseError(0, "missing matrix blocks for cent or dollar");
    for (const auto &list : map.sigma)
      if (list.empty()) throw ParseError(0, "missing matrix blocks for an alphabet symbol");
    return map;
  }

  PfaMachine pfa_base() {
    return {states_, alphabet_, single_matrices<Rat>(), state_set("accept")};
  }
  QfaMachine qfa_base() {
    return {states_, alphabet_, kraus_matrices(), state_set("accept")};
  }

  Tau tau_key() {
    std::string t = single_token("tau");
    if (t == "A") return Tau::accept;
    if (t == "R") return Tau::reject;
    throw ParseError(key_line("tau"), "tau must be A or R");
  }

  HaltTiming halt_key() {
    std::string t = single_token("halt");
    if (t == "per-step") return HaltTiming::per_step;
    if (t == "at-end") return HaltTiming::at_end;
    throw ParseError(key_line("halt"), "halt must be per-step or at-end");
  }

  MachineDescription build_kind() {
    if (kind_ == "pfa") return pfa_base();
    if (kind_ == "qfa") return qfa_base();
    if (kind_ == "kwqfa" || kind_ == "kwqfa-restart") {
      KwqfaMachine m{states_, alphabet_, single_matrices<Cplx>(), state_set("accept"),
                     state_set("reject"), state_set("restart")};
      if (kind_ == "kwqfa" && !m.restart.empty())
        throw ParseError(0, "kind kwqfa cannot declare restart states (use kwqfa-restart)");
      return m;
    }
    if (kind_ == "pfa-restart") {
      RestartPfa m{pfa_base(), state_set("reject"), state_set("restart"), halt_key()};
      return m;
    }
    if (kind_ == "qfa-restart") {
      RestartQfa m{qfa_base(), state_set("reject")};
      return m;
    }
    if (kind_ == "post-pfa" || kind_ == "lpost-pfa" || kind_ == "post-qfa" ||
        kind_ == "lpost-qfa") {
      PostMachine pm;
      if (kind_ == "post-pfa" || kind_ == "lpost-pfa") pm.base = pfa_base();
      else pm.base = qfa_base();
      pm.post_accept = state_set("postaccept");
      pm.post_reject = state_set("postreject");
      if (kind_ == "post-pfa" || kind_ == "post-qfa") return pm;
      return LatvianPostMachine{std::move(pm), tau_key()};
    }
    throw ParseError(key_line("kind"), "unknown kind '" + kind_ + "'");
  }
};

template <typename T> std::string format_entry(const T &x);
template <> inline std::string format_entry<Rat>(const Rat &x) { return format_rational(x); }
template <> inline std::string format_entry<Cplx>(const Cplx &x) { return format_complex(x); }

template <typename T>
void emit_matrix_rows(std::ostream &out, const Matrix<T> &m) {
  for (int i = 0; i < m.rows(); ++i) {
    out << " ";
    for (int j = 0; j < m.cols(); ++j) out << " " << format_entry<T>(m(i, j));
    out << "\n";
  }
}

inline void emit_state_set(std::ostream &out, const char *key, const std::set<int> &s) {
  out << key << ":";
  for (int q : s) out << " " << q;
  out << "\n";
}

inline void emit_header(std::ostream &out, const std::string &kind, int states,
                        const Alphabet &alphabet) {
  out << "kind: " << kind << "\n";
  out << "states: " << states << "\n";
  out << "alphabet:";
  for (char c : alphabet.symbols) out << " " << c;
  out << "\n";
}

template <typename T>
void emit_single_matrices(std::ostream &out, const Alphabet &a, const SymbolMap<Matrix<T>> &map) {
  out << "matrix cent:\n";
  emit_matrix_rows(out, map.cent);
  for (int s = 0; s < a.size(); ++s) {
    out << "matrix " << a.symbols[std::size_t(s)] << ":\n";
    emit_matrix_rows(out, map.sigma[std::size_t(s)]);
  }
  out << "matrix dollar:\n";
  emit_matrix_rows(out, map.dollar);
}

inline void emit_kraus_matrices(std::ostream &out, const Alphabet &a,
                                const SymbolMap<std::vector<Matrix<Cplx>>> &map) {
  auto emit_list = [&](const std::string &sym, const std::vector<Matrix<Cplx>> &list) {
    for (std::size_t k = 0; k < list.size(); ++k) {
      out << "matrix " << sym << " " << k + 1 << ":\n";
      emit_matrix_rows(out, list[k]);
    }
  };
  emit_list("cent", map.cent);
  for (int s = 0; s < a.size(); ++s)
    emit_list(std::string(1, a.symbols[std::size_t(s)]), map.sigma[std::size_t(s)]);
  emit_list("dollar", map.dollar);
}

} // namespace detail

inline MachineDescription parse_machine(const std::string &text) {
  return detail::MachineReader(text).read();
}

inline MachineDescription parse_machine(std::istream &in) {
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_machine(buf.str());
}

inline std::string emit_machine(const MachineDescription &desc) {
  std::ostringstream out;
  std::string kind = machine_kind_name(desc);
  std::visit([&](const auto &m) {
    using M = std::decay_t<decltype(m)>;
    if constexpr (std::is_same_v<M, PfaMachine>) {
      detail::emit_header(out, kind, m.states, m.alphabet);
      detail::emit_state_set(out, "accept", m.accept);
      detail::emit_single_matrices(out, m.alphabet, m.transitions);
    } else if constexpr (std::is_same_v<M, QfaMachine>) {
      detail::emit_header(out, kind, m.states, m.alphabet);
      detail::emit_state_set(out, "accept", m.accept);
      detail::emit_kraus_matrices(out, m.alphabet, m.kraus);
    } else if constexpr (std::is_same_v<M, KwqfaMachine>) {
      detail::emit_header(out, kind, m.states, m.alphabet);
      detail::emit_state_set(out, "accept", m.accept);
      detail::emit_state_set(out, "reject", m.reject);
      if (!m.restart.empty()) detail::emit_state_set(out, "restart", m.restart);
      detail::emit_single_matrices(out, m.alphabet, m.unitaries);
    } else if constexpr (std::is_same_v<M, RestartPfa>) {
      detail::emit_header(out, kind, m.base.states, m.base.alphabet);
      detail::emit_state_set(out, "accept", m.base.accept);
      detail::emit_state_set(out, "reject", m.reject);
      detail::emit_state_set(out, "restart", m.restart);
      out << "halt: " << (m.timing == HaltTiming::per_step ? "per-step" : "at-end") << "\n";
      detail::emit_single_matrices(out, m.base.alphabet, m.base.transitions);
    } else if constexpr (std::is_same_v<M, RestartQfa>) {
      detail::emit_header(out, kind, m.base.states, m.base.alphabet);
      detail::emit_state_set(out, "accept", m.base.accept);
      detail::emit_state_set(out, "reject", m.reject);
      detail::emit_kraus_matrices(out, m.base.alphabet, m.base.kraus);
    } else if constexpr (std::is_same_v<M, PostMachine>) {
      std::visit([&](const auto &base) {
        using B = std::decay_t<decltype(base)>;
        detail::emit_header(out, kind, base.states, base.alphabet);
        detail::emit_state_set(out, "postaccept", m.post_accept);
        detail::emit_state_set(out, "postreject", m.post_reject);
        if constexpr (std::is_same_v<B, PfaMachine>)
          detail::emit_single_matrices(out, base.alphabet, base.transitions);
        else
          detail::emit_kraus_matrices(out, base.alphabet, base.kraus);
      }, m.base);
    } else { // LatvianPostMachine
      std::visit([&](const auto &base) {
        using B = std::decay_t<decltype(base)>;
        detail::emit_header(out, kind, base.states, base.alphabet);
        detail::emit_state_set(out, "postaccept", m.post.post_accept);
        detail::emit_state_set(out, "postreject", m.post.post_reject);
        out << "tau: " << (m.tau == Tau::accept ? "A" : "R") << "\n";
        if constexpr (std::is_same_v<B, PfaMachine>)
          detail::emit_single_matrices(out, base.alphabet, base.transitions);
        else
          detail::emit_kraus_matrices(out, base.alphabet, base.kraus);
      }, m.post.base);
    }
  }, desc);
  return out.str();
}

} // namespace rtfa
