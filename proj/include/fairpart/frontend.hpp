#pragma once

#include <algorithm>
#include <cctype>
#include <deque>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "fairpart/core.hpp"
#include "fairpart/error.hpp"
#include "fairpart/proposition.hpp"

namespace fairpart::frontend {

struct Assignment {
  std::string var;
  std::string value;  // a domain value, or a variable read in the pre-state
  int line = 0;

  bool operator==(const Assignment& o) const {
    return var == o.var && value == o.value;
  }
};

struct Event {
  std::string name;
  PropPtr guard;
  std::vector<Assignment> assigns;
  int line = 0;
};

struct FairnessDecl {
  std::string event;
  PropPtr condition;  // null when unconditional
  int line = 0;
};

struct EventSystem {
  enum class Kind { kMachine, kRefinement };

  Kind kind = Kind::kMachine;
  std::string name;
  std::string refines;
  std::vector<std::pair<std::string, std::vector<std::string>>> sets;
  std::vector<std::string> variables;
  PropPtr invariant = p_true();
  std::vector<Assignment> init;
  std::vector<Event> events;
  std::vector<FairnessDecl> fairness;
};

// ---------------------------------------------------------------- lexing

struct Token {
  enum class Type { kIdent, kSymbol, kEnd };
  Type type;
  std::string text;
  int line;
  int column;
};

namespace detail {

inline bool ident_start(unsigned char c) {
  return std::isalnum(c) || c == '_';
}

inline std::vector<Token> lex(const std::string& src) {
  // Unicode operators and their ASCII spelling.
  static const std::vector<std::pair<std::string, std::string>> kUnicode = {
      {"\xE2\x88\xA7", "&"},    // and
      {"\xE2\x88\xA8", "or"},   // or
      {"\xC2\xAC", "not"},      // not
      {"\xE2\x87\x92", "=>"},   // implies
      {"\xE2\x87\x94", "<=>"},  // equivalence
      {"\xE2\x88\x88", ":"},    // element of
      {"\xE2\x80\x96", "||"},   // parallel
      {"\xE2\x89\x99", "=="},   // definition
      {"\xE2\x89\x9C", "=="},   // definition
      {"\xE2\x89\xA0", "/="},   // not equal
  };
  static const std::vector<std::string> kSymbols = {
      "<=>", "=>", ":=", "||", "/=", "^=", "==", "(", ")", "{",
      "}",   ",",  ";",  "=",  ":",  "&"};
  std::vector<Token> out;
  int line = 1, col = 1;
  std::size_t i = 0;
  auto advance = [&](std::size_t n) {
    for (std::size_t k = 0; k < n; ++k) {
      if (src[i] == '\n') {
        ++line;
        col = 1;
      } else if ((static_cast<unsigned char>(src[i]) & 0xC0) != 0x80) {
        ++col;
      }
      ++i;
    }
  };
  while (i < src.size()) {
    unsigned char c = src[i];
    if (std::isspace(c)) {
      advance(1);
      continue;
    }
    if (src.compare(i, 2, "//") == 0) {
      while (i < src.size() && src[i] != '\n') advance(1);
      continue;
    }
    if (src.compare(i, 2, "/*") == 0) {
      int l = line, cl = col;
      advance(2);
      while (i < src.size() && src.compare(i, 2, "*/") != 0) advance(1);
      if (i >= src.size()) throw ParseError("unterminated comment", l, cl);
      advance(2);
      continue;
    }
    if (ident_start(c)) {
      std::size_t j = i;
      while (j < src.size()) {
        unsigned char d = src[j];
        if (ident_start(d)) {
          ++j;
        } else if (d == '-' && j + 1 < src.size() &&
                   ident_start(static_cast<unsigned char>(src[j + 1])) &&
                   src[j + 1] != '>') {
          ++j;
        } else {
          break;
        }
      }
      out.push_back({Token::Type::kIdent, src.substr(i, j - i), line, col});
      advance(j - i);
      continue;
    }
    bool matched = false;
    for (const auto& [u, a] : kUnicode) {
      if (src.compare(i, u.size(), u) == 0) {
        out.push_back({a == "or" || a == "not" ? Token::Type::kIdent
                                               : Token::Type::kSymbol,
                       a, line, col});
        advance(u.size());
        matched = true;
        break;
      }
    }
    if (matched) continue;
    for (const auto& s : kSymbols) {
      if (src.compare(i, s.size(), s) == 0) {
        out.push_back({Token::Type::kSymbol, s, line, col});
        advance(s.size());
        matched = true;
        break;
      }
    }
    if (matched) continue;
    throw ParseError(std::string("unexpected character '") +
                         static_cast<char>(c) + "'",
                     line, col);
  }
  out.push_back({Token::Type::kEnd, "", line, col});
  return out;
}

inline const std::set<std::string>& keywords() {
  static const std::set<std::string> k = {
      "MACHINE", "REFINEMENT",     "REFINES", "SETS",   "VARIABLES",
      "INVARIANT", "INITIALISATION", "INITIALIZATION", "EVENTS",
      "FAIRNESS",  "SELECT",       "THEN",    "END",    "BEGIN",
      "or",        "not",          "if",      "TRUE",   "FALSE"};
  return k;
}

class Parser {
 public:
  explicit Parser(const std::string& src) : toks_(lex(src)) {}

  EventSystem system() {
    EventSystem es;
    if (accept_word("MACHINE")) {
      es.kind = EventSystem::Kind::kMachine;
    } else if (accept_word("REFINEMENT")) {
      es.kind = EventSystem::Kind::kRefinement;
    } else {
      fail("expected MACHINE or REFINEMENT");
    }
    es.name = ident("machine name");
    if (accept_word("REFINES")) {
      es.refines = ident("refined machine name");
    } else if (es.kind == EventSystem::Kind::kRefinement) {
      fail("a REFINEMENT needs a REFINES clause");
    }
    std::set<std::string> seen;
    while (!at_word("END")) {
      const Token& t = peek();
      if (t.type == Token::Type::kEnd) fail("missing END");
      std::string sec = t.text;
      if (sec == "INITIALIZATION") sec = "INITIALISATION";
      if (!seen.insert(sec).second) fail("duplicate " + sec + " section");
      if (accept_word("SETS")) {
        do {
          auto name = ident("set name");
          expect("=");
          es.sets.emplace_back(name, ident_set());
        } while (accept(";") && !at_section() && !at_word("END"));
      } else if (accept_word("VARIABLES")) {
        do {
          es.variables.push_back(ident("variable name"));
        } while (accept(","));
      } else if (accept_word("INVARIANT")) {
        es.invariant = pred();
      } else if (accept_word("INITIALISATION") ||
                 accept_word("INITIALIZATION")) {
        es.init = assigns();
      } else if (accept_word("EVENTS")) {
        do {
          if (at_section() || at_word("END")) break;
          es.events.push_back(event());
        } while (accept(";"));
      } else if (accept_word("FAIRNESS")) {
        if (!accept("=")) accept("==");
        expect("{");
        if (!at("}")) {
          do {
            es.fairness.push_back(fairness_item());
          } while (accept(","));
        }
        expect("}");
        accept(";");
      } else {
        fail("unexpected '" + t.text + "'");
      }
    }
    expect_word("END");
    if (peek().type != Token::Type::kEnd) fail("text after END");
    return es;
  }

  PropPtr standalone_pred() {
    auto p = pred();
    if (peek().type != Token::Type::kEnd) fail("unexpected '" + peek().text + "'");
    return p;
  }

 private:
  const Token& peek() const { return toks_[pos_]; }
  [[noreturn]] void fail(const std::string& msg) const {
    throw ParseError(msg, peek().line, peek().column);
  }
  bool at(const std::string& sym) const {
    return peek().type == Token::Type::kSymbol && peek().text == sym;
  }
  bool at_word(const std::string& w) const {
    return peek().type == Token::Type::kIdent && peek().text == w;
  }
  bool at_section() const {
    static const std::set<std::string> s = {
        "SETS",   "VARIABLES", "INVARIANT", "INITIALISATION",
        "INITIALIZATION", "EVENTS", "FAIRNESS"};
    return peek().type == Token::Type::kIdent && s.count(peek().text);
  }
  bool accept(const std::string& sym) {
    if (!at(sym)) return false;
    ++pos_;
    return true;
  }
  bool accept_word(const std::string& w) {
    if (!at_word(w)) return false;
    ++pos_;
    return true;
  }
  void expect(const std::string& sym) {
    if (!accept(sym)) fail("expected '" + sym + "'");
  }
  void expect_word(const std::string& w) {
    if (!accept_word(w)) fail("expected " + w);
  }
  std::string ident(const std::string& what) {
    const Token& t = peek();
    if (t.type != Token::Type::kIdent || keywords().count(t.text)) {
      fail("expected " + what);
    }
    ++pos_;
    return t.text;
  }
  std::vector<std::string> ident_set() {
    expect("{");
    std::vector<std::string> out;
    do {
      out.push_back(ident("value"));
    } while (accept(","));
    expect("}");
    return out;
  }

  std::vector<Assignment> assigns() {
    std::vector<Assignment> out;
    do {
      int line = peek().line;
      auto var = ident("variable");
      expect(":=");
      out.push_back({var, ident("value"), line});
    } while (accept("||"));
    return out;
  }

  Event event() {
    Event e;
    e.line = peek().line;
    e.name = ident("event name");
    if (!accept("=") && !accept("==") && !accept("^=")) {
      fail("expected '=' after event name");
    }
    if (accept_word("BEGIN")) {
      e.guard = p_true();
    } else {
      expect_word("SELECT");
      e.guard = pred();
      expect_word("THEN");
    }
    e.assigns = assigns();
    expect_word("END");
    return e;
  }

  FairnessDecl fairness_item() {
    FairnessDecl f;
    f.line = peek().line;
    f.event = ident("event name");
    if (accept_word("if")) f.condition = unary();
    return f;
  }

  PropPtr pred() {
    auto lhs = implies();
    while (accept("<=>")) lhs = p_equiv(lhs, implies());
    return lhs;
  }
  PropPtr implies() {
    auto lhs = disj();
    if (accept("=>")) return p_implies(lhs, implies());
    return lhs;
  }
  PropPtr disj() {
    std::vector<PropPtr> xs{conj()};
    while (accept_word("or")) xs.push_back(conj());
    return p_or(std::move(xs));
  }
  PropPtr conj() {
    std::vector<PropPtr> xs{unary()};
    while (accept("&")) xs.push_back(unary());
    return p_and(std::move(xs));
  }
  PropPtr unary() {
    if (accept_word("not")) return p_not(unary());
    if (accept("(")) {
      auto p = pred();
      expect(")");
      return p;
    }
    if (accept_word("TRUE")) return p_true();
    if (accept_word("FALSE")) return p_false();
    auto lhs = ident("variable");
    if (accept("=")) return p_eq(lhs, ident("value"));
    if (accept("/=")) return p_not(p_eq(lhs, ident("value")));
    if (accept(":")) {
      if (at("{")) return p_member_values(lhs, ident_set());
      return p_member(lhs, ident("set name"));
    }
    fail("expected '=', '/=' or ':' after '" + lhs + "'");
  }

  std::vector<Token> toks_;
  std::size_t pos_ = 0;
};

}  // namespace detail

inline EventSystem parse(const std::string& text) {
  return detail::Parser(text).system();
}

// Parses a proposition written in the dialect syntax.
inline PropPtr parse_predicate(const std::string& text) {
  return detail::Parser(text).standalone_pred();
}

// ---------------------------------------------------------------- printing

// Below-conjunction operators need parentheses when listed as conjuncts.
inline bool needs_parens(const Prop& p) {
  return p.kind == Prop::Kind::kOr || p.kind == Prop::Kind::kImplies ||
         p.kind == Prop::Kind::kEquiv;
}

inline std::string print(const EventSystem& es) {
  const auto D = PropSyntax::kDialect;
  std::string o;
  o += es.kind == EventSystem::Kind::kMachine ? "MACHINE " : "REFINEMENT ";
  o += es.name + "\n";
  if (!es.refines.empty()) o += "REFINES " + es.refines + "\n";
  auto join = [](const std::vector<std::string>& xs) {
    std::string s;
    for (std::size_t i = 0; i < xs.size(); ++i) s += (i ? ", " : "") + xs[i];
    return s;
  };
  auto assigns = [](const std::vector<Assignment>& as) {
    std::string s;
    for (std::size_t i = 0; i < as.size(); ++i) {
      s += (i ? " || " : "") + as[i].var + " := " + as[i].value;
    }
    return s;
  };
  if (!es.sets.empty()) {
    o += "SETS\n";
    for (std::size_t i = 0; i < es.sets.size(); ++i) {
      o += "  " + es.sets[i].first + " = {" + join(es.sets[i].second) + "}";
      o += i + 1 < es.sets.size() ? ";\n" : "\n";
    }
  }
  if (!es.variables.empty()) o += "VARIABLES\n  " + join(es.variables) + "\n";
  if (es.invariant->kind != Prop::Kind::kTrue) {
    o += "INVARIANT\n";
    auto cs = conjuncts(es.invariant);
    for (std::size_t i = 0; i < cs.size(); ++i) {
      auto s = to_string(*cs[i], D);
      if (needs_parens(*cs[i])) s = "(" + s + ")";
      o += (i ? "  & " : "  ") + s + "\n";
    }
  }
  if (!es.init.empty()) o += "INITIALISATION\n  " + assigns(es.init) + "\n";
  if (!es.events.empty()) {
    o += "EVENTS\n";
    for (std::size_t i = 0; i < es.events.size(); ++i) {
      const auto& e = es.events[i];
      o += "  " + e.name + " =\n";
      o += "    SELECT " + to_string(*e.guard, D) + "\n";
      o += "    THEN " + assigns(e.assigns) + "\n";
      o += i + 1 < es.events.size() ? "    END;\n" : "    END\n";
    }
  }
  if (!es.fairness.empty()) {
    o += "FAIRNESS\n  {";
    for (std::size_t i = 0; i < es.fairness.size(); ++i) {
      const auto& f = es.fairness[i];
      o += (i ? ", " : "") + f.event;
      if (f.condition) o += " if (" + to_string(*f.condition, D) + ")";
    }
    o += "}\n";
  }
  o += "END\n";
  return o;
}

// ---------------------------------------------------------------- typing

// Variables, domains and set table of an event system, optionally seen
// through the machine it refines.
struct Typing {
  Signature signature;
  SetTable sets;
  PropPtr gluing;                 // conjuncts mentioning abstract variables
  std::vector<PropPtr> checked;   // own-variable conjuncts checked per state
};

inline Typing type_system(const EventSystem& es,
                          const EventSystem* abstract = nullptr) {
  if (!es.refines.empty() && !abstract) {
    throw Error("'" + es.name + "' refines '" + es.refines +
                "', which was not supplied");
  }
  if (abstract && abstract->name != es.refines) {
    throw Error("'" + es.name + "' refines '" + es.refines + "', not '" +
                abstract->name + "'");
  }
  Typing t;
  std::set<std::string> own(es.variables.begin(), es.variables.end());
  if (own.size() != es.variables.size()) {
    throw Error("duplicate variable in '" + es.name + "'");
  }
  Typing abs_typing;
  std::set<std::string> abs_vars;
  if (abstract) {
    abs_typing = type_system(*abstract);
    t.sets = abs_typing.sets;
    for (const auto& v : abstract->variables) {
      abs_vars.insert(v);
      if (own.count(v)) {
        throw Error("variable '" + v + "' is declared by both '" + es.name +
                    "' and '" + abstract->name + "'");
      }
    }
  }
  for (const auto& [name, vals] : es.sets) {
    if (!t.sets.emplace(name, vals).second) {
      throw Error("duplicate set '" + name + "'");
    }
  }
  auto is_var = [&](const std::string& n) {
    return own.count(n) > 0 || abs_vars.count(n) > 0;
  };
  auto inv = resolve_names(es.invariant, is_var);
  std::map<std::string, std::vector<std::string>> dom;
  std::vector<PropPtr> glue;
  for (const auto& c : conjuncts(inv)) {
    std::set<std::string> vs;
    collect_variables(*c, vs);
    bool mentions_abs = false;
    for (const auto& v : vs) mentions_abs = mentions_abs || abs_vars.count(v);
    if (mentions_abs) {
      bool mentions_own = false;
      for (const auto& v : vs) mentions_own = mentions_own || own.count(v);
      if (mentions_own) glue.push_back(c);
      continue;
    }
    if (c->kind == Prop::Kind::kMember && own.count(c->lhs)) {
      std::vector<std::string> values = c->values;
      if (!c->rhs.empty()) {
        auto it = t.sets.find(c->rhs);
        if (it == t.sets.end()) throw Error("unknown set '" + c->rhs + "'");
        values = it->second;
      }
      if (!dom.emplace(c->lhs, values).second) {
        throw Error("variable '" + c->lhs + "' is typed twice");
      }
      continue;
    }
    t.checked.push_back(c);
  }
  // Untyped refined variables take the domain of an abstract variable they
  // are equated with.
  for (const auto& c : glue) {
    if (c->kind != Prop::Kind::kEqVar) continue;
    std::string mine = own.count(c->lhs) ? c->lhs : c->rhs;
    std::string theirs = own.count(c->lhs) ? c->rhs : c->lhs;
    if (!own.count(mine) || !abs_vars.count(theirs) || dom.count(mine)) {
      continue;
    }
    auto idx = abs_typing.signature.find(theirs);
    dom[mine] = abs_typing.signature[*idx].domain;
  }
  std::vector<Variable> vars;
  for (const auto& v : es.variables) {
    auto it = dom.find(v);
    if (it == dom.end()) {
      throw Error("variable '" + v + "' has no finite domain");
    }
    vars.push_back({v, it->second});
  }
  t.signature = Signature(std::move(vars));
  t.gluing = p_and(glue);
  return t;
}

// Conjuncts of the refinement invariant relating the two machines.
inline PropPtr gluing_invariant(const EventSystem& refined,
                                const EventSystem& abstract) {
  return type_system(refined, &abstract).gluing;
}

// ---------------------------------------------------------------- execution

struct EnumerateOptions {
  std::size_t max_states = 1000000;
};

struct Enumeration {
  FairTransitionSystem fts;
  std::vector<std::string> warnings;
};

// Reachable state graph of the event system. States are numbered in
// breadth-first discovery order, exploring events in declaration order.
inline Enumeration enumerate(const EventSystem& es,
                             const EventSystem* abstract = nullptr,
                             const EnumerateOptions& opt = {}) {
  Typing typing = type_system(es, abstract);
  const Signature& sig = typing.signature;
  auto var_of = [&](const std::string& name, int line) {
    auto i = sig.find(name);
    if (!i) {
      throw ParseError("unknown variable '" + name + "'", line, 0);
    }
    return *i;
  };
  auto own_var = [&](const std::string& n) { return sig.find(n).has_value(); };

  // Assignment: target var, and either a constant value index or a source var.
  struct Assign {
    std::size_t var;
    int value;
    std::optional<std::size_t> from;
  };
  auto compile_assigns = [&](const std::vector<Assignment>& as,
                             bool allow_vars) {
    std::vector<Assign> out;
    std::set<std::size_t> seen;
    for (const auto& a : as) {
      auto v = var_of(a.var, a.line);
      if (!seen.insert(v).second) {
        throw ParseError("variable '" + a.var + "' assigned twice", a.line,
                         0);
      }
      if (allow_vars && sig.find(a.value)) {
        out.push_back({v, -1, *sig.find(a.value)});
        continue;
      }
      auto idx = sig.value_index(v, a.value);
      if (!idx) {
        throw EnumerationError("value '" + a.value +
                               "' is outside the domain of '" + a.var +
                               "' (line " + std::to_string(a.line) + ")");
      }
      out.push_back({v, *idx, std::nullopt});
    }
    return out;
  };

  std::set<std::string> names;
  struct CEvent {
    CompiledProp guard;
    std::vector<Assign> assigns;
  };
  std::vector<CEvent> events;
  std::vector<std::string> actions;
  for (const auto& e : es.events) {
    if (!names.insert(e.name).second) {
      throw ParseError("duplicate event name '" + e.name + "'", e.line, 0);
    }
    if (e.name == kSkip || e.name == kTau) {
      throw ParseError("event name '" + e.name + "' is reserved", e.line, 0);
    }
    try {
      events.push_back(
          {CompiledProp(*resolve_names(e.guard, own_var), {&sig},
                        &typing.sets),
           compile_assigns(e.assigns, true)});
    } catch (const ParseError&) {
      throw;
    } catch (const EnumerationError&) {
      throw;
    } catch (const Error& err) {
      throw ParseError(std::string(err.what()) + " in event '" + e.name + "'",
                       e.line, 0);
    }
    actions.push_back(e.name);
  }
  std::vector<CompiledProp> checks;
  for (const auto& c : typing.checked) {
    checks.emplace_back(*c, std::vector<const Signature*>{&sig},
                        &typing.sets);
  }

  auto init = compile_assigns(es.init, false);
  if (init.size() != sig.size()) {
    throw EnumerationError("INITIALISATION must assign every variable");
  }
  Valuation v0(sig.size(), 0);
  for (const auto& a : init) v0[a.var] = static_cast<std::uint16_t>(a.value);

  std::vector<Valuation> labels;
  std::unordered_map<Valuation, StateId, ValuationHash> ids;
  std::vector<Transition> trans;
  std::deque<StateId> queue;
  auto intern = [&](const Valuation& v) {
    auto [it, fresh] = ids.emplace(v, static_cast<StateId>(labels.size()));
    if (fresh) {
      if (labels.size() >= opt.max_states) {
        throw BudgetExceeded("state budget of " +
                             std::to_string(opt.max_states) + " exceeded");
      }
      labels.push_back(v);
      queue.push_back(it->second);
      for (std::size_t k = 0; k < checks.size(); ++k) {
        if (!checks[k].eval(v)) {
          std::string d;
          for (std::size_t i = 0; i < sig.size(); ++i) {
            d += (i ? ", " : "") + sig[i].name + "=" + sig[i].domain[v[i]];
          }
          throw EnumerationError(
              "invariant '" + to_string(*typing.checked[k], PropSyntax::kDialect) +
              "' fails in reachable state (" + d + ")");
        }
      }
    }
    return it->second;
  };
  intern(v0);
  while (!queue.empty()) {
    StateId s = queue.front();
    queue.pop_front();
    for (std::size_t e = 0; e < events.size(); ++e) {
      const Valuation cur = labels[s];
      if (!events[e].guard.eval(cur)) continue;
      Valuation next = cur;
      for (const auto& a : events[e].assigns) {
        if (a.from) {
          auto idx = sig.value_index(a.var, sig[*a.from].domain[cur[*a.from]]);
          if (!idx) {
            throw EnumerationError("event '" + es.events[e].name +
                                   "' assigns an out-of-domain value to '" +
                                   sig[a.var].name + "'");
          }
          next[a.var] = *idx;
        } else {
          next[a.var] = static_cast<std::uint16_t>(a.value);
        }
      }
      trans.push_back({s, static_cast<ActionId>(e), intern(next)});
    }
  }
  TransitionSystem ts(sig, std::move(labels), {0}, std::move(actions),
                      std::move(trans));

  Enumeration out;
  std::vector<FairnessConstraint> fair;
  for (const auto& f : es.fairness) {
    auto it = std::find_if(es.events.begin(), es.events.end(),
                           [&](const Event& e) { return e.name == f.event; });
    if (it == es.events.end()) {
      throw ParseError("fairness names unknown event '" + f.event + "'",
                       f.line, 0);
    }
    ActionId a = static_cast<ActionId>(it - es.events.begin());
    std::optional<CompiledProp> cond;
    std::string name = f.event;
    if (f.condition) {
      cond.emplace(*resolve_names(f.condition, own_var),
                   std::vector<const Signature*>{&sig}, &typing.sets);
      name += " if (" + to_string(*f.condition, PropSyntax::kDialect) + ")";
    }
    FairnessConstraint c{name, {}};
    for (TransitionId t = 0; t < ts.transitions().size(); ++t) {
      const auto& tr = ts.transition(t);
      if (tr.action != a) continue;
      if (cond && !cond->eval(ts.label(tr.source))) continue;
      c.transitions.push_back(t);
    }
    if (c.transitions.empty()) {
      out.warnings.push_back("fairness constraint '" + name +
                             "' selects no reachable transition; dropped");
      continue;
    }
    fair.push_back(std::move(c));
  }
  out.fts = FairTransitionSystem(std::move(ts), std::move(fair));
  return out;
}

// ---------------------------------------------------------------- gluing

inline bool eval_pair(const Prop& inv, const Signature& sig1,
                      const Valuation& s1, const Signature& sig2,
                      const Valuation& s2) {
  CompiledProp cp(inv, {&sig1, &sig2});
  return cp.eval_sides({&s1, &s2});
}

// Total function from reachable refined states to abstract states.
struct GluingMap {
  static constexpr StateId kNone = ~StateId{0};

  std::vector<StateId> abstract_of;          // per refined state
  std::vector<std::vector<StateId>> classes;  // per abstract state, sorted

  StateId operator()(StateId s2) const { return abstract_of[s2]; }
};

// Derives mu from the gluing invariant. Abstract variables pinned by a
// top-level equality conjunct are read off the refined state; the rest are
// searched (or the abstract states scanned, whichever is smaller).
inline GluingMap derive_mu(const FairTransitionSystem& fts1,
                           const FairTransitionSystem& fts2,
                           const PropPtr& inv) {
  const auto& ts1 = fts1.ts();
  const auto& ts2 = fts2.ts();
  const Signature& sig1 = ts1.signature();
  const Signature& sig2 = ts2.signature();
  auto is_var = [&](const std::string& n) {
    return sig1.find(n).has_value() || sig2.find(n).has_value();
  };
  PropPtr glue;
  CompiledProp cp;
  try {
    glue = resolve_names(inv, is_var);
    cp = CompiledProp(*glue, {&sig1, &sig2});
  } catch (const Error& e) {
    throw GluingError(GluingError::Kind::kUnresolved, e.what());
  }

  // Pins: abstract var <- refined var, or abstract var <- constant.
  struct Pin {
    std::size_t abs;
    std::optional<std::size_t> from;
    std::uint16_t value = 0;
  };
  std::vector<Pin> pins;
  std::vector<bool> pinned(sig1.size(), false);
  for (const auto& c : conjuncts(glue)) {
    if (c->kind == Prop::Kind::kEqVar) {
      auto a1 = sig1.find(c->lhs), b1 = sig1.find(c->rhs);
      auto a2 = sig2.find(c->lhs), b2 = sig2.find(c->rhs);
      if (a1 && b2 && !pinned[*a1]) {
        pins.push_back({*a1, *b2});
        pinned[*a1] = true;
      } else if (b1 && a2 && !pinned[*b1]) {
        pins.push_back({*b1, *a2});
        pinned[*b1] = true;
      }
    } else if (c->kind == Prop::Kind::kEq) {
      if (auto a = sig1.find(c->lhs); a && !pinned[*a]) {
        if (auto v = sig1.value_index(*a, c->rhs)) {
          pins.push_back({*a, std::nullopt, *v});
          pinned[*a] = true;
        }
      }
    }
  }
  std::vector<std::size_t> free_vars;
  std::size_t space = 1;
  for (std::size_t i = 0; i < sig1.size(); ++i) {
    if (pinned[i]) continue;
    free_vars.push_back(i);
    space = std::min<std::size_t>(space * sig1[i].domain.size(),
                                  ts1.state_count() + 1);
  }
  const bool scan = space > ts1.state_count();
  auto reach1 = reachable_states(ts1);
  auto reach2 = reachable_states(ts2);

  GluingMap mu;
  mu.abstract_of.assign(ts2.state_count(), GluingMap::kNone);
  mu.classes.assign(ts1.state_count(), {});
  for (StateId s2 = 0; s2 < ts2.state_count(); ++s2) {
    if (!reach2[s2]) continue;
    const auto& l2 = ts2.label(s2);
    std::vector<StateId> found;
    auto test = [&](StateId s1) {
      if (reach1[s1] && cp.eval_sides({&ts1.label(s1), &l2})) found.push_back(s1);
    };
    if (scan) {
      for (StateId s1 = 0; s1 < ts1.state_count(); ++s1) test(s1);
    } else {
      Valuation cand(sig1.size(), 0);
      bool possible = true;
      for (const auto& p : pins) {
        if (p.from) {
          auto idx = sig1.value_index(p.abs,
                                      sig2[*p.from].domain[l2[*p.from]]);
          if (!idx) {
            possible = false;
            break;
          }
          cand[p.abs] = *idx;
        } else {
          cand[p.abs] = p.value;
        }
      }
      if (possible) {
        while (true) {
          if (auto s1 = ts1.find_state(cand)) test(*s1);
          std::size_t k = 0;
          while (k < free_vars.size() &&
                 ++cand[free_vars[k]] == sig1[free_vars[k]].domain.size()) {
            cand[free_vars[k++]] = 0;
          }
          if (k == free_vars.size()) break;
        }
      }
    }
    if (found.empty()) {
      throw GluingError(GluingError::Kind::kNonTotal,
                        "refined state s" + std::to_string(s2) + " (" +
                            ts2.describe(s2) +
                            ") is glued to no reachable abstract state");
    }
    if (found.size() > 1) {
      throw GluingError(GluingError::Kind::kNonFunctional,
                        "refined state s" + std::to_string(s2) + " (" +
                            ts2.describe(s2) + ") is glued to s" +
                            std::to_string(found[0]) + " (" +
                            ts1.describe(found[0]) + ") and s" +
                            std::to_string(found[1]) + " (" +
                            ts1.describe(found[1]) + ")");
    }
    mu.abstract_of[s2] = found[0];
    mu.classes[found[0]].push_back(s2);
  }
  return mu;
}

}  // namespace fairpart::frontend
