#pragma once

#include <cctype>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "fairpart/core.hpp"
#include "fairpart/error.hpp"
#include "fairpart/proposition.hpp"

namespace fairpart::pltl {

class Formula;
using FormulaPtr = std::shared_ptr<const Formula>;

class Formula {
 public:
  enum class Op {
    kTrue,
    kFalse,
    kProp,  // temporal-free state proposition
    kNot,
    kAnd,
    kOr,
    kImplies,
    kEquiv,
    kNext,
    kUntil,
    kRelease,
    kEventually,
    kAlways,
  };

  Op op = Op::kTrue;
  PropPtr prop;
  FormulaPtr a;
  FormulaPtr b;

  static FormulaPtr make(Op op, FormulaPtr a = nullptr, FormulaPtr b = nullptr) {
    auto f = std::make_shared<Formula>();
    f->op = op;
    f->a = std::move(a);
    f->b = std::move(b);
    return f;
  }
};

using Op = Formula::Op;

inline FormulaPtr f_true() { return Formula::make(Op::kTrue); }
inline FormulaPtr f_false() { return Formula::make(Op::kFalse); }
inline FormulaPtr f_prop(PropPtr p) {
  auto f = std::make_shared<Formula>();
  f->op = Op::kProp;
  f->prop = std::move(p);
  return f;
}
inline FormulaPtr f_atom(std::string var, std::string value) {
  return f_prop(p_eq(std::move(var), std::move(value)));
}
inline FormulaPtr f_not(FormulaPtr a) { return Formula::make(Op::kNot, a); }
inline FormulaPtr f_and(FormulaPtr a, FormulaPtr b) {
  return Formula::make(Op::kAnd, a, b);
}
inline FormulaPtr f_or(FormulaPtr a, FormulaPtr b) {
  return Formula::make(Op::kOr, a, b);
}
inline FormulaPtr f_implies(FormulaPtr a, FormulaPtr b) {
  return Formula::make(Op::kImplies, a, b);
}
inline FormulaPtr f_equiv(FormulaPtr a, FormulaPtr b) {
  return Formula::make(Op::kEquiv, a, b);
}
inline FormulaPtr f_next(FormulaPtr a) { return Formula::make(Op::kNext, a); }
inline FormulaPtr f_until(FormulaPtr a, FormulaPtr b) {
  return Formula::make(Op::kUntil, a, b);
}
inline FormulaPtr f_release(FormulaPtr a, FormulaPtr b) {
  return Formula::make(Op::kRelease, a, b);
}
inline FormulaPtr f_eventually(FormulaPtr a) {
  return Formula::make(Op::kEventually, a);
}
inline FormulaPtr f_always(FormulaPtr a) {
  return Formula::make(Op::kAlways, a);
}

inline FormulaPtr f_and_all(const std::vector<FormulaPtr>& xs) {
  if (xs.empty()) return f_true();
  FormulaPtr acc = xs.back();
  for (std::size_t i = xs.size() - 1; i-- > 0;) acc = f_and(xs[i], acc);
  return acc;
}

// ---------------------------------------------------------------- printing

namespace detail {

inline int precedence(Op op) {
  switch (op) {
    case Op::kEquiv:
      return 0;
    case Op::kImplies:
      return 1;
    case Op::kOr:
      return 2;
    case Op::kAnd:
      return 3;
    case Op::kUntil:
    case Op::kRelease:
      return 4;
    case Op::kNot:
    case Op::kNext:
    case Op::kEventually:
    case Op::kAlways:
      return 5;
    default:
      return 6;
  }
}

}  // namespace detail

inline std::string to_string(const Formula& f) {
  auto sub = [](const FormulaPtr& x, int min) {
    auto s = to_string(*x);
    return detail::precedence(x->op) < min ? "(" + s + ")" : s;
  };
  int me = detail::precedence(f.op);
  switch (f.op) {
    case Op::kTrue:
      return "true";
    case Op::kFalse:
      return "false";
    case Op::kProp: {
      const Prop& p = *f.prop;
      if (p.kind == Prop::Kind::kEq) return p.lhs + "=" + p.rhs;
      return "(" + fairpart::to_string(p, PropSyntax::kFormula) + ")";
    }
    case Op::kNot:
      return "!" + sub(f.a, me);
    case Op::kNext:
      return "X " + sub(f.a, me);
    case Op::kEventually:
      return "<>" + sub(f.a, me);
    case Op::kAlways:
      return "[]" + sub(f.a, me);
    case Op::kAnd:
      return sub(f.a, me) + " && " + sub(f.b, me);
    case Op::kOr:
      return sub(f.a, me) + " || " + sub(f.b, me);
    case Op::kImplies:
      return sub(f.a, me + 1) + " -> " + sub(f.b, me);
    case Op::kEquiv:
      return sub(f.a, me + 1) + " <-> " + sub(f.b, me + 1);
    case Op::kUntil:
      return sub(f.a, me + 1) + " U " + sub(f.b, me);
    case Op::kRelease:
      return sub(f.a, me + 1) + " R " + sub(f.b, me);
  }
  return "?";
}

// ---------------------------------------------------------------- parsing

namespace detail {

struct FTok {
  std::string text;  // operator spelling, identifier, or "" at the end
  bool ident;
  int column;
};

inline std::vector<FTok> lex_formula(const std::string& s) {
  static const std::vector<std::pair<std::string, std::string>> kUnicode = {
      {"\xE2\x96\xA1", "[]"},  {"\xE2\x97\x87", "<>"}, {"\xE2\x97\xAF", "X"},
      {"\xC2\xAC", "!"},       {"\xE2\x88\xA7", "&&"}, {"\xE2\x88\xA8", "||"},
      {"\xE2\x87\x92", "->"},  {"\xE2\x86\x92", "->"}, {"\xE2\x87\x94", "<->"},
      {"\xE2\x89\xA0", "!="}};
  static const std::vector<std::string> kOps = {
      "<->", "[]", "<>", "&&", "||", "->", "!=", "(", ")", "!", "=", "&", "|"};
  std::vector<FTok> out;
  std::size_t i = 0;
  int col = 1;
  while (i < s.size()) {
    unsigned char c = s[i];
    if (std::isspace(c)) {
      ++i;
      ++col;
      continue;
    }
    if (std::isalnum(c) || c == '_') {
      std::size_t j = i;
      while (j < s.size() && (std::isalnum(static_cast<unsigned char>(s[j])) ||
                              s[j] == '_' || s[j] == '\'' || s[j] == '-') ) {
        if (s[j] == '-' && (j + 1 >= s.size() || s[j + 1] == '>' ||
                            !std::isalnum(static_cast<unsigned char>(s[j + 1])))) {
          break;
        }
        ++j;
      }
      out.push_back({s.substr(i, j - i), true, col});
      col += static_cast<int>(j - i);
      i = j;
      continue;
    }
    bool matched = false;
    for (const auto& [u, a] : kUnicode) {
      if (s.compare(i, u.size(), u) == 0) {
        out.push_back({a, a == "X", col});
        i += u.size();
        ++col;
        matched = true;
        break;
      }
    }
    if (matched) continue;
    for (const auto& op : kOps) {
      if (s.compare(i, op.size(), op) == 0) {
        std::string t = op == "&" ? "&&" : op == "|" ? "||" : op;
        out.push_back({t, false, col});
        i += op.size();
        col += static_cast<int>(op.size());
        matched = true;
        break;
      }
    }
    if (!matched) {
      throw ParseError(std::string("unexpected character '") +
                           static_cast<char>(c) + "' in formula",
                       1, col);
    }
  }
  out.push_back({"", false, col});
  return out;
}

class FormulaParser {
 public:
  explicit FormulaParser(const std::string& s) : toks_(lex_formula(s)) {}

  FormulaPtr parse() {
    auto f = equiv();
    if (!peek().text.empty()) fail("unexpected '" + peek().text + "'");
    return f;
  }

 private:
  const FTok& peek() const { return toks_[pos_]; }
  [[noreturn]] void fail(const std::string& m) const {
    throw ParseError(m, 1, peek().column);
  }
  bool accept(const std::string& t, bool ident = false) {
    if (peek().text != t || peek().ident != ident) return false;
    ++pos_;
    return true;
  }
  bool is_keyword(const std::string& t) const {
    return t == "X" || t == "U" || t == "R" || t == "true" || t == "false";
  }

  FormulaPtr equiv() {
    auto lhs = implies();
    while (accept("<->")) lhs = f_equiv(lhs, implies());
    return lhs;
  }
  FormulaPtr implies() {
    auto lhs = disj();
    if (accept("->")) return f_implies(lhs, implies());
    return lhs;
  }
  FormulaPtr disj() {
    auto lhs = conj();
    while (accept("||")) lhs = f_or(lhs, conj());
    return lhs;
  }
  FormulaPtr conj() {
    auto lhs = until();
    while (accept("&&")) lhs = f_and(lhs, until());
    return lhs;
  }
  FormulaPtr until() {
    auto lhs = unary();
    if (accept("U", true)) return f_until(lhs, until());
    if (accept("R", true)) return f_release(lhs, until());
    return lhs;
  }
  FormulaPtr unary() {
    if (accept("!")) return f_not(unary());
    if (accept("X", true)) return f_next(unary());
    if (accept("[]")) return f_always(unary());
    if (accept("<>")) return f_eventually(unary());
    if (accept("(")) {
      auto f = equiv();
      if (!accept(")")) fail("expected ')'");
      return f;
    }
    if (accept("true", true)) return f_true();
    if (accept("false", true)) return f_false();
    const FTok& t = peek();
    if (!t.ident || is_keyword(t.text)) {
      fail(t.text.empty() ? "unexpected end of formula"
                          : "unexpected '" + t.text + "'");
    }
    ++pos_;
    bool neq = false;
    if (accept("=") || (neq = accept("!="))) {
      const FTok& v = peek();
      if (!v.ident) fail("expected a value after '" + t.text + "='");
      ++pos_;
      auto atom = f_atom(t.text, v.text);
      return neq ? f_not(atom) : atom;
    }
    return f_atom(t.text, "true");
  }

  std::vector<FTok> toks_;
  std::size_t pos_ = 0;
};

}  // namespace detail

// Concrete syntax: [] <> X U R ! && || -> <->, atoms name=value, name!=value,
// or a bare name (read as name=true).
inline FormulaPtr parse(const std::string& text) {
  return detail::FormulaParser(text).parse();
}

// ---------------------------------------------------------------- rewriting

inline bool temporal(const Formula& f) {
  switch (f.op) {
    case Op::kNext:
    case Op::kUntil:
    case Op::kRelease:
    case Op::kEventually:
    case Op::kAlways:
      return true;
    case Op::kTrue:
    case Op::kFalse:
    case Op::kProp:
      return false;
    default:
      return temporal(*f.a) || (f.b && temporal(*f.b));
  }
}

// Temporal-free formula as a proposition.
inline PropPtr as_prop(const Formula& f) {
  switch (f.op) {
    case Op::kTrue:
      return p_true();
    case Op::kFalse:
      return p_false();
    case Op::kProp:
      return f.prop;
    case Op::kNot:
      return p_not(as_prop(*f.a));
    case Op::kAnd:
      return p_and({as_prop(*f.a), as_prop(*f.b)});
    case Op::kOr:
      return p_or({as_prop(*f.a), as_prop(*f.b)});
    case Op::kImplies:
      return p_implies(as_prop(*f.a), as_prop(*f.b));
    case Op::kEquiv:
      return p_equiv(as_prop(*f.a), as_prop(*f.b));
    default:
      throw Error("temporal operator in state proposition");
  }
}

// Rewrites into the core operators true, atom, !, ||, X and U.
inline FormulaPtr normalize(const FormulaPtr& f) {
  switch (f->op) {
    case Op::kTrue:
      return f;
    case Op::kFalse:
      return f_not(f_true());
    case Op::kProp: {
      const Prop& p = *f->prop;
      if (p.kind == Prop::Kind::kEq || p.kind == Prop::Kind::kTrue) return f;
      if (p.kind == Prop::Kind::kFalse) return f_not(f_true());
      if (p.kind == Prop::Kind::kNot) return f_not(normalize(f_prop(p.args[0])));
      if (p.kind == Prop::Kind::kAnd || p.kind == Prop::Kind::kOr) {
        FormulaPtr acc = f_prop(p.args[0]);
        for (std::size_t i = 1; i < p.args.size(); ++i) {
          acc = p.kind == Prop::Kind::kAnd ? f_and(acc, f_prop(p.args[i]))
                                           : f_or(acc, f_prop(p.args[i]));
        }
        return normalize(acc);
      }
      if (p.kind == Prop::Kind::kImplies) {
        return normalize(f_implies(f_prop(p.args[0]), f_prop(p.args[1])));
      }
      if (p.kind == Prop::Kind::kEquiv) {
        return normalize(f_equiv(f_prop(p.args[0]), f_prop(p.args[1])));
      }
      return f;
    }
    case Op::kNot:
      return f_not(normalize(f->a));
    case Op::kAnd:
      return f_not(f_or(f_not(normalize(f->a)), f_not(normalize(f->b))));
    case Op::kOr:
      return f_or(normalize(f->a), normalize(f->b));
    case Op::kImplies:
      return f_or(f_not(normalize(f->a)), normalize(f->b));
    case Op::kEquiv: {
      auto a = f->a, b = f->b;
      return normalize(f_and(f_implies(a, b), f_implies(b, a)));
    }
    case Op::kNext:
      return f_next(normalize(f->a));
    case Op::kUntil:
      return f_until(normalize(f->a), normalize(f->b));
    case Op::kRelease:
      return f_not(f_until(f_not(normalize(f->a)), f_not(normalize(f->b))));
    case Op::kEventually:
      return f_until(f_true(), normalize(f->a));
    case Op::kAlways:
      return f_not(f_until(f_true(), f_not(normalize(f->a))));
  }
  return f;
}

inline int depth(const Formula& f) {
  switch (f.op) {
    case Op::kTrue:
    case Op::kFalse:
    case Op::kProp:
      return 0;
    default:
      return 1 + std::max(depth(*f.a), f.b ? depth(*f.b) : 0);
  }
}

inline void collect_props(const Formula& f, std::vector<PropPtr>& out) {
  if (f.op == Op::kProp) out.push_back(f.prop);
  if (f.a) collect_props(*f.a, out);
  if (f.b) collect_props(*f.b, out);
}

// Rejects atoms over undeclared variables or outside their domain.
inline void validate_atoms(const Formula& f, const Signature& sig) {
  std::vector<PropPtr> props;
  collect_props(f, props);
  for (const auto& p : props) {
    try {
      CompiledProp(*p, {&sig});
    } catch (const Error& e) {
      throw Error(std::string("formula atom rejected: ") + e.what());
    }
  }
}

// ---------------------------------------------------------------- semantics

// Ultimately periodic word prefix . cycle^omega over a signature.
struct Word {
  const Signature* sig = nullptr;
  std::vector<Valuation> prefix;
  std::vector<Valuation> cycle;

  std::size_t size() const { return prefix.size() + cycle.size(); }
  const Valuation& at(std::size_t i) const {
    return i < prefix.size() ? prefix[i] : cycle[i - prefix.size()];
  }
  std::size_t next(std::size_t i) const {
    return i + 1 < size() ? i + 1 : prefix.size();
  }
};

inline Word word_of(const TransitionSystem& ts, const Lasso& l) {
  Word w;
  w.sig = &ts.signature();
  for (const auto& s : l.prefix) w.prefix.push_back(ts.label(s.state));
  for (const auto& s : l.cycle) w.cycle.push_back(ts.label(s.state));
  return w;
}

namespace detail {

inline std::vector<bool> eval_positions(const Formula& f, const Word& w) {
  const std::size_t n = w.size();
  std::vector<bool> r(n, false);
  switch (f.op) {
    case Op::kTrue:
      r.assign(n, true);
      return r;
    case Op::kFalse:
      return r;
    case Op::kProp: {
      CompiledProp cp(*f.prop, {w.sig});
      for (std::size_t i = 0; i < n; ++i) r[i] = cp.eval(w.at(i));
      return r;
    }
    default:
      break;
  }
  auto a = eval_positions(*f.a, w);
  std::vector<bool> b;
  if (f.b) b = eval_positions(*f.b, w);
  auto fix = [&](bool init, auto step) {
    r.assign(n, init);
    bool changed = true;
    while (changed) {
      changed = false;
      for (std::size_t k = n; k-- > 0;) {
        bool v = step(k);
        if (v != r[k]) {
          r[k] = v;
          changed = true;
        }
      }
    }
  };
  switch (f.op) {
    case Op::kNot:
      for (std::size_t i = 0; i < n; ++i) r[i] = !a[i];
      break;
    case Op::kAnd:
      for (std::size_t i = 0; i < n; ++i) r[i] = a[i] && b[i];
      break;
    case Op::kOr:
      for (std::size_t i = 0; i < n; ++i) r[i] = a[i] || b[i];
      break;
    case Op::kImplies:
      for (std::size_t i = 0; i < n; ++i) r[i] = !a[i] || b[i];
      break;
    case Op::kEquiv:
      for (std::size_t i = 0; i < n; ++i) r[i] = a[i] == b[i];
      break;
    case Op::kNext:
      for (std::size_t i = 0; i < n; ++i) r[i] = a[w.next(i)];
      break;
    case Op::kUntil:
      fix(false, [&](std::size_t k) { return b[k] || (a[k] && r[w.next(k)]); });
      break;
    case Op::kRelease:
      fix(true, [&](std::size_t k) { return b[k] && (a[k] || r[w.next(k)]); });
      break;
    case Op::kEventually:
      fix(false, [&](std::size_t k) { return a[k] || r[w.next(k)]; });
      break;
    case Op::kAlways:
      fix(true, [&](std::size_t k) { return a[k] && r[w.next(k)]; });
      break;
    default:
      break;
  }
  return r;
}

}  // namespace detail

inline bool eval_word(const Formula& f, const Word& w) {
  if (w.cycle.empty()) throw InvalidInput("word has an empty cycle");
  return detail::eval_positions(f, w)[0];
}

// Truth of the formula at position 0 of a valid lasso of `ts`.
inline bool eval_lasso(const Formula& f, const TransitionSystem& ts,
                       const Lasso& l) {
  check_lasso(ts, l);
  return eval_word(f, word_of(ts, l));
}

// ---------------------------------------------------------------- fairness

namespace detail {

inline PropPtr label_disjunction(const TransitionSystem& ts,
                                 const std::set<StateId>& states) {
  std::vector<PropPtr> xs;
  for (auto s : states) xs.push_back(state_prop(ts, s));
  return p_or(std::move(xs));
}

}  // namespace detail

// [](  []<> sources  ->  <> targets  ) for one constraint, over full labels.
inline FormulaPtr fairness_conjunct(const FairTransitionSystem& fts,
                                    std::size_t i) {
  const auto& ts = fts.ts();
  std::set<StateId> src, tgt;
  for (auto t : fts.fairness()[i].transitions) {
    src.insert(ts.transition(t).source);
    tgt.insert(ts.transition(t).target);
  }
  auto s = f_prop(detail::label_disjunction(ts, src));
  auto g = f_prop(detail::label_disjunction(ts, tgt));
  return f_always(f_implies(f_always(f_eventually(s)), f_eventually(g)));
}

// Conjunction over the selected constraints (all when `which` is empty).
inline FormulaPtr fairness_formula(const FairTransitionSystem& fts,
                                   std::optional<std::vector<std::size_t>>
                                       which = std::nullopt) {
  std::vector<FormulaPtr> xs;
  if (!which) {
    for (std::size_t i = 0; i < fts.fairness().size(); ++i) {
      xs.push_back(fairness_conjunct(fts, i));
    }
  } else {
    for (auto i : *which) xs.push_back(fairness_conjunct(fts, i));
  }
  return f_and_all(xs);
}

}  // namespace fairpart::pltl
