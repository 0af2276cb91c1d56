#pragma once

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

namespace fairpart {

class Prop;
using PropPtr = std::shared_ptr<const Prop>;

// Propositional formula over variable/value equalities.
class Prop {
 public:
  enum class Kind {
    kTrue,
    kFalse,
    kEq,      // var = value
    kEqVar,   // var = var
    kMember,  // var : SET  or  var : {v1, ..., vn}
    kNot,
    kAnd,
    kOr,
    kImplies,
    kEquiv,
  };

  Kind kind = Kind::kTrue;
  std::string lhs;
  std::string rhs;                  // value, variable or set name
  std::vector<std::string> values;  // literal set of kMember when rhs empty
  std::vector<PropPtr> args;

  static PropPtr make(Kind k, std::vector<PropPtr> args = {}) {
    auto p = std::make_shared<Prop>();
    p->kind = k;
    p->args = std::move(args);
    return p;
  }
};

inline PropPtr p_true() { return Prop::make(Prop::Kind::kTrue); }
inline PropPtr p_false() { return Prop::make(Prop::Kind::kFalse); }

inline PropPtr p_eq(std::string var, std::string value) {
  auto p = std::make_shared<Prop>();
  p->kind = Prop::Kind::kEq;
  p->lhs = std::move(var);
  p->rhs = std::move(value);
  return p;
}

inline PropPtr p_eq_var(std::string a, std::string b) {
  auto p = std::make_shared<Prop>();
  p->kind = Prop::Kind::kEqVar;
  p->lhs = std::move(a);
  p->rhs = std::move(b);
  return p;
}

inline PropPtr p_member(std::string var, std::string set) {
  auto p = std::make_shared<Prop>();
  p->kind = Prop::Kind::kMember;
  p->lhs = std::move(var);
  p->rhs = std::move(set);
  return p;
}

inline PropPtr p_member_values(std::string var, std::vector<std::string> vs) {
  auto p = std::make_shared<Prop>();
  p->kind = Prop::Kind::kMember;
  p->lhs = std::move(var);
  p->values = std::move(vs);
  return p;
}

inline PropPtr p_not(PropPtr a) { return Prop::make(Prop::Kind::kNot, {a}); }

inline PropPtr p_nary(Prop::Kind k, std::vector<PropPtr> xs) {
  if (xs.empty()) return k == Prop::Kind::kAnd ? p_true() : p_false();
  if (xs.size() == 1) return xs[0];
  return Prop::make(k, std::move(xs));
}

inline PropPtr p_and(std::vector<PropPtr> xs) {
  return p_nary(Prop::Kind::kAnd, std::move(xs));
}
inline PropPtr p_or(std::vector<PropPtr> xs) {
  return p_nary(Prop::Kind::kOr, std::move(xs));
}
inline PropPtr p_implies(PropPtr a, PropPtr b) {
  return Prop::make(Prop::Kind::kImplies, {a, b});
}
inline PropPtr p_equiv(PropPtr a, PropPtr b) {
  return Prop::make(Prop::Kind::kEquiv, {a, b});
}

// Conjunction of x=v over a full state label.
inline PropPtr state_prop(const TransitionSystem& ts, StateId s) {
  std::vector<PropPtr> xs;
  for (std::size_t i = 0; i < ts.signature().size(); ++i) {
    xs.push_back(p_eq(ts.signature()[i].name, ts.value_of(s, i)));
  }
  return p_and(std::move(xs));
}

enum class PropSyntax { kDialect, kFormula };

namespace detail {

inline int prop_precedence(Prop::Kind k) {
  switch (k) {
    case Prop::Kind::kEquiv:
      return 1;
    case Prop::Kind::kImplies:
      return 2;
    case Prop::Kind::kOr:
      return 3;
    case Prop::Kind::kAnd:
      return 4;
    case Prop::Kind::kNot:
      return 5;
    default:
      return 6;
  }
}

}  // namespace detail

inline std::string to_string(const Prop& p,
                             PropSyntax syn = PropSyntax::kFormula) {
  const bool d = syn == PropSyntax::kDialect;
  auto sub = [&](const PropPtr& a, int min_prec) {
    auto s = to_string(*a, syn);
    return detail::prop_precedence(a->kind) < min_prec ? "(" + s + ")" : s;
  };
  const int my = detail::prop_precedence(p.kind);
  switch (p.kind) {
    case Prop::Kind::kTrue:
      return d ? "TRUE" : "true";
    case Prop::Kind::kFalse:
      return d ? "FALSE" : "false";
    case Prop::Kind::kEq:
    case Prop::Kind::kEqVar:
      return p.lhs + " = " + p.rhs;
    case Prop::Kind::kMember: {
      std::string out = p.lhs + " : ";
      if (!p.rhs.empty()) return out + p.rhs;
      out += "{";
      for (std::size_t i = 0; i < p.values.size(); ++i) {
        out += (i ? ", " : "") + p.values[i];
      }
      return out + "}";
    }
    case Prop::Kind::kNot:
      return (d ? "not " : "!") + sub(p.args[0], my + 1);
    case Prop::Kind::kAnd:
    case Prop::Kind::kOr: {
      const bool is_and = p.kind == Prop::Kind::kAnd;
      std::string op = d ? (is_and ? " & " : " or ") : (is_and ? " && " : " || ");
      std::string out;
      for (std::size_t i = 0; i < p.args.size(); ++i) {
        if (i) out += op;
        out += sub(p.args[i], my + 1);
      }
      return out;
    }
    case Prop::Kind::kImplies:
      return sub(p.args[0], my + 1) + (d ? " => " : " -> ") +
             sub(p.args[1], my);
    case Prop::Kind::kEquiv:
      return sub(p.args[0], my + 1) + (d ? " <=> " : " <-> ") +
             sub(p.args[1], my + 1);
  }
  return "?";
}

// Rewrites `a = b` into a var/var equality when both sides name variables,
// and orients `value = var` as `var = value`.
inline PropPtr resolve_names(const PropPtr& p,
                             const std::function<bool(const std::string&)>&
                                 is_var) {
  switch (p->kind) {
    case Prop::Kind::kEq:
    case Prop::Kind::kEqVar: {
      bool l = is_var(p->lhs), r = is_var(p->rhs);
      if (l && r) return p_eq_var(p->lhs, p->rhs);
      if (l) return p_eq(p->lhs, p->rhs);
      if (r) return p_eq(p->rhs, p->lhs);
      throw Error("unknown variable in '" + p->lhs + " = " + p->rhs + "'");
    }
    case Prop::Kind::kMember:
      if (!is_var(p->lhs)) throw Error("unknown variable '" + p->lhs + "'");
      return p;
    case Prop::Kind::kTrue:
    case Prop::Kind::kFalse:
      return p;
    default: {
      std::vector<PropPtr> xs;
      for (const auto& a : p->args) xs.push_back(resolve_names(a, is_var));
      return Prop::make(p->kind, std::move(xs));
    }
  }
}

inline void collect_variables(const Prop& p, std::set<std::string>& out) {
  switch (p.kind) {
    case Prop::Kind::kEq:
    case Prop::Kind::kMember:
      out.insert(p.lhs);
      break;
    case Prop::Kind::kEqVar:
      out.insert(p.lhs);
      out.insert(p.rhs);
      break;
    default:
      for (const auto& a : p.args) collect_variables(*a, out);
  }
}

// Top-level conjuncts, flattening nested conjunctions.
inline std::vector<PropPtr> conjuncts(const PropPtr& p) {
  if (p->kind != Prop::Kind::kAnd) {
    if (p->kind == Prop::Kind::kTrue) return {};
    return {p};
  }
  std::vector<PropPtr> out;
  for (const auto& a : p->args) {
    auto sub = conjuncts(a);
    out.insert(out.end(), sub.begin(), sub.end());
  }
  return out;
}

using SetTable = std::map<std::string, std::vector<std::string>>;

// Proposition compiled against one or more signatures ("sides"). Variables
// are looked up side by side; the first side that declares a name wins.
class CompiledProp {
 public:
  CompiledProp() = default;

  CompiledProp(const Prop& p, std::vector<const Signature*> scope,
               const SetTable* sets = nullptr)
      : scope_(std::move(scope)) {
    root_ = build(p, sets);
  }

  bool eval_sides(const std::vector<const Valuation*>& vals) const {
    return eval_node(root_, vals);
  }

  bool eval(const Valuation& v) const {
    std::vector<const Valuation*> vals{&v};
    return eval_node(root_, vals);
  }

 private:
  struct Ref {
    std::size_t side;
    std::size_t var;
  };

  struct Node {
    Prop::Kind kind;
    Ref a{0, 0};
    Ref b{0, 0};
    int value = -1;                  // kEq
    std::vector<int> map;            // kEqVar: a's value index -> b's
    std::vector<bool> member;        // kMember
    std::vector<int> args;
  };

  Ref lookup(const std::string& name) const {
    for (std::size_t s = 0; s < scope_.size(); ++s) {
      if (auto i = scope_[s]->find(name)) return {s, *i};
    }
    throw Error("unknown variable '" + name + "'");
  }

  const std::vector<std::string>& domain(Ref r) const {
    return (*scope_[r.side])[r.var].domain;
  }

  int build(const Prop& p, const SetTable* sets) {
    Node n;
    n.kind = p.kind;
    switch (p.kind) {
      case Prop::Kind::kEq: {
        n.a = lookup(p.lhs);
        const auto& d = domain(n.a);
        auto it = std::find(d.begin(), d.end(), p.rhs);
        if (it == d.end()) {
          throw Error("value '" + p.rhs + "' is not in the domain of '" +
                      p.lhs + "'");
        }
        n.value = static_cast<int>(it - d.begin());
        break;
      }
      case Prop::Kind::kEqVar: {
        n.a = lookup(p.lhs);
        n.b = lookup(p.rhs);
        const auto& da = domain(n.a);
        const auto& db = domain(n.b);
        for (const auto& v : da) {
          auto it = std::find(db.begin(), db.end(), v);
          n.map.push_back(it == db.end() ? -1
                                         : static_cast<int>(it - db.begin()));
        }
        break;
      }
      case Prop::Kind::kMember: {
        n.a = lookup(p.lhs);
        std::vector<std::string> vs = p.values;
        if (!p.rhs.empty()) {
          if (!sets || !sets->count(p.rhs)) {
            throw Error("unknown set '" + p.rhs + "'");
          }
          vs = sets->at(p.rhs);
        }
        for (const auto& v : domain(n.a)) {
          n.member.push_back(std::find(vs.begin(), vs.end(), v) != vs.end());
        }
        break;
      }
      default:
        for (const auto& a : p.args) n.args.push_back(build(*a, sets));
    }
    nodes_.push_back(std::move(n));
    return static_cast<int>(nodes_.size()) - 1;
  }

  bool eval_node(int i, const std::vector<const Valuation*>& vals) const {
    const Node& n = nodes_[i];
    auto val = [&](Ref r) { return (*vals[r.side])[r.var]; };
    switch (n.kind) {
      case Prop::Kind::kTrue:
        return true;
      case Prop::Kind::kFalse:
        return false;
      case Prop::Kind::kEq:
        return val(n.a) == n.value;
      case Prop::Kind::kEqVar:
        return n.map[val(n.a)] == static_cast<int>(val(n.b));
      case Prop::Kind::kMember:
        return n.member[val(n.a)];
      case Prop::Kind::kNot:
        return !eval_node(n.args[0], vals);
      case Prop::Kind::kAnd:
        for (auto a : n.args) {
          if (!eval_node(a, vals)) return false;
        }
        return true;
      case Prop::Kind::kOr:
        for (auto a : n.args) {
          if (eval_node(a, vals)) return true;
        }
        return false;
      case Prop::Kind::kImplies:
        return !eval_node(n.args[0], vals) || eval_node(n.args[1], vals);
      case Prop::Kind::kEquiv:
        return eval_node(n.args[0], vals) == eval_node(n.args[1], vals);
    }
    return false;
  }

  std::vector<const Signature*> scope_;
  std::vector<Node> nodes_;
  int root_ = -1;
};

namespace detail {

inline void collect_values(const Prop& p,
                           std::map<std::string, std::set<std::string>>& out) {
  switch (p.kind) {
    case Prop::Kind::kEq:
      out[p.lhs].insert(p.rhs);
      break;
    case Prop::Kind::kEqVar:
      out[p.lhs];
      out[p.rhs];
      break;
    case Prop::Kind::kMember:
      out[p.lhs].insert(p.values.begin(), p.values.end());
      break;
    default:
      for (const auto& a : p.args) collect_values(*a, out);
  }
}

// Builds a signature over the variables of `ps`. Variables without a known
// domain range over the values mentioned for them plus one fresh value.
inline Signature local_signature(
    const std::vector<const Prop*>& ps,
    const std::map<std::string, std::vector<std::string>>& domains) {
  std::map<std::string, std::set<std::string>> mentioned;
  for (auto p : ps) collect_values(*p, mentioned);
  // Var/var equalities share value pools.
  std::set<std::string> pool;
  for (auto& [v, vals] : mentioned) pool.insert(vals.begin(), vals.end());
  std::vector<Variable> vars;
  for (auto& [name, vals] : mentioned) {
    auto it = domains.find(name);
    if (it != domains.end()) {
      vars.push_back({name, it->second});
      continue;
    }
    std::vector<std::string> d(pool.begin(), pool.end());
    d.push_back("\x01other");
    vars.push_back({name, d});
  }
  return Signature(std::move(vars));
}

template <typename F>
void for_each_valuation(const Signature& sig, F&& f) {
  Valuation v(sig.size(), 0);
  while (true) {
    if (!f(v)) return;
    std::size_t k = 0;
    while (k < v.size() && ++v[k] == sig[k].domain.size()) v[k++] = 0;
    if (k == v.size()) return;
  }
}

}  // namespace detail

using DomainMap = std::map<std::string, std::vector<std::string>>;

// Validity of p => q over every valuation of the mentioned variables.
inline bool implies_prop(const Prop& p, const Prop& q,
                         const DomainMap& domains = {}) {
  auto sig = detail::local_signature({&p, &q}, domains);
  CompiledProp cp(p, {&sig}), cq(q, {&sig});
  bool ok = true;
  detail::for_each_valuation(sig, [&](const Valuation& v) {
    if (cp.eval(v) && !cq.eval(v)) ok = false;
    return ok;
  });
  return ok;
}

inline bool satisfiable(const Prop& p, const DomainMap& domains = {}) {
  auto sig = detail::local_signature({&p}, domains);
  CompiledProp cp(p, {&sig});
  bool sat = false;
  detail::for_each_valuation(sig, [&](const Valuation& v) {
    sat = cp.eval(v);
    return !sat;
  });
  return sat;
}

inline DomainMap domains_of(const Signature& sig) {
  DomainMap d;
  for (const auto& v : sig.variables()) d[v.name] = v.domain;
  return d;
}

}  // namespace fairpart
