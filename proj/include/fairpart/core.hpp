#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "fairpart/error.hpp"
#include "fairpart/graph.hpp"

namespace fairpart {

using StateId = std::uint32_t;
using ActionId = std::uint32_t;
using TransitionId = std::uint32_t;

// Reserved action names.
inline const std::string kSkip = "Skip";
inline const std::string kTau = "tau";

struct Variable {
  std::string name;
  std::vector<std::string> domain;

  bool operator==(const Variable&) const = default;
};

// Ordered list of finitely-typed variables.
class Signature {
 public:
  Signature() = default;

  explicit Signature(std::vector<Variable> vars) : vars_(std::move(vars)) {
    for (std::size_t i = 0; i < vars_.size(); ++i) {
      const auto& v = vars_[i];
      if (v.domain.empty()) {
        throw InvalidInput("variable '" + v.name + "' has an empty domain");
      }
      if (!index_.emplace(v.name, i).second) {
        throw InvalidInput("duplicate variable '" + v.name + "'");
      }
      std::set<std::string> seen(v.domain.begin(), v.domain.end());
      if (seen.size() != v.domain.size()) {
        throw InvalidInput("duplicate value in domain of '" + v.name + "'");
      }
    }
  }

  const std::vector<Variable>& variables() const { return vars_; }
  std::size_t size() const { return vars_.size(); }
  const Variable& operator[](std::size_t i) const { return vars_[i]; }

  std::optional<std::size_t> find(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  std::optional<std::uint16_t> value_index(std::size_t var,
                                           const std::string& value) const {
    const auto& d = vars_[var].domain;
    auto it = std::find(d.begin(), d.end(), value);
    if (it == d.end()) return std::nullopt;
    return static_cast<std::uint16_t>(it - d.begin());
  }

  bool operator==(const Signature& o) const { return vars_ == o.vars_; }

 private:
  std::vector<Variable> vars_;
  std::map<std::string, std::size_t> index_;
};

// Value index per variable, in signature order.
using Valuation = std::vector<std::uint16_t>;

struct ValuationHash {
  std::size_t operator()(const Valuation& v) const {
    std::size_t h = 1469598103934665603ull;
    for (auto x : v) h = (h ^ x) * 1099511628211ull;
    return h;
  }
};

struct Transition {
  StateId source;
  ActionId action;
  StateId target;

  auto operator<=>(const Transition&) const = default;
};

// Immutable labelled transition system. Transitions are kept sorted by
// (source, action, target) and their position is the transition id.
class TransitionSystem {
 public:
  TransitionSystem() = default;

  TransitionSystem(Signature sig, std::vector<Valuation> labels,
                   std::vector<StateId> initial,
                   std::vector<std::string> actions,
                   std::vector<Transition> transitions)
      : sig_(std::move(sig)),
        labels_(std::move(labels)),
        initial_(std::move(initial)),
        actions_(std::move(actions)),
        transitions_(std::move(transitions)) {
    const auto n = labels_.size();
    for (std::size_t s = 0; s < n; ++s) {
      const auto& l = labels_[s];
      if (l.size() != sig_.size()) {
        throw InvalidInput("state " + std::to_string(s) +
                           " label does not match the signature");
      }
      for (std::size_t i = 0; i < l.size(); ++i) {
        if (l[i] >= sig_[i].domain.size()) {
          throw InvalidInput("state " + std::to_string(s) +
                             " has an out-of-domain value");
        }
      }
      if (!by_label_.emplace(l, static_cast<StateId>(s)).second) {
        throw InvalidInput("states " + std::to_string(by_label_[l]) +
                           " and " + std::to_string(s) +
                           " share a valuation");
      }
    }
    if (initial_.empty() && n > 0) {
      throw InvalidInput("transition system has no initial state");
    }
    std::sort(initial_.begin(), initial_.end());
    initial_.erase(std::unique(initial_.begin(), initial_.end()),
                   initial_.end());
    for (auto s : initial_) {
      if (s >= n) throw InvalidInput("initial state out of range");
    }
    for (std::size_t a = 0; a < actions_.size(); ++a) {
      if (!action_index_.emplace(actions_[a], static_cast<ActionId>(a))
               .second) {
        throw InvalidInput("duplicate action '" + actions_[a] + "'");
      }
    }
    std::sort(transitions_.begin(), transitions_.end());
    transitions_.erase(std::unique(transitions_.begin(), transitions_.end()),
                       transitions_.end());
    graph_ = graph::Digraph(n);
    in_.assign(n, {});
    for (const auto& t : transitions_) {
      if (t.source >= n || t.target >= n || t.action >= actions_.size()) {
        throw InvalidInput("transition refers to an unknown state or action");
      }
      auto id = graph_.add_edge(t.source, t.target);
      in_[t.target].push_back(id);
    }
    initial_mask_.assign(n, false);
    for (auto s : initial_) initial_mask_[s] = true;
  }

  const Signature& signature() const { return sig_; }
  std::size_t state_count() const { return labels_.size(); }
  const Valuation& label(StateId s) const { return labels_[s]; }
  const std::vector<Valuation>& labels() const { return labels_; }
  const std::vector<StateId>& initial() const { return initial_; }
  bool is_initial(StateId s) const { return initial_mask_[s]; }
  const std::vector<std::string>& actions() const { return actions_; }
  const std::string& action_name(ActionId a) const { return actions_[a]; }
  const std::vector<Transition>& transitions() const { return transitions_; }
  const Transition& transition(TransitionId t) const { return transitions_[t]; }
  const std::vector<TransitionId>& out(StateId s) const {
    return graph_.out[s];
  }
  const std::vector<TransitionId>& in(StateId s) const { return in_[s]; }
  const graph::Digraph& digraph() const { return graph_; }

  std::optional<ActionId> find_action(const std::string& name) const {
    auto it = action_index_.find(name);
    if (it == action_index_.end()) return std::nullopt;
    return it->second;
  }

  std::optional<StateId> find_state(const Valuation& v) const {
    auto it = by_label_.find(v);
    if (it == by_label_.end()) return std::nullopt;
    return it->second;
  }

  std::optional<TransitionId> find_transition(const Transition& t) const {
    auto it = std::lower_bound(transitions_.begin(), transitions_.end(), t);
    if (it == transitions_.end() || *it != t) return std::nullopt;
    return static_cast<TransitionId>(it - transitions_.begin());
  }

  const std::string& value_of(StateId s, std::size_t var) const {
    return sig_[var].domain[labels_[s][var]];
  }

  // "x=v, y=w" rendering of a state label.
  std::string describe(StateId s) const {
    std::string out;
    for (std::size_t i = 0; i < sig_.size(); ++i) {
      if (i) out += ", ";
      out += sig_[i].name + "=" + value_of(s, i);
    }
    return out;
  }

  std::string describe_transition(TransitionId id) const {
    const auto& t = transitions_[id];
    return "s" + std::to_string(t.source) + " -" + actions_[t.action] +
           "-> s" + std::to_string(t.target);
  }

  bool operator==(const TransitionSystem& o) const {
    return sig_ == o.sig_ && labels_ == o.labels_ && initial_ == o.initial_ &&
           actions_ == o.actions_ && transitions_ == o.transitions_;
  }

 private:
  Signature sig_;
  std::vector<Valuation> labels_;
  std::vector<StateId> initial_;
  std::vector<std::string> actions_;
  std::vector<Transition> transitions_;
  std::unordered_map<Valuation, StateId, ValuationHash> by_label_;
  std::map<std::string, ActionId> action_index_;
  graph::Digraph graph_;
  std::vector<std::vector<TransitionId>> in_;
  std::vector<bool> initial_mask_;
};

struct FairnessConstraint {
  std::string name;
  std::vector<TransitionId> transitions;  // sorted, nonempty

  bool operator==(const FairnessConstraint&) const = default;
};

// Transition system plus strong fairness constraints.
class FairTransitionSystem {
 public:
  FairTransitionSystem() = default;

  FairTransitionSystem(TransitionSystem ts,
                       std::vector<FairnessConstraint> fairness)
      : ts_(std::move(ts)), fairness_(std::move(fairness)) {
    for (auto& f : fairness_) {
      std::sort(f.transitions.begin(), f.transitions.end());
      f.transitions.erase(
          std::unique(f.transitions.begin(), f.transitions.end()),
          f.transitions.end());
      if (f.transitions.empty()) {
        throw InvalidInput("fairness constraint '" + f.name + "' is empty");
      }
      for (auto t : f.transitions) {
        if (t >= ts_.transitions().size()) {
          throw InvalidInput("fairness constraint '" + f.name +
                             "' refers to an unknown transition");
        }
      }
    }
  }

  // Builds constraints from explicit transition triples.
  static FairTransitionSystem from_triples(
      TransitionSystem ts,
      const std::vector<std::pair<std::string, std::vector<Transition>>>& fs) {
    std::vector<FairnessConstraint> out;
    for (const auto& [name, triples] : fs) {
      FairnessConstraint c{name, {}};
      for (const auto& t : triples) {
        auto id = ts.find_transition(t);
        if (!id) {
          throw InvalidInput("fairness constraint '" + name +
                             "' names a transition that does not exist");
        }
        c.transitions.push_back(*id);
      }
      out.push_back(std::move(c));
    }
    return FairTransitionSystem(std::move(ts), std::move(out));
  }

  const TransitionSystem& ts() const { return ts_; }
  const std::vector<FairnessConstraint>& fairness() const { return fairness_; }

  // In(F_i): sources of the constraint's transitions.
  std::vector<bool> enabled_mask(std::size_t i) const {
    std::vector<bool> m(ts_.state_count(), false);
    for (auto t : fairness_[i].transitions) m[ts_.transition(t).source] = true;
    return m;
  }

  std::vector<bool> taken_mask(std::size_t i) const {
    std::vector<bool> m(ts_.transitions().size(), false);
    for (auto t : fairness_[i].transitions) m[t] = true;
    return m;
  }

  std::vector<bool> any_fair_mask() const {
    std::vector<bool> m(ts_.transitions().size(), false);
    for (const auto& f : fairness_) {
      for (auto t : f.transitions) m[t] = true;
    }
    return m;
  }

  std::vector<graph::Requirement> requirements() const {
    std::vector<graph::Requirement> r;
    for (std::size_t i = 0; i < fairness_.size(); ++i) {
      r.push_back({enabled_mask(i), taken_mask(i)});
    }
    return r;
  }

  bool operator==(const FairTransitionSystem& o) const {
    return ts_ == o.ts_ && fairness_ == o.fairness_;
  }

 private:
  TransitionSystem ts_;
  std::vector<FairnessConstraint> fairness_;
};

// One position of a lasso: a state and the action leading to the next one.
struct Step {
  StateId state;
  ActionId action;

  bool operator==(const Step&) const = default;
};

// prefix . cycle^omega; the last cycle step leads back to cycle[0].
struct Lasso {
  std::vector<Step> prefix;
  std::vector<Step> cycle;

  bool operator==(const Lasso&) const = default;

  std::size_t size() const { return prefix.size() + cycle.size(); }

  const Step& at(std::size_t i) const {
    return i < prefix.size() ? prefix[i] : cycle[i - prefix.size()];
  }

  std::size_t next(std::size_t i) const {
    return i + 1 < size() ? i + 1 : prefix.size();
  }
};

struct LassoTransitions {
  std::vector<TransitionId> prefix;
  std::vector<TransitionId> cycle;
};

// Checks the lasso is an execution of `ts` and returns its transitions.
inline LassoTransitions check_lasso(const TransitionSystem& ts,
                                    const Lasso& l) {
  if (l.cycle.empty()) throw InvalidInput("lasso has an empty cycle");
  if (!ts.is_initial(l.at(0).state)) {
    throw InvalidInput("lasso does not start in an initial state");
  }
  LassoTransitions out;
  for (std::size_t i = 0; i < l.size(); ++i) {
    const auto& a = l.at(i);
    const auto& b = l.at(l.next(i));
    if (a.state >= ts.state_count() || a.action >= ts.actions().size()) {
      throw InvalidInput("lasso refers to an unknown state or action");
    }
    auto id = ts.find_transition({a.state, a.action, b.state});
    if (!id) {
      throw InvalidInput("lasso step " + std::to_string(i) +
                         " is not a transition");
    }
    (i < l.prefix.size() ? out.prefix : out.cycle).push_back(*id);
  }
  return out;
}

inline bool is_computation(const FairTransitionSystem& fts, const Lasso& l) {
  auto tr = check_lasso(fts.ts(), l);
  std::vector<bool> inf_t(fts.ts().transitions().size(), false);
  for (auto t : tr.cycle) inf_t[t] = true;
  for (std::size_t i = 0; i < fts.fairness().size(); ++i) {
    auto en = fts.enabled_mask(i);
    bool visits = false;
    for (const auto& s : l.cycle) visits = visits || en[s.state];
    if (!visits) continue;
    bool takes = false;
    for (auto t : fts.fairness()[i].transitions) takes = takes || inf_t[t];
    if (!takes) return false;
  }
  return true;
}

inline std::vector<bool> reachable_states(const TransitionSystem& ts) {
  return graph::reachable(ts.digraph(), ts.initial());
}

// Adds a Skip self-loop to every state without successors.
inline TransitionSystem skip_complete(const TransitionSystem& ts) {
  std::vector<StateId> dead;
  for (StateId s = 0; s < ts.state_count(); ++s) {
    if (ts.out(s).empty()) dead.push_back(s);
  }
  if (dead.empty()) return ts;
  auto actions = ts.actions();
  ActionId skip;
  if (auto a = ts.find_action(kSkip)) {
    skip = *a;
  } else {
    skip = static_cast<ActionId>(actions.size());
    actions.push_back(kSkip);
  }
  auto trans = ts.transitions();
  for (auto s : dead) trans.push_back({s, skip, s});
  return TransitionSystem(ts.signature(), ts.labels(), ts.initial(),
                          std::move(actions), std::move(trans));
}

// Re-expresses fairness constraints of `from` over the transitions of `to`,
// matching transitions by (source, action name, target).
inline std::vector<FairnessConstraint> carry_fairness(
    const FairTransitionSystem& from, const TransitionSystem& to) {
  std::vector<FairnessConstraint> out;
  for (const auto& f : from.fairness()) {
    FairnessConstraint c{f.name, {}};
    for (auto id : f.transitions) {
      const auto& t = from.ts().transition(id);
      auto a = to.find_action(from.ts().action_name(t.action));
      if (!a) continue;
      if (auto nid = to.find_transition({t.source, *a, t.target})) {
        c.transitions.push_back(*nid);
      }
    }
    if (!c.transitions.empty()) out.push_back(std::move(c));
  }
  return out;
}

inline FairTransitionSystem skip_complete(const FairTransitionSystem& fts) {
  auto ts = skip_complete(fts.ts());
  if (ts.transitions().size() == fts.ts().transitions().size()) return fts;
  auto fair = carry_fairness(fts, ts);
  return FairTransitionSystem(std::move(ts), std::move(fair));
}

// Renames every action outside `visible` to the reserved tau action.
inline TransitionSystem tau_project(const TransitionSystem& ts,
                                    const std::set<std::string>& visible) {
  std::vector<std::string> actions;
  std::map<std::string, ActionId> ids;
  auto intern = [&](const std::string& a) {
    auto [it, fresh] = ids.emplace(a, static_cast<ActionId>(actions.size()));
    if (fresh) actions.push_back(a);
    return it->second;
  };
  std::vector<Transition> trans;
  for (const auto& t : ts.transitions()) {
    const auto& name = ts.action_name(t.action);
    if (name == kTau && !visible.count(kTau)) {
      throw InvalidInput("action name 'tau' is reserved");
    }
    trans.push_back({t.source, intern(visible.count(name) ? name : kTau),
                     t.target});
  }
  for (const auto& a : ts.actions()) {
    if (visible.count(a)) intern(a);
  }
  return TransitionSystem(ts.signature(), ts.labels(), ts.initial(),
                          std::move(actions), std::move(trans));
}

// A closed walk; step i's action leads to step i+1, the last back to the first.
using Cycle = std::vector<Step>;

struct CycleEnumeration {
  std::vector<Cycle> cycles;
  bool truncated = false;
};

namespace detail {

class Johnson {
 public:
  Johnson(const TransitionSystem& ts, const std::vector<bool>& keep,
          std::size_t limit)
      : ts_(ts), keep_(keep), limit_(limit) {}

  CycleEnumeration run() {
    const auto n = ts_.state_count();
    for (StateId s = 0; s < n && !out_.truncated; ++s) {
      if (!keep_[s]) continue;
      std::vector<bool> mask(n, false);
      for (StateId v = s; v < n; ++v) mask[v] = keep_[v];
      auto scc = graph::tarjan(ts_.digraph(), mask);
      int c = scc.component[s];
      if (!graph::nontrivial(ts_.digraph(), scc, c)) continue;
      start_ = s;
      in_comp_.assign(n, false);
      for (auto v : scc.members[c]) in_comp_[v] = true;
      blocked_.assign(n, false);
      block_map_.assign(n, {});
      circuit(s);
    }
    return std::move(out_);
  }

 private:
  std::vector<StateId> successors(StateId v) const {
    std::vector<StateId> w;
    for (auto t : ts_.out(v)) {
      auto d = ts_.transition(t).target;
      if (in_comp_[d]) w.push_back(d);
    }
    std::sort(w.begin(), w.end());
    w.erase(std::unique(w.begin(), w.end()), w.end());
    return w;
  }

  void unblock(StateId u) {
    blocked_[u] = false;
    auto pending = std::move(block_map_[u]);
    block_map_[u].clear();
    for (auto w : pending) {
      if (blocked_[w]) unblock(w);
    }
  }

  void emit() {
    // Expand parallel transitions between consecutive states.
    std::vector<std::vector<ActionId>> choices;
    for (std::size_t i = 0; i < stack_.size(); ++i) {
      auto a = stack_[i];
      auto b = stack_[(i + 1) % stack_.size()];
      std::vector<ActionId> acts;
      for (auto t : ts_.out(a)) {
        if (ts_.transition(t).target == b) {
          acts.push_back(ts_.transition(t).action);
        }
      }
      choices.push_back(std::move(acts));
    }
    std::vector<std::size_t> idx(choices.size(), 0);
    while (true) {
      if (out_.cycles.size() >= limit_) {
        out_.truncated = true;
        return;
      }
      Cycle c;
      for (std::size_t i = 0; i < stack_.size(); ++i) {
        c.push_back({stack_[i], choices[i][idx[i]]});
      }
      out_.cycles.push_back(std::move(c));
      std::size_t k = 0;
      while (k < idx.size() && ++idx[k] == choices[k].size()) idx[k++] = 0;
      if (k == idx.size()) return;
    }
  }

  bool circuit(StateId v) {
    bool found = false;
    stack_.push_back(v);
    blocked_[v] = true;
    for (auto w : successors(v)) {
      if (out_.truncated) break;
      if (w == start_) {
        emit();
        found = true;
      } else if (!blocked_[w] && circuit(w)) {
        found = true;
      }
    }
    if (found) {
      unblock(v);
    } else {
      for (auto w : successors(v)) {
        auto& b = block_map_[w];
        if (std::find(b.begin(), b.end(), v) == b.end()) b.push_back(v);
      }
    }
    stack_.pop_back();
    return found;
  }

  const TransitionSystem& ts_;
  const std::vector<bool>& keep_;
  std::size_t limit_;
  CycleEnumeration out_;
  StateId start_ = 0;
  std::vector<bool> in_comp_;
  std::vector<bool> blocked_;
  std::vector<std::vector<StateId>> block_map_;
  std::vector<StateId> stack_;
};

}  // namespace detail

// Elementary cycles among reachable states, each reported once, rotated to
// start at its smallest state id.
inline CycleEnumeration enumerate_cycles(const TransitionSystem& ts,
                                         std::size_t limit = 100000) {
  auto keep = reachable_states(ts);
  return detail::Johnson(ts, keep, limit).run();
}

struct ExitingCycle {
  Cycle cycle;
  std::vector<TransitionId> exits;
};

// Reachable cycles with at least one fair transition leaving a cycle state.
inline std::vector<ExitingCycle> fair_exiting_cycles(
    const FairTransitionSystem& fts, std::size_t limit = 100000) {
  const auto& ts = fts.ts();
  auto fair = fts.any_fair_mask();
  std::vector<ExitingCycle> out;
  for (auto& c : enumerate_cycles(ts, limit).cycles) {
    ExitingCycle ec{c, {}};
    for (const auto& st : c) {
      for (auto t : ts.out(st.state)) {
        if (fair[t] && ts.transition(t).target != st.state) {
          ec.exits.push_back(t);
        }
      }
    }
    if (!ec.exits.empty()) out.push_back(std::move(ec));
  }
  return out;
}

struct FairnessViolation {
  char clause;  // 'a', 'b' or 'c'
  std::size_t constraint;
  std::vector<TransitionId> witness;
  std::string message;
};

struct FairnessValidation {
  std::vector<FairnessViolation> violations;
  std::vector<std::string> warnings;

  bool valid() const { return violations.empty(); }
};

// Checks the well-formedness clauses of each fairness constraint: a single
// action label, no path from source to target that avoids the constraint,
// and determinism of the fair action at its sources.
inline FairnessValidation validate_fairness(const FairTransitionSystem& fts) {
  const auto& ts = fts.ts();
  const auto& g = ts.digraph();
  FairnessValidation r;
  std::map<ActionId, std::size_t> owner;
  for (std::size_t i = 0; i < fts.fairness().size(); ++i) {
    const auto& f = fts.fairness()[i];
    const auto a0 = ts.transition(f.transitions[0]).action;
    for (auto t : f.transitions) {
      if (ts.transition(t).action != a0) {
        r.violations.push_back({'a', i, {f.transitions[0], t},
                                f.name + " mixes actions " +
                                    ts.action_name(a0) + " and " +
                                    ts.action_name(ts.transition(t).action)});
      }
    }
    auto [it, fresh] = owner.emplace(a0, i);
    if (!fresh) {
      r.warnings.push_back("action " + ts.action_name(a0) +
                           " is shared by " + fts.fairness()[it->second].name +
                           " and " + f.name);
    }
    auto taken = fts.taken_mask(i);
    graph::EdgeMask avoid(taken.size());
    for (std::size_t e = 0; e < taken.size(); ++e) avoid[e] = !taken[e];
    for (auto t : f.transitions) {
      const auto& tr = ts.transition(t);
      // Nonempty path from source to target without fair transitions.
      for (auto first : ts.out(tr.source)) {
        if (!avoid[first]) continue;
        auto p = graph::shortest_path(
            g, ts.transition(first).target,
            [&](std::uint32_t v) { return v == tr.target; }, {}, avoid);
        if (!p) continue;
        std::vector<TransitionId> w{first};
        w.insert(w.end(), p->begin(), p->end());
        r.violations.push_back(
            {'b', i, w,
             f.name + ": " + ts.describe_transition(t) +
                 " can be bypassed by a path without fair transitions"});
        break;
      }
      for (auto other : ts.out(tr.source)) {
        const auto& o = ts.transition(other);
        if (o.action == tr.action && o.target != tr.target) {
          r.violations.push_back(
              {'c', i, {t, other},
               f.name + ": action " + ts.action_name(tr.action) +
                   " is not deterministic at s" + std::to_string(tr.source)});
        }
      }
    }
  }
  return r;
}

}  // namespace fairpart
