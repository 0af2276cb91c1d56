#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "fairpart/error.hpp"
#include "fairpart/graph.hpp"
#include "fairpart/pltl.hpp"
#include "fairpart/proposition.hpp"

namespace fairpart::buchi {

using State = std::uint32_t;

struct Edge {
  State src;
  State dst;
  PropPtr guard;
  std::string key;  // canonical text of the guard

  bool operator<(const Edge& o) const {
    return std::tie(src, dst, key) < std::tie(o.src, o.dst, o.key);
  }
};

// Transition-labelled Buchi automaton. A run reads letter i on the edge
// leaving its i-th state, i.e. the guard is evaluated on the source position.
struct Automaton {
  std::size_t state_count = 0;
  State initial = 0;
  std::vector<bool> accepting;
  std::vector<Edge> edges;

  std::vector<std::vector<std::size_t>> out() const {
    std::vector<std::vector<std::size_t>> o(state_count);
    for (std::size_t e = 0; e < edges.size(); ++e) o[edges[e].src].push_back(e);
    return o;
  }

  graph::Digraph digraph() const {
    graph::Digraph g(state_count);
    for (const auto& e : edges) g.add_edge(e.src, e.dst);
    return g;
  }

  void add_edge(State s, State d, PropPtr g) {
    auto k = fairpart::to_string(*g);
    edges.push_back({s, d, std::move(g), std::move(k)});
  }
};

inline std::string to_dot(const Automaton& b, const std::string& name = "B") {
  std::string o = "digraph " + name + " {\n  rankdir=LR;\n";
  o += "  init [shape=point];\n";
  for (std::size_t q = 0; q < b.state_count; ++q) {
    o += "  q" + std::to_string(q) + " [shape=" +
         (b.accepting[q] ? "doublecircle" : "circle") + "];\n";
  }
  o += "  init -> q" + std::to_string(b.initial) + ";\n";
  for (const auto& e : b.edges) {
    std::string label = e.key;
    std::string esc;
    for (char c : label) {
      if (c == '"') esc += "\\";
      esc += c;
    }
    o += "  q" + std::to_string(e.src) + " -> q" + std::to_string(e.dst) +
         " [label=\"" + esc + "\"];\n";
  }
  return o + "}\n";
}

// ---------------------------------------------------------------- NNF

namespace detail {

struct NNode {
  enum Kind { kTrue, kFalse, kLit, kAnd, kOr, kNext, kUntil, kRelease };
  Kind kind;
  PropPtr lit;
  int a = -1;
  int b = -1;
};

class NnfTable {
 public:
  std::vector<NNode> nodes;

  int intern(NNode n) {
    std::string key = std::to_string(n.kind) + ":";
    if (n.kind == NNode::kLit) {
      key += fairpart::to_string(*n.lit);
    } else {
      int a = n.a, b = n.b;
      if ((n.kind == NNode::kAnd || n.kind == NNode::kOr) && a > b) {
        std::swap(a, b);
        std::swap(n.a, n.b);
      }
      key += std::to_string(a) + "," + std::to_string(b);
    }
    auto [it, fresh] = index_.emplace(key, static_cast<int>(nodes.size()));
    if (fresh) nodes.push_back(std::move(n));
    return it->second;
  }

  int t() { return intern({NNode::kTrue, nullptr}); }
  int f() { return intern({NNode::kFalse, nullptr}); }

  int lit(PropPtr p) {
    if (p->kind == Prop::Kind::kTrue) return t();
    if (p->kind == Prop::Kind::kFalse) return f();
    return intern({NNode::kLit, std::move(p)});
  }

  int bin(NNode::Kind k, int a, int b) {
    const auto ka = nodes[a].kind, kb = nodes[b].kind;
    if (k == NNode::kAnd) {
      if (ka == NNode::kFalse || kb == NNode::kFalse) return f();
      if (ka == NNode::kTrue) return b;
      if (kb == NNode::kTrue) return a;
      if (a == b) return a;
    }
    if (k == NNode::kOr) {
      if (ka == NNode::kTrue || kb == NNode::kTrue) return t();
      if (ka == NNode::kFalse) return b;
      if (kb == NNode::kFalse) return a;
      if (a == b) return a;
    }
    if (k == NNode::kUntil && (kb == NNode::kTrue || kb == NNode::kFalse)) {
      return b;
    }
    if (k == NNode::kRelease && (kb == NNode::kTrue || kb == NNode::kFalse)) {
      return b;
    }
    return intern({k, nullptr, a, b});
  }

  int build(const pltl::FormulaPtr& f, bool neg) {
    using pltl::Op;
    if (!pltl::temporal(*f)) {
      auto p = pltl::as_prop(*f);
      if (!neg) return lit(p);
      return lit(p->kind == Prop::Kind::kNot ? p->args[0] : p_not(p));
    }
    switch (f->op) {
      case Op::kNot:
        return build(f->a, !neg);
      case Op::kAnd:
        return bin(neg ? NNode::kOr : NNode::kAnd, build(f->a, neg),
                   build(f->b, neg));
      case Op::kOr:
        return bin(neg ? NNode::kAnd : NNode::kOr, build(f->a, neg),
                   build(f->b, neg));
      case Op::kImplies:
        return bin(neg ? NNode::kAnd : NNode::kOr, build(f->a, !neg),
                   build(f->b, neg));
      case Op::kEquiv: {
        int a = build(f->a, false), na = build(f->a, true);
        int b = build(f->b, neg), nb = build(f->b, !neg);
        return bin(NNode::kOr, bin(NNode::kAnd, a, b),
                   bin(NNode::kAnd, na, nb));
      }
      case Op::kNext: {
        int a = build(f->a, neg);
        auto k = nodes[a].kind;
        if (k == NNode::kTrue || k == NNode::kFalse) return a;
        return intern({NNode::kNext, nullptr, a});
      }
      case Op::kUntil:
        return bin(neg ? NNode::kRelease : NNode::kUntil, build(f->a, neg),
                   build(f->b, neg));
      case Op::kRelease:
        return bin(neg ? NNode::kUntil : NNode::kRelease, build(f->a, neg),
                   build(f->b, neg));
      case Op::kEventually:
        return neg ? bin(NNode::kRelease, this->f(), build(f->a, true))
                   : bin(NNode::kUntil, t(), build(f->a, false));
      case Op::kAlways:
        return neg ? bin(NNode::kUntil, t(), build(f->a, true))
                   : bin(NNode::kRelease, this->f(), build(f->a, false));
      default:
        throw Error("unexpected operator in formula");
    }
  }

  bool is_g(int n) const {
    return nodes[n].kind == NNode::kRelease && nodes[nodes[n].a].kind == NNode::kFalse;
  }
  bool is_f(int n) const {
    return nodes[n].kind == NNode::kUntil && nodes[nodes[n].a].kind == NNode::kTrue;
  }
  int g(int x) { return bin(NNode::kRelease, f(), x); }
  int ev(int x) { return bin(NNode::kUntil, t(), x); }

  // Truth does not depend on any finite prefix (GF x, FG x, and boolean or
  // temporal combinations of such).
  bool suspendable(int n) {
    auto it = susp_.find(n);
    if (it != susp_.end()) return it->second;
    const NNode e = nodes[n];
    bool r = false;
    if (is_g(n)) {
      r = is_f(e.b) || suspendable(e.b);
    } else if (is_f(n)) {
      r = is_g(e.b) || suspendable(e.b);
    } else if (e.kind == NNode::kAnd || e.kind == NNode::kOr) {
      r = suspendable(e.a) && suspendable(e.b);
    } else if (e.kind == NNode::kNext) {
      r = suspendable(e.a);
    }
    susp_[n] = r;
    return r;
  }

  void flatten(int n, NNode::Kind k, std::vector<int>& out) const {
    if (nodes[n].kind == k) {
      flatten(nodes[n].a, k, out);
      flatten(nodes[n].b, k, out);
    } else {
      out.push_back(n);
    }
  }

  int fold(NNode::Kind k, const std::vector<int>& xs) {
    int r = k == NNode::kAnd ? t() : f();
    for (int x : xs) r = bin(k, r, x);
    return r;
  }

  // Language-preserving rewriting: G(S | x) = S | G x and F(S & x) = S & F x
  // for suspendable S, G distributes over &, F over |, and temporal
  // operators are dropped in front of suspendable formulas.
  int rewrite(int n) {
    auto it = rw_.find(n);
    if (it != rw_.end()) return it->second;
    const NNode e = nodes[n];
    int r = n;
    switch (e.kind) {
      case NNode::kAnd:
      case NNode::kOr:
        r = bin(e.kind, rewrite(e.a), rewrite(e.b));
        break;
      case NNode::kNext: {
        int a = rewrite(e.a);
        r = suspendable(a) ? a : intern({NNode::kNext, nullptr, a});
        break;
      }
      case NNode::kUntil:
      case NNode::kRelease: {
        int a = rewrite(e.a), b = rewrite(e.b);
        bool g_op = e.kind == NNode::kRelease && nodes[a].kind == NNode::kFalse;
        bool f_op = e.kind == NNode::kUntil && nodes[a].kind == NNode::kTrue;
        if ((g_op || f_op) && suspendable(b)) {
          r = b;
        } else if (g_op && is_g(b)) {
          r = b;
        } else if (f_op && is_f(b)) {
          r = b;
        } else if (g_op && nodes[b].kind == NNode::kAnd) {
          r = rewrite(bin(NNode::kAnd, g(nodes[b].a), g(nodes[b].b)));
        } else if (f_op && nodes[b].kind == NNode::kOr) {
          r = rewrite(bin(NNode::kOr, ev(nodes[b].a), ev(nodes[b].b)));
        } else if ((g_op && nodes[b].kind == NNode::kOr) ||
                   (f_op && nodes[b].kind == NNode::kAnd)) {
          auto k = nodes[b].kind;
          std::vector<int> xs, sus, rest;
          flatten(b, k, xs);
          for (int x : xs) (suspendable(x) ? sus : rest).push_back(x);
          if (sus.empty()) {
            r = bin(e.kind, a, b);
          } else {
            int inner = fold(k, rest);
            if (!rest.empty()) inner = g_op ? g(inner) : ev(inner);
            sus.push_back(inner);
            r = rewrite(fold(k, sus));
          }
        } else {
          r = bin(e.kind, a, b);
        }
        break;
      }
      default:
        break;
    }
    rw_[n] = r;
    return r;
  }

 private:
  std::unordered_map<std::string, int> index_;
  std::unordered_map<int, bool> susp_;
  std::unordered_map<int, int> rw_;
};

}  // namespace detail

struct TranslateOptions {
  DomainMap domains;              // known variable domains, if any
  std::size_t max_states = 200000;
  bool abmod_normalize = true;    // pick transient acceptance marks for ABmod
};

inline Automaton simplify(Automaton b);
struct AbmodResult;
inline AbmodResult classify_abmod(const Automaton& b,
                                  const DomainMap& domains = {});
inline Automaton abmod_normalize(Automaton b, const DomainMap& domains = {});

namespace detail {

// Tableau expansion producing a generalized automaton, then degeneralized.
class Tableau {
 public:
  Tableau(const pltl::FormulaPtr& f, const TranslateOptions& opt)
      : opt_(opt) {
    root_ = nnf_.rewrite(nnf_.build(f, false));
  }

  Automaton run() {
    expand_all();
    return degeneralize();
  }

 private:
  struct Node {
    std::set<int> incoming;  // -1 is the initial pseudo-state
    std::set<int> fresh;
    std::set<int> old;
    std::set<int> next;
  };

  bool consistent(const std::set<int>& old) {
    std::vector<int> lits;
    for (int x : old) {
      if (nnf_.nodes[x].kind == NNode::kLit) lits.push_back(x);
    }
    if (lits.size() < 1) return true;
    auto it = sat_cache_.find(lits);
    if (it != sat_cache_.end()) return it->second;
    std::vector<PropPtr> ps;
    for (int x : lits) ps.push_back(nnf_.nodes[x].lit);
    bool ok = satisfiable(*p_and(ps), opt_.domains);
    sat_cache_.emplace(lits, ok);
    return ok;
  }

  void expand_all() {
    std::vector<Node> stack;
    Node start;
    start.incoming = {-1};
    start.fresh = {root_};
    stack.push_back(start);
    while (!stack.empty()) {
      Node n = std::move(stack.back());
      stack.pop_back();
      if (n.fresh.empty()) {
        // Nodes agreeing on literals, obligations and pending untils accept
        // the same suffixes, so they are merged.
        std::set<int> sig;
        for (int x : n.old) {
          const auto& nx = nnf_.nodes[x];
          if (nx.kind == NNode::kLit ||
              (nx.kind == NNode::kUntil && !n.old.count(nx.b))) {
            sig.insert(x);
          }
        }
        auto key = std::make_pair(std::move(sig), n.next);
        auto it = done_.find(key);
        if (it != done_.end()) {
          nodes_[it->second].incoming.insert(n.incoming.begin(),
                                             n.incoming.end());
          continue;
        }
        if (nodes_.size() >= opt_.max_states) {
          throw BudgetExceeded("automaton exceeds " +
                               std::to_string(opt_.max_states) + " states");
        }
        int id = static_cast<int>(nodes_.size());
        done_.emplace(key, id);
        nodes_.push_back(n);
        Node succ;
        succ.incoming = {id};
        succ.fresh = n.next;
        stack.push_back(std::move(succ));
        continue;
      }
      int eta = *n.fresh.begin();
      n.fresh.erase(n.fresh.begin());
      const NNode& e = nnf_.nodes[eta];
      auto add_new = [&](Node& m, int x) {
        if (!m.old.count(x)) m.fresh.insert(x);
      };
      switch (e.kind) {
        case NNode::kFalse:
          break;
        case NNode::kTrue:
          stack.push_back(std::move(n));
          break;
        case NNode::kLit:
          n.old.insert(eta);
          if (consistent(n.old)) stack.push_back(std::move(n));
          break;
        case NNode::kAnd:
          n.old.insert(eta);
          add_new(n, e.a);
          add_new(n, e.b);
          stack.push_back(std::move(n));
          break;
        case NNode::kNext:
          n.old.insert(eta);
          n.next.insert(e.a);
          stack.push_back(std::move(n));
          break;
        case NNode::kOr:
        case NNode::kUntil:
        case NNode::kRelease: {
          Node n1 = n, n2 = n;
          n1.old.insert(eta);
          n2.old.insert(eta);
          if (e.kind == NNode::kOr) {
            add_new(n1, e.a);
            add_new(n2, e.b);
          } else if (e.kind == NNode::kUntil) {
            add_new(n1, e.a);
            n1.next.insert(eta);
            add_new(n2, e.b);
          } else {
            add_new(n1, e.b);
            n1.next.insert(eta);
            add_new(n2, e.a);
            add_new(n2, e.b);
          }
          stack.push_back(std::move(n2));
          stack.push_back(std::move(n1));
          break;
        }
      }
    }
  }

  PropPtr guard(const Node& n, std::string* key) const {
    std::vector<PropPtr> ps;
    for (int x : n.old) {
      if (nnf_.nodes[x].kind == NNode::kLit) ps.push_back(nnf_.nodes[x].lit);
    }
    auto g = p_and(ps);
    *key = fairpart::to_string(*g);
    return g;
  }

  Automaton degeneralize() {
    // Acceptance sets, one per until subformula.
    std::vector<int> untils;
    for (std::size_t i = 0; i < nnf_.nodes.size(); ++i) {
      if (nnf_.nodes[i].kind == NNode::kUntil) untils.push_back(static_cast<int>(i));
    }
    const std::size_t n = nodes_.size();
    std::vector<std::vector<bool>> in_set(untils.size(),
                                          std::vector<bool>(n, false));
    for (std::size_t k = 0; k < untils.size(); ++k) {
      int u = untils[k];
      for (std::size_t m = 0; m < n; ++m) {
        const auto& old = nodes_[m].old;
        in_set[k][m] = !old.count(u) || old.count(nnf_.nodes[u].b);
      }
    }
    // Drop sets containing every node.
    std::vector<std::vector<bool>> sets;
    for (auto& s : in_set) {
      if (std::find(s.begin(), s.end(), false) != s.end()) sets.push_back(s);
    }
    const std::size_t k = sets.size();
    const std::size_t layers = std::max<std::size_t>(k, 1);

    // Successor lists of the node graph (index n is the initial pseudo-state).
    std::vector<std::vector<int>> succ(n + 1);
    std::vector<PropPtr> guards(n);
    std::vector<std::string> keys(n);
    for (std::size_t m = 0; m < n; ++m) {
      guards[m] = guard(nodes_[m], &keys[m]);
      for (int i : nodes_[m].incoming) {
        succ[i < 0 ? n : static_cast<std::size_t>(i)].push_back(
            static_cast<int>(m));
      }
    }
    auto accepting_node = [&](std::size_t m, std::size_t layer) {
      if (k == 0) return true;
      return layer == k - 1 && sets[k - 1][m];
    };
    auto next_layer = [&](std::size_t m, std::size_t layer) {
      if (k == 0 || m == n) return layer;
      return sets[layer][m] ? (layer + 1) % k : layer;
    };
    Automaton b;
    std::map<std::pair<std::size_t, std::size_t>, State> ids;
    std::vector<std::pair<std::size_t, std::size_t>> todo;
    auto intern = [&](std::size_t m, std::size_t layer) {
      auto [it, fresh] = ids.emplace(std::make_pair(m, layer),
                                     static_cast<State>(b.state_count));
      if (fresh) {
        if (b.state_count >= opt_.max_states) {
          throw BudgetExceeded("automaton exceeds " +
                               std::to_string(opt_.max_states) + " states");
        }
        ++b.state_count;
        b.accepting.push_back(m != n && accepting_node(m, layer));
        todo.emplace_back(m, layer);
      }
      return it->second;
    };
    b.initial = intern(n, 0);
    (void)layers;
    while (!todo.empty()) {
      auto [m, layer] = todo.back();
      todo.pop_back();
      State from = ids.at({m, layer});
      std::size_t nl = next_layer(m, layer);
      for (int t : succ[m]) {
        State to = intern(static_cast<std::size_t>(t), nl);
        b.edges.push_back({from, to, guards[t], keys[t]});
      }
    }
    return b;
  }

  TranslateOptions opt_;
  NnfTable nnf_;
  int root_;
  std::vector<Node> nodes_;
  std::map<std::pair<std::set<int>, std::set<int>>, int> done_;
  std::map<std::vector<int>, bool> sat_cache_;
};

}  // namespace detail

// ---------------------------------------------------------------- reduction

namespace detail {

inline Automaton restrict_states(const Automaton& b,
                                 const std::vector<bool>& keep) {
  std::vector<State> map(b.state_count, ~State{0});
  Automaton r;
  for (State q = 0; q < b.state_count; ++q) {
    if (!keep[q]) continue;
    map[q] = static_cast<State>(r.state_count++);
    r.accepting.push_back(b.accepting[q]);
  }
  r.initial = map[b.initial];
  std::set<Edge> seen;
  for (const auto& e : b.edges) {
    if (!keep[e.src] || !keep[e.dst]) continue;
    Edge ne{map[e.src], map[e.dst], e.guard, e.key};
    if (seen.insert(ne).second) r.edges.push_back(ne);
  }
  std::sort(r.edges.begin(), r.edges.end());
  return r;
}

// Drops an edge when a parallel edge has a guard made of a subset of its
// conjuncts (and so is implied by it).
inline void drop_subsumed(Automaton& b) {
  std::map<std::pair<State, State>, std::vector<std::size_t>> par;
  for (std::size_t e = 0; e < b.edges.size(); ++e) {
    par[{b.edges[e].src, b.edges[e].dst}].push_back(e);
  }
  std::vector<bool> drop(b.edges.size(), false);
  for (const auto& [ends, es] : par) {
    if (es.size() < 2) continue;
    std::vector<std::set<std::string>> lits(es.size());
    for (std::size_t i = 0; i < es.size(); ++i) {
      for (const auto& c : conjuncts(b.edges[es[i]].guard)) {
        lits[i].insert(fairpart::to_string(*c));
      }
    }
    for (std::size_t i = 0; i < es.size(); ++i) {
      for (std::size_t j = 0; j < es.size() && !drop[es[i]]; ++j) {
        if (i == j || drop[es[j]]) continue;
        if (std::includes(lits[i].begin(), lits[i].end(), lits[j].begin(),
                          lits[j].end()) &&
            (lits[i] != lits[j] || j < i)) {
          drop[es[i]] = true;
        }
      }
    }
  }
  std::vector<Edge> kept;
  for (std::size_t e = 0; e < b.edges.size(); ++e) {
    if (!drop[e]) kept.push_back(b.edges[e]);
  }
  b.edges = std::move(kept);
}

// States lying on a cycle (nontrivial SCC).
inline std::vector<bool> cyclic_states(const Automaton& b) {
  auto g = b.digraph();
  auto scc = graph::tarjan(g);
  std::vector<bool> cyc(b.state_count, false);
  for (int c = 0; c < static_cast<int>(scc.members.size()); ++c) {
    if (!graph::nontrivial(g, scc, c)) continue;
    for (auto v : scc.members[c]) cyc[v] = true;
  }
  return cyc;
}

}  // namespace detail

// Removes unreachable states and states from which no accepting cycle is
// reachable. The initial state is always kept.
inline Automaton prune(const Automaton& b) {
  auto g = b.digraph();
  auto reach = graph::reachable(g, {b.initial});
  auto scc = graph::tarjan(g);
  std::vector<std::uint32_t> good;
  for (int c = 0; c < static_cast<int>(scc.members.size()); ++c) {
    if (!graph::nontrivial(g, scc, c)) continue;
    bool acc = false;
    for (auto v : scc.members[c]) acc = acc || b.accepting[v];
    if (acc) good.insert(good.end(), scc.members[c].begin(), scc.members[c].end());
  }
  auto live = graph::reachable(graph::reversed(g), good);
  std::vector<bool> keep(b.state_count);
  for (State q = 0; q < b.state_count; ++q) keep[q] = reach[q] && live[q];
  keep[b.initial] = true;
  return detail::restrict_states(b, keep);
}

// Language-preserving reduction: pruning, neutral acceptance on states off
// every cycle, bisimulation quotient, and folding of acyclic states into
// states with identical outgoing edges.
inline Automaton simplify(Automaton b) {
  while (true) {
    b = prune(b);
    detail::drop_subsumed(b);
    auto cyc = detail::cyclic_states(b);
    for (State q = 0; q < b.state_count; ++q) {
      if (!cyc[q]) b.accepting[q] = false;
    }
    // Bisimulation quotient.
    std::map<std::string, int> guard_id;
    std::vector<int> gid(b.edges.size());
    for (std::size_t e = 0; e < b.edges.size(); ++e) {
      gid[e] = guard_id.emplace(b.edges[e].key, static_cast<int>(guard_id.size()))
                   .first->second;
    }
    std::vector<std::size_t> block(b.state_count);
    for (State q = 0; q < b.state_count; ++q) block[q] = b.accepting[q] ? 1 : 0;
    auto out = b.out();
    std::size_t count = 0;
    while (true) {
      std::map<std::vector<std::size_t>, std::size_t> sigs;
      std::vector<std::size_t> nb(b.state_count);
      for (State q = 0; q < b.state_count; ++q) {
        std::vector<std::size_t> s{block[q]};
        std::vector<std::pair<int, std::size_t>> es;
        for (auto e : out[q]) es.emplace_back(gid[e], block[b.edges[e].dst]);
        std::sort(es.begin(), es.end());
        es.erase(std::unique(es.begin(), es.end()), es.end());
        for (auto [g, d] : es) {
          s.push_back(static_cast<std::size_t>(g));
          s.push_back(d);
        }
        auto [it, fresh] = sigs.emplace(std::move(s), sigs.size());
        nb[q] = it->second;
      }
      block = nb;
      if (sigs.size() == count) break;
      count = sigs.size();
    }
    std::size_t blocks = 1 + *std::max_element(block.begin(), block.end());
    bool changed = blocks < b.state_count;

    Automaton q;
    q.state_count = blocks;
    q.accepting.assign(blocks, false);
    for (State s = 0; s < b.state_count; ++s) {
      if (b.accepting[s]) q.accepting[block[s]] = true;
    }
    q.initial = static_cast<State>(block[b.initial]);
    std::set<Edge> es;
    for (const auto& e : b.edges) {
      es.insert({static_cast<State>(block[e.src]),
                 static_cast<State>(block[e.dst]), e.guard, e.key});
    }
    q.edges.assign(es.begin(), es.end());
    b = std::move(q);

    // Fold an acyclic state into another state with the same outgoing edges.
    cyc = detail::cyclic_states(b);
    out = b.out();
    std::vector<std::set<std::pair<std::string, State>>> outs(b.state_count);
    for (State s = 0; s < b.state_count; ++s) {
      for (auto e : out[s]) outs[s].emplace(b.edges[e].key, b.edges[e].dst);
    }
    std::vector<State> target(b.state_count);
    for (State s = 0; s < b.state_count; ++s) target[s] = s;
    std::map<std::set<std::pair<std::string, State>>, State> rep;
    for (State n = 0; n < b.state_count; ++n) {
      if (cyc[n]) rep.emplace(outs[n], n);
    }
    for (State t = 0; t < b.state_count; ++t) {
      if (cyc[t]) continue;
      auto [it, fresh] = rep.emplace(outs[t], t);
      if (!fresh && it->second != t) {
        target[t] = it->second;
        changed = true;
      }
    }
    if (changed) {
      std::vector<bool> keep(b.state_count);
      for (State s = 0; s < b.state_count; ++s) keep[s] = target[s] == s;
      for (auto& e : b.edges) e.dst = target[e.dst];
      b.initial = target[b.initial];
      b = detail::restrict_states(b, keep);
    }
    if (!changed) break;
  }
  return b;
}

// Automaton accepting exactly the words satisfying `f`.
inline Automaton ltl_to_buchi(const pltl::FormulaPtr& f,
                              const TranslateOptions& opt = {}) {
  auto b = simplify(detail::Tableau(f, opt).run());
  if (opt.abmod_normalize) b = abmod_normalize(std::move(b), opt.domains);
  return b;
}

// ---------------------------------------------------------------- runs

// Whether the automaton has an accepting run over the word.
inline bool accepts(const Automaton& b, const pltl::Word& w) {
  const std::size_t n = w.size();
  std::vector<CompiledProp> guards;
  for (const auto& e : b.edges) guards.emplace_back(*e.guard, std::vector<const Signature*>{w.sig});
  auto out = b.out();
  // Product node = position * |Q| + state.
  const std::size_t qn = b.state_count;
  graph::Digraph g(n * qn);
  std::vector<bool> holds(b.edges.size() * n);
  for (std::size_t e = 0; e < b.edges.size(); ++e) {
    for (std::size_t i = 0; i < n; ++i) holds[e * n + i] = guards[e].eval(w.at(i));
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (State q = 0; q < qn; ++q) {
      for (auto e : out[q]) {
        if (!holds[e * n + i]) continue;
        g.add_edge(static_cast<std::uint32_t>(i * qn + q),
                   static_cast<std::uint32_t>(w.next(i) * qn + b.edges[e].dst));
      }
    }
  }
  auto reach = graph::reachable(g, {b.initial});
  auto scc = graph::tarjan(g, reach);
  for (int c = 0; c < static_cast<int>(scc.members.size()); ++c) {
    if (!graph::nontrivial(g, scc, c)) continue;
    for (auto v : scc.members[c]) {
      if (b.accepting[v % qn]) return true;
    }
  }
  return false;
}

// ---------------------------------------------------------------- ABmod

struct AbmodResult {
  bool in = false;
  int failed_clause = 0;  // 1..3 when not in the class
  std::string reason;
};

// Structural membership test. Clause 1: a self-loop on the initial state
// with a valid guard. Clause 2: every edge leaving a non-initial state enters
// an accepting state, so after leaving q0 the run passes through at most
// one non-accepting state and then stays accepting. Clause 3: every edge
// p into an accepting state q' is matched by an edge p' out of q' with
// p => p'.
inline AbmodResult classify_abmod(const Automaton& raw,
                                  const DomainMap& domains) {
  Automaton b = prune(raw);
  AbmodResult r;
  bool any_acc = false;
  for (State q = 0; q < b.state_count; ++q) {
    if (b.accepting[q]) any_acc = true;
  }
  if (!any_acc || b.edges.empty()) {
    r.in = true;
    r.reason = "empty language";
    return r;
  }
  const State q0 = b.initial;
  bool loop = false;
  for (const auto& e : b.edges) {
    if (e.src == q0 && e.dst == q0 && implies_prop(*p_true(), *e.guard, domains)) {
      loop = true;
    }
  }
  if (!loop) {
    r.failed_clause = 1;
    r.reason = "initial state has no self-loop with a valid guard";
    return r;
  }
  // Once a run has left q0 it must stay accepting, also after re-entering q0.
  bool reentered = false;
  for (const auto& e : b.edges) reentered = reentered || (e.src != q0 && e.dst == q0);
  for (const auto& e : b.edges) {
    if ((e.src != q0 || reentered) && !b.accepting[e.dst]) {
      r.failed_clause = 2;
      r.reason = "edge q" + std::to_string(e.src) + " -> q" +
                 std::to_string(e.dst) + " leaves the accepting region";
      return r;
    }
  }
  auto out = b.out();
  for (const auto& e : b.edges) {
    if (!b.accepting[e.dst]) continue;
    bool matched = false;
    for (auto f : out[e.dst]) {
      if (implies_prop(*e.guard, *b.edges[f].guard, domains)) {
        matched = true;
        break;
      }
    }
    if (!matched) {
      r.failed_clause = 3;
      r.reason = "guard '" + e.key + "' into q" + std::to_string(e.dst) +
                 " implies no guard leaving it";
      return r;
    }
  }
  r.in = true;
  return r;
}

// Acceptance marks of states off every cycle do not affect the language;
// choose them so that the automaton fits the ABmod shape when possible.
inline Automaton abmod_normalize(Automaton b, const DomainMap& domains) {
  auto cyc = detail::cyclic_states(b);
  std::vector<State> free;
  for (State q = 0; q < b.state_count; ++q) {
    if (!cyc[q] && q != b.initial) free.push_back(q);
  }
  if (free.size() > 12 || b.state_count > 256) return b;
  std::vector<std::uint32_t> masks;
  for (std::uint32_t m = 0; m < (1u << free.size()); ++m) masks.push_back(m);
  std::stable_sort(masks.begin(), masks.end(), [](auto x, auto y) {
    return __builtin_popcount(x) < __builtin_popcount(y);
  });
  for (auto m : masks) {
    Automaton c = b;
    for (std::size_t i = 0; i < free.size(); ++i) {
      c.accepting[free[i]] = (m >> i) & 1u;
    }
    if (classify_abmod(c, domains).in) return c;
  }
  return b;
}

}  // namespace fairpart::buchi
