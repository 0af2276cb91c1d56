#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdint>
#include <cstdlib>
#include <functional>
#include <optional>
#include <string>
#include <thread>
#include <unordered_map>
#include <vector>

#include "fairpart/buchi.hpp"
#include "fairpart/core.hpp"
#include "fairpart/error.hpp"
#include "fairpart/frontend.hpp"
#include "fairpart/graph.hpp"
#include "fairpart/io.hpp"
#include "fairpart/partition.hpp"
#include "fairpart/pltl.hpp"
#include "fairpart/refinement.hpp"
#include "fairpart/relevance.hpp"

namespace fairpart::mc {

enum class FairnessMode { kFormula, kAlgorithmic, kAuto };

inline std::string to_string(FairnessMode m) {
  switch (m) {
    case FairnessMode::kFormula: return "formula";
    case FairnessMode::kAlgorithmic: return "algorithmic";
    case FairnessMode::kAuto: return "auto";
  }
  return "?";
}

inline FairnessMode parse_mode(const std::string& s) {
  if (s == "formula") return FairnessMode::kFormula;
  if (s == "algorithmic") return FairnessMode::kAlgorithmic;
  if (s == "auto") return FairnessMode::kAuto;
  throw InvalidInput("unknown fairness mode '" + s + "'");
}

struct Options {
  FairnessMode mode = FairnessMode::kAuto;
  std::size_t max_automaton_states = 4000;  // formula-mode fallback trigger
  std::size_t max_product_states = 4000000;
  unsigned workers = 0;  // 0: FAIRPART_WORKERS or hardware concurrency
};

struct Stats {
  std::size_t automaton_states = 0;
  std::size_t product_states = 0;
  std::size_t product_edges = 0;
  double millis = 0;
  std::string mode;
  bool fell_back = false;
};

struct Verdict {
  bool holds = true;
  std::optional<Lasso> counterexample;
  Stats stats;
};

inline unsigned worker_count(unsigned requested) {
  if (requested > 0) return requested;
  if (const char* e = std::getenv("FAIRPART_WORKERS")) {
    int n = std::atoi(e);
    if (n > 0) return static_cast<unsigned>(n);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

// Runs fn(0..n-1) on up to `workers` threads.
inline void parallel_for(std::size_t n, unsigned workers,
                         const std::function<void(std::size_t)>& fn) {
  workers = static_cast<unsigned>(std::min<std::size_t>(workers, n));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(n);
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i; (i = next++) < n;) {
        try {
          fn(i);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

// ---------------------------------------------------------------- product

// Synchronous product of a system with an automaton. The automaton edge
// leaving (s, q) reads the valuation of s.
struct Product {
  graph::Digraph g;
  std::vector<StateId> state;            // per node
  std::vector<buchi::State> aut;         // per node
  std::vector<TransitionId> transition;  // per edge
  std::vector<std::uint32_t> initial;
  std::vector<bool> accepting;           // per node
};

inline Product build_product(const TransitionSystem& ts,
                             const buchi::Automaton& b,
                             std::size_t max_nodes) {
  Product p;
  std::vector<CompiledProp> guards;
  guards.reserve(b.edges.size());
  for (const auto& e : b.edges) {
    guards.emplace_back(*e.guard,
                        std::vector<const Signature*>{&ts.signature()});
  }
  std::vector<std::int8_t> cache(b.edges.size() * ts.state_count(), -1);
  auto holds = [&](std::size_t e, StateId s) {
    auto& c = cache[e * ts.state_count() + s];
    if (c < 0) c = guards[e].eval(ts.label(s)) ? 1 : 0;
    return c == 1;
  };
  auto bout = b.out();
  std::unordered_map<std::uint64_t, std::uint32_t> ids;
  std::vector<std::uint32_t> work;
  auto node = [&](StateId s, buchi::State q) {
    std::uint64_t key = (std::uint64_t{s} << 32) | q;
    auto [it, fresh] = ids.emplace(key, static_cast<std::uint32_t>(p.state.size()));
    if (fresh) {
      if (p.state.size() >= max_nodes) {
        throw BudgetExceeded("product exceeds " + std::to_string(max_nodes) +
                             " states");
      }
      p.state.push_back(s);
      p.aut.push_back(q);
      p.accepting.push_back(b.accepting[q]);
      p.g.out.emplace_back();
      ++p.g.node_count;
      work.push_back(it->second);
    }
    return it->second;
  };
  for (auto s : ts.initial()) p.initial.push_back(node(s, b.initial));
  while (!work.empty()) {
    auto v = work.back();
    work.pop_back();
    auto s = p.state[v];
    auto q = p.aut[v];
    for (auto e : bout[q]) {
      if (!holds(e, s)) continue;
      for (auto t : ts.out(s)) {
        auto w = node(ts.transition(t).target, b.edges[e].dst);
        p.g.add_edge(v, w);
        p.transition.push_back(t);
      }
    }
  }
  return p;
}

inline Lasso lasso_of(const TransitionSystem& ts, const Product& p,
                      const std::vector<std::uint32_t>& stem,
                      const std::vector<std::uint32_t>& loop) {
  Lasso l;
  for (auto e : stem) {
    const auto& t = ts.transition(p.transition[e]);
    l.prefix.push_back({t.source, t.action});
  }
  for (auto e : loop) {
    const auto& t = ts.transition(p.transition[e]);
    l.cycle.push_back({t.source, t.action});
  }
  return l;
}

// Nested depth-first search. Returns (stem, cycle) edge lists of an
// accepting lasso, if any.
inline std::optional<std::pair<std::vector<std::uint32_t>,
                               std::vector<std::uint32_t>>>
nested_dfs(const Product& p) {
  const auto n = p.g.node_count;
  std::vector<bool> blue(n, false), red(n, false);
  struct Frame {
    std::uint32_t v;
    std::size_t next;
    std::uint32_t via;
  };
  constexpr std::uint32_t kNoEdge = ~std::uint32_t{0};
  auto red_search = [&](std::uint32_t seed) -> std::optional<std::vector<std::uint32_t>> {
    std::vector<Frame> st{{seed, 0, kNoEdge}};
    red[seed] = true;
    while (!st.empty()) {
      auto& f = st.back();
      if (f.next == p.g.out[f.v].size()) {
        st.pop_back();
        continue;
      }
      auto e = p.g.out[f.v][f.next++];
      auto w = p.g.edges[e].dst;
      if (w == seed) {
        std::vector<std::uint32_t> cyc;
        for (std::size_t i = 1; i < st.size(); ++i) cyc.push_back(st[i].via);
        cyc.push_back(e);
        return cyc;
      }
      if (!red[w]) {
        red[w] = true;
        st.push_back({w, 0, e});
      }
    }
    return std::nullopt;
  };
  for (auto root : p.initial) {
    if (blue[root]) continue;
    std::vector<Frame> st{{root, 0, kNoEdge}};
    blue[root] = true;
    while (!st.empty()) {
      auto& f = st.back();
      if (f.next < p.g.out[f.v].size()) {
        auto e = p.g.out[f.v][f.next++];
        auto w = p.g.edges[e].dst;
        if (!blue[w]) {
          blue[w] = true;
          st.push_back({w, 0, e});
        }
        continue;
      }
      if (p.accepting[f.v]) {
        if (auto cyc = red_search(f.v)) {
          std::vector<std::uint32_t> stem;
          for (std::size_t i = 1; i < st.size(); ++i) stem.push_back(st[i].via);
          return std::pair{stem, *cyc};
        }
      }
      st.pop_back();
    }
  }
  return std::nullopt;
}

// Emptiness by strongly connected components.
inline bool scc_nonempty(const Product& p) {
  auto scc = graph::tarjan(p.g);
  for (int c = 0; c < static_cast<int>(scc.members.size()); ++c) {
    if (!graph::nontrivial(p.g, scc, c)) continue;
    for (auto v : scc.members[c]) {
      if (p.accepting[v]) return true;
    }
  }
  return false;
}

// ---------------------------------------------------------------- global

inline buchi::Automaton negated_automaton(const TransitionSystem& ts,
                                          const pltl::FormulaPtr& f,
                                          std::size_t max_states) {
  pltl::validate_atoms(*f, ts.signature());
  buchi::TranslateOptions opt;
  opt.domains = domains_of(ts.signature());
  opt.max_states = max_states;
  opt.abmod_normalize = false;
  return buchi::ltl_to_buchi(pltl::f_not(f), opt);
}

namespace detail {

inline double since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(
             std::chrono::steady_clock::now() - t0)
      .count();
}

inline Verdict check_product(const TransitionSystem& ts,
                             const buchi::Automaton& b, const Options& o) {
  Verdict v;
  auto p = build_product(ts, b, o.max_product_states);
  v.stats.automaton_states = b.state_count;
  v.stats.product_states = p.g.node_count;
  v.stats.product_edges = p.g.edges.size();
  auto hit = nested_dfs(p);
  if (hit.has_value() != scc_nonempty(p)) {
    throw Error("internal: nested DFS and SCC emptiness disagree");
  }
  if (hit) {
    v.holds = false;
    v.counterexample = lasso_of(ts, p, hit->first, hit->second);
  }
  return v;
}

}  // namespace detail

// ts |= P over all executions.
inline Verdict verify_global(const TransitionSystem& ts,
                             const pltl::FormulaPtr& P, const Options& o = {}) {
  auto t0 = std::chrono::steady_clock::now();
  auto b = negated_automaton(ts, P, o.max_automaton_states);
  auto v = detail::check_product(ts, b, o);
  v.stats.mode = "global";
  v.stats.millis = detail::since(t0);
  return v;
}

// Fairness as acceptance: a counterexample is an accepting product lasso
// that is also a computation.
inline Verdict verify_algorithmic(const FairTransitionSystem& fts,
                                  const pltl::FormulaPtr& P,
                                  const Options& o = {}) {
  auto t0 = std::chrono::steady_clock::now();
  const auto& ts = fts.ts();
  auto b = negated_automaton(ts, P, 200000);
  auto p = build_product(ts, b, o.max_product_states);
  Verdict v;
  v.stats.mode = "algorithmic";
  v.stats.automaton_states = b.state_count;
  v.stats.product_states = p.g.node_count;
  v.stats.product_edges = p.g.edges.size();
  std::vector<graph::Requirement> reqs;
  for (std::size_t i = 0; i < fts.fairness().size(); ++i) {
    auto en = fts.enabled_mask(i);
    auto tk = fts.taken_mask(i);
    graph::Requirement r;
    r.enabled.resize(p.g.node_count);
    r.taken.resize(p.g.edges.size());
    for (std::uint32_t n = 0; n < p.g.node_count; ++n) r.enabled[n] = en[p.state[n]];
    for (std::uint32_t e = 0; e < p.g.edges.size(); ++e) r.taken[e] = tk[p.transition[e]];
    reqs.push_back(std::move(r));
  }
  for (const auto& comp : graph::fair_components(p.g, reqs)) {
    auto acc = std::find_if(comp.begin(), comp.end(),
                            [&](auto n) { return p.accepting[n]; });
    if (acc == comp.end()) continue;
    std::vector<bool> in(p.g.node_count, false);
    for (auto n : comp) in[n] = true;
    std::optional<std::vector<std::uint32_t>> stem;
    for (auto root : p.initial) {
      stem = graph::shortest_path(p.g, root, [&](auto n) { return n == *acc; });
      if (stem) break;
    }
    std::vector<std::uint32_t> through;
    for (const auto& r : reqs) {
      bool visits = false;
      for (auto n : comp) visits = visits || r.enabled[n];
      if (!visits) continue;
      for (auto n : comp) {
        for (auto e : p.g.out[n]) {
          if (r.taken[e] && in[p.g.edges[e].dst]) {
            through.push_back(e);
            goto next_req;
          }
        }
      }
    next_req:;
    }
    auto loop = graph::closed_walk(p.g, comp, *acc, through);
    v.holds = false;
    v.counterexample = lasso_of(ts, p, *stem, loop);
    break;
  }
  v.stats.millis = detail::since(t0);
  return v;
}

// fts |= P over computations only.
inline Verdict verify_under_fairness(const FairTransitionSystem& fts,
                                     const pltl::FormulaPtr& P,
                                     const Options& o = {}) {
  if (o.mode == FairnessMode::kAlgorithmic) return verify_algorithmic(fts, P, o);
  pltl::validate_atoms(*P, fts.ts().signature());
  auto wrapped = pltl::f_implies(pltl::fairness_formula(fts), P);
  if (fts.fairness().empty()) wrapped = P;
  try {
    auto v = verify_global(fts.ts(), wrapped, o);
    v.stats.mode = "formula";
    return v;
  } catch (const BudgetExceeded&) {
    if (o.mode == FairnessMode::kFormula) throw;
  }
  auto v = verify_algorithmic(fts, P, o);
  v.stats.fell_back = true;
  return v;
}

// ---------------------------------------------------------------- parts

struct PartVerdict {
  StateId abstract_state = 0;
  std::vector<std::string> fairness;  // names of the applied constraints
  Verdict verdict;
};

enum class Aggregate { kHolds, kInconclusive, kRefused };

inline std::string to_string(Aggregate a) {
  switch (a) {
    case Aggregate::kHolds: return "holds";
    case Aggregate::kInconclusive: return "inconclusive-or-false";
    case Aggregate::kRefused: return "refused";
  }
  return "?";
}

struct PartitionedReport {
  Aggregate aggregate = Aggregate::kRefused;
  buchi::AbmodResult abmod;
  bool precondition_met = false;
  std::vector<PartVerdict> parts;
  std::vector<partition::Part> part_systems;
  refinement::Verdict refinement;
  std::vector<std::string> notes;
};

inline buchi::AbmodResult classify_negation(const pltl::FormulaPtr& P,
                                            const Signature& sig) {
  buchi::TranslateOptions opt;
  opt.domains = domains_of(sig);
  auto b = buchi::ltl_to_buchi(pltl::f_not(P), opt);
  return buchi::classify_abmod(b, opt.domains);
}

// Checks every part of the pair under its relevant fairness constraints.
// Part verdicts are ordered by abstract state.
inline PartitionedReport verify_parts(const FairTransitionSystem& fts2,
                                      const std::vector<partition::Part>& parts,
                                      const pltl::FormulaPtr& P,
                                      const Options& o,
                                      bool use_relevance = true) {
  PartitionedReport r;
  r.part_systems = parts;
  r.parts.resize(parts.size());
  parallel_for(parts.size(), worker_count(o.workers), [&](std::size_t k) {
    const auto& part = parts[k];
    std::vector<std::size_t> which;
    if (use_relevance) {
      which = pltl::simplify_fairness_for_part(part, fts2);
    } else {
      for (std::size_t i = 0; i < fts2.fairness().size(); ++i) which.push_back(i);
    }
    PartVerdict pv;
    pv.abstract_state = part.abstract_state;
    for (auto i : which) pv.fairness.push_back(fts2.fairness()[i].name);
    if (o.mode == FairnessMode::kAlgorithmic) {
      pv.verdict = verify_algorithmic(partition::part_fts(part, fts2, which), P, o);
    } else {
      auto f = which.empty() ? P
                             : pltl::f_implies(pltl::fairness_formula(fts2, which), P);
      try {
        pv.verdict = verify_global(part.ts, f, o);
        pv.verdict.stats.mode = "formula";
      } catch (const BudgetExceeded&) {
        if (o.mode == FairnessMode::kFormula) throw;
        pv.verdict = verify_algorithmic(partition::part_fts(part, fts2, which), P, o);
        pv.verdict.stats.fell_back = true;
      }
    }
    r.parts[k] = std::move(pv);
  });
  bool all = true;
  for (const auto& pv : r.parts) all = all && pv.verdict.holds;
  r.aggregate = all ? Aggregate::kHolds : Aggregate::kInconclusive;
  return r;
}

// Refinement-based verification of f => P.
inline PartitionedReport verify_by_parts(
    const FairTransitionSystem& fts1, const FairTransitionSystem& fts2,
    const PropPtr& inv, const pltl::FormulaPtr& P, const Options& o = {},
    partition::InitialRule rule = partition::InitialRule::kAnyIncoming) {
  pltl::validate_atoms(*P, fts2.ts().signature());
  auto ref = refinement::check_refinement(fts1, fts2, inv);
  if (!ref.pass) {
    PartitionedReport r;
    r.refinement = std::move(ref);
    r.notes.push_back("refinement check failed; parts not built");
    return r;
  }
  auto f2 = skip_complete(fts2);
  auto parts = partition::refinement_parts(f2, ref.mu, ref.act1, rule);
  auto r = verify_parts(f2, parts, P, o);
  r.refinement = std::move(ref);
  r.abmod = classify_negation(P, fts2.ts().signature());
  r.precondition_met = r.abmod.in;
  if (!r.abmod.in) {
    r.notes.push_back("negated property is not in ABmod (" + r.abmod.reason +
                      "); part verdicts are advisory");
  }
  for (const auto& pv : r.parts) {
    if (!pv.verdict.holds) {
      r.notes.push_back("part s" + std::to_string(pv.abstract_state) +
                        " fails; the global verdict is not determined");
    }
  }
  return r;
}

struct NaiveReport {
  Verdict global;
  std::vector<PartVerdict> parts;
  std::vector<partition::Part> part_systems;
  bool all_parts_hold = true;
  bool paradox = false;  // global fails while every part holds
};

// Global check against f => P on each block of an arbitrary partition.
inline NaiveReport demonstrate_naive_unsoundness(
    const FairTransitionSystem& fts2, const std::vector<std::uint32_t>& block,
    const pltl::FormulaPtr& P, const Options& o = {}) {
  NaiveReport r;
  Options fo = o;
  fo.mode = FairnessMode::kFormula;
  r.global = verify_under_fairness(fts2, P, fo);
  r.part_systems = partition::naive_parts(fts2.ts(), block);
  auto f = fts2.fairness().empty()
               ? P
               : pltl::f_implies(pltl::fairness_formula(fts2), P);
  r.parts.resize(r.part_systems.size());
  parallel_for(r.part_systems.size(), worker_count(o.workers), [&](std::size_t k) {
    PartVerdict pv;
    pv.abstract_state = r.part_systems[k].abstract_state;
    for (const auto& c : fts2.fairness()) pv.fairness.push_back(c.name);
    pv.verdict = verify_global(r.part_systems[k].ts, f, fo);
    pv.verdict.stats.mode = to_string(FairnessMode::kFormula);
    r.parts[k] = std::move(pv);
  });
  for (const auto& pv : r.parts) r.all_parts_hold = r.all_parts_hold && pv.verdict.holds;
  r.paradox = !r.global.holds && r.all_parts_hold;
  return r;
}

// ---------------------------------------------------------------- oracle

enum class LassoShape {
  kSimple,  // simple prefix, elementary cycle
  kWalk     // any prefix and cycle
};

// Calls visit on every lasso with |prefix| + |cycle| <= bound. Stops early
// when visit returns false. Throws BudgetExceeded past `budget` lassos.
inline void enumerate_lassos(const TransitionSystem& ts, std::size_t bound,
                             LassoShape shape,
                             const std::function<bool(const Lasso&)>& visit,
                             std::size_t budget = 50000000) {
  std::vector<StateId> path;
  std::vector<ActionId> acts;
  std::vector<int> on_path(ts.state_count(), 0);
  std::size_t count = 0;
  bool stop = false;
  std::function<void()> grow = [&]() {
    auto v = path.back();
    for (auto id : ts.out(v)) {
      if (stop) return;
      const auto& t = ts.transition(id);
      // Close the lasso at every earlier occurrence of the target.
      for (std::size_t k = 0; k < path.size(); ++k) {
        if (path[k] != t.target) continue;
        if (++count > budget) {
          throw BudgetExceeded("more than " + std::to_string(budget) +
                               " lassos within bound " + std::to_string(bound));
        }
        Lasso l;
        for (std::size_t i = 0; i < k; ++i) l.prefix.push_back({path[i], acts[i]});
        for (std::size_t i = k; i + 1 < path.size(); ++i) {
          l.cycle.push_back({path[i], acts[i]});
        }
        l.cycle.push_back({v, t.action});
        if (!visit(l)) {
          stop = true;
          return;
        }
      }
      if (path.size() >= bound) continue;
      if (shape == LassoShape::kSimple && on_path[t.target]) continue;
      path.push_back(t.target);
      acts.push_back(t.action);
      ++on_path[t.target];
      grow();
      --on_path[t.target];
      path.pop_back();
      acts.pop_back();
    }
  };
  for (auto s : ts.initial()) {
    if (stop) return;
    path = {s};
    acts.clear();
    on_path.assign(ts.state_count(), 0);
    on_path[s] = 1;
    acts.reserve(bound);
    grow();
  }
}

// Brute force: P holds iff no enumerated lasso (computation, when fts is
// given) violates it.
inline Verdict oracle_check(const TransitionSystem& ts,
                            const FairTransitionSystem* fts,
                            const pltl::FormulaPtr& P, std::size_t bound,
                            LassoShape shape = LassoShape::kSimple) {
  auto t0 = std::chrono::steady_clock::now();
  pltl::validate_atoms(*P, ts.signature());
  Verdict v;
  v.stats.mode = "oracle";
  enumerate_lassos(ts, bound, shape, [&](const Lasso& l) {
    if (fts && !is_computation(*fts, l)) return true;
    if (pltl::eval_word(*P, pltl::word_of(ts, l))) return true;
    v.holds = false;
    v.counterexample = l;
    return false;
  });
  v.stats.millis = detail::since(t0);
  return v;
}

// ------------------------------------------------- fairness replacement

struct ReplacementCheck {
  bool equivalent = true;
  std::string reason;
  std::optional<Lasso> witness;
};

// Whether the lassos satisfying g are exactly the computations of fts.
inline ReplacementCheck validate_fairness_replacement(
    const FairTransitionSystem& fts, const pltl::FormulaPtr& g,
    const Options& o = {}) {
  ReplacementCheck r;
  Options ao = o;
  ao.mode = FairnessMode::kAlgorithmic;
  auto v = verify_under_fairness(fts, g, ao);
  if (!v.holds) {
    r.equivalent = false;
    r.reason = "a computation violates the formula";
    r.witness = v.counterexample;
    return r;
  }
  const auto& ts = fts.ts();
  buchi::TranslateOptions opt;
  opt.domains = domains_of(ts.signature());
  opt.abmod_normalize = false;
  auto b = buchi::ltl_to_buchi(g, opt);
  auto p = build_product(ts, b, o.max_product_states);
  for (std::size_t i = 0; i < fts.fairness().size(); ++i) {
    auto en = fts.enabled_mask(i);
    auto tk = fts.taken_mask(i);
    graph::EdgeMask keep(p.g.edges.size());
    for (std::uint32_t e = 0; e < keep.size(); ++e) keep[e] = !tk[p.transition[e]];
    auto scc = graph::tarjan(p.g, {}, keep);
    for (int c = 0; c < static_cast<int>(scc.members.size()); ++c) {
      if (!graph::nontrivial(p.g, scc, c, keep)) continue;
      const auto& m = scc.members[c];
      auto acc = std::find_if(m.begin(), m.end(), [&](auto n) { return p.accepting[n]; });
      auto src = std::find_if(m.begin(), m.end(), [&](auto n) { return en[p.state[n]]; });
      if (acc == m.end() || src == m.end()) continue;
      std::optional<std::vector<std::uint32_t>> stem;
      for (auto root : p.initial) {
        stem = graph::shortest_path(p.g, root, [&](auto n) { return n == *acc; });
        if (stem) break;
      }
      std::vector<std::uint32_t> through;
      auto to_src = graph::shortest_path(
          p.g, *acc, [&](auto n) { return n == *src; },
          [&] {
            graph::NodeMask in(p.g.node_count, false);
            for (auto n : m) in[n] = true;
            return in;
          }(),
          keep);
      auto loop = *to_src;
      auto back = graph::shortest_path(
          p.g, *src, [&](auto n) { return n == *acc; },
          [&] {
            graph::NodeMask in(p.g.node_count, false);
            for (auto n : m) in[n] = true;
            return in;
          }(),
          keep);
      loop.insert(loop.end(), back->begin(), back->end());
      if (loop.empty()) loop = graph::closed_walk(p.g, m, *acc, {}, keep);
      r.equivalent = false;
      r.reason = "a lasso satisfying the formula starves " + fts.fairness()[i].name;
      r.witness = lasso_of(ts, p, *stem, loop);
      return r;
    }
  }
  return r;
}

// ---------------------------------------------------------------- reports

inline io::Json to_json(const TransitionSystem& ts, const Verdict& v,
                        const std::vector<StateId>* names = nullptr) {
  io::Json j = {{"holds", v.holds},
                {"stats",
                 {{"mode", v.stats.mode},
                  {"automaton_states", v.stats.automaton_states},
                  {"product_states", v.stats.product_states},
                  {"product_edges", v.stats.product_edges},
                  {"fell_back", v.stats.fell_back}}}};
  if (v.counterexample) {
    j["counterexample"] = io::to_json(ts, *v.counterexample, names);
  }
  return j;
}

inline io::Json to_json(const refinement::Verdict& v) {
  io::Json clauses = io::Json::array();
  for (const auto& c : v.clauses) {
    clauses.push_back({{"clause", c.name}, {"pass", c.pass}, {"details", c.details}});
  }
  io::Json rho = io::Json::array();
  for (StateId s = 0; s < v.rho.related.size(); ++s) {
    if (v.rho.related[s]) rho.push_back({s, v.mu(s)});
  }
  io::Json t1 = io::Json::object();
  for (const auto& [s, ts] : v.witness.t1) t1[std::to_string(s)] = ts;
  return {{"pass", v.pass},
          {"clauses", clauses},
          {"rho", rho},
          {"sc2", v.witness.sc2},
          {"t1", t1}};
}

inline io::Json to_json(const PartitionedReport& r) {
  io::Json parts = io::Json::array();
  for (std::size_t k = 0; k < r.parts.size(); ++k) {
    auto j = to_json(r.part_systems[k].ts, r.parts[k].verdict, &r.part_systems[k].global);
    j["abstract_state"] = r.parts[k].abstract_state;
    j["fairness"] = r.parts[k].fairness;
    j["states"] = r.part_systems[k].global;
    parts.push_back(std::move(j));
  }
  return {{"aggregate", to_string(r.aggregate)},
          {"abmod", {{"in", r.abmod.in},
                     {"failed_clause", r.abmod.failed_clause},
                     {"reason", r.abmod.reason}}},
          {"precondition_met", r.precondition_met},
          {"refinement", to_json(r.refinement)},
          {"parts", parts},
          {"notes", r.notes}};
}

inline std::string describe(const TransitionSystem& ts, const Verdict& v,
                            const std::vector<StateId>* names = nullptr) {
  std::string o = v.holds ? "holds" : "fails";
  o += " [" + v.stats.mode + (v.stats.fell_back ? ", fallback" : "") +
       ", product " + std::to_string(v.stats.product_states) + " states]\n";
  if (v.counterexample) o += "  " + io::describe(ts, *v.counterexample, names) + "\n";
  return o;
}

inline std::string describe(const PartitionedReport& r) {
  std::string o;
  for (const auto& c : r.refinement.clauses) {
    o += "refinement clause " + c.name + ": " + (c.pass ? "pass" : "FAIL") + "\n";
    if (!c.pass) {
      for (const auto& d : c.details) o += "  " + d + "\n";
    }
  }
  if (r.aggregate == Aggregate::kRefused) return o + "verification refused\n";
  o += std::string("ABmod: ") + (r.abmod.in ? "IN" : "NOT-IN") +
       (r.abmod.in ? "" : " (" + r.abmod.reason + ")") + "\n";
  for (std::size_t k = 0; k < r.parts.size(); ++k) {
    const auto& pv = r.parts[k];
    std::string fs;
    for (const auto& f : pv.fairness) fs += (fs.empty() ? "" : ", ") + f;
    o += "part s" + std::to_string(pv.abstract_state) + " (" +
         std::to_string(r.part_systems[k].ts.state_count()) + " states; fairness {" +
         fs + "}): " +
         describe(r.part_systems[k].ts, pv.verdict, &r.part_systems[k].global);
  }
  for (const auto& n : r.notes) o += "note: " + n + "\n";
  o += "aggregate: " + to_string(r.aggregate) + "\n";
  return o;
}

}  // namespace fairpart::mc
