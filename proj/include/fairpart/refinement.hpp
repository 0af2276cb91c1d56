#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "fairpart/core.hpp"
#include "fairpart/frontend.hpp"
#include "fairpart/graph.hpp"

namespace fairpart::refinement {

using frontend::GluingMap;

inline std::set<std::string> alphabet(const TransitionSystem& ts) {
  return {ts.actions().begin(), ts.actions().end()};
}

// The refinement relation: (s2, mu(s2)) for every related refined state.
struct Rho {
  std::vector<bool> related;               // per refined state
  std::map<StateId, std::string> removed;  // refined state -> reason
};

// Greatest relation inside mu closed under the step clauses: a visible
// refined step must be matched by an abstract step between the images, and
// an invisible step must stay inside the equivalence class. Both systems are
// expected to be Skip-complete.
inline Rho compute_rho(const FairTransitionSystem& fts1,
                       const FairTransitionSystem& fts2, const GluingMap& mu) {
  const auto& ts1 = fts1.ts();
  const auto& ts2 = fts2.ts();
  const auto act1 = alphabet(ts1);
  Rho r;
  r.related.assign(ts2.state_count(), false);
  auto reach = reachable_states(ts2);
  std::vector<std::uint32_t> bad;
  for (StateId s = 0; s < ts2.state_count(); ++s) {
    if (!reach[s]) continue;
    r.related[s] = true;
    for (auto id : ts2.out(s)) {
      const auto& t = ts2.transition(id);
      const auto& name = ts2.action_name(t.action);
      const StateId u = mu(s), v = mu(t.target);
      std::string why;
      if (act1.count(name)) {
        auto a1 = ts1.find_action(name);
        if (!ts1.find_transition({u, *a1, v})) {
          why = "clause 1: " + ts2.describe_transition(id) +
                " has no abstract counterpart s" + std::to_string(u) + " -" +
                name + "-> s" + std::to_string(v);
        }
      } else if (u != v) {
        why = "clause 3: new-event step " + ts2.describe_transition(id) +
              " leaves the class of abstract state s" + std::to_string(u);
      }
      if (!why.empty()) {
        if (!r.removed.count(s)) r.removed[s] = why;
        bad.push_back(s);
      }
    }
  }
  // Anything that can step into an unrelated state is unrelated too.
  auto back = graph::reachable(graph::reversed(ts2.digraph()), bad, {}, reach);
  for (StateId s = 0; s < ts2.state_count(); ++s) {
    if (!back[s] || !reach[s]) continue;
    r.related[s] = false;
    if (!r.removed.count(s)) {
      r.removed[s] = "steps towards a state outside the relation";
    }
  }
  return r;
}

struct ClauseResult {
  std::string name;
  bool pass = true;
  std::vector<std::string> details;
};

inline std::string describe_walk(const TransitionSystem& ts,
                                 const std::vector<TransitionId>& walk) {
  if (walk.empty()) return "";
  std::string o = "s" + std::to_string(ts.transition(walk[0]).source);
  for (auto t : walk) {
    o += " -" + ts.action_name(ts.transition(t).action) + "-> s" +
         std::to_string(ts.transition(t).target);
  }
  return o;
}

namespace detail {

// One closed walk per fair component, passing through a required edge for
// every constraint whose sources it visits.
inline std::vector<TransitionId> witness_walk(
    const graph::Digraph& g, const std::vector<std::uint32_t>& comp,
    const std::vector<graph::Requirement>& reqs, const graph::EdgeMask& edges) {
  std::vector<bool> in(g.node_count, false);
  for (auto v : comp) in[v] = true;
  std::vector<std::uint32_t> through;
  for (const auto& r : reqs) {
    bool visits = false;
    for (auto v : comp) visits = visits || r.enabled[v];
    if (!visits) continue;
    for (std::uint32_t e = 0; e < g.edges.size(); ++e) {
      if (r.taken[e] && (edges.empty() || edges[e]) && in[g.edges[e].src] &&
          in[g.edges[e].dst]) {
        through.push_back(e);
        break;
      }
    }
  }
  return graph::closed_walk(g, comp, comp[0], through, edges);
}

}  // namespace detail

// Clause 2: no computation of the refined system ends in new events only.
// Fails when a cycle of invisible steps can be taken forever while
// respecting every refined fairness constraint.
inline ClauseResult check_tau_divergence(const FairTransitionSystem& fts2,
                                         const std::set<std::string>& act1) {
  const auto& ts = fts2.ts();
  const auto& g = ts.digraph();
  ClauseResult r{"2", true, {}};
  graph::EdgeMask tau(ts.transitions().size(), false);
  for (TransitionId t = 0; t < tau.size(); ++t) {
    tau[t] = !act1.count(ts.action_name(ts.transition(t).action));
  }
  auto reach = reachable_states(ts);
  auto reqs = fts2.requirements();
  auto fair = fts2.any_fair_mask();
  for (const auto& comp : graph::fair_components(g, reqs, reach, tau)) {
    r.pass = false;
    r.details.push_back("divergent new-event cycle " +
                        describe_walk(ts, detail::witness_walk(g, comp, reqs, tau)) +
                        " has no fairness-enforced exit");
  }
  if (r.pass) {
    auto scc = graph::tarjan(g, reach, tau);
    for (int c = 0; c < static_cast<int>(scc.members.size()); ++c) {
      if (!graph::nontrivial(g, scc, c, tau)) continue;
      std::string states, exits;
      for (auto v : scc.members[c]) {
        states += (states.empty() ? "" : ", ") + ("s" + std::to_string(v));
        for (auto e : ts.out(v)) {
          if (fair[e] && scc.component[ts.transition(e).target] != c) {
            exits += (exits.empty() ? "" : ", ") + ts.describe_transition(e);
          }
        }
      }
      r.details.push_back("new-event cycle through {" + states +
                          "} exits by fair " + exits);
    }
  }
  return r;
}

// T1: abstract fair transitions leaving mu(s2), for the states of S_c2.
struct FairnessWitness {
  std::vector<StateId> sc2;
  std::map<StateId, std::vector<TransitionId>> t1;
};

inline FairnessWitness fairness_witness(const FairTransitionSystem& fts1,
                                        const FairTransitionSystem& fts2,
                                        const GluingMap& mu, const Rho& rho) {
  const auto& ts1 = fts1.ts();
  const auto& ts2 = fts2.ts();
  auto fair1 = fts1.any_fair_mask();
  FairnessWitness w;
  for (StateId s = 0; s < ts2.state_count(); ++s) {
    if (!rho.related[s] || ts2.in(s).empty()) continue;
    std::vector<TransitionId> t1;
    for (auto id : ts1.out(mu(s))) {
      if (fair1[id]) t1.push_back(id);
    }
    if (t1.empty()) continue;
    w.sc2.push_back(s);
    w.t1[s] = std::move(t1);
  }
  return w;
}

// Clauses 4 and 5: abstract strong fairness survives refinement. Clause 4
// fails when some refined computation visits a state of S_c2 infinitely
// often while taking no refinement of the abstract constraint infinitely
// often. Clause 5 fails when a refinement of an abstract fair transition is
// not reachable from such a state (or cannot lead back to it).
inline std::pair<ClauseResult, ClauseResult> check_fairness_preservation(
    const FairTransitionSystem& fts1, const FairTransitionSystem& fts2,
    const GluingMap& mu, const Rho& rho) {
  const auto& ts1 = fts1.ts();
  const auto& ts2 = fts2.ts();
  const auto& g = ts2.digraph();
  ClauseResult c4{"4", true, {}}, c5{"5", true, {}};
  auto w = fairness_witness(fts1, fts2, mu, rho);
  auto reqs = fts2.requirements();
  auto reach = reachable_states(ts2);
  auto skip = ts2.find_action(kSkip);
  std::vector<std::uint32_t> skip_states;
  if (skip) {
    for (const auto& t : ts2.transitions()) {
      if (t.action == *skip) skip_states.push_back(t.source);
    }
  }
  // Refined transitions refining each abstract transition, in one pass.
  std::vector<std::vector<TransitionId>> refined_by(ts1.transitions().size());
  for (TransitionId id = 0; id < ts2.transitions().size(); ++id) {
    const auto& t = ts2.transition(id);
    if (!rho.related[t.source] || !rho.related[t.target]) continue;
    auto a1 = ts1.find_action(ts2.action_name(t.action));
    if (!a1) continue;
    if (auto t1 = ts1.find_transition({mu(t.source), *a1, mu(t.target)})) {
      refined_by[*t1].push_back(id);
    }
  }
  auto refining = [&](TransitionId a) -> const std::vector<TransitionId>& {
    return refined_by[a];
  };
  auto scc = graph::tarjan(g);
  std::map<StateId, std::vector<StateId>> sc2_of;
  for (auto s2 : w.sc2) sc2_of[mu(s2)].push_back(s2);

  for (std::size_t i = 0; i < fts1.fairness().size(); ++i) {
    const auto& f1 = fts1.fairness()[i];
    std::set<StateId> sources;
    graph::EdgeMask keep(ts2.transitions().size(), true);
    for (auto a : f1.transitions) {
      sources.insert(ts1.transition(a).source);
      for (auto id : refining(a)) keep[id] = false;
    }
    // Clause 4.
    std::vector<bool> flagged(ts2.state_count(), false);
    for (const auto& comp : graph::fair_components(g, reqs, reach, keep)) {
      std::vector<StateId> hit;
      for (auto v : comp) {
        if (w.t1.count(v) && sources.count(mu(v))) hit.push_back(v);
      }
      if (hit.empty()) continue;
      c4.pass = false;
      std::string hs;
      for (auto v : hit) hs += (hs.empty() ? "s" : ", s") + std::to_string(v);
      c4.details.push_back(
          f1.name + ": computation " +
          describe_walk(ts2, detail::witness_walk(g, comp, reqs, keep)) +
          " revisits {" + hs + "} without refining the constraint");
    }
    // Clause 5. A refinement inside the SCC of s2 settles both directions;
    // only the remaining states need the full reachability search.
    for (auto a : f1.transitions) {
      const auto& ref = refining(a);
      std::set<int> sccs;
      for (auto id : ref) {
        const auto& t = ts2.transition(id);
        if (scc.component[t.source] == scc.component[t.target]) {
          sccs.insert(scc.component[t.source]);
        }
      }
      std::vector<StateId> open;
      for (auto s2 : sc2_of[ts1.transition(a).source]) {
        if (!sccs.count(scc.component[s2])) open.push_back(s2);
      }
      if (open.empty()) continue;
      std::vector<std::uint32_t> us, vs;
      for (auto id : ref) {
        us.push_back(ts2.transition(id).source);
        vs.push_back(ts2.transition(id).target);
      }
      auto back = graph::reachable(graph::reversed(g), us);
      auto fwd = graph::reachable(g, vs);
      bool ends_in_skip = false;
      for (auto s : skip_states) ends_in_skip = ends_in_skip || fwd[s];
      for (auto s2 : open) {
        if (ref.empty() || !back[s2]) {
          c5.pass = false;
          c5.details.push_back(f1.name + ": no refinement of " +
                               ts1.describe_transition(a) +
                               " is reachable from s" + std::to_string(s2));
        } else if (!fwd[s2] && !ends_in_skip) {
          c5.pass = false;
          c5.details.push_back(f1.name + ": after refining " +
                               ts1.describe_transition(a) +
                               " the system cannot return to s" +
                               std::to_string(s2));
        }
      }
    }
  }
  return {c4, c5};
}

struct Verdict {
  bool pass = true;
  std::vector<ClauseResult> clauses;
  GluingMap mu;
  Rho rho;
  FairnessWitness witness;
  std::set<std::string> act1;

  const ClauseResult* clause(const std::string& name) const {
    for (const auto& c : clauses) {
      if (c.name == name) return &c;
    }
    return nullptr;
  }
};

// Full refinement check of fts2 against fts1 under the gluing invariant.
// Throws GluingError when the invariant does not define a total function.
inline Verdict check_refinement(const FairTransitionSystem& fts1_raw,
                                const FairTransitionSystem& fts2_raw,
                                const PropPtr& inv) {
  Verdict v;
  v.mu = frontend::derive_mu(fts1_raw, fts2_raw, inv);
  auto fts1 = skip_complete(fts1_raw);
  auto fts2 = skip_complete(fts2_raw);
  const auto& ts1 = fts1.ts();
  const auto& ts2 = fts2.ts();
  v.act1 = alphabet(ts1);

  ClauseResult wf{"wellformed", true, {}};
  for (auto [which, f] : {std::pair{"abstract", &fts1}, std::pair{"refined", &fts2}}) {
    auto val = validate_fairness(*f);
    for (const auto& x : val.violations) {
      wf.pass = false;
      wf.details.push_back(std::string(which) + " fairness clause (" +
                           x.clause + "): " + x.message);
    }
    for (const auto& x : val.warnings) {
      wf.details.push_back(std::string(which) + ": " + x);
    }
  }
  ClauseResult alpha{"alphabet", true, {}};
  for (const auto& a : ts1.actions()) {
    if (a != kSkip && !ts2.find_action(a)) {
      alpha.pass = false;
      alpha.details.push_back("abstract event " + a +
                              " has no refined counterpart");
    }
  }

  v.rho = compute_rho(fts1, fts2, v.mu);
  ClauseResult c1{"1", true, {}}, c3{"3", true, {}}, init{"initial", true, {}};
  for (const auto& [s, why] : v.rho.removed) {
    if (why.rfind("clause 1", 0) == 0) {
      c1.pass = false;
      c1.details.push_back(why);
    } else if (why.rfind("clause 3", 0) == 0) {
      c3.pass = false;
      c3.details.push_back(why);
    }
  }
  for (auto s : ts2.initial()) {
    if (!v.rho.related[s] || !ts1.is_initial(v.mu(s))) {
      init.pass = false;
      init.details.push_back("initial refined state s" + std::to_string(s) +
                             " is not related to an initial abstract state");
    }
  }
  auto c2 = check_tau_divergence(fts2, v.act1);
  auto [c4, c5] = check_fairness_preservation(fts1, fts2, v.mu, v.rho);
  v.witness = fairness_witness(fts1, fts2, v.mu, v.rho);
  v.clauses = {wf, alpha, c1, c2, c3, c4, c5, init};
  for (const auto& c : v.clauses) v.pass = v.pass && c.pass;
  return v;
}

}  // namespace fairpart::refinement
