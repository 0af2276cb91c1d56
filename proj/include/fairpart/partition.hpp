#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "fairpart/core.hpp"
#include "fairpart/frontend.hpp"
#include "fairpart/graph.hpp"
#include "fairpart/io.hpp"

namespace fairpart::partition {

using frontend::GluingMap;

enum Provenance : std::uint8_t { kClass = 1, kFrontier = 2, kFairClosure = 4 };

inline std::string provenance_name(std::uint8_t p) {
  std::string o;
  if (p & kClass) o += "EC";
  if (p & kFrontier) o += o.empty() ? "Y" : "+Y";
  if (p & kFairClosure) o += o.empty() ? "FS" : "+FS";
  return o;
}

inline constexpr TransitionId kAddedSkip = ~TransitionId{0};

// A sub-system over a subset of the global states. Local state i stands for
// global state global[i]; local transition j copies global transition
// origin[j], or is an added Skip loop (kAddedSkip).
struct Part {
  StateId abstract_state = 0;  // or block index for naive parts
  TransitionSystem ts;
  std::vector<StateId> global;
  std::vector<std::uint8_t> provenance;
  std::vector<TransitionId> origin;

  std::optional<StateId> local(StateId g) const {
    auto it = std::lower_bound(global.begin(), global.end(), g);
    if (it == global.end() || *it != g) return std::nullopt;
    return static_cast<StateId>(it - global.begin());
  }
};

namespace detail {

// Builds the part over `states` (sorted global ids) keeping the listed global
// transitions and adding Skip loops on local dead ends.
inline Part assemble(const TransitionSystem& g, StateId tag,
                     const std::vector<StateId>& states,
                     const std::vector<TransitionId>& keep,
                     const std::vector<StateId>& initial) {
  Part p;
  p.abstract_state = tag;
  p.global = states;
  std::vector<Valuation> labels;
  for (auto s : states) labels.push_back(g.label(s));
  auto actions = g.actions();
  std::vector<Transition> trans;
  std::vector<bool> has_out(states.size(), false);
  for (auto id : keep) {
    const auto& t = g.transition(id);
    auto a = *p.local(t.source), b = *p.local(t.target);
    trans.push_back({a, t.action, b});
    has_out[a] = true;
  }
  std::optional<ActionId> skip = g.find_action(kSkip);
  for (StateId s = 0; s < states.size(); ++s) {
    if (has_out[s]) continue;
    if (!skip) {
      skip = static_cast<ActionId>(actions.size());
      actions.push_back(kSkip);
    }
    trans.push_back({s, *skip, s});
  }
  std::vector<StateId> init;
  for (auto s : initial) init.push_back(*p.local(s));
  p.ts = TransitionSystem(g.signature(), std::move(labels), std::move(init),
                          std::move(actions), std::move(trans));
  p.origin.assign(p.ts.transitions().size(), kAddedSkip);
  for (auto id : keep) {
    const auto& t = g.transition(id);
    auto lid = p.ts.find_transition(
        {*p.local(t.source), t.action, *p.local(t.target)});
    p.origin[*lid] = id;
  }
  return p;
}

}  // namespace detail

// When kAbstractIncoming is chosen, a class member only counts as initial if
// it is globally initial or entered from outside the class by an abstract
// event; kAnyIncoming accepts any incoming transition.
enum class InitialRule { kAnyIncoming, kAbstractIncoming };

// One part per abstract state with a nonempty class: the class, its frontier
// Y, the states FS(Y) reached from Y by fair transitions, and Skip loops on
// part states left without successors.
inline std::vector<Part> refinement_parts(
    const FairTransitionSystem& fts2, const GluingMap& mu,
    const std::set<std::string>& abstract_actions = {},
    InitialRule rule = InitialRule::kAnyIncoming) {
  const auto& g = fts2.ts();
  auto fair = fts2.any_fair_mask();
  auto reach = reachable_states(g);
  std::vector<Part> parts;
  for (StateId a = 0; a < mu.classes.size(); ++a) {
    std::vector<StateId> ec;
    for (auto s : mu.classes[a]) {
      if (reach[s]) ec.push_back(s);
    }
    if (ec.empty()) continue;
    std::map<StateId, std::uint8_t> prov;
    for (auto s : ec) prov[s] |= kClass;
    std::vector<TransitionId> keep;
    std::vector<std::uint32_t> frontier;
    for (auto s : ec) {
      for (auto id : g.out(s)) {
        keep.push_back(id);
        auto t = g.transition(id).target;
        if (mu(t) != a) {
          prov[t] |= kFrontier;
          frontier.push_back(t);
        }
      }
    }
    // Fair closure from the frontier.
    std::vector<std::uint32_t> work = frontier;
    std::set<StateId> closure_seen(frontier.begin(), frontier.end());
    while (!work.empty()) {
      auto v = work.back();
      work.pop_back();
      for (auto id : g.out(v)) {
        if (!fair[id]) continue;
        auto t = g.transition(id).target;
        prov[t] |= kFairClosure;
        if (closure_seen.insert(t).second) work.push_back(t);
      }
    }
    // Fair transitions from Y and FS(Y) into FS(Y).
    for (const auto& [s, p] : prov) {
      if (!(p & (kFrontier | kFairClosure)) || mu(s) == a) continue;
      for (auto id : g.out(s)) {
        auto t = g.transition(id).target;
        if (fair[id] && (prov[t] & kFairClosure)) keep.push_back(id);
      }
    }
    std::sort(keep.begin(), keep.end());
    keep.erase(std::unique(keep.begin(), keep.end()), keep.end());
    std::vector<StateId> init;
    for (auto s : ec) {
      bool entered = g.is_initial(s);
      for (auto id : g.in(s)) {
        const auto& t = g.transition(id);
        if (mu(t.source) == a || !reach[t.source]) continue;
        if (rule == InitialRule::kAbstractIncoming &&
            !abstract_actions.count(g.action_name(t.action))) {
          continue;
        }
        entered = true;
      }
      if (entered) init.push_back(s);
    }
    std::vector<StateId> states;
    for (const auto& [s, p] : prov) states.push_back(s);
    if (init.empty()) {
      throw InvalidInput("part of abstract state s" + std::to_string(a) +
                         " has no initial state");
    }
    auto part = detail::assemble(g, a, states, keep, init);
    for (auto s : states) part.provenance.push_back(prov[s]);
    parts.push_back(std::move(part));
  }
  return parts;
}

// Parts from an arbitrary transition partition: block[t] names the block of
// global transition t.
inline std::vector<Part> naive_parts(const TransitionSystem& g,
                                     const std::vector<std::uint32_t>& block) {
  if (block.size() != g.transitions().size()) {
    throw InvalidInput("block assignment covers " +
                       std::to_string(block.size()) + " of " +
                       std::to_string(g.transitions().size()) +
                       " transitions");
  }
  std::map<std::uint32_t, std::vector<TransitionId>> blocks;
  for (TransitionId id = 0; id < block.size(); ++id) {
    blocks[block[id]].push_back(id);
  }
  std::vector<Part> parts;
  for (const auto& [b, ids] : blocks) {
    std::set<StateId> states;
    std::set<TransitionId> mine(ids.begin(), ids.end());
    for (auto id : ids) {
      states.insert(g.transition(id).source);
      states.insert(g.transition(id).target);
    }
    std::vector<StateId> init;
    for (auto s : states) {
      bool entered = g.is_initial(s);
      for (auto id : g.in(s)) entered = entered || !mine.count(id);
      if (entered) init.push_back(s);
    }
    auto part = detail::assemble(g, b, {states.begin(), states.end()}, ids,
                                 init);
    part.provenance.assign(states.size(), 0);
    parts.push_back(std::move(part));
  }
  return parts;
}

// The refined fairness constraints restricted to the transitions of a part.
// Constraints with nothing left are dropped; `which` selects a subset.
inline FairTransitionSystem part_fts(
    const Part& p, const FairTransitionSystem& fts2,
    std::optional<std::vector<std::size_t>> which = std::nullopt) {
  std::vector<std::size_t> idx;
  if (which) {
    idx = *which;
  } else {
    for (std::size_t i = 0; i < fts2.fairness().size(); ++i) idx.push_back(i);
  }
  std::vector<FairnessConstraint> out;
  for (auto i : idx) {
    const auto& f = fts2.fairness()[i];
    FairnessConstraint c{f.name, {}};
    for (TransitionId j = 0; j < p.origin.size(); ++j) {
      if (p.origin[j] != kAddedSkip &&
          std::binary_search(f.transitions.begin(), f.transitions.end(),
                             p.origin[j])) {
        c.transitions.push_back(j);
      }
    }
    if (!c.transitions.empty()) out.push_back(std::move(c));
  }
  return FairTransitionSystem(p.ts, std::move(out));
}

// Block assignment read from a document of the form
//   {"format": "fairpart/blocks-1", "default": 0,
//    "assign": [{"block": 1, "source": {"x": "v", ...}, "action": "a",
//                "target": {...}}, ...]}
// Transitions not listed get the default block. States are named by their
// full valuation.
inline std::vector<std::uint32_t> blocks_from_json(const TransitionSystem& g,
                                                   const io::Json& j) {
  if (j.value("format", "") != "fairpart/blocks-1") {
    throw InvalidInput("expected a fairpart/blocks-1 document");
  }
  std::vector<std::uint32_t> block(g.transitions().size(),
                                   j.value("default", 0u));
  auto state = [&](const io::Json& v) {
    const auto& sig = g.signature();
    Valuation val(sig.size());
    if (v.size() != sig.size()) {
      throw InvalidInput("state " + v.dump() + " does not give every variable");
    }
    for (std::size_t i = 0; i < sig.size(); ++i) {
      if (!v.contains(sig[i].name)) {
        throw InvalidInput("state " + v.dump() + " lacks " + sig[i].name);
      }
      auto idx = sig.value_index(i, v.at(sig[i].name).get<std::string>());
      if (!idx) throw InvalidInput("bad value in state " + v.dump());
      val[i] = static_cast<std::uint16_t>(*idx);
    }
    auto s = g.find_state(val);
    if (!s) throw InvalidInput("no state " + v.dump());
    return *s;
  };
  for (const auto& row : j.at("assign")) {
    auto a = g.find_action(row.at("action").get<std::string>());
    if (!a) throw InvalidInput("unknown action in " + row.dump());
    auto t = g.find_transition({state(row.at("source")), *a, state(row.at("target"))});
    if (!t) throw InvalidInput("no transition " + row.dump());
    block[*t] = row.at("block").get<std::uint32_t>();
  }
  return block;
}

inline io::Json to_json(const Part& p) {
  io::Json j = io::to_json(p.ts);
  j["format"] = "fairpart/part-1";
  io::Json prov = io::Json::array();
  for (auto x : p.provenance) prov.push_back(provenance_name(x));
  j["part"] = {{"abstract_state", p.abstract_state},
               {"global_states", p.global},
               {"provenance", prov}};
  return j;
}

// Splits a lasso of the global system at the steps that change class (the
// abstract events leaving a class) and checks that every fragment is a
// prefix of a computation of the part of its class. Returns a description of
// the first fragment that is not, or nothing.
inline std::optional<std::string> check_decomposition(
    const FairTransitionSystem& fts2, const GluingMap& mu,
    const std::vector<Part>& parts, const Lasso& l) {
  const auto& g = fts2.ts();
  check_lasso(g, l);
  std::map<StateId, const Part*> by_class;
  for (const auto& p : parts) by_class[p.abstract_state] = &p;
  // Unroll prefix plus two turns of the cycle.
  std::vector<Step> steps = l.prefix;
  for (int k = 0; k < 2; ++k) {
    steps.insert(steps.end(), l.cycle.begin(), l.cycle.end());
  }
  const std::size_t first_turn = l.prefix.size() + l.cycle.size();
  auto state_at = [&](std::size_t i) {
    return i < steps.size() ? steps[i].state : l.cycle[0].state;
  };
  bool cycle_changes = false;
  for (std::size_t i = 0; i < l.cycle.size(); ++i) {
    auto nxt = l.cycle[(i + 1) % l.cycle.size()].state;
    if (mu(l.cycle[i].state) != mu(nxt)) cycle_changes = true;
  }

  std::size_t start = 0;
  while (start < first_turn) {
    auto cls = mu(steps[start].state);
    auto it = by_class.find(cls);
    if (it == by_class.end()) {
      return "no part for the class of s" + std::to_string(steps[start].state);
    }
    const Part& part = *it->second;
    auto pf = part_fts(part, fts2);
    const auto& pts = part.ts;
    std::size_t end = start;
    while (end < steps.size() && mu(state_at(end + 1)) == cls) ++end;
    std::string where = "fragment at position " + std::to_string(start) +
                        " in part s" + std::to_string(cls);
    if (!pts.is_initial(*part.local(steps[start].state))) {
      return where + ": s" + std::to_string(steps[start].state) +
             " is not initial in the part";
    }
    Lasso pl;
    auto copy_step = [&](std::size_t i) -> bool {
      auto a = part.local(steps[i].state);
      auto b = part.local(state_at(i + 1));
      if (!a || !b ||
          !pts.find_transition({*a, steps[i].action, *b})) {
        return false;
      }
      pl.prefix.push_back({*a, steps[i].action});
      return true;
    };
    if (end == steps.size() && !cycle_changes) {
      // The lasso settles in this class: the tail from `start` must be a
      // computation of the part.
      std::size_t cycle_start = std::max(start, l.prefix.size());
      for (std::size_t i = start; i < cycle_start; ++i) {
        if (!copy_step(i)) return where + ": step leaves the part";
      }
      for (std::size_t i = cycle_start; i < cycle_start + l.cycle.size(); ++i) {
        auto a = part.local(steps[i].state);
        auto b = part.local(state_at(i + 1));
        if (!a || !b || !pts.find_transition({*a, steps[i].action, *b})) {
          return where + ": cycle leaves the part";
        }
        pl.cycle.push_back({*a, steps[i].action});
      }
      if (!is_computation(pf, pl)) {
        return where + ": tail is not a computation of the part";
      }
      return std::nullopt;
    }
    if (end == steps.size()) {
      return where + ": fragment does not end inside the unrolling";
    }
    // Finite fragment start..end, where step `end` crosses into another class.
    for (std::size_t i = start; i <= end; ++i) {
      if (!copy_step(i)) return where + ": step leaves the part";
    }
    // Extend inside the part to a computation.
    const auto& pg = pts.digraph();
    auto from = *part.local(state_at(end + 1));
    auto reqs = pf.requirements();
    auto reach = graph::reachable(pg, {from});
    auto comps = graph::fair_components(pg, reqs, reach);
    if (comps.empty()) {
      return where + ": no fair continuation inside the part";
    }
    std::vector<bool> in_comp(pts.state_count(), false);
    for (auto v : comps[0]) in_comp[v] = true;
    auto path = graph::shortest_path(
        pg, from, [&](std::uint32_t v) { return in_comp[v]; });
    StateId at = from;
    for (auto e : *path) {
      const auto& t = pts.transition(e);
      pl.prefix.push_back({t.source, t.action});
      at = t.target;
    }
    std::vector<std::uint32_t> through;
    for (const auto& r : reqs) {
      bool visits = false;
      for (auto v : comps[0]) visits = visits || r.enabled[v];
      if (!visits) continue;
      for (std::uint32_t e = 0; e < pg.edges.size(); ++e) {
        if (r.taken[e] && in_comp[pg.edges[e].src] && in_comp[pg.edges[e].dst]) {
          through.push_back(e);
          break;
        }
      }
    }
    for (auto e : graph::closed_walk(pg, comps[0], at, through)) {
      const auto& t = pts.transition(e);
      pl.cycle.push_back({t.source, t.action});
    }
    if (!is_computation(pf, pl)) {
      return where + ": extension is not a computation of the part";
    }
    start = end + 1;
  }
  return std::nullopt;
}

}  // namespace fairpart::partition
