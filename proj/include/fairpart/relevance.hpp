#pragma once

#include <algorithm>
#include <vector>

#include "fairpart/core.hpp"
#include "fairpart/graph.hpp"
#include "fairpart/partition.hpp"

namespace fairpart::pltl {

// Constraints that can be violated on the part: some reachable cycle of the
// part (Skip loops included) passes through a source state of the
// constraint without taking any of its transitions. For every other
// constraint each lasso of the part revisits a target, so its conjunct is
// true on the whole part and can be dropped. Part states carry global
// valuations, so valuation equality is identity of global states.
inline std::vector<std::size_t> simplify_fairness_for_part(
    const partition::Part& part, const FairTransitionSystem& fts2) {
  const auto& g = part.ts.digraph();
  auto reach = graph::reachable(g, part.ts.initial());
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < fts2.fairness().size(); ++i) {
    const auto& fi = fts2.fairness()[i].transitions;
    graph::EdgeMask keep(part.ts.transitions().size(), true);
    for (TransitionId j = 0; j < keep.size(); ++j) {
      auto o = part.origin[j];
      if (o != partition::kAddedSkip &&
          std::binary_search(fi.begin(), fi.end(), o)) {
        keep[j] = false;
      }
    }
    auto enabled = fts2.enabled_mask(i);
    auto scc = graph::tarjan(g, reach, keep);
    bool relevant = false;
    for (int c = 0; c < static_cast<int>(scc.members.size()) && !relevant; ++c) {
      if (!graph::nontrivial(g, scc, c, keep)) continue;
      for (auto v : scc.members[c]) {
        if (enabled[part.global[v]]) relevant = true;
      }
    }
    if (relevant) out.push_back(i);
  }
  return out;
}

}  // namespace fairpart::pltl
