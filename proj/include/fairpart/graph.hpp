#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <functional>
#include <optional>
#include <utility>
#include <vector>

namespace fairpart::graph {

// Edge-indexed directed multigraph. Edge ids are positions in `edges`.
struct Digraph {
  struct Edge {
    std::uint32_t src;
    std::uint32_t dst;
  };

  std::size_t node_count = 0;
  std::vector<Edge> edges;
  std::vector<std::vector<std::uint32_t>> out;

  explicit Digraph(std::size_t n = 0) : node_count(n), out(n) {}

  std::uint32_t add_edge(std::uint32_t src, std::uint32_t dst) {
    auto id = static_cast<std::uint32_t>(edges.size());
    edges.push_back({src, dst});
    out[src].push_back(id);
    return id;
  }
};

using NodeMask = std::vector<bool>;
using EdgeMask = std::vector<bool>;

struct SccResult {
  std::vector<int> component;  // -1 for nodes outside the mask
  std::vector<std::vector<std::uint32_t>> members;
};

// Iterative Tarjan restricted to `nodes` and `edges` (empty mask = all).
inline SccResult tarjan(const Digraph& g, const NodeMask& nodes = {},
                        const EdgeMask& edges = {}) {
  const std::size_t n = g.node_count;
  auto node_ok = [&](std::uint32_t v) { return nodes.empty() || nodes[v]; };
  auto edge_ok = [&](std::uint32_t e) { return edges.empty() || edges[e]; };

  SccResult r;
  r.component.assign(n, -1);
  std::vector<int> index(n, -1), low(n, 0);
  std::vector<bool> on_stack(n, false);
  std::vector<std::uint32_t> stack;
  int counter = 0;
  struct Frame {
    std::uint32_t v;
    std::size_t next;
  };
  std::vector<Frame> call;

  for (std::uint32_t root = 0; root < n; ++root) {
    if (!node_ok(root) || index[root] >= 0) continue;
    call.push_back({root, 0});
    index[root] = low[root] = counter++;
    stack.push_back(root);
    on_stack[root] = true;
    while (!call.empty()) {
      Frame& f = call.back();
      const auto& adj = g.out[f.v];
      if (f.next < adj.size()) {
        std::uint32_t e = adj[f.next++];
        if (!edge_ok(e)) continue;
        std::uint32_t w = g.edges[e].dst;
        if (!node_ok(w)) continue;
        if (index[w] < 0) {
          index[w] = low[w] = counter++;
          stack.push_back(w);
          on_stack[w] = true;
          call.push_back({w, 0});
        } else if (on_stack[w]) {
          low[f.v] = std::min(low[f.v], index[w]);
        }
        continue;
      }
      std::uint32_t v = f.v;
      call.pop_back();
      if (!call.empty()) {
        low[call.back().v] = std::min(low[call.back().v], low[v]);
      }
      if (low[v] == index[v]) {
        int cid = static_cast<int>(r.members.size());
        r.members.emplace_back();
        std::uint32_t w;
        do {
          w = stack.back();
          stack.pop_back();
          on_stack[w] = false;
          r.component[w] = cid;
          r.members.back().push_back(w);
        } while (w != v);
        std::sort(r.members.back().begin(), r.members.back().end());
      }
    }
  }
  return r;
}

// True when the component carries at least one internal edge.
inline bool nontrivial(const Digraph& g, const SccResult& scc, int cid,
                       const EdgeMask& edges = {}) {
  const auto& m = scc.members[cid];
  if (m.size() > 1) return true;
  for (auto e : g.out[m[0]]) {
    if (!edges.empty() && !edges[e]) continue;
    if (g.edges[e].dst == m[0]) return true;
  }
  return false;
}

inline NodeMask reachable(const Digraph& g,
                          const std::vector<std::uint32_t>& from,
                          const EdgeMask& edges = {},
                          const NodeMask& nodes = {}) {
  NodeMask seen(g.node_count, false);
  std::deque<std::uint32_t> q;
  for (auto v : from) {
    if (!nodes.empty() && !nodes[v]) continue;
    if (!seen[v]) {
      seen[v] = true;
      q.push_back(v);
    }
  }
  while (!q.empty()) {
    auto v = q.front();
    q.pop_front();
    for (auto e : g.out[v]) {
      if (!edges.empty() && !edges[e]) continue;
      auto w = g.edges[e].dst;
      if (!nodes.empty() && !nodes[w]) continue;
      if (!seen[w]) {
        seen[w] = true;
        q.push_back(w);
      }
    }
  }
  return seen;
}

inline Digraph reversed(const Digraph& g) {
  Digraph r(g.node_count);
  for (const auto& e : g.edges) r.add_edge(e.dst, e.src);
  return r;
}

// Shortest edge path from `from` to any node satisfying `goal`, staying in
// `nodes`. An empty path is returned when `from` itself is a goal.
inline std::optional<std::vector<std::uint32_t>> shortest_path(
    const Digraph& g, std::uint32_t from,
    const std::function<bool(std::uint32_t)>& goal, const NodeMask& nodes = {},
    const EdgeMask& edges = {}) {
  if (goal(from)) return std::vector<std::uint32_t>{};
  std::vector<std::int64_t> via(g.node_count, -1);
  std::vector<bool> seen(g.node_count, false);
  std::deque<std::uint32_t> q{from};
  seen[from] = true;
  while (!q.empty()) {
    auto v = q.front();
    q.pop_front();
    for (auto e : g.out[v]) {
      if (!edges.empty() && !edges[e]) continue;
      auto w = g.edges[e].dst;
      if ((!nodes.empty() && !nodes[w]) || seen[w]) continue;
      seen[w] = true;
      via[w] = e;
      if (goal(w)) {
        std::vector<std::uint32_t> path;
        for (auto x = w; x != from; x = g.edges[via[x]].src) {
          path.push_back(static_cast<std::uint32_t>(via[x]));
        }
        std::reverse(path.begin(), path.end());
        return path;
      }
      q.push_back(w);
    }
  }
  return std::nullopt;
}

// A strong fairness requirement: whenever a cycle visits a node of `enabled`
// it must traverse an edge of `taken`.
struct Requirement {
  NodeMask enabled;
  EdgeMask taken;
};

// Maximal sub-components in which the full cycle meets every requirement.
// Each returned component is strongly connected and nontrivial.
inline std::vector<std::vector<std::uint32_t>> fair_components(
    const Digraph& g, const std::vector<Requirement>& reqs,
    const NodeMask& nodes = {}, const EdgeMask& edges = {}) {
  std::vector<std::vector<std::uint32_t>> good;
  NodeMask initial = nodes.empty() ? NodeMask(g.node_count, true) : nodes;
  std::vector<NodeMask> work{initial};
  while (!work.empty()) {
    NodeMask cur = std::move(work.back());
    work.pop_back();
    auto scc = tarjan(g, cur, edges);
    for (int c = 0; c < static_cast<int>(scc.members.size()); ++c) {
      if (!nontrivial(g, scc, c, edges)) continue;
      const auto& mem = scc.members[c];
      NodeMask in_c(g.node_count, false);
      for (auto v : mem) in_c[v] = true;
      NodeMask remove(g.node_count, false);
      bool bad = false;
      for (const auto& r : reqs) {
        bool visits = false;
        for (auto v : mem) visits = visits || r.enabled[v];
        if (!visits) continue;
        bool takes = false;
        for (auto v : mem) {
          for (auto e : g.out[v]) {
            if ((!edges.empty() && !edges[e]) || !r.taken[e]) continue;
            if (in_c[g.edges[e].dst]) takes = true;
          }
        }
        if (takes) continue;
        bad = true;
        for (auto v : mem) {
          if (r.enabled[v]) remove[v] = true;
        }
      }
      if (!bad) {
        good.push_back(mem);
        continue;
      }
      NodeMask next(g.node_count, false);
      bool any = false;
      for (auto v : mem) {
        if (!remove[v]) {
          next[v] = true;
          any = true;
        }
      }
      if (any) work.push_back(std::move(next));
    }
  }
  std::sort(good.begin(), good.end());
  return good;
}

// Closed walk inside `component` that starts at `start` and traverses every
// edge in `through` (all of which must lie inside the component).
inline std::vector<std::uint32_t> closed_walk(
    const Digraph& g, const std::vector<std::uint32_t>& component,
    std::uint32_t start, const std::vector<std::uint32_t>& through,
    const EdgeMask& edges = {}) {
  NodeMask in_c(g.node_count, false);
  for (auto v : component) in_c[v] = true;
  std::vector<std::uint32_t> walk;
  std::uint32_t at = start;
  auto go_to = [&](std::uint32_t target) {
    auto p = shortest_path(
        g, at, [&](std::uint32_t v) { return v == target; }, in_c, edges);
    walk.insert(walk.end(), p->begin(), p->end());
    at = target;
  };
  for (auto e : through) {
    go_to(g.edges[e].src);
    walk.push_back(e);
    at = g.edges[e].dst;
  }
  if (walk.empty() || at != start) {
    if (walk.empty()) {
      // Leave start once so the walk is a genuine cycle.
      for (auto e : g.out[start]) {
        if ((!edges.empty() && !edges[e]) || !in_c[g.edges[e].dst]) continue;
        walk.push_back(e);
        at = g.edges[e].dst;
        break;
      }
    }
    if (at != start) go_to(start);
  }
  return walk;
}

}  // namespace fairpart::graph
