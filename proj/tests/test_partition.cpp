#include <gtest/gtest.h>

#include <random>

#include "fairpart/fairpart.hpp"
#include "support/generators.hpp"
#include "support/models.hpp"
#include "support/semantics.hpp"

using namespace fairpart;
using partition::Part;

namespace {

struct Expected {
  std::set<StateId> ec, y, fs, initial;
  std::set<TransitionId> kept;
};

// Parts straight from the definitions: the reachable class, its frontier,
// everything reached from the frontier by fair transitions, the class's
// outgoing transitions and the fair transitions between frontier/closure
// states.
std::map<StateId, Expected> expected_parts(const FairTransitionSystem& fts,
                                           const frontend::GluingMap& mu,
                                           const std::set<std::string>* abstract_only) {
  const auto& ts = fts.ts();
  const auto& tr = ts.transitions();
  std::set<TransitionId> fair;
  for (const auto& c : fts.fairness()) fair.insert(c.transitions.begin(), c.transitions.end());
  std::vector<bool> reach(ts.state_count(), false);
  for (auto s : ts.initial()) reach[s] = true;
  for (bool grew = true; grew;) {
    grew = false;
    for (const auto& t : tr) {
      if (reach[t.source] && !reach[t.target]) reach[t.target] = grew = true;
    }
  }
  std::map<StateId, Expected> out;
  for (StateId s = 0; s < ts.state_count(); ++s) {
    if (reach[s]) out[mu(s)].ec.insert(s);
  }
  for (auto& [a, e] : out) {
    for (TransitionId i = 0; i < tr.size(); ++i) {
      if (!e.ec.count(tr[i].source)) continue;
      e.kept.insert(i);
      if (mu(tr[i].target) != a) e.y.insert(tr[i].target);
    }
    for (bool grew = true; grew;) {
      grew = false;
      for (TransitionId i = 0; i < tr.size(); ++i) {
        if (fair.count(i) && (e.y.count(tr[i].source) || e.fs.count(tr[i].source)) &&
            e.fs.insert(tr[i].target).second) {
          grew = true;
        }
      }
    }
    for (TransitionId i = 0; i < tr.size(); ++i) {
      auto s = tr[i].source;
      if (fair.count(i) && mu(s) != a && (e.y.count(s) || e.fs.count(s)) &&
          e.fs.count(tr[i].target)) {
        e.kept.insert(i);
      }
    }
    for (auto s : e.ec) {
      bool entered = ts.is_initial(s);
      for (const auto& t : tr) {
        if (t.target == s && reach[t.source] && mu(t.source) != a &&
            (!abstract_only || abstract_only->count(ts.action_name(t.action)))) {
          entered = true;
        }
      }
      if (entered) e.initial.insert(s);
    }
  }
  return out;
}

void expect_part_matches(const Part& p, const Expected& e, const TransitionSystem& g) {
  std::set<StateId> all = e.ec;
  all.insert(e.y.begin(), e.y.end());
  all.insert(e.fs.begin(), e.fs.end());
  EXPECT_EQ(std::set<StateId>(p.global.begin(), p.global.end()), all);
  ASSERT_EQ(p.provenance.size(), p.global.size());
  for (std::size_t i = 0; i < p.global.size(); ++i) {
    auto s = p.global[i];
    EXPECT_EQ(bool(p.provenance[i] & partition::kClass), e.ec.count(s) == 1);
    EXPECT_EQ(bool(p.provenance[i] & partition::kFrontier), e.y.count(s) == 1);
    EXPECT_EQ(bool(p.provenance[i] & partition::kFairClosure), e.fs.count(s) == 1);
  }
  std::set<TransitionId> kept;
  std::set<StateId> has_out;
  for (TransitionId j = 0; j < p.origin.size(); ++j) {
    const auto& lt = p.ts.transition(j);
    if (p.origin[j] == partition::kAddedSkip) {
      EXPECT_EQ(lt.source, lt.target);
      EXPECT_EQ(p.ts.action_name(lt.action), kSkip);
      continue;
    }
    kept.insert(p.origin[j]);
    has_out.insert(p.global[lt.source]);
    const auto& gt = g.transition(p.origin[j]);
    EXPECT_EQ(p.global[lt.source], gt.source);
    EXPECT_EQ(p.global[lt.target], gt.target);
    EXPECT_EQ(p.ts.action_name(lt.action), g.action_name(gt.action));
  }
  EXPECT_EQ(kept, e.kept);
  // Exactly the dead ends get a Skip loop.
  std::size_t loops = p.origin.size() - kept.size();
  EXPECT_EQ(loops, all.size() - has_out.size());
  std::set<StateId> init;
  for (auto s : p.ts.initial()) init.insert(p.global[s]);
  EXPECT_EQ(init, e.initial);
  for (StateId s = 0; s < p.ts.state_count(); ++s) EXPECT_EQ(p.ts.label(s), g.label(p.global[s]));
}

struct Protocol {
  refinement::Verdict v;
  FairTransitionSystem f2;
  std::vector<Part> parts;
};

const Protocol& protocol() {
  static const Protocol p = [] {
    const auto& m = models::t1();
    Protocol r;
    r.v = refinement::check_refinement(m.fts1, m.fts2, m.inv);
    r.f2 = skip_complete(m.fts2);
    r.parts = partition::refinement_parts(r.f2, r.v.mu, r.v.act1);
    return r;
  }();
  return p;
}

using Names = std::vector<std::string>;

// Protocol states written sender/status/card frame/reader frame.
std::set<StateId> states(const TransitionSystem& ts, const Names& names) {
  std::set<StateId> out;
  for (const auto& n : names) {
    std::vector<std::string> f;
    std::stringstream in(n);
    for (std::string x; std::getline(in, x, '/');) f.push_back(x);
    out.insert(models::state(ts, {{"SenderF2", f[0]}, {"Cstatus2", f[1]},
                                  {"CardF2", f[2]}, {"ReaderF2", f[3]}}));
  }
  return out;
}

std::set<StateId> with(const Part& p, std::uint8_t bit) {
  std::set<StateId> out;
  for (std::size_t i = 0; i < p.global.size(); ++i) {
    if (p.provenance[i] & bit) out.insert(p.global[i]);
  }
  return out;
}

// Lassos whose stem and cycle visit pairwise distinct states.
template <class Visit>
void each_simple_lasso(const TransitionSystem& ts, std::size_t bound, Visit visit) {
  std::vector<StateId> path;
  std::vector<ActionId> acts;
  std::function<void()> go = [&] {
    auto v = path.back();
    for (auto id : ts.out(v)) {
      const auto& t = ts.transition(id);
      auto hit = std::find(path.begin(), path.end(), t.target);
      if (hit != path.end()) {
        Lasso l;
        std::size_t k = hit - path.begin();
        for (std::size_t i = 0; i < path.size(); ++i) {
          ActionId a = i + 1 < path.size() ? acts[i] : t.action;
          (i < k ? l.prefix : l.cycle).push_back({path[i], a});
        }
        visit(l);
      } else if (path.size() < bound) {
        path.push_back(t.target);
        acts.push_back(t.action);
        go();
        path.pop_back();
        acts.pop_back();
      }
    }
  };
  for (auto s : ts.initial()) {
    path = {s};
    go();
  }
}

}  // namespace

TEST(Parts, ProtocolPartsMatchDefinitions) {
  const auto& p = protocol();
  auto want = expected_parts(p.f2, p.v.mu, nullptr);
  ASSERT_EQ(p.parts.size(), 4u);
  ASSERT_EQ(want.size(), 4u);
  for (const auto& part : p.parts) {
    SCOPED_TRACE(part.abstract_state);
    expect_part_matches(part, want.at(part.abstract_state), p.f2.ts());
  }
}

TEST(Parts, ProtocolPartsByHand) {
  const auto& p = protocol();
  const auto& ts = p.f2.ts();
  const auto& ts1 = models::t1().fts1.ts();
  std::map<std::string, std::array<Names, 4>> hand = {
      {"Sender1=reader, Cstatus1=in",
       {Names{"reader/in/lb/lb", "card/in/lb/bl", "reader/in/ackb/bl", "card/in/ackb/bl",
              "reader/in/lb/ackb"},
        Names{"card/in/lb/lb", "reader/out/lb/lb", "card/in/ackb/lb", "reader/out/lb/ackb"},
        Names{"card/out/lb/lb", "card/out/ackb/lb"},
        Names{"reader/in/lb/lb", "reader/in/lb/ackb"}}},
      {"Sender1=card, Cstatus1=in",
       {Names{"card/in/lb/lb", "reader/in/bl/lb", "card/in/bl/ackb", "card/in/ackb/lb",
              "reader/in/bl/ackb"},
        Names{"reader/in/lb/lb", "card/out/lb/lb", "reader/in/lb/ackb", "card/out/ackb/lb"},
        Names{"reader/out/lb/lb", "reader/out/lb/ackb"},
        Names{"card/in/lb/lb", "card/in/ackb/lb"}}},
      {"Sender1=reader, Cstatus1=out",
       {Names{"reader/out/lb/lb", "reader/out/lb/ackb"}, Names{"reader/in/lb/lb"},
        Names{"reader/out/lb/lb"}, Names{"reader/out/lb/lb", "reader/out/lb/ackb"}}},
      {"Sender1=card, Cstatus1=out",
       {Names{"card/out/lb/lb", "card/out/ackb/lb"}, Names{"reader/in/lb/lb"},
        Names{"reader/out/lb/lb"}, Names{"card/out/lb/lb", "card/out/ackb/lb"}}},
  };
  for (const auto& part : p.parts) {
    const auto& h = hand.at(ts1.describe(part.abstract_state));
    EXPECT_EQ(with(part, partition::kClass), states(ts, h[0]));
    EXPECT_EQ(with(part, partition::kFrontier), states(ts, h[1]));
    EXPECT_EQ(with(part, partition::kFairClosure), states(ts, h[2]));
    std::set<StateId> init;
    for (auto s : part.ts.initial()) init.insert(part.global[s]);
    EXPECT_EQ(init, states(ts, h[3]));
  }
}

TEST(Parts, DidacticClassOfS0) {
  const auto& m = models::didactic();
  auto v = refinement::check_refinement(m.fts1, m.fts2, m.inv);
  auto f2 = skip_complete(m.fts2);
  auto parts = partition::refinement_parts(f2, v.mu, v.act1);
  ASSERT_EQ(parts.size(), 3u);
  const auto& ts = f2.ts();
  auto r = [&](const char* n) { return models::state(ts, {{"pc2", n}}); };
  const Part* y0 = nullptr;
  for (const auto& p : parts) {
    if (m.fts1.ts().describe(p.abstract_state) == "pc1=s0") y0 = &p;
  }
  ASSERT_NE(y0, nullptr);
  EXPECT_EQ(std::set<StateId>(y0->global.begin(), y0->global.end()),
            (std::set<StateId>{r("r0"), r("r1"), r("r3"), r("r5")}));
  EXPECT_EQ(with(*y0, partition::kClass), (std::set<StateId>{r("r0"), r("r1")}));
  EXPECT_EQ(with(*y0, partition::kFrontier), (std::set<StateId>{r("r3")}));
  EXPECT_EQ(with(*y0, partition::kFairClosure), (std::set<StateId>{r("r5")}));
  ASSERT_EQ(y0->ts.initial().size(), 1u);
  EXPECT_EQ(y0->global[y0->ts.initial()[0]], r("r0"));
  // r5 keeps only an added Skip loop; r3 keeps only its fair exit.
  auto l5 = *y0->local(r("r5"));
  ASSERT_EQ(y0->ts.out(l5).size(), 1u);
  EXPECT_EQ(y0->origin[y0->ts.out(l5)[0]], partition::kAddedSkip);
  auto l3 = *y0->local(r("r3"));
  ASSERT_EQ(y0->ts.out(l3).size(), 1u);
  EXPECT_EQ(y0->ts.action_name(y0->ts.transition(y0->ts.out(l3)[0]).action), "c");
}

TEST(Parts, RandomSystemsMatchDefinitions) {
  std::mt19937 rng(61);
  for (int trial = 0; trial < 800; ++trial) {
    auto p = gen::random_pair(rng);
    auto parts = partition::refinement_parts(p.fts2, p.mu);
    auto want = expected_parts(p.fts2, p.mu, nullptr);
    ASSERT_EQ(parts.size(), want.size()) << trial;
    for (const auto& part : parts) {
      SCOPED_TRACE(trial);
      expect_part_matches(part, want.at(part.abstract_state), p.fts2.ts());
    }
  }
}

TEST(Parts, StrictInitialRuleCountsOnlyAbstractEvents) {
  std::mt19937 rng(62);
  int differ = 0, thrown = 0;
  for (int trial = 0; trial < 800; ++trial) {
    auto p = gen::random_pair(rng);
    auto act1 = refinement::alphabet(p.fts1.ts());
    auto want = expected_parts(p.fts2, p.mu, &act1);
    bool empty = false;
    for (const auto& [a, e] : want) empty = empty || e.initial.empty();
    if (empty) {
      EXPECT_THROW(partition::refinement_parts(p.fts2, p.mu, act1,
                                               partition::InitialRule::kAbstractIncoming),
                   InvalidInput);
      ++thrown;
      continue;
    }
    auto parts = partition::refinement_parts(p.fts2, p.mu, act1,
                                             partition::InitialRule::kAbstractIncoming);
    auto loose = expected_parts(p.fts2, p.mu, nullptr);
    for (const auto& part : parts) {
      SCOPED_TRACE(trial);
      expect_part_matches(part, want.at(part.abstract_state), p.fts2.ts());
      differ += loose.at(part.abstract_state).initial != want.at(part.abstract_state).initial;
    }
  }
  EXPECT_GT(differ, 10);
  EXPECT_GT(thrown, 10);
}

TEST(Parts, StrictInitialRuleIsIdleOnTheProtocol) {
  // New events never leave a class in a valid refinement.
  const auto& p = protocol();
  auto strict = partition::refinement_parts(p.f2, p.v.mu, p.v.act1,
                                            partition::InitialRule::kAbstractIncoming);
  ASSERT_EQ(strict.size(), p.parts.size());
  for (std::size_t i = 0; i < strict.size(); ++i) {
    EXPECT_EQ(strict[i].ts.initial(), p.parts[i].ts.initial());
  }
}

TEST(Decomposition, EveryProtocolComputationSplitsIntoPartComputations) {
  const auto& p = protocol();
  const auto& ts = p.f2.ts();
  std::map<StateId, const Part*> by_class;
  for (const auto& part : p.parts) by_class[part.abstract_state] = &part;
  std::size_t checked = 0;
  auto check = [&](const Lasso& l) {
    if (!ref::fair(p.f2, l)) return;
    ++checked;
    auto err = partition::check_decomposition(p.f2, p.v.mu, p.parts, l);
    EXPECT_FALSE(err) << *err;
    // Each maximal single-class stretch, with the step leaving it, lies in
    // the part of that class and starts at one of its initial states.
    std::size_t n = l.prefix.size() + 2 * l.cycle.size();
    auto step = [&](std::size_t i) {
      return i < l.prefix.size() ? l.prefix[i] : l.cycle[(i - l.prefix.size()) % l.cycle.size()];
    };
    std::size_t start = 0;
    for (std::size_t i = 0; i < n; ++i) {
      auto cls = p.v.mu(step(i).state);
      const Part& part = *by_class.at(cls);
      auto a = part.local(step(i).state);
      auto b = part.local(step(i + 1).state);
      ASSERT_TRUE(a && b);
      EXPECT_TRUE(part.ts.find_transition({*a, step(i).action, *b}));
      if (i == start) {
        EXPECT_TRUE(part.ts.is_initial(*a));
      }
      if (p.v.mu(step(i + 1).state) != cls) start = i + 1;
    }
  };
  each_simple_lasso(ts, 20, check);
  EXPECT_GE(checked, 5u);
  // Walks that repeat states before closing, up to 12 steps.
  ref::each_lasso(ts, 12, [&](const Lasso& l) {
    check(l);
    return true;
  });
  EXPECT_GT(checked, 200u);
}

TEST(Naive, BlocksFromDocument) {
  const auto& ts = protocol().f2.ts();
  auto block = partition::blocks_from_json(ts, io::parse_json(models::read("teg1ref_naive_blocks.json")));
  ASSERT_EQ(block.size(), ts.transitions().size());
  EXPECT_EQ(std::count(block.begin(), block.end(), 1u), 3);
  auto parts = partition::naive_parts(ts, block);
  ASSERT_EQ(parts.size(), 2u);
  // Every transition lands in exactly one part, and a part state is initial
  // when globally initial or entered from another block.
  std::size_t total = 0;
  for (const auto& part : parts) {
    for (auto o : part.origin) {
      if (o == partition::kAddedSkip) continue;
      ++total;
      EXPECT_EQ(block[o], part.abstract_state);
    }
    for (StateId s = 0; s < part.ts.state_count(); ++s) {
      auto g = part.global[s];
      bool entered = ts.is_initial(g);
      for (TransitionId t = 0; t < ts.transitions().size(); ++t) {
        entered = entered || (ts.transition(t).target == g && block[t] != part.abstract_state);
      }
      EXPECT_EQ(part.ts.is_initial(s), entered) << g;
    }
  }
  EXPECT_EQ(total, ts.transitions().size());
}

TEST(Naive, MalformedDocumentsAreRejected) {
  const auto& ts = protocol().f2.ts();
  EXPECT_THROW(partition::naive_parts(ts, {0, 1}), InvalidInput);
  EXPECT_THROW(partition::blocks_from_json(ts, io::parse_json(R"({"format": "x"})")),
               InvalidInput);
  auto bad_state = R"({"format": "fairpart/blocks-1", "assign": [{"block": 1,
      "source": {"SenderF2": "reader"}, "action": "Rsends", "target": {}}]})";
  EXPECT_THROW(partition::blocks_from_json(ts, io::parse_json(bad_state)), InvalidInput);
  auto bad_action = R"({"format": "fairpart/blocks-1", "assign": [{"block": 1,
      "source": {}, "action": "Nope", "target": {}}]})";
  EXPECT_THROW(partition::blocks_from_json(ts, io::parse_json(bad_action)), InvalidInput);
}

TEST(Parts, FairnessRestrictedToThePart) {
  const auto& p = protocol();
  for (const auto& part : p.parts) {
    auto pf = partition::part_fts(part, p.f2);
    for (const auto& c : pf.fairness()) {
      for (auto j : c.transitions) {
        auto o = part.origin[j];
        ASSERT_NE(o, partition::kAddedSkip);
        bool in_global = false;
        for (const auto& g : p.f2.fairness()) {
          if (g.name == c.name) {
            in_global = std::binary_search(g.transitions.begin(), g.transitions.end(), o);
          }
        }
        EXPECT_TRUE(in_global);
      }
    }
  }
}

TEST(Parts, JsonExport) {
  const auto& part = protocol().parts[0];
  auto j = partition::to_json(part);
  EXPECT_EQ(j.at("format"), "fairpart/part-1");
  EXPECT_EQ(j.at("part").at("global_states").size(), part.global.size());
  EXPECT_EQ(j.at("part").at("provenance")[0], partition::provenance_name(part.provenance[0]));
  EXPECT_EQ(partition::provenance_name(partition::kClass | partition::kFairClosure), "EC+FS");
}
