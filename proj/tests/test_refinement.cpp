#include <gtest/gtest.h>

#include <random>

#include "fairpart/fairpart.hpp"
#include "support/generators.hpp"
#include "support/models.hpp"
#include "support/scaled.hpp"

using namespace fairpart;

namespace {

std::vector<bool> reachable_by_bfs(const TransitionSystem& ts) {
  std::vector<bool> seen(ts.state_count(), false);
  std::vector<StateId> work(ts.initial().begin(), ts.initial().end());
  for (auto s : work) seen[s] = true;
  while (!work.empty()) {
    auto s = work.back();
    work.pop_back();
    for (const auto& t : ts.transitions()) {
      if (t.source == s && !seen[t.target]) {
        seen[t.target] = true;
        work.push_back(t.target);
      }
    }
  }
  return seen;
}

// Greatest fixpoint by repeated deletion.
std::vector<bool> naive_rho(const gen::RandomPair& p) {
  const auto& ts1 = p.fts1.ts();
  const auto& ts2 = p.fts2.ts();
  auto rel = reachable_by_bfs(ts2);
  auto visible = [&](const std::string& a) {
    for (const auto& b : ts1.actions()) {
      if (a == b) return true;
    }
    return false;
  };
  auto matched = [&](const Transition& t) {
    const auto& a = ts2.action_name(t.action);
    StateId u = p.mu(t.source), v = p.mu(t.target);
    if (!visible(a)) return u == v;
    for (const auto& t1 : ts1.transitions()) {
      if (t1.source == u && t1.target == v && ts1.action_name(t1.action) == a) return true;
    }
    return false;
  };
  for (bool changed = true; changed;) {
    changed = false;
    for (const auto& t : ts2.transitions()) {
      if (rel[t.source] && (!matched(t) || !rel[t.target])) {
        rel[t.source] = false;
        changed = true;
      }
    }
  }
  return rel;
}

// Is there a set of allowed edges, strongly connected, reachable and
// respecting the refined fairness, whose states satisfy `want`? Brute force
// over edge subsets.
template <class Want>
bool fair_edge_set_exists(const FairTransitionSystem& fts, const std::vector<bool>& allowed,
                          Want want) {
  const auto& ts = fts.ts();
  const auto& tr = ts.transitions();
  auto reach = reachable_by_bfs(ts);
  std::vector<std::size_t> cand;
  for (std::size_t i = 0; i < tr.size(); ++i) {
    if (allowed[i] && reach[tr[i].source]) cand.push_back(i);
  }
  EXPECT_LE(cand.size(), 20u);
  for (std::uint32_t m = 1; m < (1u << cand.size()); ++m) {
    std::vector<std::size_t> es;
    std::set<StateId> nodes;
    for (std::size_t k = 0; k < cand.size(); ++k) {
      if (m >> k & 1) {
        es.push_back(cand[k]);
        nodes.insert(tr[cand[k]].source);
        nodes.insert(tr[cand[k]].target);
      }
    }
    auto closes = [&](bool fwd) {
      std::set<StateId> seen{*nodes.begin()};
      for (bool grew = true; grew;) {
        grew = false;
        for (auto e : es) {
          auto a = fwd ? tr[e].source : tr[e].target;
          auto b = fwd ? tr[e].target : tr[e].source;
          if (seen.count(a) && !seen.count(b)) {
            seen.insert(b);
            grew = true;
          }
        }
      }
      return seen.size() == nodes.size();
    };
    if (!closes(true) || !closes(false)) continue;
    bool fair = true;
    for (const auto& c : fts.fairness()) {
      bool enabled = false, taken = false;
      for (auto t : c.transitions) {
        enabled = enabled || nodes.count(tr[t].source);
        taken = taken || std::find(es.begin(), es.end(), t) != es.end();
      }
      fair = fair && (!enabled || taken);
    }
    if (!fair) continue;
    for (auto s : nodes) {
      if (want(s)) return true;
    }
  }
  return false;
}

const refinement::ClauseResult& clause(const refinement::Verdict& v, const std::string& n) {
  auto c = v.clause(n);
  EXPECT_NE(c, nullptr) << n;
  return *c;
}

}  // namespace

TEST(Relation, MatchesNaiveFixpoint) {
  std::mt19937 rng(51);
  for (int trial = 0; trial < 1500; ++trial) {
    auto p = gen::random_pair(rng);
    auto rho = refinement::compute_rho(p.fts1, p.fts2, p.mu);
    auto want = naive_rho(p);
    for (StateId s = 0; s < want.size(); ++s) {
      EXPECT_EQ(rho.related[s], want[s]) << trial << " s" << s;
      EXPECT_EQ(rho.removed.count(s) == 1, reachable_by_bfs(p.fts2.ts())[s] && !want[s]);
    }
  }
}

TEST(Divergence, MatchesEdgeSubsetSearch) {
  std::mt19937 rng(52);
  int failing = 0;
  for (int trial = 0; trial < 600; ++trial) {
    auto p = gen::random_pair(rng);
    auto act1 = refinement::alphabet(p.fts1.ts());
    const auto& ts2 = p.fts2.ts();
    std::vector<bool> tau;
    for (const auto& t : ts2.transitions()) tau.push_back(!act1.count(ts2.action_name(t.action)));
    bool diverges = fair_edge_set_exists(p.fts2, tau, [](StateId) { return true; });
    auto c = refinement::check_tau_divergence(p.fts2, act1);
    EXPECT_EQ(c.pass, !diverges) << trial;
    failing += diverges;
  }
  EXPECT_GT(failing, 20);
}

TEST(FairnessPreservation, ClauseFourMatchesEdgeSubsetSearch) {
  std::mt19937 rng(53);
  int failing = 0, compared = 0;
  for (int trial = 0; trial < 600; ++trial) {
    auto p = gen::random_pair(rng);
    if (p.fts1.fairness().empty()) continue;
    ++compared;
    auto rho = refinement::compute_rho(p.fts1, p.fts2, p.mu);
    const auto& ts1 = p.fts1.ts();
    const auto& ts2 = p.fts2.ts();
    bool some = false;
    for (const auto& f1 : p.fts1.fairness()) {
      std::set<StateId> sources;
      for (auto a : f1.transitions) sources.insert(ts1.transition(a).source);
      // Edges that do not refine any transition of this abstract constraint.
      std::vector<bool> allowed;
      for (const auto& t : ts2.transitions()) {
        bool refines = false;
        for (auto a : f1.transitions) {
          const auto& t1 = ts1.transition(a);
          refines = refines || (ts2.action_name(t.action) == ts1.action_name(t1.action) &&
                                rho.related[t.source] && rho.related[t.target] &&
                                p.mu(t.source) == t1.source && p.mu(t.target) == t1.target);
        }
        allowed.push_back(!refines);
      }
      some = some || fair_edge_set_exists(p.fts2, allowed, [&](StateId s) {
               return rho.related[s] && sources.count(p.mu(s)) > 0;
             });
    }
    auto [c4, c5] = refinement::check_fairness_preservation(p.fts1, p.fts2, p.mu, rho);
    EXPECT_EQ(c4.pass, !some) << trial;
    failing += some;
  }
  EXPECT_GT(compared, 200);
  EXPECT_GT(failing, 20);
}

TEST(FairnessPreservation, ClauseFiveMatchesReachabilityDefinition) {
  std::mt19937 rng(54);
  int failing = 0;
  for (int trial = 0; trial < 1500; ++trial) {
    auto p = gen::random_pair(rng);
    auto rho = refinement::compute_rho(p.fts1, p.fts2, p.mu);
    const auto& ts1 = p.fts1.ts();
    const auto& ts2 = p.fts2.ts();
    const auto& tr = ts2.transitions();
    auto reaches = [&](StateId from, auto target) {
      std::set<StateId> seen{from};
      std::vector<StateId> work{from};
      while (!work.empty()) {
        auto v = work.back();
        work.pop_back();
        if (target(v)) return true;
        for (const auto& t : tr) {
          if (t.source == v && seen.insert(t.target).second) work.push_back(t.target);
        }
      }
      return false;
    };
    auto skip_state = [&](StateId v) {
      for (const auto& t : tr) {
        if (t.source == v && ts2.action_name(t.action) == kSkip) return true;
      }
      return false;
    };
    bool ok = true;
    for (const auto& f1 : p.fts1.fairness()) {
      for (auto a : f1.transitions) {
        const auto& t1 = ts1.transition(a);
        std::vector<Transition> refs;
        for (const auto& t : tr) {
          if (ts2.action_name(t.action) == ts1.action_name(t1.action) && rho.related[t.source] &&
              rho.related[t.target] && p.mu(t.source) == t1.source && p.mu(t.target) == t1.target) {
            refs.push_back(t);
          }
        }
        for (StateId s2 = 0; s2 < ts2.state_count(); ++s2) {
          if (!rho.related[s2] || p.mu(s2) != t1.source || ts2.in(s2).empty()) continue;
          bool to_ref = reaches(s2, [&](StateId v) {
            for (const auto& t : refs) {
              if (t.source == v) return true;
            }
            return false;
          });
          bool back = false;
          for (const auto& t : refs) {
            back = back || reaches(t.target, [&](StateId v) { return v == s2 || skip_state(v); });
          }
          ok = ok && to_ref && back;
        }
      }
    }
    auto [c4, c5] = refinement::check_fairness_preservation(p.fts1, p.fts2, p.mu, rho);
    EXPECT_EQ(c5.pass, ok) << trial;
    failing += !ok;
  }
  EXPECT_GT(failing, 20);
}

TEST(Protocol, RefinementHolds) {
  const auto& p = models::t1();
  auto v = refinement::check_refinement(p.fts1, p.fts2, p.inv);
  EXPECT_TRUE(v.pass);
  std::vector<std::string> names;
  for (const auto& c : v.clauses) {
    names.push_back(c.name);
    EXPECT_TRUE(c.pass) << c.name;
  }
  EXPECT_EQ(names, (std::vector<std::string>{"wellformed", "alphabet", "1", "2", "3", "4", "5",
                                             "initial"}));
  // Every reachable refined state is related; the two block/ack cycles are
  // reported with their fair exits.
  for (StateId s = 0; s < p.fts2.ts().state_count(); ++s) EXPECT_TRUE(v.rho.related[s]);
  EXPECT_EQ(clause(v, "2").details.size(), 2u);
  EXPECT_EQ(v.act1, (std::set<std::string>{"Cinsert", "Csends", "Eject", "Rsends"}));
}

TEST(Protocol, DroppingReaderBlockFairnessBreaksClauseTwo) {
  auto p = models::load_pair("teg1.mch", "mutants/teg1ref_noF22.ref");
  auto v = refinement::check_refinement(p.fts1, p.fts2, p.inv);
  EXPECT_FALSE(v.pass);
  const auto& c2 = clause(v, "2");
  ASSERT_FALSE(c2.pass);
  ASSERT_EQ(c2.details.size(), 1u);
  EXPECT_NE(c2.details[0].find("Rblocksends"), std::string::npos);
  EXPECT_NE(c2.details[0].find("Cacksends"), std::string::npos);
  EXPECT_EQ(c2.details[0].find("Csends"), std::string::npos);
  // The same cycle also starves Eject.
  EXPECT_FALSE(clause(v, "4").pass);
  for (const char* ok : {"wellformed", "alphabet", "1", "3", "5", "initial"}) {
    EXPECT_TRUE(clause(v, ok).pass) << ok;
  }
}

TEST(Protocol, DroppingEjectFairnessBreaksClauseFour) {
  auto p = models::load_pair("teg1.mch", "mutants/teg1ref_noEject.ref");
  auto v = refinement::check_refinement(p.fts1, p.fts2, p.inv);
  EXPECT_FALSE(v.pass);
  EXPECT_TRUE(clause(v, "2").pass);
  EXPECT_FALSE(clause(v, "4").pass);
  EXPECT_NE(clause(v, "4").details[0].find("Eject"), std::string::npos);
}

TEST(Protocol, EjectOnlyFairnessDivergesInBothDirections) {
  auto p = models::load_pair("teg1.mch", "mutants/teg1ref_ejectonly.ref");
  auto v = refinement::check_refinement(p.fts1, p.fts2, p.inv);
  EXPECT_FALSE(v.pass);
  EXPECT_EQ(clause(v, "2").details.size(), 2u);
  EXPECT_FALSE(clause(v, "2").pass);
  EXPECT_FALSE(clause(v, "4").pass);
}

TEST(Didactic, RefinementHolds) {
  const auto& p = models::didactic();
  auto v = refinement::check_refinement(p.fts1, p.fts2, p.inv);
  for (const auto& c : v.clauses) EXPECT_TRUE(c.pass) << c.name;
  EXPECT_TRUE(v.pass);
}

TEST(Report, JsonListsEveryClause) {
  const auto& p = models::t1();
  auto v = refinement::check_refinement(p.fts1, p.fts2, p.inv);
  auto j = mc::to_json(v);
  EXPECT_TRUE(j.at("pass").get<bool>());
  EXPECT_EQ(j.at("clauses").size(), v.clauses.size());
  EXPECT_EQ(j.at("rho").size(), p.fts2.ts().state_count());
  for (const auto& c : j.at("clauses")) EXPECT_TRUE(c.at("pass").get<bool>());
}

TEST(Witness, SourcesOfAbstractFairnessAreCovered) {
  const auto& p = models::t1();
  auto v = refinement::check_refinement(p.fts1, p.fts2, p.inv);
  // Every related refined state whose image has an abstract fair exit.
  auto fair1 = p.fts1.any_fair_mask();
  const auto& ts1 = p.fts1.ts();
  std::vector<StateId> want;
  for (StateId s = 0; s < p.fts2.ts().state_count(); ++s) {
    bool has = false;
    for (TransitionId t = 0; t < ts1.transitions().size(); ++t) {
      has = has || (fair1[t] && ts1.transition(t).source == v.mu(s));
    }
    if (has && !p.fts2.ts().in(s).empty()) want.push_back(s);
  }
  EXPECT_EQ(v.witness.sc2, want);
}

TEST(Scaled, SlotChainsRefineAndGrowLinearly) {
  for (std::size_t n : {1u, 3u, 10u}) {
    auto p = scaled::pair(n);
    EXPECT_EQ(p.fts1.ts().state_count(), 4 * n);
    EXPECT_EQ(p.fts2.ts().state_count(), 14 * n);
    auto v = refinement::check_refinement(p.fts1, p.fts2, p.inv);
    EXPECT_TRUE(v.pass) << n;
    for (auto& cls : v.mu.classes) EXPECT_FALSE(cls.empty());
  }
}
