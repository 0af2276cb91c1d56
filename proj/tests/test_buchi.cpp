#include <gtest/gtest.h>

#include <random>

#include "fairpart/fairpart.hpp"
#include "support/generators.hpp"
#include "support/semantics.hpp"

using namespace fairpart;
using namespace fairpart::pltl;
using fairpart::buchi::Automaton;

namespace {

Word random_word(std::mt19937& rng, const Signature& sig) {
  Word w;
  w.sig = &sig;
  auto letter = [&] {
    return Valuation{static_cast<std::uint16_t>(rng() % 2), static_cast<std::uint16_t>(rng() % 3)};
  };
  for (std::size_t i = 0, n = rng() % 4; i < n; ++i) w.prefix.push_back(letter());
  for (std::size_t i = 0, n = 1 + rng() % 4; i < n; ++i) w.cycle.push_back(letter());
  return w;
}

// Same word as a one-lasso system, so the reference evaluator can read it.
bool ref_holds(const Formula& f, const Word& w) {
  std::vector<std::string> pos;
  for (std::size_t i = 0; i < w.size(); ++i) pos.push_back(std::to_string(i));
  auto vars = w.sig->variables();
  vars.push_back({"pos", pos});
  std::vector<Valuation> labels;
  std::vector<Transition> trans;
  Lasso l;
  for (std::size_t i = 0; i < w.size(); ++i) {
    auto v = w.at(i);
    v.push_back(static_cast<std::uint16_t>(i));
    labels.push_back(v);
    trans.push_back({static_cast<StateId>(i), 0, static_cast<StateId>(w.next(i))});
    (i < w.prefix.size() ? l.prefix : l.cycle).push_back({static_cast<StateId>(i), 0});
  }
  TransitionSystem ts(Signature(vars), labels, {0}, {"a"}, trans);
  return ref::holds(f, ts, l);
}

buchi::TranslateOptions opts(bool normalize) {
  buchi::TranslateOptions o;
  o.domains = domains_of(gen::small_signature());
  o.abmod_normalize = normalize;
  return o;
}

bool in_abmod_negated(const std::string& p) {
  buchi::TranslateOptions o;
  return buchi::classify_abmod(buchi::ltl_to_buchi(f_not(parse(p)), o)).in;
}

// Eq. 3 read directly on runs: after the first step leaving q0 every later
// state is accepting. Runs of length 2|Q|+2 cover every configuration.
bool clause2_by_runs(const Automaton& b) {
  auto out = b.out();
  const std::size_t len = 2 * b.state_count + 2;
  std::function<bool(buchi::State, std::size_t, long)> go = [&](buchi::State q, std::size_t i,
                                                                 long left) -> bool {
    if (left >= 0 && static_cast<long>(i) > left && !b.accepting[q]) return false;
    if (i == len) return true;
    if (left < 0 && q != b.initial) left = static_cast<long>(i);
    for (auto e : out[q]) {
      if (!go(b.edges[e].dst, i + 1, left)) return false;
    }
    return true;
  };
  return go(b.initial, 0, -1);
}

}  // namespace

TEST(Translation, LanguageMatchesReferenceSemantics) {
  std::mt19937 rng(41);
  auto sig = gen::small_signature();
  for (int i = 0; i < 600; ++i) {
    auto f = gen::random_formula(rng, 3);
    auto b = buchi::ltl_to_buchi(f, opts(false));
    auto n = buchi::ltl_to_buchi(f, opts(true));
    for (int k = 0; k < 8; ++k) {
      auto w = random_word(rng, sig);
      bool truth = ref_holds(*f, w);
      EXPECT_EQ(buchi::accepts(b, w), truth) << to_string(*f);
      EXPECT_EQ(buchi::accepts(n, w), truth) << to_string(*f);
    }
  }
}

TEST(Translation, SimplificationPreservesLanguage) {
  std::mt19937 rng(42);
  auto sig = gen::small_signature();
  for (int i = 0; i < 300; ++i) {
    auto f = gen::random_formula(rng, 3);
    auto raw = buchi::detail::Tableau(f, opts(false)).run();
    auto simple = buchi::simplify(raw);
    EXPECT_LE(simple.state_count, raw.state_count);
    for (int k = 0; k < 8; ++k) {
      auto w = random_word(rng, sig);
      EXPECT_EQ(buchi::accepts(raw, w), buchi::accepts(simple, w)) << to_string(*f);
    }
  }
}

TEST(Translation, StateBudgetIsEnforced) {
  buchi::TranslateOptions o;
  o.max_states = 3;
  auto f = parse("[]<>a=1 && []<>b=1 && []<>c=1 && [](d=1 -> <>e=1)");
  EXPECT_THROW(buchi::ltl_to_buchi(f, o), BudgetExceeded);
}

TEST(Translation, DotExportMentionsEveryState) {
  auto b = buchi::ltl_to_buchi(parse("!([](p=a -> <>q=b))"));
  auto dot = buchi::to_dot(b);
  EXPECT_NE(dot.find("digraph"), std::string::npos);
  for (std::size_t q = 0; q < b.state_count; ++q) {
    EXPECT_NE(dot.find("q" + std::to_string(q)), std::string::npos);
  }
}

TEST(Abmod, ResponseAndSafetyShapesAreIn) {
  EXPECT_TRUE(in_abmod_negated("[](p=a -> X q=b)"));
  EXPECT_TRUE(in_abmod_negated("[](p=a -> <>q=b)"));
  EXPECT_TRUE(in_abmod_negated("[](p=a -> q=b U r=c)"));
  EXPECT_TRUE(in_abmod_negated("[](!p=a)"));
}

TEST(Abmod, LivenessUnderFairnessIsNotIn) {
  buchi::TranslateOptions o;
  auto b = buchi::ltl_to_buchi(
      f_not(parse("[]([]<>p=a -> <>q=b) -> [](r=c -> <>s=d)")), o);
  auto r = buchi::classify_abmod(b);
  EXPECT_FALSE(r.in);
  EXPECT_GE(r.failed_clause, 1);
  EXPECT_FALSE(r.reason.empty());
}

TEST(Abmod, EachClauseCanFail) {
  // q0 -(p)-> q1 (acc) -(true)-> q1 : no true loop on q0.
  Automaton a;
  a.state_count = 2;
  a.accepting = {false, true};
  a.add_edge(0, 1, p_eq("p", "a"));
  a.add_edge(1, 1, p_true());
  EXPECT_EQ(buchi::classify_abmod(a).failed_clause, 1);
  // q0 loop, q0 -> q1 -> q2 -> q3(acc) loop: two intermediate states.
  Automaton b;
  b.state_count = 4;
  b.accepting = {false, false, false, true};
  b.add_edge(0, 0, p_true());
  b.add_edge(0, 1, p_eq("p", "a"));
  b.add_edge(1, 2, p_true());
  b.add_edge(2, 3, p_true());
  b.add_edge(3, 3, p_true());
  EXPECT_EQ(buchi::classify_abmod(b).failed_clause, 2);
  // Guard into the accepting state implies nothing leaving it.
  Automaton c;
  c.state_count = 2;
  c.accepting = {false, true};
  c.add_edge(0, 0, p_true());
  c.add_edge(0, 1, p_eq("p", "a"));
  c.add_edge(1, 1, p_eq("p", "b"));
  EXPECT_EQ(buchi::classify_abmod(c).failed_clause, 3);
}

TEST(Abmod, TautologicalGuardCountsAsTrue) {
  Automaton a;
  a.state_count = 2;
  a.accepting = {false, true};
  a.add_edge(0, 0, p_or({p_eq("p", "a"), p_eq("p", "b")}));
  a.add_edge(0, 1, p_eq("p", "a"));
  a.add_edge(1, 1, p_true());
  EXPECT_FALSE(buchi::classify_abmod(a).in);
  EXPECT_TRUE(buchi::classify_abmod(a, {{"p", {"a", "b"}}}).in);
}

TEST(Abmod, StructuralClauseTwoMatchesRunDefinition) {
  std::mt19937 rng(43);
  int compared = 0;
  for (int trial = 0; trial < 4000; ++trial) {
    Automaton a;
    a.state_count = 1 + rng() % 6;
    for (std::size_t q = 0; q < a.state_count; ++q) a.accepting.push_back(rng() % 2);
    a.add_edge(0, 0, p_true());
    for (std::size_t i = 0, m = rng() % 10; i < m; ++i) {
      a.add_edge(rng() % a.state_count, rng() % a.state_count, p_true());
    }
    auto p = buchi::prune(a);
    auto r = buchi::classify_abmod(p);
    if (r.reason == "empty language") continue;
    ++compared;
    EXPECT_EQ(r.failed_clause != 2, clause2_by_runs(p)) << trial;
  }
  EXPECT_GT(compared, 1000);
}

TEST(Abmod, InvariantUnderRenamingAndUnreachableStates) {
  std::mt19937 rng(44);
  for (int i = 0; i < 200; ++i) {
    auto b = buchi::ltl_to_buchi(f_not(gen::random_formula(rng, 3)), opts(true));
    auto base = buchi::classify_abmod(b, opts(true).domains).in;
    // Reverse the state numbering and add an unreachable accepting state.
    Automaton r;
    r.state_count = b.state_count + 1;
    r.accepting.assign(r.state_count, false);
    auto ren = [&](buchi::State q) { return static_cast<buchi::State>(b.state_count - 1 - q); };
    for (std::size_t q = 0; q < b.state_count; ++q) r.accepting[ren(q)] = b.accepting[q];
    r.accepting[b.state_count] = true;
    r.initial = ren(b.initial);
    for (const auto& e : b.edges) r.add_edge(ren(e.src), ren(e.dst), e.guard);
    r.add_edge(b.state_count, b.state_count, p_true());
    EXPECT_EQ(buchi::classify_abmod(r, opts(true).domains).in, base);
  }
}

TEST(Abmod, MembersAreClosedUnderPrefixing) {
  // The true loop on q0 lets any letter be prepended to an accepted word.
  std::mt19937 rng(45);
  auto sig = gen::small_signature();
  for (int i = 0; i < 300; ++i) {
    auto P = gen::random_abmod_formula(
        rng, {f_atom("x", "0"), f_atom("x", "1"), f_atom("y", "0"), f_atom("y", "2")});
    auto b = buchi::ltl_to_buchi(f_not(P), opts(true));
    ASSERT_TRUE(buchi::classify_abmod(b, opts(true).domains).in) << to_string(*P);
    for (int k = 0; k < 5; ++k) {
      auto w = random_word(rng, sig);
      if (!buchi::accepts(b, w)) continue;
      auto longer = w;
      longer.prefix.insert(longer.prefix.begin(), Valuation{1, 1});
      EXPECT_TRUE(buchi::accepts(b, longer));
    }
  }
}
