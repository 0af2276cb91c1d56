#pragma once
// Loads the bundled machines under models/.

#include <fstream>
#include <sstream>
#include <string>

#include "fairpart/fairpart.hpp"

namespace models {

using namespace fairpart;

inline std::string path(const std::string& rel) {
  return std::string(FAIRPART_MODELS_DIR) + "/" + rel;
}

inline std::string read(const std::string& rel) {
  std::ifstream in(path(rel));
  if (!in) throw std::runtime_error("missing model " + rel);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

inline pltl::FormulaPtr property(const std::string& name) {
  return pltl::parse(read("properties/" + name + ".pltl"));
}

struct Pair {
  frontend::EventSystem es1, es2;
  FairTransitionSystem fts1, fts2;
  PropPtr inv;
};

inline Pair load_pair(const std::string& abstract, const std::string& refined) {
  Pair p;
  p.es1 = frontend::parse(read(abstract));
  p.es2 = frontend::parse(read(refined));
  p.fts1 = frontend::enumerate(p.es1).fts;
  p.fts2 = frontend::enumerate(p.es2, &p.es1).fts;
  p.inv = frontend::gluing_invariant(p.es2, p.es1);
  return p;
}

inline const Pair& t1() {
  static const Pair p = load_pair("teg1.mch", "teg1ref.ref");
  return p;
}

inline const Pair& didactic() {
  static const Pair p = load_pair("didactic.mch", "didactic_ref.ref");
  return p;
}

// Refined state with the given "var=value" assignments.
inline StateId state(const TransitionSystem& ts,
                     const std::vector<std::pair<std::string, std::string>>& kv) {
  Valuation v(ts.signature().size(), 0);
  std::vector<bool> set(v.size(), false);
  for (const auto& [k, val] : kv) {
    auto i = ts.signature().find(k);
    if (!i) throw std::runtime_error("no variable " + k);
    v[*i] = *ts.signature().value_index(*i, val);
    set[*i] = true;
  }
  for (StateId s = 0; s < ts.state_count(); ++s) {
    bool ok = true;
    for (std::size_t i = 0; i < v.size(); ++i) ok = ok && (!set[i] || ts.label(s)[i] == v[i]);
    if (ok) return s;
  }
  throw std::runtime_error("no such state");
}

}  // namespace models
