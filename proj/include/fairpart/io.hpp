#pragma once

#include <string>
#include <utility>
#include <vector>

#include "fairpart/core.hpp"
#include "fairpart/error.hpp"
#include "json.hpp"

namespace fairpart::io {

using Json = nlohmann::json;

inline Json to_json(const TransitionSystem& ts) {
  Json vars = Json::array();
  for (const auto& v : ts.signature().variables()) {
    vars.push_back({{"name", v.name}, {"domain", v.domain}});
  }
  Json states = Json::array();
  for (StateId s = 0; s < ts.state_count(); ++s) {
    Json row = Json::array();
    for (std::size_t i = 0; i < ts.signature().size(); ++i) {
      row.push_back(ts.value_of(s, i));
    }
    states.push_back(row);
  }
  Json trans = Json::array();
  for (const auto& t : ts.transitions()) {
    trans.push_back({t.source, ts.action_name(t.action), t.target});
  }
  return {{"format", "fairpart/ts-1"},
          {"variables", vars},
          {"states", states},
          {"initial", ts.initial()},
          {"actions", ts.actions()},
          {"transitions", trans}};
}

inline Json to_json(const FairTransitionSystem& fts) {
  Json j = to_json(fts.ts());
  j["format"] = "fairpart/fts-1";
  Json fair = Json::array();
  for (const auto& f : fts.fairness()) {
    Json ts = Json::array();
    for (auto id : f.transitions) {
      const auto& t = fts.ts().transition(id);
      ts.push_back({t.source, fts.ts().action_name(t.action), t.target});
    }
    fair.push_back({{"name", f.name}, {"transitions", ts}});
  }
  j["fairness"] = fair;
  return j;
}

namespace detail {

inline const Json& field(const Json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) {
    throw ParseError(std::string("missing field '") + key + "'", 0, 0);
  }
  return j.at(key);
}

inline Transition triple(const Json& row, const TransitionSystem* ts,
                         const std::vector<std::string>& actions) {
  if (!row.is_array() || row.size() != 3) {
    throw ParseError("transition must be [source, action, target]", 0, 0);
  }
  auto name = row[1].get<std::string>();
  ActionId a = 0;
  if (ts) {
    auto found = ts->find_action(name);
    if (!found) throw ParseError("unknown action '" + name + "'", 0, 0);
    a = *found;
  } else {
    auto it = std::find(actions.begin(), actions.end(), name);
    if (it == actions.end()) {
      throw ParseError("unknown action '" + name + "'", 0, 0);
    }
    a = static_cast<ActionId>(it - actions.begin());
  }
  return {row[0].get<StateId>(), a, row[2].get<StateId>()};
}

}  // namespace detail

inline TransitionSystem ts_from_json(const Json& j) {
  try {
    std::vector<Variable> vars;
    for (const auto& v : detail::field(j, "variables")) {
      vars.push_back({detail::field(v, "name").get<std::string>(),
                      detail::field(v, "domain")
                          .get<std::vector<std::string>>()});
    }
    Signature sig(vars);
    std::vector<Valuation> labels;
    for (const auto& row : detail::field(j, "states")) {
      if (!row.is_array() || row.size() != sig.size()) {
        throw ParseError("state row does not match the variables", 0, 0);
      }
      Valuation v;
      for (std::size_t i = 0; i < sig.size(); ++i) {
        auto idx = sig.value_index(i, row[i].get<std::string>());
        if (!idx) {
          throw ParseError("value '" + row[i].get<std::string>() +
                               "' is not in the domain of " + sig[i].name,
                           0, 0);
        }
        v.push_back(*idx);
      }
      labels.push_back(std::move(v));
    }
    auto actions =
        detail::field(j, "actions").get<std::vector<std::string>>();
    std::vector<Transition> trans;
    for (const auto& row : detail::field(j, "transitions")) {
      trans.push_back(detail::triple(row, nullptr, actions));
    }
    return TransitionSystem(std::move(sig), std::move(labels),
                            detail::field(j, "initial")
                                .get<std::vector<StateId>>(),
                            std::move(actions), std::move(trans));
  } catch (const Json::exception& e) {
    throw ParseError(e.what(), 0, 0);
  } catch (const InvalidInput& e) {
    throw ParseError(e.what(), 0, 0);
  }
}

inline FairTransitionSystem fts_from_json(const Json& j) {
  auto ts = ts_from_json(j);
  try {
    std::vector<std::pair<std::string, std::vector<Transition>>> fs;
    if (j.contains("fairness")) {
      for (const auto& f : j.at("fairness")) {
        std::vector<Transition> ts_list;
        for (const auto& row : detail::field(f, "transitions")) {
          ts_list.push_back(detail::triple(row, &ts, {}));
        }
        fs.emplace_back(detail::field(f, "name").get<std::string>(),
                        std::move(ts_list));
      }
    }
    return FairTransitionSystem::from_triples(std::move(ts), fs);
  } catch (const Json::exception& e) {
    throw ParseError(e.what(), 0, 0);
  } catch (const InvalidInput& e) {
    throw ParseError(e.what(), 0, 0);
  }
}

inline Json parse_json(const std::string& text) {
  try {
    return Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw ParseError(e.what(), 0, 0);
  }
}

inline std::string print(const Json& j) { return j.dump(2) + "\n"; }
inline std::string print(const TransitionSystem& ts) {
  return print(to_json(ts));
}
inline std::string print(const FairTransitionSystem& fts) {
  return print(to_json(fts));
}

inline FairTransitionSystem parse_fts(const std::string& text) {
  return fts_from_json(parse_json(text));
}
inline TransitionSystem parse_ts(const std::string& text) {
  return ts_from_json(parse_json(text));
}

// `names` renumbers states, e.g. part-local ids to global ones.
inline Json to_json(const TransitionSystem& ts, const Lasso& l,
                    const std::vector<StateId>* names = nullptr) {
  auto steps = [&](const std::vector<Step>& xs) {
    Json a = Json::array();
    for (const auto& s : xs) {
      a.push_back({{"state", names ? (*names)[s.state] : s.state},
                   {"label", ts.describe(s.state)},
                   {"action", ts.action_name(s.action)}});
    }
    return a;
  };
  return {{"prefix", steps(l.prefix)}, {"cycle", steps(l.cycle)}};
}

inline std::string describe(const TransitionSystem& ts, const Lasso& l,
                            const std::vector<StateId>* names = nullptr) {
  std::string out;
  auto name = [&](StateId s) {
    return "s" + std::to_string(names ? (*names)[s] : s);
  };
  auto emit = [&](const Step& s) {
    out += name(s.state) + " -" + ts.action_name(s.action) + "-> ";
  };
  for (const auto& s : l.prefix) emit(s);
  out += "( ";
  for (const auto& s : l.cycle) emit(s);
  out += name(l.cycle.front().state) + " )^w";
  return out;
}

}  // namespace fairpart::io
