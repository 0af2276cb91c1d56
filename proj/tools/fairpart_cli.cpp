// fairpart: enumerate, refine, partition and model check fair transition
// systems described as event systems (.mch/.ref) or canonical JSON.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "fairpart/fairpart.hpp"

namespace fs = std::filesystem;
using namespace fairpart;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError("cannot read '" + path + "'");
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

void spit(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw UsageError("cannot write '" + path + "'");
  out << text;
}

struct Loaded {
  FairTransitionSystem fts;
  std::optional<frontend::EventSystem> es;
  std::optional<frontend::EventSystem> abstract;
  std::vector<std::string> warnings;
};

bool is_json(const std::string& path) {
  return fs::path(path).extension() == ".json";
}

frontend::EventSystem parse_es(const std::string& path) {
  return frontend::parse(slurp(path));
}

// For a refinement, the abstract machine is `<REFINES>.mch` next to it
// unless given explicitly.
frontend::EventSystem resolve_abstract(const frontend::EventSystem& es,
                                       const std::string& path,
                                       const std::string& explicit_path) {
  if (!explicit_path.empty()) return parse_es(explicit_path);
  auto dir = fs::path(path).parent_path();
  for (const auto* ext : {".mch", ".ref"}) {
    auto p = dir / (es.refines + ext);
    if (fs::exists(p)) return parse_es(p.string());
  }
  throw UsageError("cannot find the refined machine '" + es.refines +
                   "' next to '" + path + "' (pass --abstract)");
}

Loaded load(const std::string& path, const std::string& abstract_path = "") {
  Loaded l;
  if (is_json(path)) {
    l.fts = io::parse_fts(slurp(path));
    return l;
  }
  l.es = parse_es(path);
  if (!l.es->refines.empty()) {
    l.abstract = resolve_abstract(*l.es, path, abstract_path);
  }
  auto e = frontend::enumerate(*l.es, l.abstract ? &*l.abstract : nullptr);
  l.fts = std::move(e.fts);
  l.warnings = std::move(e.warnings);
  return l;
}

pltl::FormulaPtr load_formula(const std::string& text) {
  if (!text.empty() && text[0] == '@') return pltl::parse(slurp(text.substr(1)));
  return pltl::parse(text);
}

std::string summary(const FairTransitionSystem& fts) {
  const auto& ts = fts.ts();
  std::string o = std::to_string(ts.state_count()) + " states, " +
                  std::to_string(ts.transitions().size()) + " transitions, " +
                  std::to_string(fts.fairness().size()) + " fairness constraint" +
                  (fts.fairness().size() == 1 ? "" : "s");
  if (!fts.fairness().empty()) {
    std::string sizes;
    for (const auto& f : fts.fairness()) {
      sizes += (sizes.empty() ? "" : ", ") + std::to_string(f.transitions.size());
    }
    o += " (" + sizes + " transition" +
         (fts.fairness().size() == 1 && fts.fairness()[0].transitions.size() == 1
              ? ""
              : "s") +
         ")";
  }
  return o;
}

struct Config {
  std::string format = "text";
  std::string output;
  unsigned workers = 0;
  std::string mode = "auto";
  std::size_t oracle_bound = 12;
  bool strict_initial = false;
  std::string emit_parts;
  std::string abstract_path;
};

void emit(const Config& c, const std::string& text, const io::Json& j) {
  std::string body = c.format == "text" ? text : io::print(j);
  if (c.output.empty()) {
    std::cout << body;
  } else {
    spit(c.output, body);
  }
}

mc::Options options(const Config& c) {
  mc::Options o;
  o.mode = mc::parse_mode(c.mode);
  o.workers = c.workers;
  return o;
}

struct Pair {
  Loaded abstract;
  Loaded refined;
  PropPtr inv;
};

// Either (abstract, refined) or a single refinement with auto-resolved
// abstract machine.
Pair load_pair(const std::vector<std::string>& files, const Config& c) {
  if (files.empty() || files.size() > 2) {
    throw UsageError("expected <abstract> <refined> or <refined>");
  }
  const std::string& ref_path = files.back();
  std::string abs_path = files.size() == 2 ? files[0] : c.abstract_path;
  if (is_json(ref_path)) throw UsageError("refinement needs event-system inputs");
  Pair p;
  p.refined = load(ref_path, abs_path);
  if (!p.refined.abstract) {
    throw UsageError("'" + ref_path + "' is not a REFINEMENT");
  }
  p.abstract.es = *p.refined.abstract;
  auto e = frontend::enumerate(*p.abstract.es);
  p.abstract.fts = std::move(e.fts);
  p.inv = frontend::gluing_invariant(*p.refined.es, *p.abstract.es);
  return p;
}

int cmd_enumerate(const std::string& file, const Config& c) {
  auto l = load(file, c.abstract_path);
  std::string text;
  for (const auto& w : l.warnings) text += "warning: " + w + "\n";
  text += summary(l.fts) + "\n";
  if (c.format == "text" && !c.output.empty()) {
    spit(c.output, io::print(l.fts));
    std::cout << text;
    return 0;
  }
  emit(c, text, io::to_json(l.fts));
  return 0;
}

int cmd_check_refinement(const std::vector<std::string>& files, const Config& c) {
  auto p = load_pair(files, c);
  auto v = refinement::check_refinement(p.abstract.fts, p.refined.fts, p.inv);
  std::string text;
  for (const auto& cl : v.clauses) {
    text += "clause " + cl.name + ": " + (cl.pass ? "pass" : "FAIL") + "\n";
    for (const auto& d : cl.details) text += "  " + d + "\n";
  }
  text += std::string("refinement: ") + (v.pass ? "PASS" : "FAIL") + "\n";
  emit(c, text, mc::to_json(v));
  return v.pass ? 0 : 1;
}

void write_parts(const std::vector<partition::Part>& parts, const std::string& dir) {
  fs::create_directories(dir);
  for (const auto& part : parts) {
    auto name = "part_s" + std::to_string(part.abstract_state) + ".json";
    spit((fs::path(dir) / name).string(), io::print(partition::to_json(part)));
  }
}

int cmd_partition(const std::vector<std::string>& files, const Config& c) {
  auto p = load_pair(files, c);
  auto v = refinement::check_refinement(p.abstract.fts, p.refined.fts, p.inv);
  if (!v.pass) {
    std::cerr << "refinement check failed; run check-refinement for details\n";
    return 1;
  }
  auto f2 = skip_complete(p.refined.fts);
  auto parts = partition::refinement_parts(
      f2, v.mu, v.act1,
      c.strict_initial ? partition::InitialRule::kAbstractIncoming
                       : partition::InitialRule::kAnyIncoming);
  std::string text;
  io::Json j = io::Json::array();
  const auto& ts1 = p.abstract.fts.ts();
  for (const auto& part : parts) {
    text += "part s" + std::to_string(part.abstract_state) + " [" +
            ts1.describe(part.abstract_state) + "]: ";
    for (std::size_t i = 0; i < part.global.size(); ++i) {
      text += (i ? " " : "") + ("s" + std::to_string(part.global[i])) + "/" +
              partition::provenance_name(part.provenance[i]) +
              (part.ts.is_initial(static_cast<StateId>(i)) ? "*" : "");
    }
    std::string rel;
    for (auto i : pltl::simplify_fairness_for_part(part, f2)) {
      rel += (rel.empty() ? "" : ", ") + f2.fairness()[i].name;
    }
    text += "; fairness {" + rel + "}\n";
    j.push_back(partition::to_json(part));
  }
  if (!c.emit_parts.empty()) write_parts(parts, c.emit_parts);
  emit(c, text, j);
  return 0;
}

int cmd_verify(const std::vector<std::string>& args, const std::string& how,
               bool no_fairness, const Config& c) {
  if (args.empty()) throw UsageError("missing formula");
  auto P = load_formula(args.back());
  if (how == "classify") {
    if (args.size() != 1) throw UsageError("--classify-only takes only a formula");
    auto r = mc::classify_negation(P, Signature{});
    std::string text = std::string(r.in ? "IN-ABmod" : "NOT-IN-ABmod") +
                       (r.reason.empty() ? "" : " (" + r.reason + ")") + "\n";
    emit(c, text, {{"in", r.in}, {"failed_clause", r.failed_clause}, {"reason", r.reason}});
    return 0;
  }
  std::vector<std::string> files(args.begin(), args.end() - 1);
  auto o = options(c);
  if (how == "global") {
    if (files.size() != 1) throw UsageError("--global takes one system and a formula");
    auto l = load(files[0], c.abstract_path);
    auto v = no_fairness ? mc::verify_global(l.fts.ts(), P, o)
                         : mc::verify_under_fairness(l.fts, P, o);
    emit(c, mc::describe(l.fts.ts(), v), mc::to_json(l.fts.ts(), v));
    return v.holds ? 0 : 1;
  }
  auto p = load_pair(files, c);
  auto r = mc::verify_by_parts(
      p.abstract.fts, p.refined.fts, p.inv, P, o,
      c.strict_initial ? partition::InitialRule::kAbstractIncoming
                       : partition::InitialRule::kAnyIncoming);
  if (!c.emit_parts.empty()) write_parts(r.part_systems, c.emit_parts);
  emit(c, mc::describe(r), mc::to_json(r));
  return r.aggregate == mc::Aggregate::kHolds ? 0 : 1;
}

int cmd_oracle(const std::vector<std::string>& args, bool no_fairness,
               const std::string& shape, const Config& c) {
  if (args.size() != 2) throw UsageError("expected <system> <formula>");
  auto l = load(args[0], c.abstract_path);
  auto P = load_formula(args[1]);
  auto v = mc::oracle_check(l.fts.ts(), no_fairness ? nullptr : &l.fts, P,
                            c.oracle_bound,
                            shape == "walk" ? mc::LassoShape::kWalk
                                            : mc::LassoShape::kSimple);
  emit(c, mc::describe(l.fts.ts(), v), mc::to_json(l.fts.ts(), v));
  return v.holds ? 0 : 1;
}

int cmd_demo(const std::vector<std::string>& args, const Config& c) {
  if (args.size() != 3) throw UsageError("expected <system> <blocks.json> <formula>");
  auto l = load(args[0], c.abstract_path);
  auto block = partition::blocks_from_json(l.fts.ts(), io::parse_json(slurp(args[1])));
  auto P = load_formula(args[2]);
  auto r = mc::demonstrate_naive_unsoundness(l.fts, block, P, options(c));
  std::string text = "global: " + mc::describe(l.fts.ts(), r.global);
  io::Json parts = io::Json::array();
  for (std::size_t k = 0; k < r.parts.size(); ++k) {
    const auto& ts = r.part_systems[k].ts;
    text += "block " + std::to_string(r.parts[k].abstract_state) + " (" +
            std::to_string(ts.state_count()) + " states): " +
            mc::describe(ts, r.parts[k].verdict, &r.part_systems[k].global);
    auto j = mc::to_json(ts, r.parts[k].verdict, &r.part_systems[k].global);
    j["block"] = r.parts[k].abstract_state;
    parts.push_back(j);
  }
  text += std::string("paradox: ") + (r.paradox ? "yes" : "no") + "\n";
  if (!c.emit_parts.empty()) write_parts(r.part_systems, c.emit_parts);
  emit(c, text,
       {{"global", mc::to_json(l.fts.ts(), r.global)},
        {"parts", parts},
        {"paradox", r.paradox}});
  return r.paradox ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Partitioned PLTL model checking of refined fair transition systems"};
  app.require_subcommand(1);
  Config c;
  app.add_option("--format", c.format, "text or structured")
      ->check(CLI::IsMember({"text", "structured", "json"}));
  app.add_option("-o,--output", c.output, "write the report to a file");
  app.add_option("--workers", c.workers,
                 "worker threads for per-part checks (default: $FAIRPART_WORKERS "
                 "or hardware concurrency)");
  app.add_option("--fairness-mode", c.mode, "formula, algorithmic or auto")
      ->check(CLI::IsMember({"formula", "algorithmic", "auto"}));
  app.add_option("--oracle-bound", c.oracle_bound, "max |prefix|+|cycle| for the oracle");
  app.add_flag("--strict-initial", c.strict_initial,
               "part initial states need an abstract incoming event");
  app.add_option("--emit-parts", c.emit_parts, "write each part as a JSON system");
  app.add_option("--abstract", c.abstract_path, "abstract machine of a refinement");

  std::string file;
  auto* en = app.add_subcommand("enumerate", "enumerate the reachable state graph");
  en->add_option("system", file, "event system or JSON system")->required();

  std::vector<std::string> files;
  auto* cr = app.add_subcommand("check-refinement", "decide fair refinement");
  cr->add_option("systems", files, "[abstract] refined")->required();

  auto* pa = app.add_subcommand("partition", "build refinement-based parts");
  pa->add_option("systems", files, "[abstract] refined")->required();

  std::vector<std::string> vargs;
  bool global = false, by_parts = false, classify = false, no_fairness = false;
  auto* ve = app.add_subcommand("verify", "verify a PLTL formula (inline or @file)");
  ve->add_flag("--global", global, "check one system");
  ve->add_flag("--by-parts", by_parts, "check refinement-based parts");
  ve->add_flag("--classify-only", classify, "only classify the negation in ABmod");
  ve->add_flag("--no-fairness", no_fairness, "ignore fairness constraints (--global)");
  ve->add_option("args", vargs, "systems then formula")->required();

  std::string shape = "simple";
  auto* orc = app.add_subcommand("oracle", "brute-force lasso oracle");
  orc->add_flag("--no-fairness", no_fairness, "ignore fairness constraints");
  orc->add_option("--shape", shape, "simple or walk")
      ->check(CLI::IsMember({"simple", "walk"}));
  orc->add_option("args", vargs, "system formula")->required();

  auto* de = app.add_subcommand("demo-unsoundness",
                                "verify f => P globally and on a naive partition");
  de->add_option("args", vargs, "system blocks.json formula")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }
  if (c.format == "json") c.format = "structured";

  try {
    if (*en) return cmd_enumerate(file, c);
    if (*cr) return cmd_check_refinement(files, c);
    if (*pa) return cmd_partition(files, c);
    if (*ve) {
      int n = int{global} + int{by_parts} + int{classify};
      if (n != 1) throw UsageError("choose one of --global, --by-parts, --classify-only");
      return cmd_verify(vargs, global ? "global" : by_parts ? "parts" : "classify",
                        no_fairness, c);
    }
    if (*orc) return cmd_oracle(vargs, no_fairness, shape, c);
    if (*de) return cmd_demo(vargs, c);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const io::Json::exception& e) {
    std::cerr << "error: malformed JSON: " << e.what() << "\n";
    return 2;
  }
  return 2;
}
