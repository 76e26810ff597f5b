#include "cli.hpp"

#include "layerlimit/config.hpp"
#include "layerlimit/dcl.hpp"
#include "layerlimit/errors.hpp"
#include "layerlimit/layering.hpp"
#include "layerlimit/morleyization.hpp"
#include "layerlimit/oracle.hpp"
#include "layerlimit/sampler.hpp"
#include "layerlimit/structures.hpp"
#include "layerlimit/syntax.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <fstream>
#include <memory>
#include <ostream>
#include <sstream>

namespace layerlimit::cli {
namespace {

using nlohmann::json;

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("io", "cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json read_json(const std::string& path) {
  try {
    return json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw Error("parse", "bad JSON in " + path + ": " + e.what());
  }
}

std::vector<int> parse_int_list(const std::string& text) {
  std::vector<int> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    try {
      out.push_back(std::stoi(item));
    } catch (const std::exception&) {
      throw Error("parse", "bad integer '" + item + "' in list");
    }
  }
  return out;
}

// Options shared by the subcommands; each subcommand reads what it needs.
struct Config {
  bool json_output = false;
  std::string bounds_spec;
  std::string theory_path;
  std::string types_path;
  std::string fragment_path;
  std::string structure_path;
  std::string patterns_path;
  std::string formula;
  std::string subset;
  std::string oracle = "";
  std::string out_path;
  std::uint64_t seed = 0;
  int stages = 40;
  int bound = 3;
  std::size_t points = 8;
  std::size_t samples = 10'000;
  int max_depth = -1;
  bool validate = false;
  int continuity = 0;
};

Bounds make_bounds(const Config& c) {
  Bounds b = Bounds::from_env();
  if (!c.bounds_spec.empty()) b.apply(c.bounds_spec);
  return b;
}

Theory load_theory(const Config& c) {
  if (c.theory_path.empty()) throw Error("usage", "--theory is required");
  return parse_theory(read_file(c.theory_path));
}

std::vector<QfTypeSpec> load_types(const Config& c, const RelationalLanguage& target) {
  if (c.types_path.empty()) return {};
  RelationalLanguage lang = target;
  auto types = parse_types(read_file(c.types_path), lang);
  for (auto& t : types) t = remap_type(t, lang, target);
  return types;
}

std::shared_ptr<Layering> make_layering(const Config& c, const Theory& theory, const Bounds& bounds, bool prescreen) {
  if (c.oracle.empty()) throw Error("usage", "--oracle is required");
  std::shared_ptr<ModelOracle> oracle = make_oracle(c.oracle, theory.language, bounds);
  auto types = load_types(c, oracle->language());
  LayeringOptions opts;
  opts.bounds = bounds;
  opts.prescreen = prescreen;
  return std::make_shared<Layering>(oracle, theory, std::move(types), opts);
}

int max_depth(const Config& c, const Bounds& b) { return c.max_depth >= 0 ? c.max_depth : b.max_depth; }

// Writes the artifact to --out (always JSON) or to out.
void emit(const Config& c, std::ostream& out, const json& j, const std::string& summary) {
  if (!c.out_path.empty()) {
    std::ofstream f(c.out_path, std::ios::binary);
    if (!f) throw Error("io", "cannot write " + c.out_path);
    f << j.dump(2) << "\n";
    if (c.json_output) {
      out << json{{"written", c.out_path}}.dump() << "\n";
    } else {
      out << summary << "\nwrote " << c.out_path << "\n";
    }
    return;
  }
  if (c.json_output) {
    out << j.dump() << "\n";
  } else {
    out << summary << "\n" << j.dump(2) << "\n";
  }
}

int cmd_check(const Config& c, std::ostream& out) {
  json j;
  std::string summary;
  if (!c.theory_path.empty()) {
    const Theory t = load_theory(c);
    json sentences = json::array();
    for (const auto& s : t.sentences) {
      sentences.push_back({{"text", print_sentence(s, t.language)},
                           {"universals", s.arity()},
                           {"universal", s.is_universal()}});
    }
    json rels = json::array();
    for (const auto& r : t.language.relations()) rels.push_back({r.name, r.arity});
    j["theory"] = {{"language", rels}, {"sentences", sentences}};
    summary += "theory: " + std::to_string(t.sentences.size()) + " pithy sentences over " +
               std::to_string(t.language.size()) + " relations\n";
    if (!c.formula.empty()) {
      const NamedFormula f = parse_formula(c.formula, t.language);
      const auto nr = check_nonredundant(f, t.language);
      j["formula"] = {{"text", print_formula(f.root, t.language, f.names)},
                      {"nonredundant", nr.nonredundant},
                      {"pattern", nr.pattern}};
      summary += std::string("formula: ") + (nr.nonredundant ? "non-redundant" : "redundant (" + nr.pattern + ")") + "\n";
    }
  }
  if (!c.types_path.empty()) {
    RelationalLanguage lang;
    const auto types = parse_types(read_file(c.types_path), lang);
    json list = json::array();
    for (const auto& t : types) list.push_back(print_type(t, lang));
    j["types"] = list;
    summary += "types: " + std::to_string(types.size()) + "\n";
  }
  if (!c.fragment_path.empty()) {
    const auto src = parse_fragment_source(read_file(c.fragment_path));
    const Fragment frag = Fragment::generate(src.language, src.formulas);
    j["fragment"] = {{"generators", src.formulas.size()}, {"formulas", frag.size()}, {"axioms", src.axioms.size()}};
    summary += "fragment: " + std::to_string(frag.size()) + " formulas\n";
  }
  if (j.is_null()) throw Error("usage", "check needs --theory, --types or --fragment");
  j["ok"] = true;
  emit(c, out, j, summary + "ok");
  return kOk;
}

int cmd_morleyize(const Config& c, std::ostream& out) {
  if (c.fragment_path.empty()) throw Error("usage", "--fragment is required");
  const auto src = parse_fragment_source(read_file(c.fragment_path));
  const Fragment frag = Fragment::generate(src.language, src.formulas);
  const MorleyLanguage la = build_LA(frag);
  const Theory th = morleyize_theory(src.axioms, frag, la);
  json j;
  json formulas = json::array();
  for (int i = 0; i < frag.size(); ++i) formulas.push_back(frag.text(i));
  j["fragment"] = formulas;
  j["language"] = la.index_json(frag);
  j["theory"] = print_theory(th);
  std::string summary = "fragment of " + std::to_string(frag.size()) + " formulas; " +
                        std::to_string(la.language.size()) + " relations; " + std::to_string(th.sentences.size()) +
                        " sentences";
  if (!c.structure_path.empty()) {
    const FiniteStructure m = structure_from_json(read_json(c.structure_path));
    const FiniteStructure ma = morleyize_structure(m, frag, la);
    const MorleyCheck check = verify_morleyization(m, frag, la, ma, th);
    j["structure"] = structure_to_json(ma);
    j["verified"] = {{"ok", check.ok}, {"checked", check.checked}, {"failure", check.failure}};
    summary += std::string("; structure ") + (check.ok ? "verified" : "FAILED: " + check.failure);
    if (!check.ok) {
      emit(c, out, j, summary);
      return kError;
    }
  }
  emit(c, out, j, summary);
  return kOk;
}

int cmd_dcl(const Config& c, std::ostream& out) {
  const Bounds bounds = make_bounds(c);
  DclReport report;
  std::string summary;
  if (!c.structure_path.empty()) {
    const FiniteStructure s = structure_from_json(read_json(c.structure_path));
    const auto subset = parse_int_list(c.subset);
    const auto closure = dcl_group(s, subset, bounds.automorphism_size);
    std::vector<int> sorted = subset;
    std::sort(sorted.begin(), sorted.end());
    sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
    const bool trivial = closure == sorted;
    report.subject = c.structure_path;
    report.findings.push_back({"dcl_group", trivial ? "trivial" : "nontrivial", {{"subset", sorted}, {"closure", closure}}});
    summary = "dcl of {" + c.subset + "}: " + json(closure).dump();
  } else if (!c.formula.empty()) {
    const Theory t = load_theory(c);
    const NamedFormula f = parse_formula(c.formula, t.language);
    report.subject = c.theory_path;
    if (!c.oracle.empty()) {
      auto oracle = make_oracle(c.oracle, t.language, bounds);
      const NamedFormula g{remap_theory(Theory{t.language, {PithySentence{{}, "y", f.root}}}, oracle->language())
                               .sentences[0]
                               .matrix,
                           f.names};
      const auto dup = check_duplication(*oracle, g, c.bound);
      report.findings.push_back({"duplication", dup.duplicated ? "duplicated" : "not-found-up-to-bound", dup.to_json(*oracle)});
      summary = std::string("duplication: ") + (dup.duplicated ? "found" : "not found up to bound");
    }
    const auto v = detect_violation(t, f, c.bound, nullptr, bounds);
    json w = v.to_json();
    w["replay"] = "layerlimit dcl --theory " + c.theory_path + " --formula '" + c.formula + "' --bound " +
                  std::to_string(c.bound);
    report.findings.push_back({"unique-witness search", v.violation ? "violation" : "no-evidence", w});
    if (!summary.empty()) summary += "\n";
    summary += std::string("unique-witness search (bounded evidence): ") + (v.violation ? "violation" : "no evidence") +
               " [" + v.note + "]";
  } else {
    throw Error("usage", "dcl needs --structure/--subset or --theory/--formula");
  }
  emit(c, out, report.to_json(), summary);
  return kOk;
}

int cmd_build(const Config& c, std::ostream& out) {
  const Bounds bounds = make_bounds(c);
  const Theory t = load_theory(c);
  std::shared_ptr<Layering> lay;
  try {
    lay = make_layering(c, t, bounds, true);
  } catch (const RefusalError& e) {
    json j{{"label", "bounded evidence"}, {"verdict", "refused: nontrivial dcl evidence"}, {"prescreen", e.result().to_json()}};
    emit(c, out, j, "refused: nontrivial dcl evidence (bounded evidence)");
    return kRefused;
  }
  lay->build(c.stages);
  json j = lay->to_json();
  j["seed"] = c.seed;
  std::string summary = "built " + std::to_string(lay->stages()) + " stages; final carrier " +
                        std::to_string(lay->level(lay->size() - 1).size()) + " elements, sink mass " +
                        to_string(lay->level(lay->size() - 1).sink_mass);
  int code = kOk;
  if (c.validate) {
    ValidateOptions vo;
    vo.arity = bounds.type_arity;
    vo.seed = c.seed;
    const auto report = validate_regular(*lay, vo);
    j["validation"] = report.to_json();
    summary += std::string("; regularity ") + (report.ok() ? "ok" : "VIOLATED");
    if (!report.ok()) code = kError;
  }
  if (c.continuity > 0) {
    const auto report = validate_continuity(*lay, c.continuity);
    j["continuity"] = report.to_json();
    summary += "; continuity unwitnessed " + std::to_string(report.unwitnessed);
  }
  emit(c, out, j, summary);
  return code;
}

int cmd_sample(const Config& c, std::ostream& out) {
  const Bounds bounds = make_bounds(c);
  const Theory t = load_theory(c);
  auto lay = make_layering(c, t, bounds, true);
  SampleSession session(lay, c.seed, max_depth(c, bounds));
  const FiniteStructure s = session.induced_structure(c.points);
  json j = structure_to_json(s);
  emit(c, out, j,
       "sampled " + std::to_string(c.points) + " points (decisions up to depth " +
           std::to_string(session.max_decision_depth()) + ")");
  return kOk;
}

int cmd_stats(const Config& c, std::ostream& out) {
  const Bounds bounds = make_bounds(c);
  const Theory t = load_theory(c);
  auto lay = make_layering(c, t, bounds, true);
  lay->build(c.stages);
  std::vector<FiniteStructure> patterns;
  if (!c.patterns_path.empty()) {
    const json pj = read_json(c.patterns_path);
    if (!pj.is_array()) throw Error("parse", "pattern file must hold a JSON list");
    for (const auto& p : pj) patterns.push_back(structure_from_json(p));
  }
  StatsOptions so;
  so.samples = c.samples;
  so.seed = c.seed;
  so.max_depth = max_depth(c, bounds);
  const StatsReport r = stats_report(lay, patterns, so);
  std::ostringstream summary;
  summary << "monotone_ok " << (r.monotone_ok ? "true" : "false") << "; exchangeability gap "
          << r.exchangeability_gap << " over " << r.samples << " samples";
  emit(c, out, r.to_json(), summary.str());
  return kOk;
}

int cmd_classify(const Config& c, std::ostream& out) {
  const Bounds bounds = make_bounds(c);
  const Theory t = load_theory(c);
  const PrescreenResult pre = prescreen_theory(t, c.bound, bounds);
  json j;
  j["label"] = "bounded evidence";
  j["bound"] = c.bound;
  j["prescreen"] = pre.to_json();
  if (pre.refused) {
    const auto& s = t.sentences[pre.sentence];
    const NamedFormula phi = uniqueness_formula(s);
    j["verdict"] = "refused: nontrivial dcl evidence";
    j["replay"] = "layerlimit dcl --theory " + c.theory_path + " --formula '" +
                  print_formula(phi.root, t.language, phi.names) + "' --bound " + std::to_string(c.bound);
    emit(c, out, j, "refused: nontrivial dcl evidence (bounded evidence)");
    return kRefused;
  }
  auto lay = make_layering(c, t, bounds, false);
  SampleSession session(lay, c.seed, max_depth(c, bounds));
  j["verdict"] = "sampled";
  j["structure"] = structure_to_json(session.induced_structure(c.points));
  emit(c, out, j, "sampled (no bounded evidence of a unique witness)");
  return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  Config c;
  CLI::App app{"Exchangeable random structures from layerings of finite measured approximations", "layerlimit"};
  app.require_subcommand(1);
  app.add_flag("--json", c.json_output, "Machine-readable JSON output");
  app.add_option("--bounds", c.bounds_spec, "Search bounds key=value,... (overrides LAYERLIMIT_BOUNDS)");

  auto* check = app.add_subcommand("check", "Parse and validate theories, types and fragments");
  check->add_option("--theory", c.theory_path, "Theory file");
  check->add_option("--types", c.types_path, "Type file");
  check->add_option("--fragment", c.fragment_path, "Fragment file");
  check->add_option("--formula", c.formula, "Formula to test for non-redundancy over the theory language");

  auto* morley = app.add_subcommand("morleyize", "Morleyize a fragment and optionally a structure");
  morley->add_option("--fragment", c.fragment_path, "Fragment file")->required();
  morley->add_option("--structure", c.structure_path, "Structure JSON to expand and verify");

  auto* dcl = app.add_subcommand("dcl", "Definable closure checks");
  dcl->add_option("--structure", c.structure_path, "Structure JSON");
  dcl->add_option("--subset", c.subset, "Comma-separated subset, e.g. 0,2");
  dcl->add_option("--theory", c.theory_path, "Theory file");
  dcl->add_option("--formula", c.formula, "Formula phi(x,y)");
  dcl->add_option("--bound", c.bound, "Model size bound")->capture_default_str();
  dcl->add_option("--oracle", c.oracle, "Also search an oracle fragment for two witnesses");

  auto add_layering_opts = [&c](CLI::App* sub) {
    sub->add_option("--theory", c.theory_path, "Theory file")->required();
    sub->add_option("--oracle", c.oracle, "dlo | rado | pureset | forbid:FILE")->required();
    sub->add_option("--omit", c.types_path, "Types to omit");
    sub->add_option("--max-depth", c.max_depth, "Refinement cap in stages");
  };

  auto* build = app.add_subcommand("build", "Build a layering and dump its levels");
  add_layering_opts(build);
  build->add_option("--stages", c.stages, "Stages past the seed")->capture_default_str();
  build->add_option("--seed", c.seed, "Seed for validator replays");
  build->add_flag("--validate", c.validate, "Run the regularity validator");
  build->add_option("--continuity", c.continuity, "Check continuity for the first N levels");
  build->add_option("--out", c.out_path, "Output file");

  auto* sample = app.add_subcommand("sample", "Sample an induced finite structure of the limit");
  add_layering_opts(sample);
  sample->add_option("--points", c.points, "Number of points")->capture_default_str();
  sample->add_option("--seed", c.seed, "Seed")->required();
  sample->add_option("--out", c.out_path, "Output structure file");

  auto* stats = app.add_subcommand("stats", "Densities per level, limit estimates and exchangeability");
  add_layering_opts(stats);
  stats->add_option("--patterns", c.patterns_path, "JSON list of pattern structures");
  stats->add_option("--samples", c.samples, "Monte Carlo samples")->capture_default_str();
  stats->add_option("--stages", c.stages, "Levels with exact densities")->capture_default_str();
  stats->add_option("--seed", c.seed, "Seed")->required();
  stats->add_option("--out", c.out_path, "Output file");

  auto* classify = app.add_subcommand("classify", "Pre-screen for unique witnesses, then sample (bounded evidence)");
  classify->add_option("--theory", c.theory_path, "Theory file")->required();
  classify->add_option("--oracle", c.oracle, "dlo | rado | pureset | forbid:FILE");
  classify->add_option("--omit", c.types_path, "Types to omit");
  classify->add_option("--bound", c.bound, "Pre-screen model size bound")->capture_default_str();
  classify->add_option("--points", c.points, "Points to sample")->capture_default_str();
  classify->add_option("--seed", c.seed, "Seed")->required();
  classify->add_option("--max-depth", c.max_depth, "Refinement cap in stages");
  classify->add_option("--out", c.out_path, "Output file");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << json{{"error", "usage"}, {"message", e.what()}}.dump() << "\n";
    return kError;
  }
  try {
    if (check->parsed()) return cmd_check(c, out);
    if (morley->parsed()) return cmd_morleyize(c, out);
    if (dcl->parsed()) return cmd_dcl(c, out);
    if (build->parsed()) return cmd_build(c, out);
    if (sample->parsed()) return cmd_sample(c, out);
    if (stats->parsed()) return cmd_stats(c, out);
    if (classify->parsed()) return cmd_classify(c, out);
  } catch (const ParseError& e) {
    err << json{{"error", "parse"}, {"message", e.what()}, {"line", e.line()}, {"column", e.column()}}.dump() << "\n";
    return kError;
  } catch (const Error& e) {
    err << json{{"error", e.kind()}, {"message", e.what()}}.dump() << "\n";
    return kError;
  } catch (const std::exception& e) {
    err << json{{"error", "internal"}, {"message", e.what()}}.dump() << "\n";
    return kError;
  }
  return kError;
}

}  // namespace layerlimit::cli
