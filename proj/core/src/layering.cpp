#include "layerlimit/layering.hpp"

#include "layerlimit/errors.hpp"

#include <algorithm>
#include <functional>
#include <random>
#include <set>

namespace layerlimit {

std::string to_string(StageKind kind) {
  switch (kind) {
    case StageKind::kSeed:
      return "seed";
    case StageKind::kScrapwork:
      return "scrapwork";
    case StageKind::kSplit:
      return "split";
    case StageKind::kSatisfy:
      return "satisfy";
    case StageKind::kOmit:
      return "omit";
    case StageKind::kHand:
      return "hand";
  }
  return "unknown";
}

bool Level::in_sublanguage(int relation) const {
  return std::binary_search(sublanguage.begin(), sublanguage.end(), relation);
}

namespace {

Formula remap_formula(const Formula& f, const std::vector<int>& map) {
  Formula g = f;
  if (g.kind == NodeKind::kAtom) g.relation = map.at(g.relation);
  for (auto& c : g.children) c = remap_formula(c, map);
  return g;
}

std::vector<int> name_map(const RelationalLanguage& from, const RelationalLanguage& target) {
  return relation_map(from, target);
}

std::vector<int> sentence_relations(const PithySentence& s) {
  std::vector<int> rels;
  s.matrix.collect_relations(rels);
  std::sort(rels.begin(), rels.end());
  rels.erase(std::unique(rels.begin(), rels.end()), rels.end());
  return rels;
}

std::string stage_error_prefix(int stage, StageKind kind) {
  return "stage " + std::to_string(stage) + " (" + to_string(kind) + "): ";
}

}  // namespace

Theory remap_theory(const Theory& theory, const RelationalLanguage& target) {
  const auto map = name_map(theory.language, target);
  Theory out;
  out.language = target;
  for (const auto& s : theory.sentences) {
    PithySentence t = s;
    t.matrix = remap_formula(s.matrix, map);
    out.sentences.push_back(std::move(t));
  }
  return out;
}

QfTypeSpec remap_type(const QfTypeSpec& type, const RelationalLanguage& from, const RelationalLanguage& target) {
  const auto map = name_map(from, target);
  QfTypeSpec out = type;
  for (auto& lit : out.literals) lit = remap_formula(lit, map);
  return out;
}

Layering::Layering(std::shared_ptr<ModelOracle> oracle, const Theory& theory, std::vector<QfTypeSpec> omitted,
                   LayeringOptions options)
    : oracle_(std::move(oracle)), omitted_(std::move(omitted)), options_(options) {
  if (!oracle_) throw Error("precondition", "layering needs an oracle");
  language_ = oracle_->language();
  theory_ = remap_theory(theory, language_);
  if (!oracle_->has_duplication()) {
    throw Error("precondition", "oracle '" + oracle_->name() + "' does not declare duplication");
  }
  if (options_.prescreen) {
    PrescreenResult pre = prescreen_theory(theory, options_.bounds.dcl_model_size, options_.bounds);
    if (pre.refused) {
      const std::string text = print_sentence(theory.sentences[pre.sentence], theory.language);
      throw RefusalError("bounded evidence of a unique witness for " + text, std::move(pre));
    }
  }
  Level seed;
  seed.carrier = Carrier::empty();
  seed.sink_mass = 1;
  levels_.push_back(std::move(seed));
}

Layering Layering::from_levels(RelationalLanguage language, std::vector<HandLevel> levels) {
  if (levels.empty()) throw Error("layering", "a hand-built layering needs at least one level");
  Layering out;
  out.language_ = std::move(language);
  out.theory_.language = out.language_;
  out.options_.prescreen = false;
  for (std::size_t i = 0; i < levels.size(); ++i) {
    auto& h = levels[i];
    const std::uint64_t n = h.mass.size();
    if (h.relations.size() != static_cast<int>(n)) {
      throw Error("layering", "hand-built level " + std::to_string(i) + " has mismatched sizes");
    }
    Level l;
    l.index = static_cast<int>(i) - 1;
    l.stage = h.stage;
    l.cycle = l.index < 0 ? -1 : l.index / 4;
    l.sublanguage = h.sublanguage;
    std::sort(l.sublanguage.begin(), l.sublanguage.end());
    l.carrier = Carrier::range(0, n);
    if (i == 0) {
      l.map = MapKind::kExplicit;
    } else {
      if (h.parents.size() != n) throw Error("layering", "hand-built level " + std::to_string(i) + " lacks parents");
      l.map = MapKind::kExplicit;
      l.parents = h.parents;
      l.previous_size = out.levels_.back().size();
    }
    for (std::uint64_t p = 0; p < n; ++p) {
      l.class_ids.push_back(static_cast<int>(p));
      l.class_mass.push_back(h.mass[p]);
      l.class_count.push_back(1);
    }
    l.sink_mass = h.sink;
    l.relations = std::make_shared<const FiniteStructure>(std::move(h.relations));
    out.levels_.push_back(std::move(l));
  }
  return out;
}

void Layering::build(int stages) { ensure(static_cast<std::size_t>(std::max(stages, 0))); }

void Layering::ensure(std::size_t i) {
  while (levels_.size() <= i) step();
}

Level Layering::next_level(StageKind kind) const {
  const Level& prev = levels_.back();
  Level next;
  next.index = prev.index + 1;
  next.stage = kind;
  next.cycle = next.index / 4;
  next.sublanguage = prev.sublanguage;
  next.carrier = prev.carrier;
  next.map = MapKind::kPrefix;
  next.previous_size = prev.size();
  next.class_mass = prev.class_mass;
  next.class_count = prev.class_count;
  next.sink_mass = prev.sink_mass;
  return next;
}

void Layering::step() {
  if (!oracle_) throw Error("layering", "a hand-built layering cannot grow");
  const int stage = levels_.back().index + 1;
  static constexpr StageKind kCycle[] = {StageKind::kScrapwork, StageKind::kSplit, StageKind::kSatisfy,
                                         StageKind::kOmit};
  const StageKind kind = kCycle[stage % 4];
  Level next = next_level(kind);
  try {
    switch (kind) {
      case StageKind::kScrapwork:
        scrapwork(next);
        break;
      case StageKind::kSplit:
        split(next);
        break;
      case StageKind::kSatisfy:
        satisfy(next);
        break;
      default:
        omit(next);
        break;
    }
  } catch (const RefusalError&) {
    throw;
  } catch (const Error& e) {
    throw Error(e.kind(), stage_error_prefix(stage, kind) + e.what());
  }
  levels_.push_back(std::move(next));
}

void Layering::scrapwork(Level& next) {
  const Level& prev = levels_.back();
  const Handle h = oracle_->fresh_element(*prev.carrier);
  if (prev.carrier->contains(h)) throw Error("oracle", "fresh element already in the carrier");
  next.carrier = oracle_->extend(prev.carrier, {HandleRange{h, 1}});
  const Rational half = prev.sink_mass / 2;
  next.appended_class = static_cast<int>(next.class_mass.size());
  next.class_mass.push_back(half);
  next.class_count.push_back(1);
  next.sink_mass = half;
  next.detail = "fresh " + oracle_->describe(h);
}

void Layering::split(Level& next) {
  const Level& prev = levels_.back();
  next.carrier = oracle_->duplicate(prev.carrier);
  if (next.carrier->size() != 2 * prev.size()) throw Error("duplication", "duplicate returned a carrier of wrong size");
  next.map = MapKind::kSplit;
  for (auto& m : next.class_mass) m /= 2;
  for (auto& c : next.class_count) c *= 2;
  next.detail = "duplicated " + std::to_string(prev.size()) + " elements";
}

void Layering::satisfy(Level& next) {
  const Level& prev = levels_.back();
  const std::size_t count = theory_.sentences.size();
  for (std::size_t t = 0; t < count; ++t) {
    const std::size_t idx = (sentence_cursor_ + t) % count;
    const auto& s = theory_.sentences[idx];
    if (s.is_universal()) continue;
    const auto rels = sentence_relations(s);
    if (!std::all_of(rels.begin(), rels.end(), [&](int r) { return prev.in_sublanguage(r); })) continue;
    sentence_cursor_ = idx + 1;
    WitnessResult w = oracle_->pi2_witnesses(prev.carrier, s);
    if (w.extended->size() != prev.size() + w.added) throw Error("witness", "witness carrier has the wrong size");
    next.carrier = w.extended;
    next.served = static_cast<int>(idx);
    if (w.added > 0) {
      const Rational share = prev.sink_mass / Rational(w.added + 1);
      next.appended_class = static_cast<int>(next.class_mass.size());
      next.class_mass.push_back(share);
      next.class_count.push_back(w.added);
      next.sink_mass = share;
    }
    next.detail = print_sentence(s, language_) + " [" + w.method + ", " + std::to_string(w.added) + " new]";
    return;
  }
  next.detail = "no eligible sentence";
}

void Layering::omit(Level& next) {
  const Level& prev = levels_.back();
  std::vector<int> required = prev.sublanguage;
  const int grow = std::min(next.cycle, language_.size() - 1);
  for (int j = 0; j <= grow; ++j) required.push_back(j);
  std::sort(required.begin(), required.end());
  required.erase(std::unique(required.begin(), required.end()), required.end());
  if (omitted_.empty()) {
    next.sublanguage = required;
    next.detail = "language growth";
    return;
  }
  const std::size_t idx = type_cursor_ % omitted_.size();
  ++type_cursor_;
  const auto& type = omitted_[idx];
  std::vector<int> cert = oracle_->omission_certificate(prev.carrier, type, required);
  cert.insert(cert.end(), required.begin(), required.end());
  std::sort(cert.begin(), cert.end());
  cert.erase(std::unique(cert.begin(), cert.end()), cert.end());
  if (oracle_->type_realized(prev.carrier, type, cert)) {
    throw Error("certificate", "type is realized after omission: " + print_type(type, language_));
  }
  next.sublanguage = std::move(cert);
  next.served = static_cast<int>(idx);
  next.detail = "omitted " + print_type(type, language_);
}

int Layering::class_of(std::size_t i, std::uint64_t pos) const {
  if (pos == kSink) throw Error("range", "the sink has no class");
  while (true) {
    const Level& l = levels_.at(i);
    if (pos >= l.size()) throw Error("range", "position out of range");
    switch (l.map) {
      case MapKind::kPrefix:
        if (pos >= l.previous_size) return l.appended_class;
        break;
      case MapKind::kSplit:
        pos /= 2;
        break;
      case MapKind::kExplicit:
        return l.class_ids[pos];
      case MapKind::kNone:
        throw Error("layering", "element without a class");
    }
    --i;
  }
}

Rational Layering::mass(std::size_t i, std::uint64_t pos) const {
  const Level& l = levels_.at(i);
  if (pos == kSink) return l.sink_mass;
  return l.class_mass[class_of(i, pos)];
}

std::uint64_t Layering::parent(std::size_t i, std::uint64_t pos) const {
  if (pos == kSink) return kSink;
  const Level& l = levels_.at(i);
  switch (l.map) {
    case MapKind::kPrefix:
      return pos < l.previous_size ? pos : kSink;
    case MapKind::kSplit:
      return pos / 2;
    case MapKind::kExplicit:
      if (i == 0) throw Error("range", "the first level has no parent");
      return l.parents[pos];
    case MapKind::kNone:
      break;
  }
  throw Error("range", "the seed level has no parent");
}

std::uint64_t Layering::project(std::size_t i, std::uint64_t pos, std::size_t to) const {
  while (i > to) pos = parent(i--, pos);
  return pos;
}

bool Layering::holds(std::size_t i, int relation, const std::uint64_t* pos, int n) const {
  const Level& l = levels_.at(i);
  for (int k = 0; k < n; ++k) {
    if (pos[k] == kSink) return true;
  }
  if (l.relations) {
    int args[kMaxArity];
    for (int k = 0; k < n; ++k) args[k] = static_cast<int>(pos[k]);
    return l.relations->holds(relation, std::span<const int>(args, static_cast<std::size_t>(n)));
  }
  if (!l.in_sublanguage(relation)) return true;
  for (int a = 0; a < n; ++a) {
    for (int b = a + 1; b < n; ++b) {
      if (pos[a] == pos[b]) return true;
    }
  }
  Handle hs[kMaxArity];
  for (int k = 0; k < n; ++k) hs[k] = l.carrier->at(pos[k]);
  return oracle_->holds(relation, hs, n);
}

Rational Layering::total_mass(std::size_t i) const {
  const Level& l = levels_.at(i);
  Rational total = l.sink_mass;
  for (std::size_t c = 0; c < l.class_mass.size(); ++c) total += l.class_mass[c] * Rational(l.class_count[c]);
  return total;
}

Rational Layering::max_element_mass(std::size_t i) const {
  const Level& l = levels_.at(i);
  Rational best = 0;
  for (std::size_t c = 0; c < l.class_mass.size(); ++c) {
    if (l.class_count[c] > 0 && l.class_mass[c] > best) best = l.class_mass[c];
  }
  return best;
}

std::optional<WeightedStructure> Layering::materialize(std::size_t i, std::uint64_t limit) const {
  const Level& l = levels_.at(i);
  if (l.size() > limit) return std::nullopt;
  const int n = static_cast<int>(l.size());
  WeightedStructure w{FiniteStructure(language_, n + 1), {}};
  auto to_pos = [n](int v) { return v == n ? kSink : static_cast<std::uint64_t>(v); };
  for (int r = 0; r < language_.size(); ++r) {
    const int k = language_[r].arity;
    std::vector<int> t(k, 0);
    std::uint64_t pos[kMaxArity];
    while (true) {
      for (int a = 0; a < k; ++a) pos[a] = to_pos(t[a]);
      if (holds(i, r, pos, k)) w.structure.set(r, t);
      int a = k - 1;
      for (; a >= 0; --a) {
        if (++t[a] <= n) break;
        t[a] = 0;
      }
      if (a < 0) break;
    }
  }
  for (int v = 0; v <= n; ++v) w.mass.push_back(mass(i, to_pos(v)));
  return w;
}

nlohmann::json Layering::to_json(std::uint64_t element_limit) const {
  nlohmann::json out;
  out["language"] = nlohmann::json::array();
  for (const auto& r : language_.relations()) out["language"].push_back({r.name, r.arity});
  if (oracle_) out["oracle"] = oracle_->name();
  out["levels"] = nlohmann::json::array();
  for (std::size_t i = 0; i < levels_.size(); ++i) {
    const Level& l = levels_[i];
    nlohmann::json j;
    j["index"] = l.index;
    j["stage"] = to_string(l.stage);
    j["cycle"] = l.cycle;
    if (!l.detail.empty()) j["detail"] = l.detail;
    j["sublanguage"] = nlohmann::json::array();
    for (int r : l.sublanguage) j["sublanguage"].push_back(language_[r].name);
    j["size"] = l.size();
    const bool small = l.size() <= element_limit;
    auto& mass_j = j["mass"];
    mass_j["sink"] = to_string(l.sink_mass);
    mass_j["classes"] = nlohmann::json::array();
    for (std::size_t c = 0; c < l.class_mass.size(); ++c) {
      if (l.class_count[c] == 0) continue;
      mass_j["classes"].push_back({{"class", c}, {"mass", to_string(l.class_mass[c])}, {"count", l.class_count[c]}});
    }
    const char* kinds[] = {"none", "prefix", "split", "explicit"};
    j["map"]["kind"] = kinds[static_cast<int>(l.map)];
    if (small) {
      j["carrier"] = nlohmann::json::array();
      mass_j["elements"] = nlohmann::json::array();
      for (std::uint64_t p = 0; p < l.size(); ++p) {
        const Handle h = l.carrier->at(p);
        j["carrier"].push_back({{"handle", h}, {"value", oracle_ ? oracle_->describe(h) : std::to_string(h)}});
        mass_j["elements"].push_back(to_string(mass(i, p)));
      }
      if (i > 0) {
        auto& parents = j["map"]["parents"];
        parents = nlohmann::json::array();
        for (std::uint64_t p = 0; p < l.size(); ++p) {
          const auto q = parent(i, p);
          if (q == kSink) {
            parents.push_back("sink");
          } else {
            parents.push_back(q);
          }
        }
      }
    } else {
      j["carrier"] = nullptr;
      j["elided"] = true;
    }
    out["levels"].push_back(std::move(j));
  }
  return out;
}

// ---- validators ----

nlohmann::json ValidationReport::to_json() const {
  nlohmann::json j;
  j["ok"] = ok();
  j["checks"] = checks;
  j["unverified"] = unverified;
  j["violations"] = nlohmann::json::array();
  for (const auto& v : violations) {
    j["violations"].push_back({{"condition", v.condition}, {"level", v.level}, {"detail", v.detail}});
  }
  j["methods"] = methods;
  return j;
}

namespace {

void add_issue(ValidationReport& report, const char* condition, const Level& level, std::string detail) {
  report.violations.push_back({condition, level.index, std::move(detail)});
}

// Calls visit on every tuple of k distinct positions from [0, n).
template <class Visit>
void for_each_distinct_tuple(std::uint64_t n, int k, Visit&& visit) {
  if (k == 0) {
    visit(static_cast<const std::uint64_t*>(nullptr));
    return;
  }
  if (n < static_cast<std::uint64_t>(k)) return;
  std::vector<std::uint64_t> t(k, 0);
  while (true) {
    bool distinct = true;
    for (int a = 0; a < k && distinct; ++a) {
      for (int b = a + 1; b < k; ++b) {
        if (t[a] == t[b]) {
          distinct = false;
          break;
        }
      }
    }
    if (distinct && !visit(static_cast<const std::uint64_t*>(t.data()))) return;
    int a = k - 1;
    for (; a >= 0; --a) {
      if (++t[a] < n) break;
      t[a] = 0;
    }
    if (a < 0) return;
  }
}

std::uint64_t power_or_max(std::uint64_t n, int k) {
  std::uint64_t total = 1;
  for (int i = 0; i < k; ++i) {
    if (n != 0 && total > ~std::uint64_t{0} / n) return ~std::uint64_t{0};
    total *= n;
  }
  return total;
}

bool has_repeat(const std::uint64_t* t, int k) {
  for (int a = 0; a < k; ++a) {
    for (int b = a + 1; b < k; ++b) {
      if (t[a] == t[b]) return true;
    }
  }
  return false;
}

std::string tuple_text(const std::uint64_t* t, int k) {
  std::string s = "(";
  for (int a = 0; a < k; ++a) {
    if (a) s += ",";
    s += t[a] == kSink ? std::string("sink") : std::to_string(t[a]);
  }
  return s + ")";
}

void check_masses(const Layering& lay, ValidationReport& report) {
  for (std::size_t i = 0; i < lay.size(); ++i) {
    const Level& l = lay.level(i);
    ++report.checks;
    if (l.sink_mass <= 0) add_issue(report, "mass", l, "sink mass is not positive");
    for (std::size_t c = 0; c < l.class_mass.size(); ++c) {
      if (l.class_count[c] > 0 && l.class_mass[c] <= 0) add_issue(report, "mass", l, "non-positive element mass");
    }
    const Rational total = lay.total_mass(i);
    if (total != 1) add_issue(report, "mass", l, "total mass is " + to_string(total));
    if (i == 0) continue;
    const Level& p = lay.level(i - 1);
    ++report.checks;
    switch (l.map) {
      case MapKind::kPrefix: {
        if (l.size() < p.size() || l.previous_size != p.size()) {
          add_issue(report, "fiber", l, "prefix map does not cover the previous carrier");
          break;
        }
        for (std::size_t c = 0; c < p.class_mass.size(); ++c) {
          if (l.class_mass[c] != p.class_mass[c] || l.class_count[c] != p.class_count[c]) {
            add_issue(report, "fiber", l, "inherited class " + std::to_string(c) + " changed mass");
          }
        }
        Rational sink_fiber = l.sink_mass;
        const std::uint64_t added = l.size() - p.size();
        if (added > 0) sink_fiber += l.class_mass.at(l.appended_class) * Rational(added);
        if (sink_fiber != p.sink_mass) {
          add_issue(report, "fiber", l, "sink fiber mass " + to_string(sink_fiber) + " != " + to_string(p.sink_mass));
        }
        break;
      }
      case MapKind::kSplit: {
        if (l.size() != 2 * p.size()) add_issue(report, "fiber", l, "split carrier is not twice the previous");
        for (std::size_t c = 0; c < p.class_mass.size(); ++c) {
          if (l.class_mass[c] * 2 != p.class_mass[c] || l.class_count[c] != 2 * p.class_count[c]) {
            add_issue(report, "fiber", l, "class " + std::to_string(c) + " not halved");
          }
        }
        if (l.sink_mass != p.sink_mass) add_issue(report, "fiber", l, "split changed the sink mass");
        break;
      }
      case MapKind::kExplicit: {
        std::vector<Rational> sums(p.size());
        std::vector<char> hit(p.size(), 0);
        Rational sink_sum = l.sink_mass;
        for (std::uint64_t q = 0; q < l.size(); ++q) {
          const auto par = l.parents[q];
          if (par == kSink) {
            sink_sum += lay.mass(i, q);
          } else if (par >= p.size()) {
            add_issue(report, "fiber", l, "parent out of range");
          } else {
            sums[par] += lay.mass(i, q);
            hit[par] = 1;
          }
        }
        for (std::uint64_t q = 0; q < p.size(); ++q) {
          if (!hit[q]) add_issue(report, "fiber", l, "map is not surjective at " + std::to_string(q));
          if (sums[q] != lay.mass(i - 1, q)) add_issue(report, "fiber", l, "fiber of " + std::to_string(q) + " changes mass");
        }
        if (sink_sum != p.sink_mass) add_issue(report, "fiber", l, "sink fiber changes mass");
        break;
      }
      case MapKind::kNone:
        add_issue(report, "fiber", l, "level without a map");
        break;
    }
  }
  report.methods.push_back("mass: exact rational sums per class and per fiber");
}

bool eval_sentence_at(const ModelOracle& oracle, const PithySentence& s, std::vector<Handle>& env) {
  auto holds = [&oracle](int rel, const Handle* args, int n) { return oracle.holds(rel, args, n); };
  return eval_qf(s.matrix, env.data(), holds);
}

class RegularityChecker {
 public:
  RegularityChecker(const Layering& lay, const ValidateOptions& opt, ValidationReport& report)
      : lay_(lay), opt_(opt), report_(report) {}

  void run() {
    const auto& lang = lay_.language();
    for (std::size_t i = 1; i < lay_.size(); ++i) {
      const Level& l = lay_.level(i);
      const Level& p = lay_.level(i - 1);
      std::mt19937_64 rng(opt_.seed * 0x9e3779b97f4a7c15ULL + i);
      check_sink(i, l, p);
      check_language(l, p);
      for (int r = 0; r < lang.size(); ++r) {
        const int k = lang[r].arity;
        if (k > opt_.arity) continue;
        check_neutral(i, l, r, k, rng);
        if (p.in_sublanguage(r)) {
          check_preservation(i, l, p, r, k, rng);
        }
      }
      check_stage(i, l, p);
    }
    check_coverage();
  }

 private:
  void note(const std::string& text) {
    if (std::find(report_.methods.begin(), report_.methods.end(), text) == report_.methods.end()) {
      report_.methods.push_back(text);
    }
  }

  void check_sink(std::size_t i, const Level& l, const Level& p) {
    ++report_.checks;
    for (int r = 0; r < lay_.language().size(); ++r) {
      const int k = lay_.language()[r].arity;
      if (k == 0) continue;
      std::vector<std::uint64_t> t(k, kSink);
      if (!lay_.holds(i, r, t.data(), k)) add_issue(report_, "a", l, "relation fails on the all-sink tuple");
      if (l.size() > 0) {
        t[0] = 0;
        if (k > 1 && !lay_.holds(i, r, t.data(), k)) add_issue(report_, "a", l, "relation fails on a sink tuple");
      }
    }
    if (lay_.parent(i, kSink) != kSink) add_issue(report_, "b", l, "sink does not map to the sink");
    // Sink decay, finite form.
    if (l.sink_mass > p.sink_mass) add_issue(report_, "c", l, "sink mass increased");
    if (l.stage == StageKind::kScrapwork && l.sink_mass * 2 != p.sink_mass) {
      add_issue(report_, "c", l, "scrapwork did not halve the sink mass");
    }
    if (i >= 4 && l.sink_mass == lay_.level(i - 4).sink_mass) {
      add_issue(report_, "c", l, "sink mass constant over four consecutive levels");
    }
    note("a, b, c: materialization rule, structural sink map, sink mass halved at scrapwork and strictly decreasing per cycle");
  }

  void check_language(const Level& l, const Level& p) {
    ++report_.checks;
    if (!std::includes(l.sublanguage.begin(), l.sublanguage.end(), p.sublanguage.begin(), p.sublanguage.end())) {
      add_issue(report_, "d", l, "sublanguage shrank");
    }
  }

  void check_coverage() {
    ++report_.checks;
    const int full = lay_.language().size();
    if (!lay_.oracle()) {
      note("e: not applicable to hand-built layerings");
      return;
    }
    const std::size_t needed = static_cast<std::size_t>(4 * std::max(full, 1)) + 1;
    if (lay_.size() <= needed) {
      note("e: prefix too short to require the full language");
      return;
    }
    if (static_cast<int>(lay_.level(needed).sublanguage.size()) != full) {
      add_issue(report_, "e", lay_.level(needed), "language not exhausted by the scheduled cycle");
    }
    note("e: every relation enters by the cycle equal to its index");
  }

  // Redundant tuples and relations outside the sublanguage must hold.
  void check_neutral(std::size_t i, const Level& l, int r, int k, std::mt19937_64& rng) {
    ++report_.checks;
    const std::uint64_t n = l.size();
    auto bad = [&](const std::uint64_t* t) {
      const bool redundant = has_repeat(t, k);
      if ((redundant || !l.in_sublanguage(r)) && !lay_.holds(i, r, t, k)) {
        add_issue(report_, "g", l,
                  lay_.language()[r].name + " fails on " + std::string(redundant ? "redundant " : "") + "tuple " +
                      tuple_text(t, k) + (l.in_sublanguage(r) ? "" : " outside the sublanguage"));
        return true;
      }
      return false;
    };
    if (power_or_max(n, k) <= opt_.tuple_budget) {
      std::vector<std::uint64_t> t(k, 0);
      if (k == 0 || n == 0) return;
      while (true) {
        if (bad(t.data())) return;
        int a = k - 1;
        for (; a >= 0; --a) {
          if (++t[a] < n) break;
          t[a] = 0;
        }
        if (a < 0) break;
      }
      note("g: exhaustive over all tuples of small levels");
      return;
    }
    if (l.relations) {
      ++report_.unverified;
      return;
    }
    std::uniform_int_distribution<std::uint64_t> pick(0, n - 1);
    std::vector<std::uint64_t> t(k);
    for (std::uint64_t s = 0; s < opt_.spot_checks && k > 0; ++s) {
      for (auto& x : t) x = pick(rng);
      if (k > 1) t[1] = t[0];
      if (bad(t.data())) return;
    }
    note("g: materialization rule with random replays on large levels");
  }

  void check_preservation(std::size_t i, const Level& l, const Level& p, int r, int k, std::mt19937_64& rng) {
    ++report_.checks;
    const std::uint64_t n = l.size();
    std::vector<std::uint64_t> img(std::max(k, 1));
    bool failed = false;
    auto compare = [&](const std::uint64_t* t) {
      for (int a = 0; a < k; ++a) {
        img[a] = lay_.parent(i, t[a]);
        if (img[a] == kSink) return true;
      }
      if (has_repeat(img.data(), k)) return true;
      if (lay_.holds(i, r, t, k) != lay_.holds(i - 1, r, img.data(), k)) {
        add_issue(report_, "f", l,
                  lay_.language()[r].name + " changes on " + tuple_text(t, k) + " over " + tuple_text(img.data(), k));
        failed = true;
        return false;
      }
      return true;
    };
    if (power_or_max(n, k) <= opt_.tuple_budget) {
      for_each_distinct_tuple(n, k, compare);
      note("f: exhaustive over non-redundant tuples with non-redundant sink-free images on small levels");
      return;
    }
    // Large level: structural certificate plus random replays.
    if (l.map == MapKind::kPrefix && !l.relations && !p.relations) {
      note("f: identity on inherited elements for prefix maps");
    } else if (l.map == MapKind::kSplit && !l.relations && lay_.oracle()) {
      const auto cert = lay_.oracle()->certify_duplicate(p.carrier, l.carrier);
      if (!cert) {
        ++report_.unverified;
      } else if (!*cert) {
        add_issue(report_, "f", l, "duplication certificate rejected");
      } else {
        note("f: duplication certificate on split levels");
      }
    } else {
      ++report_.unverified;
    }
    if (k == 0 || failed) return;
    std::vector<std::uint64_t> t(k);
    for (std::uint64_t s = 0; s < opt_.spot_checks; ++s) {
      if (l.map == MapKind::kSplit) {
        // Random alpha-selection over distinct parents.
        std::uniform_int_distribution<std::uint64_t> pick(0, p.size() - 1);
        for (int a = 0; a < k; ++a) t[a] = 2 * pick(rng) + (rng() & 1U);
      } else {
        std::uniform_int_distribution<std::uint64_t> pick(0, n - 1);
        for (int a = 0; a < k; ++a) t[a] = pick(rng);
      }
      if (has_repeat(t.data(), k)) continue;
      if (!compare(t.data())) return;
    }
  }

  void check_stage(std::size_t i, const Level& l, const Level& p) {
    ModelOracle* oracle = lay_.oracle();
    if (!oracle) return;
    ++report_.checks;
    switch (l.stage) {
      case StageKind::kSplit: {
        const auto cert = oracle->certify_duplicate(p.carrier, l.carrier);
        if (cert && !*cert) add_issue(report_, "split", l, "duplication certificate rejected");
        if (p.size() <= static_cast<std::uint64_t>(oracle->bounds().duplicate_check_k)) {
          std::vector<Handle> b = p.carrier->materialize(), a0, a1;
          for (std::uint64_t q = 0; q < p.size(); ++q) {
            a0.push_back(l.carrier->at(2 * q));
            a1.push_back(l.carrier->at(2 * q + 1));
          }
          if (!verify_duplicate_exhaustive(*oracle, b, a0, a1)) {
            add_issue(report_, "split", l, "an alpha-selection changes the type");
          }
          note("split: all alpha-selections re-verified on small carriers");
        } else if (!cert) {
          ++report_.unverified;
        }
        break;
      }
      case StageKind::kSatisfy: {
        if (l.served < 0) break;
        const auto& s = lay_.theory().sentences[l.served];
        const auto cert = oracle->certify_witnesses(p.carrier, s, l.carrier);
        if (cert && !*cert) add_issue(report_, "satisfy", l, "witness certificate rejected");
        const int k = s.arity();
        const std::uint64_t work = power_or_max(p.size(), k);
        if (work != ~std::uint64_t{0} && work * std::max<std::uint64_t>(l.size(), 1) <= opt_.tuple_budget) {
          std::vector<Handle> env(k + 1);
          std::vector<std::uint64_t> x(k, 0);
          const std::uint64_t pn = p.size();
          bool all = true;
          for (std::uint64_t t = 0; t < work && all; ++t) {
            for (int a = 0; a < k; ++a) env[a] = p.carrier->at(x[a]);
            bool found = false;
            for (std::uint64_t y = 0; y < l.size() && !found; ++y) {
              env[k] = l.carrier->at(y);
              found = eval_sentence_at(*oracle, s, env);
            }
            if (!found) {
              all = false;
              add_issue(report_, "satisfy", l, "a parameter tuple has no witness");
            }
            for (int a = k - 1; a >= 0; --a) {
              if (++x[a] < pn) break;
              x[a] = 0;
            }
          }
          note("satisfy: every parameter tuple re-checked on small carriers");
        } else if (!cert) {
          ++report_.unverified;
        }
        break;
      }
      case StageKind::kOmit: {
        if (l.served < 0) break;
        if (oracle->type_realized(l.carrier, lay_.omitted()[l.served], l.sublanguage)) {
          add_issue(report_, "omit", l, "omitted type is realized");
        }
        break;
      }
      default:
        break;
    }
    (void)i;
  }

  const Layering& lay_;
  const ValidateOptions& opt_;
  ValidationReport& report_;
};

}  // namespace

ValidationReport validate_mass(const Layering& layering) {
  ValidationReport report;
  check_masses(layering, report);
  return report;
}

ValidationReport validate_regular(const Layering& layering, const ValidateOptions& options) {
  ValidationReport report;
  check_masses(layering, report);
  RegularityChecker(layering, options, report).run();
  return report;
}

nlohmann::json ContinuityReport::to_json() const {
  nlohmann::json j;
  j["ok"] = ok();
  j["elements"] = entries.size();
  j["unwitnessed"] = unwitnessed;
  j["entries"] = nlohmann::json::array();
  for (const auto& e : entries) {
    nlohmann::json x{{"level", e.level}, {"position", e.position}};
    if (e.witness_level) {
      x["witness_level"] = *e.witness_level;
    } else {
      x["witness_level"] = "unwitnessed within built prefix";
    }
    j["entries"].push_back(std::move(x));
  }
  return j;
}

namespace {

// Whether two disjoint subsets of the masses each exceed bound.
bool two_heavy_parts(std::vector<Rational> masses, const Rational& bound) {
  std::sort(masses.begin(), masses.end(), std::greater<>());
  if (masses.size() <= 12) {
    std::function<bool(std::size_t, Rational, Rational)> rec = [&](std::size_t i, Rational x, Rational y) {
      if (x > bound && y > bound) return true;
      if (i == masses.size()) return false;
      return rec(i + 1, x + masses[i], y) || rec(i + 1, x, y + masses[i]) || rec(i + 1, x, y);
    };
    return rec(0, 0, 0);
  }
  Rational x = 0, y = 0;
  for (const auto& m : masses) {
    if (x <= bound) {
      x += m;
    } else {
      y += m;
    }
  }
  return x > bound && y > bound;
}

}  // namespace

ContinuityReport validate_continuity(const Layering& layering, int first_levels, std::uint64_t element_limit) {
  ContinuityReport report;
  constexpr std::size_t kFiberCap = 64;
  for (std::size_t i = 0; i < layering.size(); ++i) {
    const Level& l = layering.level(i);
    if (l.index >= first_levels) break;
    if (l.size() > element_limit) continue;
    for (std::uint64_t pos = 0; pos < l.size(); ++pos) {
      ContinuityEntry entry{l.index, pos, std::nullopt};
      const Rational bound = layering.mass(i, pos) / 3;
      std::vector<std::uint64_t> fiber{pos};
      for (std::size_t j = i + 1; j < layering.size() && fiber.size() <= kFiberCap; ++j) {
        const Level& lj = layering.level(j);
        std::vector<std::uint64_t> next;
        switch (lj.map) {
          case MapKind::kPrefix:
            next = fiber;
            break;
          case MapKind::kSplit:
            for (auto q : fiber) {
              next.push_back(2 * q);
              next.push_back(2 * q + 1);
            }
            break;
          default: {
            std::set<std::uint64_t> in(fiber.begin(), fiber.end());
            for (std::uint64_t q = 0; q < lj.size(); ++q) {
              if (in.count(lj.parents[q])) next.push_back(q);
            }
            break;
          }
        }
        fiber = std::move(next);
        std::vector<Rational> masses;
        for (auto q : fiber) masses.push_back(layering.mass(j, q));
        if (two_heavy_parts(masses, bound)) {
          entry.witness_level = lj.index;
          break;
        }
      }
      if (!entry.witness_level) ++report.unwitnessed;
      report.entries.push_back(entry);
    }
  }
  return report;
}

std::optional<Rational> level_t_full(const Layering& layering, std::size_t i, const FiniteStructure& pattern,
                                     std::uint64_t budget) {
  const auto rel_map = relation_map(pattern.language(), layering.language());
  const auto groups = detail::hom_constraints(pattern);
  const int n = pattern.size();
  const Level& l = layering.level(i);
  std::uint64_t pos_args[kMaxArity];
  for (const auto& c : groups.back()) {
    if (layering.holds(i, rel_map[c.relation], pos_args, 0) != c.want) return Rational(0);
  }
  if (n == 0) return Rational(1);
  const std::uint64_t size = l.size();
  std::vector<std::uint64_t> f(n);
  std::vector<Rational> weight(n + 1);
  weight[0] = 1;
  Rational total = 0;
  std::uint64_t work = 0;
  bool exhausted = false;
  std::function<void(int)> rec = [&](int v) {
    for (std::uint64_t a = 0; a <= size && !exhausted; ++a) {
      if (++work > budget) {
        exhausted = true;
        return;
      }
      f[v] = a == size ? kSink : a;
      bool ok = true;
      for (const auto& c : groups[v]) {
        const int k = static_cast<int>(c.args.size());
        for (int t = 0; t < k; ++t) pos_args[t] = f[c.args[t]];
        if (layering.holds(i, rel_map[c.relation], pos_args, k) != c.want) {
          ok = false;
          break;
        }
      }
      if (!ok) continue;
      weight[v + 1] = weight[v] * layering.mass(i, f[v]);
      if (v + 1 == n) {
        total += weight[v + 1];
      } else {
        rec(v + 1);
      }
    }
  };
  rec(0);
  if (exhausted) return std::nullopt;
  return total;
}

}  // namespace layerlimit
