#include "layerlimit/dcl.hpp"

#include "layerlimit/errors.hpp"

#include <algorithm>
#include <functional>
#include <set>

namespace layerlimit {

std::vector<int> dcl_group(const FiniteStructure& structure, const std::vector<int>& subset, int bound) {
  for (int a : subset) {
    if (a < 0 || a >= structure.size()) throw Error("range", "subset element " + std::to_string(a) + " out of range");
  }
  const auto autos = automorphisms(structure, bound);
  const int n = structure.size();
  std::vector<char> moved(n, 0);
  for (const auto& g : autos) {
    bool fixes = true;
    for (int a : subset) fixes = fixes && g[a] == a;
    if (!fixes) continue;
    for (int i = 0; i < n; ++i) {
      if (g[i] != i) moved[i] = 1;
    }
  }
  std::vector<int> out;
  for (int i = 0; i < n; ++i) {
    if (!moved[i]) out.push_back(i);
  }
  return out;
}

WitnessSplit split_witness(const NamedFormula& formula) {
  WitnessSplit s;
  const auto free = formula.free_variables();
  for (int v : free) {
    if (v < static_cast<int>(formula.names.size()) && formula.names[v] == "y") s.witness = v;
  }
  if (s.witness < 0 && !free.empty()) s.witness = free.back();
  for (int v : free) {
    if (v != s.witness) s.params.push_back(v);
  }
  return s;
}

namespace {

int env_size(const NamedFormula& f) { return std::max(f.root.max_variable() + 1, 1); }

bool structure_holds(const FiniteStructure& m, int rel, const int* args, int n) {
  return m.holds(rel, std::span<const int>(args, static_cast<std::size_t>(n)));
}

}  // namespace

DuplicationResult check_duplication(ModelOracle& oracle, const NamedFormula& formula, int bound) {
  const auto nr = check_nonredundant(formula, oracle.language());
  if (!nr.nonredundant) throw Error("precondition", "formula is not non-redundant: " + nr.pattern);
  const WitnessSplit split = split_witness(formula);
  if (split.witness < 0) throw Error("precondition", "formula has no free variable to act as the witness");
  DuplicationResult result;
  const int k = static_cast<int>(split.params.size());
  std::vector<Handle> env(env_size(formula));
  auto holds = [&oracle](int rel, const Handle* args, int n) { return oracle.holds(rel, args, n); };
  auto phi = [&](const std::vector<Handle>& x, Handle y) {
    for (int i = 0; i < k; ++i) env[split.params[i]] = x[i];
    env[split.witness] = y;
    return eval_qf(formula.root, env.data(), holds);
  };
  while (static_cast<int>(result.fragment.size()) < bound) {
    try {
      result.fragment.push_back(oracle.fresh_element(result.fragment));
    } catch (const Error& e) {
      if (e.kind() != "exhausted") throw;
      result.note = "oracle exhausted at fragment size " + std::to_string(result.fragment.size());
      break;
    }
    const auto& frag = result.fragment;
    const std::size_t f = frag.size();
    std::uint64_t total = 1;
    for (int i = 0; i < k; ++i) total *= f;
    std::vector<std::size_t> idx(k, 0);
    std::vector<Handle> x(k);
    for (std::uint64_t t = 0; t < total; ++t) {
      for (int i = 0; i < k; ++i) x[i] = frag[idx[i]];
      std::vector<Handle> witnesses;
      for (std::size_t j = 0; j < f && witnesses.size() < 2; ++j) {
        if (phi(x, frag[j])) witnesses.push_back(frag[j]);
      }
      if (witnesses.size() == 2) {
        result.duplicated = true;
        result.params = x;
        result.y = witnesses[0];
        result.z = witnesses[1];
        return result;
      }
      for (int i = k - 1; i >= 0; --i) {
        if (++idx[i] < f) break;
        idx[i] = 0;
      }
    }
  }
  if (result.note.empty()) result.note = "no two witnesses in a fragment of size " + std::to_string(bound);
  return result;
}

nlohmann::json DuplicationResult::to_json(const ModelOracle& oracle) const {
  nlohmann::json j;
  j["verdict"] = duplicated ? "duplicated" : "not-found-up-to-bound";
  j["fragment_size"] = fragment.size();
  if (duplicated) {
    auto& w = j["witness"];
    w["x"] = nlohmann::json::array();
    for (Handle h : params) w["x"].push_back(oracle.describe(h));
    w["y"] = oracle.describe(y);
    w["z"] = oracle.describe(z);
  } else {
    j["note"] = note;
  }
  return j;
}

namespace {

struct Slot {
  int relation;
  std::vector<int> tuple;
};

// Tuples of every relation grouped by their largest element; group 0 holds
// the 0-ary relations and group v+1 the tuples whose maximum is v.
std::vector<std::vector<Slot>> slot_groups(const RelationalLanguage& lang, int n) {
  std::vector<std::vector<Slot>> groups(n + 1);
  for (int r = 0; r < lang.size(); ++r) {
    const int arity = lang[r].arity;
    if (arity == 0) {
      groups[0].push_back({r, {}});
      continue;
    }
    std::vector<int> t(arity, 0);
    while (true) {
      const int mx = *std::max_element(t.begin(), t.end());
      groups[mx + 1].push_back({r, t});
      int i = arity - 1;
      for (; i >= 0; --i) {
        if (++t[i] < n) break;
        t[i] = 0;
      }
      if (i < 0) break;
    }
  }
  for (auto& g : groups) {
    std::stable_sort(g.begin(), g.end(), [](const Slot& a, const Slot& b) {
      return std::tie(a.relation, a.tuple) < std::tie(b.relation, b.tuple);
    });
  }
  return groups;
}

class ViolationSearch {
 public:
  ViolationSearch(const Theory& theory, const NamedFormula& formula, const Bounds& bounds)
      : theory_(theory), formula_(formula), bounds_(bounds), split_(split_witness(formula)) {
    for (const auto& s : theory.sentences) {
      if (s.is_universal()) universals_.push_back(&s);
    }
    env_.assign(std::max(env_size(formula), 16), 0);
  }

  ViolationReport run(int bound, const std::vector<FiniteStructure>* certificate) {
    report_.bound = bound;
    try {
      if (certificate != nullptr) {
        for (const auto& m : *certificate) {
          if (!(m.language() == theory_.language)) throw Error("certificate", "certificate model language differs");
          if (!satisfies_all_universal(m)) continue;
          if (process(m)) return finish(false);
        }
      } else {
        for (int n = 1; n <= bound; ++n) {
          FiniteStructure m(theory_.language, n);
          const auto groups = slot_groups(theory_.language, n);
          if (enumerate(m, groups, 0)) return finish(false);
        }
      }
    } catch (const Budget&) {
      report_.note = "work budget exhausted before the search completed";
      return finish(false);
    }
    if (report_.realizations == 0) {
      report_.note = "no model up to the bound realizes the formula";
      return finish(false);
    }
    report_.note = "every realization up to the bound has a unique witness";
    return finish(true);
  }

 private:
  struct Budget {};

  ViolationReport finish(bool violation) {
    report_.violation = violation;
    return report_;
  }

  void tick() {
    if (++report_.work > bounds_.dcl_work) throw Budget{};
  }

  void mix(std::uint64_t v) {
    report_.digest ^= v + 0x9e3779b97f4a7c15ULL + (report_.digest << 6) + (report_.digest >> 2);
  }

  // Checks universal instances whose largest element is v (v = -1: no
  // universal variables), over a structure of size n.
  bool satisfies_universal(const FiniteStructure& m, int v, int /*n*/) {
    if (v < 0) {
      for (const auto* s : universals_) {
        if (s->arity() == 0 && !eval_universal(m, *s, {})) return false;
      }
      return true;
    }
    for (const auto* s : universals_) {
      const int k = s->arity();
      if (k == 0) continue;
      std::vector<int> t(k, 0);
      while (true) {
        if (*std::max_element(t.begin(), t.end()) == v && !eval_universal(m, *s, t)) return false;
        int i = k - 1;
        for (; i >= 0; --i) {
          if (++t[i] <= v) break;
          t[i] = 0;
        }
        if (i < 0) break;
      }
    }
    return true;
  }

  bool satisfies_all_universal(const FiniteStructure& m) {
    for (int v = -1; v < m.size(); ++v) {
      if (!satisfies_universal(m, v, m.size())) return false;
    }
    return true;
  }

  bool eval_universal(const FiniteStructure& m, const PithySentence& s, const std::vector<int>& t) {
    std::vector<int> env(t);
    env.push_back(t.empty() ? 0 : t[0]);
    auto holds = [&m](int rel, const int* args, int n) { return structure_holds(m, rel, args, n); };
    return eval_qf(s.matrix, env.data(), holds);
  }

  bool phi(const FiniteStructure& m, const std::vector<int>& x, int y) {
    for (std::size_t i = 0; i < x.size(); ++i) env_[split_.params[i]] = x[i];
    env_[split_.witness] = y;
    auto holds = [&m](int rel, const int* args, int n) { return structure_holds(m, rel, args, n); };
    return eval_qf(formula_.root, env_.data(), holds);
  }

  // Assigns the slots of group g and onward; returns true to stop (a second
  // witness was found).
  bool enumerate(FiniteStructure& m, const std::vector<std::vector<Slot>>& groups, std::size_t g) {
    if (g == groups.size()) return process(m);
    const auto& slots = groups[g];
    for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << slots.size()); ++mask) {
      tick();
      for (std::size_t i = 0; i < slots.size(); ++i) m.set(slots[i].relation, slots[i].tuple, ((mask >> i) & 1U) != 0);
      if (!satisfies_universal(m, static_cast<int>(g) - 1, m.size())) continue;
      if (enumerate(m, groups, g + 1)) return true;
    }
    for (const auto& s : slots) m.set(s.relation, s.tuple, false);
    return false;
  }

  // Handles one model of the universal part; returns true if some
  // realization has a second witness.
  bool process(const FiniteStructure& m) {
    ++report_.models;
    const int n = m.size();
    mix(static_cast<std::uint64_t>(n));
    for (int r = 0; r < m.language().size(); ++r) {
      for (const auto& t : m.tuples(r)) {
        std::uint64_t code = static_cast<std::uint64_t>(r) + 1;
        for (int v : t) code = code * 31 + static_cast<std::uint64_t>(v) + 1;
        mix(code);
      }
    }
    const int k = static_cast<int>(split_.params.size());
    std::uint64_t total = 1;
    for (int i = 0; i < k; ++i) total *= static_cast<std::uint64_t>(n);
    std::vector<int> x(k, 0);
    for (std::uint64_t t = 0; t < total; ++t) {
      for (int y = 0; y < n; ++y) {
        tick();
        if (!phi(m, x, y)) continue;
        ++report_.realizations;
        if (!report_.model) {
          report_.model = m;
          report_.tuple = x;
          report_.tuple.push_back(y);
        }
        for (int z = 0; z < n; ++z) {
          if (z != y && phi(m, x, z)) {
            report_.counterexample = m;
            report_.counter_tuple = x;
            report_.counter_tuple.push_back(y);
            report_.counter_tuple.push_back(z);
            report_.note = "second witness inside a model of size " + std::to_string(n);
            return true;
          }
        }
        if (extend_with_second_witness(m, x, y)) return true;
      }
      for (int i = k - 1; i >= 0; --i) {
        if (++x[i] < n) break;
        x[i] = 0;
      }
    }
    return false;
  }

  bool extend_with_second_witness(const FiniteStructure& m, const std::vector<int>& x, int y) {
    const int n = m.size();
    FiniteStructure ext(m.language(), n + 1);
    for (int r = 0; r < m.language().size(); ++r) {
      for (const auto& t : m.tuples(r)) ext.set(r, t);
    }
    const auto groups = slot_groups(m.language(), n + 1);
    const auto& slots = groups[n + 1];
    for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << slots.size()); ++mask) {
      tick();
      for (std::size_t i = 0; i < slots.size(); ++i) {
        ext.set(slots[i].relation, slots[i].tuple, ((mask >> i) & 1U) != 0);
      }
      if (!phi(ext, x, n)) continue;
      if (!satisfies_universal(ext, n, n + 1)) continue;
      report_.counterexample = ext;
      report_.counter_tuple = x;
      report_.counter_tuple.push_back(y);
      report_.counter_tuple.push_back(n);
      report_.note = "second witness in a one-point extension of a model of size " + std::to_string(n);
      return true;
    }
    return false;
  }

  const Theory& theory_;
  const NamedFormula& formula_;
  const Bounds& bounds_;
  WitnessSplit split_;
  std::vector<const PithySentence*> universals_;
  std::vector<int> env_;
  ViolationReport report_;
};

}  // namespace

ViolationReport detect_violation(const Theory& theory, const NamedFormula& formula, int bound,
                                 const std::vector<FiniteStructure>* certificate, const Bounds& bounds) {
  const auto nr = check_nonredundant(formula, theory.language);
  if (!nr.nonredundant) throw Error("precondition", "formula is not non-redundant: " + nr.pattern);
  const WitnessSplit split = split_witness(formula);
  if (split.witness < 0) throw Error("precondition", "formula has no free variable to act as the witness");
  if (certificate == nullptr) {
    if (theory.language.size() > bounds.dcl_max_relations || theory.language.max_arity() > bounds.dcl_max_arity) {
      ViolationReport r;
      r.bound = bound;
      r.note = "language outside the enumeration bounds; no search performed";
      return r;
    }
  }
  ViolationSearch search(theory, formula, bounds);
  return search.run(bound, certificate);
}

nlohmann::json ViolationReport::to_json() const {
  nlohmann::json j;
  j["verdict"] = violation ? "violation" : "no-evidence";
  j["bound"] = bound;
  j["note"] = note;
  j["models"] = models;
  j["realizations"] = realizations;
  j["work"] = work;
  j["digest"] = digest;
  if (model) {
    j["model"] = structure_to_json(*model);
    j["tuple"] = tuple;
  }
  if (counterexample) {
    j["counterexample"] = structure_to_json(*counterexample);
    j["counter_tuple"] = counter_tuple;
  }
  return j;
}

NamedFormula uniqueness_formula(const PithySentence& sentence) {
  NamedFormula f;
  const int k = sentence.arity();
  for (int i = 0; i < k; ++i) f.names.push_back("x" + std::to_string(i + 1));
  f.names.push_back("y");
  std::vector<Formula> parts{sentence.matrix};
  for (int a = 0; a <= k; ++a) {
    for (int b = a + 1; b <= k; ++b) parts.push_back(Formula::neq(a, b));
  }
  f.root = Formula::conj_all(std::move(parts), k);
  return f;
}

PrescreenResult prescreen_theory(const Theory& theory, int bound, const Bounds& bounds) {
  PrescreenResult result;
  for (std::size_t i = 0; i < theory.sentences.size(); ++i) {
    const auto& s = theory.sentences[i];
    if (s.is_universal()) continue;
    const NamedFormula phi = uniqueness_formula(s);
    ViolationReport report = detect_violation(theory, phi, bound, nullptr, bounds);
    result.per_sentence.push_back({{"sentence", print_sentence(s, theory.language)},
                                   {"formula", print_formula(phi.root, theory.language, phi.names)},
                                   {"verdict", report.violation ? "violation" : "no-evidence"},
                                   {"note", report.note}});
    if (report.violation) {
      result.refused = true;
      result.sentence = static_cast<int>(i);
      result.report = std::move(report);
      return result;
    }
  }
  return result;
}

nlohmann::json PrescreenResult::to_json() const {
  nlohmann::json j;
  j["refused"] = refused;
  j["sentences"] = per_sentence;
  if (refused) {
    j["sentence"] = sentence;
    j["report"] = report.to_json();
  }
  return j;
}

nlohmann::json DclReport::to_json() const {
  nlohmann::json j;
  j["subject"] = subject;
  j["findings"] = nlohmann::json::array();
  for (const auto& f : findings) {
    j["findings"].push_back({{"subject", f.subject}, {"verdict", f.verdict}, {"witness", f.witness}});
  }
  return j;
}

}  // namespace layerlimit
