#include "layerlimit/syntax.hpp"

#include "layerlimit/structures.hpp"

#include <algorithm>
#include <functional>
#include <sstream>

namespace layerlimit {

// ---- RelationalLanguage ----

RelationalLanguage::RelationalLanguage(std::vector<RelationSymbol> relations) {
  for (auto& r : relations) add(std::move(r.name), r.arity);
}

int RelationalLanguage::add(std::string name, int arity) {
  if (arity < 0 || arity > kMaxArity) {
    throw Error("language", "arity of '" + name + "' out of range: " + std::to_string(arity));
  }
  if (index_.count(name) != 0) throw Error("language", "duplicate relation name '" + name + "'");
  const int id = size();
  index_.emplace(name, id);
  relations_.push_back({std::move(name), arity});
  return id;
}

std::optional<int> RelationalLanguage::find(std::string_view name) const {
  auto it = index_.find(std::string(name));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

int RelationalLanguage::index_of(std::string_view name) const {
  auto id = find(name);
  if (!id) throw Error("unknown-relation", "unknown relation '" + std::string(name) + "'");
  return *id;
}

int RelationalLanguage::max_arity() const {
  int m = 0;
  for (const auto& r : relations_) m = std::max(m, r.arity);
  return m;
}

bool RelationalLanguage::is_sublanguage_of(const RelationalLanguage& other) const {
  for (const auto& r : relations_) {
    auto id = other.find(r.name);
    if (!id || other[*id].arity != r.arity) return false;
  }
  return true;
}

// ---- Formula ----

Formula Formula::atom(int relation, std::vector<int> args) {
  Formula f;
  f.kind = NodeKind::kAtom;
  f.relation = relation;
  f.vars = std::move(args);
  return f;
}

Formula Formula::eq(int a, int b) {
  Formula f;
  f.kind = NodeKind::kEq;
  f.vars = {a, b};
  return f;
}

Formula Formula::negate(Formula inner) {
  Formula f;
  f.kind = NodeKind::kNot;
  f.children.push_back(std::move(inner));
  return f;
}

Formula Formula::conj(Formula a, Formula b) {
  Formula f;
  f.kind = NodeKind::kAnd;
  f.children.push_back(std::move(a));
  f.children.push_back(std::move(b));
  return f;
}

Formula Formula::disj(Formula a, Formula b) {
  return negate(conj(negate(std::move(a)), negate(std::move(b))));
}

Formula Formula::implies(Formula a, Formula b) { return negate(conj(std::move(a), negate(std::move(b)))); }

Formula Formula::exists(int var, Formula body) {
  Formula f;
  f.kind = NodeKind::kExists;
  f.vars = {var};
  f.children.push_back(std::move(body));
  return f;
}

Formula Formula::forall(int var, Formula body) { return negate(exists(var, negate(std::move(body)))); }

Formula Formula::conj_all(std::vector<Formula> parts, int fallback_var) {
  if (parts.empty()) return eq(fallback_var, fallback_var);
  Formula acc = std::move(parts[0]);
  for (std::size_t i = 1; i < parts.size(); ++i) acc = conj(std::move(acc), std::move(parts[i]));
  return acc;
}

Formula Formula::disj_all(std::vector<Formula> parts) {
  if (parts.empty()) throw Error("formula", "empty disjunction");
  Formula acc = std::move(parts[0]);
  for (std::size_t i = 1; i < parts.size(); ++i) acc = disj(std::move(acc), std::move(parts[i]));
  return acc;
}

bool Formula::is_quantifier_free() const {
  if (kind == NodeKind::kExists) return false;
  return std::all_of(children.begin(), children.end(),
                     [](const Formula& c) { return c.is_quantifier_free(); });
}

namespace {

void collect_free(const Formula& f, std::vector<int>& bound, std::vector<int>& out) {
  auto note = [&](int v) {
    if (std::find(bound.begin(), bound.end(), v) != bound.end()) return;
    if (std::find(out.begin(), out.end(), v) == out.end()) out.push_back(v);
  };
  switch (f.kind) {
    case NodeKind::kAtom:
    case NodeKind::kEq:
      for (int v : f.vars) note(v);
      return;
    case NodeKind::kNot:
    case NodeKind::kAnd:
      for (const auto& c : f.children) collect_free(c, bound, out);
      return;
    case NodeKind::kExists:
      bound.push_back(f.vars[0]);
      collect_free(f.children[0], bound, out);
      bound.pop_back();
      return;
  }
}

}  // namespace

std::vector<int> Formula::free_variables() const {
  std::vector<int> bound;
  std::vector<int> out;
  collect_free(*this, bound, out);
  return out;
}

int Formula::max_variable() const {
  int m = -1;
  for (int v : vars) m = std::max(m, v);
  for (const auto& c : children) m = std::max(m, c.max_variable());
  return m;
}

bool Formula::mentions_variable(int var) const {
  if (std::find(vars.begin(), vars.end(), var) != vars.end()) return true;
  return std::any_of(children.begin(), children.end(),
                     [var](const Formula& c) { return c.mentions_variable(var); });
}

void Formula::collect_relations(std::vector<int>& out) const {
  if (kind == NodeKind::kAtom) out.push_back(relation);
  for (const auto& c : children) c.collect_relations(out);
}

Formula substitute(const Formula& f, const std::vector<int>& var_map) {
  Formula g = f;
  for (int& v : g.vars) v = var_map.at(v);
  for (auto& c : g.children) c = substitute(c, var_map);
  return g;
}

// ---- PithySentence ----

namespace {

bool witness_only_trivial(const Formula& f, int w) {
  if (f.kind == NodeKind::kEq) return (f.vars[0] == w) == (f.vars[1] == w);
  if (f.kind == NodeKind::kAtom) {
    return std::find(f.vars.begin(), f.vars.end(), w) == f.vars.end();
  }
  return std::all_of(f.children.begin(), f.children.end(),
                     [w](const Formula& c) { return witness_only_trivial(c, w); });
}

}  // namespace

bool PithySentence::is_universal() const { return witness_only_trivial(matrix, witness_var()); }

std::vector<std::string> PithySentence::names() const {
  std::vector<std::string> out = universals;
  out.push_back(witness);
  return out;
}

// ---- Non-redundancy ----

namespace {

// Calls visit(block_of) for every set partition of n items, encoded as a
// restricted growth string.
void for_each_partition(int n, const std::function<bool(const std::vector<int>&)>& visit) {
  std::vector<int> block(n, 0);
  std::function<bool(int, int)> rec = [&](int i, int used) -> bool {
    if (i == n) return visit(block);
    for (int b = 0; b <= used && b < n; ++b) {
      block[i] = b;
      if (!rec(i + 1, std::max(used, b + 1))) return false;
    }
    return true;
  };
  if (n == 0) {
    visit(block);
    return;
  }
  rec(0, 0);
}

void collect_atoms(const Formula& f, std::vector<const Formula*>& out) {
  if (f.kind == NodeKind::kAtom) out.push_back(&f);
  for (const auto& c : f.children) collect_atoms(c, out);
}

}  // namespace

NonRedundancyResult check_nonredundant(const NamedFormula& formula, const RelationalLanguage& language) {
  if (!formula.root.is_quantifier_free()) {
    throw Error("formula", "check_nonredundant expects a quantifier-free formula");
  }
  NonRedundancyResult result;
  const std::vector<int> free = formula.free_variables();
  const int n = static_cast<int>(free.size());
  if (n <= 1) return result;

  std::vector<const Formula*> atoms;
  collect_atoms(formula.root, atoms);
  std::vector<int> env(std::max(formula.root.max_variable() + 1, 1), 0);

  for_each_partition(n, [&](const std::vector<int>& block) {
    int blocks = 0;
    for (int b : block) blocks = std::max(blocks, b + 1);
    if (blocks == n) return true;  // all distinct: not a collapsing pattern
    for (int i = 0; i < n; ++i) env[free[i]] = block[i];

    // Merged atoms: distinct (relation, block tuple) pairs.
    std::vector<std::pair<int, std::vector<int>>> merged;
    for (const Formula* a : atoms) {
      std::vector<int> args;
      for (int v : a->vars) args.push_back(env[v]);
      std::pair<int, std::vector<int>> key{a->relation, std::move(args)};
      if (std::find(merged.begin(), merged.end(), key) == merged.end()) merged.push_back(std::move(key));
    }
    const int m = static_cast<int>(merged.size());
    if (m > 24) throw Error("bound", "too many merged atoms for exhaustive non-redundancy check");
    for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << m); ++mask) {
      auto holds = [&](int rel, const int* args, int k) {
        for (int j = 0; j < m; ++j) {
          if (merged[j].first != rel) continue;
          if (std::equal(args, args + k, merged[j].second.begin(), merged[j].second.end())) {
            return ((mask >> j) & 1U) != 0;
          }
        }
        return false;
      };
      if (!eval_qf(formula.root, env.data(), holds)) continue;
      result.nonredundant = false;
      result.partition = block;
      std::ostringstream pattern;
      bool first = true;
      for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) {
          if (block[i] != block[j]) continue;
          pattern << (first ? "" : ", ") << formula.names[free[i]] << "=" << formula.names[free[j]];
          first = false;
        }
      }
      for (int j = 0; j < m; ++j) {
        std::ostringstream atom;
        atom << language[merged[j].first].name << "(";
        for (std::size_t t = 0; t < merged[j].second.size(); ++t) {
          // Name a merged block after its first variable.
          const int b = merged[j].second[t];
          int rep = 0;
          while (block[rep] != b) ++rep;
          atom << (t ? "," : "") << formula.names[free[rep]];
        }
        atom << ")";
        const bool value = ((mask >> j) & 1U) != 0;
        result.valuation.emplace_back(atom.str(), value);
        pattern << "; " << (value ? "" : "!") << atom.str();
      }
      result.pattern = pattern.str();
      return false;
    }
    return true;
  });
  return result;
}

// ---- Evaluation on finite structures ----

bool evaluate(const NamedFormula& formula, const RelationalLanguage& formula_language,
              const FiniteStructure& structure, const std::map<std::string, int>& assignment) {
  if (!formula.root.is_quantifier_free()) {
    throw Error("formula", "evaluate expects a quantifier-free formula");
  }
  std::vector<int> rel_map(formula_language.size(), -1);
  std::vector<int> used;
  formula.root.collect_relations(used);
  for (int r : used) {
    const auto& sym = formula_language[r];
    auto id = structure.language().find(sym.name);
    if (!id || structure.language()[*id].arity != sym.arity) {
      throw Error("unknown-relation", "relation '" + sym.name + "' is not in the structure's language");
    }
    rel_map[r] = *id;
  }
  std::vector<int> env(std::max(formula.root.max_variable() + 1, 1), -1);
  for (int v : formula.free_variables()) {
    const std::string& name = formula.names.at(v);
    auto it = assignment.find(name);
    if (it == assignment.end()) throw Error("unbound-variable", "variable '" + name + "' is not assigned");
    if (it->second < 0 || it->second >= structure.size()) {
      throw Error("range", "variable '" + name + "' assigned to an element outside the universe");
    }
    env[v] = it->second;
  }
  return eval_qf(formula.root, env.data(), [&](int rel, const int* args, int n) {
    return structure.holds(rel_map[rel], std::span<const int>(args, n));
  });
}

}  // namespace layerlimit
