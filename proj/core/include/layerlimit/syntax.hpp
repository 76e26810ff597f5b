#pragma once

#include "layerlimit/errors.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace layerlimit {

struct RelationSymbol {
  std::string name;
  int arity = 0;
  bool operator==(const RelationSymbol&) const = default;
};

// Ordered list of relation symbols with unique names. Arity 0 is allowed.
class RelationalLanguage {
 public:
  RelationalLanguage() = default;
  explicit RelationalLanguage(std::vector<RelationSymbol> relations);

  // Appends a symbol and returns its index. Throws on a duplicate name.
  int add(std::string name, int arity);
  std::optional<int> find(std::string_view name) const;
  int index_of(std::string_view name) const;

  const RelationSymbol& operator[](int index) const { return relations_[index]; }
  int size() const { return static_cast<int>(relations_.size()); }
  bool empty() const { return relations_.empty(); }
  const std::vector<RelationSymbol>& relations() const { return relations_; }
  int max_arity() const;

  // True when every symbol of this language occurs in other with the same arity.
  bool is_sublanguage_of(const RelationalLanguage& other) const;

  bool operator==(const RelationalLanguage& other) const { return relations_ == other.relations_; }

 private:
  std::vector<RelationSymbol> relations_;
  std::unordered_map<std::string, int> index_;
};

enum class NodeKind : std::uint8_t { kAtom, kEq, kNot, kAnd, kExists };

// Formula tree over integer variable ids. Disjunction, implication and the
// universal quantifier are encoded with negation, conjunction and exists.
struct Formula {
  NodeKind kind = NodeKind::kEq;
  int relation = -1;            // kAtom: index into the ambient language
  std::vector<int> vars;        // kAtom: arguments; kEq: two sides; kExists: bound variable
  std::vector<Formula> children;

  static Formula atom(int relation, std::vector<int> args);
  static Formula eq(int a, int b);
  static Formula neq(int a, int b) { return negate(eq(a, b)); }
  static Formula negate(Formula f);
  static Formula conj(Formula a, Formula b);
  static Formula disj(Formula a, Formula b);
  static Formula implies(Formula a, Formula b);
  static Formula exists(int var, Formula body);
  static Formula forall(int var, Formula body);
  // Left-associated conjunction; an empty list yields v=v on the fallback variable.
  static Formula conj_all(std::vector<Formula> parts, int fallback_var);
  // Left-associated disjunction; parts must be non-empty.
  static Formula disj_all(std::vector<Formula> parts);

  bool operator==(const Formula&) const = default;

  bool is_quantifier_free() const;
  // Free variables in first-occurrence order.
  std::vector<int> free_variables() const;
  // Largest variable id used anywhere, or -1.
  int max_variable() const;
  bool mentions_variable(int var) const;
  // Collects relation indices used by atoms.
  void collect_relations(std::vector<int>& out) const;
};

// Applies var_map to every variable occurrence (free and bound).
Formula substitute(const Formula& f, const std::vector<int>& var_map);

// A formula together with the display names of its variable ids. Used both
// for quantifier-free formulas and for first-order fragment formulas.
struct NamedFormula {
  Formula root;
  std::vector<std::string> names;
  bool operator==(const NamedFormula&) const = default;
  std::vector<int> free_variables() const { return root.free_variables(); }
};
using QfFormula = NamedFormula;

// (forall universals)(exists witness) matrix. Variable ids 0..k-1 are the
// universals and id k is the witness.
struct PithySentence {
  std::vector<std::string> universals;
  std::string witness;
  Formula matrix;

  int arity() const { return static_cast<int>(universals.size()); }
  int witness_var() const { return arity(); }
  // True when the witness occurs only in trivial y=y atoms, so the sentence is
  // really universal.
  bool is_universal() const;
  std::vector<std::string> names() const;
  bool operator==(const PithySentence&) const = default;
};

struct Theory {
  RelationalLanguage language;
  std::vector<PithySentence> sentences;
  bool operator==(const Theory&) const = default;
};

// Finitely presented quantifier-free type: conjunction of literals in the
// variables x1..xk (ids 0..k-1).
struct QfTypeSpec {
  int arity = 0;
  std::vector<Formula> literals;
  bool operator==(const QfTypeSpec&) const = default;
};

// ---- Parsing and printing ----

Theory parse_theory(std::string_view text);
std::string print_theory(const Theory& theory);
std::string print_sentence(const PithySentence& sentence, const RelationalLanguage& language);
std::string print_formula(const Formula& f, const RelationalLanguage& language,
                          const std::vector<std::string>& names);

// Parses a single formula (quantifiers allowed when allow_quantifiers) over
// the given language. Free variables are numbered by first occurrence.
NamedFormula parse_formula(std::string_view text, const RelationalLanguage& language,
                           bool allow_quantifiers = false);

// Type file: optional `rel` headers followed by lines `type k : LIT; LIT; ...`.
// Relations declared in the file are appended to language.
std::vector<QfTypeSpec> parse_types(std::string_view text, RelationalLanguage& language);
std::string print_type(const QfTypeSpec& type, const RelationalLanguage& language);

// Fragment file: `rel` headers, then one formula per line. Lines starting with
// `axiom` mark sentences that belong to the theory T.
struct FragmentSource {
  RelationalLanguage language;
  std::vector<NamedFormula> formulas;
  std::vector<NamedFormula> axioms;
};
FragmentSource parse_fragment_source(std::string_view text);

// ---- Semantics ----

// Result of check_nonredundant. On failure the pattern describes the
// partition of the free variables and the atom valuation that satisfies the
// formula while identifying two variables.
struct NonRedundancyResult {
  bool nonredundant = true;
  std::vector<int> partition;                         // block id per free variable
  std::vector<std::pair<std::string, bool>> valuation;  // merged atom -> value
  std::string pattern;
};

NonRedundancyResult check_nonredundant(const NamedFormula& formula,
                                       const RelationalLanguage& language);

class FiniteStructure;

// Tarskian evaluation of a quantifier-free formula. Relations are matched by
// name against the structure's language.
bool evaluate(const NamedFormula& formula, const RelationalLanguage& formula_language,
              const FiniteStructure& structure, const std::map<std::string, int>& assignment);

inline constexpr int kMaxArity = 16;

// Evaluates a quantifier-free formula. env[v] is the element bound to v and
// holds(rel, args, n) answers atoms.
template <class Elem, class Holds>
bool eval_qf(const Formula& f, const Elem* env, Holds&& holds) {
  switch (f.kind) {
    case NodeKind::kAtom: {
      Elem args[kMaxArity];
      const int n = static_cast<int>(f.vars.size());
      for (int i = 0; i < n; ++i) args[i] = env[f.vars[i]];
      return holds(f.relation, static_cast<const Elem*>(args), n);
    }
    case NodeKind::kEq:
      return env[f.vars[0]] == env[f.vars[1]];
    case NodeKind::kNot:
      return !eval_qf(f.children[0], env, holds);
    case NodeKind::kAnd:
      return eval_qf(f.children[0], env, holds) && eval_qf(f.children[1], env, holds);
    case NodeKind::kExists:
      break;
  }
  throw Error("eval", "quantifier in a quantifier-free evaluation");
}

// Evaluates a first-order formula over a finite universe {0..universe-1}.
// env must have room for every variable id used in f.
template <class Holds>
bool eval_fo(const Formula& f, std::vector<int>& env, int universe, Holds&& holds) {
  switch (f.kind) {
    case NodeKind::kAtom: {
      int args[kMaxArity];
      const int n = static_cast<int>(f.vars.size());
      for (int i = 0; i < n; ++i) args[i] = env[f.vars[i]];
      return holds(f.relation, static_cast<const int*>(args), n);
    }
    case NodeKind::kEq:
      return env[f.vars[0]] == env[f.vars[1]];
    case NodeKind::kNot:
      return !eval_fo(f.children[0], env, universe, holds);
    case NodeKind::kAnd:
      return eval_fo(f.children[0], env, universe, holds) &&
             eval_fo(f.children[1], env, universe, holds);
    case NodeKind::kExists: {
      const int v = f.vars[0];
      const int saved = env[v];
      bool found = false;
      for (int a = 0; a < universe && !found; ++a) {
        env[v] = a;
        found = eval_fo(f.children[0], env, universe, holds);
      }
      env[v] = saved;
      return found;
    }
  }
  return false;
}

}  // namespace layerlimit
