#pragma once

#include "layerlimit/structures.hpp"
#include "layerlimit/syntax.hpp"

#include <nlohmann/json.hpp>

#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace layerlimit {

// Canonical form of a first-order formula: free variables are renumbered
// 0..n-1 in first-occurrence order and named x1..xn; a variable bound at
// nesting depth d gets id n+d and name y(d+1). Alpha-equivalent formulas
// share a canonical form.
NamedFormula canonicalize(const NamedFormula& formula);

// Immediate structure of a fragment formula. child_vars[c][j] is the index
// of the parent's free variable that child c's canonical variable j refers
// to, or -1 for the variable bound by an exists node.
struct FragmentNode {
  NodeKind kind = NodeKind::kAtom;
  int arity = 0;
  std::vector<int> children;
  std::vector<std::vector<int>> child_vars;
  bool vacuous = false;  // exists node whose variable is not free in its body
};

// Finite subformula-closed set of first-order formulas, stored canonically
// with every subformula listed before the formulas that contain it.
class Fragment {
 public:
  // Validates that formulas are closed under subformulas.
  Fragment(RelationalLanguage base, const std::vector<NamedFormula>& formulas);
  // Smallest fragment containing the generators.
  static Fragment generate(RelationalLanguage base, const std::vector<NamedFormula>& generators);

  const RelationalLanguage& base_language() const { return base_; }
  int size() const { return static_cast<int>(formulas_.size()); }
  const NamedFormula& formula(int i) const { return formulas_[i]; }
  const FragmentNode& node(int i) const { return nodes_[i]; }
  int arity(int i) const { return nodes_[i].arity; }
  std::optional<int> find(const NamedFormula& f) const;
  std::string text(int i) const { return print_formula(formulas_[i].root, base_, formulas_[i].names); }

 private:
  Fragment() = default;
  int insert_closed(const NamedFormula& canonical, bool add_children);

  RelationalLanguage base_;
  std::vector<NamedFormula> formulas_;
  std::vector<FragmentNode> nodes_;
  std::unordered_map<std::string, int> index_;
};

// (formula, iota, kappa) with iota: [n] -> [r] surjective and kappa a section
// of iota. Stored 0-based.
struct MorleyTriple {
  int formula = 0;
  std::vector<int> iota;
  std::vector<int> kappa;
  int rank() const { return static_cast<int>(kappa.size()); }
};

struct MorleyLanguage {
  RelationalLanguage language;        // relation q is defined by triples[q]
  std::vector<MorleyTriple> triples;
  std::vector<std::vector<int>> by_formula;

  // [{"relation":..., "formula":..., "iota":[...], "kappa":[...], "arity":r}]
  // with 1-based iota and kappa values.
  nlohmann::json index_json(const Fragment& fragment) const;
};

// All surjections [n] -> [r] for r = 1..n (or the empty map for n = 0), each
// with all of its sections.
MorleyLanguage build_LA(const Fragment& fragment);

// R_eta over the variables x1..xn of the canonical formula.
NamedFormula R_formula(const Fragment& fragment, const MorleyLanguage& la, int formula_index);
// R_eta with its variables replaced by vars (vars[j] replaces xj).
Formula R_apply(const Fragment& fragment, const MorleyLanguage& la, int formula_index, const std::vector<int>& vars);

Theory build_ThA(const Fragment& fragment, const MorleyLanguage& la);

// Th_A plus one 0-ary assertion per sentence of T.
Theory morleyize_theory(const std::vector<NamedFormula>& sentences, const Fragment& fragment,
                        const MorleyLanguage& la);

// The unique expansion of M to L_A, restricted to L_A.
FiniteStructure morleyize_structure(const FiniteStructure& m, const Fragment& fragment, const MorleyLanguage& la);

// Evaluates a fragment formula on M with quantifiers ranging over M.
bool evaluate_fragment_formula(const Fragment& fragment, int formula_index, const FiniteStructure& m,
                               const std::vector<int>& tuple);

// Result of re-verifying a Morleyized structure.
struct MorleyCheck {
  bool ok = true;
  long checked = 0;
  std::string failure;
};

// For every fragment formula and every tuple from M (with repetition),
// checks M |= psi(a) iff M_A |= R_psi(a); also checks that M_A is
// non-redundant and satisfies every sentence of th_a.
MorleyCheck verify_morleyization(const FiniteStructure& m, const Fragment& fragment, const MorleyLanguage& la,
                                 const FiniteStructure& ma, const Theory& th_a);

// Evaluates a pithy sentence on a finite structure over the theory language.
bool satisfies(const FiniteStructure& s, const PithySentence& sentence);
bool satisfies(const FiniteStructure& s, const Theory& theory);

}  // namespace layerlimit
