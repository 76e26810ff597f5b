#pragma once

#include "layerlimit/config.hpp"
#include "layerlimit/oracle.hpp"
#include "layerlimit/structures.hpp"
#include "layerlimit/syntax.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace layerlimit {

// Elements whose orbit under the automorphisms fixing subset pointwise is a
// singleton. Throws Error("bound") when the structure exceeds bound.
std::vector<int> dcl_group(const FiniteStructure& structure, const std::vector<int>& subset, int bound = 9);

// Splits a formula's free variables into the parameters x and the witness y:
// the variable named "y" if present, otherwise the last free variable.
struct WitnessSplit {
  std::vector<int> params;
  int witness = -1;
};
WitnessSplit split_witness(const NamedFormula& formula);

struct DuplicationResult {
  bool duplicated = false;
  std::vector<Handle> params;
  Handle y = 0;
  Handle z = 0;
  std::vector<Handle> fragment;  // grown elements, in order
  std::string note;
  nlohmann::json to_json(const ModelOracle& oracle) const;
};

// Grows a fragment with fresh elements up to bound and searches it for x, y,
// z with phi(x,y), phi(x,z) and y != z. Never claims refutation.
DuplicationResult check_duplication(ModelOracle& oracle, const NamedFormula& formula, int bound);

struct ViolationReport {
  bool violation = false;
  int bound = 0;
  std::string note;
  std::uint64_t models = 0;        // models of the universal part enumerated
  std::uint64_t realizations = 0;  // (x, y) pairs satisfying phi in those models
  std::uint64_t work = 0;          // search nodes visited
  std::uint64_t digest = 0;        // hash of the enumeration trace, for replay
  std::optional<FiniteStructure> model;  // first realizing model
  std::vector<int> tuple;                // its realization: params then witness
  std::optional<FiniteStructure> counterexample;  // no-evidence: model with two witnesses
  std::vector<int> counter_tuple;                 // params, y, z
  nlohmann::json to_json() const;
};

// Bounded search for a formula with a unique witness. Enumerates every model
// of the theory's universal sentences up to size bound (or checks the given
// certificate family) and reports a violation when some model realizes
// phi and no realization has a second witness, either inside the model or in
// a one-point extension that still satisfies the universal sentences.
ViolationReport detect_violation(const Theory& theory, const NamedFormula& formula, int bound,
                                 const std::vector<FiniteStructure>* certificate = nullptr,
                                 const Bounds& bounds = {});

// Uniqueness pattern of a sentence with a genuine witness: its matrix
// conjoined with pairwise distinctness of all its variables, with the
// witness named y and the universals x1..xk.
NamedFormula uniqueness_formula(const PithySentence& sentence);

struct PrescreenResult {
  bool refused = false;
  int sentence = -1;          // first sentence with a violation
  ViolationReport report;     // its report
  nlohmann::json per_sentence = nlohmann::json::array();
  nlohmann::json to_json() const;
};

// Runs detect_violation on the uniqueness pattern of every sentence with a
// genuine witness, stopping at the first violation.
PrescreenResult prescreen_theory(const Theory& theory, int bound, const Bounds& bounds = {});

struct DclFinding {
  std::string subject;
  std::string verdict;  // trivial | nontrivial | unknown-up-to-bound
  nlohmann::json witness;
};

struct DclReport {
  std::string subject;
  std::vector<DclFinding> findings;
  nlohmann::json to_json() const;
};

}  // namespace layerlimit
