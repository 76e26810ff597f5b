#pragma once

#include "layerlimit/config.hpp"
#include "layerlimit/dcl.hpp"
#include "layerlimit/oracle.hpp"
#include "layerlimit/rational.hpp"
#include "layerlimit/structures.hpp"
#include "layerlimit/syntax.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <deque>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace layerlimit {

// Position of the sink in a level. Carrier elements are addressed by their
// position 0..size-1.
inline constexpr std::uint64_t kSink = ~std::uint64_t{0};

enum class StageKind { kSeed, kScrapwork, kSplit, kSatisfy, kOmit, kHand };
std::string to_string(StageKind kind);

// How a level maps onto the previous one.
//   kPrefix: old positions map to themselves, appended ones to the sink.
//   kSplit: position p maps to p / 2.
//   kExplicit: parents[p].
enum class MapKind { kNone, kPrefix, kSplit, kExplicit };

// One approximation. Masses are stored per class: every element carries a
// class id and all elements of a class share class_mass[id]. Stages keep the
// ids of inherited elements, so a class id means the same thing at every
// level that mentions it.
struct Level {
  int index = -1;
  StageKind stage = StageKind::kSeed;
  int cycle = -1;
  int served = -1;  // satisfy: sentence index; omit: type index
  std::string detail;
  std::vector<int> sublanguage;  // sorted relation indices
  CarrierPtr carrier;

  MapKind map = MapKind::kNone;
  std::uint64_t previous_size = 0;
  std::vector<std::uint64_t> parents;  // kExplicit only

  std::vector<Rational> class_mass;
  std::vector<std::uint64_t> class_count;
  int appended_class = -1;     // kPrefix: class of appended elements
  std::vector<int> class_ids;  // kExplicit: class per position
  Rational sink_mass;

  // Hand-built levels carry their relations verbatim instead of asking an
  // oracle.
  std::shared_ptr<const FiniteStructure> relations;

  std::uint64_t size() const { return carrier->size(); }
  bool in_sublanguage(int relation) const;
};

// A level given explicitly, for hand-built layerings.
struct HandLevel {
  StageKind stage = StageKind::kHand;
  std::vector<int> sublanguage;
  FiniteStructure relations;  // over the layering language, on the carrier
  std::vector<Rational> mass;
  Rational sink;
  std::vector<std::uint64_t> parents;  // ignored for the first level
};

struct LayeringOptions {
  Bounds bounds;
  bool prescreen = true;  // refuse theories with bounded unique-witness evidence
};

// Raised when the pre-screen finds a formula with a unique witness.
class RefusalError : public Error {
 public:
  RefusalError(const std::string& message, PrescreenResult result)
      : Error("refusal", message), result_(std::move(result)) {}
  const PrescreenResult& result() const { return result_; }

 private:
  PrescreenResult result_;
};

// Rewrites relation indices of a theory or type from one language into
// another by relation name.
Theory remap_theory(const Theory& theory, const RelationalLanguage& target);
QfTypeSpec remap_type(const QfTypeSpec& type, const RelationalLanguage& from, const RelationalLanguage& target);

// Sequence of approximations with a sink, grown lazily by the four-stage
// cycle scrapwork, split, satisfy, omit. level(0) is the seed (index -1);
// level(i) for i >= 1 is produced by stage i - 1.
class Layering {
 public:
  Layering(std::shared_ptr<ModelOracle> oracle, const Theory& theory, std::vector<QfTypeSpec> omitted,
           LayeringOptions options = {});
  static Layering from_levels(RelationalLanguage language, std::vector<HandLevel> levels);

  // Ensures stages stages past the seed exist.
  void build(int stages);
  // Ensures level(i) exists.
  void ensure(std::size_t i);

  std::size_t size() const { return levels_.size(); }
  int stages() const { return static_cast<int>(levels_.size()) - 1; }
  const Level& level(std::size_t i) const { return levels_.at(i); }
  const RelationalLanguage& language() const { return language_; }
  ModelOracle* oracle() const { return oracle_.get(); }
  const Theory& theory() const { return theory_; }
  const std::vector<QfTypeSpec>& omitted() const { return omitted_; }
  const LayeringOptions& options() const { return options_; }

  int class_of(std::size_t i, std::uint64_t pos) const;
  Rational mass(std::size_t i, std::uint64_t pos) const;
  std::uint64_t parent(std::size_t i, std::uint64_t pos) const;
  // Image of pos at level(i) under the composed map down to level(to).
  std::uint64_t project(std::size_t i, std::uint64_t pos, std::size_t to) const;
  // Materialized relation: true on tuples containing the sink, on tuples
  // with a repeated position and for relations outside the sublanguage;
  // otherwise the oracle value. Hand-built levels answer from their table.
  bool holds(std::size_t i, int relation, const std::uint64_t* pos, int n) const;
  Handle handle(std::size_t i, std::uint64_t pos) const { return levels_.at(i).carrier->at(pos); }

  Rational total_mass(std::size_t i) const;
  Rational max_element_mass(std::size_t i) const;
  // Carrier followed by the sink as one weighted structure, when the level
  // has at most limit elements.
  std::optional<WeightedStructure> materialize(std::size_t i, std::uint64_t limit = 4096) const;

  // Per level: index, stage, sublanguage, carrier handles, mass map, map to
  // the previous level. Element lists are elided above element_limit.
  nlohmann::json to_json(std::uint64_t element_limit = 4096) const;

 private:
  Layering() = default;
  void step();
  Level next_level(StageKind kind) const;
  void scrapwork(Level& next);
  void split(Level& next);
  void satisfy(Level& next);
  void omit(Level& next);

  std::shared_ptr<ModelOracle> oracle_;
  RelationalLanguage language_;
  Theory theory_;
  std::vector<QfTypeSpec> omitted_;
  LayeringOptions options_;
  std::deque<Level> levels_;
  std::size_t sentence_cursor_ = 0;
  std::size_t type_cursor_ = 0;
};

struct ValidationIssue {
  std::string condition;
  int level = 0;  // level index (-1 is the seed)
  std::string detail;
};

struct ValidationReport {
  std::vector<ValidationIssue> violations;
  std::vector<std::string> methods;  // how each check was discharged
  std::uint64_t checks = 0;
  std::uint64_t unverified = 0;  // checks skipped for lack of budget or certificate
  bool ok() const { return violations.empty(); }
  nlohmann::json to_json() const;
};

struct ValidateOptions {
  int arity = 3;                         // tuple arity bound for type preservation
  std::uint64_t tuple_budget = 250'000;  // exhaustive tuples per level and check
  std::uint64_t spot_checks = 256;       // random replays per level and relation
  std::uint64_t seed = 1;
};

// Exact mass conservation and fiber preservation for every consecutive map.
ValidationReport validate_mass(const Layering& layering);
// Regularity conditions: sink neutrality, sink mapping, sink decay, language
// monotonicity, type preservation and neutrality, plus the stage
// postconditions (duplication, witnesses, omission) and mass conservation.
ValidationReport validate_regular(const Layering& layering, const ValidateOptions& options = {});

struct ContinuityEntry {
  int level = 0;
  std::uint64_t position = 0;
  std::optional<int> witness_level;
};

struct ContinuityReport {
  std::vector<ContinuityEntry> entries;
  std::uint64_t unwitnessed = 0;
  bool ok() const { return unwitnessed == 0; }
  nlohmann::json to_json() const;
};

// For each element of the levels with index below first_levels, searches
// later levels for two disjoint fiber subsets each of mass more than a third
// of the element's mass.
ContinuityReport validate_continuity(const Layering& layering, int first_levels,
                                     std::uint64_t element_limit = 1 << 16);

// Exact t_full of a pattern against level(i) (carrier plus sink), or
// nullopt when the search exceeds budget nodes. Pattern relations are
// matched to the layering language by name.
std::optional<Rational> level_t_full(const Layering& layering, std::size_t i, const FiniteStructure& pattern,
                                     std::uint64_t budget = 20'000'000);

}  // namespace layerlimit
