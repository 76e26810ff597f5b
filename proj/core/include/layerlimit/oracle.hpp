#pragma once

#include "layerlimit/config.hpp"
#include "layerlimit/rational.hpp"
#include "layerlimit/structures.hpp"
#include "layerlimit/syntax.hpp"

#include <any>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace layerlimit {

// Opaque element identifier. Oracles allocate handles in contiguous
// batches, so handle order is creation order.
using Handle = std::uint64_t;

struct HandleRange {
  Handle first = 0;
  std::uint64_t count = 0;
};

class Carrier;
using CarrierPtr = std::shared_ptr<const Carrier>;

// Immutable ordered handle sequence. Large carriers are described
// structurally (a handle range, or a base carrier plus appended ranges) so
// levels with millions of elements cost constant memory.
class Carrier {
 public:
  enum class Kind { kExplicit, kRange, kAppend };

  static CarrierPtr empty();
  static CarrierPtr of(std::vector<Handle> handles);
  static CarrierPtr range(Handle first, std::uint64_t count);
  static CarrierPtr append(CarrierPtr base, std::vector<HandleRange> added);

  Kind kind() const { return kind_; }
  std::uint64_t size() const { return size_; }
  Handle at(std::uint64_t i) const;
  bool contains(Handle h) const;
  // Position of h, if present.
  std::optional<std::uint64_t> position(Handle h) const;
  std::vector<Handle> materialize() const;

  const CarrierPtr& base() const { return base_; }
  const std::vector<HandleRange>& ranges() const { return ranges_; }
  const std::vector<Handle>& handles() const { return handles_; }

  // Oracle-owned summary attached by the oracle that built the carrier.
  const std::any& annotation() const { return annotation_; }
  void annotate(std::any value) const { annotation_ = std::move(value); }

 private:
  Kind kind_ = Kind::kExplicit;
  std::uint64_t size_ = 0;
  std::vector<Handle> handles_;
  CarrierPtr base_;
  std::vector<HandleRange> ranges_;
  std::vector<std::uint64_t> offsets_;  // prefix sizes of ranges_
  mutable std::vector<Handle> sorted_;  // lazily built for explicit lookups
  mutable std::any annotation_;
};

struct WitnessResult {
  CarrierPtr extended;     // current followed by the new witnesses
  std::uint64_t added = 0;
  std::string method;      // how witnesses were found, for logs
};

// Interface to a countable model of the target theory. Relation indices
// refer to language(). An instance is a stateful grower: calls must be
// serialized.
class ModelOracle {
 public:
  explicit ModelOracle(RelationalLanguage language, Bounds bounds = {});
  virtual ~ModelOracle() = default;
  ModelOracle(const ModelOracle&) = delete;
  ModelOracle& operator=(const ModelOracle&) = delete;

  const RelationalLanguage& language() const { return language_; }
  const Bounds& bounds() const { return bounds_; }
  virtual std::string name() const = 0;
  // Whether relations only hold on tuples with distinct entries.
  virtual bool nonredundant() const { return true; }
  // Whether the theory duplicates quantifier-free formulas (required by the
  // layering construction).
  virtual bool has_duplication() const = 0;

  virtual bool holds(int relation, const Handle* args, int n) const = 0;
  bool holds(int relation, const std::vector<Handle>& args) const {
    return holds(relation, args.data(), static_cast<int>(args.size()));
  }
  // Printable payload of a handle ("3/4", "n5", ...).
  virtual std::string describe(Handle h) const = 0;

  virtual Handle fresh_element(const Carrier& exclude) = 0;
  // Copies carrier: a^j_l is at position 2l+j.
  virtual CarrierPtr duplicate(const CarrierPtr& enumerated) = 0;
  virtual WitnessResult pi2_witnesses(const CarrierPtr& current, const PithySentence& sentence) = 0;
  // Carrier base followed by added ranges; oracles may attach summaries.
  virtual CarrierPtr extend(const CarrierPtr& base, const std::vector<HandleRange>& added);
  // L' containing required, such that every arity-matching tuple from
  // current fails some literal of type restricted to L'.
  virtual std::vector<int> omission_certificate(const CarrierPtr& current, const QfTypeSpec& type,
                                                const std::vector<int>& required);
  // Structural certificate that copies was produced by duplicate(enumerated)
  // and so satisfies the duplication property. nullopt if not certifiable.
  virtual std::optional<bool> certify_duplicate(const CarrierPtr& enumerated, const CarrierPtr& copies) const;
  // Structural certificate that every tuple from current has a witness in
  // result. nullopt if not certifiable.
  virtual std::optional<bool> certify_witnesses(const CarrierPtr& current, const PithySentence& sentence,
                                                const CarrierPtr& extended) const;

  // Convenience forms over explicit handle lists.
  Handle fresh_element(const std::vector<Handle>& exclude);
  std::pair<std::vector<Handle>, std::vector<Handle>> duplicate(const std::vector<Handle>& enumerated);
  std::vector<Handle> pi2_witnesses(const std::vector<Handle>& current, const PithySentence& sentence);
  std::vector<int> omission_certificate(const std::vector<Handle>& current, const QfTypeSpec& type,
                                        const std::vector<int>& required);

  // Whether some tuple from current satisfies every literal of the type
  // whose relations lie in sublanguage. Default: exhaustive within budget.
  virtual bool type_realized(const CarrierPtr& current, const QfTypeSpec& type,
                             const std::vector<int>& sublanguage) const;

  // Induced structure on a list of handles.
  FiniteStructure induced(const std::vector<Handle>& handles) const;

 protected:
  Handle allocate(std::uint64_t count);
  Handle next_handle() const { return next_; }

  RelationalLanguage language_;
  Bounds bounds_;

 private:
  Handle next_ = 0;
};

// Re-verifies the duplication property by checking all 2^k alpha-selections
// on the materialized induced structure (k <= bounds.duplicate_check_k).
bool verify_duplicate_exhaustive(const ModelOracle& oracle, const std::vector<Handle>& b,
                                 const std::vector<Handle>& a0, const std::vector<Handle>& a1);

// Dense linear order without endpoints on dyadic rationals. The single
// binary relation of the language is read as <.
class DloOracle : public ModelOracle {
 public:
  using ModelOracle::duplicate;
  using ModelOracle::fresh_element;
  using ModelOracle::holds;
  using ModelOracle::omission_certificate;
  using ModelOracle::pi2_witnesses;
  explicit DloOracle(RelationalLanguage language, Bounds bounds = {});
  std::string name() const override { return "dlo"; }
  bool has_duplication() const override { return true; }
  bool holds(int relation, const Handle* args, int n) const override;
  std::string describe(Handle h) const override;
  Handle fresh_element(const Carrier& exclude) override;
  CarrierPtr duplicate(const CarrierPtr& enumerated) override;
  WitnessResult pi2_witnesses(const CarrierPtr& current, const PithySentence& sentence) override;
  CarrierPtr extend(const CarrierPtr& base, const std::vector<HandleRange>& added) override;
  std::optional<bool> certify_duplicate(const CarrierPtr& enumerated, const CarrierPtr& copies) const override;
  std::optional<bool> certify_witnesses(const CarrierPtr& current, const PithySentence& sentence,
                                        const CarrierPtr& extended) const override;
  bool type_realized(const CarrierPtr& current, const QfTypeSpec& type,
                     const std::vector<int>& sublanguage) const override;

  // Creates (or returns) the element with the given dyadic value.
  Handle make(const Rational& value);
  Rational value(Handle h) const;

  struct Impl;

 private:
  std::shared_ptr<Impl> impl_;
};

// Rado graph: naturals with the BIT adjacency, extended by symbolic
// vertices (duplicate copies and explicit witnesses) whose adjacency to
// older vertices is given by a rule.
class RadoOracle : public ModelOracle {
 public:
  using ModelOracle::duplicate;
  using ModelOracle::fresh_element;
  using ModelOracle::holds;
  using ModelOracle::omission_certificate;
  using ModelOracle::pi2_witnesses;
  explicit RadoOracle(RelationalLanguage language, Bounds bounds = {});
  std::string name() const override { return "rado"; }
  bool has_duplication() const override { return true; }
  bool holds(int relation, const Handle* args, int n) const override;
  std::string describe(Handle h) const override;
  Handle fresh_element(const Carrier& exclude) override;
  CarrierPtr duplicate(const CarrierPtr& enumerated) override;
  WitnessResult pi2_witnesses(const CarrierPtr& current, const PithySentence& sentence) override;
  std::optional<bool> certify_duplicate(const CarrierPtr& enumerated, const CarrierPtr& copies) const override;
  std::optional<bool> certify_witnesses(const CarrierPtr& current, const PithySentence& sentence,
                                        const CarrierPtr& extended) const override;

  // Handle of a natural number vertex.
  Handle natural(std::uint64_t n);
  std::optional<std::uint64_t> natural_value(Handle h) const;
  static bool bit_adjacent(std::uint64_t a, std::uint64_t b);

  struct Impl;

 private:
  std::shared_ptr<Impl> impl_;
};

// Infinite set with no structure; every relation of the language is empty.
class PureSetOracle : public ModelOracle {
 public:
  using ModelOracle::duplicate;
  using ModelOracle::fresh_element;
  using ModelOracle::holds;
  using ModelOracle::omission_certificate;
  using ModelOracle::pi2_witnesses;
  explicit PureSetOracle(RelationalLanguage language, Bounds bounds = {});
  std::string name() const override { return "pureset"; }
  bool has_duplication() const override { return true; }
  bool holds(int relation, const Handle* args, int n) const override;
  std::string describe(Handle h) const override;
  Handle fresh_element(const Carrier& exclude) override;
  CarrierPtr duplicate(const CarrierPtr& enumerated) override;
  WitnessResult pi2_witnesses(const CarrierPtr& current, const PithySentence& sentence) override;
  std::optional<bool> certify_duplicate(const CarrierPtr& enumerated, const CarrierPtr& copies) const override;
  std::optional<bool> certify_witnesses(const CarrierPtr& current, const PithySentence& sentence,
                                        const CarrierPtr& extended) const override;
  bool type_realized(const CarrierPtr& current, const QfTypeSpec& type,
                     const std::vector<int>& sublanguage) const override;

 private:
  std::map<std::uint64_t, Handle> naturals_;
  std::unordered_map<Handle, std::uint64_t> natural_of_;
};

// Oracle whose elements and relation tuples are stored explicitly. Used for
// free-amalgamation classes and finite test models.
class ExplicitOracle : public ModelOracle {
 public:
  using ModelOracle::duplicate;
  using ModelOracle::fresh_element;
  using ModelOracle::holds;
  using ModelOracle::omission_certificate;
  using ModelOracle::pi2_witnesses;
  bool holds(int relation, const Handle* args, int n) const override;
  std::string describe(Handle h) const override;
  WitnessResult pi2_witnesses(const CarrierPtr& current, const PithySentence& sentence) override;
  std::uint64_t element_count() const { return elements_; }

 protected:
  using ModelOracle::ModelOracle;
  Handle add_element();
  void set_tuple(int relation, const std::vector<Handle>& args);
  // Candidate new element relations: chooses atoms involving a new element
  // y so that matrix(x, y) holds and the result is allowed. Returns false if
  // no choice works.
  bool create_witness(const std::vector<Handle>& x, const PithySentence& sentence, Handle& out);
  // Whether adding the tuples of element h keeps the model admissible.
  virtual bool admissible_with(Handle h) const = 0;
  void drop_tuples_of(Handle h);

  std::uint64_t elements_ = 0;
  std::vector<std::unordered_set<std::string>> tables_;  // encoded tuples per relation
  static std::string key(const Handle* args, int n);
};

// Free amalgamation class given by forbidden induced non-redundant
// structures. Grows greedily and checks forbidden configurations at runtime.
class ForbidOracle : public ExplicitOracle {
 public:
  using ModelOracle::duplicate;
  using ModelOracle::fresh_element;
  using ModelOracle::holds;
  using ModelOracle::omission_certificate;
  using ModelOracle::pi2_witnesses;
  ForbidOracle(RelationalLanguage language, std::vector<FiniteStructure> forbidden, Bounds bounds = {});
  std::string name() const override { return "forbid"; }
  bool has_duplication() const override { return true; }
  Handle fresh_element(const Carrier& exclude) override;
  CarrierPtr duplicate(const CarrierPtr& enumerated) override;

 protected:
  bool admissible_with(Handle h) const override;

 private:
  std::vector<FiniteStructure> forbidden_;
};

// A fixed finite structure presented as an oracle. fresh_element fails once
// the universe is exhausted and duplication is not supported.
class FiniteModelOracle : public ExplicitOracle {
 public:
  using ModelOracle::duplicate;
  using ModelOracle::fresh_element;
  using ModelOracle::holds;
  using ModelOracle::omission_certificate;
  using ModelOracle::pi2_witnesses;
  explicit FiniteModelOracle(FiniteStructure structure, Bounds bounds = {});
  std::string name() const override { return "finite"; }
  bool nonredundant() const override { return structure_.is_nonredundant(); }
  bool has_duplication() const override { return false; }
  Handle fresh_element(const Carrier& exclude) override;
  CarrierPtr duplicate(const CarrierPtr& enumerated) override;
  WitnessResult pi2_witnesses(const CarrierPtr& current, const PithySentence& sentence) override;

 protected:
  bool admissible_with(Handle) const override { return false; }

 private:
  FiniteStructure structure_;
};

// Builds an oracle from a CLI spec: "dlo", "rado", "pureset", "forbid:FILE".
std::unique_ptr<ModelOracle> make_oracle(const std::string& spec, const RelationalLanguage& language,
                                         const Bounds& bounds = {});

// Maps the relations of a theory onto an oracle language by name.
std::vector<int> theory_to_oracle(const RelationalLanguage& theory_language, const ModelOracle& oracle);

}  // namespace layerlimit
