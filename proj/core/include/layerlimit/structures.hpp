#pragma once

#include "layerlimit/rational.hpp"
#include "layerlimit/syntax.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <functional>
#include <set>
#include <span>
#include <vector>

namespace layerlimit {

// Finite relational structure on {0..size-1}. Tables of small arity are
// dense bitsets; larger ones fall back to ordered tuple sets.
class FiniteStructure {
 public:
  FiniteStructure() = default;
  FiniteStructure(RelationalLanguage language, int size);

  const RelationalLanguage& language() const { return language_; }
  int size() const { return size_; }

  bool holds(int relation, std::span<const int> tuple) const;
  void set(int relation, std::span<const int> tuple, bool value = true);
  bool holds(int relation, std::initializer_list<int> tuple) const {
    return holds(relation, std::span<const int>(tuple.begin(), tuple.size()));
  }
  void set(int relation, std::initializer_list<int> tuple, bool value = true) {
    set(relation, std::span<const int>(tuple.begin(), tuple.size()), value);
  }

  // All tuples in the table of relation, in lexicographic order.
  std::vector<std::vector<int>> tuples(int relation) const;
  std::size_t count(int relation) const;
  // True when every relation holds only on tuples with pairwise-distinct entries.
  bool is_nonredundant() const;

  bool operator==(const FiniteStructure& other) const;

 private:
  struct Table {
    bool dense = true;
    std::vector<std::uint64_t> bits;   // dense: bit index = tuple in base size
    std::set<std::vector<int>> sparse;
  };
  std::size_t encode(std::span<const int> tuple) const;
  void check_tuple(int relation, std::span<const int> tuple) const;

  RelationalLanguage language_;
  int size_ = 0;
  std::vector<Table> tables_;
};

// A finite structure with a strictly positive exact probability mass.
struct WeightedStructure {
  FiniteStructure structure;
  std::vector<Rational> mass;

  // Throws unless masses are positive and sum to one.
  void validate() const;
  static WeightedStructure uniform(FiniteStructure s);
};

// Canonical quantifier-free type of a tuple. For every relation of the
// sublanguage (in its order) and every argument pattern over tuple positions
// (in lexicographic order) one bit records the literal that holds.
struct QfType {
  int arity = 0;
  std::vector<int> equality;  // first-occurrence block id per position
  std::vector<std::string> relations;
  std::vector<std::uint8_t> bits;
  bool operator==(const QfType&) const = default;
  auto operator<=>(const QfType&) const = default;
  // Literal strings such as "E(x1,x2)", "!E(x2,x1)", "x1!=x2".
  std::vector<std::string> literals() const;
};

QfType qf_type_of(const FiniteStructure& structure, std::span<const int> tuple,
                  const RelationalLanguage& sublanguage);

// Maps a sublanguage onto relation indices of a structure, by name.
std::vector<int> relation_map(const RelationalLanguage& sub, const RelationalLanguage& ambient);

// Every map pattern -> target preserving all sublanguage relations and
// non-relations. Maps are listed in lexicographic order.
std::vector<std::vector<int>> enumerate_full_homs(const FiniteStructure& pattern, const FiniteStructure& target,
                                                  const RelationalLanguage& sublanguage);

// Backtracking enumeration of full homomorphisms against any target exposing
// size() and holds(rel, const int* args, int n). Relations are indices into
// the target's numbering as given by rel_map[pattern relation]. visit is
// called with each complete map; returning false stops the search.
template <class Target>
void for_each_full_hom(const FiniteStructure& pattern, const Target& target, const std::vector<int>& rel_map,
                       const std::function<bool(const std::vector<int>&)>& visit);

// Weighted full homomorphism density.
Rational t_full(const FiniteStructure& pattern, const WeightedStructure& target,
                const RelationalLanguage& sublanguage);

// All automorphisms, as permutation vectors, in lexicographic order.
std::vector<std::vector<int>> automorphisms(const FiniteStructure& structure, int bound = 9);

FiniteStructure induced_substructure(const FiniteStructure& structure, const std::vector<int>& subset);

// JSON format {"language":[["E",2]],"size":n,"relations":{"E":[[0,1]]},"mass":["1/2",...]}.
nlohmann::json structure_to_json(const FiniteStructure& s);
nlohmann::json weighted_to_json(const WeightedStructure& s);
FiniteStructure structure_from_json(const nlohmann::json& j);
// Missing mass yields the uniform mass.
WeightedStructure weighted_from_json(const nlohmann::json& j);

// Small constructors used by tests, examples and the CLI.
FiniteStructure make_graph(int n, const std::vector<std::pair<int, int>>& edges, bool symmetric = true,
                           const std::string& name = "E");

// ---- template implementation ----

namespace detail {

struct HomConstraint {
  int relation;  // pattern relation index
  std::vector<int> args;
  bool want;     // whether the pattern holds on args
};

// Groups constraints by the last pattern vertex they mention; the final
// group holds the 0-ary relations.
std::vector<std::vector<HomConstraint>> hom_constraints(const FiniteStructure& pattern);

}  // namespace detail

template <class Target>
void for_each_full_hom(const FiniteStructure& pattern, const Target& target, const std::vector<int>& rel_map,
                       const std::function<bool(const std::vector<int>&)>& visit) {
  const int n = pattern.size();
  const int m = target.size();
  const auto constraints = detail::hom_constraints(pattern);
  // 0-ary relations are checked up front.
  for (const auto& c : constraints.back()) {
    if (target.holds(rel_map[c.relation], static_cast<const int*>(nullptr), 0) != c.want) return;
  }
  std::vector<int> f(n, 0);
  int args[kMaxArity];
  auto ok_at = [&](int v) {
    for (const auto& c : constraints[v]) {
      const int k = static_cast<int>(c.args.size());
      for (int i = 0; i < k; ++i) args[i] = f[c.args[i]];
      if (target.holds(rel_map[c.relation], static_cast<const int*>(args), k) != c.want) return false;
    }
    return true;
  };
  if (n == 0) {
    visit(f);
    return;
  }
  std::function<bool(int)> rec = [&](int v) -> bool {
    for (int a = 0; a < m; ++a) {
      f[v] = a;
      if (!ok_at(v)) continue;
      if (v + 1 == n) {
        if (!visit(f)) return false;
      } else if (!rec(v + 1)) {
        return false;
      }
    }
    return true;
  };
  rec(0);
}

}  // namespace layerlimit
