#pragma once

#include "layerlimit/layering.hpp"
#include "layerlimit/rational.hpp"
#include "layerlimit/structures.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace layerlimit {

// Counter-based generator: every value is a pure function of its key, so
// draws do not depend on the order in which points are refined.
class StreamRng {
 public:
  static std::uint64_t mix(std::uint64_t x);
  static std::uint64_t value(std::uint64_t seed, std::uint64_t stream, std::uint64_t step, std::uint64_t counter);
  // Uniform in [0, n) for the given key; n > 0.
  static std::uint64_t below(std::uint64_t n, std::uint64_t seed, std::uint64_t stream, std::uint64_t step);
};

// A point of the limit: positions[i] is its element at level(i) (kSink for
// the sink). Extended on demand.
struct PathPoint {
  std::vector<std::uint64_t> positions{kSink};
  std::size_t depth() const { return positions.size() - 1; }
};

// Independent points of the limit measure drawn lazily from a shared
// layering, which is grown when refinement needs deeper levels.
class SampleSession {
 public:
  // max_depth caps refinement, in stages past the seed.
  SampleSession(std::shared_ptr<Layering> layering, std::uint64_t seed, int max_depth = 160);

  std::size_t sample_point();
  std::size_t point_count() const { return points_.size(); }
  const PathPoint& point(std::size_t i) const { return points_.at(i); }
  const Layering& layering() const { return *layering_; }

  // Extends the point's path to level(depth); each step picks a child with
  // probability mass(child) / mass(parent).
  void refine(std::size_t point, std::size_t depth);

  // Refines the points until they are distinct, off the sink and the
  // relation is in the sublanguage, then answers from that level. Repeated
  // points give true. Throws Error("undecided") at the depth cap.
  bool decide_atom(int relation, const std::vector<std::size_t>& points);

  // Induced structure on points 0..n-1 over the given relations of the
  // layering language (all relations when empty). Tuples with a repeated
  // point are left false, so the output is a non-redundant structure.
  // Decisions are cached, so repeated calls agree on common atoms.
  FiniteStructure induced_structure(std::size_t n, const std::vector<int>& relations = {});

  // Deepest level used for a decision so far.
  std::size_t max_decision_depth() const { return max_decision_depth_; }

 private:
  std::uint64_t child(std::size_t point, std::size_t level, std::uint64_t parent);

  std::shared_ptr<Layering> layering_;
  std::uint64_t seed_;
  std::size_t max_depth_;
  std::vector<PathPoint> points_;
  std::map<std::pair<int, std::vector<std::size_t>>, bool> cache_;
  std::size_t max_decision_depth_ = 0;
};

// n independent mass-distributed draws from level(i), sink included, with
// the level's materialized relations among them.
FiniteStructure sample_from_level(std::shared_ptr<Layering> layering, std::size_t level, std::size_t n,
                                  std::uint64_t seed);

// Whether for every set S of at most max_subset points and every adjacency
// pattern to S some point outside S realizes the pattern.
bool realizes_all_extensions(const FiniteStructure& graph, int relation, int max_subset);

struct StatsOptions {
  std::size_t samples = 10'000;
  std::uint64_t seed = 1;
  int max_depth = 160;
  std::vector<std::size_t> tuple_a{0, 1, 2};
  std::vector<std::size_t> tuple_b{5, 3, 7};
  std::uint64_t t_full_budget = 5'000'000;  // search nodes per level and pattern
};

struct StatsReport {
  std::vector<std::string> patterns;
  std::vector<std::vector<std::optional<Rational>>> exact_by_level;  // [pattern][level]
  std::vector<double> limit_estimate;
  std::vector<double> limit_stderr;
  std::vector<bool> monotone;
  bool monotone_ok = true;
  double exchangeability_gap = 0.0;
  std::size_t samples = 0;
  std::uint64_t undecided = 0;  // samples lost to the depth cap
  nlohmann::json to_json() const;
};

// Exact t_full per built level, Monte Carlo limit estimates and the
// exchangeability gap between the induced types on tuple_a and tuple_b.
StatsReport stats_report(std::shared_ptr<Layering> layering, const std::vector<FiniteStructure>& patterns,
                         const StatsOptions& options = {});

// Induced type of the listed points, as a string key over all relations of
// the layering language whose arity fits.
std::string induced_type_key(SampleSession& session, const std::vector<std::size_t>& tuple);

}  // namespace layerlimit
