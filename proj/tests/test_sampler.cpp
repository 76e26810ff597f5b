#include "layerlimit/sampler.hpp"

#include <gtest/gtest.h>

#include "test_util.hpp"

#include <cmath>
#include <map>

using namespace layerlimit;

namespace {

std::shared_ptr<Layering> build(const std::string& oracle, const std::string& theory_file, int stages) {
  const Theory theory = parse_theory(test::read_data(theory_file));
  std::shared_ptr<ModelOracle> o = make_oracle(oracle, theory.language);
  auto lay = std::make_shared<Layering>(o, theory, std::vector<QfTypeSpec>{});
  lay->build(stages);
  return lay;
}

RelationalLanguage edge_language() {
  RelationalLanguage l;
  l.add("E", 2);
  return l;
}

// Single hand-built level with the given element masses and sink mass.
std::shared_ptr<Layering> single_level(const FiniteStructure& s, std::vector<Rational> mass, Rational sink) {
  HandLevel h;
  h.sublanguage = {0};
  h.relations = s;
  h.mass = std::move(mass);
  h.sink = sink;
  return std::make_shared<Layering>(Layering::from_levels(edge_language(), {h}));
}

// Whether |count/n - p| is within three standard deviations.
bool within_3_sigma(std::uint64_t count, std::uint64_t n, double p) {
  const double freq = static_cast<double>(count) / static_cast<double>(n);
  return std::abs(freq - p) <= 3.0 * std::sqrt(p * (1 - p) / static_cast<double>(n)) + 1e-12;
}

bool strict_total_order(const FiniteStructure& s) {
  const int n = s.size();
  for (int a = 0; a < n; ++a) {
    if (s.holds(0, {a, a})) return false;
    for (int b = 0; b < n; ++b) {
      if (a != b && s.holds(0, {a, b}) == s.holds(0, {b, a})) return false;
      for (int c = 0; c < n; ++c) {
        if (s.holds(0, {a, b}) && s.holds(0, {b, c}) && !s.holds(0, {a, c})) return false;
      }
    }
  }
  return true;
}

}  // namespace

TEST(StreamRng, PureFunctionOfKey) {
  EXPECT_EQ(StreamRng::value(1, 2, 3, 4), StreamRng::value(1, 2, 3, 4));
  EXPECT_NE(StreamRng::value(1, 2, 3, 4), StreamRng::value(1, 2, 3, 5));
  for (std::uint64_t i = 0; i < 1000; ++i) EXPECT_LT(StreamRng::below(7, 9, i, 0), 7u);
}

TEST(SamplePoint, DeterministicUnderSeed) {
  auto lay = build("dlo", "theories/dlo.theory", 12);
  SampleSession a(lay, 42);
  SampleSession b(lay, 42);
  for (int i = 0; i < 20; ++i) {
    a.sample_point();
    b.sample_point();
    a.refine(i, 12);
    b.refine(i, 12);
    EXPECT_EQ(a.point(i).positions, b.point(i).positions);
  }
}

TEST(SamplePoint, HalfMassFrequency) {
  auto lay = single_level(make_graph(1, {}), {Rational(1, 2)}, Rational(1, 2));
  SampleSession s(lay, 5);
  std::uint64_t hits = 0;
  const std::uint64_t n = 10'000;
  for (std::uint64_t i = 0; i < n; ++i) {
    s.sample_point();
    hits += s.point(i).positions[0] == 0;
  }
  const double freq = static_cast<double>(hits) / n;
  EXPECT_GE(freq, 0.47);
  EXPECT_LE(freq, 0.53);
}

TEST(SamplePoint, SinkOnlyLevel) {
  auto lay = single_level(make_graph(0, {}), {}, Rational(1));
  SampleSession s(lay, 5);
  for (int i = 0; i < 100; ++i) {
    s.sample_point();
    EXPECT_EQ(s.point(i).positions[0], kSink);
  }
}

TEST(Refine, ScrapworkFiberOverSink) {
  // Level 5 of the pure set layering is a scrapwork from sink mass 1/2.
  auto lay = build("pureset", "theories/pureset.theory", 5);
  ASSERT_EQ(lay->level(4).sink_mass, Rational(1, 2));
  const std::uint64_t fresh = lay->level(5).size() - 1;
  SampleSession s(lay, 9);
  std::uint64_t on_sink = 0;
  std::uint64_t moved = 0;
  for (std::size_t i = 0; i < 20'000; ++i) {
    s.sample_point();
    s.refine(i, 4);
    if (s.point(i).positions[4] != kSink) continue;
    ++on_sink;
    s.refine(i, 5);
    moved += s.point(i).positions[5] == fresh;
  }
  EXPECT_TRUE(within_3_sigma(moved, on_sink, 0.5)) << moved << "/" << on_sink;
}

TEST(Refine, MarginalsMatchLevelMasses) {
  auto lay = build("dlo", "theories/dlo.theory", 9);
  SampleSession s(lay, 77);
  const std::size_t n = 10'000;
  for (std::size_t i = 0; i < n; ++i) {
    s.sample_point();
    s.refine(i, 9);
  }
  for (std::size_t depth = 1; depth <= 9; ++depth) {
    std::map<std::uint64_t, std::uint64_t> counts;
    for (std::size_t i = 0; i < n; ++i) counts[s.point(i).positions[depth]]++;
    const Level& l = lay->level(depth);
    for (std::uint64_t p = 0; p < l.size(); ++p) {
      EXPECT_TRUE(within_3_sigma(counts[p], n, to_double(lay->mass(depth, p)))) << "depth " << depth << " pos " << p;
    }
    EXPECT_TRUE(within_3_sigma(counts[kSink], n, to_double(l.sink_mass)));
  }
}

TEST(Refine, PathsAreCompatible) {
  auto lay = build("rado", "theories/rado.theory", 16);
  SampleSession s(lay, 3);
  for (std::size_t i = 0; i < 200; ++i) {
    s.sample_point();
    s.refine(i, 16);
    const auto& pos = s.point(i).positions;
    for (std::size_t d = 1; d <= 16; ++d) EXPECT_EQ(lay->parent(d, pos[d]), pos[d - 1]);
  }
}

TEST(DecideAtom, StableUnderFurtherRefinement) {
  auto lay = build("dlo", "theories/dlo.theory", 20);
  SampleSession s(lay, 11);
  for (int pair = 0; pair < 300; ++pair) {
    const std::size_t a = s.sample_point();
    const std::size_t b = s.sample_point();
    const bool value = s.decide_atom(0, {a, b});
    const std::size_t depth = std::max(s.point(a).depth(), s.point(b).depth()) + 10;
    s.refine(a, depth);
    s.refine(b, depth);
    const std::uint64_t t[2] = {s.point(a).positions[depth], s.point(b).positions[depth]};
    ASSERT_NE(t[0], kSink);
    ASSERT_NE(t[0], t[1]);
    EXPECT_EQ(lay->holds(depth, 0, t, 2), value);
    EXPECT_EQ(s.decide_atom(0, {a, b}), value);
  }
}

TEST(DecideAtom, RepeatedPointIsTrue) {
  auto lay = build("dlo", "theories/dlo.theory", 8);
  SampleSession s(lay, 1);
  const std::size_t a = s.sample_point();
  EXPECT_TRUE(s.decide_atom(0, {a, a}));
}

TEST(DecideAtom, DepthCapIsAnError) {
  // The relation only enters the sublanguage at the first omit stage, so a
  // cap of two stages cannot decide anything.
  auto lay = build("dlo", "theories/dlo.theory", 4);
  SampleSession s(lay, 1, 2);
  const std::size_t a = s.sample_point();
  const std::size_t b = s.sample_point();
  try {
    s.decide_atom(0, {a, b});
    FAIL() << "expected undecided";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), "undecided");
  }
}

TEST(InducedStructure, EmptyAndOrders) {
  auto lay = build("dlo", "theories/dlo.theory", 8);
  SampleSession s(lay, 2);
  EXPECT_EQ(s.induced_structure(0).size(), 0);
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    SampleSession t(lay, seed);
    EXPECT_TRUE(strict_total_order(t.induced_structure(3)));
  }
}

TEST(InducedStructure, ExtendsConsistently) {
  auto lay = build("rado", "theories/rado.theory", 8);
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    SampleSession s(lay, seed);
    const FiniteStructure two = s.induced_structure(2);
    const FiniteStructure four = s.induced_structure(4);
    EXPECT_EQ(induced_substructure(four, {0, 1}), two);
    EXPECT_TRUE(four.is_nonredundant());
  }
}

TEST(InducedStructure, DistinctPointsSeparate) {
  auto lay = build("dlo", "theories/dlo.theory", 30);
  SampleSession s(lay, 8);
  std::uint64_t together = 0;
  const std::uint64_t pairs = 10'000;
  for (std::uint64_t i = 0; i < pairs; ++i) {
    const std::size_t a = s.sample_point();
    const std::size_t b = s.sample_point();
    s.refine(a, 30);
    s.refine(b, 30);
    together += s.point(a).positions[30] == s.point(b).positions[30];
  }
  EXPECT_LE(static_cast<double>(together) / pairs, 0.01);
}

TEST(SampleFromLevel, SingleHeavyElement) {
  auto lay = single_level(make_graph(1, {}), {Rational(1)}, Rational(0));
  const FiniteStructure s = sample_from_level(lay, 0, 4, 1);
  EXPECT_EQ(s.size(), 4);
  // Every pair is a redundant tuple at the level, so the hand table decides:
  // the single element has no loop.
  EXPECT_EQ(s.count(0), 0u);
}

TEST(SampleFromLevel, EdgeFrequencyMatchesTFull) {
  const FiniteStructure k2 = make_graph(2, {{0, 1}});
  auto lay = single_level(k2, {Rational(1, 2), Rational(1, 2)}, Rational(0));
  const auto exact = level_t_full(*lay, 0, k2);
  ASSERT_TRUE(exact.has_value());
  EXPECT_EQ(*exact, Rational(1, 2));
  std::uint64_t hits = 0;
  const std::uint64_t n = 10'000;
  for (std::uint64_t seed = 0; seed < n; ++seed) hits += sample_from_level(lay, 0, 2, seed) == k2;
  EXPECT_TRUE(within_3_sigma(hits, n, 0.5)) << hits;
}

TEST(SampleFromLevel, Reproducible) {
  auto lay = build("rado", "theories/rado.theory", 12);
  EXPECT_EQ(sample_from_level(lay, 12, 6, 99), sample_from_level(lay, 12, 6, 99));
}

TEST(RealizesAllExtensions, SmallGraphs) {
  const FiniteStructure c5 = make_graph(5, {{0, 1}, {1, 2}, {2, 3}, {3, 4}, {4, 0}});
  EXPECT_TRUE(realizes_all_extensions(c5, 0, 1));
  EXPECT_FALSE(realizes_all_extensions(c5, 0, 2));
  EXPECT_FALSE(realizes_all_extensions(make_graph(4, {}), 0, 1));
}

TEST(StatsReport, DloPairOrderEstimate) {
  // Repeated points satisfy every relation, so the pattern carries loops;
  // its limit density is the probability that point 0 lies below point 1.
  RelationalLanguage l;
  l.add("Lt", 2);
  FiniteStructure below(l, 2);
  below.set(0, {0, 1});
  below.set(0, {0, 0});
  below.set(0, {1, 1});
  StatsOptions opts;
  opts.samples = 4000;
  opts.seed = 5;
  auto run = [&] {
    auto lay = build("dlo", "theories/dlo.theory", 16);
    const std::size_t built = lay->size();
    const StatsReport r = stats_report(lay, {below}, opts);
    EXPECT_EQ(r.exact_by_level[0].size(), built);
    return r;
  };
  const StatsReport r = run();
  ASSERT_EQ(r.limit_estimate.size(), 1u);
  EXPECT_LE(std::abs(r.limit_estimate[0] - 0.5), 3 * r.limit_stderr[0] + 1e-9);
  EXPECT_EQ(r.undecided, 0u);
  const auto j = r.to_json();
  for (const char* key : {"patterns", "exact_by_level", "limit_estimate", "monotone_ok", "exchangeability_gap"}) {
    EXPECT_TRUE(j.contains(key)) << key;
  }
  EXPECT_EQ(run().to_json().dump(), j.dump());
}

TEST(StatsReport, LooplessPatternsVanishAtEveryLevel) {
  auto lay = build("rado", "theories/rado.theory", 12);
  StatsOptions opts;
  opts.samples = 500;
  const StatsReport r = stats_report(lay, {make_graph(2, {{0, 1}})}, opts);
  for (const auto& v : r.exact_by_level[0]) EXPECT_EQ(v, std::optional<Rational>(Rational(0)));
  EXPECT_EQ(r.limit_estimate[0], 0.0);
  EXPECT_TRUE(r.monotone_ok);
}

TEST(StatsReport, ExchangeabilityAcrossFourPoints) {
  // Permuting the first four point indices leaves the distribution of the
  // induced 4-point structure unchanged.
  auto lay = build("rado", "theories/rado.theory", 24);
  const std::uint64_t n = 20'000;
  std::map<std::string, std::uint64_t> a;
  std::map<std::string, std::uint64_t> b;
  for (std::uint64_t i = 0; i < n; ++i) {
    SampleSession s(lay, StreamRng::mix(1000 + i));
    a[induced_type_key(s, {0, 1, 2, 3})]++;
    b[induced_type_key(s, {2, 0, 3, 1})]++;
  }
  double gap = 0;
  for (const auto& [k, v] : a) gap = std::max(gap, std::abs(static_cast<double>(v) - static_cast<double>(b[k])) / n);
  for (const auto& [k, v] : b) gap = std::max(gap, std::abs(static_cast<double>(v) - static_cast<double>(a[k])) / n);
  EXPECT_LE(gap, 0.015);
}
