#include "layerlimit/layering.hpp"

#include <gtest/gtest.h>

#include "test_util.hpp"

using namespace layerlimit;

namespace {

std::shared_ptr<Layering> build(const std::string& oracle, const std::string& theory_file, int stages,
                                const std::string& types_file = "") {
  const Theory theory = parse_theory(test::read_data(theory_file));
  std::shared_ptr<ModelOracle> o = make_oracle(oracle, theory.language);
  std::vector<QfTypeSpec> omitted;
  if (!types_file.empty()) {
    RelationalLanguage tl;
    omitted = parse_types(test::read_data(types_file), tl);
    for (auto& t : omitted) t = remap_type(t, tl, theory.language);
  }
  auto lay = std::make_shared<Layering>(o, theory, omitted);
  lay->build(stages);
  return lay;
}

RelationalLanguage edge_language() {
  RelationalLanguage l;
  l.add("E", 2);
  return l;
}

// Hand level on n elements of equal mass (1 - sink) / n with the given edges.
HandLevel hand(int n, const Rational& sink, const std::vector<std::pair<int, int>>& edges,
               std::vector<std::uint64_t> parents = {}, std::vector<int> sub = {0}) {
  HandLevel h;
  h.sublanguage = std::move(sub);
  h.relations = make_graph(n, edges, false);
  for (int i = 0; i < n; ++i) h.mass.push_back((1 - sink) / n);
  h.sink = sink;
  h.parents = std::move(parents);
  return h;
}

bool has_condition(const ValidationReport& r, const std::string& c) {
  for (const auto& v : r.violations) {
    if (v.condition == c) return true;
  }
  return false;
}

}  // namespace

TEST(Layering, SeedLevel) {
  auto lay = build("pureset", "theories/pureset.theory", 0);
  ASSERT_EQ(lay->size(), 1u);
  const Level& seed = lay->level(0);
  EXPECT_EQ(seed.index, -1);
  EXPECT_EQ(seed.size(), 0u);
  EXPECT_EQ(seed.sink_mass, Rational(1));
  EXPECT_TRUE(seed.sublanguage.empty());
}

TEST(Layering, FourStagesGiveFiveLevels) {
  auto lay = build("pureset", "theories/pureset.theory", 4);
  ASSERT_EQ(lay->size(), 5u);
  EXPECT_EQ(lay->level(1).stage, StageKind::kScrapwork);
  EXPECT_EQ(lay->level(2).stage, StageKind::kSplit);
  EXPECT_EQ(lay->level(3).stage, StageKind::kSatisfy);
  EXPECT_EQ(lay->level(4).stage, StageKind::kOmit);
}

TEST(Scrapwork, FirstStageHalvesUnitSink) {
  auto lay = build("pureset", "theories/pureset.theory", 1);
  const Level& l = lay->level(1);
  ASSERT_EQ(l.size(), 1u);
  EXPECT_EQ(lay->mass(1, 0), Rational(1, 2));
  EXPECT_EQ(l.sink_mass, Rational(1, 2));
  EXPECT_EQ(lay->parent(1, 0), kSink);
}

TEST(Scrapwork, HalfSinkGivesQuarters) {
  auto lay = build("pureset", "theories/pureset.theory", 5);
  const Level& prev = lay->level(4);
  const Level& l = lay->level(5);
  ASSERT_EQ(prev.sink_mass, Rational(1, 2));
  ASSERT_EQ(l.stage, StageKind::kScrapwork);
  EXPECT_EQ(l.size(), prev.size() + 1);
  EXPECT_EQ(lay->mass(5, l.size() - 1), Rational(1, 4));
  EXPECT_EQ(l.sink_mass, Rational(1, 4));
  EXPECT_EQ(l.sublanguage, prev.sublanguage);
}

TEST(Scrapwork, TwentyCyclesGiveTwoToMinusTwenty) {
  auto lay = build("pureset", "theories/pureset.theory", 80);
  int scrapworks = 0;
  for (std::size_t i = 1; i < lay->size(); ++i) scrapworks += lay->level(i).stage == StageKind::kScrapwork;
  EXPECT_EQ(scrapworks, 20);
  EXPECT_EQ(lay->level(80).sink_mass, Rational(1, 1 << 20));
}

TEST(Split, HalvesEveryElement) {
  auto lay = build("pureset", "theories/pureset.theory", 6);
  const Level& l = lay->level(6);
  ASSERT_EQ(l.stage, StageKind::kSplit);
  const Level& prev = lay->level(5);
  EXPECT_EQ(l.size(), 2 * prev.size());
  EXPECT_EQ(l.sink_mass, prev.sink_mass);
  for (std::uint64_t p = 0; p < l.size(); ++p) {
    EXPECT_EQ(lay->mass(6, p) * 2, lay->mass(5, lay->parent(6, p)));
  }
  // The element of mass 1/4 added by the scrapwork becomes two of 1/8.
  EXPECT_EQ(lay->mass(5, prev.size() - 1), Rational(1, 4));
  EXPECT_EQ(lay->mass(6, l.size() - 1), Rational(1, 8));
}

TEST(Split, MaxElementMassHalvesPerCycle) {
  auto lay = build("pureset", "theories/pureset.theory", 12);
  EXPECT_EQ(lay->max_element_mass(2), Rational(1, 4));
  EXPECT_EQ(lay->max_element_mass(6), Rational(1, 8));
  EXPECT_EQ(lay->max_element_mass(10), Rational(1, 16));
}

TEST(Split, EmptyCarrierPassesThrough) {
  auto lay = Layering::from_levels(edge_language(), {hand(0, Rational(1), {})});
  EXPECT_EQ(lay.total_mass(0), Rational(1));
}

TEST(Satisfy, SinkDividesEvenlyOverNewElements) {
  auto lay = build("dlo", "theories/dlo.theory", 40);
  int seen = 0;
  for (std::size_t i = 1; i < lay->size(); ++i) {
    const Level& l = lay->level(i);
    if (l.stage != StageKind::kSatisfy) continue;
    const Rational old_sink = lay->level(i - 1).sink_mass;
    const std::uint64_t added = l.size() - l.previous_size;
    EXPECT_EQ(l.sink_mass, old_sink / (added + 1));
    for (std::uint64_t p = l.previous_size; p < l.size(); ++p) EXPECT_EQ(lay->mass(i, p), l.sink_mass);
    if (added == 3 && old_sink == Rational(1, 4)) {
      EXPECT_EQ(l.sink_mass, Rational(1, 16));
    }
    ++seen;
  }
  EXPECT_EQ(seen, 10);
}

TEST(Satisfy, UniversalTheoryIsNoOp) {
  auto lay = build("pureset", "theories/pureset.theory", 3);
  EXPECT_EQ(lay->level(3).size(), lay->level(2).size());
  EXPECT_EQ(lay->level(3).sink_mass, lay->level(2).sink_mass);
}

TEST(Satisfy, DensityPutsElementsBetween) {
  auto lay = build("dlo", "theories/dlo.theory", 40);
  bool found = false;
  for (std::size_t i = 1; i < lay->size() && !found; ++i) {
    const Level& l = lay->level(i);
    if (l.stage != StageKind::kSatisfy || l.served != 5) continue;
    found = true;
    const auto* o = lay->oracle();
    ASSERT_LE(l.previous_size, 400u);
    for (std::uint64_t a = 0; a < l.previous_size; ++a) {
      for (std::uint64_t b = 0; b < l.previous_size; ++b) {
        const Handle x = lay->handle(i, a);
        const Handle z = lay->handle(i, b);
        if (!o->holds(0, {x, z})) continue;
        bool between = false;
        for (std::uint64_t c = 0; c < l.size() && !between; ++c) {
          const Handle y = lay->handle(i, c);
          between = o->holds(0, {x, y}) && o->holds(0, {y, z});
        }
        EXPECT_TRUE(between);
      }
    }
  }
  EXPECT_TRUE(found);
}

TEST(Omit, GrowsLanguageAndVerifies) {
  auto lay = build("dlo", "theories/dlo.theory", 12, "types/dlo_cycle.types");
  EXPECT_TRUE(lay->level(0).sublanguage.empty());
  const Level& omit = lay->level(4);
  ASSERT_EQ(omit.stage, StageKind::kOmit);
  EXPECT_EQ(omit.sublanguage, std::vector<int>{0});
  EXPECT_EQ(omit.size(), lay->level(3).size());
  EXPECT_EQ(omit.sink_mass, lay->level(3).sink_mass);
  // Later omit stages find the finite language already present.
  EXPECT_EQ(lay->level(8).sublanguage, std::vector<int>{0});
  for (std::uint64_t a = 0; a < omit.size(); ++a) {
    for (std::uint64_t b = 0; b < omit.size(); ++b) {
      const std::uint64_t ab[2] = {a, b};
      const std::uint64_t ba[2] = {b, a};
      if (a != b) {
        EXPECT_FALSE(lay->holds(4, 0, ab, 2) && lay->holds(4, 0, ba, 2));
      }
    }
  }
}

TEST(Layering, ValidatorsPassOnFortyDloStages) {
  auto lay = build("dlo", "theories/dlo.theory", 40, "types/dlo_cycle.types");
  for (std::size_t i = 0; i < lay->size(); ++i) EXPECT_EQ(lay->total_mass(i), Rational(1));
  const ValidationReport mass = validate_mass(*lay);
  EXPECT_TRUE(mass.ok());
  const ValidationReport reg = validate_regular(*lay);
  EXPECT_TRUE(reg.ok()) << reg.to_json().dump();
  EXPECT_EQ(reg.unverified, 0u);
  const ContinuityReport cont = validate_continuity(*lay, 10);
  EXPECT_TRUE(cont.ok());
  EXPECT_GT(cont.entries.size(), 0u);
}

TEST(Layering, ValidatorsPassOnRado) {
  auto lay = build("rado", "theories/rado.theory", 24);
  EXPECT_TRUE(validate_mass(*lay).ok());
  EXPECT_TRUE(validate_regular(*lay).ok());
}

TEST(Layering, ShortRadoWithTwoParameterAxioms) {
  auto lay = build("rado", "theories/rado2.theory", 12);
  EXPECT_TRUE(validate_regular(*lay).ok());
}

TEST(Layering, ProjectComposesMaps) {
  auto lay = build("dlo", "theories/dlo.theory", 20);
  const std::size_t top = lay->size() - 1;
  for (std::uint64_t p = 0; p < lay->level(top).size(); p += 7) {
    std::uint64_t q = p;
    for (std::size_t i = top; i > 5; --i) q = lay->parent(i, q);
    EXPECT_EQ(lay->project(top, p, 5), q);
  }
  EXPECT_EQ(lay->project(top, kSink, 0), kSink);
}

TEST(Layering, MaterializationRules) {
  auto lay = build("dlo", "theories/dlo.theory", 8);
  const std::uint64_t sink_pair[2] = {kSink, 0};
  const std::uint64_t repeat[2] = {1, 1};
  EXPECT_TRUE(lay->holds(1, 0, sink_pair, 2));
  EXPECT_TRUE(lay->holds(5, 0, repeat, 2));
  // Before the relation enters the sublanguage every tuple holds.
  const std::uint64_t pair[2] = {0, 1};
  const std::uint64_t rev[2] = {1, 0};
  EXPECT_TRUE(lay->holds(2, 0, pair, 2) && lay->holds(2, 0, rev, 2));
  EXPECT_NE(lay->holds(5, 0, pair, 2), lay->holds(5, 0, rev, 2));
}

TEST(Layering, JsonDump) {
  auto lay = build("pureset", "theories/pureset.theory", 4);
  const auto j = lay->to_json();
  ASSERT_EQ(j["levels"].size(), 5u);
  EXPECT_EQ(j["levels"][0]["index"], -1);
  EXPECT_EQ(j["levels"][1]["stage"], "scrapwork");
  EXPECT_EQ(j["levels"][1]["mass"]["sink"], "1/2");
  EXPECT_EQ(j["levels"][2]["map"]["kind"], "split");
}

TEST(Layering, RefusesUniqueWitnessTheories) {
  const Theory t = parse_theory(test::read_data("theories/unique_red_point.theory"));
  std::shared_ptr<ModelOracle> o = make_oracle("pureset", t.language);
  try {
    Layering lay(o, t, {});
    FAIL() << "expected a refusal";
  } catch (const RefusalError& e) {
    EXPECT_TRUE(e.result().refused);
    EXPECT_EQ(e.kind(), "refusal");
  }
}

TEST(Layering, RefusesOraclesWithoutDuplication) {
  std::shared_ptr<ModelOracle> o = std::make_shared<FiniteModelOracle>(make_graph(2, {{0, 1}}));
  Theory t;
  t.language = edge_language();
  EXPECT_THROW(Layering(o, t, {}), Error);
}

TEST(Validation, DroppedRelationViolatesPreservation) {
  // E(0,1) holds at the first level and is dropped at the next one, where
  // both elements keep their images.
  const Rational s(1, 2);
  auto lay = Layering::from_levels(edge_language(), {hand(2, s, {{0, 1}}), hand(2, s / 2, {}, {0, 1})});
  const ValidationReport r = validate_regular(lay);
  EXPECT_TRUE(has_condition(r, "f")) << r.to_json().dump();
}

TEST(Validation, ConstantSinkViolatesDecay) {
  std::vector<HandLevel> levels;
  levels.push_back(hand(2, Rational(1, 2), {}));
  for (int i = 0; i < 5; ++i) levels.push_back(hand(2, Rational(1, 2), {}, {0, 1}));
  auto lay = Layering::from_levels(edge_language(), levels);
  EXPECT_TRUE(has_condition(validate_regular(lay), "c"));
}

TEST(Validation, NegatedRedundantTupleViolatesNeutrality) {
  // A hand level whose table lacks the loop at 0 negates a redundant tuple.
  HandLevel a = hand(2, Rational(1, 2), {{0, 0}, {0, 1}, {1, 1}});
  HandLevel b = hand(2, Rational(1, 4), {{0, 1}, {1, 1}}, {0, 1});
  auto lay = Layering::from_levels(edge_language(), {a, b});
  EXPECT_TRUE(has_condition(validate_regular(lay), "g"));
}

TEST(Validation, FiberMassMismatch) {
  HandLevel a = hand(2, Rational(1, 2), {});
  HandLevel b = hand(2, Rational(1, 2), {}, {0, 0});
  auto lay = Layering::from_levels(edge_language(), {a, b});
  EXPECT_FALSE(validate_mass(lay).ok());
}

TEST(Continuity, SplitIntoQuartersIsWitnessed) {
  HandLevel a = hand(1, Rational(1, 2), {}, {}, {});
  HandLevel b = hand(2, Rational(1, 2), {}, {0, 0}, {});
  auto lay = Layering::from_levels(edge_language(), {a, b});
  // Only the seed level (index -1) is examined.
  const ContinuityReport r = validate_continuity(lay, 0);
  ASSERT_EQ(r.entries.size(), 1u);
  EXPECT_EQ(r.entries[0].witness_level, std::optional<int>(0));
  EXPECT_TRUE(r.ok());
}

TEST(Continuity, NoSplitsLeaveElementsUnwitnessed) {
  HandLevel a = hand(1, Rational(1, 2), {}, {}, {});
  HandLevel b = hand(1, Rational(1, 2), {}, {0}, {});
  auto lay = Layering::from_levels(edge_language(), {a, b});
  const ContinuityReport r = validate_continuity(lay, 0);
  EXPECT_FALSE(r.ok());
  EXPECT_EQ(r.unwitnessed, 1u);
}

TEST(LevelTFull, MatchesMaterializedDensity) {
  auto lay = build("rado", "theories/rado.theory", 10);
  const RelationalLanguage l = edge_language();
  const std::vector<FiniteStructure> patterns{make_graph(1, {}), make_graph(2, {{0, 1}}), make_graph(2, {}),
                                              make_graph(1, {{0, 0}}, false),
                                              make_graph(2, {{0, 0}, {1, 1}, {0, 1}, {1, 0}}, false)};
  for (std::size_t i = 0; i < lay->size(); ++i) {
    const auto w = lay->materialize(i);
    ASSERT_TRUE(w.has_value());
    for (const auto& p : patterns) {
      const auto exact = level_t_full(*lay, i, p);
      ASSERT_TRUE(exact.has_value());
      EXPECT_EQ(*exact, t_full(p, *w, l)) << "level " << i;
    }
  }
}
