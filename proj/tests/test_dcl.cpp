#include "layerlimit/dcl.hpp"

#include <gtest/gtest.h>

#include "test_util.hpp"

#include <algorithm>
#include <random>

using namespace layerlimit;

namespace {

RelationalLanguage language_of(const std::string& name, int arity) {
  RelationalLanguage l;
  l.add(name, arity);
  return l;
}

FiniteStructure digraph_from_code(int n, std::uint64_t code) {
  FiniteStructure s(language_of("E", 2), n);
  for (int a = 0; a < n; ++a) {
    for (int b = 0; b < n; ++b) {
      if (a != b && (code >> (a * n + b) & 1u)) s.set(0, {a, b});
    }
  }
  return s;
}

std::vector<int> all_of(int n) {
  std::vector<int> v(n);
  for (int i = 0; i < n; ++i) v[i] = i;
  return v;
}

}  // namespace

TEST(DclGroup, PathFixesCentre) {
  EXPECT_EQ(dcl_group(make_graph(3, {{0, 1}, {1, 2}}), {}), std::vector<int>{1});
}

TEST(DclGroup, FourCycleFixesNothing) {
  EXPECT_TRUE(dcl_group(make_graph(4, {{0, 1}, {1, 2}, {2, 3}, {3, 0}}), {}).empty());
}

TEST(DclGroup, FullSubsetIsClosed) {
  const FiniteStructure s = make_graph(4, {{0, 1}, {1, 2}, {2, 3}, {3, 0}});
  EXPECT_EQ(dcl_group(s, all_of(4)), all_of(4));
}

TEST(DclGroup, PinningOneCycleVertexFixesItsAntipode) {
  const FiniteStructure c4 = make_graph(4, {{0, 1}, {1, 2}, {2, 3}, {3, 0}});
  EXPECT_EQ(dcl_group(c4, {0}), (std::vector<int>{0, 2}));
}

TEST(DclGroup, SizeBound) {
  EXPECT_THROW(dcl_group(make_graph(10, {}), {}), Error);
}

TEST(DclGroup, MonotoneAndIdempotent) {
  // Exhaustive up to three vertices, sampled for four and five.
  std::mt19937_64 rng(23);
  auto check = [](const FiniteStructure& s, const std::vector<int>& x) {
    const auto closed = dcl_group(s, x);
    for (int v : x) EXPECT_TRUE(std::binary_search(closed.begin(), closed.end(), v));
    EXPECT_EQ(dcl_group(s, closed), closed);
  };
  for (int n = 1; n <= 3; ++n) {
    for (std::uint64_t code = 0; code < (std::uint64_t{1} << (n * n)); ++code) {
      const FiniteStructure s = digraph_from_code(n, code);
      for (unsigned mask = 0; mask < (1u << n); ++mask) {
        std::vector<int> x;
        for (int i = 0; i < n; ++i) {
          if (mask >> i & 1u) x.push_back(i);
        }
        check(s, x);
      }
    }
  }
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 4 + static_cast<int>(rng() % 2);
    const FiniteStructure s = digraph_from_code(n, rng());
    std::vector<int> x;
    for (int i = 0; i < n; ++i) {
      if (rng() % 3 == 0) x.push_back(i);
    }
    check(s, x);
  }
}

TEST(SplitWitness, NamedOrLast) {
  const auto l = language_of("E", 2);
  const auto named = split_witness(parse_formula("E(y,x1)", l));
  EXPECT_EQ(named.witness, 0);
  EXPECT_EQ(named.params, std::vector<int>{1});
  const auto last = split_witness(parse_formula("E(a,b)", l));
  EXPECT_EQ(last.witness, 1);
}

TEST(CheckDuplication, DloBelowHasTwoWitnesses) {
  const auto l = language_of("Lt", 2);
  auto oracle = make_oracle("dlo", l);
  const auto phi = parse_formula("Lt(x1,y) & x1 != y", l);
  const DuplicationResult r = check_duplication(*oracle, phi, 3);
  ASSERT_TRUE(r.duplicated);
  ASSERT_EQ(r.params.size(), 1u);
  EXPECT_NE(r.y, r.z);
  EXPECT_TRUE(oracle->holds(0, {r.params[0], r.y}));
  EXPECT_TRUE(oracle->holds(0, {r.params[0], r.z}));
  EXPECT_EQ(r.to_json(*oracle)["verdict"], "duplicated");
}

TEST(CheckDuplication, PureSetInequality) {
  const auto l = language_of("E", 2);
  auto oracle = make_oracle("pureset", l);
  const DuplicationResult r = check_duplication(*oracle, parse_formula("x1 != y", l), 3);
  EXPECT_TRUE(r.duplicated);
  EXPECT_NE(r.y, r.z);
  EXPECT_NE(r.params[0], r.y);
  EXPECT_NE(r.params[0], r.z);
}

TEST(CheckDuplication, UniqueWitnessIsNotFound) {
  FiniteStructure s(language_of("Red", 1), 3);
  s.set(0, {1});
  FiniteModelOracle oracle(s);
  const DuplicationResult r = check_duplication(oracle, parse_formula("Red(y)", s.language()), 6);
  EXPECT_FALSE(r.duplicated);
  EXPECT_FALSE(r.note.empty());
}

TEST(CheckDuplication, RedundantFormulaRejected) {
  const auto l = language_of("Lt", 2);
  auto oracle = make_oracle("dlo", l);
  EXPECT_THROW(check_duplication(*oracle, parse_formula("Lt(x1,y)", l), 3), Error);
}

TEST(DetectViolation, UniqueRedPointAtBoundThree) {
  const Theory t = parse_theory(test::read_data("theories/unique_red_point.theory"));
  const auto phi = parse_formula("Red(y)", t.language);
  const ViolationReport r = detect_violation(t, phi, 3);
  EXPECT_TRUE(r.violation);
  ASSERT_TRUE(r.model.has_value());
  EXPECT_EQ(r.model->count(0), 1u);
  EXPECT_GT(r.models, 0u);
  // Replaying the enumeration reproduces the verdict bit for bit.
  const ViolationReport again = detect_violation(t, phi, 3);
  EXPECT_EQ(again.digest, r.digest);
  EXPECT_EQ(again.to_json().dump(), r.to_json().dump());
}

TEST(DetectViolation, DloGivesNoEvidence) {
  const Theory t = parse_theory(test::read_data("theories/dlo.theory"));
  const ViolationReport r = detect_violation(t, parse_formula("Lt(x1,y) & x1 != y", t.language), 3);
  EXPECT_FALSE(r.violation);
  EXPECT_TRUE(r.counterexample.has_value());
}

TEST(DetectViolation, EmptyTheoryGivesNoEvidence) {
  Theory t;
  t.language.add("E", 2);
  EXPECT_FALSE(detect_violation(t, parse_formula("E(x1,y) & x1 != y", t.language), 3).violation);
  EXPECT_FALSE(detect_violation(t, parse_formula("x1 != y", t.language), 3).violation);
}

TEST(DetectViolation, CertificateFamily) {
  const Theory t = parse_theory(test::read_data("theories/unique_red_point.theory"));
  FiniteStructure one(t.language, 2);
  one.set(0, {0});
  const std::vector<FiniteStructure> family{one};
  EXPECT_TRUE(detect_violation(t, parse_formula("Red(y)", t.language), 3, &family).violation);
}

TEST(Prescreen, RefusesUniqueRedPoint) {
  const Theory t = parse_theory(test::read_data("theories/unique_red_point.theory"));
  const PrescreenResult r = prescreen_theory(t, 3);
  EXPECT_TRUE(r.refused);
  EXPECT_EQ(r.sentence, 0);
  EXPECT_TRUE(r.to_json().contains("sentences"));
}

TEST(Prescreen, AcceptsDloAndRado) {
  EXPECT_FALSE(prescreen_theory(parse_theory(test::read_data("theories/dlo.theory")), 3).refused);
  EXPECT_FALSE(prescreen_theory(parse_theory(test::read_data("theories/rado.theory")), 3).refused);
}

TEST(UniquenessFormula, AddsPairwiseDistinctness) {
  const Theory t = parse_theory(test::read_data("theories/dlo.theory"));
  const NamedFormula u = uniqueness_formula(t.sentences[3]);
  EXPECT_EQ(u.names, (std::vector<std::string>{"x1", "y"}));
  EXPECT_TRUE(check_nonredundant(u, t.language).nonredundant);
}

TEST(DclReport, Json) {
  DclReport report{"p3", {{"subset {}", "nontrivial", nlohmann::json{{"fixed", {1}}}}}};
  const auto j = report.to_json();
  EXPECT_EQ(j["subject"], "p3");
  EXPECT_EQ(j["findings"][0]["verdict"], "nontrivial");
}
