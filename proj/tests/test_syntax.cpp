#include "layerlimit/structures.hpp"
#include "layerlimit/syntax.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace layerlimit;

namespace {

RelationalLanguage edge_language() {
  RelationalLanguage l;
  l.add("E", 2);
  return l;
}

// Random quantifier-free matrix over E/2 and P/1 built from atoms,
// equalities, negation and conjunction, so printing and parsing must give
// back the same tree.
Formula random_matrix(std::mt19937_64& rng, int vars, int depth) {
  std::uniform_int_distribution<int> pick(0, 4);
  std::uniform_int_distribution<int> var(0, vars - 1);
  const int choice = depth == 0 ? pick(rng) % 3 : pick(rng);
  switch (choice) {
    case 0:
      return Formula::atom(0, {var(rng), var(rng)});
    case 1:
      return Formula::atom(1, {var(rng)});
    case 2:
      return Formula::eq(var(rng), var(rng));
    case 3:
      return Formula::negate(random_matrix(rng, vars, depth - 1));
    default:
      return Formula::conj(random_matrix(rng, vars, depth - 1), random_matrix(rng, vars, depth - 1));
  }
}

}  // namespace

TEST(ParseTheory, TwoUniversalsOneWitness) {
  const Theory t = parse_theory("rel E/2; forall x y exists z : E(x,z) & E(z,y)");
  ASSERT_EQ(t.sentences.size(), 1u);
  EXPECT_EQ(t.sentences[0].arity(), 2);
  EXPECT_EQ(t.sentences[0].witness, "z");
  EXPECT_FALSE(t.sentences[0].is_universal());
}

TEST(ParseTheory, MatrixKeepsNegationNode) {
  const Theory t = parse_theory("rel E/2; forall x exists y : E(x,y) & !(x=y)");
  ASSERT_EQ(t.sentences.size(), 1u);
  const Formula& m = t.sentences[0].matrix;
  ASSERT_EQ(m.kind, NodeKind::kAnd);
  EXPECT_EQ(m.children[1].kind, NodeKind::kNot);
}

TEST(ParseTheory, EmptyUniversalPrefix) {
  const Theory t = parse_theory("rel E/2; exists y : y=y");
  ASSERT_EQ(t.sentences.size(), 1u);
  EXPECT_EQ(t.sentences[0].arity(), 0);
}

TEST(ParseTheory, UniversalSentenceGetsDummyWitness) {
  const Theory t = parse_theory("rel E/2\nforall x : !E(x,x)\n");
  ASSERT_EQ(t.sentences.size(), 1u);
  EXPECT_EQ(t.sentences[0].arity(), 1);
  EXPECT_TRUE(t.sentences[0].is_universal());
}

TEST(ParseTheory, DisjunctionAndImplicationNormalize) {
  const Theory t = parse_theory("rel E/2\nforall x y : E(x,y) -> E(y,x) | x = y\n");
  std::vector<int> kinds;
  std::function<void(const Formula&)> walk = [&](const Formula& f) {
    kinds.push_back(static_cast<int>(f.kind));
    for (const auto& c : f.children) walk(c);
  };
  walk(t.sentences[0].matrix);
  for (int k : kinds) {
    EXPECT_TRUE(k == static_cast<int>(NodeKind::kAtom) || k == static_cast<int>(NodeKind::kEq) ||
                k == static_cast<int>(NodeKind::kNot) || k == static_cast<int>(NodeKind::kAnd));
  }
}

TEST(ParseTheory, ErrorsCarryPosition) {
  try {
    parse_theory("rel E/2\nforall x : E(x,)\n");
    FAIL() << "expected a parse error";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2);
    EXPECT_GT(e.column(), 0);
  }
}

TEST(ParseTheory, RejectsArityMismatch) {
  EXPECT_THROW(parse_theory("rel E/2\nforall x : E(x)\n"), Error);
}

TEST(ParseTheory, RejectsNonPithyShape) {
  EXPECT_THROW(parse_theory("rel E/2\nexists y forall x : E(x,y)\n"), Error);
  EXPECT_THROW(parse_theory("rel E/2\nforall x exists y z : E(x,y) & E(y,z)\n"), Error);
}

TEST(ParseTheory, RejectsUnknownRelation) {
  EXPECT_THROW(parse_theory("rel E/2\nforall x : !F(x,x)\n"), Error);
}

TEST(ParseTheory, CommentsAreIgnored) {
  const Theory t = parse_theory("# header\nrel E/2  # edges\n\nforall x : !E(x,x)  # loops\n");
  EXPECT_EQ(t.sentences.size(), 1u);
}

TEST(ParseTheory, RoundTripOnGeneratedTheories) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 300; ++trial) {
    Theory t;
    t.language.add("E", 2);
    t.language.add("P", 1);
    const int count = 1 + static_cast<int>(rng() % 3);
    for (int s = 0; s < count; ++s) {
      PithySentence p;
      const int k = static_cast<int>(rng() % 3);
      for (int i = 0; i < k; ++i) p.universals.push_back("x" + std::to_string(i + 1));
      p.witness = "y";
      // The witness always occurs in a relation atom so the sentence stays
      // genuinely existential.
      p.matrix = Formula::conj(random_matrix(rng, k + 1, 3), Formula::atom(1, {k}));
      t.sentences.push_back(p);
    }
    const std::string printed = print_theory(t);
    const Theory back = parse_theory(printed);
    ASSERT_EQ(back, t) << printed;
    EXPECT_EQ(print_theory(back), printed);
  }
}

TEST(NonRedundant, InequalityForcesDistinctness) {
  const auto l = edge_language();
  EXPECT_TRUE(check_nonredundant(parse_formula("E(x1,x2) & x1 != x2", l), l).nonredundant);
}

TEST(NonRedundant, BareEdgeFailsWithMergedPattern) {
  const auto l = edge_language();
  const auto r = check_nonredundant(parse_formula("E(x1,x2)", l), l);
  EXPECT_FALSE(r.nonredundant);
  ASSERT_EQ(r.partition.size(), 2u);
  EXPECT_EQ(r.partition[0], r.partition[1]);
  ASSERT_FALSE(r.valuation.empty());
  bool merged_true = false;
  for (const auto& [atom, value] : r.valuation) merged_true = merged_true || value;
  EXPECT_TRUE(merged_true);
}

TEST(NonRedundant, SingleVariableIsVacuous) {
  const auto l = edge_language();
  EXPECT_TRUE(check_nonredundant(parse_formula("x1 = x1", l), l).nonredundant);
}

TEST(NonRedundant, ContradictionOnMergeIsNonRedundant) {
  const auto l = edge_language();
  EXPECT_TRUE(check_nonredundant(parse_formula("E(x1,x2) & !E(x2,x1)", l), l).nonredundant);
}

TEST(NonRedundant, DistinctnessConjunctAlwaysSuffices) {
  std::mt19937_64 rng(11);
  RelationalLanguage l;
  l.add("E", 2);
  l.add("P", 1);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 2 + static_cast<int>(rng() % 2);
    Formula f = random_matrix(rng, n, 3);
    for (int i = 0; i < n; ++i) {
      for (int j = i + 1; j < n; ++j) f = Formula::conj(f, Formula::neq(i, j));
    }
    NamedFormula nf{f, {"x1", "x2", "x3"}};
    nf.names.resize(n);
    EXPECT_TRUE(check_nonredundant(nf, l).nonredundant);
  }
}

TEST(Evaluate, DirectedEdge) {
  const auto l = edge_language();
  const FiniteStructure s = make_graph(2, {{0, 1}}, false);
  EXPECT_TRUE(evaluate(parse_formula("E(x,y)", l), l, s, {{"x", 0}, {"y", 1}}));
  EXPECT_FALSE(evaluate(parse_formula("!E(x,y)", l), l, s, {{"x", 0}, {"y", 1}}));
  EXPECT_FALSE(evaluate(parse_formula("E(x,y)", l), l, s, {{"x", 1}, {"y", 0}}));
}

TEST(Evaluate, NullaryRelation) {
  RelationalLanguage l;
  l.add("P", 0);
  FiniteStructure s(l, 1);
  s.set(0, std::span<const int>{}, true);
  EXPECT_TRUE(evaluate(parse_formula("P()", l), l, s, {}));
}

TEST(Evaluate, UnboundVariableAndUnknownRelation) {
  const auto l = edge_language();
  const FiniteStructure s = make_graph(2, {{0, 1}}, false);
  EXPECT_THROW(evaluate(parse_formula("E(x,y)", l), l, s, {{"x", 0}}), Error);
  RelationalLanguage other;
  other.add("F", 2);
  EXPECT_THROW(evaluate(parse_formula("F(x,y)", other), other, s, {{"x", 0}, {"y", 1}}), Error);
}

TEST(Evaluate, AgreesOnInducedSubstructures) {
  std::mt19937_64 rng(3);
  const auto l = edge_language();
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 5;
    std::vector<std::pair<int, int>> edges;
    for (int a = 0; a < n; ++a) {
      for (int b = 0; b < n; ++b) {
        if (rng() % 2) edges.emplace_back(a, b);
      }
    }
    const FiniteStructure big = make_graph(n, edges, false);
    const std::vector<int> subset{0, 2, 3};
    const FiniteStructure small = induced_substructure(big, subset);
    Formula f = random_matrix(rng, 2, 3);
    // Drop P atoms: the generator may use them but this language lacks P.
    std::function<bool(const Formula&)> uses_p = [&](const Formula& g) {
      if (g.kind == NodeKind::kAtom && g.relation == 1) return true;
      for (const auto& c : g.children) {
        if (uses_p(c)) return true;
      }
      return false;
    };
    if (uses_p(f)) continue;
    const NamedFormula nf{f, {"u", "v"}};
    for (int a = 0; a < 3; ++a) {
      for (int b = 0; b < 3; ++b) {
        EXPECT_EQ(evaluate(nf, l, small, {{"u", a}, {"v", b}}),
                  evaluate(nf, l, big, {{"u", subset[a]}, {"v", subset[b]}}));
      }
    }
  }
}

TEST(ParseTypes, ReadsLiteralLists) {
  RelationalLanguage l;
  const auto types = parse_types("rel Lt/2\ntype 2 : Lt(x1,x2); Lt(x2,x1)\n", l);
  ASSERT_EQ(types.size(), 1u);
  EXPECT_EQ(types[0].arity, 2);
  EXPECT_EQ(types[0].literals.size(), 2u);
  EXPECT_EQ(l.size(), 1);
}

TEST(ParseFragment, MarksAxioms) {
  const FragmentSource src = parse_fragment_source("rel E/2\nE(x1,x2)\nexists y : E(x,y)\naxiom exists x y : E(x,y)\n");
  // Axioms stay in the fragment as well.
  EXPECT_EQ(src.formulas.size(), 3u);
  EXPECT_EQ(src.axioms.size(), 1u);
}
