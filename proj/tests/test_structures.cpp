#include "layerlimit/structures.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <random>

using namespace layerlimit;

namespace {

RelationalLanguage edge_language() {
  RelationalLanguage l;
  l.add("E", 2);
  return l;
}

FiniteStructure random_digraph(std::mt19937_64& rng, int n, bool loops = false) {
  std::vector<std::pair<int, int>> edges;
  for (int a = 0; a < n; ++a) {
    for (int b = 0; b < n; ++b) {
      if ((a != b || loops) && rng() % 2) edges.emplace_back(a, b);
    }
  }
  return make_graph(n, edges, false);
}

// Brute-force full homomorphism count: tries every map.
std::vector<std::vector<int>> brute_full_homs(const FiniteStructure& p, const FiniteStructure& t) {
  std::vector<std::vector<int>> out;
  std::vector<int> f(p.size(), 0);
  const int n = p.size();
  const int m = t.size();
  std::function<void(int)> rec = [&](int v) {
    if (v == n) {
      for (int a = 0; a < n; ++a) {
        for (int b = 0; b < n; ++b) {
          if (p.holds(0, {a, b}) != t.holds(0, {f[a], f[b]})) return;
        }
      }
      out.push_back(f);
      return;
    }
    for (int x = 0; x < m; ++x) {
      f[v] = x;
      rec(v + 1);
    }
  };
  rec(0);
  return out;
}

}  // namespace

TEST(FiniteStructure, SetAndQuery) {
  FiniteStructure s(edge_language(), 3);
  s.set(0, {0, 1});
  EXPECT_TRUE(s.holds(0, {0, 1}));
  EXPECT_FALSE(s.holds(0, {1, 0}));
  EXPECT_EQ(s.count(0), 1u);
  EXPECT_THROW(s.set(0, {0, 3}), Error);
  EXPECT_THROW(s.set(0, {0}), Error);
}

TEST(FiniteStructure, NonRedundancy) {
  EXPECT_TRUE(make_graph(3, {{0, 1}}).is_nonredundant());
  EXPECT_FALSE(make_graph(3, {{1, 1}}, false).is_nonredundant());
}

TEST(FiniteStructure, JsonRoundTrip) {
  const FiniteStructure s = make_graph(3, {{0, 1}, {1, 2}}, false);
  const auto j = structure_to_json(s);
  EXPECT_EQ(structure_from_json(j), s);
  WeightedStructure w{s, {Rational(1, 2), Rational(1, 4), Rational(1, 4)}};
  const auto wj = weighted_to_json(w);
  EXPECT_EQ(wj["mass"][0], "1/2");
  const WeightedStructure back = weighted_from_json(wj);
  EXPECT_EQ(back.mass, w.mass);
  EXPECT_EQ(weighted_from_json(j).mass[0], Rational(1, 3));
}

TEST(WeightedStructure, ValidatesMass) {
  const FiniteStructure s = make_graph(2, {});
  EXPECT_NO_THROW((WeightedStructure{s, {Rational(1, 2), Rational(1, 2)}}.validate()));
  EXPECT_THROW((WeightedStructure{s, {Rational(1, 2), Rational(1, 4)}}.validate()), Error);
  EXPECT_THROW((WeightedStructure{s, {Rational(1), Rational(0)}}.validate()), Error);
}

TEST(QfType, DirectedEdgeLiterals) {
  const FiniteStructure s = make_graph(2, {{0, 1}}, false);
  const std::vector<int> tuple{0, 1};
  const auto lits = qf_type_of(s, tuple, edge_language()).literals();
  const std::vector<std::string> expected{"E(x1,x2)", "!E(x2,x1)", "!E(x1,x1)", "!E(x2,x2)", "x1!=x2"};
  for (const auto& e : expected) {
    EXPECT_NE(std::find(lits.begin(), lits.end(), e), lits.end()) << e;
  }
}

TEST(QfType, RepeatedTupleRecordsEquality) {
  const FiniteStructure s = make_graph(2, {{0, 1}}, false);
  const std::vector<int> tuple{0, 0};
  const QfType t = qf_type_of(s, tuple, edge_language());
  EXPECT_EQ(t.equality, (std::vector<int>{0, 0}));
  for (auto bit : t.bits) EXPECT_EQ(bit, 0);
}

TEST(QfType, EmptySublanguageKeepsEqualityOnly) {
  const FiniteStructure s = make_graph(2, {{0, 1}}, false);
  const std::vector<int> tuple{0, 1};
  const QfType t = qf_type_of(s, tuple, RelationalLanguage{});
  EXPECT_TRUE(t.bits.empty());
  EXPECT_EQ(t.equality, (std::vector<int>{0, 1}));
}

TEST(QfType, InvariantUnderAutomorphisms) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 40; ++trial) {
    const FiniteStructure s = random_digraph(rng, 5);
    const auto autos = automorphisms(s);
    for (const auto& g : autos) {
      for (int a = 0; a < 5; ++a) {
        for (int b = 0; b < 5; ++b) {
          const std::vector<int> t{a, b};
          const std::vector<int> gt{g[a], g[b]};
          EXPECT_EQ(qf_type_of(s, t, s.language()), qf_type_of(s, gt, s.language()));
        }
      }
    }
  }
}

TEST(FullHoms, VertexIntoTwoVertices) {
  const FiniteStructure p = make_graph(1, {});
  const FiniteStructure t = make_graph(2, {});
  EXPECT_EQ(enumerate_full_homs(p, t, edge_language()).size(), 2u);
}

TEST(FullHoms, EdgeIntoEdgeSkipsConstantMaps) {
  const FiniteStructure k2 = make_graph(2, {{0, 1}});
  const auto maps = enumerate_full_homs(k2, k2, edge_language());
  EXPECT_EQ(maps, (std::vector<std::vector<int>>{{0, 1}, {1, 0}}));
}

TEST(FullHoms, AbsentRelationGivesNone) {
  const FiniteStructure k2 = make_graph(2, {{0, 1}});
  EXPECT_TRUE(enumerate_full_homs(k2, make_graph(3, {}), edge_language()).empty());
}

TEST(FullHoms, MatchesBruteForceAndTracksToggles) {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 60; ++trial) {
    const FiniteStructure p = random_digraph(rng, 3, true);
    FiniteStructure t = random_digraph(rng, 4, true);
    EXPECT_EQ(enumerate_full_homs(p, t, edge_language()), brute_full_homs(p, t));
    const int a = static_cast<int>(rng() % 4);
    const int b = static_cast<int>(rng() % 4);
    t.set(0, {a, b}, !t.holds(0, {a, b}));
    EXPECT_EQ(enumerate_full_homs(p, t, edge_language()), brute_full_homs(p, t));
  }
}

TEST(TFull, EdgeIntoWeightedEdge) {
  const FiniteStructure k2 = make_graph(2, {{0, 1}});
  const WeightedStructure target{k2, {Rational(1, 2), Rational(1, 2)}};
  EXPECT_EQ(t_full(k2, target, edge_language()), Rational(1, 2));
}

TEST(TFull, VertexIntoLooplessTargetIsOne) {
  const WeightedStructure target{make_graph(3, {{0, 1}}), {Rational(1, 2), Rational(1, 3), Rational(1, 6)}};
  EXPECT_EQ(t_full(make_graph(1, {}), target, edge_language()), Rational(1));
}

TEST(TFull, EdgeIntoEdgelessIsZero) {
  const WeightedStructure target = WeightedStructure::uniform(make_graph(2, {}));
  EXPECT_EQ(t_full(make_graph(2, {{0, 1}}), target, edge_language()), Rational(0));
}

TEST(TFull, NonIncreasingAlongSurjectiveHomomorphisms) {
  // Source: two copies of a vertex split from one target vertex. The map
  // collapsing the copies is a surjective homomorphism with pushforward
  // mass, so densities can only grow toward the image.
  std::mt19937_64 rng(13);
  for (int trial = 0; trial < 60; ++trial) {
    FiniteStructure image = random_digraph(rng, 3, true);
    // Source has vertex 3 as a twin of vertex 0 and loops wherever the
    // image has a loop on 0, so the collapse is a homomorphism.
    FiniteStructure source(edge_language(), 4);
    const std::vector<int> h{0, 1, 2, 0};
    for (int a = 0; a < 4; ++a) {
      for (int b = 0; b < 4; ++b) {
        if (image.holds(0, {h[a], h[b]})) source.set(0, {a, b});
      }
    }
    const WeightedStructure wi{image, {Rational(1, 2), Rational(1, 4), Rational(1, 4)}};
    const WeightedStructure ws{source, {Rational(1, 4), Rational(1, 4), Rational(1, 4), Rational(1, 4)}};
    const FiniteStructure pattern = random_digraph(rng, 2, true);
    EXPECT_LE(t_full(pattern, ws, edge_language()), t_full(pattern, wi, edge_language()));
  }
}

TEST(Automorphisms, PathHasTwo) {
  const auto autos = automorphisms(make_graph(3, {{0, 1}, {1, 2}}));
  EXPECT_EQ(autos, (std::vector<std::vector<int>>{{0, 1, 2}, {2, 1, 0}}));
}

TEST(Automorphisms, FourCycleIsDihedral) {
  EXPECT_EQ(automorphisms(make_graph(4, {{0, 1}, {1, 2}, {2, 3}, {3, 0}})).size(), 8u);
}

TEST(Automorphisms, EdgelessIsSymmetricGroup) {
  EXPECT_EQ(automorphisms(make_graph(5, {})).size(), 120u);
}

TEST(Automorphisms, SizeBound) {
  EXPECT_THROW(automorphisms(make_graph(10, {})), Error);
}

TEST(Automorphisms, FormAGroup) {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 40; ++trial) {
    const auto autos = automorphisms(random_digraph(rng, 5));
    const int n = 5;
    std::vector<int> id(n);
    for (int i = 0; i < n; ++i) id[i] = i;
    EXPECT_NE(std::find(autos.begin(), autos.end(), id), autos.end());
    for (const auto& g : autos) {
      std::vector<int> inv(n);
      for (int i = 0; i < n; ++i) inv[g[i]] = i;
      EXPECT_NE(std::find(autos.begin(), autos.end(), inv), autos.end());
      for (const auto& h : autos) {
        std::vector<int> gh(n);
        for (int i = 0; i < n; ++i) gh[i] = g[h[i]];
        EXPECT_NE(std::find(autos.begin(), autos.end(), gh), autos.end());
      }
    }
  }
}

TEST(InducedSubstructure, Examples) {
  const FiniteStructure k3 = make_graph(3, {{0, 1}, {1, 2}, {0, 2}});
  EXPECT_EQ(induced_substructure(k3, {0, 2}), make_graph(2, {{0, 1}}));
  EXPECT_EQ(induced_substructure(k3, {}).size(), 0);
  const FiniteStructure path = make_graph(3, {{0, 1}, {1, 2}}, false);
  EXPECT_EQ(induced_substructure(path, {0, 2}), make_graph(2, {}, false));
  EXPECT_THROW(induced_substructure(path, {0, 5}), Error);
}
