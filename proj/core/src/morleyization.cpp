#include "layerlimit/morleyization.hpp"

#include <algorithm>
#include <functional>

namespace layerlimit {

// ---- canonical forms ----

namespace {

void canon_rec(const Formula& f, std::vector<std::pair<int, int>>& scope, int depth, int n, Formula& out) {
  out.kind = f.kind;
  out.relation = f.relation;
  out.vars.clear();
  out.children.assign(f.children.size(), Formula{});
  auto lookup = [&](int v) {
    for (auto it = scope.rbegin(); it != scope.rend(); ++it) {
      if (it->first == v) return it->second;
    }
    throw Error("formula", "unmapped variable during canonicalization");
  };
  if (f.kind == NodeKind::kExists) {
    const int id = n + depth;
    scope.push_back({f.vars[0], id});
    out.vars = {id};
    canon_rec(f.children[0], scope, depth + 1, n, out.children[0]);
    scope.pop_back();
    return;
  }
  for (int v : f.vars) out.vars.push_back(lookup(v));
  for (std::size_t i = 0; i < f.children.size(); ++i) canon_rec(f.children[i], scope, depth, n, out.children[i]);
}

int quantifier_depth(const Formula& f) {
  int d = 0;
  for (const auto& c : f.children) d = std::max(d, quantifier_depth(c));
  return d + (f.kind == NodeKind::kExists ? 1 : 0);
}

}  // namespace

NamedFormula canonicalize(const NamedFormula& formula) {
  const std::vector<int> free = formula.root.free_variables();
  const int n = static_cast<int>(free.size());
  std::vector<std::pair<int, int>> scope;
  for (int i = 0; i < n; ++i) scope.push_back({free[i], i});
  NamedFormula out;
  canon_rec(formula.root, scope, 0, n, out.root);
  for (int i = 0; i < n; ++i) out.names.push_back("x" + std::to_string(i + 1));
  const int depth = quantifier_depth(formula.root);
  for (int d = 0; d < depth; ++d) out.names.push_back("y" + std::to_string(d + 1));
  return out;
}

// ---- Fragment ----

namespace {

// Child subformula of a canonical formula, re-canonicalized, together with
// the parent ids of its free variables in canonical order.
std::pair<NamedFormula, std::vector<int>> child_of(const NamedFormula& parent, const Formula& child) {
  NamedFormula sub{child, parent.names};
  std::vector<int> free = child.free_variables();
  return {canonicalize(sub), free};
}

std::string key_of(const NamedFormula& canonical, const RelationalLanguage& lang) {
  return print_formula(canonical.root, lang, canonical.names);
}

}  // namespace

int Fragment::insert_closed(const NamedFormula& canonical, bool add_children) {
  const std::string key = key_of(canonical, base_);
  if (auto it = index_.find(key); it != index_.end()) return it->second;

  const int n = static_cast<int>(canonical.root.free_variables().size());
  FragmentNode node;
  node.kind = canonical.root.kind;
  node.arity = n;
  for (const auto& c : canonical.root.children) {
    auto [sub, parent_ids] = child_of(canonical, c);
    int idx;
    if (add_children) {
      idx = insert_closed(sub, true);
    } else {
      auto it = index_.find(key_of(sub, base_));
      if (it == index_.end()) {
        throw Error("fragment", "fragment is not closed under subformulas: missing '" + key_of(sub, base_) +
                                    "' of '" + key + "'");
      }
      idx = it->second;
    }
    std::vector<int> map;
    for (int id : parent_ids) map.push_back(id < n ? id : -1);
    node.children.push_back(idx);
    node.child_vars.push_back(std::move(map));
  }
  if (node.kind == NodeKind::kExists) {
    const auto& m = node.child_vars[0];
    node.vacuous = std::find(m.begin(), m.end(), -1) == m.end();
  }
  const int id = size();
  formulas_.push_back(canonical);
  nodes_.push_back(std::move(node));
  index_.emplace(key, id);
  return id;
}

Fragment::Fragment(RelationalLanguage base, const std::vector<NamedFormula>& formulas) : base_(std::move(base)) {
  // Insert in order of increasing size so children are checked after they
  // have been added, regardless of input order.
  std::vector<NamedFormula> canon;
  for (const auto& f : formulas) canon.push_back(canonicalize(f));
  std::function<int(const Formula&)> size_of = [&](const Formula& f) {
    int s = 1;
    for (const auto& c : f.children) s += size_of(c);
    return s;
  };
  std::stable_sort(canon.begin(), canon.end(),
                   [&](const NamedFormula& a, const NamedFormula& b) { return size_of(a.root) < size_of(b.root); });
  for (const auto& f : canon) insert_closed(f, false);
}

Fragment Fragment::generate(RelationalLanguage base, const std::vector<NamedFormula>& generators) {
  Fragment frag;
  frag.base_ = std::move(base);
  for (const auto& g : generators) frag.insert_closed(canonicalize(g), true);
  return frag;
}

std::optional<int> Fragment::find(const NamedFormula& f) const {
  auto it = index_.find(key_of(canonicalize(f), base_));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

// ---- L_A ----

namespace {

void for_each_surjection(int n, int r, const std::function<void(const std::vector<int>&)>& visit) {
  std::vector<int> f(n, 0);
  std::function<void(int)> rec = [&](int i) {
    if (i == n) {
      std::vector<char> hit(r, 0);
      for (int v : f) hit[v] = 1;
      if (std::all_of(hit.begin(), hit.end(), [](char h) { return h != 0; })) visit(f);
      return;
    }
    for (int v = 0; v < r; ++v) {
      f[i] = v;
      rec(i + 1);
    }
  };
  rec(0);
}

void for_each_section(const std::vector<int>& iota, int r, const std::function<void(const std::vector<int>&)>& visit) {
  std::vector<std::vector<int>> pre(r);
  for (int j = 0; j < static_cast<int>(iota.size()); ++j) pre[iota[j]].push_back(j);
  std::vector<int> kappa(r, 0);
  std::function<void(int)> rec = [&](int i) {
    if (i == r) {
      visit(kappa);
      return;
    }
    for (int j : pre[i]) {
      kappa[i] = j;
      rec(i + 1);
    }
  };
  rec(0);
}

}  // namespace

MorleyLanguage build_LA(const Fragment& fragment) {
  MorleyLanguage la;
  la.by_formula.resize(fragment.size());
  for (int f = 0; f < fragment.size(); ++f) {
    const int n = fragment.arity(f);
    auto add = [&](const std::vector<int>& iota, const std::vector<int>& kappa) {
      const int q = static_cast<int>(la.triples.size());
      la.language.add("Q" + std::to_string(f) + "_" + std::to_string(la.by_formula[f].size()),
                      static_cast<int>(kappa.size()));
      la.triples.push_back({f, iota, kappa});
      la.by_formula[f].push_back(q);
    };
    if (n == 0) {
      add({}, {});
      continue;
    }
    for (int r = 1; r <= n; ++r) {
      for_each_surjection(n, r, [&](const std::vector<int>& iota) {
        for_each_section(iota, r, [&](const std::vector<int>& kappa) { add(iota, kappa); });
      });
    }
  }
  return la;
}

nlohmann::json MorleyLanguage::index_json(const Fragment& fragment) const {
  nlohmann::json out = nlohmann::json::array();
  for (std::size_t q = 0; q < triples.size(); ++q) {
    const auto& t = triples[q];
    std::vector<int> iota;
    std::vector<int> kappa;
    for (int v : t.iota) iota.push_back(v + 1);
    for (int v : t.kappa) kappa.push_back(v + 1);
    out.push_back({{"relation", language[static_cast<int>(q)].name},
                   {"formula", fragment.text(t.formula)},
                   {"formula_index", t.formula},
                   {"iota", iota},
                   {"kappa", kappa},
                   {"arity", t.rank()}});
  }
  return out;
}

// ---- R_eta ----

NamedFormula R_formula(const Fragment& fragment, const MorleyLanguage& la, int formula_index) {
  if (formula_index < 0 || formula_index >= fragment.size()) {
    throw Error("fragment", "formula is not in the fragment");
  }
  const int n = fragment.arity(formula_index);
  std::vector<Formula> disjuncts;
  for (int q : la.by_formula[formula_index]) {
    const auto& t = la.triples[q];
    std::vector<Formula> parts;
    for (int j = 0; j < n; ++j) {
      for (int l = j + 1; l < n; ++l) {
        parts.push_back(t.iota[j] == t.iota[l] ? Formula::eq(j, l) : Formula::neq(j, l));
      }
    }
    parts.push_back(Formula::atom(q, t.kappa));
    disjuncts.push_back(Formula::conj_all(std::move(parts), 0));
  }
  NamedFormula out;
  out.root = Formula::disj_all(std::move(disjuncts));
  for (int j = 0; j < n; ++j) out.names.push_back("x" + std::to_string(j + 1));
  return out;
}

Formula R_apply(const Fragment& fragment, const MorleyLanguage& la, int formula_index, const std::vector<int>& vars) {
  NamedFormula r = R_formula(fragment, la, formula_index);
  if (static_cast<int>(vars.size()) != fragment.arity(formula_index)) {
    throw Error("fragment", "wrong number of variables for R formula");
  }
  return substitute(r.root, vars);
}

// ---- Th_A ----

namespace {

std::vector<std::string> xs(int n) {
  std::vector<std::string> v;
  for (int i = 0; i < n; ++i) v.push_back("x" + std::to_string(i + 1));
  return v;
}

// forall universals exists w : (a -> b) & w=w
PithySentence dummy_implication(std::vector<std::string> universals, Formula a, Formula b) {
  PithySentence s;
  s.universals = std::move(universals);
  s.witness = "w";
  const int w = s.witness_var();
  s.matrix = Formula::conj(Formula::implies(std::move(a), std::move(b)), Formula::eq(w, w));
  return s;
}

}  // namespace

Theory build_ThA(const Fragment& fragment, const MorleyLanguage& la) {
  Theory th;
  th.language = la.language;

  // Non-redundancy of every Q.
  for (std::size_t q = 0; q < la.triples.size(); ++q) {
    const int r = la.triples[q].rank();
    std::vector<std::string> ys;
    for (int i = 0; i < r; ++i) ys.push_back("y" + std::to_string(i + 1));
    std::vector<int> args;
    for (int i = 0; i < r; ++i) args.push_back(i);
    std::vector<Formula> distinct;
    for (int i = 0; i < r; ++i) {
      for (int j = i + 1; j < r; ++j) distinct.push_back(Formula::neq(i, j));
    }
    // An empty conclusion is written as w=w (with r = 0) or y1=y1.
    const int fallback = r;
    Formula conclusion = distinct.empty() ? Formula::eq(r > 0 ? 0 : fallback, r > 0 ? 0 : fallback)
                                          : Formula::conj_all(std::move(distinct), 0);
    th.sentences.push_back(dummy_implication(ys, Formula::atom(static_cast<int>(q), args), std::move(conclusion)));
  }

  for (int i = 0; i < fragment.size(); ++i) {
    const FragmentNode& node = fragment.node(i);
    const int n = node.arity;
    std::vector<int> self(n);
    for (int j = 0; j < n; ++j) self[j] = j;
    auto mapped = [&](int c, int bound_id) {
      std::vector<int> v;
      for (int p : node.child_vars[c]) v.push_back(p >= 0 ? p : bound_id);
      return v;
    };
    switch (node.kind) {
      case NodeKind::kAtom:
      case NodeKind::kEq:
        break;
      case NodeKind::kNot: {
        Formula a = R_apply(fragment, la, i, self);
        Formula b = Formula::negate(R_apply(fragment, la, node.children[0], mapped(0, -1)));
        th.sentences.push_back(dummy_implication(xs(n), a, b));
        th.sentences.push_back(dummy_implication(xs(n), b, a));
        break;
      }
      case NodeKind::kAnd: {
        Formula a = R_apply(fragment, la, i, self);
        Formula b = Formula::conj(R_apply(fragment, la, node.children[0], mapped(0, -1)),
                                  R_apply(fragment, la, node.children[1], mapped(1, -1)));
        th.sentences.push_back(dummy_implication(xs(n), a, b));
        th.sentences.push_back(dummy_implication(xs(n), b, a));
        break;
      }
      case NodeKind::kExists: {
        Formula a = R_apply(fragment, la, i, self);
        if (node.vacuous) {
          Formula b = R_apply(fragment, la, node.children[0], mapped(0, -1));
          th.sentences.push_back(dummy_implication(xs(n), a, b));
          th.sentences.push_back(dummy_implication(xs(n), b, a));
          break;
        }
        // Forward direction carries the genuine witness y (id n).
        PithySentence fwd;
        fwd.universals = xs(n);
        fwd.witness = "y";
        fwd.matrix = Formula::implies(a, R_apply(fragment, la, node.children[0], mapped(0, n)));
        th.sentences.push_back(std::move(fwd));
        std::vector<std::string> back_vars = xs(n);
        back_vars.push_back("y");
        th.sentences.push_back(
            dummy_implication(back_vars, R_apply(fragment, la, node.children[0], mapped(0, n)), a));
        break;
      }
    }
  }
  return th;
}

Theory morleyize_theory(const std::vector<NamedFormula>& sentences, const Fragment& fragment,
                        const MorleyLanguage& la) {
  Theory th = build_ThA(fragment, la);
  for (const auto& s : sentences) {
    auto idx = fragment.find(s);
    if (!idx) throw Error("fragment", "sentence is not in the fragment");
    if (fragment.arity(*idx) != 0) throw Error("fragment", "theory member has free variables");
    PithySentence p;
    p.witness = "w";
    p.matrix = Formula::conj(R_apply(fragment, la, *idx, {}), Formula::eq(0, 0));
    th.sentences.push_back(std::move(p));
  }
  return th;
}

// ---- structures ----

bool evaluate_fragment_formula(const Fragment& fragment, int formula_index, const FiniteStructure& m,
                               const std::vector<int>& tuple) {
  const NamedFormula& f = fragment.formula(formula_index);
  const auto rel = relation_map(fragment.base_language(), m.language());
  std::vector<int> env(f.names.size() + 1, 0);
  for (std::size_t j = 0; j < tuple.size(); ++j) env[j] = tuple[j];
  return eval_fo(f.root, env, m.size(), [&](int r, const int* args, int k) {
    return m.holds(rel[r], std::span<const int>(args, k));
  });
}

FiniteStructure morleyize_structure(const FiniteStructure& m, const Fragment& fragment, const MorleyLanguage& la) {
  FiniteStructure out(la.language, m.size());
  const int size = m.size();
  for (std::size_t q = 0; q < la.triples.size(); ++q) {
    const auto& t = la.triples[q];
    const int r = t.rank();
    std::vector<int> a(r, 0);
    std::vector<int> expanded(t.iota.size());
    if (r > 0 && size == 0) continue;
    for (;;) {
      std::vector<int> sorted = a;
      std::sort(sorted.begin(), sorted.end());
      if (std::adjacent_find(sorted.begin(), sorted.end()) == sorted.end()) {
        for (std::size_t j = 0; j < t.iota.size(); ++j) expanded[j] = a[t.iota[j]];
        if (evaluate_fragment_formula(fragment, t.formula, m, expanded)) out.set(static_cast<int>(q), a);
      }
      int i = r - 1;
      while (i >= 0 && ++a[i] == size) a[i--] = 0;
      if (i < 0) break;
    }
  }
  return out;
}

bool satisfies(const FiniteStructure& s, const PithySentence& sentence) {
  const int k = sentence.arity();
  const int n = s.size();
  std::vector<int> env(k + 1, 0);
  auto holds = [&](int r, const int* args, int len) { return s.holds(r, std::span<const int>(args, len)); };
  if (n == 0) return k > 0;  // vacuous universal; an existential needs an element
  for (;;) {
    bool found = false;
    for (int y = 0; y < n && !found; ++y) {
      env[k] = y;
      found = eval_qf(sentence.matrix, env.data(), holds);
    }
    if (!found) return false;
    int i = k - 1;
    while (i >= 0 && ++env[i] == n) env[i--] = 0;
    if (i < 0) break;
  }
  return true;
}

bool satisfies(const FiniteStructure& s, const Theory& theory) {
  return std::all_of(theory.sentences.begin(), theory.sentences.end(),
                     [&](const PithySentence& p) { return satisfies(s, p); });
}

MorleyCheck verify_morleyization(const FiniteStructure& m, const Fragment& fragment, const MorleyLanguage& la,
                                 const FiniteStructure& ma, const Theory& th_a) {
  MorleyCheck check;
  if (!ma.is_nonredundant()) {
    check.ok = false;
    check.failure = "Morleyized structure is redundant";
    return check;
  }
  const int size = m.size();
  for (int i = 0; i < fragment.size(); ++i) {
    const int n = fragment.arity(i);
    const NamedFormula r = R_formula(fragment, la, i);
    std::vector<int> a(n, 0);
    if (n > 0 && size == 0) continue;
    for (;;) {
      const bool lhs = evaluate_fragment_formula(fragment, i, m, a);
      const bool rhs = eval_qf(r.root, a.data(), [&](int rel, const int* args, int k) {
        return ma.holds(rel, std::span<const int>(args, k));
      });
      ++check.checked;
      if (lhs != rhs) {
        check.ok = false;
        check.failure = "satisfaction mismatch for '" + fragment.text(i) + "'";
        return check;
      }
      int j = n - 1;
      while (j >= 0 && ++a[j] == size) a[j--] = 0;
      if (j < 0) break;
    }
  }
  for (std::size_t s = 0; s < th_a.sentences.size(); ++s) {
    ++check.checked;
    if (!satisfies(ma, th_a.sentences[s])) {
      check.ok = false;
      check.failure = "Th_A sentence " + std::to_string(s) + " fails: " +
                      print_sentence(th_a.sentences[s], th_a.language);
      return check;
    }
  }
  return check;
}

}  // namespace layerlimit
