#include "layerlimit/structures.hpp"

#include <algorithm>
#include <numeric>

namespace layerlimit {

namespace {

constexpr std::size_t kDenseLimitBits = std::size_t{1} << 24;

// size^arity, saturating at kDenseLimitBits + 1.
std::size_t cells(int size, int arity) {
  std::size_t c = 1;
  for (int i = 0; i < arity; ++i) {
    c *= static_cast<std::size_t>(std::max(size, 1));
    if (c > kDenseLimitBits) return kDenseLimitBits + 1;
  }
  return c;
}

}  // namespace

FiniteStructure::FiniteStructure(RelationalLanguage language, int size)
    : language_(std::move(language)), size_(size) {
  if (size < 0) throw Error("structure", "negative structure size");
  tables_.resize(language_.size());
  for (int r = 0; r < language_.size(); ++r) {
    const std::size_t c = cells(size_, language_[r].arity);
    if (c <= kDenseLimitBits) {
      tables_[r].bits.assign((c + 63) / 64, 0);
    } else {
      tables_[r].dense = false;
    }
  }
}

void FiniteStructure::check_tuple(int relation, std::span<const int> tuple) const {
  if (relation < 0 || relation >= language_.size()) throw Error("structure", "relation index out of range");
  if (static_cast<int>(tuple.size()) != language_[relation].arity) {
    throw Error("arity", "tuple length does not match arity of '" + language_[relation].name + "'");
  }
  for (int a : tuple) {
    if (a < 0 || a >= size_) throw Error("range", "element " + std::to_string(a) + " outside the universe");
  }
}

std::size_t FiniteStructure::encode(std::span<const int> tuple) const {
  std::size_t code = 0;
  for (int a : tuple) code = code * static_cast<std::size_t>(size_) + static_cast<std::size_t>(a);
  return code;
}

bool FiniteStructure::holds(int relation, std::span<const int> tuple) const {
  check_tuple(relation, tuple);
  const Table& t = tables_[relation];
  if (t.dense) {
    const std::size_t c = encode(tuple);
    return ((t.bits[c / 64] >> (c % 64)) & 1U) != 0;
  }
  return t.sparse.count(std::vector<int>(tuple.begin(), tuple.end())) != 0;
}

void FiniteStructure::set(int relation, std::span<const int> tuple, bool value) {
  check_tuple(relation, tuple);
  Table& t = tables_[relation];
  if (t.dense) {
    const std::size_t c = encode(tuple);
    if (value) {
      t.bits[c / 64] |= std::uint64_t{1} << (c % 64);
    } else {
      t.bits[c / 64] &= ~(std::uint64_t{1} << (c % 64));
    }
    return;
  }
  std::vector<int> key(tuple.begin(), tuple.end());
  if (value) {
    t.sparse.insert(std::move(key));
  } else {
    t.sparse.erase(key);
  }
}

std::vector<std::vector<int>> FiniteStructure::tuples(int relation) const {
  const int k = language_[relation].arity;
  const Table& t = tables_[relation];
  std::vector<std::vector<int>> out;
  if (!t.dense) {
    out.assign(t.sparse.begin(), t.sparse.end());
    return out;
  }
  const std::size_t total = cells(size_, k);
  if (size_ == 0 && k > 0) return out;
  for (std::size_t c = 0; c < total; ++c) {
    if (((t.bits[c / 64] >> (c % 64)) & 1U) == 0) continue;
    std::vector<int> tuple(k);
    std::size_t rest = c;
    for (int i = k - 1; i >= 0; --i) {
      tuple[i] = static_cast<int>(rest % static_cast<std::size_t>(size_));
      rest /= static_cast<std::size_t>(size_);
    }
    out.push_back(std::move(tuple));
  }
  return out;
}

std::size_t FiniteStructure::count(int relation) const {
  const Table& t = tables_[relation];
  if (!t.dense) return t.sparse.size();
  std::size_t n = 0;
  for (auto w : t.bits) n += static_cast<std::size_t>(__builtin_popcountll(w));
  return n;
}

bool FiniteStructure::is_nonredundant() const {
  for (int r = 0; r < language_.size(); ++r) {
    if (language_[r].arity < 2) continue;
    for (const auto& t : tuples(r)) {
      std::vector<int> s = t;
      std::sort(s.begin(), s.end());
      if (std::adjacent_find(s.begin(), s.end()) != s.end()) return false;
    }
  }
  return true;
}

bool FiniteStructure::operator==(const FiniteStructure& other) const {
  if (!(language_ == other.language_) || size_ != other.size_) return false;
  for (int r = 0; r < language_.size(); ++r) {
    if (tuples(r) != other.tuples(r)) return false;
  }
  return true;
}

// ---- WeightedStructure ----

void WeightedStructure::validate() const {
  if (static_cast<int>(mass.size()) != structure.size()) {
    throw Error("mass", "mass vector length differs from structure size");
  }
  Rational total = 0;
  for (const auto& m : mass) {
    if (m <= 0) throw Error("mass", "element mass must be strictly positive");
    total += m;
  }
  if (total != 1) throw Error("mass", "masses sum to " + to_string(total) + ", not 1");
}

WeightedStructure WeightedStructure::uniform(FiniteStructure s) {
  WeightedStructure w{std::move(s), {}};
  const int n = w.structure.size();
  w.mass.assign(n, n > 0 ? Rational(1, n) : Rational(0));
  return w;
}

// ---- types ----

std::vector<std::string> QfType::literals() const {
  std::vector<std::string> out;
  auto var = [](int i) { return "x" + std::to_string(i + 1); };
  std::size_t bit = 0;
  for (const auto& spec : relations) {
    // spec is "NAME/ARITY"
    const auto slash = spec.rfind('/');
    const std::string name = spec.substr(0, slash);
    const int k = std::stoi(spec.substr(slash + 1));
    std::vector<int> pat(k, 0);
    if (k > 0 && arity == 0) continue;
    for (;;) {
      std::string lit = (bits[bit++] ? "" : "!") + name + "(";
      for (int i = 0; i < k; ++i) lit += (i ? "," : "") + var(pat[i]);
      out.push_back(lit + ")");
      int i = k - 1;
      while (i >= 0 && ++pat[i] == arity) pat[i--] = 0;
      if (i < 0) break;
    }
  }
  for (int i = 0; i < arity; ++i) {
    for (int j = i + 1; j < arity; ++j) {
      out.push_back(var(i) + (equality[i] == equality[j] ? "=" : "!=") + var(j));
    }
  }
  return out;
}

std::vector<int> relation_map(const RelationalLanguage& sub, const RelationalLanguage& ambient) {
  std::vector<int> map(sub.size());
  for (int r = 0; r < sub.size(); ++r) {
    auto id = ambient.find(sub[r].name);
    if (!id || ambient[*id].arity != sub[r].arity) {
      throw Error("unknown-relation", "relation '" + sub[r].name + "' not in the ambient language");
    }
    map[r] = *id;
  }
  return map;
}

QfType qf_type_of(const FiniteStructure& structure, std::span<const int> tuple, const RelationalLanguage& sublanguage) {
  QfType type;
  type.arity = static_cast<int>(tuple.size());
  int next_block = 0;
  for (int i = 0; i < type.arity; ++i) {
    int b = -1;
    for (int j = 0; j < i && b < 0; ++j) {
      if (tuple[j] == tuple[i]) b = type.equality[j];
    }
    type.equality.push_back(b >= 0 ? b : next_block++);
  }
  const auto rel = relation_map(sublanguage, structure.language());
  std::vector<int> args;
  for (int r = 0; r < sublanguage.size(); ++r) {
    const int k = sublanguage[r].arity;
    type.relations.push_back(sublanguage[r].name + "/" + std::to_string(k));
    std::vector<int> pat(k, 0);
    if (k > 0 && type.arity == 0) continue;
    for (;;) {
      args.assign(k, 0);
      for (int i = 0; i < k; ++i) args[i] = tuple[pat[i]];
      type.bits.push_back(structure.holds(rel[r], args) ? 1 : 0);
      int i = k - 1;
      while (i >= 0 && ++pat[i] == type.arity) pat[i--] = 0;
      if (i < 0) break;
    }
  }
  return type;
}

// ---- homomorphisms ----

namespace detail {

std::vector<std::vector<HomConstraint>> hom_constraints(const FiniteStructure& pattern) {
  const int n = pattern.size();
  std::vector<std::vector<HomConstraint>> groups(n + 1);
  const auto& lang = pattern.language();
  for (int r = 0; r < lang.size(); ++r) {
    const int k = lang[r].arity;
    if (k == 0) {
      groups[n].push_back({r, {}, pattern.holds(r, std::span<const int>())});
      continue;
    }
    if (n == 0) continue;
    std::vector<int> t(k, 0);
    for (;;) {
      const int last = *std::max_element(t.begin(), t.end());
      groups[last].push_back({r, t, pattern.holds(r, t)});
      int i = k - 1;
      while (i >= 0 && ++t[i] == n) t[i--] = 0;
      if (i < 0) break;
    }
  }
  return groups;
}

}  // namespace detail

namespace {

// Adapter exposing a FiniteStructure through the raw-pointer holds interface.
struct StructureTarget {
  const FiniteStructure& s;
  int size() const { return s.size(); }
  bool holds(int rel, const int* args, int n) const { return s.holds(rel, std::span<const int>(args, n)); }
};

// Re-expresses a pattern over the sublanguage so its relation indices line
// up with rel_map.
FiniteStructure restrict_pattern(const FiniteStructure& pattern, const RelationalLanguage& sub) {
  const auto map = relation_map(sub, pattern.language());
  FiniteStructure p(sub, pattern.size());
  for (int r = 0; r < sub.size(); ++r) {
    for (const auto& t : pattern.tuples(map[r])) p.set(r, t);
  }
  return p;
}

}  // namespace

std::vector<std::vector<int>> enumerate_full_homs(const FiniteStructure& pattern, const FiniteStructure& target,
                                                  const RelationalLanguage& sublanguage) {
  const FiniteStructure p = restrict_pattern(pattern, sublanguage);
  const auto rel_map = relation_map(sublanguage, target.language());
  std::vector<std::vector<int>> out;
  for_each_full_hom(p, StructureTarget{target}, rel_map, [&](const std::vector<int>& f) {
    out.push_back(f);
    return true;
  });
  return out;
}

Rational t_full(const FiniteStructure& pattern, const WeightedStructure& target, const RelationalLanguage& sublanguage) {
  const FiniteStructure p = restrict_pattern(pattern, sublanguage);
  const auto rel_map = relation_map(sublanguage, target.structure.language());
  Rational total = 0;
  for_each_full_hom(p, StructureTarget{target.structure}, rel_map, [&](const std::vector<int>& f) {
    Rational w = 1;
    for (int a : f) w *= target.mass[a];
    total += w;
    return true;
  });
  return total;
}

// ---- automorphisms ----

std::vector<std::vector<int>> automorphisms(const FiniteStructure& s, int bound) {
  const int n = s.size();
  if (n > bound) {
    throw Error("bound", "structure of size " + std::to_string(n) + " exceeds the automorphism bound " +
                             std::to_string(bound));
  }
  const auto groups = detail::hom_constraints(s);
  std::vector<std::vector<int>> out;
  std::vector<int> perm(n, -1);
  std::vector<char> used(n, 0);
  std::vector<int> image;
  std::function<void(int)> rec = [&](int v) {
    if (v == n) {
      out.push_back(perm);
      return;
    }
    for (int a = 0; a < n; ++a) {
      if (used[a]) continue;
      perm[v] = a;
      bool ok = true;
      for (const auto& c : groups[v]) {
        image.resize(c.args.size());
        for (std::size_t i = 0; i < c.args.size(); ++i) image[i] = perm[c.args[i]];
        if (s.holds(c.relation, image) != c.want) {
          ok = false;
          break;
        }
      }
      if (!ok) continue;
      used[a] = 1;
      rec(v + 1);
      used[a] = 0;
    }
    perm[v] = -1;
  };
  rec(0);
  return out;
}

FiniteStructure induced_substructure(const FiniteStructure& s, const std::vector<int>& subset) {
  std::vector<int> sorted = subset;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
    throw Error("range", "subset contains a repeated element");
  }
  for (int a : sorted) {
    if (a < 0 || a >= s.size()) throw Error("range", "element " + std::to_string(a) + " outside the universe");
  }
  std::vector<int> relabel(s.size(), -1);
  for (std::size_t i = 0; i < sorted.size(); ++i) relabel[sorted[i]] = static_cast<int>(i);
  FiniteStructure out(s.language(), static_cast<int>(sorted.size()));
  for (int r = 0; r < s.language().size(); ++r) {
    for (const auto& t : s.tuples(r)) {
      std::vector<int> u(t.size());
      bool inside = true;
      for (std::size_t i = 0; i < t.size() && inside; ++i) {
        u[i] = relabel[t[i]];
        inside = u[i] >= 0;
      }
      if (inside) out.set(r, u);
    }
  }
  return out;
}

// ---- JSON ----

nlohmann::json structure_to_json(const FiniteStructure& s) {
  nlohmann::json j;
  j["language"] = nlohmann::json::array();
  nlohmann::json rels = nlohmann::json::object();
  for (int r = 0; r < s.language().size(); ++r) {
    const auto& sym = s.language()[r];
    j["language"].push_back({sym.name, sym.arity});
    rels[sym.name] = s.tuples(r);
  }
  j["size"] = s.size();
  j["relations"] = rels;
  return j;
}

nlohmann::json weighted_to_json(const WeightedStructure& s) {
  nlohmann::json j = structure_to_json(s.structure);
  j["mass"] = nlohmann::json::array();
  for (const auto& m : s.mass) j["mass"].push_back(to_string(m));
  return j;
}

FiniteStructure structure_from_json(const nlohmann::json& j) {
  try {
    RelationalLanguage lang;
    for (const auto& entry : j.at("language")) lang.add(entry.at(0).get<std::string>(), entry.at(1).get<int>());
    FiniteStructure s(lang, j.at("size").get<int>());
    if (j.contains("relations")) {
      for (const auto& [name, table] : j.at("relations").items()) {
        const int r = lang.index_of(name);
        if (table.is_boolean()) {
          if (lang[r].arity != 0) throw Error("json", "boolean table for relation of positive arity");
          s.set(r, std::span<const int>(), table.get<bool>());
          continue;
        }
        for (const auto& t : table) s.set(r, t.get<std::vector<int>>());
      }
    }
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw Error("json", std::string("malformed structure JSON: ") + e.what());
  }
}

WeightedStructure weighted_from_json(const nlohmann::json& j) {
  FiniteStructure s = structure_from_json(j);
  if (!j.contains("mass")) return WeightedStructure::uniform(std::move(s));
  WeightedStructure w{std::move(s), {}};
  for (const auto& m : j.at("mass")) {
    if (m.is_string()) {
      w.mass.push_back(parse_rational(m.get<std::string>()));
    } else if (m.is_number_integer()) {
      w.mass.emplace_back(m.get<long long>());
    } else {
      throw Error("json", "masses must be rational strings such as \"1/2\"");
    }
  }
  w.validate();
  return w;
}

FiniteStructure make_graph(int n, const std::vector<std::pair<int, int>>& edges, bool symmetric,
                           const std::string& name) {
  RelationalLanguage lang;
  lang.add(name, 2);
  FiniteStructure g(lang, n);
  for (auto [a, b] : edges) {
    g.set(0, {a, b});
    if (symmetric) g.set(0, {b, a});
  }
  return g;
}

}  // namespace layerlimit
