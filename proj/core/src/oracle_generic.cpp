#include "layerlimit/errors.hpp"
#include "layerlimit/oracle.hpp"

#include <algorithm>
#include <cstring>

namespace layerlimit {

namespace {

// Set partitions of k variables as restricted growth strings.
std::vector<std::vector<int>> set_partitions(int k) {
  std::vector<std::vector<int>> out;
  std::vector<int> a(k, 0);
  std::function<void(int, int)> rec = [&](int i, int blocks) {
    if (i == k) {
      out.push_back(a);
      return;
    }
    for (int b = 0; b <= blocks; ++b) {
      a[i] = b;
      rec(i + 1, std::max(blocks, b + 1));
    }
  };
  rec(0, 0);
  return out;
}

int block_count(const std::vector<int>& p) {
  int d = 0;
  for (int v : p) d = std::max(d, v + 1);
  return d;
}

// Whether a sentence needs a new element in a structureless set of size c.
bool pureset_needs_new(const PithySentence& s, std::uint64_t c) {
  const int k = s.arity();
  auto holds = [](int, const int*, int) { return false; };
  bool need = false;
  std::vector<int> env(k + 1);
  for (const auto& p : set_partitions(k)) {
    const int d = block_count(p);
    if (k > 0 && static_cast<std::uint64_t>(d) > c) continue;
    for (int i = 0; i < k; ++i) env[i] = p[i];
    bool eq = false;
    for (int b = 0; b < d && !eq; ++b) {
      env[k] = b;
      eq = eval_qf(s.matrix, env.data(), holds);
    }
    if (eq) continue;
    env[k] = d;
    if (!eval_qf(s.matrix, env.data(), holds)) throw Error("witness", "sentence has no witness in a pure set");
    // With no parameters any existing element is as good as a new one.
    if (k == 0 && c > 0) continue;
    need = true;
  }
  return need;
}

std::uint64_t checked_power(std::uint64_t c, int k, std::uint64_t budget, const char* what) {
  std::uint64_t total = 1;
  for (int i = 0; i < k; ++i) {
    if (c != 0 && total > budget / c) throw Error("budget", std::string(what) + " exceeds the exhaustive tuple budget");
    total *= c;
  }
  return total;
}

}  // namespace

// ---- PureSetOracle ----

PureSetOracle::PureSetOracle(RelationalLanguage language, Bounds bounds)
    : ModelOracle(std::move(language), bounds) {}

bool PureSetOracle::holds(int relation, const Handle*, int n) const {
  if (relation < 0 || relation >= language_.size() || language_[relation].arity != n) {
    throw Error("oracle", "relation query does not match the language");
  }
  return false;
}

std::string PureSetOracle::describe(Handle h) const {
  if (auto it = natural_of_.find(h); it != natural_of_.end()) return "n" + std::to_string(it->second);
  return "e" + std::to_string(h);
}

Handle PureSetOracle::fresh_element(const Carrier& exclude) {
  for (std::uint64_t n = 0;; ++n) {
    auto it = naturals_.find(n);
    if (it == naturals_.end()) {
      const Handle h = allocate(1);
      naturals_.emplace(n, h);
      natural_of_.emplace(h, n);
      return h;
    }
    if (!exclude.contains(it->second)) return it->second;
  }
}

CarrierPtr PureSetOracle::duplicate(const CarrierPtr& enumerated) {
  const std::uint64_t k = enumerated->size();
  if (k == 0) return Carrier::empty();
  return Carrier::range(allocate(2 * k), 2 * k);
}

WitnessResult PureSetOracle::pi2_witnesses(const CarrierPtr& current, const PithySentence& sentence) {
  WitnessResult result;
  result.method = "equality-pattern analysis";
  std::vector<HandleRange> ranges;
  if (pureset_needs_new(sentence, current->size())) {
    ranges.push_back({fresh_element(*current), 1});
    result.added = 1;
    result.method += " +new";
  }
  result.extended = extend(current, ranges);
  return result;
}

std::optional<bool> PureSetOracle::certify_duplicate(const CarrierPtr& enumerated, const CarrierPtr& copies) const {
  // Without relations any 2k distinct handles duplicate every enumeration.
  return copies->size() == 2 * enumerated->size() &&
         (copies->size() == 0 || copies->kind() == Carrier::Kind::kRange);
}

std::optional<bool> PureSetOracle::certify_witnesses(const CarrierPtr& current, const PithySentence& sentence,
                                                     const CarrierPtr& extended) const {
  try {
    const bool need = pureset_needs_new(sentence, current->size());
    return !need || extended->size() > current->size();
  } catch (const Error&) {
    return false;
  }
}

bool PureSetOracle::type_realized(const CarrierPtr& current, const QfTypeSpec& type,
                                  const std::vector<int>& sublanguage) const {
  auto holds = [](int, const int*, int) { return false; };
  for (const auto& p : set_partitions(type.arity)) {
    if (static_cast<std::uint64_t>(block_count(p)) > current->size()) continue;
    bool all = true;
    for (const auto& lit : type.literals) {
      std::vector<int> rels;
      lit.collect_relations(rels);
      bool kept = true;
      for (int r : rels) kept = kept && std::binary_search(sublanguage.begin(), sublanguage.end(), r);
      if (kept && !eval_qf(lit, p.data(), holds)) {
        all = false;
        break;
      }
    }
    if (all) return true;
  }
  return false;
}

// ---- ExplicitOracle ----

std::string ExplicitOracle::key(const Handle* args, int n) {
  std::string k(static_cast<std::size_t>(n) * sizeof(Handle), '\0');
  if (n > 0) std::memcpy(k.data(), args, k.size());
  return k;
}

bool ExplicitOracle::holds(int relation, const Handle* args, int n) const {
  if (relation < 0 || relation >= language_.size() || language_[relation].arity != n) {
    throw Error("oracle", "relation query does not match the language");
  }
  if (tables_.empty()) return false;
  return tables_[relation].count(key(args, n)) > 0;
}

std::string ExplicitOracle::describe(Handle h) const { return "e" + std::to_string(h); }

Handle ExplicitOracle::add_element() {
  ++elements_;
  return allocate(1);
}

void ExplicitOracle::set_tuple(int relation, const std::vector<Handle>& args) {
  if (tables_.empty()) tables_.resize(language_.size());
  tables_[relation].insert(key(args.data(), static_cast<int>(args.size())));
}

void ExplicitOracle::drop_tuples_of(Handle h) {
  for (auto& table : tables_) {
    for (auto it = table.begin(); it != table.end();) {
      bool has = false;
      for (std::size_t off = 0; off < it->size(); off += sizeof(Handle)) {
        Handle v = 0;
        std::memcpy(&v, it->data() + off, sizeof(Handle));
        has = has || v == h;
      }
      it = has ? table.erase(it) : std::next(it);
    }
  }
}

bool ExplicitOracle::create_witness(const std::vector<Handle>& x, const PithySentence& sentence, Handle& out) {
  std::vector<Handle> ctx;
  for (Handle h : x) {
    if (std::find(ctx.begin(), ctx.end(), h) == ctx.end()) ctx.push_back(h);
  }
  const Handle y = add_element();
  ctx.push_back(y);
  const int u = static_cast<int>(ctx.size());
  // Atoms over ctx that mention y.
  std::vector<std::pair<int, std::vector<Handle>>> atoms;
  for (int r = 0; r < language_.size(); ++r) {
    const int arity = language_[r].arity;
    if (arity == 0) continue;
    std::vector<int> idx(arity, 0);
    while (true) {
      std::vector<Handle> t(arity);
      bool has_y = false;
      for (int i = 0; i < arity; ++i) {
        t[i] = ctx[idx[i]];
        has_y = has_y || t[i] == y;
      }
      std::vector<Handle> sorted(t);
      std::sort(sorted.begin(), sorted.end());
      const bool distinct = std::adjacent_find(sorted.begin(), sorted.end()) == sorted.end();
      if (has_y && (distinct || !nonredundant())) atoms.emplace_back(r, t);
      int i = arity - 1;
      for (; i >= 0; --i) {
        if (++idx[i] < u) break;
        idx[i] = 0;
      }
      if (i < 0) break;
    }
  }
  if (static_cast<int>(atoms.size()) > bounds_.witness_patterns) {
    throw Error("budget", "a new witness would need " + std::to_string(atoms.size()) +
                              " atom choices; raise witness_patterns");
  }
  std::vector<Handle> env(x);
  env.push_back(y);
  auto real_holds = [this](int rel, const Handle* args, int n) { return holds(rel, args, n); };
  for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << atoms.size()); ++mask) {
    if (mask > 0) drop_tuples_of(y);
    for (std::size_t a = 0; a < atoms.size(); ++a) {
      if ((mask >> a) & 1U) set_tuple(atoms[a].first, atoms[a].second);
    }
    if (eval_qf(sentence.matrix, env.data(), real_holds) && admissible_with(y)) {
      out = y;
      return true;
    }
  }
  drop_tuples_of(y);
  return false;
}

WitnessResult ExplicitOracle::pi2_witnesses(const CarrierPtr& current, const PithySentence& sentence) {
  const int k = sentence.arity();
  const std::uint64_t c = current->size();
  const std::uint64_t total = checked_power(c, k, bounds_.exhaustive_tuples, "witness search");
  const auto elems = current->materialize();
  const bool scan_current = c == 0 || total <= bounds_.exhaustive_tuples / c;
  std::vector<Handle> added;
  std::vector<Handle> env(k + 1);
  std::vector<std::uint64_t> idx(k, 0);
  auto real_holds = [this](int rel, const Handle* args, int n) { return holds(rel, args, n); };
  auto good = [&](Handle y) {
    env[k] = y;
    return eval_qf(sentence.matrix, env.data(), real_holds);
  };
  for (std::uint64_t t = 0; t < total; ++t) {
    for (int i = 0; i < k; ++i) env[i] = elems[idx[i]];
    bool ok = false;
    for (int i = 0; i < k && !ok; ++i) ok = good(env[i]);
    for (std::size_t i = 0; i < added.size() && !ok; ++i) ok = good(added[i]);
    if (scan_current) {
      for (std::uint64_t i = 0; i < c && !ok; ++i) ok = good(elems[i]);
    }
    if (!ok) {
      std::vector<Handle> x(env.begin(), env.begin() + k);
      Handle y = 0;
      if (!create_witness(x, sentence, y)) {
        throw Error("witness", "no admissible one-point extension satisfies the sentence matrix");
      }
      added.push_back(y);
    }
    for (int i = k - 1; i >= 0; --i) {
      if (++idx[i] < c) break;
      idx[i] = 0;
    }
  }
  WitnessResult result;
  std::vector<HandleRange> ranges;
  for (Handle h : added) ranges.push_back({h, 1});
  result.added = added.size();
  result.extended = extend(current, ranges);
  result.method = "tuple search";
  return result;
}

// ---- ForbidOracle ----

ForbidOracle::ForbidOracle(RelationalLanguage language, std::vector<FiniteStructure> forbidden, Bounds bounds)
    : ExplicitOracle(std::move(language), bounds), forbidden_(std::move(forbidden)) {
  for (const auto& f : forbidden_) {
    if (!f.is_nonredundant()) throw Error("oracle", "forbidden structures must be non-redundant");
  }
}

bool ForbidOracle::admissible_with(Handle h) const {
  for (const auto& f : forbidden_) {
    const int n = f.size();
    if (n == 0) continue;
    std::vector<int> rel_map;
    for (const auto& rel : f.language().relations()) rel_map.push_back(language_.index_of(rel.name));
    const auto groups = detail::hom_constraints(f);
    bool zero_ok = true;
    for (const auto& c : groups.back()) {
      zero_ok = zero_ok && holds(rel_map[c.relation], nullptr, 0) == c.want;
    }
    if (!zero_ok) continue;
    std::vector<Handle> image(n);
    Handle args[kMaxArity];
    auto ok_at = [&](int v) {
      for (const auto& c : groups[v]) {
        const int k = static_cast<int>(c.args.size());
        for (int i = 0; i < k; ++i) args[i] = image[c.args[i]];
        if (holds(rel_map[c.relation], args, k) != c.want) return false;
      }
      return true;
    };
    for (int pinned = 0; pinned < n; ++pinned) {
      // Injective maps with vertex `pinned` sent to h.
      std::function<bool(int)> rec = [&](int v) -> bool {
        if (v == n) return true;
        if (v == pinned) {
          image[v] = h;
          return ok_at(v) && rec(v + 1);
        }
        for (Handle e = 0; e < elements_; ++e) {
          if (e == h || std::find(image.begin(), image.begin() + v, e) != image.begin() + v) continue;
          image[v] = e;
          if (ok_at(v) && rec(v + 1)) return true;
        }
        return false;
      };
      if (rec(0)) return false;
    }
  }
  return true;
}

Handle ForbidOracle::fresh_element(const Carrier&) {
  const Handle h = add_element();
  if (!admissible_with(h)) throw Error("oracle", "a new isolated element completes a forbidden configuration");
  return h;
}

CarrierPtr ForbidOracle::duplicate(const CarrierPtr& enumerated) {
  const std::uint64_t k = enumerated->size();
  if (k == 0) return Carrier::empty();
  const auto b = enumerated->materialize();
  const Handle first = next_handle();
  for (std::uint64_t i = 0; i < 2 * k; ++i) add_element();
  for (int r = 0; r < language_.size(); ++r) {
    const int arity = language_[r].arity;
    if (arity == 0) continue;
    checked_power(k, arity, bounds_.exhaustive_tuples, "duplication");
    std::vector<std::uint64_t> idx(arity, 0);
    std::vector<Handle> t(arity), copy(arity);
    while (true) {
      for (int i = 0; i < arity; ++i) t[i] = b[idx[i]];
      if (holds(r, t.data(), arity)) {
        for (std::uint64_t alpha = 0; alpha < (std::uint64_t{1} << arity); ++alpha) {
          for (int i = 0; i < arity; ++i) copy[i] = first + 2 * idx[i] + ((alpha >> i) & 1U);
          set_tuple(r, copy);
        }
      }
      int i = arity - 1;
      for (; i >= 0; --i) {
        if (++idx[i] < k) break;
        idx[i] = 0;
      }
      if (i < 0) break;
    }
  }
  for (std::uint64_t l = 0; l < k; ++l) {
    for (int j = 0; j < 2; ++j) {
      if (!admissible_with(first + 2 * l + j)) {
        throw Error("duplication", "copy of position " + std::to_string(l + 1) +
                                       " completes a forbidden configuration");
      }
    }
  }
  return Carrier::range(first, 2 * k);
}

// ---- FiniteModelOracle ----

FiniteModelOracle::FiniteModelOracle(FiniteStructure structure, Bounds bounds)
    : ExplicitOracle(structure.language(), bounds), structure_(std::move(structure)) {
  for (int i = 0; i < structure_.size(); ++i) add_element();
  for (int r = 0; r < language_.size(); ++r) {
    for (const auto& t : structure_.tuples(r)) set_tuple(r, std::vector<Handle>(t.begin(), t.end()));
  }
}

Handle FiniteModelOracle::fresh_element(const Carrier& exclude) {
  for (Handle h = 0; h < elements_; ++h) {
    if (!exclude.contains(h)) return h;
  }
  throw Error("exhausted", "finite oracle has no element outside the excluded set");
}

CarrierPtr FiniteModelOracle::duplicate(const CarrierPtr&) {
  throw Error("duplication", "a finite test oracle cannot duplicate");
}

WitnessResult FiniteModelOracle::pi2_witnesses(const CarrierPtr& current, const PithySentence& sentence) {
  const int k = sentence.arity();
  const std::uint64_t c = current->size();
  const std::uint64_t total = checked_power(c, k, bounds_.exhaustive_tuples, "witness search");
  const auto elems = current->materialize();
  std::vector<Handle> added;
  std::vector<Handle> env(k + 1);
  std::vector<std::uint64_t> idx(k, 0);
  auto real_holds = [this](int rel, const Handle* args, int n) { return holds(rel, args, n); };
  for (std::uint64_t t = 0; t < total; ++t) {
    for (int i = 0; i < k; ++i) env[i] = elems[idx[i]];
    bool ok = false;
    for (Handle y = 0; y < elements_ && !ok; ++y) {
      env[k] = y;
      if (eval_qf(sentence.matrix, env.data(), real_holds)) {
        ok = true;
        if (!current->contains(y) && std::find(added.begin(), added.end(), y) == added.end()) added.push_back(y);
      }
    }
    if (!ok) throw Error("witness", "the finite oracle does not satisfy the sentence");
    for (int i = k - 1; i >= 0; --i) {
      if (++idx[i] < c) break;
      idx[i] = 0;
    }
  }
  WitnessResult result;
  std::vector<HandleRange> ranges;
  for (Handle h : added) ranges.push_back({h, 1});
  result.added = added.size();
  result.extended = extend(current, ranges);
  result.method = "exhaustive search";
  return result;
}

}  // namespace layerlimit
