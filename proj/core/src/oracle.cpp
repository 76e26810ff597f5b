#include "layerlimit/oracle.hpp"

#include "layerlimit/errors.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <sstream>

namespace layerlimit {

// ---- Carrier ----

CarrierPtr Carrier::empty() { return of({}); }

CarrierPtr Carrier::of(std::vector<Handle> handles) {
  auto c = std::make_shared<Carrier>();
  c->kind_ = Kind::kExplicit;
  c->size_ = handles.size();
  c->handles_ = std::move(handles);
  return c;
}

CarrierPtr Carrier::range(Handle first, std::uint64_t count) {
  auto c = std::make_shared<Carrier>();
  c->kind_ = Kind::kRange;
  c->size_ = count;
  c->ranges_.push_back({first, count});
  return c;
}

CarrierPtr Carrier::append(CarrierPtr base, std::vector<HandleRange> added) {
  std::erase_if(added, [](const HandleRange& r) { return r.count == 0; });
  if (added.empty()) return base;
  auto c = std::make_shared<Carrier>();
  c->kind_ = Kind::kAppend;
  c->size_ = base->size();
  for (const auto& r : added) {
    c->offsets_.push_back(c->size_);
    c->size_ += r.count;
  }
  c->base_ = std::move(base);
  c->ranges_ = std::move(added);
  return c;
}

Handle Carrier::at(std::uint64_t i) const {
  const Carrier* c = this;
  while (true) {
    if (i >= c->size_) throw Error("carrier", "carrier index out of range");
    switch (c->kind_) {
      case Kind::kExplicit:
        return c->handles_[i];
      case Kind::kRange:
        return c->ranges_[0].first + i;
      case Kind::kAppend: {
        if (i < c->base_->size()) {
          c = c->base_.get();
          continue;
        }
        auto it = std::upper_bound(c->offsets_.begin(), c->offsets_.end(), i);
        const auto r = static_cast<std::size_t>(it - c->offsets_.begin()) - 1;
        return c->ranges_[r].first + (i - c->offsets_[r]);
      }
    }
  }
}

std::optional<std::uint64_t> Carrier::position(Handle h) const {
  const Carrier* c = this;
  while (true) {
    switch (c->kind_) {
      case Kind::kExplicit: {
        if (c->sorted_.size() != c->handles_.size()) {
          c->sorted_ = c->handles_;
          std::sort(c->sorted_.begin(), c->sorted_.end());
        }
        if (!std::binary_search(c->sorted_.begin(), c->sorted_.end(), h)) return std::nullopt;
        auto it = std::find(c->handles_.begin(), c->handles_.end(), h);
        return static_cast<std::uint64_t>(it - c->handles_.begin());
      }
      case Kind::kRange: {
        const auto& r = c->ranges_[0];
        if (h >= r.first && h - r.first < r.count) return h - r.first;
        return std::nullopt;
      }
      case Kind::kAppend:
        for (std::size_t r = 0; r < c->ranges_.size(); ++r) {
          const auto& range = c->ranges_[r];
          if (h >= range.first && h - range.first < range.count) return c->offsets_[r] + (h - range.first);
        }
        c = c->base_.get();
        continue;
    }
  }
}

bool Carrier::contains(Handle h) const {
  const Carrier* c = this;
  while (true) {
    switch (c->kind_) {
      case Kind::kExplicit:
        if (c->sorted_.size() != c->handles_.size()) {
          c->sorted_ = c->handles_;
          std::sort(c->sorted_.begin(), c->sorted_.end());
        }
        return std::binary_search(c->sorted_.begin(), c->sorted_.end(), h);
      case Kind::kRange:
        return h >= c->ranges_[0].first && h - c->ranges_[0].first < c->ranges_[0].count;
      case Kind::kAppend:
        for (const auto& r : c->ranges_) {
          if (h >= r.first && h - r.first < r.count) return true;
        }
        c = c->base_.get();
        continue;
    }
  }
}

std::vector<Handle> Carrier::materialize() const {
  std::vector<Handle> out;
  out.reserve(size_);
  switch (kind_) {
    case Kind::kExplicit:
      return handles_;
    case Kind::kRange:
      for (std::uint64_t i = 0; i < size_; ++i) out.push_back(ranges_[0].first + i);
      return out;
    case Kind::kAppend:
      out = base_->materialize();
      for (const auto& r : ranges_) {
        for (std::uint64_t i = 0; i < r.count; ++i) out.push_back(r.first + i);
      }
      return out;
  }
  return out;
}

// ---- ModelOracle ----

ModelOracle::ModelOracle(RelationalLanguage language, Bounds bounds)
    : language_(std::move(language)), bounds_(bounds) {}

Handle ModelOracle::allocate(std::uint64_t count) {
  const Handle first = next_;
  next_ += count;
  return first;
}

CarrierPtr ModelOracle::extend(const CarrierPtr& base, const std::vector<HandleRange>& added) {
  return Carrier::append(base, added);
}

std::optional<bool> ModelOracle::certify_duplicate(const CarrierPtr&, const CarrierPtr&) const {
  return std::nullopt;
}

std::optional<bool> ModelOracle::certify_witnesses(const CarrierPtr&, const PithySentence&,
                                                   const CarrierPtr&) const {
  return std::nullopt;
}

namespace {

// Literals of a type that survive restriction to a sublanguage: equalities
// and (negated) atoms whose relation is in the sublanguage.
bool literal_kept(const Formula& lit, const std::vector<int>& sublanguage) {
  std::vector<int> rels;
  lit.collect_relations(rels);
  for (int r : rels) {
    if (!std::binary_search(sublanguage.begin(), sublanguage.end(), r)) return false;
  }
  return true;
}

}  // namespace

bool ModelOracle::type_realized(const CarrierPtr& current, const QfTypeSpec& type,
                                const std::vector<int>& sublanguage) const {
  std::vector<const Formula*> kept;
  for (const auto& lit : type.literals) {
    if (literal_kept(lit, sublanguage)) kept.push_back(&lit);
  }
  const std::uint64_t c = current->size();
  if (type.arity > 0 && c == 0) return false;
  std::uint64_t total = 1;
  for (int i = 0; i < type.arity; ++i) {
    if (total > bounds_.exhaustive_tuples / std::max<std::uint64_t>(c, 1)) {
      throw Error("budget", "type omission check exceeds the exhaustive tuple budget");
    }
    total *= c;
  }
  const auto elems = current->materialize();
  std::vector<Handle> env(std::max(type.arity, 1));
  std::vector<std::uint64_t> idx(type.arity, 0);
  auto holds = [this](int rel, const Handle* args, int n) { return this->holds(rel, args, n); };
  for (std::uint64_t t = 0; t < total; ++t) {
    for (int i = 0; i < type.arity; ++i) env[i] = elems[idx[i]];
    bool all = true;
    for (const Formula* lit : kept) {
      if (!eval_qf(*lit, env.data(), holds)) {
        all = false;
        break;
      }
    }
    if (all) return true;
    for (int i = type.arity - 1; i >= 0; --i) {
      if (++idx[i] < c) break;
      idx[i] = 0;
    }
  }
  return false;
}

std::vector<int> ModelOracle::omission_certificate(const CarrierPtr& current, const QfTypeSpec& type,
                                                   const std::vector<int>& required) {
  std::vector<int> out = required;
  if (current->size() > 0 || type.arity == 0) {
    // Finite language: the whole language is a valid certificate candidate.
    for (int r = 0; r < language_.size(); ++r) out.push_back(r);
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  if (type_realized(current, type, out)) {
    throw Error("certificate", "type is realized in the current carrier: " + print_type(type, language_));
  }
  return out;
}

Handle ModelOracle::fresh_element(const std::vector<Handle>& exclude) {
  return fresh_element(*Carrier::of(exclude));
}

std::pair<std::vector<Handle>, std::vector<Handle>> ModelOracle::duplicate(const std::vector<Handle>& enumerated) {
  const auto copies = duplicate(Carrier::of(enumerated));
  std::pair<std::vector<Handle>, std::vector<Handle>> out;
  for (std::size_t l = 0; l < enumerated.size(); ++l) {
    out.first.push_back(copies->at(2 * l));
    out.second.push_back(copies->at(2 * l + 1));
  }
  return out;
}

std::vector<Handle> ModelOracle::pi2_witnesses(const std::vector<Handle>& current, const PithySentence& sentence) {
  const auto result = pi2_witnesses(Carrier::of(current), sentence);
  std::vector<Handle> out;
  for (std::uint64_t i = current.size(); i < result.extended->size(); ++i) out.push_back(result.extended->at(i));
  return out;
}

std::vector<int> ModelOracle::omission_certificate(const std::vector<Handle>& current, const QfTypeSpec& type,
                                                   const std::vector<int>& required) {
  return omission_certificate(Carrier::of(current), type, required);
}

FiniteStructure ModelOracle::induced(const std::vector<Handle>& handles) const {
  const int n = static_cast<int>(handles.size());
  FiniteStructure s(language_, n);
  for (int r = 0; r < language_.size(); ++r) {
    const int arity = language_[r].arity;
    std::vector<int> idx(arity, 0);
    std::vector<Handle> args(arity);
    if (arity > 0 && n == 0) continue;
    while (true) {
      for (int i = 0; i < arity; ++i) args[i] = handles[idx[i]];
      if (holds(r, args.data(), arity)) s.set(r, std::span<const int>(idx));
      int i = arity - 1;
      for (; i >= 0; --i) {
        if (++idx[i] < n) break;
        idx[i] = 0;
      }
      if (i < 0) break;
    }
  }
  return s;
}

bool verify_duplicate_exhaustive(const ModelOracle& oracle, const std::vector<Handle>& b,
                                 const std::vector<Handle>& a0, const std::vector<Handle>& a1) {
  const int k = static_cast<int>(b.size());
  if (k > oracle.bounds().duplicate_check_k) {
    throw Error("bound", "exhaustive duplicate check limited to k <= " +
                             std::to_string(oracle.bounds().duplicate_check_k));
  }
  if (static_cast<int>(a0.size()) != k || static_cast<int>(a1.size()) != k) return false;
  std::vector<Handle> all(a0);
  all.insert(all.end(), a1.begin(), a1.end());
  std::sort(all.begin(), all.end());
  if (std::adjacent_find(all.begin(), all.end()) != all.end()) return false;
  const auto& lang = oracle.language();
  std::vector<Handle> sel(k);
  for (std::uint64_t alpha = 0; alpha < (std::uint64_t{1} << k); ++alpha) {
    for (int l = 0; l < k; ++l) sel[l] = ((alpha >> l) & 1U) ? a1[l] : a0[l];
    for (int r = 0; r < lang.size(); ++r) {
      const int arity = lang[r].arity;
      std::vector<int> idx(arity, 0);
      std::vector<Handle> x(arity), y(arity);
      if (arity > 0 && k == 0) continue;
      while (true) {
        for (int i = 0; i < arity; ++i) {
          x[i] = sel[idx[i]];
          y[i] = b[idx[i]];
        }
        if (oracle.holds(r, x.data(), arity) != oracle.holds(r, y.data(), arity)) return false;
        int i = arity - 1;
        for (; i >= 0; --i) {
          if (++idx[i] < k) break;
          idx[i] = 0;
        }
        if (i < 0) break;
      }
    }
  }
  return true;
}

// ---- factory ----

std::unique_ptr<ModelOracle> make_oracle(const std::string& spec, const RelationalLanguage& language,
                                         const Bounds& bounds) {
  auto require_one_binary = [&](const char* name) {
    if (language.size() != 1 || language[0].arity != 2) {
      throw Error("oracle", std::string("the ") + name + " oracle needs a language with exactly one binary relation");
    }
  };
  if (spec == "dlo") {
    require_one_binary("dlo");
    return std::make_unique<DloOracle>(language, bounds);
  }
  if (spec == "rado") {
    require_one_binary("rado");
    return std::make_unique<RadoOracle>(language, bounds);
  }
  if (spec == "pureset") return std::make_unique<PureSetOracle>(language, bounds);
  if (spec.rfind("forbid:", 0) == 0) {
    const std::string path = spec.substr(7);
    std::ifstream in(path);
    if (!in) throw Error("io", "cannot open forbidden-structure file " + path);
    nlohmann::json j;
    try {
      in >> j;
    } catch (const std::exception& e) {
      throw Error("parse", "bad JSON in " + path + ": " + e.what());
    }
    if (!j.is_array()) throw Error("parse", "forbidden-structure file must hold a JSON list");
    std::vector<FiniteStructure> forbidden;
    RelationalLanguage lang = language;
    for (const auto& item : j) {
      forbidden.push_back(structure_from_json(item));
      for (const auto& rel : forbidden.back().language().relations()) {
        if (auto idx = lang.find(rel.name)) {
          if (lang[*idx].arity != rel.arity) throw Error("oracle", "arity mismatch for relation " + rel.name);
        } else {
          lang.add(rel.name, rel.arity);
        }
      }
    }
    return std::make_unique<ForbidOracle>(lang, std::move(forbidden), bounds);
  }
  throw Error("oracle", "unknown oracle '" + spec + "' (expected dlo, rado, pureset or forbid:FILE)");
}

std::vector<int> theory_to_oracle(const RelationalLanguage& theory_language, const ModelOracle& oracle) {
  std::vector<int> out;
  for (const auto& rel : theory_language.relations()) {
    auto idx = oracle.language().find(rel.name);
    if (!idx || oracle.language()[*idx].arity != rel.arity) {
      throw Error("oracle", "relation " + rel.name + " is not in the oracle language");
    }
    out.push_back(*idx);
  }
  return out;
}

}  // namespace layerlimit
