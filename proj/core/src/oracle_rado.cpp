#include "layerlimit/errors.hpp"
#include "layerlimit/oracle.hpp"

#include <algorithm>
#include <limits>
#include <map>

namespace layerlimit {

namespace {

std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr Handle kNewVertex = std::numeric_limits<Handle>::max();

}  // namespace

struct RadoOracle::Impl {
  enum class Kind { kNaturals, kCopies, kWitnessAll, kWitnessExplicit };
  struct Batch {
    Handle first = 0;
    std::uint64_t count = 0;
    Kind kind = Kind::kNaturals;
    std::vector<std::uint64_t> naturals;
    CarrierPtr source;         // copies: duplicated enumeration; witness-all: context
    std::uint64_t salt = 0;    // copies: co-copy adjacency bits
    bool adjacent = false;     // witness-all: adjacent to every context vertex
    std::vector<Handle> members;  // explicit witness: sorted older neighbours
  };
  std::vector<Batch> batches;
  std::map<std::uint64_t, Handle> natural_handle;

  const Batch& find(Handle h) const {
    auto it = std::upper_bound(batches.begin(), batches.end(), h,
                               [](Handle x, const Batch& b) { return x < b.first; });
    if (it == batches.begin()) throw Error("oracle", "unknown rado handle " + std::to_string(h));
    --it;
    if (h - it->first >= it->count) throw Error("oracle", "unknown rado handle " + std::to_string(h));
    return *it;
  }

  // Naturals are adjacent by the BIT rule. A symbolic vertex decides its
  // adjacency to naturals and to older symbolic vertices.
  bool adjacent(Handle a, Handle b) const {
    while (true) {
      if (a == b) return false;
      const Batch& ba = find(a);
      const Batch& bb = find(b);
      const bool na = ba.kind == Kind::kNaturals;
      const bool nb = bb.kind == Kind::kNaturals;
      if (na && nb) return bit_adjacent(ba.naturals[a - ba.first], bb.naturals[b - bb.first]);
      Handle d = 0, o = 0;
      const Batch* bd = nullptr;
      if (na || (!nb && b > a)) {
        d = b, o = a, bd = &bb;
      } else {
        d = a, o = b, bd = &ba;
      }
      switch (bd->kind) {
        case Kind::kCopies: {
          if (o < bd->first || o - bd->first >= bd->count) return false;
          const std::uint64_t l = (d - bd->first) / 2;
          const std::uint64_t m = (o - bd->first) / 2;
          if (l == m) return (mix64(bd->salt ^ (l * 0x2545f4914f6cdd1dULL)) & 1U) != 0;
          a = bd->source->at(l);
          b = bd->source->at(m);
          continue;
        }
        case Kind::kWitnessAll:
          return bd->adjacent && bd->source->contains(o);
        case Kind::kWitnessExplicit:
          return std::binary_search(bd->members.begin(), bd->members.end(), o);
        case Kind::kNaturals:
          break;
      }
      return false;
    }
  }
};

RadoOracle::RadoOracle(RelationalLanguage language, Bounds bounds)
    : ModelOracle(std::move(language), bounds), impl_(std::make_shared<Impl>()) {}

bool RadoOracle::bit_adjacent(std::uint64_t a, std::uint64_t b) {
  if (a == b) return false;
  const std::uint64_t lo = std::min(a, b);
  const std::uint64_t hi = std::max(a, b);
  if (lo >= 64) return false;
  return ((hi >> lo) & 1U) != 0;
}

Handle RadoOracle::natural(std::uint64_t n) {
  if (auto it = impl_->natural_handle.find(n); it != impl_->natural_handle.end()) return it->second;
  const Handle h = next_handle();
  auto& batches = impl_->batches;
  if (!batches.empty() && batches.back().kind == Impl::Kind::kNaturals &&
      batches.back().first + batches.back().count == h) {
    batches.back().naturals.push_back(n);
    ++batches.back().count;
  } else {
    Impl::Batch b;
    b.first = h;
    b.count = 1;
    b.kind = Impl::Kind::kNaturals;
    b.naturals.push_back(n);
    batches.push_back(std::move(b));
  }
  allocate(1);
  impl_->natural_handle.emplace(n, h);
  return h;
}

std::optional<std::uint64_t> RadoOracle::natural_value(Handle h) const {
  const auto& b = impl_->find(h);
  if (b.kind != Impl::Kind::kNaturals) return std::nullopt;
  return b.naturals[h - b.first];
}

bool RadoOracle::holds(int relation, const Handle* args, int n) const {
  if (relation != 0 || n != 2) throw Error("oracle", "rado oracle answers only its adjacency relation");
  return impl_->adjacent(args[0], args[1]);
}

std::string RadoOracle::describe(Handle h) const {
  const auto& b = impl_->find(h);
  switch (b.kind) {
    case Impl::Kind::kNaturals:
      return "n" + std::to_string(b.naturals[h - b.first]);
    case Impl::Kind::kCopies:
      return "c" + std::to_string(h);
    default:
      return "w" + std::to_string(h);
  }
}

Handle RadoOracle::fresh_element(const Carrier& exclude) {
  for (std::uint64_t n = 0;; ++n) {
    auto it = impl_->natural_handle.find(n);
    if (it == impl_->natural_handle.end()) return natural(n);
    if (!exclude.contains(it->second)) return it->second;
  }
}

CarrierPtr RadoOracle::duplicate(const CarrierPtr& enumerated) {
  const std::uint64_t k = enumerated->size();
  if (k == 0) return Carrier::empty();
  Impl::Batch b;
  b.first = allocate(2 * k);
  b.count = 2 * k;
  b.kind = Impl::Kind::kCopies;
  b.source = enumerated;
  b.salt = mix64(b.first ^ 0x5851f42d4c957f2dULL);
  impl_->batches.push_back(b);
  return Carrier::range(b.first, 2 * k);
}

namespace {

// Truth of a one-variable-context matrix for y equal to x (position -1) or a
// new vertex with adjacency bit e to x.
bool one_param_good(const PithySentence& s, int position) {
  int env[2] = {0, position < 0 ? 0 : 1};
  auto holds = [position](int, const int* args, int n) {
    if (n != 2 || args[0] == args[1]) return false;
    return position == 1;
  };
  return eval_qf(s.matrix, env, holds);
}

bool zero_param_good(const PithySentence& s) {
  int env[1] = {0};
  auto holds = [](int, const int*, int) { return false; };
  return eval_qf(s.matrix, env, holds);
}

}  // namespace

WitnessResult RadoOracle::pi2_witnesses(const CarrierPtr& current, const PithySentence& sentence) {
  const int k = sentence.arity();
  const std::uint64_t c = current->size();
  WitnessResult result;
  std::vector<HandleRange> ranges;
  if (k == 0) {
    if (!zero_param_good(sentence)) throw Error("witness", "sentence has no witness in the Rado graph");
    if (c == 0) ranges.push_back({fresh_element(*current), 1});
    result.method = "zero-parameter analysis";
  } else if (k == 1) {
    result.method = "one-parameter analysis";
    if (c > 0 && !one_param_good(sentence, -1)) {
      Impl::Batch b;
      b.kind = Impl::Kind::kWitnessAll;
      b.source = current;
      if (one_param_good(sentence, 1)) {
        b.adjacent = true;
      } else if (one_param_good(sentence, 0)) {
        b.adjacent = false;
      } else {
        throw Error("witness", "sentence has no one-point extension witness in the Rado graph");
      }
      b.first = allocate(1);
      b.count = 1;
      impl_->batches.push_back(b);
      ranges.push_back({b.first, 1});
      result.method += b.adjacent ? " +adjacent-to-all" : " +adjacent-to-none";
    }
  } else {
    result.method = "tuple search";
    std::uint64_t total = 1;
    for (int i = 0; i < k; ++i) {
      if (c != 0 && total > bounds_.exhaustive_tuples / c) {
        throw Error("budget", "witness search over " + std::to_string(c) + "^" + std::to_string(k) +
                                  " tuples exceeds the exhaustive tuple budget");
      }
      total *= c;
    }
    const auto elems = current->materialize();
    std::vector<Handle> found;  // naturals outside current, in discovery order
    std::vector<std::map<Handle, bool>> builders;
    std::vector<Handle> env(k + 1);
    std::vector<std::uint64_t> idx(k, 0);
    auto real_holds = [this](int rel, const Handle* args, int n) { return holds(rel, args, n); };
    auto eval_with = [&](Handle y) {
      env[k] = y;
      return eval_qf(sentence.matrix, env.data(), real_holds);
    };
    auto try_builder = [&](std::map<Handle, bool>& adj) {
      std::vector<Handle> unset;
      for (int i = 0; i < k; ++i) {
        if (!adj.count(env[i]) && std::find(unset.begin(), unset.end(), env[i]) == unset.end()) {
          unset.push_back(env[i]);
        }
      }
      for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << unset.size()); ++mask) {
        auto bit_of = [&](Handle h) {
          if (auto it = adj.find(h); it != adj.end()) return it->second;
          const auto pos = std::find(unset.begin(), unset.end(), h) - unset.begin();
          return ((mask >> pos) & 1U) != 0;
        };
        auto h2 = [&](int rel, const Handle* args, int n) {
          if (n == 2 && args[0] == args[1]) return false;
          if (n == 2 && args[0] == kNewVertex) return bit_of(args[1]);
          if (n == 2 && args[1] == kNewVertex) return bit_of(args[0]);
          return holds(rel, args, n);
        };
        env[k] = kNewVertex;
        if (eval_qf(sentence.matrix, env.data(), h2)) {
          for (std::size_t u = 0; u < unset.size(); ++u) adj[unset[u]] = ((mask >> u) & 1U) != 0;
          return true;
        }
      }
      return false;
    };
    for (std::uint64_t t = 0; t < total; ++t) {
      bool all_natural = true;
      std::vector<std::uint64_t> nat(k);
      for (int i = 0; i < k; ++i) {
        env[i] = elems[idx[i]];
        auto v = natural_value(env[i]);
        all_natural = all_natural && v.has_value();
        if (v) nat[i] = *v;
      }
      bool ok = false;
      for (int i = 0; i < k && !ok; ++i) ok = eval_with(env[i]);
      for (std::size_t i = 0; i < found.size() && !ok; ++i) ok = eval_with(found[i]);
      for (std::size_t i = 0; i < builders.size() && !ok; ++i) ok = try_builder(builders[i]);
      if (!ok && all_natural) {
        std::vector<std::uint64_t> vals(nat);
        vals.push_back(0);
        auto bit_holds = [](int, const std::uint64_t* args, int n) { return n == 2 && bit_adjacent(args[0], args[1]); };
        for (std::uint64_t n = 0; n < bounds_.witness_scan && !ok; ++n) {
          vals[k] = n;
          if (eval_qf(sentence.matrix, vals.data(), bit_holds)) {
            const Handle h = natural(n);
            if (!current->contains(h)) found.push_back(h);
            ok = true;
          }
        }
      }
      if (!ok) {
        builders.emplace_back();
        ok = try_builder(builders.back());
        if (!ok) throw Error("witness", "no one-point extension satisfies the sentence matrix");
      }
      for (int i = k - 1; i >= 0; --i) {
        if (++idx[i] < c) break;
        idx[i] = 0;
      }
    }
    for (Handle h : found) ranges.push_back({h, 1});
    for (const auto& adj : builders) {
      Impl::Batch b;
      b.kind = Impl::Kind::kWitnessExplicit;
      for (const auto& [h, on] : adj) {
        if (on) b.members.push_back(h);
      }
      b.first = allocate(1);
      b.count = 1;
      impl_->batches.push_back(std::move(b));
      ranges.push_back({impl_->batches.back().first, 1});
    }
    if (!found.empty()) result.method += " +" + std::to_string(found.size()) + " naturals";
    if (!builders.empty()) result.method += " +" + std::to_string(builders.size()) + " explicit";
  }
  for (const auto& r : ranges) result.added += r.count;
  result.extended = extend(current, ranges);
  return result;
}

std::optional<bool> RadoOracle::certify_duplicate(const CarrierPtr& enumerated, const CarrierPtr& copies) const {
  if (enumerated->size() == 0) return copies->size() == 0;
  if (copies->kind() != Carrier::Kind::kRange || copies->size() != 2 * enumerated->size()) return std::nullopt;
  const auto& b = impl_->find(copies->at(0));
  if (b.kind != Impl::Kind::kCopies || b.first != copies->at(0) || b.count != copies->size()) return std::nullopt;
  // Copies of distinct positions inherit adjacency from the originals.
  return b.source.get() == enumerated.get();
}

std::optional<bool> RadoOracle::certify_witnesses(const CarrierPtr& current, const PithySentence& sentence,
                                                  const CarrierPtr& extended) const {
  const int k = sentence.arity();
  const std::uint64_t c = current->size();
  const std::uint64_t added = extended->size() - c;
  if (k == 0) {
    if (!zero_param_good(sentence)) return false;
    return c > 0 || added > 0;
  }
  if (k != 1) return std::nullopt;
  if (c == 0 || one_param_good(sentence, -1)) return true;
  if (added == 0 || extended->base().get() != current.get()) return false;
  for (const auto& r : extended->ranges()) {
    const auto& b = impl_->find(r.first);
    if (b.kind == Impl::Kind::kWitnessAll && b.source.get() == current.get() &&
        one_param_good(sentence, b.adjacent ? 1 : 0)) {
      return true;
    }
  }
  return false;
}

}  // namespace layerlimit
