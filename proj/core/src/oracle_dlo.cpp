#include "layerlimit/errors.hpp"
#include "layerlimit/oracle.hpp"

#include <algorithm>
#include <map>

namespace layerlimit {

namespace {

__extension__ typedef __int128 i128;
__extension__ typedef unsigned __int128 u128;

// Dyadic rationals in fixed point: value = raw / 2^kScaleBits.
constexpr int kScaleBits = 96;
const i128 kOne = static_cast<i128>(1) << kScaleBits;

i128 to_raw(const Rational& q) {
  BigInt scaled = numerator(q) << kScaleBits;
  const BigInt& den = denominator(q);
  if (scaled % den != 0) throw Error("precision", "value " + to_string(q) + " is not a representable dyadic rational");
  scaled /= den;
  const bool neg = scaled < 0;
  BigInt mag = neg ? BigInt(-scaled) : scaled;
  if (mag >= (BigInt(1) << 126)) throw Error("precision", "value " + to_string(q) + " is out of range");
  const auto lo = static_cast<std::uint64_t>(mag & BigInt(~std::uint64_t{0}));
  const auto hi = static_cast<std::uint64_t>(mag >> 64);
  i128 v = (static_cast<i128>(hi) << 64) | static_cast<i128>(lo);
  return neg ? -v : v;
}

Rational from_raw(i128 v) {
  const bool neg = v < 0;
  u128 mag = neg ? static_cast<u128>(-v) : static_cast<u128>(v);
  BigInt n = BigInt(static_cast<std::uint64_t>(mag >> 64));
  n <<= 64;
  n += BigInt(static_cast<std::uint64_t>(mag));
  if (neg) n = -n;
  return Rational(n, BigInt(1) << kScaleBits);
}

i128 divide_exact(i128 v, int d) {
  if (v % d != 0) throw Error("precision", "dyadic precision exhausted (gap too small to subdivide)");
  return v / d;
}

struct DloMeta {
  bool empty = true;
  i128 min = 0;
  i128 max = 0;
  i128 gap = 0;  // minimum gap between distinct elements; 0 for fewer than two
};

i128 min_gap(i128 a, i128 b) {
  if (a == 0) return b;
  if (b == 0) return a;
  return std::min(a, b);
}

// Weak orderings of k variables: rank vectors onto {0..d-1}.
std::vector<std::vector<int>> weak_orderings(int k) {
  std::vector<std::vector<int>> out;
  std::vector<int> r(k, 0);
  while (true) {
    std::vector<char> used(k, 0);
    for (int v : r) used[v] = 1;
    int d = 0;
    while (d < k && used[d]) ++d;
    bool onto = true;
    for (int i = d; i < k; ++i) onto = onto && !used[i];
    if (onto) out.push_back(r);
    int i = k - 1;
    for (; i >= 0; --i) {
      if (++r[i] < k) break;
      r[i] = 0;
    }
    if (i < 0) break;
  }
  return out;
}

int distinct_count(const std::vector<int>& ranks) {
  int d = 0;
  for (int v : ranks) d = std::max(d, v + 1);
  return d;
}

// Which new witness positions a sentence needs on a carrier of size c.
struct DloPlan {
  bool low = false;    // an element below everything
  bool high = false;   // an element above everything
  bool inner = false;  // an element strictly between any two
  bool any = false;    // some element at all (empty carrier, no universals)
};

DloPlan plan_witnesses(const PithySentence& s, std::uint64_t c) {
  const int k = s.arity();
  DloPlan plan;
  std::vector<int> env(k + 1);
  auto holds = [](int, const int* args, int n) { return n == 2 && args[0] < args[1]; };
  for (const auto& ranks : weak_orderings(k)) {
    const int d = distinct_count(ranks);
    if (static_cast<std::uint64_t>(d) > c && k > 0) continue;
    for (int j = 0; j < k; ++j) env[j] = 2 * ranks[j] + 1;
    auto good = [&](int pos) {
      env[k] = pos;
      return eval_qf(s.matrix, env.data(), holds);
    };
    if (d == 0) {
      if (!good(0)) throw Error("witness", "sentence has no witness in a dense linear order");
      if (c == 0) plan.any = true;
      continue;
    }
    bool eq = false;
    for (int i = 0; i < d && !eq; ++i) eq = good(2 * i + 1);
    if (eq) continue;
    if (good(0)) {
      plan.low = true;
    } else if (good(2 * d)) {
      plan.high = true;
    } else {
      bool inner = false;
      for (int i = 1; i < d && !inner; ++i) inner = good(2 * i);
      if (!inner) throw Error("witness", "sentence has no witness position in a dense linear order");
      plan.inner = true;
    }
  }
  return plan;
}

}  // namespace

struct DloOracle::Impl {
  enum class Kind { kValues, kCopies, kShift };
  struct Batch {
    Handle first = 0;
    std::uint64_t count = 0;
    Kind kind = Kind::kValues;
    std::vector<i128> values;
    CarrierPtr source;
    i128 offset = 0;
  };
  std::vector<Batch> batches;
  std::map<i128, Handle> by_value;
  mutable std::unordered_map<Handle, i128> cache;

  const Batch& find(Handle h) const {
    auto it = std::upper_bound(batches.begin(), batches.end(), h,
                               [](Handle x, const Batch& b) { return x < b.first; });
    if (it == batches.begin()) throw Error("oracle", "unknown dlo handle " + std::to_string(h));
    --it;
    if (h - it->first >= it->count) throw Error("oracle", "unknown dlo handle " + std::to_string(h));
    return *it;
  }

  i128 value(Handle h) const {
    if (auto it = cache.find(h); it != cache.end()) return it->second;
    i128 offset = 0;
    Handle cur = h;
    i128 result = 0;
    while (true) {
      if (auto it = cache.find(cur); it != cache.end()) {
        result = offset + it->second;
        break;
      }
      const Batch& b = find(cur);
      const std::uint64_t t = cur - b.first;
      if (b.kind == Kind::kValues) {
        result = offset + b.values[t];
        break;
      }
      if (b.kind == Kind::kCopies) {
        offset += (t & 1U) ? b.offset : -b.offset;
        cur = b.source->at(t / 2);
      } else {
        offset += b.offset;
        cur = b.source->at(t);
      }
    }
    if (cache.size() > (std::size_t{1} << 22)) cache.clear();
    cache.emplace(h, result);
    return result;
  }

  DloMeta meta(const Carrier& c) const {
    if (const auto* m = std::any_cast<DloMeta>(&c.annotation())) return *m;
    DloMeta m;
    std::vector<i128> vals;
    vals.reserve(c.size());
    for (Handle h : c.materialize()) vals.push_back(value(h));
    std::sort(vals.begin(), vals.end());
    if (!vals.empty()) {
      m.empty = false;
      m.min = vals.front();
      m.max = vals.back();
      for (std::size_t i = 1; i < vals.size(); ++i) {
        if (vals[i] == vals[i - 1]) throw Error("oracle", "carrier holds two handles with the same value");
        m.gap = min_gap(m.gap, vals[i] - vals[i - 1]);
      }
    }
    c.annotate(m);
    return m;
  }
};

DloOracle::DloOracle(RelationalLanguage language, Bounds bounds)
    : ModelOracle(std::move(language), bounds), impl_(std::make_shared<Impl>()) {}

namespace {

Handle add_value(DloOracle::Impl& impl, Handle first_free, i128 v, bool& allocated) {
  if (auto it = impl.by_value.find(v); it != impl.by_value.end()) {
    allocated = false;
    return it->second;
  }
  allocated = true;
  if (!impl.batches.empty()) {
    auto& last = impl.batches.back();
    if (last.kind == DloOracle::Impl::Kind::kValues && last.first + last.count == first_free) {
      last.values.push_back(v);
      ++last.count;
      impl.by_value.emplace(v, first_free);
      return first_free;
    }
  }
  DloOracle::Impl::Batch b;
  b.first = first_free;
  b.count = 1;
  b.kind = DloOracle::Impl::Kind::kValues;
  b.values.push_back(v);
  impl.batches.push_back(std::move(b));
  impl.by_value.emplace(v, first_free);
  return first_free;
}

}  // namespace

Handle DloOracle::make(const Rational& value) {
  bool allocated = false;
  const Handle h = add_value(*impl_, next_handle(), to_raw(value), allocated);
  if (allocated) allocate(1);
  return h;
}

Rational DloOracle::value(Handle h) const { return from_raw(impl_->value(h)); }

bool DloOracle::holds(int relation, const Handle* args, int n) const {
  if (relation != 0 || n != 2) throw Error("oracle", "dlo oracle answers only its binary order relation");
  if (args[0] == args[1]) return false;
  return impl_->value(args[0]) < impl_->value(args[1]);
}

std::string DloOracle::describe(Handle h) const { return to_string(value(h)); }

Handle DloOracle::fresh_element(const Carrier& exclude) {
  const DloMeta m = impl_->meta(exclude);
  i128 v = 0;
  if (!m.empty) v = ((m.max >> kScaleBits) + 1) << kScaleBits;
  bool allocated = false;
  const Handle h = add_value(*impl_, next_handle(), v, allocated);
  if (allocated) allocate(1);
  return h;
}

CarrierPtr DloOracle::duplicate(const CarrierPtr& enumerated) {
  const std::uint64_t k = enumerated->size();
  if (k == 0) return Carrier::empty();
  const DloMeta m = impl_->meta(*enumerated);
  const i128 eps = k >= 2 ? divide_exact(m.gap, 4) : kOne / 4;
  if (eps == 0) throw Error("precision", "dyadic precision exhausted while duplicating");
  Impl::Batch b;
  b.first = allocate(2 * k);
  b.count = 2 * k;
  b.kind = Impl::Kind::kCopies;
  b.source = enumerated;
  b.offset = eps;
  impl_->batches.push_back(b);
  auto copies = Carrier::range(b.first, 2 * k);
  DloMeta cm;
  cm.empty = false;
  cm.min = m.min - eps;
  cm.max = m.max + eps;
  cm.gap = 2 * eps;
  if (k >= 2) cm.gap = std::min(2 * eps, m.gap - 2 * eps);
  copies->annotate(cm);
  return copies;
}

WitnessResult DloOracle::pi2_witnesses(const CarrierPtr& current, const PithySentence& sentence) {
  const std::uint64_t c = current->size();
  const DloPlan plan = plan_witnesses(sentence, c);
  const DloMeta m = impl_->meta(*current);
  std::vector<HandleRange> ranges;
  DloMeta em = m;
  i128 delta = 0;
  if (plan.inner) delta = divide_exact(m.gap, 2);
  auto push_value = [&](i128 v) {
    bool allocated = false;
    const Handle h = add_value(*impl_, next_handle(), v, allocated);
    if (allocated) allocate(1);
    ranges.push_back({h, 1});
  };
  std::vector<std::string> parts;
  if (plan.low) {
    push_value(m.min - kOne);
    em.min = m.min - kOne;
    em.gap = min_gap(em.gap, kOne);
    parts.emplace_back("below");
  }
  if (plan.high) {
    const i128 top = plan.inner ? m.max + delta : m.max;
    push_value(top + kOne);
    em.max = top + kOne;
    em.gap = min_gap(em.gap, kOne);
    parts.emplace_back("above");
  }
  if (plan.inner) {
    Impl::Batch b;
    b.first = allocate(c);
    b.count = c;
    b.kind = Impl::Kind::kShift;
    b.source = current;
    b.offset = delta;
    impl_->batches.push_back(b);
    ranges.push_back({b.first, c});
    if (!plan.high) em.max = m.max + delta;
    em.gap = min_gap(plan.low || plan.high ? kOne : 0, delta);
    parts.emplace_back("between");
  }
  if (plan.any) {
    push_value(0);
    em.empty = false;
    em.min = em.max = 0;
    em.gap = 0;
    parts.emplace_back("any");
  }
  WitnessResult result;
  result.added = 0;
  for (const auto& r : ranges) result.added += r.count;
  result.extended = Carrier::append(current, ranges);
  if (result.added > 0) result.extended->annotate(em);
  result.method = "order-type analysis";
  for (const auto& p : parts) result.method += " +" + p;
  return result;
}

CarrierPtr DloOracle::extend(const CarrierPtr& base, const std::vector<HandleRange>& added) {
  auto out = Carrier::append(base, added);
  if (out == base) return out;
  // A single appended value above or below everything keeps the summary cheap.
  DloMeta m = impl_->meta(*base);
  for (const auto& r : added) {
    for (std::uint64_t i = 0; i < r.count; ++i) {
      const i128 v = impl_->value(r.first + i);
      if (m.empty) {
        m.empty = false;
        m.min = m.max = v;
      } else if (v > m.max) {
        m.gap = min_gap(m.gap, v - m.max);
        m.max = v;
      } else if (v < m.min) {
        m.gap = min_gap(m.gap, m.min - v);
        m.min = v;
      } else {
        return out;  // interior value: summary computed on demand
      }
    }
  }
  out->annotate(m);
  return out;
}

std::optional<bool> DloOracle::certify_duplicate(const CarrierPtr& enumerated, const CarrierPtr& copies) const {
  if (enumerated->size() == 0) return copies->size() == 0;
  if (copies->kind() != Carrier::Kind::kRange || copies->size() != 2 * enumerated->size()) return std::nullopt;
  const auto& b = impl_->find(copies->at(0));
  if (b.kind != Impl::Kind::kCopies || b.first != copies->at(0) || b.count != copies->size() ||
      b.source.get() != enumerated.get()) {
    return std::nullopt;
  }
  // Copies at b +- eps preserve every order literal for all selections when
  // 2 eps is below the minimum gap.
  const DloMeta m = impl_->meta(*enumerated);
  return enumerated->size() < 2 || 4 * b.offset <= m.gap;
}

std::optional<bool> DloOracle::certify_witnesses(const CarrierPtr& current, const PithySentence& sentence,
                                                 const CarrierPtr& extended) const {
  const std::uint64_t c = current->size();
  DloPlan plan;
  try {
    plan = plan_witnesses(sentence, c);
  } catch (const Error&) {
    return false;
  }
  const std::uint64_t added = extended->size() - c;
  if (added == 0) return !(plan.low || plan.high || plan.inner || plan.any);
  if (extended->base().get() != current.get()) return std::nullopt;
  const DloMeta m = impl_->meta(*current);
  bool low = false, high = false, inner = false, any = false;
  for (const auto& r : extended->ranges()) {
    const auto& b = impl_->find(r.first);
    if (b.kind == Impl::Kind::kShift && r.count == c && b.source.get() == current.get() && 2 * b.offset <= m.gap) {
      inner = true;
    } else if (r.count == 1) {
      const i128 v = impl_->value(r.first);
      if (m.empty) any = true;
      else if (v < m.min) low = true;
      else if (v > m.max) high = true;
    }
  }
  return (!plan.low || low) && (!plan.high || high) && (!plan.inner || inner) && (!plan.any || any);
}

bool DloOracle::type_realized(const CarrierPtr& current, const QfTypeSpec& type,
                              const std::vector<int>& sublanguage) const {
  const bool has_order = std::binary_search(sublanguage.begin(), sublanguage.end(), 0);
  std::vector<const Formula*> kept;
  for (const auto& lit : type.literals) {
    std::vector<int> rels;
    lit.collect_relations(rels);
    if (rels.empty() || has_order) kept.push_back(&lit);
  }
  const std::uint64_t c = current->size();
  auto holds = [](int, const int* args, int n) { return n == 2 && args[0] < args[1]; };
  for (const auto& ranks : weak_orderings(type.arity)) {
    if (static_cast<std::uint64_t>(distinct_count(ranks)) > c) continue;
    bool all = true;
    for (const Formula* lit : kept) {
      if (!eval_qf(*lit, ranks.data(), holds)) {
        all = false;
        break;
      }
    }
    if (all) return true;
  }
  return false;
}

}  // namespace layerlimit
