#include "layerlimit/sampler.hpp"

#include "layerlimit/errors.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

namespace layerlimit {

std::uint64_t StreamRng::mix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t StreamRng::value(std::uint64_t seed, std::uint64_t stream, std::uint64_t step, std::uint64_t counter) {
  std::uint64_t h = mix(seed);
  h = mix(h ^ stream);
  h = mix(h ^ step);
  return mix(h ^ counter);
}

std::uint64_t StreamRng::below(std::uint64_t n, std::uint64_t seed, std::uint64_t stream, std::uint64_t step) {
  if (n == 0) throw Error("range", "uniform draw from an empty range");
  if ((n & (n - 1)) == 0) return value(seed, stream, step, 0) & (n - 1);
  const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
  for (std::uint64_t c = 0;; ++c) {
    const std::uint64_t v = value(seed, stream, step, c);
    if (v < limit) return v % n;
  }
}

namespace {

// Exact draw proportional to rational weights, using big-integer rejection.
std::size_t exact_choice(const std::vector<Rational>& weights, std::uint64_t seed, std::uint64_t stream,
                         std::uint64_t step) {
  BigInt lcm = 1;
  for (const auto& w : weights) {
    const BigInt d = boost::multiprecision::denominator(w);
    lcm = lcm / boost::multiprecision::gcd(lcm, d) * d;
  }
  std::vector<BigInt> ints;
  BigInt total = 0;
  for (const auto& w : weights) {
    ints.push_back(boost::multiprecision::numerator(w) * (lcm / boost::multiprecision::denominator(w)));
    total += ints.back();
  }
  if (total <= 0) throw Error("range", "no positive weight to draw from");
  const std::size_t bits = boost::multiprecision::msb(total) + 1;
  const std::size_t words = (bits + 63) / 64;
  for (std::uint64_t c = 0;; ++c) {
    BigInt r = 0;
    for (std::size_t w = 0; w < words; ++w) {
      r <<= 64;
      r += StreamRng::value(seed, stream, step, c * words + w + 1);
    }
    r &= (BigInt(1) << bits) - 1;
    if (r >= total) continue;
    for (std::size_t i = 0; i < ints.size(); ++i) {
      if (r < ints[i]) return i;
      r -= ints[i];
    }
  }
}

}  // namespace

SampleSession::SampleSession(std::shared_ptr<Layering> layering, std::uint64_t seed, int max_depth)
    : layering_(std::move(layering)), seed_(seed), max_depth_(static_cast<std::size_t>(std::max(max_depth, 0))) {
  if (!layering_) throw Error("precondition", "session needs a layering");
}

std::size_t SampleSession::sample_point() {
  const std::size_t point = points_.size();
  points_.emplace_back();
  // Built layerings start at the empty seed; hand-built ones may not.
  const Level& first = layering_->level(0);
  if (first.size() > 0) {
    std::vector<Rational> w;
    for (std::uint64_t q = 0; q < first.size(); ++q) w.push_back(layering_->mass(0, q));
    w.push_back(first.sink_mass);
    const std::size_t c = exact_choice(w, seed_, point, 0);
    points_.back().positions[0] = c == first.size() ? kSink : c;
  }
  return point;
}

std::uint64_t SampleSession::child(std::size_t point, std::size_t i, std::uint64_t parent) {
  const Level& l = layering_->level(i);
  switch (l.map) {
    case MapKind::kSplit:
      if (parent == kSink) return kSink;
      return 2 * parent + StreamRng::below(2, seed_, point, i);
    case MapKind::kPrefix: {
      if (parent != kSink) return parent;
      const std::uint64_t added = l.size() - l.previous_size;
      if (added == 0) return kSink;
      if (l.class_mass[l.appended_class] == l.sink_mass) {
        const std::uint64_t u = StreamRng::below(added + 1, seed_, point, i);
        return u == added ? kSink : l.previous_size + u;
      }
      std::vector<Rational> w(added, l.class_mass[l.appended_class]);
      w.push_back(l.sink_mass);
      const std::size_t c = exact_choice(w, seed_, point, i);
      return c == added ? kSink : l.previous_size + c;
    }
    case MapKind::kExplicit: {
      std::vector<std::uint64_t> fiber;
      std::vector<Rational> w;
      for (std::uint64_t q = 0; q < l.size(); ++q) {
        if (l.parents[q] == parent) {
          fiber.push_back(q);
          w.push_back(layering_->mass(i, q));
        }
      }
      if (parent == kSink) {
        fiber.push_back(kSink);
        w.push_back(l.sink_mass);
      }
      return fiber[exact_choice(w, seed_, point, i)];
    }
    case MapKind::kNone:
      break;
  }
  throw Error("layering", "level without a map");
}

void SampleSession::refine(std::size_t point, std::size_t depth) {
  if (depth > max_depth_) {
    throw Error("undecided", "refinement beyond max depth " + std::to_string(max_depth_));
  }
  layering_->ensure(depth);
  auto& p = points_.at(point);
  while (p.depth() < depth) {
    const std::size_t i = p.depth() + 1;
    p.positions.push_back(child(point, i, p.positions.back()));
  }
}

bool SampleSession::decide_atom(int relation, const std::vector<std::size_t>& pts) {
  const auto& lang = layering_->language();
  if (relation < 0 || relation >= lang.size()) throw Error("range", "relation index out of range");
  const int k = static_cast<int>(pts.size());
  if (k != lang[relation].arity) throw Error("arity", "decide_atom arity mismatch for " + lang[relation].name);
  for (auto p : pts) {
    if (p >= points_.size()) throw Error("range", "point index out of range");
  }
  for (int a = 0; a < k; ++a) {
    for (int b = a + 1; b < k; ++b) {
      if (pts[a] == pts[b]) return true;
    }
  }
  auto key = std::make_pair(relation, pts);
  if (auto it = cache_.find(key); it != cache_.end()) return it->second;
  std::size_t d = 0;
  for (auto p : pts) d = std::max(d, points_[p].depth());
  std::uint64_t pos[kMaxArity];
  while (true) {
    if (d > max_depth_) {
      std::string text;
      for (auto p : pts) text += (text.empty() ? "" : ",") + std::to_string(p);
      throw Error("undecided", "atom " + lang[relation].name + "(" + text + ") undecided at max depth " +
                                   std::to_string(max_depth_));
    }
    for (auto p : pts) refine(p, d);
    bool ready = layering_->level(d).in_sublanguage(relation);
    for (int a = 0; a < k && ready; ++a) {
      pos[a] = points_[pts[a]].positions[d];
      if (pos[a] == kSink) ready = false;
      for (int b = 0; b < a && ready; ++b) {
        if (pos[a] == pos[b]) ready = false;
      }
    }
    if (ready) {
      const bool value = layering_->holds(d, relation, pos, k);
      cache_.emplace(std::move(key), value);
      max_decision_depth_ = std::max(max_decision_depth_, d);
      return value;
    }
    ++d;
  }
}

FiniteStructure SampleSession::induced_structure(std::size_t n, const std::vector<int>& relations) {
  const auto& lang = layering_->language();
  std::vector<int> rels = relations;
  if (rels.empty()) {
    for (int r = 0; r < lang.size(); ++r) rels.push_back(r);
  }
  RelationalLanguage sub;
  for (int r : rels) sub.add(lang[r].name, lang[r].arity);
  while (points_.size() < n) sample_point();
  FiniteStructure out(sub, static_cast<int>(n));
  for (std::size_t j = 0; j < rels.size(); ++j) {
    const int k = lang[rels[j]].arity;
    if (k > 0 && n == 0) continue;
    std::vector<std::size_t> t(k, 0);
    std::vector<int> ti(k);
    while (true) {
      bool repeated = false;
      for (int a = 0; a < k && !repeated; ++a) {
        for (int b = a + 1; b < k; ++b) repeated = repeated || t[a] == t[b];
      }
      if (!repeated && decide_atom(rels[j], t)) {
        for (int a = 0; a < k; ++a) ti[a] = static_cast<int>(t[a]);
        out.set(static_cast<int>(j), ti);
      }
      int a = k - 1;
      for (; a >= 0; --a) {
        if (++t[a] < n) break;
        t[a] = 0;
      }
      if (a < 0) break;
    }
  }
  return out;
}

FiniteStructure sample_from_level(std::shared_ptr<Layering> layering, std::size_t level, std::size_t n,
                                  std::uint64_t seed) {
  layering->ensure(level);
  SampleSession session(layering, seed, static_cast<int>(std::max<std::size_t>(level, 1)));
  std::vector<std::uint64_t> pos(n);
  for (std::size_t i = 0; i < n; ++i) {
    session.sample_point();
    session.refine(i, level);
    pos[i] = session.point(i).positions[level];
  }
  const auto& lang = layering->language();
  FiniteStructure out(lang, static_cast<int>(n));
  for (int r = 0; r < lang.size(); ++r) {
    const int k = lang[r].arity;
    if (k > 0 && n == 0) continue;
    std::vector<int> t(k, 0);
    std::uint64_t args[kMaxArity];
    while (true) {
      for (int a = 0; a < k; ++a) args[a] = pos[t[a]];
      // Two draws of the same element form a redundant tuple.
      if (layering->holds(level, r, args, k)) out.set(r, t);
      int a = k - 1;
      for (; a >= 0; --a) {
        if (++t[a] < static_cast<int>(n)) break;
        t[a] = 0;
      }
      if (a < 0) break;
    }
  }
  return out;
}

bool realizes_all_extensions(const FiniteStructure& graph, int relation, int max_subset) {
  const int n = graph.size();
  std::vector<int> subset;
  std::function<bool(int)> rec = [&](int start) -> bool {
    if (!subset.empty()) {
      const int s = static_cast<int>(subset.size());
      for (std::uint32_t pattern = 0; pattern < (1U << s); ++pattern) {
        bool realized = false;
        for (int v = 0; v < n && !realized; ++v) {
          if (std::find(subset.begin(), subset.end(), v) != subset.end()) continue;
          bool match = true;
          for (int i = 0; i < s && match; ++i) {
            match = graph.holds(relation, {v, subset[i]}) == (((pattern >> i) & 1U) != 0);
          }
          realized = match;
        }
        if (!realized) return false;
      }
    }
    if (static_cast<int>(subset.size()) == max_subset) return true;
    for (int v = start; v < n; ++v) {
      subset.push_back(v);
      const bool ok = rec(v + 1);
      subset.pop_back();
      if (!ok) return false;
    }
    return true;
  };
  return rec(0);
}

std::string induced_type_key(SampleSession& session, const std::vector<std::size_t>& tuple) {
  const auto& lang = session.layering().language();
  const std::size_t m = tuple.size();
  std::size_t need = 0;
  for (auto p : tuple) need = std::max(need, p + 1);
  while (session.point_count() < need) session.sample_point();
  std::string key;
  for (int r = 0; r < lang.size(); ++r) {
    const int k = lang[r].arity;
    if (k > 0 && m == 0) continue;
    std::vector<std::size_t> t(k, 0);
    std::vector<std::size_t> pts(k);
    while (true) {
      for (int a = 0; a < k; ++a) pts[a] = tuple[t[a]];
      key.push_back(session.decide_atom(r, pts) ? '1' : '0');
      int a = k - 1;
      for (; a >= 0; --a) {
        if (++t[a] < m) break;
        t[a] = 0;
      }
      if (a < 0) break;
    }
    key.push_back('|');
  }
  return key;
}

nlohmann::json StatsReport::to_json() const {
  nlohmann::json j;
  j["patterns"] = patterns;
  j["exact_by_level"] = nlohmann::json::array();
  for (const auto& row : exact_by_level) {
    nlohmann::json r = nlohmann::json::array();
    for (const auto& v : row) {
      if (v) {
        r.push_back(to_string(*v));
      } else {
        r.push_back(nullptr);
      }
    }
    j["exact_by_level"].push_back(std::move(r));
  }
  j["limit_estimate"] = limit_estimate;
  j["limit_stderr"] = limit_stderr;
  j["monotone"] = monotone;
  j["monotone_ok"] = monotone_ok;
  j["exchangeability_gap"] = exchangeability_gap;
  j["samples"] = samples;
  j["undecided"] = undecided;
  return j;
}

StatsReport stats_report(std::shared_ptr<Layering> layering, const std::vector<FiniteStructure>& patterns,
                         const StatsOptions& options) {
  StatsReport report;
  const auto& lang = layering->language();
  std::vector<std::vector<int>> rel_maps;
  for (const auto& p : patterns) {
    report.patterns.push_back(structure_to_json(p).dump());
    rel_maps.push_back(relation_map(p.language(), lang));
    std::vector<std::optional<Rational>> row;
    bool mono = true;
    std::optional<Rational> last;
    for (std::size_t i = 0; i < layering->size(); ++i) {
      auto v = level_t_full(*layering, i, p, options.t_full_budget);
      if (v && last && *v > *last) mono = false;
      if (v) last = v;
      row.push_back(std::move(v));
    }
    report.exact_by_level.push_back(std::move(row));
    report.monotone.push_back(mono);
    report.monotone_ok = report.monotone_ok && mono;
  }
  std::vector<std::uint64_t> hits(patterns.size(), 0);
  std::map<std::string, std::uint64_t> hist_a, hist_b;
  std::size_t used = 0;
  for (std::size_t s = 0; s < options.samples; ++s) {
    SampleSession session(layering, StreamRng::mix(options.seed ^ StreamRng::mix(s + 1)), options.max_depth);
    try {
      std::vector<char> hit(patterns.size(), 0);
      for (std::size_t q = 0; q < patterns.size(); ++q) {
        const auto& p = patterns[q];
        while (session.point_count() < static_cast<std::size_t>(p.size())) session.sample_point();
        bool full = true;
        const auto groups = detail::hom_constraints(p);
        for (const auto& g : groups) {
          for (const auto& c : g) {
            std::vector<std::size_t> pts(c.args.begin(), c.args.end());
            if (session.decide_atom(rel_maps[q][c.relation], pts) != c.want) {
              full = false;
              break;
            }
          }
          if (!full) break;
        }
        hit[q] = full ? 1 : 0;
      }
      std::string ka, kb;
      if (!options.tuple_a.empty()) {
        ka = induced_type_key(session, options.tuple_a);
        kb = induced_type_key(session, options.tuple_b);
      }
      for (std::size_t q = 0; q < patterns.size(); ++q) hits[q] += hit[q];
      if (!options.tuple_a.empty()) {
        ++hist_a[ka];
        ++hist_b[kb];
      }
      ++used;
    } catch (const Error& e) {
      if (e.kind() != "undecided") throw;
      ++report.undecided;
    }
  }
  report.samples = used;
  for (std::size_t q = 0; q < patterns.size(); ++q) {
    const double p = used ? static_cast<double>(hits[q]) / static_cast<double>(used) : 0.0;
    report.limit_estimate.push_back(p);
    report.limit_stderr.push_back(used ? std::sqrt(p * (1 - p) / static_cast<double>(used)) : 0.0);
  }
  double gap = 0.0;
  auto freq = [used](const std::map<std::string, std::uint64_t>& h, const std::string& k) {
    auto it = h.find(k);
    return it == h.end() || used == 0 ? 0.0 : static_cast<double>(it->second) / static_cast<double>(used);
  };
  for (const auto& [k, v] : hist_a) gap = std::max(gap, std::abs(freq(hist_a, k) - freq(hist_b, k)));
  for (const auto& [k, v] : hist_b) gap = std::max(gap, std::abs(freq(hist_a, k) - freq(hist_b, k)));
  report.exchangeability_gap = gap;
  return report;
}

}  // namespace layerlimit
