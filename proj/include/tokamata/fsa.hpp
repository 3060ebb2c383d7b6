#pragma once

#include <algorithm>
#include <cstdint>
#include <deque>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "tokamata/errors.hpp"
#include "tokamata/symbols.hpp"

namespace tokamata {

inline constexpr std::size_t kDefaultDeterminizeStateCap = 1000000;

// One transition. `lo`/`hi` form an inclusive symbol range; single-symbol
// edges have lo == hi, epsilon edges have lo == hi == kEpsilon. Ranges keep
// character classes compact until composition expands them against a
// concrete vocabulary.
struct FsaEdge {
  StateId src;
  Symbol lo;
  Symbol hi;
  StateId dst;

  bool is_epsilon() const { return lo == kEpsilon; }
  bool matches(Symbol s) const { return lo <= s && s <= hi; }
  bool operator==(const FsaEdge& o) const {
    return src == o.src && lo == o.lo && hi == o.hi && dst == o.dst;
  }
};

// Finite-state acceptor. Immutable after construction through FsaBuilder:
// edges are sorted by (src, lo, hi, dst) and indexed per state, so lookups
// are range scans or binary searches.
struct Fsa {
  std::uint32_t state_count = 0;
  StateId initial = 0;
  std::vector<bool> final_state;
  std::vector<FsaEdge> edges;
  std::vector<std::uint32_t> first_edge;  // state_count + 1 offsets into edges
  AlphabetKind alphabet = AlphabetKind::Chars;

  bool is_final(StateId q) const { return final_state[q]; }

  std::span<const FsaEdge> out(StateId q) const {
    return {edges.data() + first_edge[q], edges.data() + first_edge[q + 1]};
  }
};

class FsaBuilder {
 public:
  explicit FsaBuilder(AlphabetKind kind = AlphabetKind::Chars) : kind_(kind) {}

  StateId add_state() {
    final_.push_back(false);
    return static_cast<StateId>(final_.size() - 1);
  }

  StateId add_states(std::uint32_t n) {
    const StateId first = static_cast<StateId>(final_.size());
    final_.resize(final_.size() + n, false);
    return first;
  }

  void set_initial(StateId q) { initial_ = q; }
  void set_final(StateId q, bool f = true) { final_[q] = f; }
  bool is_final(StateId q) const { return final_[q]; }
  std::uint32_t state_count() const { return static_cast<std::uint32_t>(final_.size()); }

  void add_edge(StateId src, Symbol lo, Symbol hi, StateId dst) {
    if (lo > hi) throw PreconditionError("FsaBuilder::add_edge: empty range");
    edges_.push_back({src, lo, hi, dst});
  }
  void add_symbol_edge(StateId src, Symbol s, StateId dst) { edges_.push_back({src, s, s, dst}); }
  void add_epsilon(StateId src, StateId dst) { edges_.push_back({src, kEpsilon, kEpsilon, dst}); }

  Fsa build() {
    Fsa fsa;
    fsa.state_count = state_count();
    if (fsa.state_count == 0) throw PreconditionError("FsaBuilder::build: no states");
    if (initial_ >= fsa.state_count) throw PreconditionError("FsaBuilder::build: initial out of range");
    fsa.initial = initial_;
    fsa.final_state = final_;
    fsa.alphabet = kind_;
    for (const FsaEdge& e : edges_) {
      if (e.src >= fsa.state_count || e.dst >= fsa.state_count)
        throw PreconditionError("FsaBuilder::build: edge endpoint out of range");
    }
    std::sort(edges_.begin(), edges_.end(), [](const FsaEdge& a, const FsaEdge& b) {
      if (a.src != b.src) return a.src < b.src;
      if (a.lo != b.lo) return a.lo < b.lo;
      if (a.hi != b.hi) return a.hi < b.hi;
      return a.dst < b.dst;
    });
    edges_.erase(std::unique(edges_.begin(), edges_.end()), edges_.end());
    fsa.edges = std::move(edges_);
    fsa.first_edge.assign(fsa.state_count + 1, 0);
    for (const FsaEdge& e : fsa.edges) ++fsa.first_edge[e.src + 1];
    for (std::uint32_t q = 0; q < fsa.state_count; ++q) fsa.first_edge[q + 1] += fsa.first_edge[q];
    return fsa;
  }

 private:
  AlphabetKind kind_;
  StateId initial_ = 0;
  std::vector<bool> final_;
  std::vector<FsaEdge> edges_;
};

namespace detail {

inline void epsilon_close(const Fsa& fsa, std::vector<StateId>& set, std::vector<bool>& seen) {
  // `set` is extended in place to its epsilon closure; `seen` must be sized
  // state_count and marked for the initial members.
  for (std::size_t i = 0; i < set.size(); ++i) {
    for (const FsaEdge& e : fsa.out(set[i])) {
      if (!e.is_epsilon()) continue;
      if (!seen[e.dst]) {
        seen[e.dst] = true;
        set.push_back(e.dst);
      }
    }
  }
}

inline std::vector<StateId> epsilon_closure(const Fsa& fsa, std::vector<StateId> set) {
  std::vector<bool> seen(fsa.state_count, false);
  for (StateId q : set) seen[q] = true;
  epsilon_close(fsa, set, seen);
  std::sort(set.begin(), set.end());
  return set;
}

struct StateVecHash {
  std::size_t operator()(const std::vector<StateId>& v) const {
    return static_cast<std::size_t>(fnv1a64(v.data(), v.size() * sizeof(StateId)));
  }
};

}  // namespace detail

// Membership test by subset simulation. Works on any FSA (nondeterministic,
// with epsilon edges); terminal-label symbols in `input` only match edges
// carrying that exact label. O(|input| * |Q| * max out-degree).
inline bool fsa_accepts(const Fsa& fsa, std::span<const Symbol> input) {
  std::vector<StateId> current = detail::epsilon_closure(fsa, {fsa.initial});
  std::vector<bool> seen(fsa.state_count, false);
  for (Symbol s : input) {
    std::fill(seen.begin(), seen.end(), false);
    std::vector<StateId> next;
    for (StateId q : current) {
      for (const FsaEdge& e : fsa.out(q)) {
        if (e.is_epsilon() || !e.matches(s)) continue;
        if (!seen[e.dst]) {
          seen[e.dst] = true;
          next.push_back(e.dst);
        }
      }
    }
    if (next.empty()) return false;
    detail::epsilon_close(fsa, next, seen);
    current = std::move(next);
  }
  for (StateId q : current)
    if (fsa.is_final(q)) return true;
  return false;
}

inline bool fsa_accepts(const Fsa& fsa, const std::vector<Symbol>& input) {
  return fsa_accepts(fsa, std::span<const Symbol>(input));
}

// Removes epsilon edges without renumbering states: every state keeps its id,
// gains the non-epsilon out-edges of its closure, and is final if its closure
// touches a final state. States that were only epsilon hubs simply become
// unreachable.
inline Fsa remove_epsilons(const Fsa& fsa) {
  FsaBuilder b(fsa.alphabet);
  b.add_states(fsa.state_count);
  b.set_initial(fsa.initial);
  std::vector<bool> seen(fsa.state_count, false);
  for (StateId q = 0; q < fsa.state_count; ++q) {
    std::fill(seen.begin(), seen.end(), false);
    std::vector<StateId> closure{q};
    seen[q] = true;
    detail::epsilon_close(fsa, closure, seen);
    bool fin = false;
    for (StateId p : closure) {
      fin = fin || fsa.is_final(p);
      for (const FsaEdge& e : fsa.out(p))
        if (!e.is_epsilon()) b.add_edge(q, e.lo, e.hi, e.dst);
    }
    b.set_final(q, fin);
  }
  return b.build();
}

// True iff the FSA has no epsilon edges and no state has two outbound edges
// with overlapping symbol ranges.
inline bool is_deterministic(const Fsa& fsa) {
  for (StateId q = 0; q < fsa.state_count; ++q) {
    const auto edges = fsa.out(q);
    for (std::size_t i = 0; i < edges.size(); ++i) {
      if (edges[i].is_epsilon()) return false;
      if (i + 1 < edges.size() && edges[i].hi >= edges[i + 1].lo && !edges[i + 1].is_epsilon())
        return false;
    }
  }
  return true;
}

// Subset construction. Handles epsilon edges (closes over them) and range
// edges (splits ranges at boundary points so the result's edges are disjoint
// per state). Accepts the same language; the result is deterministic.
//
// `subset_out`, when given, receives one sorted source-state vector per
// result state, aligned with result state ids.
inline Fsa determinize(const Fsa& fsa, std::size_t state_cap = kDefaultDeterminizeStateCap,
                       std::vector<std::vector<StateId>>* subset_out = nullptr) {
  FsaBuilder b(fsa.alphabet);
  std::unordered_map<std::vector<StateId>, StateId, detail::StateVecHash> ids;
  std::deque<std::vector<StateId>> work;
  std::vector<std::vector<StateId>> subsets;

  const auto intern = [&](std::vector<StateId> subset) -> StateId {
    auto it = ids.find(subset);
    if (it != ids.end()) return it->second;
    if (ids.size() >= state_cap)
      throw ResourceLimitError("determinization exceeded the state cap (cap=" +
                               std::to_string(state_cap) + ")");
    const StateId id = b.add_state();
    bool fin = false;
    for (StateId q : subset) fin = fin || fsa.is_final(q);
    b.set_final(id, fin);
    ids.emplace(subset, id);
    subsets.push_back(subset);
    work.push_back(std::move(subset));
    return id;
  };

  b.set_initial(intern(detail::epsilon_closure(fsa, {fsa.initial})));

  std::vector<Symbol> bounds;
  std::vector<const FsaEdge*> live;
  while (!work.empty()) {
    std::vector<StateId> subset = std::move(work.front());
    work.pop_front();
    const StateId src_id = ids.at(subset);

    live.clear();
    bounds.clear();
    for (StateId q : subset) {
      for (const FsaEdge& e : fsa.out(q)) {
        if (e.is_epsilon()) continue;
        live.push_back(&e);
        bounds.push_back(e.lo);
        bounds.push_back(e.hi + 1);  // hi < kEpsilon, so no overflow
      }
    }
    if (live.empty()) continue;
    std::sort(bounds.begin(), bounds.end());
    bounds.erase(std::unique(bounds.begin(), bounds.end()), bounds.end());

    std::vector<bool> seen(fsa.state_count, false);
    for (std::size_t i = 0; i + 1 < bounds.size(); ++i) {
      const Symbol lo = bounds[i], hi = bounds[i + 1] - 1;
      std::fill(seen.begin(), seen.end(), false);
      std::vector<StateId> target;
      for (const FsaEdge* e : live) {
        if (e->lo <= lo && hi <= e->hi && !seen[e->dst]) {
          seen[e->dst] = true;
          target.push_back(e->dst);
        }
      }
      if (target.empty()) continue;
      detail::epsilon_close(fsa, target, seen);
      std::sort(target.begin(), target.end());
      const StateId dst_id = intern(std::move(target));
      b.add_edge(src_id, lo, hi, dst_id);
    }
  }
  if (subset_out) *subset_out = std::move(subsets);
  return b.build();
}

// Drops states that are unreachable from the initial state or cannot reach a
// final state, renumbering the survivors. If the language is empty the result
// is a single non-final initial state.
inline Fsa prune_dead_states(const Fsa& fsa) {
  std::vector<bool> fwd(fsa.state_count, false);
  {
    std::vector<StateId> stack{fsa.initial};
    fwd[fsa.initial] = true;
    while (!stack.empty()) {
      const StateId q = stack.back();
      stack.pop_back();
      for (const FsaEdge& e : fsa.out(q)) {
        if (!fwd[e.dst]) {
          fwd[e.dst] = true;
          stack.push_back(e.dst);
        }
      }
    }
  }
  std::vector<bool> bwd(fsa.state_count, false);
  {
    std::vector<std::vector<StateId>> rev(fsa.state_count);
    for (const FsaEdge& e : fsa.edges) rev[e.dst].push_back(e.src);
    std::vector<StateId> stack;
    for (StateId q = 0; q < fsa.state_count; ++q) {
      if (fsa.is_final(q)) {
        bwd[q] = true;
        stack.push_back(q);
      }
    }
    while (!stack.empty()) {
      const StateId q = stack.back();
      stack.pop_back();
      for (StateId p : rev[q]) {
        if (!bwd[p]) {
          bwd[p] = true;
          stack.push_back(p);
        }
      }
    }
  }

  std::vector<StateId> remap(fsa.state_count, kEpsilon);
  FsaBuilder b(fsa.alphabet);
  for (StateId q = 0; q < fsa.state_count; ++q)
    if (fwd[q] && bwd[q]) remap[q] = b.add_state();
  if (remap[fsa.initial] == kEpsilon) {
    // Empty language; keep a bare initial state so the FSA stays well formed.
    FsaBuilder empty(fsa.alphabet);
    empty.add_state();
    empty.set_initial(0);
    return empty.build();
  }
  for (StateId q = 0; q < fsa.state_count; ++q)
    if (remap[q] != kEpsilon) b.set_final(remap[q], fsa.is_final(q));
  b.set_initial(remap[fsa.initial]);
  for (const FsaEdge& e : fsa.edges)
    if (remap[e.src] != kEpsilon && remap[e.dst] != kEpsilon)
      b.add_edge(remap[e.src], e.lo, e.hi, remap[e.dst]);
  return b.build();
}

}  // namespace tokamata
