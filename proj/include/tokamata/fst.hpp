#pragma once

#include <algorithm>
#include <cstdint>
#include <deque>
#include <optional>
#include <span>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "tokamata/errors.hpp"
#include "tokamata/fsa.hpp"
#include "tokamata/symbols.hpp"

namespace tokamata {

// One transducer edge: consumes `in` (or nothing when in == kEpsilon) and
// emits `out` (or nothing when out == kEpsilon).
struct FstEdge {
  StateId src;
  Symbol in;
  Symbol out;
  StateId dst;
};

// Finite-state transducer. Same storage discipline as Fsa: immutable after
// FstBuilder::build, edges sorted by (src, in, out, dst) with per-state
// offsets.
struct Fst {
  std::uint32_t state_count = 0;
  StateId initial = 0;
  std::vector<bool> final_state;
  std::vector<FstEdge> edges;
  std::vector<std::uint32_t> first_edge;
  AlphabetKind input_alphabet = AlphabetKind::Tokens;
  AlphabetKind output_alphabet = AlphabetKind::Chars;

  bool is_final(StateId q) const { return final_state[q]; }

  std::span<const FstEdge> out(StateId q) const {
    return {edges.data() + first_edge[q], edges.data() + first_edge[q + 1]};
  }
};

class FstBuilder {
 public:
  FstBuilder(AlphabetKind in_kind, AlphabetKind out_kind)
      : in_kind_(in_kind), out_kind_(out_kind) {}

  StateId add_state() {
    final_.push_back(false);
    return static_cast<StateId>(final_.size() - 1);
  }
  void set_initial(StateId q) { initial_ = q; }
  void set_final(StateId q, bool f = true) { final_[q] = f; }
  std::uint32_t state_count() const { return static_cast<std::uint32_t>(final_.size()); }

  void add_edge(StateId src, Symbol in, Symbol out, StateId dst) {
    edges_.push_back({src, in, out, dst});
  }

  Fst build() {
    Fst fst;
    fst.state_count = state_count();
    if (fst.state_count == 0) throw PreconditionError("FstBuilder::build: no states");
    if (initial_ >= fst.state_count) throw PreconditionError("FstBuilder::build: initial out of range");
    fst.initial = initial_;
    fst.final_state = final_;
    fst.input_alphabet = in_kind_;
    fst.output_alphabet = out_kind_;
    for (const FstEdge& e : edges_) {
      if (e.src >= fst.state_count || e.dst >= fst.state_count)
        throw PreconditionError("FstBuilder::build: edge endpoint out of range");
    }
    std::sort(edges_.begin(), edges_.end(), [](const FstEdge& a, const FstEdge& b) {
      if (a.src != b.src) return a.src < b.src;
      if (a.in != b.in) return a.in < b.in;
      if (a.out != b.out) return a.out < b.out;
      return a.dst < b.dst;
    });
    fst.edges = std::move(edges_);
    fst.first_edge.assign(fst.state_count + 1, 0);
    for (const FstEdge& e : fst.edges) ++fst.first_edge[e.src + 1];
    for (std::uint32_t q = 0; q < fst.state_count; ++q) fst.first_edge[q + 1] += fst.first_edge[q];
    return fst;
  }

 private:
  AlphabetKind in_kind_, out_kind_;
  StateId initial_ = 0;
  std::vector<bool> final_;
  std::vector<FstEdge> edges_;
};

// Runs `input` through the transducer and returns the output of the accepting
// path, or nullopt if no path accepts. A configurable budget guards
// pathological transducers.
//
// The simulation works on input-consuming closures: for each state the
// epsilon-input subgraph is explored once per call, recording (a) which input
// symbols can be consumed next, where they lead, and what the path emits, and
// (b) whether a final state is epsilon-reachable and with what emission. The
// per-symbol frontier then advances by closure lookups instead of re-walking
// the epsilon subgraph, which matters for detokenizers whose every token
// consumption re-enters the same root. Outputs live in a backpointer trie so
// extending and comparing them is O(1) per step; two frontier entries carry
// equal outputs exactly when they hold the same trie node.
//
// Throws IntegrityError if two accepting paths produce distinct outputs: the
// transducers this library builds are functional, a second output means the
// construction is broken.
inline std::optional<std::vector<Symbol>> fst_transduce(const Fst& fst,
                                                        std::span<const Symbol> input,
                                                        std::size_t config_budget = 1u << 20) {
  constexpr std::uint32_t kEmptyOutput = 0xFFFFFFFFu;
  struct OutNode {
    std::uint32_t parent;
    Symbol sym;
  };
  std::vector<OutNode> out_nodes;
  std::unordered_map<std::uint64_t, std::uint32_t> interned;  // (parent, sym) -> node
  const auto extend = [&](std::uint32_t node, Symbol sym) {
    const std::uint64_t k = (static_cast<std::uint64_t>(node) << 32) | sym;
    const auto [it, fresh] = interned.try_emplace(k, static_cast<std::uint32_t>(out_nodes.size()));
    if (fresh) out_nodes.push_back({node, sym});
    return it->second;
  };
  const auto materialize = [&](std::uint32_t node) {
    std::vector<Symbol> syms;
    for (; node != kEmptyOutput; node = out_nodes[node].parent) syms.push_back(out_nodes[node].sym);
    std::reverse(syms.begin(), syms.end());
    return syms;
  };

  std::size_t expanded = 0;
  const auto charge = [&](std::size_t n = 1) {
    if ((expanded += n) > config_budget)
      throw ResourceLimitError("fst_transduce exceeded its configuration budget (budget=" +
                               std::to_string(config_budget) + ")");
  };

  // Closure of one state: everything reachable without consuming input.
  struct Consume {
    Symbol in;
    StateId dst;
    std::vector<Symbol> emit;  // emitted along the epsilon prefix plus the edge
  };
  struct Closure {
    std::vector<Consume> consumes;         // sorted by `in`
    std::vector<std::vector<Symbol>> finals;  // emissions reaching a final state
  };
  std::unordered_map<StateId, Closure> closures;
  const auto closure_of = [&](StateId s) -> const Closure& {
    const auto hit = closures.find(s);
    if (hit != closures.end()) return hit->second;
    Closure cl;
    std::deque<std::pair<StateId, std::uint32_t>> work;  // (state, output node)
    std::unordered_set<std::uint64_t> seen;              // exact pack of (state, node)
    const auto pack = [](StateId q, std::uint32_t node) {
      return (static_cast<std::uint64_t>(q) << 32) | node;
    };
    work.push_back({s, kEmptyOutput});
    seen.insert(pack(s, kEmptyOutput));
    while (!work.empty()) {
      const auto [q, node] = work.front();
      work.pop_front();
      charge();
      if (fst.is_final(q)) cl.finals.push_back(materialize(node));
      for (const FstEdge& e : fst.out(q)) {
        const std::uint32_t nout = e.out != kEpsilon ? extend(node, e.out) : node;
        if (e.in != kEpsilon) {
          Consume c{e.in, e.dst, materialize(nout)};
          cl.consumes.push_back(std::move(c));
          continue;
        }
        if (seen.insert(pack(e.dst, nout)).second) work.push_back({e.dst, nout});
      }
    }
    std::sort(cl.consumes.begin(), cl.consumes.end(),
              [](const Consume& a, const Consume& b) { return a.in < b.in; });
    return closures.emplace(s, std::move(cl)).first->second;
  };

  // Frontier advance: consume input symbols one at a time via closure lookups.
  std::vector<std::pair<StateId, std::uint32_t>> frontier{{fst.initial, kEmptyOutput}};
  std::unordered_set<std::uint64_t> dedup;  // exact pack of (state, node)
  for (const Symbol sym : input) {
    std::vector<std::pair<StateId, std::uint32_t>> next;
    dedup.clear();
    for (const auto& [state, node] : frontier) {
      const Closure& cl = closure_of(state);
      const auto lo = std::lower_bound(
          cl.consumes.begin(), cl.consumes.end(), sym,
          [](const Consume& c, Symbol v) { return c.in < v; });
      for (auto it = lo; it != cl.consumes.end() && it->in == sym; ++it) {
        charge();
        std::uint32_t nout = node;
        for (const Symbol o : it->emit) nout = extend(nout, o);
        const std::uint64_t key = (static_cast<std::uint64_t>(it->dst) << 32) | nout;
        if (dedup.insert(key).second) next.push_back({it->dst, nout});
      }
    }
    frontier = std::move(next);
    if (frontier.empty()) return std::nullopt;
  }

  std::optional<std::uint32_t> accepted;
  for (const auto& [state, node] : frontier) {
    for (const std::vector<Symbol>& emit : closure_of(state).finals) {
      charge();
      std::uint32_t nout = node;
      for (const Symbol o : emit) nout = extend(nout, o);
      if (accepted && *accepted != nout)
        throw IntegrityError("fst_transduce: two accepting paths with distinct outputs");
      accepted = nout;
    }
  }
  if (!accepted) return std::nullopt;
  return materialize(*accepted);
}

inline std::optional<std::vector<Symbol>> fst_transduce(const Fst& fst,
                                                        const std::vector<Symbol>& input,
                                                        std::size_t config_budget = 1u << 20) {
  return fst_transduce(fst, std::span<const Symbol>(input), config_budget);
}

}  // namespace tokamata
