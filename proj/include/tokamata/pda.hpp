#pragma once

#include <algorithm>
#include <cstdint>
#include <deque>
#include <numeric>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

#include "tokamata/errors.hpp"
#include "tokamata/symbols.hpp"

namespace tokamata {

// One pushdown edge. Consuming it requires the input symbol to fall in
// [lo, hi] (or no input when lo == kEpsilon) and the stack to end with the
// pop sequence: pops[0] must equal the top of stack, pops[1] the symbol
// beneath it, and so on. The pops are removed, then the push sequence is
// appended in order (pushes.back() ends up on top).
struct PdaEdge {
  StateId src;
  Symbol lo;
  Symbol hi;
  StateId dst;
  std::uint32_t pops_begin, pops_end;      // into Pda::op_pool
  std::uint32_t pushes_begin, pushes_end;  // into Pda::op_pool

  bool is_epsilon() const { return lo == kEpsilon; }
  bool matches(Symbol s) const { return lo <= s && s <= hi; }
};

// Pushdown acceptor. Execution starts in `initial` with the stack holding
// exactly the initial stack symbol; a configuration is accepting when the
// state is final and the stack has been fully unwound (empty).
//
// Stack symbols are small integers with printable names in
// stack_symbol_name. Grammar-derived PDAs additionally record, per state,
// which rules are complete there (used by the determinism check; empty for
// hand-built machines).
struct Pda {
  std::uint32_t state_count = 0;
  StateId initial = 0;
  std::vector<bool> final_state;
  std::vector<PdaEdge> edges;
  std::vector<std::uint32_t> first_edge;
  std::vector<Symbol> op_pool;
  AlphabetKind alphabet = AlphabetKind::Chars;

  std::uint32_t stack_symbol_count = 1;
  Symbol initial_stack_symbol = 0;
  std::vector<std::string> stack_symbol_name;

  // Grammar metadata (empty when not grammar-derived).
  std::vector<std::vector<std::uint32_t>> completed_rules_by_state;
  std::vector<std::string> rule_text;
  std::string left_recursion_detail;

  bool is_final(StateId q) const { return final_state[q]; }

  std::span<const PdaEdge> out(StateId q) const {
    return {edges.data() + first_edge[q], edges.data() + first_edge[q + 1]};
  }
  std::span<const Symbol> pops(const PdaEdge& e) const {
    return {op_pool.data() + e.pops_begin, op_pool.data() + e.pops_end};
  }
  std::span<const Symbol> pushes(const PdaEdge& e) const {
    return {op_pool.data() + e.pushes_begin, op_pool.data() + e.pushes_end};
  }

  // True iff the stack (back() = top) ends with the edge's pop sequence.
  bool pops_match(const PdaEdge& e, const std::vector<Symbol>& stack) const {
    const auto p = pops(e);
    if (stack.size() < p.size()) return false;
    for (std::size_t i = 0; i < p.size(); ++i)
      if (stack[stack.size() - 1 - i] != p[i]) return false;
    return true;
  }

  void apply(const PdaEdge& e, std::vector<Symbol>& stack) const {
    stack.resize(stack.size() - pops(e).size());
    for (Symbol s : pushes(e)) stack.push_back(s);
  }
};

class PdaBuilder {
 public:
  explicit PdaBuilder(AlphabetKind kind = AlphabetKind::Chars) : kind_(kind) {}

  StateId add_state() {
    final_.push_back(false);
    return static_cast<StateId>(final_.size() - 1);
  }
  void set_initial(StateId q) { initial_ = q; }
  void set_final(StateId q, bool f = true) { final_[q] = f; }
  std::uint32_t state_count() const { return static_cast<std::uint32_t>(final_.size()); }

  Symbol add_stack_symbol(std::string name) {
    names_.push_back(std::move(name));
    return static_cast<Symbol>(names_.size() - 1);
  }

  void add_edge(StateId src, Symbol lo, Symbol hi, StateId dst, std::span<const Symbol> pops,
                std::span<const Symbol> pushes) {
    if (lo != kEpsilon && lo > hi) throw PreconditionError("PdaBuilder::add_edge: empty range");
    PdaEdge e{src, lo, hi, dst, 0, 0, 0, 0};
    e.pops_begin = static_cast<std::uint32_t>(pool_.size());
    pool_.insert(pool_.end(), pops.begin(), pops.end());
    e.pops_end = static_cast<std::uint32_t>(pool_.size());
    e.pushes_begin = static_cast<std::uint32_t>(pool_.size());
    pool_.insert(pool_.end(), pushes.begin(), pushes.end());
    e.pushes_end = static_cast<std::uint32_t>(pool_.size());
    edges_.push_back(e);
  }
  void add_edge(StateId src, Symbol lo, Symbol hi, StateId dst,
                const std::vector<Symbol>& pops = {}, const std::vector<Symbol>& pushes = {}) {
    add_edge(src, lo, hi, dst, std::span<const Symbol>(pops), std::span<const Symbol>(pushes));
  }

  Pda build() {
    Pda pda;
    pda.state_count = state_count();
    if (pda.state_count == 0) throw PreconditionError("PdaBuilder::build: no states");
    if (initial_ >= pda.state_count) throw PreconditionError("PdaBuilder::build: initial out of range");
    pda.initial = initial_;
    pda.final_state = final_;
    pda.alphabet = kind_;
    if (names_.empty()) names_.push_back("[.]");
    pda.stack_symbol_count = static_cast<std::uint32_t>(names_.size());
    pda.stack_symbol_name = std::move(names_);
    pda.initial_stack_symbol = 0;
    for (const PdaEdge& e : edges_) {
      if (e.src >= pda.state_count || e.dst >= pda.state_count)
        throw PreconditionError("PdaBuilder::build: edge endpoint out of range");
    }
    std::sort(edges_.begin(), edges_.end(), [](const PdaEdge& a, const PdaEdge& b) {
      if (a.src != b.src) return a.src < b.src;
      if (a.lo != b.lo) return a.lo < b.lo;
      return a.hi < b.hi;
    });
    pda.edges = std::move(edges_);
    pda.op_pool = std::move(pool_);
    pda.first_edge.assign(pda.state_count + 1, 0);
    for (const PdaEdge& e : pda.edges) ++pda.first_edge[e.src + 1];
    for (std::uint32_t q = 0; q < pda.state_count; ++q) pda.first_edge[q + 1] += pda.first_edge[q];
    return pda;
  }

 private:
  AlphabetKind kind_;
  StateId initial_ = 0;
  std::vector<bool> final_;
  std::vector<PdaEdge> edges_;
  std::vector<Symbol> pool_;
  std::vector<std::string> names_;
};

// Membership test by configuration search: breadth-first over
// (state, input position, stack) with deduplication. Handles epsilon edges
// and nondeterminism; the budget guards degenerate machines.
//
// Accepts iff some path consumes all of `input`, ends in a final state, and
// leaves the stack empty, starting from stack = [initial_stack_symbol].
inline bool pda_accepts(const Pda& pda, std::span<const Symbol> input,
                        std::size_t config_budget = 1u << 20) {
  struct Config {
    StateId state;
    std::uint32_t pos;
    std::vector<Symbol> stack;
  };
  const auto key = [](const Config& c) {
    std::uint64_t h = fnv1a64(&c.state, sizeof c.state);
    h = fnv1a64(&c.pos, sizeof c.pos, h);
    return fnv1a64(c.stack.data(), c.stack.size() * sizeof(Symbol), h);
  };

  std::deque<Config> work;
  std::unordered_set<std::uint64_t> seen;
  work.push_back({pda.initial, 0, {pda.initial_stack_symbol}});
  seen.insert(key(work.front()));
  std::size_t expanded = 0;

  while (!work.empty()) {
    Config c = std::move(work.front());
    work.pop_front();
    if (++expanded > config_budget)
      throw ResourceLimitError("pda_accepts exceeded its configuration budget (budget=" +
                               std::to_string(config_budget) + ")");
    if (c.pos == input.size() && pda.is_final(c.state) && c.stack.empty()) return true;
    for (const PdaEdge& e : pda.out(c.state)) {
      std::uint32_t npos = c.pos;
      if (!e.is_epsilon()) {
        if (c.pos >= input.size() || !e.matches(input[c.pos])) continue;
        npos = c.pos + 1;
      }
      if (!pda.pops_match(e, c.stack)) continue;
      Config n{e.dst, npos, c.stack};
      pda.apply(e, n.stack);
      if (seen.insert(key(n)).second) work.push_back(std::move(n));
    }
  }
  return false;
}

inline bool pda_accepts(const Pda& pda, const std::vector<Symbol>& input,
                        std::size_t config_budget = 1u << 20) {
  return pda_accepts(pda, std::span<const Symbol>(input), config_budget);
}

}  // namespace tokamata
