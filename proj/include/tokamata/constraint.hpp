#pragma once

#include <algorithm>
#include <array>
#include <atomic>
#include <chrono>
#include <cstdint>
#include <deque>
#include <limits>
#include <memory>
#include <mutex>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "tokamata/detokenizer.hpp"
#include "tokamata/errors.hpp"
#include "tokamata/fsa.hpp"
#include "tokamata/grammar_pda.hpp"
#include "tokamata/pda.hpp"
#include "tokamata/regex_compile.hpp"
#include "tokamata/terminal_labels.hpp"
#include "tokamata/token_mask.hpp"
#include "tokamata/vocabulary.hpp"

namespace tokamata {

enum class ConstraintKind : std::uint8_t { Regex, Grammar };

// One advance step, recorded so rewind can restore the exact configuration:
// truncate the stack to (prior_stack_len - popped.size()), re-append the
// popped symbols deepest-first, and return to prior_state.
struct StepRecord {
  TokenId token = 0;
  StateId prior_state = 0;
  std::uint32_t prior_stack_len = 0;
  std::vector<Symbol> popped;  // symbols removed from the prior stack, top first
};

struct DecodeState {
  StateId state = 0;
  std::vector<Symbol> stack;  // grammar kind only; the bottom marker is implicit
  std::vector<StepRecord> history;
};

namespace detail {

// Per-state scanning summary used by the trie-subtree shortcut: the set of
// characters on which the state loops to itself with no stack effect. When
// that set covers every character under a trie node, all tokens below the
// node are accepted without walking them.
struct SelfLoop {
  std::array<std::uint64_t, 2> ascii{0, 0};
  bool covers_nonascii = false;
};

inline void selfloop_add_range(SelfLoop& s, Symbol lo, Symbol hi,
                               std::vector<std::pair<Symbol, Symbol>>& high) {
  for (Symbol c = lo; c <= hi && c < 128; ++c) s.ascii[c >> 6] |= 1ull << (c & 63);
  if (hi >= 128) high.push_back({std::max<Symbol>(lo, 128), hi});
}

inline bool covers_all_high(std::vector<std::pair<Symbol, Symbol>> high) {
  std::sort(high.begin(), high.end());
  Symbol next = 128;
  for (const auto& [lo, hi] : high) {
    if (lo > next) return false;
    if (hi >= next) next = hi + 1;
    if (next > kMaxChar) return true;
  }
  return next > kMaxChar;
}

inline std::vector<SelfLoop> fsa_self_loops(const Fsa& fsa) {
  std::vector<SelfLoop> out(fsa.state_count);
  for (StateId q = 0; q < fsa.state_count; ++q) {
    std::vector<std::pair<Symbol, Symbol>> high;
    for (const FsaEdge& e : fsa.out(q)) {
      if (e.dst == q && !e.is_epsilon() && e.lo <= kMaxChar)
        selfloop_add_range(out[q], e.lo, std::min(e.hi, kMaxChar), high);
    }
    out[q].covers_nonascii = covers_all_high(std::move(high));
  }
  return out;
}

inline std::vector<SelfLoop> pda_self_loops(const Pda& pda) {
  std::vector<SelfLoop> out(pda.state_count);
  for (StateId q = 0; q < pda.state_count; ++q) {
    std::vector<std::pair<Symbol, Symbol>> high;
    for (const PdaEdge& e : pda.out(q)) {
      if (e.dst == q && !e.is_epsilon() && e.lo <= kMaxChar && pda.pops(e).empty() &&
          pda.pushes(e).empty())
        selfloop_add_range(out[q], e.lo, std::min(e.hi, kMaxChar), high);
    }
    out[q].covers_nonascii = covers_all_high(std::move(high));
  }
  return out;
}

inline bool subtree_covered(const TokenTrie& trie, std::uint32_t node, const SelfLoop& loop) {
  if (trie.subtree_nonascii[node] && !loop.covers_nonascii) return false;
  const auto& sub = trie.subtree_ascii[node];
  return (sub[0] & ~loop.ascii[0]) == 0 && (sub[1] & ~loop.ascii[1]) == 0;
}

struct CachedMasks {
  TokenMask direct;  // regex kind: the full mask for the state
};

// Grammar masks depend on the stack, but a mask walk only ever inspects a
// bounded top slice of it. Each cache entry records the slice that was read:
// an entry whose walk never consulted the stack floor is valid for any stack
// ending in that slice; one that did is valid for that exact stack only.
struct StackMaskEntry {
  std::vector<Symbol> suffix;  // trailing slice of the stack, natural order
  bool exact = false;          // the walk consulted the stack floor
  TokenMask mask;
};

// Lazy per-state cache. Regex slots are filled at most once and read with
// acquire loads; grammar entries accumulate per state under the mutex.
class MaskCache {
 public:
  explicit MaskCache(std::size_t states) : slots_(states), stack_slots_(states) {}

  const CachedMasks* get(StateId q) const { return slots_[q].load(std::memory_order_acquire); }

  const CachedMasks* put(StateId q, std::unique_ptr<CachedMasks> masks) const {
    std::lock_guard<std::mutex> lock(mutex_);
    if (const CachedMasks* existing = slots_[q].load(std::memory_order_relaxed)) return existing;
    owned_.push_back(std::move(masks));
    const CachedMasks* p = owned_.back().get();
    slots_[q].store(p, std::memory_order_release);
    return p;
  }

  bool find_stack_mask(StateId q, const std::vector<Symbol>& stack, TokenMask* out) const {
    std::lock_guard<std::mutex> lock(mutex_);
    for (const StackMaskEntry& e : stack_slots_[q]) {
      const bool applies = e.exact ? stack == e.suffix
                                   : stack.size() >= e.suffix.size() &&
                                         std::equal(e.suffix.begin(), e.suffix.end(),
                                                    stack.end() - e.suffix.size());
      if (applies) {
        *out = e.mask;
        return true;
      }
    }
    return false;
  }

  void put_stack_mask(StateId q, StackMaskEntry entry) const {
    std::lock_guard<std::mutex> lock(mutex_);
    for (const StackMaskEntry& e : stack_slots_[q])
      if (e.exact == entry.exact && e.suffix == entry.suffix) return;
    stack_slots_[q].push_back(std::move(entry));
  }

 private:
  mutable std::vector<std::atomic<const CachedMasks*>> slots_;
  mutable std::vector<std::vector<StackMaskEntry>> stack_slots_;
  mutable std::mutex mutex_;
  mutable std::deque<std::unique_ptr<CachedMasks>> owned_;
};

inline bool is_terminal_label_symbol(Symbol s) { return s >= kTerminalBase && s < kCallBase; }

}  // namespace detail

// A token-level constraint: the character automaton composed with the
// vocabulary's detokenizing transducer. The composition is materialized as
// per-state token masks, computed lazily through the token trie and cached;
// stepping a single token re-walks its characters, which is cheap and needs
// no per-token edge table.
struct CompiledConstraint {
  ConstraintKind kind = ConstraintKind::Regex;
  Fsa char_dfa;  // regex kind: deterministic, dead states pruned
  Pda pda;       // grammar kind: deterministic per check_determinism

  std::shared_ptr<const Vocabulary> vocabulary;
  std::uint64_t vocab_fingerprint = 0;
  std::uint32_t vocab_size = 0;
  TokenTrie trie;

  // Wildcard terminal masks in declaration order (first appearance in the
  // pattern); declaration order is also the precedence order when several
  // terminal edges leave one state.
  std::vector<std::pair<Symbol, TokenMask>> terminal_masks;
  std::vector<std::string> warnings;

  std::vector<detail::SelfLoop> self_loops;
  std::vector<bool> dead;  // grammar kind: states that cannot reach acceptance
  std::unique_ptr<detail::MaskCache> cache;

  const TokenMask* terminal_mask_for(Symbol label) const {
    for (const auto& [id, mask] : terminal_masks)
      if (id == label) return &mask;
    return nullptr;
  }
};

inline void verify_vocabulary(const CompiledConstraint& c, const Vocabulary& v) {
  if (c.vocab_fingerprint != v.fingerprint || c.vocab_size != v.size())
    throw VocabularyMismatch("constraint was compiled for a different vocabulary (fingerprint " +
                             std::to_string(c.vocab_fingerprint) + ", size " +
                             std::to_string(c.vocab_size) + ")");
}

namespace detail {

// DFA transition: edges are sorted by lo and disjoint.
inline const FsaEdge* dfa_step(const Fsa& fsa, StateId q, Symbol c) {
  const auto edges = fsa.out(q);
  std::size_t lo = 0, hi = edges.size();
  while (lo < hi) {
    const std::size_t mid = (lo + hi) / 2;
    if (edges[mid].lo <= c)
      lo = mid + 1;
    else
      hi = mid;
  }
  if (lo == 0) return nullptr;
  const FsaEdge& e = edges[lo - 1];
  return (!e.is_epsilon() && e.lo <= c && c <= e.hi) ? &e : nullptr;
}

// Tokens whose characters the DFA consumes from state q, ignoring terminal
// labels. Walks the trie; bulk-accepts whole subtrees under self-loops.
inline TokenMask regex_token_walk(const CompiledConstraint& c, StateId q) {
  TokenMask mask(c.vocab_size);
  const TokenTrie& trie = c.trie;
  if (trie.node_count == 0) return mask;
  std::vector<std::pair<std::uint32_t, StateId>> work{{0, q}};
  while (!work.empty()) {
    const auto [node, s] = work.back();
    work.pop_back();
    if (subtree_covered(trie, node, c.self_loops[s])) {
      for (std::uint32_t i = trie.range_begin[node]; i < trie.range_end[node]; ++i)
        mask.set(trie.tokens_in_order[i]);
      continue;
    }
    for (std::uint32_t i = trie.close_begin[node]; i < trie.close_begin[node + 1]; ++i) {
      if (dfa_step(c.char_dfa, s, trie.close_syms[i])) mask.set(trie.close_tokens[i]);
    }
    const auto syms = trie.children_syms(node);
    for (std::uint32_t i = 0; i < syms.size(); ++i) {
      if (const FsaEdge* e = dfa_step(c.char_dfa, s, syms[i]))
        work.push_back({trie.child_at(node, i), e->dst});
    }
  }
  return mask;
}

inline const CachedMasks* regex_masks(const CompiledConstraint& c, StateId q) {
  if (const CachedMasks* hit = c.cache->get(q)) return hit;
  auto masks = std::make_unique<CachedMasks>();
  masks->direct = regex_token_walk(c, q);
  for (const FsaEdge& e : c.char_dfa.out(q)) {
    if (!e.is_epsilon() && is_terminal_label_symbol(e.lo)) {
      if (const TokenMask* m = c.terminal_mask_for(e.lo)) masks->direct.or_with(*m);
    }
  }
  return c.cache->put(q, std::move(masks));
}

inline constexpr std::size_t kGrammarWalkBudget = 500000;

struct GrammarWalkResult {
  TokenMask mask;
  std::uint32_t depth_read = 0;  // deepest stack slot consulted, counted from the top
  bool floor_hit = false;        // the walk asked whether the stack ends here
};

// Grammar-kind mask computation for one configuration: breadth-first search
// over (trie node, machine state, stack effect), scanning trie characters
// through the machine and threading completion edges between scans.
// Completions consume pending pushes first, then the concrete stack from the
// top down, so the search is bounded by the stack depth. The result records
// how deep the walk looked, which is what makes the cache entries reusable.
inline GrammarWalkResult grammar_token_walk(const CompiledConstraint& c, StateId q,
                                            const std::vector<Symbol>& stack) {
  const TokenTrie& trie = c.trie;
  const Pda& pda = c.pda;
  GrammarWalkResult out{TokenMask(c.vocab_size)};
  if (trie.node_count == 0 || c.dead[q]) return out;

  struct Config {
    std::uint32_t node;
    StateId state;
    std::uint32_t depth;         // symbols consumed from the concrete stack top
    bool bottom;                 // popped the implicit bottom marker (acceptance)
    std::vector<Symbol> pushes;  // net pushes above the consumed point
  };
  const auto encode = [](const Config& cf) {
    std::vector<std::uint32_t> key{cf.node, cf.state, cf.depth, cf.bottom ? 1u : 0u};
    key.insert(key.end(), cf.pushes.begin(), cf.pushes.end());
    return key;
  };

  std::deque<Config> work;
  std::set<std::vector<std::uint32_t>> seen;
  work.push_back({0, q, 0, false, {}});
  seen.insert(encode(work.front()));
  std::size_t visited = 0;
  while (!work.empty()) {
    if (++visited > kGrammarWalkBudget)
      throw ResourceLimitError("token mask search exceeded its configuration budget");
    const Config cf = std::move(work.front());
    work.pop_front();
    const auto enqueue = [&](Config&& next) {
      if (seen.insert(encode(next)).second) work.push_back(std::move(next));
    };

    if (subtree_covered(trie, cf.node, c.self_loops[cf.state])) {
      for (std::uint32_t i = trie.range_begin[cf.node]; i < trie.range_end[cf.node]; ++i)
        out.mask.set(trie.tokens_in_order[i]);
      continue;
    }

    for (const PdaEdge& e : pda.out(cf.state)) {
      if (e.is_epsilon()) {
        // Completion: pops exactly one symbol (the bottom marker accepts).
        const auto pops = pda.pops(e);
        if (pops.empty()) throw IntegrityError("completion edge with no pops");
        if (cf.bottom) continue;  // nothing left to pop
        Config next = cf;
        if (!next.pushes.empty()) {
          if (next.pushes.back() != pops[0]) continue;
          next.pushes.pop_back();
        } else if (next.depth < stack.size()) {
          out.depth_read = std::max(out.depth_read, next.depth + 1);
          if (stack[stack.size() - 1 - next.depth] != pops[0]) continue;
          ++next.depth;
        } else {
          out.floor_hit = true;
          if (pops[0] != pda.initial_stack_symbol) continue;
          next.bottom = true;
        }
        if (c.dead[e.dst]) continue;
        next.state = e.dst;
        enqueue(std::move(next));
        continue;
      }
      if (c.dead[e.dst]) continue;
      // Scan: match closing symbols (token ends on this character) and
      // child edges (token continues) against the edge's range.
      for (std::uint32_t i = trie.close_begin[cf.node]; i < trie.close_begin[cf.node + 1]; ++i) {
        const Symbol s = trie.close_syms[i];
        if (s >= e.lo && s <= e.hi) out.mask.set(trie.close_tokens[i]);
      }
      const auto syms = trie.children_syms(cf.node);
      for (std::uint32_t i = 0; i < syms.size(); ++i) {
        if (syms[i] < e.lo || syms[i] > e.hi) continue;
        Config next = cf;
        next.node = trie.child_at(cf.node, i);
        next.state = e.dst;
        const auto pushes = pda.pushes(e);
        next.pushes.insert(next.pushes.end(), pushes.begin(), pushes.end());
        enqueue(std::move(next));
      }
    }
  }
  return out;
}

// Whether the configuration can reach acceptance on completions alone:
// repeatedly take the unique applicable completion edge; accept when the
// bottom marker is popped into the final state.
inline bool grammar_finishable(const Pda& pda, StateId state, std::vector<Symbol> stack) {
  while (true) {
    if (pda.is_final(state) && stack.empty()) return true;
    const PdaEdge* taken = nullptr;
    for (const PdaEdge& e : pda.out(state)) {
      if (!e.is_epsilon()) continue;
      const auto pops = pda.pops(e);
      if (pops.empty()) throw IntegrityError("completion edge with no pops");
      const bool applies = (pops[0] == pda.initial_stack_symbol)
                               ? stack.empty()
                               : (!stack.empty() && stack.back() == pops[0]);
      if (!applies) continue;
      if (taken)
        throw IntegrityError("two completion edges apply to the same configuration");
      taken = &e;
    }
    if (!taken) return false;
    if (pda.pops(*taken)[0] != pda.initial_stack_symbol) stack.pop_back();
    state = taken->dst;
  }
}

// Core stepping logic, shared by advance (throwing) and acceptance checks.
// Returns false when the token has no path; on success updates state/stack
// and records the symbols popped below the entry stack top.
inline bool step_token(const CompiledConstraint& c, StateId& state, std::vector<Symbol>& stack,
                       TokenId token, std::vector<Symbol>& popped) {
  if (token >= c.vocab_size || c.vocabulary->is_reserved(token)) return false;
  const std::vector<Symbol>& syms = c.vocabulary->symbols[token];

  if (c.kind == ConstraintKind::Regex) {
    StateId q = state;
    bool matched = true;
    for (const Symbol s : syms) {
      const FsaEdge* e = dfa_step(c.char_dfa, q, s);
      if (!e) {
        matched = false;
        break;
      }
      q = e->dst;
    }
    if (matched) {
      state = q;
      return true;
    }
    // No normal path: fall back to wildcard terminal edges, declaration
    // order first.
    for (const auto& [label, mask] : c.terminal_masks) {
      if (!mask.test(token)) continue;
      for (const FsaEdge& e : c.char_dfa.out(state)) {
        if (!e.is_epsilon() && e.lo == label) {
          state = e.dst;
          return true;
        }
      }
    }
    return false;
  }

  // Grammar kind: deterministic character simulation. Scans win when they
  // apply; otherwise the unique applicable completion fires and the
  // character is retried. Determinism checks make this unambiguous.
  StateId q = state;
  std::size_t watermark = stack.size();
  const auto pop_top = [&]() {
    if (stack.size() <= watermark) {
      popped.push_back(stack.back());
      watermark = stack.size() - 1;
    }
    stack.pop_back();
  };
  const std::size_t rollback_popped = popped.size();
  const std::size_t entry_len = stack.size();

  for (const Symbol s : syms) {
    while (true) {
      const PdaEdge* scan = nullptr;
      const PdaEdge* completion = nullptr;
      for (const PdaEdge& e : c.pda.out(q)) {
        if (e.is_epsilon()) {
          const auto pops = c.pda.pops(e);
          if (pops.empty()) throw IntegrityError("completion edge with no pops");
          const bool applies = (pops[0] == c.pda.initial_stack_symbol)
                                   ? stack.empty()
                                   : (!stack.empty() && stack.back() == pops[0]);
          if (!applies) continue;
          if (completion)
            throw IntegrityError("two completion edges apply to the same configuration");
          completion = &e;
          continue;
        }
        if (s >= e.lo && s <= e.hi) {
          if (scan) throw IntegrityError("two scan edges match the same character");
          scan = &e;
        }
      }
      if (scan) {
        const auto pushes = c.pda.pushes(*scan);
        stack.insert(stack.end(), pushes.begin(), pushes.end());
        q = scan->dst;
        break;
      }
      if (!completion) {
        // Dead: restore the caller's stack from the recorded pops.
        stack.resize(std::min(stack.size(), watermark));
        for (std::size_t i = popped.size(); i > rollback_popped; --i)
          stack.push_back(popped[i - 1]);
        popped.resize(rollback_popped);
        if (stack.size() != entry_len)
          throw IntegrityError("stack restore after a rejected token went wrong");
        return false;
      }
      if (c.pda.pops(*completion)[0] != c.pda.initial_stack_symbol) pop_top();
      q = completion->dst;
    }
  }
  state = q;
  return true;
}

}  // namespace detail

inline DecodeState initial_state(const CompiledConstraint& c) {
  DecodeState st;
  st.state = c.kind == ConstraintKind::Regex ? c.char_dfa.initial : c.pda.initial;
  return st;
}

// Mask of tokens with at least one outbound path from the current
// configuration, plus the finish bit when the configuration itself accepts.
inline TokenMask allowed_tokens(const CompiledConstraint& c, const DecodeState& st) {
  if (c.kind == ConstraintKind::Regex) {
    TokenMask mask = detail::regex_masks(c, st.state)->direct;
    mask.finish = c.char_dfa.is_final(st.state);
    return mask;
  }
  TokenMask mask(c.vocab_size);
  if (!c.cache->find_stack_mask(st.state, st.stack, &mask)) {
    auto walked = detail::grammar_token_walk(c, st.state, st.stack);
    detail::StackMaskEntry entry;
    entry.exact = walked.floor_hit;
    const std::size_t depth = walked.floor_hit ? st.stack.size() : walked.depth_read;
    entry.suffix.assign(st.stack.end() - static_cast<std::ptrdiff_t>(depth), st.stack.end());
    entry.mask = walked.mask;
    mask = std::move(walked.mask);
    c.cache->put_stack_mask(st.state, std::move(entry));
  }
  mask.finish = detail::grammar_finishable(c.pda, st.state, st.stack);
  return mask;
}

inline DecodeState advance(const CompiledConstraint& c, DecodeState st, TokenId token) {
  StepRecord rec;
  rec.token = token;
  rec.prior_state = st.state;
  rec.prior_stack_len = static_cast<std::uint32_t>(st.stack.size());
  if (!detail::step_token(c, st.state, st.stack, token, rec.popped)) {
    std::string text = token < c.vocab_size
                           ? "\"" + detail::escape_c_string(c.vocabulary->tokens[token]) + "\""
                           : "id out of range";
    throw ConstraintViolation("token " + std::to_string(token) + " (" + text +
                                  ") is not allowed at state " + std::to_string(st.state),
                              token, st.state);
  }
  st.history.push_back(std::move(rec));
  return st;
}

// Restores the configuration from k tokens ago by unwinding the history.
inline DecodeState rewind(DecodeState st, std::size_t k) {
  if (k > st.history.size())
    throw PreconditionError("rewind: k=" + std::to_string(k) + " exceeds history length " +
                            std::to_string(st.history.size()));
  for (std::size_t i = 0; i < k; ++i) {
    const StepRecord& rec = st.history.back();
    st.stack.resize(rec.prior_stack_len - rec.popped.size());
    for (std::size_t j = rec.popped.size(); j > 0; --j) st.stack.push_back(rec.popped[j - 1]);
    st.state = rec.prior_state;
    st.history.pop_back();
  }
  return st;
}

// Logits cover |V| tokens plus one trailing end-of-sequence slot; disallowed
// entries become -inf, allowed entries pass through untouched.
inline std::vector<float> apply_mask(std::vector<float> logits, const TokenMask& mask) {
  if (logits.size() != static_cast<std::size_t>(mask.size) + 1)
    throw PreconditionError("apply_mask: expected " + std::to_string(mask.size + 1) +
                            " logits, got " + std::to_string(logits.size()));
  constexpr float kNegInf = -std::numeric_limits<float>::infinity();
  for (std::uint32_t i = 0; i < mask.size; ++i) {
    if (!mask.test(i)) logits[i] = kNegInf;
  }
  if (!mask.finish) logits.back() = kNegInf;
  return logits;
}

inline bool finishable(const CompiledConstraint& c, const DecodeState& st) {
  if (c.kind == ConstraintKind::Regex) return c.char_dfa.is_final(st.state);
  return detail::grammar_finishable(c.pda, st.state, st.stack);
}

// Whole-sequence acceptance: every token steps, and the final configuration
// accepts. Exception-free on the rejection path so enumeration stays cheap.
inline bool constraint_accepts(const CompiledConstraint& c, std::span<const TokenId> tokens) {
  StateId state = c.kind == ConstraintKind::Regex ? c.char_dfa.initial : c.pda.initial;
  std::vector<Symbol> stack;
  std::vector<Symbol> popped;
  for (const TokenId t : tokens) {
    if (!detail::step_token(c, state, stack, t, popped)) return false;
  }
  if (c.kind == ConstraintKind::Regex) return c.char_dfa.is_final(state);
  return detail::grammar_finishable(c.pda, state, std::move(stack));
}

inline bool constraint_accepts(const CompiledConstraint& c, const std::vector<TokenId>& tokens) {
  return constraint_accepts(c, std::span<const TokenId>(tokens));
}

namespace detail {

inline void collect_label_order(const RegexNode& n, std::vector<Symbol>& order) {
  if (n.kind == RegexKind::Extension && is_terminal_label_name(n.ext_name)) {
    const Symbol id = terminal_label_for_name(n.ext_name).id;
    if (std::find(order.begin(), order.end(), id) == order.end()) order.push_back(id);
  }
  for (const auto& child : n.children) collect_label_order(*child, order);
}

inline std::uint32_t mask_overlap(const TokenMask& a, const TokenMask& b) {
  std::uint32_t n = 0;
  for (std::size_t i = 0; i < a.bits.size(); ++i)
    n += static_cast<std::uint32_t>(__builtin_popcountll(a.bits[i] & b.bits[i]));
  return n;
}

// States with no edge path to acceptance are dead for every stack (the edge
// graph over-approximates reachability, so this never marks a live state).
inline std::vector<bool> compute_dead_states(const Pda& pda) {
  std::vector<bool> dead(pda.state_count, true);
  std::vector<std::vector<StateId>> rev(pda.state_count);
  for (const PdaEdge& e : pda.edges) rev[e.dst].push_back(e.src);
  std::vector<StateId> work;
  for (StateId q = 0; q < pda.state_count; ++q) {
    if (pda.is_final(q)) {
      dead[q] = false;
      work.push_back(q);
    }
  }
  while (!work.empty()) {
    const StateId q = work.back();
    work.pop_back();
    for (const StateId p : rev[q]) {
      if (dead[p]) {
        dead[p] = false;
        work.push_back(p);
      }
    }
  }
  return dead;
}

inline void shared_compile_fields(CompiledConstraint& c,
                                  std::shared_ptr<const Vocabulary> vocab) {
  if (!vocab || vocab->size() == 0)
    throw PreconditionError("constraint compilation needs a non-empty vocabulary");
  c.vocabulary = std::move(vocab);
  c.vocab_fingerprint = c.vocabulary->fingerprint;
  c.vocab_size = c.vocabulary->size();
  c.trie = build_token_trie(*c.vocabulary);
}

}  // namespace detail

// Wall-clock seconds per compilation stage, plus automaton shape counts.
struct CompileStats {
  double parse_seconds = 0;      // text -> syntax tree / grammar
  double automaton_seconds = 0;  // char-level automaton construction
  double compose_seconds = 0;    // vocabulary-side tables (trie, label masks)
  double finalize_seconds = 0;   // self-loops, caches, dead states, warnings
  std::size_t states = 0;
  std::size_t edges = 0;
  std::size_t stack_symbols = 0;
};

namespace detail {

struct StageClock {
  std::chrono::steady_clock::time_point t = std::chrono::steady_clock::now();
  double lap() {
    const auto now = std::chrono::steady_clock::now();
    const double s = std::chrono::duration<double>(now - t).count();
    t = now;
    return s;
  }
};

}  // namespace detail

inline CompiledConstraint compile_regex_constraint(const std::string& pattern,
                                                   std::shared_ptr<const Vocabulary> vocab,
                                                   std::size_t state_cap = kDefaultDeterminizeStateCap,
                                                   CompileStats* stats = nullptr) {
  detail::StageClock clock;
  CompiledConstraint c;
  c.kind = ConstraintKind::Regex;

  const RegexAst ast = parse_regex(pattern);
  std::vector<Symbol> label_order;
  detail::collect_label_order(*ast, label_order);
  if (stats) stats->parse_seconds = clock.lap();

  c.char_dfa = compile_regex(*ast, state_cap);
  if (stats) stats->automaton_seconds = clock.lap();

  detail::shared_compile_fields(c, std::move(vocab));
  if (stats) stats->compose_seconds = clock.lap();

  c.self_loops = detail::fsa_self_loops(c.char_dfa);
  c.cache = std::make_unique<detail::MaskCache>(c.char_dfa.state_count);

  // Masks for the labels that survived into the automaton, in declaration
  // order so precedence follows the pattern text.
  std::vector<bool> present(label_order.size(), false);
  for (const FsaEdge& e : c.char_dfa.edges) {
    if (e.is_epsilon() || !detail::is_terminal_label_symbol(e.lo)) continue;
    for (std::size_t i = 0; i < label_order.size(); ++i)
      if (label_order[i] == e.lo) present[i] = true;
  }
  for (std::size_t i = 0; i < label_order.size(); ++i) {
    if (present[i])
      c.terminal_masks.push_back(
          {label_order[i], terminal_mask(label_order[i], *c.vocabulary)});
  }

  // A state offering both a wildcard edge and ordinary matches is resolved
  // by precedence; say so once at compile time instead of guessing intent.
  for (StateId q = 0; q < c.char_dfa.state_count; ++q) {
    bool has_label = false;
    for (const FsaEdge& e : c.char_dfa.out(q))
      has_label = has_label || (!e.is_epsilon() && detail::is_terminal_label_symbol(e.lo));
    if (!has_label) continue;
    const TokenMask normal = detail::regex_token_walk(c, q);
    for (const FsaEdge& e : c.char_dfa.out(q)) {
      if (e.is_epsilon() || !detail::is_terminal_label_symbol(e.lo)) continue;
      const TokenMask* lm = c.terminal_mask_for(e.lo);
      const std::uint32_t overlap = lm ? detail::mask_overlap(normal, *lm) : 0;
      if (overlap > 0)
        c.warnings.push_back("state " + std::to_string(q) + ": " + terminal_label_name(e.lo) +
                             " overlaps " + std::to_string(overlap) +
                             " normally-matched token(s); normal edges take precedence");
    }
  }
  if (stats) {
    stats->finalize_seconds = clock.lap();
    stats->states = c.char_dfa.state_count;
    stats->edges = c.char_dfa.edges.size();
  }
  return c;
}

inline CompiledConstraint compile_regex_constraint(const std::string& pattern,
                                                   const Vocabulary& vocab,
                                                   std::size_t state_cap = kDefaultDeterminizeStateCap,
                                                   CompileStats* stats = nullptr) {
  return compile_regex_constraint(pattern, std::make_shared<const Vocabulary>(vocab), state_cap,
                                  stats);
}

inline CompiledConstraint compile_grammar_constraint(const std::string& grammar_text,
                                                     std::shared_ptr<const Vocabulary> vocab,
                                                     std::size_t state_cap = kDefaultDeterminizeStateCap,
                                                     CompileStats* stats = nullptr) {
  detail::StageClock clock;
  CompiledConstraint c;
  c.kind = ConstraintKind::Grammar;

  const Grammar grammar = parse_grammar(grammar_text);
  if (stats) stats->parse_seconds = clock.lap();

  c.pda = build_grammar_pda(grammar, state_cap);
  const DeterminismReport report = check_determinism(c.pda);
  if (!report.ok())
    throw DeterminismError("grammar is not deterministic:\n" + report.to_string());
  if (stats) stats->automaton_seconds = clock.lap();

  detail::shared_compile_fields(c, std::move(vocab));
  if (stats) stats->compose_seconds = clock.lap();

  c.self_loops = detail::pda_self_loops(c.pda);
  c.cache = std::make_unique<detail::MaskCache>(c.pda.state_count);

  // Masks skip states that can never contribute to an accepted sequence so
  // the decoder is never stranded.
  c.dead = detail::compute_dead_states(c.pda);
  if (stats) {
    stats->finalize_seconds = clock.lap();
    stats->states = c.pda.state_count;
    stats->edges = c.pda.edges.size();
    stats->stack_symbols = c.pda.stack_symbol_count;
  }
  return c;
}

inline CompiledConstraint compile_grammar_constraint(const std::string& grammar_text,
                                                     const Vocabulary& vocab,
                                                     std::size_t state_cap = kDefaultDeterminizeStateCap,
                                                     CompileStats* stats = nullptr) {
  return compile_grammar_constraint(grammar_text, std::make_shared<const Vocabulary>(vocab),
                                    state_cap, stats);
}

}  // namespace tokamata
