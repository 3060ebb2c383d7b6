#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "tokamata/errors.hpp"
#include "tokamata/fst.hpp"
#include "tokamata/symbols.hpp"
#include "tokamata/vocabulary.hpp"

namespace tokamata {

// Builds the detokenizing transducer: token ids in, characters out, with
// L(T) = { (x, D(x)) } for every token sequence x and its concatenation D(x).
//
// One chain per token. A token with symbols v1..vn contributes fresh states
// q1..q_{n-1} and edges
//   root --eps:v1--> q1 --eps:v2--> ... --eps:v_{n-1}--> q_{n-1},
// closed by the edge (q_{n-1}, id, vn, root) that consumes the token id on
// the final character. The root is both initial and final, so acceptance
// lands exactly on token boundaries. Reserved ids (eos/bos) are left out.
inline Fst build_detokenizing_fst(const Vocabulary& v) {
  FstBuilder b(AlphabetKind::Tokens, AlphabetKind::Chars);
  const StateId root = b.add_state();
  b.set_initial(root);
  b.set_final(root);
  for (TokenId id = 0; id < v.size(); ++id) {
    if (v.is_reserved(id)) continue;
    const std::vector<Symbol>& sym = v.symbols[id];
    StateId cur = root;
    for (std::size_t j = 0; j + 1 < sym.size(); ++j) {
      const StateId nxt = b.add_state();
      b.add_edge(cur, kEpsilon, sym[j], nxt);
      cur = nxt;
    }
    b.add_edge(cur, id, sym.back(), root);
  }
  return b.build();
}

namespace detail {

// Reads the per-token chains back out of an uncompacted detokenizing
// transducer. Throws PreconditionError if the shape does not match
// build_detokenizing_fst output.
inline std::vector<std::pair<TokenId, std::vector<Symbol>>> chains_of(const Fst& fst) {
  const StateId root = fst.initial;
  if (!fst.is_final(root)) throw PreconditionError("compact_trie: initial state is not final");
  for (StateId q = 0; q < fst.state_count; ++q) {
    if (q != root && fst.is_final(q))
      throw PreconditionError("compact_trie: unexpected extra final state");
  }
  std::vector<std::pair<TokenId, std::vector<Symbol>>> chains;
  std::vector<bool> visited(fst.state_count, false);
  visited[root] = true;
  std::vector<bool> seen_token;
  const auto claim_token = [&](Symbol in) {
    if (in >= kTerminalBase) throw PreconditionError("compact_trie: non-token input symbol");
    if (in >= seen_token.size()) seen_token.resize(in + 1, false);
    if (seen_token[in]) throw PreconditionError("compact_trie: token id appears twice");
    seen_token[in] = true;
  };
  for (const FstEdge& start : fst.out(root)) {
    if (start.out == kEpsilon) throw PreconditionError("compact_trie: edge without output symbol");
    if (start.in != kEpsilon) {
      // Single-symbol token closing directly at the root.
      if (start.dst != root) throw PreconditionError("compact_trie: closing edge must return to the root");
      claim_token(start.in);
      chains.push_back({start.in, {start.out}});
      continue;
    }
    std::vector<Symbol> prefix{start.out};
    StateId s = start.dst;
    for (;;) {
      if (s == root || visited[s])
        throw PreconditionError("compact_trie: chains must be disjoint");
      visited[s] = true;
      const std::span<const FstEdge> out = fst.out(s);
      if (out.size() != 1) throw PreconditionError("compact_trie: chain state with fan-out");
      const FstEdge& e = out[0];
      if (e.out == kEpsilon) throw PreconditionError("compact_trie: edge without output symbol");
      if (e.in == kEpsilon) {
        prefix.push_back(e.out);
        s = e.dst;
        continue;
      }
      if (e.dst != root) throw PreconditionError("compact_trie: closing edge must return to the root");
      claim_token(e.in);
      prefix.push_back(e.out);
      chains.push_back({e.in, std::move(prefix)});
      break;
    }
  }
  for (StateId q = 0; q < fst.state_count; ++q) {
    if (!visited[q]) throw PreconditionError("compact_trie: unreachable state");
  }
  return chains;
}

}  // namespace detail

// Merges shared prefixes of the per-token chains into a trie rooted at the
// initial state. Only the epsilon-input prefix edges are merged; every token
// keeps its own closing edge, so the number of closing edges stays equal to
// the number of (non-reserved) tokens and the transduction is unchanged.
// Duplicate token strings share their whole prefix path and close on
// parallel edges.
inline Fst compact_trie(const Fst& fst) {
  const auto chains = detail::chains_of(fst);
  FstBuilder b(fst.input_alphabet, fst.output_alphabet);
  const StateId root = b.add_state();
  b.set_initial(root);
  b.set_final(root);
  std::map<std::pair<StateId, Symbol>, StateId> child;
  for (const auto& [id, sym] : chains) {
    StateId cur = root;
    for (std::size_t j = 0; j + 1 < sym.size(); ++j) {
      const auto key = std::make_pair(cur, sym[j]);
      auto it = child.find(key);
      if (it == child.end()) {
        const StateId nxt = b.add_state();
        b.add_edge(cur, kEpsilon, sym[j], nxt);
        it = child.emplace(key, nxt).first;
      }
      cur = it->second;
    }
    b.add_edge(cur, id, sym.back(), root);
  }
  return b.build();
}

// Prefix-tree index over the vocabulary's decoded token strings, used to
// walk all tokens against a character DFA without touching each token
// string separately. Nodes are numbered in depth-first order, so the tokens
// closing anywhere inside a subtree form one contiguous slice of
// `tokens_in_order` — that is what lets a self-looping DFA state absorb a
// whole subtree in O(tokens) bit sets instead of a full walk.
struct TokenTrie {
  std::uint32_t node_count = 0;  // node 0 is the root (empty prefix)

  // Children, CSR by node, child symbols sorted within a node.
  std::vector<std::uint32_t> child_begin;  // node_count + 1
  std::vector<Symbol> child_syms;
  std::vector<std::uint32_t> child_nodes;

  // Closing entries, CSR by node: token with symbols v1..vn appears at the
  // node for v1..v_{n-1} under symbol vn. Duplicate strings sit side by side.
  std::vector<std::uint32_t> close_begin;  // node_count + 1
  std::vector<Symbol> close_syms;
  std::vector<TokenId> close_tokens;

  // Depth-first token order and per-node subtree slices into it.
  std::vector<TokenId> tokens_in_order;
  std::vector<std::uint32_t> range_begin;  // node_count
  std::vector<std::uint32_t> range_end;    // node_count

  // Per-node summary of every symbol in the subtree (child edges and closing
  // symbols): a 128-bit ASCII set plus a flag for anything beyond it.
  std::vector<std::array<std::uint64_t, 2>> subtree_ascii;
  std::vector<bool> subtree_nonascii;

  std::span<const Symbol> children_syms(std::uint32_t n) const {
    return {child_syms.data() + child_begin[n], child_syms.data() + child_begin[n + 1]};
  }
  std::uint32_t child_at(std::uint32_t n, std::uint32_t offset) const {
    return child_nodes[child_begin[n] + offset];
  }
};

inline TokenTrie build_token_trie(const Vocabulary& v) {
  // Mutable pointer-free trie first; ids are remapped to DFS order below.
  struct RawNode {
    std::map<Symbol, std::uint32_t> children;
    std::vector<std::pair<Symbol, TokenId>> closes;
  };
  std::vector<RawNode> raw(1);
  for (TokenId id = 0; id < v.size(); ++id) {
    if (v.is_reserved(id)) continue;
    const std::vector<Symbol>& sym = v.symbols[id];
    std::uint32_t cur = 0;
    for (std::size_t j = 0; j + 1 < sym.size(); ++j) {
      auto it = raw[cur].children.find(sym[j]);
      if (it == raw[cur].children.end()) {
        raw.push_back({});
        it = raw[cur].children.emplace(sym[j], static_cast<std::uint32_t>(raw.size() - 1)).first;
      }
      cur = it->second;
    }
    raw[cur].closes.push_back({sym.back(), id});
  }
  for (RawNode& n : raw) std::sort(n.closes.begin(), n.closes.end());

  TokenTrie t;
  t.node_count = static_cast<std::uint32_t>(raw.size());
  t.child_begin.assign(t.node_count + 1, 0);
  t.close_begin.assign(t.node_count + 1, 0);
  t.range_begin.assign(t.node_count, 0);
  t.range_end.assign(t.node_count, 0);
  t.subtree_ascii.assign(t.node_count, {0, 0});
  t.subtree_nonascii.assign(t.node_count, false);

  // Iterative DFS. Children of a node get consecutive ids only per subtree,
  // which is all the contiguity the token ranges need.
  struct Frame {
    std::uint32_t raw_id;
    std::uint32_t new_id;
    std::map<Symbol, std::uint32_t>::const_iterator next;
  };
  std::vector<std::uint32_t> raw_to_new(raw.size(), 0);
  std::vector<Frame> stack;
  std::uint32_t next_id = 0;

  const auto open_node = [&](std::uint32_t raw_id) {
    const std::uint32_t id = next_id++;
    raw_to_new[raw_id] = id;
    t.range_begin[id] = static_cast<std::uint32_t>(t.tokens_in_order.size());
    for (const auto& [sym, tok] : raw[raw_id].closes) {
      t.close_syms.push_back(sym);
      t.close_tokens.push_back(tok);
      t.tokens_in_order.push_back(tok);
      if (sym < 128)
        t.subtree_ascii[id][sym >> 6] |= std::uint64_t{1} << (sym & 63);
      else
        t.subtree_nonascii[id] = true;
    }
    t.close_begin[id + 1] = static_cast<std::uint32_t>(t.close_syms.size());
    stack.push_back({raw_id, id, raw[raw_id].children.begin()});
    return id;
  };

  open_node(0);
  while (!stack.empty()) {
    Frame& f = stack.back();
    if (f.next == raw[f.raw_id].children.end()) {
      t.range_end[f.new_id] = static_cast<std::uint32_t>(t.tokens_in_order.size());
      stack.pop_back();
      if (!stack.empty()) {
        const std::uint32_t parent = stack.back().new_id;
        t.subtree_ascii[parent][0] |= t.subtree_ascii[f.new_id][0];
        t.subtree_ascii[parent][1] |= t.subtree_ascii[f.new_id][1];
        if (t.subtree_nonascii[f.new_id]) t.subtree_nonascii[parent] = true;
      }
      continue;
    }
    const Symbol sym = f.next->first;
    const std::uint32_t raw_child = f.next->second;
    ++f.next;
    const std::uint32_t parent = f.new_id;
    if (sym < 128)
      t.subtree_ascii[parent][sym >> 6] |= std::uint64_t{1} << (sym & 63);
    else
      t.subtree_nonascii[parent] = true;
    open_node(raw_child);  // invalidates f
  }

  // CSR children in new-id space; map::begin order is symbol-sorted already.
  for (std::uint32_t raw_id = 0; raw_id < raw.size(); ++raw_id)
    t.child_begin[raw_to_new[raw_id] + 1] = static_cast<std::uint32_t>(raw[raw_id].children.size());
  for (std::uint32_t n = 0; n < t.node_count; ++n) t.child_begin[n + 1] += t.child_begin[n];
  t.child_syms.resize(t.child_begin[t.node_count]);
  t.child_nodes.resize(t.child_begin[t.node_count]);
  for (std::uint32_t raw_id = 0; raw_id < raw.size(); ++raw_id) {
    std::uint32_t at = t.child_begin[raw_to_new[raw_id]];
    for (const auto& [sym, raw_child] : raw[raw_id].children) {
      t.child_syms[at] = sym;
      t.child_nodes[at] = raw_to_new[raw_child];
      ++at;
    }
  }
  return t;
}

}  // namespace tokamata
