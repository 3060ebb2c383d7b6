#pragma once

#include <cstdint>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "tokamata/constraint.hpp"
#include "tokamata/errors.hpp"
#include "tokamata/fsa.hpp"
#include "tokamata/fst.hpp"
#include "tokamata/pda.hpp"
#include "tokamata/token_mask.hpp"

namespace tokamata {

// Binary containers, little-endian, fixed-width fields. "TKAT" wraps a bare
// automaton; "TKCC" wraps a compiled constraint and binds the vocabulary by
// fingerprint (the vocabulary itself is not embedded — the loader gets it
// separately and derived tables are rebuilt).
inline constexpr std::uint32_t kContainerVersion = 1;

namespace detail {

inline void put_u8(std::ostream& os, std::uint8_t v) {
  os.put(static_cast<char>(v));
}
inline void put_u32(std::ostream& os, std::uint32_t v) {
  char b[4] = {static_cast<char>(v), static_cast<char>(v >> 8), static_cast<char>(v >> 16),
               static_cast<char>(v >> 24)};
  os.write(b, 4);
}
inline void put_u64(std::ostream& os, std::uint64_t v) {
  put_u32(os, static_cast<std::uint32_t>(v));
  put_u32(os, static_cast<std::uint32_t>(v >> 32));
}
inline void put_string(std::ostream& os, const std::string& s) {
  put_u32(os, static_cast<std::uint32_t>(s.size()));
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::uint8_t get_u8(std::istream& is) {
  const int c = is.get();
  if (c == EOF) throw ParseError("truncated container");
  return static_cast<std::uint8_t>(c);
}
inline std::uint32_t get_u32(std::istream& is) {
  char b[4];
  if (!is.read(b, 4)) throw ParseError("truncated container");
  return static_cast<std::uint32_t>(static_cast<std::uint8_t>(b[0])) |
         static_cast<std::uint32_t>(static_cast<std::uint8_t>(b[1])) << 8 |
         static_cast<std::uint32_t>(static_cast<std::uint8_t>(b[2])) << 16 |
         static_cast<std::uint32_t>(static_cast<std::uint8_t>(b[3])) << 24;
}
inline std::uint64_t get_u64(std::istream& is) {
  const std::uint64_t lo = get_u32(is);
  return lo | static_cast<std::uint64_t>(get_u32(is)) << 32;
}
inline std::string get_string(std::istream& is) {
  const std::uint32_t n = get_u32(is);
  if (n > (1u << 30)) throw ParseError("corrupt container: unreasonable string length");
  std::string s(n, '\0');
  if (n && !is.read(s.data(), n)) throw ParseError("truncated container");
  return s;
}

inline void put_finals(std::ostream& os, const std::vector<bool>& finals) {
  put_u32(os, static_cast<std::uint32_t>(finals.size()));
  std::uint32_t count = 0;
  for (bool f : finals) count += f;
  put_u32(os, count);
  for (std::uint32_t q = 0; q < finals.size(); ++q) {
    if (finals[q]) put_u32(os, q);
  }
}

inline std::vector<bool> get_finals(std::istream& is, std::uint32_t expected_states) {
  const std::uint32_t n = get_u32(is);
  if (n != expected_states) throw ParseError("corrupt container: final-state table size");
  std::vector<bool> finals(n, false);
  for (std::uint32_t i = 0, count = get_u32(is); i < count; ++i) {
    const std::uint32_t q = get_u32(is);
    if (q >= n) throw ParseError("corrupt container: final state out of range");
    finals[q] = true;
  }
  return finals;
}

// Edges arrive in their stored (sorted-by-source) order; rebuild the CSR
// index and insist the order really is sorted so out() stays valid.
template <typename Edge>
std::vector<std::uint32_t> rebuild_first_edge(const std::vector<Edge>& edges,
                                              std::uint32_t state_count) {
  std::vector<std::uint32_t> first(state_count + 1, 0);
  StateId prev = 0;
  for (std::size_t i = 0; i < edges.size(); ++i) {
    if (edges[i].src >= state_count || edges[i].dst >= state_count)
      throw ParseError("corrupt container: edge endpoint out of range");
    if (edges[i].src < prev) throw ParseError("corrupt container: edges not sorted by source");
    prev = edges[i].src;
    ++first[edges[i].src + 1];
  }
  for (std::uint32_t q = 0; q < state_count; ++q) first[q + 1] += first[q];
  return first;
}

inline void expect_magic(std::istream& is, const char* magic) {
  char buf[4];
  if (!is.read(buf, 4) || std::string(buf, 4) != magic)
    throw ParseError(std::string("not a ") + magic + " container");
  const std::uint32_t version = get_u32(is);
  if (version != kContainerVersion)
    throw ParseError("unsupported container version " + std::to_string(version));
}

}  // namespace detail

inline void save_fsa(std::ostream& os, const Fsa& fsa) {
  os.write("TKAT", 4);
  detail::put_u32(os, kContainerVersion);
  detail::put_u8(os, 0);  // automaton kind: FSA
  detail::put_u8(os, static_cast<std::uint8_t>(fsa.alphabet));
  detail::put_u32(os, fsa.state_count);
  detail::put_u32(os, fsa.initial);
  detail::put_finals(os, fsa.final_state);
  detail::put_u32(os, static_cast<std::uint32_t>(fsa.edges.size()));
  for (const FsaEdge& e : fsa.edges) {
    detail::put_u32(os, e.src);
    detail::put_u32(os, e.lo);
    detail::put_u32(os, e.hi);
    detail::put_u32(os, e.dst);
  }
}

inline Fsa load_fsa(std::istream& is) {
  detail::expect_magic(is, "TKAT");
  if (detail::get_u8(is) != 0) throw ParseError("container does not hold an FSA");
  Fsa fsa;
  fsa.alphabet = static_cast<AlphabetKind>(detail::get_u8(is));
  fsa.state_count = detail::get_u32(is);
  fsa.initial = detail::get_u32(is);
  if (fsa.state_count == 0 || fsa.initial >= fsa.state_count)
    throw ParseError("corrupt container: initial state out of range");
  fsa.final_state = detail::get_finals(is, fsa.state_count);
  fsa.edges.resize(detail::get_u32(is));
  for (FsaEdge& e : fsa.edges) {
    e.src = detail::get_u32(is);
    e.lo = detail::get_u32(is);
    e.hi = detail::get_u32(is);
    e.dst = detail::get_u32(is);
  }
  fsa.first_edge = detail::rebuild_first_edge(fsa.edges, fsa.state_count);
  return fsa;
}

inline void save_fst(std::ostream& os, const Fst& fst) {
  os.write("TKAT", 4);
  detail::put_u32(os, kContainerVersion);
  detail::put_u8(os, 1);  // automaton kind: FST
  detail::put_u8(os, static_cast<std::uint8_t>(fst.input_alphabet));
  detail::put_u8(os, static_cast<std::uint8_t>(fst.output_alphabet));
  detail::put_u32(os, fst.state_count);
  detail::put_u32(os, fst.initial);
  detail::put_finals(os, fst.final_state);
  detail::put_u32(os, static_cast<std::uint32_t>(fst.edges.size()));
  for (const FstEdge& e : fst.edges) {
    detail::put_u32(os, e.src);
    detail::put_u32(os, e.in);
    detail::put_u32(os, e.out);
    detail::put_u32(os, e.dst);
  }
}

inline Fst load_fst(std::istream& is) {
  detail::expect_magic(is, "TKAT");
  if (detail::get_u8(is) != 1) throw ParseError("container does not hold an FST");
  Fst fst;
  fst.input_alphabet = static_cast<AlphabetKind>(detail::get_u8(is));
  fst.output_alphabet = static_cast<AlphabetKind>(detail::get_u8(is));
  fst.state_count = detail::get_u32(is);
  fst.initial = detail::get_u32(is);
  if (fst.state_count == 0 || fst.initial >= fst.state_count)
    throw ParseError("corrupt container: initial state out of range");
  fst.final_state = detail::get_finals(is, fst.state_count);
  fst.edges.resize(detail::get_u32(is));
  for (FstEdge& e : fst.edges) {
    e.src = detail::get_u32(is);
    e.in = detail::get_u32(is);
    e.out = detail::get_u32(is);
    e.dst = detail::get_u32(is);
  }
  fst.first_edge = detail::rebuild_first_edge(fst.edges, fst.state_count);
  return fst;
}

inline void save_pda(std::ostream& os, const Pda& pda) {
  os.write("TKAT", 4);
  detail::put_u32(os, kContainerVersion);
  detail::put_u8(os, 2);  // automaton kind: PDA
  detail::put_u8(os, static_cast<std::uint8_t>(pda.alphabet));
  detail::put_u32(os, pda.state_count);
  detail::put_u32(os, pda.initial);
  detail::put_finals(os, pda.final_state);
  detail::put_u32(os, pda.stack_symbol_count);
  detail::put_u32(os, pda.initial_stack_symbol);
  for (std::uint32_t i = 0; i < pda.stack_symbol_count; ++i)
    detail::put_string(os, pda.stack_symbol_name[i]);
  detail::put_u32(os, static_cast<std::uint32_t>(pda.op_pool.size()));
  for (const Symbol s : pda.op_pool) detail::put_u32(os, s);
  detail::put_u32(os, static_cast<std::uint32_t>(pda.edges.size()));
  for (const PdaEdge& e : pda.edges) {
    detail::put_u32(os, e.src);
    detail::put_u32(os, e.lo);
    detail::put_u32(os, e.hi);
    detail::put_u32(os, e.dst);
    detail::put_u32(os, e.pops_begin);
    detail::put_u32(os, e.pops_end);
    detail::put_u32(os, e.pushes_begin);
    detail::put_u32(os, e.pushes_end);
  }
  detail::put_u32(os, static_cast<std::uint32_t>(pda.completed_rules_by_state.size()));
  for (const auto& rules : pda.completed_rules_by_state) {
    detail::put_u32(os, static_cast<std::uint32_t>(rules.size()));
    for (const std::uint32_t r : rules) detail::put_u32(os, r);
  }
  detail::put_u32(os, static_cast<std::uint32_t>(pda.rule_text.size()));
  for (const std::string& t : pda.rule_text) detail::put_string(os, t);
  detail::put_string(os, pda.left_recursion_detail);
}

inline Pda load_pda(std::istream& is) {
  detail::expect_magic(is, "TKAT");
  if (detail::get_u8(is) != 2) throw ParseError("container does not hold a PDA");
  Pda pda;
  pda.alphabet = static_cast<AlphabetKind>(detail::get_u8(is));
  pda.state_count = detail::get_u32(is);
  pda.initial = detail::get_u32(is);
  if (pda.state_count == 0 || pda.initial >= pda.state_count)
    throw ParseError("corrupt container: initial state out of range");
  pda.final_state = detail::get_finals(is, pda.state_count);
  pda.stack_symbol_count = detail::get_u32(is);
  pda.initial_stack_symbol = detail::get_u32(is);
  if (pda.stack_symbol_count == 0 || pda.initial_stack_symbol >= pda.stack_symbol_count)
    throw ParseError("corrupt container: stack symbols");
  pda.stack_symbol_name.resize(pda.stack_symbol_count);
  for (std::uint32_t i = 0; i < pda.stack_symbol_count; ++i)
    pda.stack_symbol_name[i] = detail::get_string(is);
  pda.op_pool.resize(detail::get_u32(is));
  for (Symbol& s : pda.op_pool) {
    s = detail::get_u32(is);
    if (s >= pda.stack_symbol_count) throw ParseError("corrupt container: stack op out of range");
  }
  pda.edges.resize(detail::get_u32(is));
  const auto pool_size = static_cast<std::uint32_t>(pda.op_pool.size());
  for (PdaEdge& e : pda.edges) {
    e.src = detail::get_u32(is);
    e.lo = detail::get_u32(is);
    e.hi = detail::get_u32(is);
    e.dst = detail::get_u32(is);
    e.pops_begin = detail::get_u32(is);
    e.pops_end = detail::get_u32(is);
    e.pushes_begin = detail::get_u32(is);
    e.pushes_end = detail::get_u32(is);
    if (e.pops_begin > e.pops_end || e.pops_end > pool_size || e.pushes_begin > e.pushes_end ||
        e.pushes_end > pool_size)
      throw ParseError("corrupt container: edge op slice out of range");
  }
  pda.first_edge = detail::rebuild_first_edge(pda.edges, pda.state_count);
  pda.completed_rules_by_state.resize(detail::get_u32(is));
  for (auto& rules : pda.completed_rules_by_state) {
    rules.resize(detail::get_u32(is));
    for (std::uint32_t& r : rules) r = detail::get_u32(is);
  }
  pda.rule_text.resize(detail::get_u32(is));
  for (std::string& t : pda.rule_text) t = detail::get_string(is);
  pda.left_recursion_detail = detail::get_string(is);
  return pda;
}

namespace detail {

inline void put_mask(std::ostream& os, const TokenMask& m) {
  put_u32(os, m.size);
  put_u8(os, m.finish ? 1 : 0);
  for (const std::uint64_t w : m.bits) put_u64(os, w);
}

inline TokenMask get_mask(std::istream& is) {
  const std::uint32_t size = get_u32(is);
  if (size > (1u << 28)) throw ParseError("corrupt container: unreasonable mask size");
  TokenMask m(size);
  m.finish = get_u8(is) != 0;
  for (std::uint64_t& w : m.bits) w = get_u64(is);
  return m;
}

}  // namespace detail

inline void save_constraint(std::ostream& os, const CompiledConstraint& c) {
  os.write("TKCC", 4);
  detail::put_u32(os, kContainerVersion);
  detail::put_u8(os, static_cast<std::uint8_t>(c.kind));
  detail::put_u64(os, c.vocab_fingerprint);
  detail::put_u32(os, c.vocab_size);
  if (c.kind == ConstraintKind::Regex)
    save_fsa(os, c.char_dfa);
  else
    save_pda(os, c.pda);
  detail::put_u32(os, static_cast<std::uint32_t>(c.terminal_masks.size()));
  for (const auto& [label, mask] : c.terminal_masks) {
    detail::put_u32(os, label);
    detail::put_mask(os, mask);
  }
  detail::put_u32(os, static_cast<std::uint32_t>(c.warnings.size()));
  for (const std::string& w : c.warnings) detail::put_string(os, w);
}

// Loading re-derives everything that depends on the vocabulary (trie,
// self-loop tables, dead states, caches), so the result behaves exactly
// like a freshly compiled constraint.
inline CompiledConstraint load_constraint(std::istream& is,
                                          std::shared_ptr<const Vocabulary> vocab) {
  detail::expect_magic(is, "TKCC");
  CompiledConstraint c;
  c.kind = static_cast<ConstraintKind>(detail::get_u8(is));
  c.vocab_fingerprint = detail::get_u64(is);
  c.vocab_size = detail::get_u32(is);
  if (!vocab) throw PreconditionError("load_constraint: vocabulary required");
  if (vocab->fingerprint != c.vocab_fingerprint || vocab->size() != c.vocab_size)
    throw VocabularyMismatch(
        "constraint was compiled for a different vocabulary (fingerprint " +
        std::to_string(c.vocab_fingerprint) + ", size " + std::to_string(c.vocab_size) + ")");
  c.vocabulary = std::move(vocab);
  if (c.kind == ConstraintKind::Regex) {
    c.char_dfa = load_fsa(is);
    c.self_loops = detail::fsa_self_loops(c.char_dfa);
    c.cache = std::make_unique<detail::MaskCache>(c.char_dfa.state_count);
  } else {
    c.pda = load_pda(is);
    c.self_loops = detail::pda_self_loops(c.pda);
    c.cache = std::make_unique<detail::MaskCache>(c.pda.state_count);
    c.dead = detail::compute_dead_states(c.pda);
  }
  c.trie = build_token_trie(*c.vocabulary);
  const std::uint32_t n_masks = detail::get_u32(is);
  for (std::uint32_t i = 0; i < n_masks; ++i) {
    const Symbol label = detail::get_u32(is);
    c.terminal_masks.push_back({label, detail::get_mask(is)});
  }
  c.warnings.resize(detail::get_u32(is));
  for (std::string& w : c.warnings) w = detail::get_string(is);
  return c;
}

}  // namespace tokamata
