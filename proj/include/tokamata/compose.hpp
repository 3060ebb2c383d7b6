#pragma once

#include <cstdint>
#include <deque>
#include <string>
#include <unordered_map>
#include <vector>

#include "tokamata/errors.hpp"
#include "tokamata/fsa.hpp"
#include "tokamata/fst.hpp"
#include "tokamata/pda.hpp"
#include "tokamata/symbols.hpp"
#include "tokamata/terminal_labels.hpp"
#include "tokamata/vocabulary.hpp"

namespace tokamata {

// Composes a transducer with an acceptor over the transducer's output
// alphabet. The result accepts an input sequence w iff the acceptor accepts
// the transducer's output for w. Reachable product construction; the result
// generally contains epsilon edges and should be determinized by the caller.
//
// Terminal-label edges of the acceptor consume one whole input token, so they
// only apply at token boundaries: product states whose transducer component
// is final.
inline Fsa compose_fst_fsa(const Fst& fst, const Fsa& fsa,
                           std::size_t state_cap = kDefaultDeterminizeStateCap) {
  if (fst.output_alphabet != fsa.alphabet)
    throw PreconditionError("compose_fst_fsa: acceptor alphabet must match transducer output");

  FsaBuilder b(fst.input_alphabet);
  std::unordered_map<std::uint64_t, StateId> ids;
  std::deque<std::pair<StateId, StateId>> work;

  const auto intern = [&](StateId f, StateId a) -> StateId {
    const std::uint64_t key = (static_cast<std::uint64_t>(f) << 32) | a;
    auto it = ids.find(key);
    if (it != ids.end()) return it->second;
    if (ids.size() >= state_cap)
      throw ResourceLimitError("compose_fst_fsa exceeded the state cap (cap=" +
                               std::to_string(state_cap) + ")");
    const StateId id = b.add_state();
    b.set_final(id, fst.is_final(f) && fsa.is_final(a));
    ids.emplace(key, id);
    work.emplace_back(f, a);
    return id;
  };

  b.set_initial(intern(fst.initial, fsa.initial));
  while (!work.empty()) {
    const auto [f, a] = work.front();
    work.pop_front();
    const StateId src = ids.at((static_cast<std::uint64_t>(f) << 32) | a);

    for (const FstEdge& te : fst.out(f)) {
      if (te.out == kEpsilon) {
        b.add_edge(src, te.in, te.in, intern(te.dst, a));
        continue;
      }
      for (const FsaEdge& ae : fsa.out(a)) {
        if (ae.is_epsilon() || is_terminal_label(ae.lo)) continue;
        if (ae.matches(te.out)) b.add_edge(src, te.in, te.in, intern(te.dst, ae.dst));
      }
    }
    for (const FsaEdge& ae : fsa.out(a)) {
      if (ae.is_epsilon()) {
        b.add_epsilon(src, intern(f, ae.dst));
      } else if (is_terminal_label(ae.lo) && fst.is_final(f)) {
        b.add_edge(src, ae.lo, ae.hi, intern(f, ae.dst));
      }
    }
  }
  return b.build();
}

// Replaces every terminal-label edge of a token-alphabet acceptor with
// concrete token-id edges: one range per maximal run of ids admitted by the
// label's per-token predicate over the given vocabulary. The result is a
// plain token automaton that standard acceptance can run directly.
inline Fsa expand_terminal_labels(const Fsa& fsa, const Vocabulary& vocab) {
  if (fsa.alphabet != AlphabetKind::Tokens)
    throw PreconditionError("expand_terminal_labels: acceptor must be over tokens");

  FsaBuilder b(fsa.alphabet);
  b.add_states(fsa.state_count);
  b.set_initial(fsa.initial);
  for (StateId q = 0; q < fsa.state_count; ++q) b.set_final(q, fsa.is_final(q));

  for (const FsaEdge& e : fsa.edges) {
    if (e.is_epsilon() || !is_terminal_label(e.lo)) {
      b.add_edge(e.src, e.lo, e.hi, e.dst);
      continue;
    }
    TokenMask admitted(vocab.size());
    for (Symbol label = e.lo; label <= e.hi; ++label)
      admitted.or_with(terminal_mask(label, vocab));
    // Emit maximal runs of admitted ids as single range edges.
    std::uint32_t id = 0;
    while (id < vocab.size()) {
      if (!admitted.test(id)) {
        ++id;
        continue;
      }
      std::uint32_t end = id;
      while (end + 1 < vocab.size() && admitted.test(end + 1)) ++end;
      b.add_edge(e.src, id, end, e.dst);
      id = end + 1;
    }
  }
  return b.build();
}

// Composes a transducer with a pushdown acceptor over the transducer's output
// alphabet. The result accepts w iff the pushdown acceptor accepts the
// transduced output of w. Stack behaviour is inherited unchanged: scan edges
// pair with transducer output characters, epsilon stack edges (completions)
// lift to every product state that contains their source.
inline Pda compose_fst_pda(const Fst& fst, const Pda& pda,
                           std::size_t state_cap = kDefaultDeterminizeStateCap) {
  if (fst.output_alphabet != pda.alphabet)
    throw PreconditionError("compose_fst_pda: acceptor alphabet must match transducer output");

  PdaBuilder b(fst.input_alphabet);
  std::unordered_map<std::uint64_t, StateId> ids;
  std::deque<std::pair<StateId, StateId>> work;

  const auto intern = [&](StateId f, StateId q) -> StateId {
    const std::uint64_t key = (static_cast<std::uint64_t>(f) << 32) | q;
    auto it = ids.find(key);
    if (it != ids.end()) return it->second;
    if (ids.size() >= state_cap)
      throw ResourceLimitError("compose_fst_pda exceeded the state cap (cap=" +
                               std::to_string(state_cap) + ")");
    const StateId id = b.add_state();
    b.set_final(id, fst.is_final(f) && pda.is_final(q));
    ids.emplace(key, id);
    work.emplace_back(f, q);
    return id;
  };

  for (const std::string& name : pda.stack_symbol_name) b.add_stack_symbol(name);
  b.set_initial(intern(fst.initial, pda.initial));

  while (!work.empty()) {
    const auto [f, q] = work.front();
    work.pop_front();
    const StateId src = ids.at((static_cast<std::uint64_t>(f) << 32) | q);

    for (const FstEdge& te : fst.out(f)) {
      if (te.out == kEpsilon) {
        b.add_edge(src, te.in, te.in, intern(te.dst, q));
        continue;
      }
      for (const PdaEdge& pe : pda.out(q)) {
        if (pe.is_epsilon() || !pe.matches(te.out)) continue;
        b.add_edge(src, te.in, te.in, intern(te.dst, pe.dst), pda.pops(pe), pda.pushes(pe));
      }
    }
    for (const PdaEdge& pe : pda.out(q)) {
      if (!pe.is_epsilon()) continue;
      b.add_edge(src, kEpsilon, kEpsilon, intern(f, pe.dst), pda.pops(pe), pda.pushes(pe));
    }
  }
  return b.build();
}

}  // namespace tokamata
