#pragma once

#include <string>

#include "tokamata/fsa.hpp"
#include "tokamata/fst.hpp"
#include "tokamata/pda.hpp"
#include "tokamata/symbols.hpp"

namespace tokamata {

namespace detail {

inline std::string finals_list(const std::vector<bool>& finals) {
  std::string out = "{";
  bool first = true;
  for (std::uint32_t q = 0; q < finals.size(); ++q) {
    if (!finals[q]) continue;
    if (!first) out += ",";
    out += std::to_string(q);
    first = false;
  }
  return out + "}";
}

}  // namespace detail

// One edge per line: "src -> dst : label". Ranges render as [lo-hi], single
// symbols bare, epsilon as "ε".
inline std::string dump_fsa(const Fsa& fsa) {
  std::string out = "fsa states=" + std::to_string(fsa.state_count) +
                    " initial=" + std::to_string(fsa.initial) +
                    " finals=" + detail::finals_list(fsa.final_state) + "\n";
  for (const FsaEdge& e : fsa.edges) {
    out += "  " + std::to_string(e.src) + " -> " + std::to_string(e.dst) + " : " +
           (e.is_epsilon() ? std::string("ε") : range_display(e.lo, e.hi, fsa.alphabet)) + "\n";
  }
  return out;
}

// Edge labels read "in:out".
inline std::string dump_fst(const Fst& fst) {
  std::string out = "fst states=" + std::to_string(fst.state_count) +
                    " initial=" + std::to_string(fst.initial) +
                    " finals=" + detail::finals_list(fst.final_state) + "\n";
  for (const FstEdge& e : fst.edges) {
    const std::string in =
        e.in == kEpsilon ? std::string("ε") : symbol_display(e.in, fst.input_alphabet);
    const std::string outp =
        e.out == kEpsilon ? std::string("ε") : symbol_display(e.out, fst.output_alphabet);
    out += "  " + std::to_string(e.src) + " -> " + std::to_string(e.dst) + " : " + in + ":" +
           outp + "\n";
  }
  return out;
}

// Edge labels carry the input first, then pops marked ")" and pushes marked
// "(", each naming its stack symbol. Pops are listed top of stack first.
inline std::string dump_pda(const Pda& pda) {
  std::string out = "pda states=" + std::to_string(pda.state_count) +
                    " initial=" + std::to_string(pda.initial) +
                    " finals=" + detail::finals_list(pda.final_state) + "\n";
  out += "  stack symbols:";
  for (std::uint32_t i = 0; i < pda.stack_symbol_count; ++i) {
    out += i == pda.initial_stack_symbol ? " *" : " ";
    out += "\"" + pda.stack_symbol_name[i] + "\"";
  }
  out += "\n";
  for (const PdaEdge& e : pda.edges) {
    out += "  " + std::to_string(e.src) + " -> " + std::to_string(e.dst) + " : " +
           (e.is_epsilon() ? std::string("ε") : range_display(e.lo, e.hi, pda.alphabet));
    for (const Symbol s : pda.pops(e)) out += " )" + pda.stack_symbol_name[s];
    for (const Symbol s : pda.pushes(e)) out += " (" + pda.stack_symbol_name[s];
    out += "\n";
  }
  return out;
}

}  // namespace tokamata
