#pragma once

#include <string>

#include "tokamata/errors.hpp"
#include "tokamata/symbols.hpp"
#include "tokamata/token_mask.hpp"
#include "tokamata/vocabulary.hpp"

namespace tokamata {

// A terminal label is a pseudo-token: an input symbol disjoint from real
// token ids whose edge admits every vocabulary token satisfying a per-token
// predicate. Masks depend only on the vocabulary, so they are computed once
// at compile time.
struct TerminalLabel {
  Symbol id;
  std::string name;

  bool operator==(const TerminalLabel& o) const { return id == o.id && name == o.name; }
};

inline constexpr Symbol kTextTokenLabel = kTerminalBase + 0;
inline constexpr Symbol kParagraphTokenLabel = kTerminalBase + 1;

inline TerminalLabel terminal_label_for_name(const std::string& name) {
  if (name == "TEXT_TOKEN") return {kTextTokenLabel, name};
  if (name == "PARAGRAPH_TOKEN") return {kParagraphTokenLabel, name};
  throw PreconditionError("'" + name + "' is not a terminal label");
}

inline bool is_terminal_label_name(const std::string& name) {
  return name == "TEXT_TOKEN" || name == "PARAGRAPH_TOKEN";
}

inline std::string terminal_label_name(Symbol id) {
  if (id == kTextTokenLabel) return "TEXT_TOKEN";
  if (id == kParagraphTokenLabel) return "PARAGRAPH_TOKEN";
  throw PreconditionError("unknown terminal label id");
}

// TEXT_TOKEN: any (non-reserved) token. PARAGRAPH_TOKEN: any token whose
// string is newline-free ('\n' and '\r' both count as newlines).
inline TokenMask terminal_mask(const TerminalLabel& label, const Vocabulary& vocab) {
  TokenMask mask(vocab.size());
  for (TokenId id = 0; id < vocab.size(); ++id) {
    if (vocab.is_reserved(id)) continue;
    if (label.id == kTextTokenLabel) {
      mask.set(id);
    } else if (label.id == kParagraphTokenLabel) {
      if (vocab.tokens[id].find('\n') == std::string::npos &&
          vocab.tokens[id].find('\r') == std::string::npos)
        mask.set(id);
    } else {
      throw PreconditionError("unknown terminal label id");
    }
  }
  return mask;
}

inline TokenMask terminal_mask(Symbol label_id, const Vocabulary& vocab) {
  return terminal_mask(TerminalLabel{label_id, terminal_label_name(label_id)}, vocab);
}

}  // namespace tokamata
