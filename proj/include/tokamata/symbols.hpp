#pragma once

#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <string>
#include <vector>

#include "tokamata/errors.hpp"

namespace tokamata {

// A symbol is a 32-bit value whose meaning depends on the automaton's
// alphabet: a Unicode scalar value (character automata), a token id
// (token automata), or a terminal label id. The numeric ranges are disjoint:
//
//   characters       0x00000000 .. 0x0010FFFF
//   token ids        0x00000000 .. < kTerminalBase   (by construction |V| is far smaller)
//   terminal labels  kTerminalBase .. < kCallBase
//   call symbols     kCallBase .. (grammar-internal, never observable outside pda building)
//   epsilon          kEpsilon
using Symbol = std::uint32_t;
using StateId = std::uint32_t;
using TokenId = std::uint32_t;

inline constexpr Symbol kEpsilon = 0xFFFFFFFFu;
inline constexpr Symbol kTerminalBase = 0x40000000u;
inline constexpr Symbol kCallBase = 0x60000000u;
inline constexpr Symbol kMaxChar = 0x0010FFFFu;

constexpr bool is_terminal_label(Symbol s) { return s >= kTerminalBase && s < kCallBase; }
constexpr bool is_call_symbol(Symbol s) { return s >= kCallBase && s != kEpsilon; }

enum class AlphabetKind : std::uint8_t { Chars, Tokens };

// ── UTF-8 ──────────────────────────────────────────────────────────────────

// Decodes one scalar value starting at bytes[i]; advances i past it.
// Rejects malformed input: overlong forms, surrogates, out-of-range values.
inline Symbol utf8_decode_one(const std::string& bytes, std::size_t& i) {
  const auto fail = [&](const char* why) -> Symbol {
    throw ParseError(std::string("invalid UTF-8: ") + why, i);
  };
  const unsigned char b0 = static_cast<unsigned char>(bytes[i]);
  if (b0 < 0x80) {
    ++i;
    return b0;
  }
  int len;
  Symbol cp;
  if ((b0 & 0xE0) == 0xC0) {
    len = 2;
    cp = b0 & 0x1Fu;
  } else if ((b0 & 0xF0) == 0xE0) {
    len = 3;
    cp = b0 & 0x0Fu;
  } else if ((b0 & 0xF8) == 0xF0) {
    len = 4;
    cp = b0 & 0x07u;
  } else {
    return fail("bad leading byte");
  }
  if (i + static_cast<std::size_t>(len) > bytes.size()) return fail("truncated sequence");
  for (int k = 1; k < len; ++k) {
    const unsigned char b = static_cast<unsigned char>(bytes[i + static_cast<std::size_t>(k)]);
    if ((b & 0xC0) != 0x80) return fail("bad continuation byte");
    cp = (cp << 6) | (b & 0x3Fu);
  }
  static constexpr Symbol kMinByLen[5] = {0, 0, 0x80, 0x800, 0x10000};
  if (cp < kMinByLen[len]) return fail("overlong encoding");
  if (cp > kMaxChar) return fail("scalar value out of range");
  if (cp >= 0xD800 && cp <= 0xDFFF) return fail("surrogate");
  i += static_cast<std::size_t>(len);
  return cp;
}

inline std::vector<Symbol> utf8_decode(const std::string& bytes) {
  std::vector<Symbol> out;
  out.reserve(bytes.size());
  std::size_t i = 0;
  while (i < bytes.size()) out.push_back(utf8_decode_one(bytes, i));
  return out;
}

inline void utf8_encode_one(Symbol cp, std::string& out) {
  if (cp <= 0x7F) {
    out.push_back(static_cast<char>(cp));
  } else if (cp <= 0x7FF) {
    out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else if (cp <= 0xFFFF) {
    out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else {
    out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  }
}

inline std::string utf8_encode(const std::vector<Symbol>& cps) {
  std::string out;
  out.reserve(cps.size());
  for (Symbol c : cps) utf8_encode_one(c, out);
  return out;
}

// ── display helpers ────────────────────────────────────────────────────────

// Renders a symbol for dumps and error messages. Character alphabets show
// printable ASCII as 'c', everything else as U+XXXX; token alphabets show #id.
inline std::string symbol_display(Symbol s, AlphabetKind kind) {
  if (s == kEpsilon) return "eps";
  if (is_terminal_label(s)) return "<label " + std::to_string(s - kTerminalBase) + ">";
  if (is_call_symbol(s)) return "<call " + std::to_string(s - kCallBase) + ">";
  if (kind == AlphabetKind::Tokens) return "#" + std::to_string(s);
  if (s >= 0x21 && s <= 0x7E) return std::string(1, static_cast<char>(s));
  if (s == ' ') return "' '";
  if (s == '\n') return "\\n";
  if (s == '\t') return "\\t";
  if (s == '\r') return "\\r";
  char buf[16];
  std::snprintf(buf, sizeof buf, "U+%04X", s);
  return buf;
}

inline std::string range_display(Symbol lo, Symbol hi, AlphabetKind kind) {
  if (lo == hi) return symbol_display(lo, kind);
  return symbol_display(lo, kind) + "-" + symbol_display(hi, kind);
}

// 64-bit FNV-1a, used for vocabulary fingerprints and small hash keys.
inline std::uint64_t fnv1a64(const void* data, std::size_t n, std::uint64_t h = 0xcbf29ce484222325ull) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ull;
  }
  return h;
}

}  // namespace tokamata
