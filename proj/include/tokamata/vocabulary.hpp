#pragma once

#include <cstdint>
#include <fstream>
#include <istream>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "tokamata/errors.hpp"
#include "tokamata/symbols.hpp"

namespace tokamata {

// Characters mode decodes token strings as UTF-8 and rejects malformed
// bytes; Bytes mode treats each byte as its own symbol (0..255).
enum class VocabularyMode : std::uint8_t { Characters, Bytes };

// A token vocabulary: id -> string. Duplicate strings under distinct ids are
// allowed. Reserved ids (end-of-sequence, beginning-of-sequence) never take
// part in detokenization; the engine surfaces end-of-sequence through the
// finish bit instead.
struct Vocabulary {
  std::vector<std::string> tokens;
  std::vector<std::vector<Symbol>> symbols;  // decoded form of each token
  std::optional<TokenId> eos_id;
  std::optional<TokenId> bos_id;
  VocabularyMode mode = VocabularyMode::Characters;
  std::uint64_t fingerprint = 0;

  std::uint32_t size() const { return static_cast<std::uint32_t>(tokens.size()); }

  bool is_reserved(TokenId id) const {
    return (eos_id && *eos_id == id) || (bos_id && *bos_id == id);
  }

  static Vocabulary make(std::vector<std::string> token_strings,
                         VocabularyMode mode = VocabularyMode::Characters,
                         std::optional<TokenId> eos = std::nullopt,
                         std::optional<TokenId> bos = std::nullopt) {
    Vocabulary v;
    v.tokens = std::move(token_strings);
    v.mode = mode;
    v.eos_id = eos;
    v.bos_id = bos;
    if (eos && *eos >= v.tokens.size())
      throw PreconditionError("vocabulary: end-of-sequence id out of range");
    if (bos && *bos >= v.tokens.size())
      throw PreconditionError("vocabulary: beginning-of-sequence id out of range");
    v.symbols.reserve(v.tokens.size());
    for (TokenId id = 0; id < v.tokens.size(); ++id) {
      const std::string& t = v.tokens[id];
      if (t.empty() && !v.is_reserved(id))
        throw ParseError("vocabulary: token " + std::to_string(id) + " has an empty string");
      if (mode == VocabularyMode::Bytes) {
        std::vector<Symbol> s;
        s.reserve(t.size());
        for (char c : t) s.push_back(static_cast<unsigned char>(c));
        v.symbols.push_back(std::move(s));
      } else {
        try {
          v.symbols.push_back(utf8_decode(t));
        } catch (const ParseError& e) {
          throw ParseError("vocabulary: token " + std::to_string(id) + ": " + e.what());
        }
      }
    }
    std::uint64_t h = fnv1a64(&v.mode, 1);
    const std::uint32_t n = v.size();
    h = fnv1a64(&n, sizeof n, h);
    for (const std::string& t : v.tokens) {
      const std::uint32_t len = static_cast<std::uint32_t>(t.size());
      h = fnv1a64(&len, sizeof len, h);
      h = fnv1a64(t.data(), t.size(), h);
    }
    const std::uint32_t eos_tag = v.eos_id ? *v.eos_id + 1 : 0;
    const std::uint32_t bos_tag = v.bos_id ? *v.bos_id + 1 : 0;
    h = fnv1a64(&eos_tag, sizeof eos_tag, h);
    h = fnv1a64(&bos_tag, sizeof bos_tag, h);
    v.fingerprint = h;
    return v;
  }
};

namespace detail {

inline std::string unescape_c_string(const std::string& in, std::size_t line_no) {
  std::string out;
  out.reserve(in.size());
  for (std::size_t i = 0; i < in.size(); ++i) {
    if (in[i] != '\\') {
      out.push_back(in[i]);
      continue;
    }
    if (++i >= in.size()) throw ParseError("trailing backslash on line " + std::to_string(line_no));
    switch (in[i]) {
      case 'n': out.push_back('\n'); break;
      case 't': out.push_back('\t'); break;
      case 'r': out.push_back('\r'); break;
      case '0': out.push_back('\0'); break;
      case '\\': out.push_back('\\'); break;
      case 'x': {
        if (i + 2 >= in.size()) throw ParseError("truncated \\x escape on line " + std::to_string(line_no));
        auto hex = [&](char c) -> int {
          if (c >= '0' && c <= '9') return c - '0';
          if (c >= 'a' && c <= 'f') return c - 'a' + 10;
          if (c >= 'A' && c <= 'F') return c - 'A' + 10;
          throw ParseError("bad \\x escape on line " + std::to_string(line_no));
        };
        out.push_back(static_cast<char>(hex(in[i + 1]) * 16 + hex(in[i + 2])));
        i += 2;
        break;
      }
      default:
        throw ParseError(std::string("unknown escape \\") + in[i] + " on line " + std::to_string(line_no));
    }
  }
  return out;
}

inline std::string escape_c_string(const std::string& in) {
  std::string out;
  for (char c : in) {
    switch (c) {
      case '\n': out += "\\n"; break;
      case '\t': out += "\\t"; break;
      case '\r': out += "\\r"; break;
      case '\\': out += "\\\\"; break;
      case '\0': out += "\\0"; break;
      default: out.push_back(c);
    }
  }
  return out;
}

}  // namespace detail

// JSON array of token strings; index is the id.
inline Vocabulary load_vocabulary_json(std::istream& in,
                                       VocabularyMode mode = VocabularyMode::Characters,
                                       std::optional<TokenId> eos = std::nullopt,
                                       std::optional<TokenId> bos = std::nullopt) {
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("vocabulary JSON: ") + e.what());
  }
  if (!doc.is_array()) throw ParseError("vocabulary JSON: expected an array of strings");
  std::vector<std::string> tokens;
  tokens.reserve(doc.size());
  for (const auto& item : doc) {
    if (!item.is_string()) throw ParseError("vocabulary JSON: expected an array of strings");
    tokens.push_back(item.get<std::string>());
  }
  return Vocabulary::make(std::move(tokens), mode, eos, bos);
}

// Two-column TSV: id <tab> token string with C-style escapes. Ids must cover
// 0..n-1, in any order; blank lines and lines starting with '#' are skipped.
inline Vocabulary load_vocabulary_tsv(std::istream& in,
                                      VocabularyMode mode = VocabularyMode::Characters,
                                      std::optional<TokenId> eos = std::nullopt,
                                      std::optional<TokenId> bos = std::nullopt) {
  std::vector<std::optional<std::string>> slots;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    const std::size_t tab = line.find('\t');
    if (tab == std::string::npos)
      throw ParseError("vocabulary TSV: missing tab on line " + std::to_string(line_no));
    TokenId id;
    try {
      id = static_cast<TokenId>(std::stoul(line.substr(0, tab)));
    } catch (...) {
      throw ParseError("vocabulary TSV: bad id on line " + std::to_string(line_no));
    }
    if (id >= slots.size()) slots.resize(id + 1);
    if (slots[id])
      throw ParseError("vocabulary TSV: duplicate id " + std::to_string(id) + " on line " +
                       std::to_string(line_no));
    slots[id] = detail::unescape_c_string(line.substr(tab + 1), line_no);
  }
  std::vector<std::string> tokens;
  tokens.reserve(slots.size());
  for (std::size_t id = 0; id < slots.size(); ++id) {
    if (!slots[id]) throw ParseError("vocabulary TSV: id " + std::to_string(id) + " is missing");
    tokens.push_back(std::move(*slots[id]));
  }
  return Vocabulary::make(std::move(tokens), mode, eos, bos);
}

inline Vocabulary load_vocabulary_file(const std::string& path,
                                       VocabularyMode mode = VocabularyMode::Characters,
                                       std::optional<TokenId> eos = std::nullopt,
                                       std::optional<TokenId> bos = std::nullopt) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open vocabulary file: " + path);
  if (path.size() >= 4 && path.compare(path.size() - 4, 4, ".tsv") == 0)
    return load_vocabulary_tsv(in, mode, eos, bos);
  return load_vocabulary_json(in, mode, eos, bos);
}

// Concatenation of token strings: the reference detokenization.
inline std::string detokenize(const Vocabulary& v, std::span<const TokenId> ids) {
  std::string out;
  for (TokenId id : ids) {
    if (id >= v.size()) throw PreconditionError("detokenize: token id out of range");
    out += v.tokens[id];
  }
  return out;
}

inline std::string detokenize(const Vocabulary& v, const std::vector<TokenId>& ids) {
  return detokenize(v, std::span<const TokenId>(ids));
}

}  // namespace tokamata
