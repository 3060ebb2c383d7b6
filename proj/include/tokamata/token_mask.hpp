#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tokamata/errors.hpp"
#include "tokamata/symbols.hpp"

namespace tokamata {

// A set of allowed token ids plus a finish bit. The finish bit is set exactly
// when the current configuration is accepting, i.e. the sequence produced so
// far may legally end here.
struct TokenMask {
  std::uint32_t size = 0;  // number of token ids covered
  bool finish = false;
  std::vector<std::uint64_t> bits;  // ceil(size / 64) words, little-endian bit order

  TokenMask() = default;
  explicit TokenMask(std::uint32_t vocab_size)
      : size(vocab_size), bits((vocab_size + 63) / 64, 0) {}

  void set(TokenId id) { bits[id >> 6] |= 1ull << (id & 63); }
  void clear(TokenId id) { bits[id >> 6] &= ~(1ull << (id & 63)); }
  bool test(TokenId id) const { return (bits[id >> 6] >> (id & 63)) & 1u; }

  void or_with(const TokenMask& other) {
    if (other.size != size) throw PreconditionError("TokenMask::or_with: size mismatch");
    for (std::size_t i = 0; i < bits.size(); ++i) bits[i] |= other.bits[i];
  }

  std::uint32_t count() const {
    std::uint32_t n = 0;
    for (std::uint64_t w : bits) n += static_cast<std::uint32_t>(__builtin_popcountll(w));
    return n;
  }

  bool any() const {
    for (std::uint64_t w : bits)
      if (w) return true;
    return false;
  }

  std::vector<TokenId> ids() const {
    std::vector<TokenId> out;
    for (std::size_t w = 0; w < bits.size(); ++w) {
      std::uint64_t word = bits[w];
      while (word) {
        const int b = __builtin_ctzll(word);
        out.push_back(static_cast<TokenId>(w * 64 + static_cast<std::size_t>(b)));
        word &= word - 1;
      }
    }
    return out;
  }

  // Hex wire encoding: lowercase nibbles, token 0 in the least significant
  // bit of the first byte pair. Covers exactly ceil(size/4) digits.
  std::string to_hex() const {
    static const char* digits = "0123456789abcdef";
    const std::size_t nibbles = (size + 3) / 4;
    std::string out(nibbles, '0');
    for (std::size_t i = 0; i < nibbles; ++i) {
      const std::size_t word = i / 16, shift = (i % 16) * 4;
      const unsigned v = word < bits.size() ? static_cast<unsigned>((bits[word] >> shift) & 0xF) : 0;
      out[i] = digits[v];
    }
    return out;
  }

  static TokenMask from_hex(const std::string& hex, std::uint32_t vocab_size, bool finish_bit) {
    TokenMask m(vocab_size);
    m.finish = finish_bit;
    if (hex.size() != (vocab_size + 3) / 4)
      throw ParseError("token mask hex length does not match vocabulary size");
    for (std::size_t i = 0; i < hex.size(); ++i) {
      const char c = hex[i];
      unsigned v;
      if (c >= '0' && c <= '9') v = static_cast<unsigned>(c - '0');
      else if (c >= 'a' && c <= 'f') v = static_cast<unsigned>(c - 'a' + 10);
      else if (c >= 'A' && c <= 'F') v = static_cast<unsigned>(c - 'A' + 10);
      else throw ParseError("token mask hex contains a non-hex character", i);
      m.bits[i / 16] |= static_cast<std::uint64_t>(v) << ((i % 16) * 4);
    }
    return m;
  }

  bool operator==(const TokenMask& other) const {
    return size == other.size && finish == other.finish && bits == other.bits;
  }
};

}  // namespace tokamata
