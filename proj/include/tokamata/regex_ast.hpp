#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "tokamata/errors.hpp"
#include "tokamata/symbols.hpp"

namespace tokamata {

// Pattern dialect: literals, escapes (\n \t \r \\ \d \D \s \S and escaped
// metacharacters), character classes with ranges and negation, anonymous
// groups (both (...) and (?:...)), alternation, * + ? {m} {m,} {m,n}, '.'
// (any character except newline), and (?P<NAME>argument) extensions. No
// backreferences, no lookaround, no anchors — matches are whole-string.

enum class RegexKind : std::uint8_t {
  Empty,     // matches only the empty string
  Literal,   // one character
  AnyChar,   // '.', anything but '\n'
  CharClass, // [...] with optional negation
  Concat,
  Alt,
  Star,
  Plus,
  Optional,
  Repeat,    // {m}, {m,}, {m,n}
  Group,     // explicit parentheses, semantically transparent
  Extension, // (?P<NAME>argument)
};

inline constexpr std::uint32_t kUnboundedRepeat = 0xFFFFFFFF;

struct CharClassItem {
  Symbol lo;
  Symbol hi;  // lo == hi for single characters
  bool operator==(const CharClassItem&) const = default;
};

struct RegexNode {
  RegexKind kind = RegexKind::Empty;
  std::size_t position = 0;  // byte offset in the source pattern

  Symbol literal = 0;                     // Literal
  bool negated = false;                   // CharClass
  std::vector<CharClassItem> items;       // CharClass, as written
  std::vector<std::unique_ptr<RegexNode>> children;
  std::uint32_t min_count = 0;            // Repeat
  std::uint32_t max_count = 0;            // Repeat; kUnboundedRepeat if open
  std::string ext_name;                   // Extension
  std::string ext_arg;                    // Extension, raw argument text
};

using RegexAst = std::unique_ptr<RegexNode>;

inline const std::array<const char*, 8>& supported_extension_names() {
  static const std::array<const char*, 8> names = {
      "QUOTED_TEXT",   "UNQUOTED_TEXT",         "TEXT_TOKEN", "PARAGRAPH_TOKEN",
      "TEXT_UNTIL",    "SUBSTRING_OF",          "DELIMITED_LIST",
      "DELIMITED_SUBSEQUENCE_OF",
  };
  return names;
}

namespace detail {

class RegexParser {
 public:
  explicit RegexParser(const std::string& src) : src_(src) {}

  RegexAst parse() {
    RegexAst node = parse_alt();
    if (pos_ != src_.size()) fail("unexpected ')'");
    return node;
  }

 private:
  const std::string& src_;
  std::size_t pos_ = 0;

  [[noreturn]] void fail(const std::string& msg) const { throw ParseError(msg, pos_); }

  bool at_end() const { return pos_ >= src_.size(); }
  char peek_byte() const { return src_[pos_]; }
  bool looking_at(const char* s) const {
    return src_.compare(pos_, std::char_traits<char>::length(s), s) == 0;
  }

  Symbol next_char() {
    if (at_end()) fail("unexpected end of pattern");
    return utf8_decode_one(src_, pos_);
  }

  static std::unique_ptr<RegexNode> make(RegexKind kind, std::size_t position) {
    auto n = std::make_unique<RegexNode>();
    n->kind = kind;
    n->position = position;
    return n;
  }

  RegexAst parse_alt() {
    const std::size_t start = pos_;
    std::vector<RegexAst> branches;
    branches.push_back(parse_concat());
    while (!at_end() && peek_byte() == '|') {
      ++pos_;
      branches.push_back(parse_concat());
    }
    if (branches.size() == 1) return std::move(branches[0]);
    auto node = make(RegexKind::Alt, start);
    node->children = std::move(branches);
    return node;
  }

  RegexAst parse_concat() {
    const std::size_t start = pos_;
    std::vector<RegexAst> parts;
    while (!at_end() && peek_byte() != '|' && peek_byte() != ')') parts.push_back(parse_repeat());
    if (parts.empty()) return make(RegexKind::Empty, start);
    if (parts.size() == 1) return std::move(parts[0]);
    auto node = make(RegexKind::Concat, start);
    node->children = std::move(parts);
    return node;
  }

  RegexAst parse_repeat() {
    RegexAst atom = parse_atom();
    if (at_end()) return atom;
    const char c = peek_byte();
    if (c != '*' && c != '+' && c != '?' && c != '{') return atom;
    const std::size_t start = pos_;
    RegexAst node;
    if (c == '{') {
      node = make(RegexKind::Repeat, start);
      ++pos_;
      node->min_count = parse_int("repeat count");
      if (!at_end() && peek_byte() == ',') {
        ++pos_;
        if (!at_end() && peek_byte() == '}')
          node->max_count = kUnboundedRepeat;
        else
          node->max_count = parse_int("repeat bound");
      } else {
        node->max_count = node->min_count;
      }
      if (at_end() || peek_byte() != '}') fail("expected '}'");
      ++pos_;
      if (node->max_count != kUnboundedRepeat && node->min_count > node->max_count)
        fail("repeat bounds out of order");
    } else {
      node = make(c == '*' ? RegexKind::Star : c == '+' ? RegexKind::Plus : RegexKind::Optional, start);
      ++pos_;
    }
    node->children.push_back(std::move(atom));
    if (!at_end()) {
      const char d = peek_byte();
      if (d == '*' || d == '+' || d == '?' || d == '{') fail("quantifier applied to a quantifier");
    }
    return node;
  }

  std::uint32_t parse_int(const char* what) {
    if (at_end() || peek_byte() < '0' || peek_byte() > '9') fail(std::string("expected ") + what);
    std::uint64_t value = 0;
    while (!at_end() && peek_byte() >= '0' && peek_byte() <= '9') {
      value = value * 10 + static_cast<std::uint64_t>(peek_byte() - '0');
      if (value > 1000000) fail("repeat count too large");
      ++pos_;
    }
    return static_cast<std::uint32_t>(value);
  }

  RegexAst parse_atom() {
    if (at_end()) fail("expected an atom");
    const std::size_t start = pos_;
    const char c = peek_byte();
    switch (c) {
      case '*':
      case '+':
      case '?':
      case '{':
        fail("quantifier with nothing to repeat");
      case '.': {
        ++pos_;
        return make(RegexKind::AnyChar, start);
      }
      case '(': {
        return parse_group();
      }
      case '[': {
        return parse_class();
      }
      case '\\': {
        return parse_escape(/*in_class=*/false);
      }
      default: {
        auto node = make(RegexKind::Literal, start);
        node->literal = next_char();
        return node;
      }
    }
  }

  RegexAst parse_group() {
    const std::size_t start = pos_;
    ++pos_;  // '('
    if (looking_at("?P<")) {
      pos_ += 3;
      std::string name;
      while (!at_end() && peek_byte() != '>') {
        const char c = peek_byte();
        if ((c < 'A' || c > 'Z') && (c < '0' || c > '9') && c != '_') fail("bad extension name character");
        name.push_back(c);
        ++pos_;
      }
      if (at_end()) fail("unterminated extension group");
      ++pos_;  // '>'
      bool known = false;
      for (const char* n : supported_extension_names()) known = known || name == n;
      if (!known) {
        pos_ = start;
        if (name == "IMAGE") fail("the IMAGE extension is not supported");
        fail("unknown extension name '" + name + "'");
      }
      // Raw argument up to the matching close paren; backslash escapes the
      // next byte, nested parens are tracked so arguments may hold regexes.
      std::string arg;
      int depth = 1;
      while (!at_end()) {
        const char c = peek_byte();
        if (c == '\\') {
          if (pos_ + 1 >= src_.size()) fail("trailing backslash");
          arg.push_back(c);
          arg.push_back(src_[pos_ + 1]);
          pos_ += 2;
          continue;
        }
        if (c == '(') ++depth;
        if (c == ')' && --depth == 0) break;
        arg.push_back(c);
        ++pos_;
      }
      if (at_end()) fail("unterminated extension group");
      ++pos_;  // ')'
      auto node = make(RegexKind::Extension, start);
      node->ext_name = std::move(name);
      node->ext_arg = std::move(arg);
      return node;
    }
    if (looking_at("?:")) pos_ += 2;
    else if (!at_end() && peek_byte() == '?') fail("unsupported group modifier");
    auto node = make(RegexKind::Group, start);
    node->children.push_back(parse_alt());
    if (at_end() || peek_byte() != ')') fail("expected ')'");
    ++pos_;
    return node;
  }

  // Escape handling shared by atoms and classes. Returns either a single
  // character (via `single`) or a builtin class (\d \D \s \S, via `items` +
  // `negated`).
  RegexAst parse_escape(bool in_class) {
    (void)in_class;  // escapes mean the same thing inside and outside classes
    const std::size_t start = pos_;
    ++pos_;  // backslash
    if (at_end()) fail("trailing backslash");
    const char c = peek_byte();
    ++pos_;
    auto literal = [&](Symbol s) {
      auto node = make(RegexKind::Literal, start);
      node->literal = s;
      return node;
    };
    auto builtin = [&](std::vector<CharClassItem> items, bool negated) {
      auto node = make(RegexKind::CharClass, start);
      node->items = std::move(items);
      node->negated = negated;
      return node;
    };
    switch (c) {
      case 'n': return literal('\n');
      case 't': return literal('\t');
      case 'r': return literal('\r');
      case 'd': return builtin({{'0', '9'}}, false);
      case 'D': return builtin({{'0', '9'}}, true);
      case 's': return builtin(space_items(), false);
      case 'S': return builtin(space_items(), true);
      case '\\': case '(': case ')': case '[': case ']': case '{': case '}':
      case '*': case '+': case '?': case '|': case '.': case '/': case '-':
      case '^': case '$': case '"': case '\'':
        return literal(static_cast<unsigned char>(c));
      default:
        pos_ = start;
        fail(std::string("unknown escape \\") + c);
    }
  }

  static std::vector<CharClassItem> space_items() {
    return {{'\t', '\t'}, {'\n', '\n'}, {'\v', '\f'}, {'\r', '\r'}, {' ', ' '}};
  }

  RegexAst parse_class() {
    const std::size_t start = pos_;
    ++pos_;  // '['
    auto node = make(RegexKind::CharClass, start);
    if (!at_end() && peek_byte() == '^') {
      node->negated = true;
      ++pos_;
    }
    bool first = true;
    while (true) {
      if (at_end()) fail("unterminated character class");
      if (peek_byte() == ']' && !first) break;
      first = false;
      // One item: a char (possibly escaped, possibly a builtin class) with an
      // optional '-' range tail.
      if (peek_byte() == '\\') {
        RegexAst esc = parse_escape(/*in_class=*/true);
        if (esc->kind == RegexKind::CharClass) {
          if (esc->negated) fail("negated escape inside a character class");
          for (const CharClassItem& it : esc->items) node->items.push_back(it);
          continue;
        }
        node->items.push_back(maybe_range(esc->literal));
        continue;
      }
      const Symbol lo = next_char();
      node->items.push_back(maybe_range(lo));
    }
    ++pos_;  // ']'
    if (node->items.empty()) fail("empty character class");
    return node;
  }

  CharClassItem maybe_range(Symbol lo) {
    if (!at_end() && peek_byte() == '-' && pos_ + 1 < src_.size() && src_[pos_ + 1] != ']') {
      ++pos_;  // '-'
      Symbol hi;
      if (peek_byte() == '\\') {
        RegexAst esc = parse_escape(/*in_class=*/true);
        if (esc->kind != RegexKind::Literal) fail("class escape cannot end a range");
        hi = esc->literal;
      } else {
        hi = next_char();
      }
      if (lo > hi) fail("character range out of order");
      return {lo, hi};
    }
    return {lo, lo};
  }
};

inline void print_class_char(Symbol s, std::string& out) {
  switch (s) {
    case '\n': out += "\\n"; return;
    case '\t': out += "\\t"; return;
    case '\r': out += "\\r"; return;
    case '\\': case ']': case '[': case '-': case '^':
      out.push_back('\\');
      out.push_back(static_cast<char>(s));
      return;
    default: utf8_encode_one(s, out);
  }
}

inline void print_literal_char(Symbol s, std::string& out) {
  switch (s) {
    case '\n': out += "\\n"; return;
    case '\t': out += "\\t"; return;
    case '\r': out += "\\r"; return;
    case '\\': case '(': case ')': case '[': case ']': case '{': case '}':
    case '*': case '+': case '?': case '|': case '.':
      out.push_back('\\');
      out.push_back(static_cast<char>(s));
      return;
    default: utf8_encode_one(s, out);
  }
}

// Precedence tiers for re-parenthesization: Alt < Concat < postfix < atom.
inline int regex_precedence(const RegexNode& n) {
  switch (n.kind) {
    case RegexKind::Alt: return 0;
    case RegexKind::Concat: return 1;
    case RegexKind::Star:
    case RegexKind::Plus:
    case RegexKind::Optional:
    case RegexKind::Repeat: return 2;
    default: return 3;
  }
}

inline void print_regex_node(const RegexNode& n, std::string& out);

inline void print_child(const RegexNode& child, int min_precedence, std::string& out) {
  if (regex_precedence(child) < min_precedence) {
    out += "(?:";
    print_regex_node(child, out);
    out += ")";
  } else {
    print_regex_node(child, out);
  }
}

inline void print_regex_node(const RegexNode& n, std::string& out) {
  switch (n.kind) {
    case RegexKind::Empty:
      return;
    case RegexKind::Literal:
      print_literal_char(n.literal, out);
      return;
    case RegexKind::AnyChar:
      out.push_back('.');
      return;
    case RegexKind::CharClass:
      out.push_back('[');
      if (n.negated) out.push_back('^');
      for (const CharClassItem& it : n.items) {
        print_class_char(it.lo, out);
        if (it.hi != it.lo) {
          out.push_back('-');
          print_class_char(it.hi, out);
        }
      }
      out.push_back(']');
      return;
    case RegexKind::Concat:
      for (const auto& c : n.children) {
        // An Empty or Alt part inside a concat needs its own parens.
        if (c->kind == RegexKind::Empty) {
          out += "(?:)";
          continue;
        }
        print_child(*c, 2, out);
      }
      return;
    case RegexKind::Alt: {
      bool sep = false;
      for (const auto& c : n.children) {
        if (sep) out.push_back('|');
        sep = true;
        print_child(*c, 1, out);
      }
      return;
    }
    case RegexKind::Star:
    case RegexKind::Plus:
    case RegexKind::Optional:
      print_child(*n.children[0], 3, out);
      out.push_back(n.kind == RegexKind::Star ? '*' : n.kind == RegexKind::Plus ? '+' : '?');
      return;
    case RegexKind::Repeat:
      print_child(*n.children[0], 3, out);
      out.push_back('{');
      out += std::to_string(n.min_count);
      if (n.max_count != n.min_count) {
        out.push_back(',');
        if (n.max_count != kUnboundedRepeat) out += std::to_string(n.max_count);
      }
      out.push_back('}');
      return;
    case RegexKind::Group:
      out += "(?:";
      print_regex_node(*n.children[0], out);
      out += ")";
      return;
    case RegexKind::Extension:
      out += "(?P<";
      out += n.ext_name;
      out.push_back('>');
      out += n.ext_arg;
      out.push_back(')');
      return;
  }
}

}  // namespace detail

inline RegexAst parse_regex(const std::string& pattern) {
  return detail::RegexParser(pattern).parse();
}

// Re-serializes an AST into the dialect; parse_regex(print_regex(ast)) is
// structurally equivalent to ast up to grouping.
inline std::string print_regex(const RegexNode& ast) {
  std::string out;
  detail::print_regex_node(ast, out);
  return out;
}

inline std::string print_regex(const RegexAst& ast) { return print_regex(*ast); }

}  // namespace tokamata
