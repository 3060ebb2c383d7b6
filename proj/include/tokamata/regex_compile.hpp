#pragma once

#include <algorithm>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "tokamata/errors.hpp"
#include "tokamata/fsa.hpp"
#include "tokamata/regex_ast.hpp"
#include "tokamata/symbols.hpp"
#include "tokamata/terminal_labels.hpp"

namespace tokamata {

// {m,n} repeats are expanded structurally; this caps the copy count so a
// pathological pattern cannot allocate unbounded state.
inline constexpr std::uint32_t kMaxRepeatExpansion = 4096;

inline Fsa expand_sugar(const std::string& name, const std::string& argument);

namespace detail {

// Sorted, merged, and (if negated) complemented over [0, kMaxChar].
inline std::vector<CharClassItem> normalize_class(std::vector<CharClassItem> items, bool negated) {
  std::sort(items.begin(), items.end(),
            [](const CharClassItem& a, const CharClassItem& b) { return a.lo < b.lo; });
  std::vector<CharClassItem> merged;
  for (const CharClassItem& it : items) {
    if (!merged.empty() && it.lo <= merged.back().hi + 1)
      merged.back().hi = std::max(merged.back().hi, it.hi);
    else
      merged.push_back(it);
  }
  if (!negated) return merged;
  std::vector<CharClassItem> out;
  Symbol next = 0;
  for (const CharClassItem& it : merged) {
    if (it.lo > next) out.push_back({next, it.lo - 1});
    next = it.hi + 1;
    if (next == 0) return out;  // ranges reached the top of the symbol space
  }
  if (next <= kMaxChar) out.push_back({next, kMaxChar});
  return out;
}

// Literal-string unescaping for sugar arguments: \n \t \r are control
// characters, \X is X for anything else.
inline std::string unescape_sugar_literal(const std::string& in) {
  std::string out;
  out.reserve(in.size());
  for (std::size_t i = 0; i < in.size(); ++i) {
    if (in[i] != '\\') {
      out.push_back(in[i]);
      continue;
    }
    if (++i >= in.size()) throw ParseError("trailing backslash in extension argument");
    switch (in[i]) {
      case 'n': out.push_back('\n'); break;
      case 't': out.push_back('\t'); break;
      case 'r': out.push_back('\r'); break;
      default: out.push_back(in[i]);
    }
  }
  return out;
}

// Splits on `sep` at nesting depth zero. Parentheses and brackets nest;
// backslash escapes the next byte. Keeps escapes intact for the caller.
inline std::vector<std::string> split_top_level(const std::string& in, char sep) {
  std::vector<std::string> parts(1);
  int depth = 0;
  for (std::size_t i = 0; i < in.size(); ++i) {
    const char c = in[i];
    if (c == '\\' && i + 1 < in.size()) {
      parts.back().push_back(c);
      parts.back().push_back(in[++i]);
      continue;
    }
    if (c == '(' || c == '[') ++depth;
    if (c == ')' || c == ']') --depth;
    if (c == sep && depth == 0) {
      parts.emplace_back();
      continue;
    }
    parts.back().push_back(c);
  }
  return parts;
}

inline std::vector<std::pair<std::string, std::string>> parse_sugar_kv(const std::string& arg,
                                                                       const char* ext_name) {
  std::vector<std::pair<std::string, std::string>> kv;
  for (const std::string& part : split_top_level(arg, ';')) {
    if (part.empty()) continue;
    const std::size_t eq = part.find('=');
    if (eq == std::string::npos)
      throw ParseError(std::string(ext_name) + ": expected key=value, got '" + part + "'");
    const std::string key = part.substr(0, eq);
    for (const auto& [k, v] : kv) {
      if (k == key) throw ParseError(std::string(ext_name) + ": duplicate key '" + key + "'");
    }
    kv.push_back({key, part.substr(eq + 1)});
  }
  return kv;
}

struct NfaFragment {
  StateId start;
  StateId accept;
};

class ThompsonBuilder {
 public:
  ThompsonBuilder() : b_(AlphabetKind::Chars) {}

  Fsa run(const RegexNode& ast) {
    const NfaFragment f = build(ast);
    b_.set_initial(f.start);
    b_.set_final(f.accept);
    return b_.build();
  }

 private:
  FsaBuilder b_;

  NfaFragment fresh() { return {b_.add_state(), b_.add_state()}; }

  NfaFragment build(const RegexNode& n) {
    switch (n.kind) {
      case RegexKind::Empty: {
        const NfaFragment f = fresh();
        b_.add_epsilon(f.start, f.accept);
        return f;
      }
      case RegexKind::Literal: {
        const NfaFragment f = fresh();
        b_.add_symbol_edge(f.start, n.literal, f.accept);
        return f;
      }
      case RegexKind::AnyChar: {
        const NfaFragment f = fresh();
        b_.add_edge(f.start, 0, '\n' - 1, f.accept);
        b_.add_edge(f.start, '\n' + 1, kMaxChar, f.accept);
        return f;
      }
      case RegexKind::CharClass: {
        const NfaFragment f = fresh();
        for (const CharClassItem& it : normalize_class(n.items, n.negated))
          b_.add_edge(f.start, it.lo, it.hi, f.accept);
        return f;
      }
      case RegexKind::Concat: {
        NfaFragment f = build(*n.children[0]);
        for (std::size_t i = 1; i < n.children.size(); ++i) {
          const NfaFragment g = build(*n.children[i]);
          b_.add_epsilon(f.accept, g.start);
          f.accept = g.accept;
        }
        return f;
      }
      case RegexKind::Alt: {
        const NfaFragment f = fresh();
        for (const auto& c : n.children) {
          const NfaFragment g = build(*c);
          b_.add_epsilon(f.start, g.start);
          b_.add_epsilon(g.accept, f.accept);
        }
        return f;
      }
      case RegexKind::Star: {
        const NfaFragment f = fresh();
        const NfaFragment g = build(*n.children[0]);
        b_.add_epsilon(f.start, f.accept);
        b_.add_epsilon(f.start, g.start);
        b_.add_epsilon(g.accept, g.start);
        b_.add_epsilon(g.accept, f.accept);
        return f;
      }
      case RegexKind::Plus: {
        const NfaFragment f = fresh();
        const NfaFragment g = build(*n.children[0]);
        b_.add_epsilon(f.start, g.start);
        b_.add_epsilon(g.accept, g.start);
        b_.add_epsilon(g.accept, f.accept);
        return f;
      }
      case RegexKind::Optional: {
        const NfaFragment f = fresh();
        const NfaFragment g = build(*n.children[0]);
        b_.add_epsilon(f.start, f.accept);
        b_.add_epsilon(f.start, g.start);
        b_.add_epsilon(g.accept, f.accept);
        return f;
      }
      case RegexKind::Repeat: {
        const bool bounded = n.max_count != kUnboundedRepeat;
        const std::uint64_t copies =
            std::uint64_t{n.min_count} + (bounded ? n.max_count - n.min_count : 1);
        if (copies > kMaxRepeatExpansion)
          throw ResourceLimitError("repeat expansion exceeds the copy cap (cap=" +
                                   std::to_string(kMaxRepeatExpansion) + ")");
        const NfaFragment f = fresh();
        StateId at = f.start;
        for (std::uint32_t i = 0; i < n.min_count; ++i) {
          const NfaFragment g = build(*n.children[0]);
          b_.add_epsilon(at, g.start);
          at = g.accept;
        }
        if (!bounded) {
          const NfaFragment g = build(*n.children[0]);
          b_.add_epsilon(at, g.start);
          b_.add_epsilon(g.accept, g.start);
          b_.add_epsilon(g.accept, f.accept);
          b_.add_epsilon(at, f.accept);
        } else {
          b_.add_epsilon(at, f.accept);
          for (std::uint32_t i = n.min_count; i < n.max_count; ++i) {
            const NfaFragment g = build(*n.children[0]);
            b_.add_epsilon(at, g.start);
            at = g.accept;
            b_.add_epsilon(at, f.accept);
          }
        }
        return f;
      }
      case RegexKind::Group:
        return build(*n.children[0]);
      case RegexKind::Extension: {
        if (is_terminal_label_name(n.ext_name)) {
          if (!n.ext_arg.empty())
            throw ParseError(n.ext_name + " takes no argument", n.position);
          const NfaFragment f = fresh();
          b_.add_symbol_edge(f.start, terminal_label_for_name(n.ext_name).id, f.accept);
          return f;
        }
        return splice(expand_sugar(n.ext_name, n.ext_arg));
      }
    }
    throw IntegrityError("unhandled regex node kind");
  }

  NfaFragment splice(const Fsa& sub) {
    const NfaFragment f = fresh();
    const StateId offset = b_.state_count();
    for (StateId q = 0; q < sub.state_count; ++q) b_.add_state();
    for (const FsaEdge& e : sub.edges) {
      if (e.is_epsilon())
        b_.add_epsilon(e.src + offset, e.dst + offset);
      else
        b_.add_edge(e.src + offset, e.lo, e.hi, e.dst + offset);
    }
    b_.add_epsilon(f.start, sub.initial + offset);
    for (StateId q = 0; q < sub.state_count; ++q) {
      if (sub.is_final(q)) b_.add_epsilon(q + offset, f.accept);
    }
    return f;
  }
};

}  // namespace detail

// Thompson construction: a nondeterministic character FSA with epsilon edges,
// range edges for classes, and terminal-label edges for wildcard extensions.
inline Fsa thompson_nfa(const RegexNode& ast) { return detail::ThompsonBuilder().run(ast); }

// Accepts exactly the substrings of `reference`, the empty string included.
// Determinizing the all-positions NFA lands on end-position equivalence
// classes, so the state count is linear (at most 2|u|+2) rather than the
// quadratic a naive (prefix)(suffix) spelling would give.
inline Fsa build_substring_fsa(const std::string& reference) {
  const std::vector<Symbol> u = utf8_decode(reference);
  const std::uint32_t n = static_cast<std::uint32_t>(u.size());
  FsaBuilder b(AlphabetKind::Chars);
  const StateId start = b.add_state();
  b.set_initial(start);
  const StateId first = b.add_states(n + 1);
  for (std::uint32_t i = 0; i <= n; ++i) {
    b.add_epsilon(start, first + i);
    b.set_final(first + i);
  }
  b.set_final(start);
  for (std::uint32_t i = 0; i < n; ++i) b.add_symbol_edge(first + i, u[i], first + i + 1);
  return prune_dead_states(determinize(b.build()));
}

// Strings whose first occurrence of `stop` is exactly at the end: free text,
// then the stop phrase, nothing after. Classic failure-function automaton;
// characters outside the phrase fall back to the start state in bulk ranges.
inline Fsa build_text_until_fsa(const std::string& stop) {
  const std::vector<Symbol> p = utf8_decode(stop);
  if (p.empty()) throw ParseError("TEXT_UNTIL needs a non-empty stop phrase");
  const std::uint32_t n = static_cast<std::uint32_t>(p.size());
  std::vector<std::uint32_t> fail(n + 1, 0);
  for (std::uint32_t i = 1; i < n; ++i) {
    std::uint32_t j = fail[i];
    while (j > 0 && p[i] != p[j]) j = fail[j];
    fail[i + 1] = (p[i] == p[j]) ? j + 1 : 0;
  }
  std::vector<Symbol> distinct(p);
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());

  FsaBuilder b(AlphabetKind::Chars);
  b.add_states(n + 1);
  b.set_initial(0);
  b.set_final(n);
  for (std::uint32_t i = 0; i < n; ++i) {
    for (Symbol c : distinct) {
      std::uint32_t j = i;
      while (j > 0 && p[j] != c) j = fail[j];
      const std::uint32_t dst = (p[j] == c) ? j + 1 : 0;
      b.add_symbol_edge(i, c, dst);
    }
    // Everything not in the phrase resets the match.
    Symbol next = 0;
    for (Symbol c : distinct) {
      if (c > next) b.add_edge(i, next, c - 1, 0);
      next = c + 1;
    }
    if (next <= kMaxChar) b.add_edge(i, next, kMaxChar, 0);
  }
  return b.build();
}

namespace detail {

// Conservative YAML-plain-scalar shape: no leading indicator character, no
// tabs or newlines, no ": " or " #" sequence, and the string must end on an
// ordinary character (not ':' or ' '). Approximate by design; real YAML
// context rules are out of reach of a per-string predicate.
inline Fsa build_unquoted_text_fsa() {
  static const Symbol indicators[] = {'!', '"', '#', '%', '&', '\'', '*', ',', '-', ':',
                                      '>', '?', '@', '[', ']', '`',  '{', '|', '}'};
  FsaBuilder b(AlphabetKind::Chars);
  const StateId start = b.add_state();   // nothing read
  const StateId normal = b.add_state();  // last char ordinary
  const StateId colon = b.add_state();   // last char ':'
  const StateId space = b.add_state();   // last char ' '
  b.set_initial(start);
  b.set_final(normal);

  // First character: printable, not an indicator, not a space.
  Symbol next = 0x21;
  for (Symbol c : indicators) {
    if (c > next) b.add_edge(start, next, c - 1, normal);
    next = c + 1;
  }
  b.add_edge(start, next, kMaxChar, normal);

  // Interior characters: [0x20, kMaxChar], with ':' and ' ' tracked.
  const auto interior = [&](StateId src, StateId dst_other) {
    b.add_symbol_edge(src, ':', colon);
    if (src != colon) b.add_symbol_edge(src, ' ', space);
    b.add_edge(src, 0x20 + 1, ':' - 1, dst_other);  // 0x21..0x39
    b.add_edge(src, ':' + 1, kMaxChar, dst_other);
  };
  interior(normal, normal);
  interior(colon, normal);  // no ' ' edge: ": " is forbidden
  b.add_symbol_edge(space, ':', colon);
  b.add_symbol_edge(space, ' ', space);
  b.add_edge(space, 0x21, '#' - 1, normal);  // '#' after ' ' is forbidden
  b.add_edge(space, '#' + 1, ':' - 1, normal);
  b.add_edge(space, ':' + 1, kMaxChar, normal);
  return b.build();
}

inline Fsa build_delimited_list_fsa(const std::string& arg) {
  std::string item, delim;
  std::uint32_t min_items = 1;
  std::uint32_t max_items = kUnboundedRepeat;
  bool have_item = false, have_delim = false;
  for (const auto& [key, value] : parse_sugar_kv(arg, "DELIMITED_LIST")) {
    if (key == "item") {
      item = value;
      have_item = true;
    } else if (key == "delim") {
      delim = unescape_sugar_literal(value);
      have_delim = true;
    } else if (key == "min" || key == "max") {
      if (key == "max" && value == "*") {
        max_items = kUnboundedRepeat;
        continue;
      }
      std::uint32_t parsed = 0;
      if (value.empty()) throw ParseError("DELIMITED_LIST: empty " + key);
      for (char c : value) {
        if (c < '0' || c > '9') throw ParseError("DELIMITED_LIST: bad " + key + " '" + value + "'");
        parsed = parsed * 10 + static_cast<std::uint32_t>(c - '0');
        if (parsed > 1000000) throw ParseError("DELIMITED_LIST: " + key + " too large");
      }
      (key == "min" ? min_items : max_items) = parsed;
    } else {
      throw ParseError("DELIMITED_LIST: unknown key '" + key + "'");
    }
  }
  if (!have_item || !have_delim)
    throw ParseError("DELIMITED_LIST needs item=...;delim=...");
  if (delim.empty()) throw ParseError("DELIMITED_LIST: empty delimiter");
  if (max_items != kUnboundedRepeat && min_items > max_items)
    throw ParseError("DELIMITED_LIST: min exceeds max");

  // item (delim item){min-1, max-1}, wrapped in an alternation with the
  // empty string when min = 0.
  const auto make_literal_concat = [](const std::string& text) {
    auto node = std::make_unique<RegexNode>();
    node->kind = RegexKind::Concat;
    for (Symbol s : utf8_decode(text)) {
      auto lit = std::make_unique<RegexNode>();
      lit->kind = RegexKind::Literal;
      lit->literal = s;
      node->children.push_back(std::move(lit));
    }
    return node;
  };
  const auto group_of = [](RegexAst inner) {
    auto node = std::make_unique<RegexNode>();
    node->kind = RegexKind::Group;
    node->children.push_back(std::move(inner));
    return node;
  };
  if (max_items == 0) {
    RegexNode empty;
    return thompson_nfa(empty);
  }
  auto tail_body = std::make_unique<RegexNode>();
  tail_body->kind = RegexKind::Concat;
  tail_body->children.push_back(make_literal_concat(delim));
  tail_body->children.push_back(group_of(parse_regex(item)));
  auto tail = std::make_unique<RegexNode>();
  tail->kind = RegexKind::Repeat;
  tail->min_count = min_items > 1 ? min_items - 1 : 0;
  tail->max_count = max_items == kUnboundedRepeat ? kUnboundedRepeat : max_items - 1;
  tail->children.push_back(group_of(std::move(tail_body)));
  auto list = std::make_unique<RegexNode>();
  list->kind = RegexKind::Concat;
  list->children.push_back(group_of(parse_regex(item)));
  list->children.push_back(std::move(tail));
  if (min_items > 0) return thompson_nfa(*list);
  auto alt = std::make_unique<RegexNode>();
  alt->kind = RegexKind::Alt;
  alt->children.push_back(std::make_unique<RegexNode>());  // Empty
  alt->children.push_back(std::move(list));
  return thompson_nfa(*alt);
}

// items=A,B,C;delim=D — any subsequence (the empty one included) of the item
// list in order, joined by the delimiter. Built directly: state p_i has seen
// items 0..i-1 and emitted nothing, q_i has seen 0..i-1 and emitted at least
// one item.
inline Fsa build_subsequence_fsa(const std::string& arg) {
  std::vector<std::string> items;
  std::string delim;
  bool have_items = false, have_delim = false;
  for (const auto& [key, value] : parse_sugar_kv(arg, "DELIMITED_SUBSEQUENCE_OF")) {
    if (key == "items") {
      for (const std::string& raw : split_top_level(value, ',')) {
        if (raw.empty()) throw ParseError("DELIMITED_SUBSEQUENCE_OF: empty item");
        items.push_back(unescape_sugar_literal(raw));
      }
      have_items = true;
    } else if (key == "delim") {
      delim = unescape_sugar_literal(value);
      have_delim = true;
    } else {
      throw ParseError("DELIMITED_SUBSEQUENCE_OF: unknown key '" + key + "'");
    }
  }
  if (!have_items || !have_delim || items.empty())
    throw ParseError("DELIMITED_SUBSEQUENCE_OF needs items=...;delim=...");
  if (delim.empty()) throw ParseError("DELIMITED_SUBSEQUENCE_OF: empty delimiter");

  const std::size_t n = items.size();
  FsaBuilder b(AlphabetKind::Chars);
  const StateId p0 = b.add_states(static_cast<std::uint32_t>(n + 1));
  const StateId q0 = b.add_states(static_cast<std::uint32_t>(n + 1));
  b.set_initial(p0);
  b.set_final(p0 + static_cast<StateId>(n));
  b.set_final(q0 + static_cast<StateId>(n));
  const auto chain = [&](StateId from, const std::string& text, StateId to) {
    const std::vector<Symbol> sym = utf8_decode(text);
    StateId at = from;
    for (std::size_t i = 0; i < sym.size(); ++i) {
      const StateId nxt = i + 1 == sym.size() ? to : b.add_state();
      b.add_symbol_edge(at, sym[i], nxt);
      at = nxt;
    }
    if (sym.empty()) b.add_epsilon(from, to);
  };
  for (std::size_t i = 0; i < n; ++i) {
    b.add_epsilon(p0 + static_cast<StateId>(i), p0 + static_cast<StateId>(i + 1));
    b.add_epsilon(q0 + static_cast<StateId>(i), q0 + static_cast<StateId>(i + 1));
    chain(p0 + static_cast<StateId>(i), items[i], q0 + static_cast<StateId>(i + 1));
    chain(q0 + static_cast<StateId>(i), delim + items[i], q0 + static_cast<StateId>(i + 1));
  }
  return b.build();
}

}  // namespace detail

// Character FSA for a syntactic-sugar extension. The result may be
// nondeterministic; compile_regex determinizes after splicing.
inline Fsa expand_sugar(const std::string& name, const std::string& argument) {
  if (name == "SUBSTRING_OF") return build_substring_fsa(detail::unescape_sugar_literal(argument));
  if (name == "TEXT_UNTIL") return build_text_until_fsa(detail::unescape_sugar_literal(argument));
  if (name == "QUOTED_TEXT") {
    if (!argument.empty()) throw ParseError("QUOTED_TEXT takes no argument");
    static const char* kExpansion = R"re(" *(?:[^\s"\\]|\\["n\\])(?: |[^\s"\\]|\\["n\\])*")re";
    return thompson_nfa(*parse_regex(kExpansion));
  }
  if (name == "UNQUOTED_TEXT") {
    if (!argument.empty()) throw ParseError("UNQUOTED_TEXT takes no argument");
    return detail::build_unquoted_text_fsa();
  }
  if (name == "DELIMITED_LIST") return detail::build_delimited_list_fsa(argument);
  if (name == "DELIMITED_SUBSEQUENCE_OF") return detail::build_subsequence_fsa(argument);
  throw ParseError("'" + name + "' is not a syntactic-sugar extension");
}

// Pattern -> deterministic, pruned character FSA, in separate passes:
// epsilon removal, then subset construction, then dead-state pruning.
// Character classes stay range edges; terminal labels stay single-symbol
// edges above the character plane and survive determinization untouched.
inline Fsa compile_regex(const RegexNode& ast, std::size_t state_cap = kDefaultDeterminizeStateCap) {
  return prune_dead_states(determinize(remove_epsilons(thompson_nfa(ast)), state_cap));
}

inline Fsa compile_regex(const std::string& pattern,
                         std::size_t state_cap = kDefaultDeterminizeStateCap) {
  return compile_regex(*parse_regex(pattern), state_cap);
}

}  // namespace tokamata
