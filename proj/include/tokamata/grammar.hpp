#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "tokamata/errors.hpp"
#include "tokamata/regex_ast.hpp"

namespace tokamata {

// One rhs element: a terminal (regex fragment) or a nonterminal reference.
struct GrammarItem {
  bool is_terminal;
  std::uint32_t index;  // into Grammar::terminals or Grammar::nonterminals

  bool operator==(const GrammarItem&) const = default;
};

struct GrammarRule {
  std::uint32_t lhs;
  std::vector<GrammarItem> rhs;  // empty = epsilon rule
  std::string text;              // normalized "S -> /a/ S /b/" for reports
};

// File format: one rule per line, `NONTERM -> item item ...`, terminals as
// slash-delimited regex fragments (\/ for a literal slash), '|' for
// alternatives within a line, '#' starts a comment outside terminals, blank
// lines ignored. The start symbol is the first rule's lhs.
struct Grammar {
  std::vector<std::string> nonterminals;
  std::vector<std::string> terminals;  // regex pattern text, deduplicated
  std::vector<GrammarRule> rules;
  std::vector<std::vector<std::uint32_t>> rules_of;  // per nonterminal
  std::uint32_t start = 0;
};

namespace detail {

inline bool is_ident_start(char c) {
  return (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z') || c == '_';
}
inline bool is_ident_char(char c) { return is_ident_start(c) || (c >= '0' && c <= '9'); }

struct RawGrammarToken {
  enum Kind { Ident, Terminal, Arrow, Pipe } kind;
  std::string text;      // identifier name or terminal pattern (delimiters stripped)
  std::size_t position;  // byte offset into the grammar text
};

inline std::vector<RawGrammarToken> lex_grammar_line(const std::string& text, std::size_t begin,
                                                     std::size_t end) {
  std::vector<RawGrammarToken> out;
  std::size_t i = begin;
  while (i < end) {
    const char c = text[i];
    if (c == ' ' || c == '\t' || c == '\r') {
      ++i;
      continue;
    }
    if (c == '#') break;  // comment to end of line
    if (c == '|') {
      out.push_back({RawGrammarToken::Pipe, "|", i});
      ++i;
      continue;
    }
    if (c == '-' && i + 1 < end && text[i + 1] == '>') {
      out.push_back({RawGrammarToken::Arrow, "->", i});
      i += 2;
      continue;
    }
    if (c == '/') {
      const std::size_t start = i++;
      std::string pattern;
      bool closed = false;
      while (i < end) {
        if (text[i] == '\\' && i + 1 < end) {
          pattern.push_back(text[i]);
          pattern.push_back(text[i + 1]);
          i += 2;
          continue;
        }
        if (text[i] == '/') {
          closed = true;
          ++i;
          break;
        }
        pattern.push_back(text[i]);
        ++i;
      }
      if (!closed) throw ParseError("unterminated terminal", start);
      out.push_back({RawGrammarToken::Terminal, std::move(pattern), start});
      continue;
    }
    if (is_ident_start(c)) {
      const std::size_t start = i;
      while (i < end && is_ident_char(text[i])) ++i;
      out.push_back({RawGrammarToken::Ident, text.substr(start, i - start), start});
      continue;
    }
    throw ParseError(std::string("unexpected character '") + c + "' in grammar", i);
  }
  return out;
}

}  // namespace detail

inline Grammar parse_grammar(const std::string& text) {
  struct RawRule {
    std::string lhs;
    std::size_t lhs_position;
    std::vector<detail::RawGrammarToken> items;
  };
  std::vector<RawRule> raw_rules;

  std::size_t line_begin = 0;
  while (line_begin <= text.size()) {
    std::size_t line_end = text.find('\n', line_begin);
    if (line_end == std::string::npos) line_end = text.size();
    const auto tokens = detail::lex_grammar_line(text, line_begin, line_end);
    line_begin = line_end + 1;
    if (tokens.empty()) {
      if (line_end == text.size()) break;
      continue;
    }
    if (tokens.size() < 2 || tokens[0].kind != detail::RawGrammarToken::Ident ||
        tokens[1].kind != detail::RawGrammarToken::Arrow)
      throw ParseError("expected 'NONTERM -> ...'", tokens[0].position);
    RawRule rule{tokens[0].text, tokens[0].position, {}};
    for (std::size_t i = 2; i < tokens.size(); ++i) {
      if (tokens[i].kind == detail::RawGrammarToken::Pipe) {
        raw_rules.push_back(rule);
        rule.items.clear();
        continue;
      }
      if (tokens[i].kind == detail::RawGrammarToken::Arrow)
        throw ParseError("unexpected '->'", tokens[i].position);
      rule.items.push_back(tokens[i]);
    }
    raw_rules.push_back(std::move(rule));
    if (line_end == text.size()) break;
  }
  if (raw_rules.empty()) throw ParseError("grammar has no rules");

  Grammar g;
  std::map<std::string, std::uint32_t> nt_ids;
  for (const RawRule& r : raw_rules) {
    if (nt_ids.emplace(r.lhs, static_cast<std::uint32_t>(g.nonterminals.size())).second)
      g.nonterminals.push_back(r.lhs);
  }
  g.start = nt_ids.at(raw_rules.front().lhs);
  g.rules_of.resize(g.nonterminals.size());

  std::map<std::string, std::uint32_t> term_ids;
  for (const RawRule& r : raw_rules) {
    GrammarRule rule;
    rule.lhs = nt_ids.at(r.lhs);
    rule.text = r.lhs + " ->";
    for (const detail::RawGrammarToken& item : r.items) {
      if (item.kind == detail::RawGrammarToken::Ident) {
        const auto it = nt_ids.find(item.text);
        if (it == nt_ids.end())
          throw ParseError("undefined nonterminal '" + item.text + "'", item.position);
        rule.rhs.push_back({false, it->second});
        rule.text += " " + item.text;
      } else {
        auto [it, fresh] = term_ids.emplace(item.text, static_cast<std::uint32_t>(g.terminals.size()));
        if (fresh) {
          try {
            parse_regex(item.text);
          } catch (const ParseError& e) {
            throw ParseError("in terminal /" + item.text + "/: " + e.what(), item.position);
          }
          g.terminals.push_back(item.text);
        }
        rule.rhs.push_back({true, it->second});
        rule.text += " /" + item.text + "/";
      }
    }
    if (rule.rhs.empty()) rule.text += " <empty>";
    g.rules_of[rule.lhs].push_back(static_cast<std::uint32_t>(g.rules.size()));
    g.rules.push_back(std::move(rule));
  }
  return g;
}

}  // namespace tokamata
