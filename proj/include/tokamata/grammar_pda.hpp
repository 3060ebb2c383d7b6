#pragma once

#include <algorithm>
#include <cstdint>
#include <deque>
#include <map>
#include <set>
#include <string>
#include <unordered_set>
#include <vector>

#include "tokamata/errors.hpp"
#include "tokamata/fsa.hpp"
#include "tokamata/grammar.hpp"
#include "tokamata/pda.hpp"
#include "tokamata/regex_compile.hpp"
#include "tokamata/symbols.hpp"

namespace tokamata {

namespace detail {

inline void reject_terminal_labels(const RegexNode& n, const std::string& term) {
  if (n.kind == RegexKind::Extension && is_terminal_label_name(n.ext_name))
    throw ParseError(n.ext_name + " is not supported inside grammar terminal /" + term + "/");
  for (const auto& c : n.children) reject_terminal_labels(*c, term);
}

inline std::string dotted_rule_text(const Grammar& g, std::uint32_t rule, std::uint32_t dot) {
  const GrammarRule& r = g.rules[rule];
  std::string out = g.nonterminals[r.lhs] + " ->";
  for (std::uint32_t j = 0; j <= r.rhs.size(); ++j) {
    if (j == dot) out += " .";
    if (j == r.rhs.size()) break;
    const GrammarItem& item = r.rhs[j];
    out += item.is_terminal ? " /" + g.terminals[item.index] + "/" : " " + g.nonterminals[item.index];
  }
  return out;
}

// One nonterminal's rule network, determinized over characters and call
// symbols, with dotted-rule positions recovered per determinized state.
struct NtNet {
  Fsa det;
  std::vector<std::vector<std::pair<std::uint32_t, std::uint32_t>>> items;  // (rule, dot) per state
};

inline NtNet build_nt_net(const Grammar& g, std::uint32_t nt, const std::vector<Fsa>& term_nfas,
                          const std::vector<bool>& nullable_nt, std::size_t state_cap) {
  FsaBuilder b(AlphabetKind::Chars);
  const StateId start = b.add_state();
  // position tag per builder state; (rule, dot) or rule == UINT32_MAX for
  // terminal-internal states.
  std::vector<std::pair<std::uint32_t, std::uint32_t>> tag;
  tag.push_back({UINT32_MAX, 0});
  const auto add_tagged = [&](std::uint32_t rule, std::uint32_t dot) {
    const StateId q = b.add_state();
    tag.push_back({rule, dot});
    return q;
  };
  const auto add_anon = [&](std::uint32_t n) {
    const StateId first = b.add_states(n);
    for (std::uint32_t i = 0; i < n; ++i) tag.push_back({UINT32_MAX, 0});
    return first;
  };

  for (std::uint32_t rule : g.rules_of[nt]) {
    const GrammarRule& r = g.rules[rule];
    StateId at = add_tagged(rule, 0);
    b.add_epsilon(start, at);
    for (std::uint32_t j = 0; j < r.rhs.size(); ++j) {
      const StateId next = add_tagged(rule, j + 1);
      const GrammarItem& item = r.rhs[j];
      if (item.is_terminal) {
        const Fsa& sub = term_nfas[item.index];
        const StateId offset = add_anon(sub.state_count);
        for (const FsaEdge& e : sub.edges) {
          if (e.is_epsilon())
            b.add_epsilon(e.src + offset, e.dst + offset);
          else
            b.add_edge(e.src + offset, e.lo, e.hi, e.dst + offset);
        }
        b.add_epsilon(at, sub.initial + offset);
        for (StateId q = 0; q < sub.state_count; ++q) {
          if (sub.is_final(q)) b.add_epsilon(q + offset, next);
        }
      } else {
        b.add_symbol_edge(at, kCallBase + item.index, next);
        if (nullable_nt[item.index]) b.add_epsilon(at, next);
      }
      at = next;
    }
    b.set_final(at);
  }
  b.set_initial(start);

  std::vector<std::vector<StateId>> subsets;
  NtNet net;
  net.det = determinize(b.build(), state_cap, &subsets);
  net.items.resize(net.det.state_count);
  for (StateId d = 0; d < net.det.state_count; ++d) {
    for (StateId s : subsets[d]) {
      if (tag[s].first != UINT32_MAX) net.items[d].push_back(tag[s]);
    }
    std::sort(net.items[d].begin(), net.items[d].end());
    net.items[d].erase(std::unique(net.items[d].begin(), net.items[d].end()), net.items[d].end());
  }
  return net;
}

}  // namespace detail

// Character-accepting PDA for the grammar. Each nonterminal's rules are
// merged into one determinized network whose alphabet is characters plus
// call symbols for embedded nonterminals; the assembled machine replaces
// each call edge with prediction scans (the called network's first
// characters, pushing the return state) and completion edges (epsilon edges
// popping one return-address symbol). Stack symbols are the distinct return
// states, named by their dotted rules; the initial symbol "[.]" is popped on
// completing the start nonterminal, landing in the single accepting state
// with an empty stack.
inline Pda build_grammar_pda(const Grammar& g, std::size_t state_cap = kDefaultDeterminizeStateCap) {
  // Terminal NFAs, rejecting wildcard labels (they have no character
  // semantics and belong to the regex pipeline).
  std::vector<Fsa> term_nfas;
  std::vector<bool> term_nullable;
  term_nfas.reserve(g.terminals.size());
  for (const std::string& t : g.terminals) {
    const RegexAst ast = parse_regex(t);
    detail::reject_terminal_labels(*ast, t);
    term_nfas.push_back(thompson_nfa(*ast));
    term_nullable.push_back(fsa_accepts(term_nfas.back(), std::vector<Symbol>{}));
  }

  std::vector<bool> nullable_nt(g.nonterminals.size(), false);
  for (bool changed = true; changed;) {
    changed = false;
    for (const GrammarRule& r : g.rules) {
      if (nullable_nt[r.lhs]) continue;
      bool all = true;
      for (const GrammarItem& item : r.rhs)
        all = all && (item.is_terminal ? term_nullable[item.index] : nullable_nt[item.index]);
      if (all) {
        nullable_nt[r.lhs] = true;
        changed = true;
      }
    }
  }

  std::vector<detail::NtNet> nets;
  nets.reserve(g.nonterminals.size());
  for (std::uint32_t nt = 0; nt < g.nonterminals.size(); ++nt)
    nets.push_back(detail::build_nt_net(g, nt, term_nfas, nullable_nt, state_cap));

  std::vector<StateId> net_offset(g.nonterminals.size());
  StateId total = 0;
  for (std::uint32_t nt = 0; nt < g.nonterminals.size(); ++nt) {
    net_offset[nt] = total;
    total += nets[nt].det.state_count;
  }
  const StateId q_acc = total;

  PdaBuilder pb(AlphabetKind::Chars);
  for (StateId q = 0; q <= total; ++q) pb.add_state();
  pb.set_initial(net_offset[g.start] + nets[g.start].det.initial);
  pb.set_final(q_acc);

  const Symbol bottom = pb.add_stack_symbol("[.]");

  // Return-address stack symbols: one per distinct call-edge target state.
  std::map<StateId, Symbol> return_symbol;  // global state id -> stack symbol
  std::vector<std::set<StateId>> returns_of(g.nonterminals.size());  // per called nt
  for (std::uint32_t nt = 0; nt < g.nonterminals.size(); ++nt) {
    const detail::NtNet& net = nets[nt];
    for (const FsaEdge& e : net.det.edges) {
      if (e.is_epsilon() || !is_call_symbol(e.lo)) continue;
      const std::uint32_t callee = e.lo - kCallBase;
      const StateId ret = net_offset[nt] + e.dst;
      if (!return_symbol.count(ret)) {
        std::string name;
        for (const auto& [rule, dot] : net.items[e.dst]) {
          if (!name.empty()) name += " | ";
          name += detail::dotted_rule_text(g, rule, dot);
        }
        return_symbol[ret] = pb.add_stack_symbol(name);
      }
      returns_of[callee].insert(ret);
    }
  }

  // Scan edges: a network's own character edges pass through unchanged;
  // prediction closure lifts the first characters of every (transitively)
  // called network onto the calling state, pushing the chain of return
  // addresses. Left recursion makes that closure infinite; it is recorded
  // and reported by check_determinism rather than thrown here.
  std::string left_recursion;
  for (std::uint32_t nt = 0; nt < g.nonterminals.size(); ++nt) {
    const detail::NtNet& net = nets[nt];
    for (StateId d = 0; d < net.det.state_count; ++d) {
      const StateId src = net_offset[nt] + d;
      for (const FsaEdge& e : net.det.out(d)) {
        if (e.is_epsilon() || is_call_symbol(e.lo)) continue;
        pb.add_edge(src, e.lo, e.hi, net_offset[nt] + e.dst);
      }
      // Prediction closure from d's call edges. Items carry the chain of
      // callees so a leftmost-call cycle (left recursion) is caught and
      // named instead of growing the push chain forever.
      struct PredictItem {
        std::vector<std::uint32_t> path;  // callee chain, outermost first
        std::vector<Symbol> pushes;       // matching return addresses
      };
      std::vector<PredictItem> work;
      std::set<std::pair<std::uint32_t, std::vector<Symbol>>> seen;
      for (const FsaEdge& e : net.det.out(d)) {
        if (e.is_epsilon() || !is_call_symbol(e.lo)) continue;
        PredictItem item{{e.lo - kCallBase}, {return_symbol.at(net_offset[nt] + e.dst)}};
        if (seen.emplace(item.path.back(), item.pushes).second) work.push_back(std::move(item));
      }
      for (std::size_t w = 0; w < work.size(); ++w) {
        if (work.size() > 100000)
          throw ResourceLimitError("grammar prediction closure exceeded 100000 items");
        const PredictItem item = work[w];
        const std::uint32_t callee = item.path.back();
        const detail::NtNet& callee_net = nets[callee];
        for (const FsaEdge& e : callee_net.det.out(callee_net.det.initial)) {
          if (e.is_epsilon()) continue;
          if (is_call_symbol(e.lo)) {
            const std::uint32_t deeper = e.lo - kCallBase;
            const auto cycle_at = std::find(item.path.begin(), item.path.end(), deeper);
            if (cycle_at != item.path.end()) {
              if (left_recursion.empty()) {
                left_recursion = "left recursion: ";
                for (auto it = cycle_at; it != item.path.end(); ++it)
                  left_recursion += g.nonterminals[*it] + " -> ";
                left_recursion += g.nonterminals[deeper] +
                                  " (each nonterminal can begin with the next, so the machine "
                                  "would need an unbounded stack before reading any input)";
              }
              continue;
            }
            PredictItem next{item.path, item.pushes};
            next.path.push_back(deeper);
            next.pushes.push_back(return_symbol.at(net_offset[callee] + e.dst));
            if (seen.emplace(deeper, next.pushes).second) work.push_back(std::move(next));
          } else {
            pb.add_edge(src, e.lo, e.hi, net_offset[callee] + e.dst, {}, item.pushes);
          }
        }
      }
    }
  }

  // Completion edges: a state holding a completed rule of N pops one return
  // address pushed at any call site of N and resumes there; completing the
  // start symbol pops the initial symbol and accepts.
  Pda pda;  // metadata staged first, since PdaBuilder::build moves state out
  std::vector<std::vector<std::uint32_t>> completed(total + 1);
  for (std::uint32_t nt = 0; nt < g.nonterminals.size(); ++nt) {
    const detail::NtNet& net = nets[nt];
    for (StateId d = 0; d < net.det.state_count; ++d) {
      std::vector<std::uint32_t> done;
      for (const auto& [rule, dot] : net.items[d]) {
        if (dot == g.rules[rule].rhs.size()) done.push_back(rule);
      }
      if (done.empty()) continue;
      const StateId src = net_offset[nt] + d;
      completed[src] = done;
      for (StateId ret : returns_of[nt])
        pb.add_edge(src, kEpsilon, kEpsilon, ret, {return_symbol.at(ret)}, {});
      if (nt == g.start) pb.add_edge(src, kEpsilon, kEpsilon, q_acc, {bottom}, {});
    }
  }

  pda = pb.build();
  pda.completed_rules_by_state = std::move(completed);
  pda.rule_text.reserve(g.rules.size());
  for (const GrammarRule& r : g.rules) pda.rule_text.push_back(r.text);
  pda.left_recursion_detail = std::move(left_recursion);
  return pda;
}

inline Pda build_grammar_pda(const std::string& grammar_text,
                             std::size_t state_cap = kDefaultDeterminizeStateCap) {
  return build_grammar_pda(parse_grammar(grammar_text), state_cap);
}

struct DeterminismConflict {
  std::string kind;     // "reduce/reduce", "shift/reduce", "scan/scan", "left-recursion"
  StateId state;
  std::string input;    // display of the contested input symbol(s)
  std::string detail;   // rules and stack symbols involved
  std::string example;  // shortest input prefix reaching the state, when found
};

struct DeterminismReport {
  std::vector<DeterminismConflict> conflicts;

  bool ok() const { return conflicts.empty(); }

  std::string to_string() const {
    if (conflicts.empty()) return "deterministic";
    std::string out;
    for (const DeterminismConflict& c : conflicts) {
      out += c.kind + " conflict at state " + std::to_string(c.state);
      if (!c.input.empty()) out += " on input " + c.input;
      if (!c.example.empty()) out += " (example prefix: \"" + c.example + "\")";
      out += ": " + c.detail + "\n";
    }
    return out;
  }
};

namespace detail {

// Shortest input prefix reaching each state, by breadth-first configuration
// search with a bounded stack and budget. Best-effort: states beyond the
// budget keep an empty prefix.
inline std::vector<std::string> shortest_prefixes(const Pda& pda, std::size_t budget = 20000,
                                                  std::size_t stack_cap = 12) {
  std::vector<std::string> prefix(pda.state_count);
  std::vector<bool> have(pda.state_count, false);
  struct Config {
    StateId state;
    std::vector<Symbol> stack;
    std::string text;
  };
  std::deque<Config> work;
  std::unordered_set<std::uint64_t> seen;
  const auto key = [](StateId q, const std::vector<Symbol>& stack) {
    std::uint64_t h = fnv1a64(&q, sizeof q);
    return fnv1a64(stack.data(), stack.size() * sizeof(Symbol), h);
  };
  work.push_back({pda.initial, {pda.initial_stack_symbol}, ""});
  seen.insert(key(pda.initial, work.front().stack));
  have[pda.initial] = true;
  std::size_t visited = 0;
  while (!work.empty() && visited < budget) {
    const Config c = std::move(work.front());
    work.pop_front();
    ++visited;
    for (const PdaEdge& e : pda.out(c.state)) {
      if (!pda.pops_match(e, c.stack)) continue;
      Config n;
      n.state = e.dst;
      n.stack = c.stack;
      pda.apply(e, n.stack);
      if (n.stack.size() > stack_cap) continue;
      n.text = c.text;
      if (!e.is_epsilon()) utf8_encode_one(e.lo, n.text);
      if (!seen.insert(key(n.state, n.stack)).second) continue;
      if (!have[n.state]) {
        have[n.state] = true;
        prefix[n.state] = n.text;
      }
      work.push_back(std::move(n));
    }
  }
  return prefix;
}

inline bool ranges_overlap(Symbol alo, Symbol ahi, Symbol blo, Symbol bhi) {
  return alo <= bhi && blo <= ahi;
}

}  // namespace detail

// Static determinism analysis for grammar-built PDAs. Flags, per reachable
// state: two completed rules (reduce/reduce); a completed rule alongside a
// prediction scan (the machine cannot know whether to finish the nonterminal
// or open a new one); a completed rule whose continuation characters —
// reachable through completion edges — overlap the state's own scans; and
// overlapping scan ranges with different effects. Left recursion recorded at
// build time is reported first. Conservative by design: a pass guarantees at
// most one applicable edge per (state, stack, input symbol).
inline DeterminismReport check_determinism(const Pda& pda) {
  DeterminismReport report;
  const auto rule_name = [&](std::uint32_t r) {
    return r < pda.rule_text.size() ? pda.rule_text[r] : "rule " + std::to_string(r);
  };

  if (!pda.left_recursion_detail.empty())
    report.conflicts.push_back(
        {"left-recursion", pda.initial, "", pda.left_recursion_detail, ""});

  // Reachability over the edge graph, stack ignored (over-approximation).
  std::vector<bool> reachable(pda.state_count, false);
  {
    std::deque<StateId> work{pda.initial};
    reachable[pda.initial] = true;
    while (!work.empty()) {
      const StateId q = work.front();
      work.pop_front();
      for (const PdaEdge& e : pda.out(q)) {
        if (!reachable[e.dst]) {
          reachable[e.dst] = true;
          work.push_back(e.dst);
        }
      }
    }
  }

  const std::vector<std::string> prefixes = detail::shortest_prefixes(pda);

  for (StateId q = 0; q < pda.state_count; ++q) {
    if (!reachable[q]) continue;
    const bool has_completed =
        q < pda.completed_rules_by_state.size() && !pda.completed_rules_by_state[q].empty();

    if (has_completed && pda.completed_rules_by_state[q].size() >= 2) {
      std::string detail_text = "both " + rule_name(pda.completed_rules_by_state[q][0]) + " and " +
                                rule_name(pda.completed_rules_by_state[q][1]) +
                                " complete here; the machine cannot tell which rule produced the "
                                "nonterminal";
      report.conflicts.push_back({"reduce/reduce", q, "", detail_text, prefixes[q]});
    }

    if (has_completed) {
      for (const PdaEdge& e : pda.out(q)) {
        if (e.is_epsilon() || pda.pushes(e).empty()) continue;
        std::string detail_text =
            rule_name(pda.completed_rules_by_state[q][0]) +
            " is complete, but the same input could instead open a new nonterminal (pushing " +
            pda.stack_symbol_name[pda.pushes(e).back()] + ")";
        report.conflicts.push_back(
            {"shift/reduce", q, range_display(e.lo, e.hi, AlphabetKind::Chars), detail_text,
             prefixes[q]});
        break;
      }
    }

    if (has_completed) {
      // Own continuation scans vs scans after completing (one or more pops).
      std::vector<std::pair<Symbol, Symbol>> own;
      for (const PdaEdge& e : pda.out(q)) {
        if (!e.is_epsilon() && pda.pushes(e).empty()) own.push_back({e.lo, e.hi});
      }
      if (!own.empty()) {
        std::vector<bool> seen(pda.state_count, false);
        std::deque<StateId> work;
        for (const PdaEdge& e : pda.out(q)) {
          if (e.is_epsilon() && !seen[e.dst]) {
            seen[e.dst] = true;
            work.push_back(e.dst);
          }
        }
        bool conflicted = false;
        while (!work.empty() && !conflicted) {
          const StateId r = work.front();
          work.pop_front();
          for (const PdaEdge& e : pda.out(r)) {
            if (e.is_epsilon()) {
              if (!seen[e.dst]) {
                seen[e.dst] = true;
                work.push_back(e.dst);
              }
              continue;
            }
            for (const auto& [lo, hi] : own) {
              if (detail::ranges_overlap(lo, hi, e.lo, e.hi)) {
                std::string detail_text =
                    rule_name(pda.completed_rules_by_state[q][0]) +
                    " is complete, but the overlapping input could also continue the rule "
                    "in progress (maximal-munch ambiguity)";
                report.conflicts.push_back(
                    {"shift/reduce", q,
                     range_display(std::max(lo, e.lo), std::min(hi, e.hi), AlphabetKind::Chars),
                     detail_text, prefixes[q]});
                conflicted = true;
                break;
              }
            }
            if (conflicted) break;
          }
        }
      }
    }

    // Overlapping scan ranges with different outcomes.
    std::vector<const PdaEdge*> scans;
    for (const PdaEdge& e : pda.out(q)) {
      if (!e.is_epsilon()) scans.push_back(&e);
    }
    bool scan_conflict = false;
    for (std::size_t i = 0; i < scans.size() && !scan_conflict; ++i) {
      for (std::size_t j = i + 1; j < scans.size() && !scan_conflict; ++j) {
        const PdaEdge& a = *scans[i];
        const PdaEdge& b = *scans[j];
        if (!detail::ranges_overlap(a.lo, a.hi, b.lo, b.hi)) continue;
        const auto pa = pda.pushes(a), pb_ = pda.pushes(b);
        const auto oa = pda.pops(a), ob = pda.pops(b);
        if (a.dst == b.dst && std::equal(pa.begin(), pa.end(), pb_.begin(), pb_.end()) &&
            pa.size() == pb_.size() && std::equal(oa.begin(), oa.end(), ob.begin(), ob.end()) &&
            oa.size() == ob.size())
          continue;
        std::string detail_text = "two scan edges match the same character with different "
                                  "targets or stack effects";
        if (!pa.empty() || !pb_.empty()) {
          detail_text += " (pushing ";
          detail_text += pa.empty() ? "nothing" : pda.stack_symbol_name[pa.back()];
          detail_text += " vs ";
          detail_text += pb_.empty() ? "nothing" : pda.stack_symbol_name[pb_.back()];
          detail_text += ")";
        }
        report.conflicts.push_back(
            {"scan/scan", q,
             range_display(std::max(a.lo, b.lo), std::min(a.hi, b.hi), AlphabetKind::Chars),
             detail_text, prefixes[q]});
        scan_conflict = true;
      }
    }
  }
  return report;
}

}  // namespace tokamata
