#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <limits>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include <json.hpp>

#include "tokamata/constraint.hpp"
#include "tokamata/errors.hpp"
#include "tokamata/vocabulary.hpp"

namespace tokamata {

// ---------------------------------------------------------------------------
// Deterministic randomness.

struct SplitMix64 {
  std::uint64_t state = 0;

  explicit SplitMix64(std::uint64_t seed = 0x9e3779b97f4a7c15ULL) : state(seed) {}

  std::uint64_t next() {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1).
  double next_unit() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  // Uniform in [0, n).
  std::uint64_t next_below(std::uint64_t n) { return n ? next() % n : 0; }
};

namespace detail {

inline std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Standard-normal score derived from a hash key (Box-Muller).
inline float hashed_normal(std::uint64_t key) {
  const std::uint64_t a = mix64(key + 0x9e3779b97f4a7c15ULL);
  const std::uint64_t b = mix64(key ^ 0xc2b2ae3d27d4eb4fULL);
  const double u1 = (static_cast<double>(a >> 11) + 1.0) * 0x1.0p-53;  // (0, 1]
  const double u2 = static_cast<double>(b >> 11) * 0x1.0p-53;
  return static_cast<float>(std::sqrt(-2.0 * std::log(u1)) *
                            std::cos(2.0 * 3.141592653589793 * u2));
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Mock language model: reproducible pseudo-random logits, optionally biased
// toward a scripted string so "the model wants to say X" scenarios can be
// staged.

struct MockLm {
  std::uint64_t seed = 1;
  std::shared_ptr<const Vocabulary> vocabulary;
  std::string bias_target;      // empty = unbiased
  float bias_strength = 0.0f;   // added to tokens that extend bias_target
};

inline std::uint64_t lm_history_start(const MockLm& lm) {
  return detail::mix64(lm.seed ^ 0x746f6b616d617461ULL);
}

inline std::uint64_t lm_history_push(std::uint64_t history_hash, TokenId token) {
  return detail::mix64(history_hash ^ (0x100000001b3ULL * (token + 1)));
}

inline constexpr std::size_t kBiasDiverged = static_cast<std::size_t>(-1);

// Logits over vocab ids 0..V-1 plus an end-of-sequence slot at index V.
// `matched_prefix` is how much of bias_target the decoded text already
// matches, or kBiasDiverged once the output left the scripted string.
inline std::vector<float> mock_logits(const MockLm& lm, std::uint64_t history_hash,
                                      std::size_t matched_prefix = kBiasDiverged) {
  if (!lm.vocabulary) throw PreconditionError("mock model has no vocabulary");
  const std::size_t v = lm.vocabulary->size();
  std::vector<float> out(v + 1);
  for (std::size_t i = 0; i <= v; ++i)
    out[i] = detail::hashed_normal(history_hash ^ detail::mix64(i + 0x5851f42d4c957f2dULL));
  if (lm.bias_strength != 0.0f && !lm.bias_target.empty() &&
      matched_prefix != kBiasDiverged) {
    if (matched_prefix >= lm.bias_target.size()) {
      out[v] += lm.bias_strength;
    } else {
      for (std::size_t i = 0; i < v; ++i) {
        const std::string& t = lm.vocabulary->tokens[i];
        if (!t.empty() && lm.bias_target.compare(matched_prefix, t.size(), t) == 0)
          out[i] += lm.bias_strength;
      }
    }
  }
  return out;
}

namespace detail {

// Tracks how far the decoded text still follows an LM's scripted string.
struct BiasCursor {
  std::size_t pos = 0;
  bool diverged = false;

  std::size_t matched(const MockLm& lm) const {
    return (lm.bias_target.empty() || diverged) ? kBiasDiverged : pos;
  }

  void push(const MockLm& lm, const std::string& token_text) {
    if (diverged || lm.bias_target.empty()) return;
    if (lm.bias_target.compare(pos, token_text.size(), token_text) == 0)
      pos += token_text.size();
    else
      diverged = true;
  }
};

inline std::optional<std::size_t> greedy_pick(const std::vector<float>& logits) {
  std::optional<std::size_t> best;
  float best_score = -std::numeric_limits<float>::infinity();
  for (std::size_t i = 0; i < logits.size(); ++i) {
    if (logits[i] > best_score) {
      best_score = logits[i];
      best = i;
    }
  }
  return best;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Decode loops.

struct DecodeResult {
  std::uint64_t seed = 0;
  std::vector<TokenId> tokens;
  std::string text;
  std::size_t steps = 0;
  bool finished = false;  // end-of-sequence chosen; false means truncated/stuck
  std::size_t speculated = 0;          // draft tokens proposed (speculative only)
  std::size_t speculated_accepted = 0; // of those, accepted by the target

  double acceptance_rate() const {
    return speculated ? static_cast<double>(speculated_accepted) /
                            static_cast<double>(speculated)
                      : 1.0;
  }
};

inline std::string decode_result_json_line(const DecodeResult& r, bool conformant) {
  nlohmann::ordered_json j;
  j["seed"] = r.seed;
  j["tokens"] = r.tokens;
  j["text"] = r.text;
  j["conformant"] = conformant;
  j["steps"] = r.steps;
  j["finished"] = r.finished;
  j["acceptance_rate"] = r.acceptance_rate();
  return j.dump();
}

// Greedy decode under the constraint's masks. Stops when the end-of-sequence
// slot wins (only possible when the finish bit is set) or max_steps runs out.
inline DecodeResult constrained_decode(const MockLm& lm, const CompiledConstraint& c,
                                       std::size_t max_steps) {
  if (max_steps < 1) throw PreconditionError("constrained_decode: max_steps must be >= 1");
  if (!lm.vocabulary || lm.vocabulary->fingerprint != c.vocab_fingerprint)
    throw VocabularyMismatch("decode model and constraint use different vocabularies");
  const std::size_t v = lm.vocabulary->size();

  DecodeResult res;
  res.seed = lm.seed;
  DecodeState ds = initial_state(c);
  std::uint64_t h = lm_history_start(lm);
  detail::BiasCursor cursor;

  while (res.steps < max_steps) {
    ++res.steps;
    const TokenMask mask = allowed_tokens(c, ds);
    const std::vector<float> masked =
        apply_mask(mock_logits(lm, h, cursor.matched(lm)), mask);
    const auto pick = detail::greedy_pick(masked);
    if (!pick) break;  // no token and no finish: stuck, report truncation
    if (*pick == v) {
      res.finished = true;
      break;
    }
    const TokenId t = static_cast<TokenId>(*pick);
    ds = advance(c, std::move(ds), t);
    res.tokens.push_back(t);
    h = lm_history_push(h, t);
    cursor.push(lm, lm.vocabulary->tokens[t]);
  }
  res.text = detokenize(*lm.vocabulary, res.tokens);
  return res;
}

// Greedy decode with no constraint: every non-reserved token plus the
// end-of-sequence slot stays allowed. Used as the conformance baseline.
inline DecodeResult unconstrained_decode(const MockLm& lm, std::size_t max_steps) {
  if (max_steps < 1) throw PreconditionError("unconstrained_decode: max_steps must be >= 1");
  if (!lm.vocabulary) throw PreconditionError("mock model has no vocabulary");
  const std::size_t v = lm.vocabulary->size();
  TokenMask mask(static_cast<std::uint32_t>(v));
  mask.finish = true;
  for (std::size_t i = 0; i < v; ++i)
    if (!lm.vocabulary->is_reserved(static_cast<TokenId>(i)))
      mask.set(static_cast<TokenId>(i));

  DecodeResult res;
  res.seed = lm.seed;
  std::uint64_t h = lm_history_start(lm);
  detail::BiasCursor cursor;
  while (res.steps < max_steps) {
    ++res.steps;
    const std::vector<float> masked =
        apply_mask(mock_logits(lm, h, cursor.matched(lm)), mask);
    const auto pick = detail::greedy_pick(masked);
    if (!pick || *pick == v) {
      res.finished = static_cast<bool>(pick);
      break;
    }
    const TokenId t = static_cast<TokenId>(*pick);
    res.tokens.push_back(t);
    h = lm_history_push(h, t);
    cursor.push(lm, lm.vocabulary->tokens[t]);
  }
  res.text = detokenize(*lm.vocabulary, res.tokens);
  return res;
}

// Draft/verify decoding. The draft proposes up to `block` tokens greedily
// under the shared masks; the target accepts the longest prefix on which its
// own greedy choice agrees, the rejected suffix is rewound, and the first
// disagreeing position takes the target's token instead. With greedy
// policies the output is identical to constrained_decode(target).
inline DecodeResult speculative_decode(const MockLm& draft, const MockLm& target,
                                       const CompiledConstraint& c, std::size_t block,
                                       std::size_t max_steps) {
  if (block < 1) throw PreconditionError("speculative_decode: block must be >= 1");
  if (max_steps < 1) throw PreconditionError("speculative_decode: max_steps must be >= 1");
  if (!draft.vocabulary || !target.vocabulary ||
      draft.vocabulary->fingerprint != c.vocab_fingerprint ||
      target.vocabulary->fingerprint != c.vocab_fingerprint)
    throw VocabularyMismatch("decode models and constraint use different vocabularies");
  const std::size_t v = target.vocabulary->size();

  DecodeResult res;
  res.seed = target.seed;
  DecodeState ds = initial_state(c);

  // Block-start model context, rebuilt from the accepted tokens.
  std::uint64_t h_draft = lm_history_start(draft);
  std::uint64_t h_target = lm_history_start(target);
  detail::BiasCursor cur_draft, cur_target;

  bool done = false;
  while (!done && res.steps < max_steps) {
    // Draft phase: extend the shared state speculatively.
    std::vector<TokenId> proposals;
    std::vector<TokenMask> masks;
    std::uint64_t hd = h_draft;
    detail::BiasCursor cd = cur_draft;
    bool draft_eos = false;
    bool draft_stuck = false;
    while (proposals.size() < block && res.steps + proposals.size() < max_steps) {
      TokenMask mask = allowed_tokens(c, ds);
      const auto pick =
          detail::greedy_pick(apply_mask(mock_logits(draft, hd, cd.matched(draft)), mask));
      if (!pick) {
        draft_stuck = true;
        break;
      }
      masks.push_back(std::move(mask));
      if (*pick == v) {
        draft_eos = true;
        break;
      }
      const TokenId t = static_cast<TokenId>(*pick);
      ds = advance(c, std::move(ds), t);
      proposals.push_back(t);
      hd = lm_history_push(hd, t);
      cd.push(draft, draft.vocabulary->tokens[t]);
    }
    if (proposals.empty() && !draft_eos) {
      if (draft_stuck) break;  // stuck with nothing proposed: truncation
      break;                   // step budget exhausted
    }
    res.speculated += proposals.size() + (draft_eos ? 1 : 0);

    // Verify phase: target replays the same masks greedily.
    std::size_t agreed = 0;
    std::optional<std::size_t> replacement;  // token id, or v for end-of-sequence
    std::uint64_t ht = h_target;
    detail::BiasCursor ct = cur_target;
    const std::size_t positions = proposals.size() + (draft_eos ? 1 : 0);
    for (std::size_t i = 0; i < positions; ++i) {
      const auto pick = detail::greedy_pick(
          apply_mask(mock_logits(target, ht, ct.matched(target)), masks[i]));
      const std::size_t want = (i < proposals.size())
                                   ? static_cast<std::size_t>(proposals[i])
                                   : v;
      if (pick && *pick == want) {
        ++res.steps;
        if (want == v) {
          ++res.speculated_accepted;
          res.finished = true;
          done = true;
          break;
        }
        ++agreed;
        ++res.speculated_accepted;
        ht = lm_history_push(ht, proposals[i]);
        ct.push(target, target.vocabulary->tokens[proposals[i]]);
      } else {
        replacement = pick;
        break;
      }
    }

    // Rewind the rejected suffix, then apply the target's correction.
    const std::size_t rejected = proposals.size() - agreed;
    if (rejected > 0) ds = rewind(std::move(ds), rejected);
    res.tokens.insert(res.tokens.end(), proposals.begin(), proposals.begin() + agreed);
    if (!done && replacement) {
      ++res.steps;
      if (*replacement == v) {
        res.finished = true;
        done = true;
      } else {
        const TokenId t = static_cast<TokenId>(*replacement);
        ds = advance(c, std::move(ds), t);
        res.tokens.push_back(t);
        ht = lm_history_push(ht, t);
        ct.push(target, target.vocabulary->tokens[t]);
      }
    } else if (!done && !replacement && draft_stuck && agreed == proposals.size()) {
      break;  // every proposal accepted but the state is a dead end
    }

    // Rebuild block-start context along the accepted history.
    h_draft = lm_history_start(draft);
    cur_draft = detail::BiasCursor{};
    for (TokenId t : res.tokens) {
      h_draft = lm_history_push(h_draft, t);
      cur_draft.push(draft, draft.vocabulary->tokens[t]);
    }
    h_target = ht;
    cur_target = ct;
  }
  res.text = detokenize(*target.vocabulary, res.tokens);
  return res;
}

// ---------------------------------------------------------------------------
// Brute-force oracles.

// Every accepted token sequence of length <= max_len, found by stepping the
// engine's own masks (the "token side" of the equivalence tests).
inline std::set<std::vector<TokenId>> brute_force_accepted_set(
    const CompiledConstraint& c, std::size_t max_len, std::size_t budget = 2000000) {
  std::set<std::vector<TokenId>> out;
  std::size_t visited = 0;
  std::vector<TokenId> seq;
  const auto dfs = [&](auto&& self, const DecodeState& ds) -> void {
    if (++visited > budget)
      throw ResourceLimitError("brute-force enumeration exceeded its budget");
    const TokenMask mask = allowed_tokens(c, ds);
    if (mask.finish) out.insert(seq);
    if (seq.size() == max_len) return;
    for (TokenId t : mask.ids()) {
      seq.push_back(t);
      self(self, advance(c, ds, t));
      seq.pop_back();
    }
  };
  dfs(dfs, initial_state(c));
  return out;
}

namespace detail {

// Character-level stepping used by the independent oracle; deliberately
// avoids the engine's trie/mask machinery.
struct OracleRegexConfig {
  StateId state;
};

inline std::optional<StateId> oracle_dfa_step(const Fsa& dfa, StateId q, Symbol ch) {
  for (const FsaEdge& e : dfa.out(q)) {
    if (e.lo == kEpsilon) continue;
    if (is_terminal_label_symbol(e.lo))
      throw PreconditionError(
          "the detokenize-then-match oracle does not support terminal labels");
    if (e.lo <= ch && ch <= e.hi) return e.dst;
  }
  return std::nullopt;
}

using PdaConfig = std::pair<StateId, std::vector<Symbol>>;

inline void oracle_pda_closure(const Pda& pda, std::set<PdaConfig>& configs) {
  std::deque<PdaConfig> work(configs.begin(), configs.end());
  while (!work.empty()) {
    const PdaConfig cur = std::move(work.front());
    work.pop_front();
    for (const PdaEdge& e : pda.out(cur.first)) {
      if (e.lo != kEpsilon) continue;
      if (!pda.pops_match(e, cur.second)) continue;
      PdaConfig next{e.dst, cur.second};
      pda.apply(e, next.second);
      if (configs.insert(next).second) work.push_back(std::move(next));
    }
  }
}

inline std::set<PdaConfig> oracle_pda_step(const Pda& pda, const std::set<PdaConfig>& configs,
                                           Symbol ch) {
  std::set<PdaConfig> next;
  for (const PdaConfig& cur : configs) {
    for (const PdaEdge& e : pda.out(cur.first)) {
      if (e.lo == kEpsilon || ch < e.lo || ch > e.hi) continue;
      if (!pda.pops_match(e, cur.second)) continue;
      PdaConfig n{e.dst, cur.second};
      pda.apply(e, n.second);
      next.insert(std::move(n));
    }
  }
  oracle_pda_closure(pda, next);
  return next;
}

}  // namespace detail

// The same accepted set computed the other way around: detokenize each token
// sequence and run the characters through the underlying char-level
// automaton directly.
inline std::set<std::vector<TokenId>> detokenize_match_accepted_set(
    const CompiledConstraint& c, std::size_t max_len, std::size_t budget = 2000000) {
  if (!c.vocabulary) throw PreconditionError("constraint holds no vocabulary");
  const Vocabulary& vocab = *c.vocabulary;
  std::set<std::vector<TokenId>> out;
  std::size_t visited = 0;
  std::vector<TokenId> seq;

  if (c.kind == ConstraintKind::Regex) {
    const auto dfs = [&](auto&& self, StateId q) -> void {
      if (++visited > budget)
        throw ResourceLimitError("oracle enumeration exceeded its budget");
      if (c.char_dfa.is_final(q)) out.insert(seq);
      if (seq.size() == max_len) return;
      for (TokenId t = 0; t < vocab.size(); ++t) {
        if (vocab.is_reserved(t)) continue;
        std::optional<StateId> cur = q;
        for (std::size_t i = 0; cur && i < vocab.symbols[t].size(); ++i)
          cur = detail::oracle_dfa_step(c.char_dfa, *cur, vocab.symbols[t][i]);
        if (!cur) continue;
        seq.push_back(t);
        self(self, *cur);
        seq.pop_back();
      }
    };
    dfs(dfs, c.char_dfa.initial);
    return out;
  }

  std::set<detail::PdaConfig> start{
      {c.pda.initial, std::vector<Symbol>{c.pda.initial_stack_symbol}}};
  detail::oracle_pda_closure(c.pda, start);
  const auto accepts = [&](const std::set<detail::PdaConfig>& configs) {
    for (const auto& [q, stack] : configs)
      if (c.pda.is_final(q) && stack.empty()) return true;
    return false;
  };
  const auto dfs = [&](auto&& self, const std::set<detail::PdaConfig>& configs) -> void {
    if (++visited > budget)
      throw ResourceLimitError("oracle enumeration exceeded its budget");
    if (accepts(configs)) out.insert(seq);
    if (seq.size() == max_len) return;
    for (TokenId t = 0; t < vocab.size(); ++t) {
      if (vocab.is_reserved(t)) continue;
      std::set<detail::PdaConfig> cur = configs;
      for (std::size_t i = 0; !cur.empty() && i < vocab.symbols[t].size(); ++i)
        cur = detail::oracle_pda_step(c.pda, cur, vocab.symbols[t][i]);
      if (cur.empty()) continue;
      seq.push_back(t);
      self(self, cur);
      seq.pop_back();
    }
  };
  dfs(dfs, start);
  return out;
}

// ---------------------------------------------------------------------------
// Vocabulary generators and a string sampler for compiled patterns.

// Small random vocabulary of distinct tokens over the given alphabet.
inline Vocabulary random_vocabulary(std::uint64_t seed, std::size_t token_count,
                                    std::size_t min_len, std::size_t max_len,
                                    const std::string& alphabet = "abcdef") {
  if (alphabet.empty() || min_len < 1 || max_len < min_len)
    throw PreconditionError("random_vocabulary: bad parameters");
  SplitMix64 rng(seed);
  std::unordered_set<std::string> used;
  std::vector<std::string> tokens;
  std::size_t attempts = 0;
  while (tokens.size() < token_count) {
    if (++attempts > token_count * 1000 + 1000)
      throw ResourceLimitError("random_vocabulary: alphabet too small for distinct tokens");
    const std::size_t len = min_len + rng.next_below(max_len - min_len + 1);
    std::string t;
    for (std::size_t i = 0; i < len; ++i) t += alphabet[rng.next_below(alphabet.size())];
    if (used.insert(t).second) tokens.push_back(std::move(t));
  }
  return Vocabulary::make(std::move(tokens));
}

// Benchmark-scale vocabulary: every printable ASCII character as a
// single-char token, then random tokens with power-law lengths. The last id
// is an empty-string end-of-sequence token.
inline Vocabulary synthetic_vocabulary(std::size_t size, std::uint64_t seed = 42) {
  if (size < 100) throw PreconditionError("synthetic_vocabulary: size must be >= 100");
  SplitMix64 rng(seed);
  std::unordered_set<std::string> used;
  std::vector<std::string> tokens;
  tokens.reserve(size);
  for (char ch = 0x20; ch < 0x7f; ++ch) {
    tokens.emplace_back(1, ch);
    used.insert(tokens.back());
  }
  tokens.emplace_back("\n");
  used.insert("\n");
  tokens.emplace_back("\t");
  used.insert("\t");

  static constexpr char kChars[] =
      "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789 .,:;-_'\"(){}[]";
  const std::size_t n_chars = sizeof(kChars) - 1;
  while (tokens.size() + 1 < size) {
    const double u = rng.next_unit();
    const std::size_t len = std::min<std::size_t>(
        24, static_cast<std::size_t>(std::pow(1.0 - u, -0.66)));
    std::string t;
    for (std::size_t i = 0; i < std::max<std::size_t>(1, len); ++i)
      t += kChars[rng.next_below(n_chars)];
    if (used.insert(t).second) tokens.push_back(std::move(t));
  }
  tokens.emplace_back("");  // end-of-sequence
  const TokenId eos = static_cast<TokenId>(tokens.size() - 1);
  return Vocabulary::make(std::move(tokens), VocabularyMode::Characters, eos);
}

// Samples a random accepted string from a compiled char-level DFA, favoring
// friendly printable characters whenever a range allows them. Returns
// nullopt when no accepted string fits in max_len.
inline std::optional<std::string> dfa_sample_string(const Fsa& dfa, SplitMix64& rng,
                                                    std::size_t max_len = 512) {
  constexpr std::size_t kInf = static_cast<std::size_t>(-1);
  std::vector<std::size_t> dist(dfa.state_count, kInf);
  {
    std::deque<StateId> work;
    for (StateId q = 0; q < dfa.state_count; ++q) {
      if (dfa.is_final(q)) {
        dist[q] = 0;
        work.push_back(q);
      }
    }
    // Reverse BFS over non-label edges.
    std::vector<std::vector<StateId>> preds(dfa.state_count);
    for (const FsaEdge& e : dfa.edges)
      if (e.lo != kEpsilon && !detail::is_terminal_label_symbol(e.lo))
        preds[e.dst].push_back(e.src);
    while (!work.empty()) {
      const StateId q = work.front();
      work.pop_front();
      for (StateId p : preds[q]) {
        if (dist[p] == kInf) {
          dist[p] = dist[q] + 1;
          work.push_back(p);
        }
      }
    }
  }
  if (dfa.state_count == 0 || dist[dfa.initial] == kInf || dist[dfa.initial] > max_len)
    return std::nullopt;

  static constexpr char kNice[] =
      "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789 _.,-:";
  static constexpr char kSteer[] =
      "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789 _.,-:\"{}[]";
  // 2: contains a friendly or structural char; 1: printable ASCII; 0: rest.
  const auto edge_tier = [&](const FsaEdge& e) -> int {
    for (std::size_t i = 0; i + 1 < sizeof(kSteer); ++i) {
      const Symbol s = static_cast<unsigned char>(kSteer[i]);
      if (e.lo <= s && s <= e.hi) return 2;
    }
    return (e.lo <= 0x7e && e.hi >= 0x20) ? 1 : 0;
  };
  const auto pick_char = [&](Symbol lo, Symbol hi) -> Symbol {
    std::vector<Symbol> nice;
    for (std::size_t i = 0; i + 1 < sizeof(kNice); ++i) {
      const Symbol s = static_cast<unsigned char>(kNice[i]);
      if (lo <= s && s <= hi) nice.push_back(s);
    }
    if (!nice.empty()) return nice[rng.next_below(nice.size())];
    if (lo <= 0x7e && hi >= 0x20)  // any printable ASCII inside the range
      return std::max<Symbol>(lo, 0x20) +
             rng.next_below(std::min<Symbol>(hi, 0x7e) - std::max<Symbol>(lo, 0x20) + 1);
    return lo;
  };

  std::string out;
  StateId q = dfa.initial;
  std::size_t remaining = max_len;
  while (true) {
    std::vector<std::pair<const FsaEdge*, int>> viable;
    int best_tier = -1;
    for (const FsaEdge& e : dfa.out(q)) {
      if (e.lo == kEpsilon || detail::is_terminal_label_symbol(e.lo) ||
          dist[e.dst] == kInf || dist[e.dst] + 1 > remaining)
        continue;
      const int tier = edge_tier(e);
      best_tier = std::max(best_tier, tier);
      viable.push_back({&e, tier});
    }
    if (dfa.is_final(q) && (viable.empty() || rng.next_unit() < 0.35)) return out;
    if (viable.empty()) return std::nullopt;  // unreachable when dist is maintained
    // Usually stay in the best tier; occasionally dip one tier for variety
    // (e.g. escape sequences), never below printable unless forced.
    int floor_tier = best_tier;
    if (best_tier == 2 && rng.next_unit() < 0.15) floor_tier = 1;
    std::vector<const FsaEdge*> pool;
    for (const auto& [e, tier] : viable)
      if (tier >= floor_tier) pool.push_back(e);
    const FsaEdge& e = *pool[rng.next_below(pool.size())];
    utf8_encode_one(pick_char(e.lo, e.hi), out);
    q = e.dst;
    --remaining;
  }
}

}  // namespace tokamata
