// Acceptance harness: exercises the toolkit's end-to-end guarantees and prints
// one PASS/FAIL line per criterion. The exit status is the number of failed
// criteria, so a zero exit means every guarantee held on this machine.
//
// Tolerances and workload sizes are pinned as constants right below the
// includes; nothing here adapts to the host.

#include <tokamata/tokamata.hpp>

#include <algorithm>
#include <bit>
#include <chrono>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <iomanip>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"

namespace tk = tokamata;

namespace {

// ---------------------------------------------------------------------------
// Pinned workload sizes and tolerances.
// ---------------------------------------------------------------------------

// 1. Detokenizing transducer vs direct concatenation.
constexpr int kTransduceVocabularies = 100;
constexpr int kTransduceSequencesPerVocabulary = 1000;
constexpr std::size_t kTransduceMaxTokens = 50;
constexpr double kTransduceBudgetSeconds = 10.0;

// 2. Regex constraints: masked enumeration vs detokenize-then-match.
constexpr std::size_t kRegexFixtureMinimum = 20;
constexpr std::size_t kRegexOracleMaxLen = 5;
constexpr double kRegexOracleBudgetSeconds = 60.0;

// 3. Grammar constraints: masked enumeration vs detokenize-then-match.
constexpr std::size_t kGrammarFixtureMinimum = 5;
constexpr std::size_t kGrammarOracleMaxLen = 6;

// 4. Mock-LM decoding conformance.
constexpr int kDecodesPerFixture = 1000;
constexpr std::size_t kDecodeMaxSteps = 256;
constexpr std::size_t kSchemaDecodeMaxSteps = 1024;

// 5. Latency budgets at a 262144-token vocabulary.
constexpr std::size_t kBenchVocabularySize = 262144;
constexpr std::size_t kBenchCompileRuns = 10;
constexpr std::size_t kBenchSteps = 12000;  // comfortably above the 10k floor
constexpr double kCompileBudgetMs = 250.0;  // baseline-corrected, per pattern
constexpr double kStepBudgetUs = 50.0;      // mean mask+advance, per pattern
constexpr double kStepRatioLimit = 3.0;     // structured object vs flat choice

// 6. Substring acceptor size and language.
constexpr std::size_t kSubstringStateSlackNumerator = 2;  // bound is 2|u| + 2
constexpr std::size_t kSubstringProbeMaxLen = 5;
constexpr std::size_t kSubstringBruteMaxReference = 30;

// 7. Rewind and speculative equivalence.
constexpr int kInterleavedOps = 10000;  // advance/rewind ops across fixtures
constexpr int kSpeculativeSeeds = 100;
constexpr std::size_t kSpeculativeMaxBlock = 8;

// 8. Schema patterns vs the independent validator.
constexpr int kSchemaFixtureCount = 10;
constexpr int kSamplesPerSchema = 100;
constexpr int kMutantsPerSchema = 10;

// ---------------------------------------------------------------------------
// Small utilities.
// ---------------------------------------------------------------------------

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Stopwatch {
  std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  }
};

std::string fmt(double v, int prec = 1) {
  std::ostringstream o;
  o << std::fixed << std::setprecision(prec) << v;
  return o.str();
}

tk::TokenId id_of(const tk::Vocabulary& v, const std::string& token) {
  for (tk::TokenId i = 0; i < v.size(); ++i)
    if (v.tokens[i] == token) return i;
  throw tk::PreconditionError("fixture token not in vocabulary: " + token);
}

// Random set-bit pick so repeated visits take different branches.
std::optional<tk::TokenId> pick_allowed(const tk::TokenMask& mask, tk::SplitMix64& rng) {
  const std::size_t words = mask.bits.size();
  if (words == 0) return std::nullopt;
  std::size_t w = rng.next_below(words);
  for (std::size_t scanned = 0; scanned <= words; ++scanned, w = (w + 1) % words) {
    if (mask.bits[w] == 0) continue;
    std::uint64_t word = mask.bits[w];
    int target = static_cast<int>(rng.next_below(static_cast<std::uint64_t>(std::popcount(word))));
    while (target-- > 0) word &= word - 1;
    return static_cast<tk::TokenId>(w * 64 + static_cast<std::size_t>(std::countr_zero(word)));
  }
  return std::nullopt;
}

bool masks_equal(const tk::TokenMask& a, const tk::TokenMask& b) {
  return a.finish == b.finish && a.bits == b.bits;
}

// ---------------------------------------------------------------------------
// Criterion 1: the detokenizing transducer (raw and prefix-compacted) maps
// every token sequence to exactly the concatenation of the token strings.
// ---------------------------------------------------------------------------

Outcome criterion_transduction() {
  Stopwatch sw;
  long sequences = 0;
  for (int vi = 1; vi <= kTransduceVocabularies; ++vi) {
    const std::size_t want =
        1 + static_cast<std::size_t>(vi * 7) % kTransduceMaxTokens;
    const tk::Vocabulary vocab =
        tk::random_vocabulary(static_cast<std::uint64_t>(vi) * 1001, want, 1, 6);
    if (vocab.size() == 0) return {false, "random vocabulary came back empty"};
    const tk::Fst raw = tk::build_detokenizing_fst(vocab);
    const tk::Fst compact = tk::compact_trie(raw);
    tk::SplitMix64 rng(static_cast<std::uint64_t>(vi) * 977 + 13);
    for (int si = 0; si < kTransduceSequencesPerVocabulary; ++si) {
      const std::size_t len = rng.next_below(17);
      std::vector<tk::Symbol> ids;
      std::string expect;
      for (std::size_t k = 0; k < len; ++k) {
        const tk::TokenId id = static_cast<tk::TokenId>(rng.next_below(vocab.size()));
        ids.push_back(id);
        expect += vocab.tokens[id];
      }
      const auto out_raw = tk::fst_transduce(raw, ids);
      const auto out_compact = tk::fst_transduce(compact, ids);
      if (!out_raw || !out_compact)
        return {false, "transduction unexpectedly rejected a valid sequence (vocabulary " +
                           std::to_string(vi) + ")"};
      if (tk::utf8_encode(*out_raw) != expect || *out_compact != *out_raw)
        return {false, "transduction output diverged from concatenation (vocabulary " +
                           std::to_string(vi) + ")"};
      ++sequences;
    }
  }
  const double secs = sw.seconds();
  if (secs >= kTransduceBudgetSeconds)
    return {false, "exact on " + std::to_string(sequences) + " sequences but took " +
                       fmt(secs) + " s (budget " + fmt(kTransduceBudgetSeconds) + " s)"};
  return {true, std::to_string(kTransduceVocabularies) + " vocabularies x " +
                    std::to_string(kTransduceSequencesPerVocabulary) +
                    " sequences, raw and compacted transducers exact in " + fmt(secs) + " s"};
}

// ---------------------------------------------------------------------------
// Criterion 2: for every regex fixture, enumerating token sequences through
// the engine's masks agrees exactly with detokenizing each candidate sequence
// and matching the concatenated text against the character automaton.
// ---------------------------------------------------------------------------

struct RegexFixture {
  std::string name;
  std::string pattern;
  std::vector<std::string> tokens;
  bool with_eos = false;
};

std::vector<RegexFixture> regex_fixtures() {
  const std::vector<std::string> call_tokens = {"fo", "o(1", "2",   "3)", "bar", "(",  "456",
                                                ")",  "foo", "123", "ba", "r(4", "5",  "6)"};
  return {
      {"word-repeat", "(foo)+d", {"f", "oo", "foo", "for", "food"}},
      {"api-calls", "(foo|bar)\\((123|456)\\)", call_tokens},
      {"letters-then-digit", "[ab]{1,4}\\d", {"a", "b", "ab", "1", "2", "b1"}},
      {"optional-letter", "colou?r", {"c", "o", "l", "u", "r", "co", "lo", "ou", "ur", "colour"}},
      {"keyword-choice", "Red|Green|Blue",
       {"R", "G", "B", "ed", "reen", "lue", "Red", "Green", "Blue", "e", "d"}},
      {"star", "a*", {"a", "aa", "aaa"}},
      {"plus-pairs", "(ab)+", {"a", "b", "ab", "ba", "abab"}},
      {"digit-run", "\\d{2,4}", {"1", "2", "3", "12", "34", "123", "9"}},
      {"negated-class", "[^a]b*", {"a", "b", "x", "xb", "bb"}},
      {"dot", "a.c", {"a", "b", "c", "x", "ax", "bc"}},
      {"clock", "[0-2]\\d:[0-5]\\d", {"0", "1", "2", "5", ":", "12", "2:", "30", "0:"}},
      {"substring", "(?P<SUBSTRING_OF>banana)", {"b", "a", "n", "ba", "an", "na", "nan"}},
      {"until-stop", "(?P<TEXT_UNTIL>END)", {"E", "N", "D", "EN", "ND", "END", "x", "xE"}},
      {"quoted-text", "(?P<QUOTED_TEXT>)", {"\"", "a", " ", "\\", "n", "a\"", "\\n"}},
      {"unquoted-text", "(?P<UNQUOTED_TEXT>)", {"a", "b", " ", ":", "ab", "a ", "b:"}},
      {"delimited-list", "(?P<DELIMITED_LIST>item=\\d;delim=, )",
       {"1", "2", ",", ", ", "12", ", 1", " "}},
      {"delimited-subsequence", "(?P<DELIMITED_SUBSEQUENCE_OF>items=aa,b,cc;delim=-)",
       {"a", "aa", "b", "cc", "-", "aa-", "-b", "c"}},
      {"empty-language", "xy", {"x", "z"}},
      {"epsilon-language", "a?", {"a"}},
      {"nested-groups", "((a|b)c)*", {"a", "b", "c", "ac", "bc", "ca"}},
      {"multibyte", "h\xc3\xa9llo", {"h", "\xc3\xa9", "llo", "h\xc3\xa9", "hello"}},
      {"reserved-excluded", "(foo)+d", {"f", "oo", "foo", "for", "food"}, true},
  };
}

Outcome criterion_regex_oracle() {
  Stopwatch sw;
  const auto fixtures = regex_fixtures();
  if (fixtures.size() < kRegexFixtureMinimum)
    return {false, "only " + std::to_string(fixtures.size()) + " fixtures defined"};
  std::size_t total_accepted = 0;
  for (const RegexFixture& f : fixtures) {
    const auto vocab = testutil::make_vocab(f.tokens, f.with_eos);
    const tk::CompiledConstraint c = tk::compile_regex_constraint(f.pattern, vocab);
    const auto brute = tk::brute_force_accepted_set(c, kRegexOracleMaxLen);
    const auto detok = tk::detokenize_match_accepted_set(c, kRegexOracleMaxLen);
    if (brute != detok)
      return {false, "routes disagree on fixture '" + f.name + "' (" +
                         std::to_string(brute.size()) + " vs " + std::to_string(detok.size()) +
                         " sequences)"};
    total_accepted += brute.size();
    if (f.name == "word-repeat" || f.name == "reserved-excluded") {
      const tk::TokenId food = id_of(*vocab, "food");
      const tk::TokenId foo = id_of(*vocab, "foo");
      if (!brute.count({food}) || !brute.count({foo, food}))
        return {false, "fixture '" + f.name + "' is missing a known member sequence"};
    }
    if (f.name == "api-calls") {
      const tk::Vocabulary& v = *vocab;
      const std::vector<std::vector<tk::TokenId>> spellings = {
          {id_of(v, "fo"), id_of(v, "o(1"), id_of(v, "2"), id_of(v, "3)")},
          {id_of(v, "bar"), id_of(v, "("), id_of(v, "456"), id_of(v, ")")},
          {id_of(v, "foo"), id_of(v, "("), id_of(v, "123"), id_of(v, ")")},
          {id_of(v, "ba"), id_of(v, "r(4"), id_of(v, "5"), id_of(v, "6)")},
      };
      for (const auto& s : spellings)
        if (!brute.count(s))
          return {false, "a cross-boundary call spelling is missing from 'api-calls'"};
    }
    if (f.name == "empty-language" && !brute.empty())
      return {false, "'empty-language' accepted a sequence"};
    if (f.name == "epsilon-language" && !brute.count({}))
      return {false, "'epsilon-language' rejected the empty sequence"};
  }
  if (total_accepted == 0) return {false, "every fixture produced an empty language"};
  const double secs = sw.seconds();
  if (secs >= kRegexOracleBudgetSeconds)
    return {false, "routes agree but took " + fmt(secs) + " s (budget " +
                       fmt(kRegexOracleBudgetSeconds) + " s)"};
  return {true, std::to_string(fixtures.size()) + " fixtures, sequences up to length " +
                    std::to_string(kRegexOracleMaxLen) + ", both routes equal (" +
                    std::to_string(total_accepted) + " accepted) in " + fmt(secs) + " s"};
}

// ---------------------------------------------------------------------------
// Criterion 3: the same dual-route agreement for grammar (pushdown)
// constraints, including nesting that no regular pattern can express.
// ---------------------------------------------------------------------------

struct GrammarFixture {
  std::string name;
  std::string grammar;
  std::vector<std::string> tokens;
};

const char kJsonGrammarText[] =
    "# JSON values, canonical one-space style\n"
    "value -> object | array | /\"([^\"\\\\]|\\\\[\"\\\\nrtu\\/bf])*\"/ | "
    "/-?(0|[1-9][0-9]*)(\\.[0-9]+)?([eE][+-]?[0-9]+)?/ | /true/ | /false/ | /null/\n"
    "object -> /\\{ ?\\}/ | /\\{ ?/ members\n"
    "members -> pair /\\}/ | pair /, / members\n"
    "pair -> /\"([^\"\\\\]|\\\\[\"\\\\nrtu\\/bf])*\": / value\n"
    "array -> /\\[ ?\\]/ | /\\[ ?/ elements\n"
    "elements -> value /\\]/ | value /, / elements\n";

std::vector<GrammarFixture> grammar_fixtures() {
  return {
      {"nested-pairs", "S -> /a/ S /b/ | /ab/\n", {"a", "b", "bb", "aaab"}},
      {"call-grammar",
       "S -> F /\\(/ N /\\)/\nF -> /foo/ | /bar/\nN -> /123/ | /456/\n",
       {"fo", "o(1", "2", "3)", "bar", "(", "456", ")", "foo", "123", "ba", "r(4", "5", "6)"}},
      {"nested-parens", "S -> /\\(/ S /\\)/ | /\\(\\)/\n", {"(", ")", "()", "((", "))"}},
      {"arithmetic", "E -> /\\d/ | /\\(/ E /\\+/ E /\\)/\n",
       {"1", "2", "+", "(", ")", "(1", "+2"}},
      {"json-value", kJsonGrammarText,
       {"{", "}", "[", "]", ", ", "1", "true", "\"a\"", "\"a\": ", "{}", "[1"}},
      {"bracket-list", "L -> /\\[/ I\nI -> /x/ /,/ I | /x/ /\\]/\n",
       {"[", "]", "x", ",", "x,", ",x", "x]"}},
  };
}

Outcome criterion_grammar_oracle() {
  Stopwatch sw;
  const auto fixtures = grammar_fixtures();
  if (fixtures.size() < kGrammarFixtureMinimum)
    return {false, "only " + std::to_string(fixtures.size()) + " fixtures defined"};
  std::size_t total_accepted = 0;
  for (const GrammarFixture& f : fixtures) {
    const auto vocab = testutil::make_vocab(f.tokens);
    const tk::CompiledConstraint c = tk::compile_grammar_constraint(f.grammar, vocab);
    const auto brute = tk::brute_force_accepted_set(c, kGrammarOracleMaxLen);
    const auto detok = tk::detokenize_match_accepted_set(c, kGrammarOracleMaxLen);
    if (brute != detok)
      return {false, "routes disagree on fixture '" + f.name + "' (" +
                         std::to_string(brute.size()) + " vs " + std::to_string(detok.size()) +
                         " sequences)"};
    total_accepted += brute.size();
    if (f.name == "nested-pairs") {
      const tk::Vocabulary& v = *vocab;
      if (!brute.count({id_of(v, "a"), id_of(v, "b")}) ||
          !brute.count({id_of(v, "aaab"), id_of(v, "bb")}))
        return {false, "'nested-pairs' is missing a known member sequence"};
      for (const auto& seq : brute) {
        const std::string s = tk::detokenize(v, seq);
        const std::size_t n = s.size() / 2;
        if (s.size() < 2 || s.size() % 2 != 0 ||
            s != std::string(n, 'a') + std::string(n, 'b'))
          return {false, "'nested-pairs' accepted a string outside the language: " + s};
      }
    }
    if (f.name == "call-grammar") {
      const tk::Vocabulary& v = *vocab;
      const std::vector<std::vector<tk::TokenId>> spellings = {
          {id_of(v, "fo"), id_of(v, "o(1"), id_of(v, "2"), id_of(v, "3)")},
          {id_of(v, "bar"), id_of(v, "("), id_of(v, "456"), id_of(v, ")")},
          {id_of(v, "foo"), id_of(v, "("), id_of(v, "123"), id_of(v, ")")},
          {id_of(v, "ba"), id_of(v, "r(4"), id_of(v, "5"), id_of(v, "6)")},
      };
      for (const auto& s : spellings)
        if (!brute.count(s))
          return {false, "a cross-boundary call spelling is missing from 'call-grammar'"};
    }
  }
  if (total_accepted == 0) return {false, "every fixture produced an empty language"};
  return {true, std::to_string(fixtures.size()) + " fixtures, sequences up to length " +
                    std::to_string(kGrammarOracleMaxLen) + ", both routes equal (" +
                    std::to_string(total_accepted) + " accepted) in " + fmt(sw.seconds()) + " s"};
}

// ---------------------------------------------------------------------------
// Criterion 4: constrained mock-LM decoding is 100% conformant over seeded
// runs, while unconstrained decoding from the same seeds is not.
// ---------------------------------------------------------------------------

const char kSheetSchema[] = R"({
  "type": "object",
  "properties": {
    "name": {"enum": ["Grok", "Mary", "Sue"]},
    "class": {"enum": ["Warrior", "Rogue", "Sorceror"]},
    "life": {"type": "integer"},
    "mana": {"type": "integer"}
  },
  "required": ["name", "class", "life", "mana"]
})";

struct DecodeFixture {
  std::string name;
  tk::CompiledConstraint constraint;
  std::shared_ptr<const tk::Vocabulary> vocab;
  std::function<bool(const std::string&)> conforms;
  std::size_t max_steps = kDecodeMaxSteps;
};

Outcome criterion_decoding() {
  Stopwatch sw;
  std::vector<DecodeFixture> fixtures;

  {
    const std::string pattern = "Red|Orange|Yellow|Green|Blue|Indigo|Violet";
    auto vocab = testutil::make_vocab({"R", "O", "Y", "G", "B", "I", "V", "ed", "range", "ellow",
                                       "reen", "lue", "ndigo", "iolet", "Red", "Orange"},
                                      true);
    fixtures.push_back({"color-choice", tk::compile_regex_constraint(pattern, vocab), vocab,
                        [pattern](const std::string& s) {
                          return testutil::ecma_accepts(pattern, s);
                        }});
  }
  {
    const std::string pattern = "(foo)+d";
    auto vocab = testutil::make_vocab({"f", "oo", "foo", "for", "food"}, true);
    fixtures.push_back({"word-repeat", tk::compile_regex_constraint(pattern, vocab), vocab,
                        [pattern](const std::string& s) {
                          return testutil::ecma_accepts(pattern, s);
                        }});
  }
  {
    const std::string pattern = "[0-2]\\d:[0-5]\\d";
    auto vocab = testutil::make_vocab(
        {"0", "1", "2", "3", "5", "9", ":", "12", "30", "0:", ":5"}, true);
    fixtures.push_back({"clock", tk::compile_regex_constraint(pattern, vocab), vocab,
                        [pattern](const std::string& s) {
                          return testutil::ecma_accepts(pattern, s);
                        }});
  }
  {
    auto vocab = testutil::make_vocab({"a", "b", "bb"}, true);
    fixtures.push_back({"nested-pairs",
                        tk::compile_grammar_constraint("S -> /a/ S /b/ | /ab/\n", vocab), vocab,
                        [](const std::string& s) {
                          const std::size_t n = s.size() / 2;
                          return s.size() >= 2 && s.size() % 2 == 0 &&
                                 s == std::string(n, 'a') + std::string(n, 'b');
                        }});
  }
  {
    const auto schema = tk::parse_schema_json(kSheetSchema);
    const std::string pattern = tk::json_schema_to_regex(schema);
    auto vocab = std::make_shared<const tk::Vocabulary>(tk::synthetic_vocabulary(128));
    fixtures.push_back({"character-sheet", tk::compile_regex_constraint(pattern, vocab), vocab,
                        [schema](const std::string& s) {
                          return testutil::schema_valid_text(schema, s);
                        },
                        kSchemaDecodeMaxSteps});
  }

  std::ostringstream summary;
  for (const DecodeFixture& f : fixtures) {
    int constrained_ok = 0;
    int unconstrained_ok = 0;
    for (int seed = 1; seed <= kDecodesPerFixture; ++seed) {
      tk::MockLm lm;
      lm.seed = static_cast<std::uint64_t>(seed);
      lm.vocabulary = f.vocab;
      const tk::DecodeResult res = tk::constrained_decode(lm, f.constraint, f.max_steps);
      if (res.finished && f.conforms(res.text) &&
          tk::constraint_accepts(f.constraint, res.tokens))
        ++constrained_ok;
      const tk::DecodeResult raw = tk::unconstrained_decode(lm, f.max_steps);
      if (raw.finished && f.conforms(raw.text)) ++unconstrained_ok;
    }
    if (constrained_ok != kDecodesPerFixture)
      return {false, "fixture '" + f.name + "': only " + std::to_string(constrained_ok) + "/" +
                         std::to_string(kDecodesPerFixture) +
                         " constrained decodes were conformant"};
    if (unconstrained_ok >= kDecodesPerFixture)
      return {false, "fixture '" + f.name +
                         "': unconstrained decoding was fully conformant, so the comparison "
                         "is vacuous"};
    summary << (summary.tellp() > 0 ? ", " : "") << f.name << " " << constrained_ok << "/"
            << kDecodesPerFixture << " (unconstrained " << unconstrained_ok << ")";
  }
  return {true, summary.str() + " in " + fmt(sw.seconds()) + " s"};
}

// ---------------------------------------------------------------------------
// Criterion 5: compile-time and per-step latency budgets at a 262144-token
// vocabulary, with compile times corrected by a trivial-pattern baseline.
// ---------------------------------------------------------------------------

const char kGameSchema[] = R"({
  "type": "object",
  "properties": {
    "name": {"type": "string"},
    "class": {"enum": ["Warrior", "Rogue", "Sorceror"]},
    "life": {"type": "integer"},
    "mana": {"type": "integer"},
    "equipment": {"type": "array", "items": {
      "type": "object",
      "properties": {
        "name": {"type": "string"},
        "durability": {"type": "integer"},
        "quality": {"enum": ["Normal", "Magic", "Unique"]}},
      "required": ["name", "durability", "quality"]}}},
  "required": ["name", "class", "life", "mana", "equipment"]
})";

double time_compile_ms(const std::string& pattern,
                       const std::shared_ptr<const tk::Vocabulary>& vocab) {
  (void)tk::compile_regex_constraint(pattern, vocab);  // warm-up
  double total = 0;
  for (std::size_t i = 0; i < kBenchCompileRuns; ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    const tk::CompiledConstraint c = tk::compile_regex_constraint(pattern, vocab);
    total += std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    (void)c;
  }
  return total / static_cast<double>(kBenchCompileRuns) * 1e3;
}

double time_steps_us(const tk::CompiledConstraint& c, std::uint64_t seed) {
  tk::SplitMix64 rng(seed);
  tk::DecodeState ds = tk::initial_state(c);
  double total = 0;
  std::size_t done = 0;
  while (done < kBenchSteps) {
    const auto t0 = std::chrono::steady_clock::now();
    const tk::TokenMask mask = tk::allowed_tokens(c, ds);
    total += std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (!mask.any()) {
      ds = tk::initial_state(c);
      continue;
    }
    const auto pick = pick_allowed(mask, rng);
    if (!pick) {
      ds = tk::initial_state(c);
      continue;
    }
    const auto t1 = std::chrono::steady_clock::now();
    ds = tk::advance(c, std::move(ds), *pick);
    total += std::chrono::duration<double>(std::chrono::steady_clock::now() - t1).count();
    ++done;
    if (ds.history.size() > 4096) {
      ds.history.clear();
      ds.history.shrink_to_fit();
    }
    if (mask.finish && rng.next_unit() < 0.05) ds = tk::initial_state(c);
  }
  return total / static_cast<double>(kBenchSteps) * 1e6;
}

Outcome criterion_latency() {
  Stopwatch sw;
  const auto vocab =
      std::make_shared<const tk::Vocabulary>(tk::synthetic_vocabulary(kBenchVocabularySize));
  const std::vector<std::pair<std::string, std::string>> patterns = {
      {"choice", "Red|Orange|Yellow|Green|Blue|Indigo|Violet"},
      {"datetime",
       R"(\d{4}-[01]\d-[0-3]\dT[0-2]\d:[0-5]\d:[0-5]\d([+-][0-2]\d:[0-5]\d|Z))"},
      {"ip", R"(((25[0-5]|2[0-4]\d|[01]?\d\d?)\.){3}(25[0-5]|2[0-4]\d|[01]?\d\d?))"},
      {"quoted", "(?P<QUOTED_TEXT>)"},
      {"json_object", tk::json_schema_to_regex(tk::parse_schema_json(kGameSchema))},
  };

  const double baseline_ms = time_compile_ms("x", vocab);
  std::map<std::string, double> step_us;
  std::ostringstream report;
  report << "baseline " << fmt(baseline_ms) << " ms";
  for (const auto& [name, pattern] : patterns) {
    const double corrected = time_compile_ms(pattern, vocab) - baseline_ms;
    if (corrected >= kCompileBudgetMs)
      return {false, "'" + name + "' corrected compile " + fmt(corrected) + " ms (budget " +
                         fmt(kCompileBudgetMs) + " ms)"};
    const tk::CompiledConstraint c = tk::compile_regex_constraint(pattern, vocab);
    const double us = time_steps_us(c, 0xfeedULL);
    if (us >= kStepBudgetUs)
      return {false, "'" + name + "' mean step " + fmt(us, 2) + " us over " +
                         std::to_string(kBenchSteps) + " steps (budget " + fmt(kStepBudgetUs) +
                         " us)"};
    step_us[name] = us;
    report << "; " << name << " " << fmt(std::max(corrected, 0.0)) << " ms, " << fmt(us, 2)
           << " us/step";
  }
  const double ratio = step_us.at("json_object") / step_us.at("choice");
  if (ratio >= kStepRatioLimit)
    return {false, "structured object steps run " + fmt(ratio, 2) +
                       "x the flat choice (limit " + fmt(kStepRatioLimit) + "x)"};
  report << "; object/choice ratio " << fmt(ratio, 2) << "x; total " << fmt(sw.seconds())
         << " s";
  return {true, report.str()};
}

// ---------------------------------------------------------------------------
// Criterion 6: the substring acceptor stays within 2|u|+2 states and accepts
// exactly the substrings of the reference string.
// ---------------------------------------------------------------------------

std::string deterministic_reference(std::size_t len, std::uint64_t seed) {
  static const char kAlpha[] = "abcd";
  tk::SplitMix64 rng(seed);
  std::string u;
  for (std::size_t i = 0; i < len; ++i) u += kAlpha[rng.next_below(4)];
  return u;
}

Outcome criterion_substring() {
  Stopwatch sw;
  const std::size_t lengths[] = {10, 17, 30, 100, 333, 1000};
  long checked = 0;
  for (const std::size_t len : lengths) {
    const std::string u = deterministic_reference(len, 0xabc000 + len);
    const tk::Fsa dfa = tk::build_substring_fsa(u);
    const std::size_t bound = kSubstringStateSlackNumerator * len + 2;
    if (dfa.state_count > bound)
      return {false, "|u|=" + std::to_string(len) + " produced " +
                         std::to_string(dfa.state_count) + " states (bound " +
                         std::to_string(bound) + ")"};
    if (!tk::fsa_accepts(dfa, tk::utf8_decode(u)) ||
        !tk::fsa_accepts(dfa, tk::utf8_decode(u.substr(len / 3, len / 2))) ||
        tk::fsa_accepts(dfa, tk::utf8_decode(u + "z")))
      return {false, "|u|=" + std::to_string(len) + " misclassified a spot-check string"};
    if (len <= kSubstringBruteMaxReference) {
      for (const std::string& probe : testutil::all_strings("abcdz", kSubstringProbeMaxLen)) {
        if (tk::fsa_accepts(dfa, tk::utf8_decode(probe)) != testutil::is_substring(u, probe))
          return {false, "|u|=" + std::to_string(len) + " misclassified probe \"" + probe +
                             "\""};
        ++checked;
      }
      for (std::size_t i = 0; i <= u.size(); ++i)
        for (std::size_t j = i; j <= u.size(); ++j) {
          if (!tk::fsa_accepts(dfa, tk::utf8_decode(u.substr(i, j - i))))
            return {false, "|u|=" + std::to_string(len) + " rejected one of its substrings"};
          ++checked;
        }
    }
  }
  return {true, "state bound 2|u|+2 held for |u| in {10..1000}; " + std::to_string(checked) +
                    " exhaustive membership probes agreed in " + fmt(sw.seconds()) + " s"};
}

// ---------------------------------------------------------------------------
// Criterion 7: randomized advance/rewind interleavings leave the engine in
// exactly the state a from-scratch replay reaches, and speculative decoding
// emits exactly the target-only token stream for every block size.
// ---------------------------------------------------------------------------

Outcome criterion_rewind_speculative() {
  Stopwatch sw;

  struct Fixture {
    std::string name;
    tk::CompiledConstraint constraint;
  };
  std::vector<Fixture> fixtures;
  fixtures.push_back({"word-repeat",
                      tk::compile_regex_constraint(
                          "(foo)+d", testutil::make_vocab({"f", "oo", "foo", "for", "food"}))});
  fixtures.push_back({"nested-pairs",
                      tk::compile_grammar_constraint(
                          "S -> /a/ S /b/ | /ab/\n",
                          testutil::make_vocab({"a", "b", "bb", "aaab"}))});
  fixtures.push_back({"clock",
                      tk::compile_regex_constraint(
                          "[0-2]\\d:[0-5]\\d",
                          testutil::make_vocab(
                              {"0", "1", "2", "3", "5", "9", ":", "12", "30", "0:", ":5"}))});

  long ops_done = 0;
  const int per_fixture = kInterleavedOps / static_cast<int>(fixtures.size()) + 1;
  for (const Fixture& f : fixtures) {
    const tk::CompiledConstraint& c = f.constraint;
    tk::SplitMix64 rng(0x5eedULL ^ std::hash<std::string>{}(f.name));
    tk::DecodeState ds = tk::initial_state(c);
    std::vector<tk::TokenId> accepted;
    for (int op = 0; op < per_fixture && ops_done < kInterleavedOps; ++op, ++ops_done) {
      const tk::TokenMask mask = tk::allowed_tokens(c, ds);
      const bool can_advance = mask.any();
      const bool want_rewind =
          !accepted.empty() && (accepted.size() > 600 || rng.next_below(10) < 3);
      if (!can_advance || want_rewind) {
        if (accepted.empty()) {
          ds = tk::initial_state(c);
          continue;
        }
        const std::size_t k = 1 + rng.next_below(std::min<std::size_t>(accepted.size(), 3));
        ds = tk::rewind(std::move(ds), k);
        accepted.resize(accepted.size() - k);
      } else {
        const auto pick = pick_allowed(mask, rng);
        if (!pick) continue;
        ds = tk::advance(c, std::move(ds), *pick);
        accepted.push_back(*pick);
      }
      tk::DecodeState replay = tk::initial_state(c);
      for (const tk::TokenId t : accepted) replay = tk::advance(c, replay, t);
      if (replay.state != ds.state || replay.stack != ds.stack ||
          replay.history.size() != ds.history.size())
        return {false, "fixture '" + f.name + "': state diverged from replay after " +
                           std::to_string(ops_done + 1) + " ops"};
      if (ops_done % 8 == 0 &&
          !masks_equal(tk::allowed_tokens(c, ds), tk::allowed_tokens(c, replay)))
        return {false, "fixture '" + f.name + "': allowed-token mask diverged from replay"};
    }
  }
  if (ops_done < kInterleavedOps)
    return {false, "only " + std::to_string(ops_done) + " interleaved ops executed"};

  // Speculative decoding must reproduce the target-only stream exactly.
  struct SpecFixture {
    std::string name;
    std::shared_ptr<const tk::Vocabulary> vocab;
    tk::CompiledConstraint constraint;
  };
  std::vector<SpecFixture> spec;
  {
    auto v = testutil::make_vocab({"f", "oo", "foo", "for", "food"}, true);
    spec.push_back({"word-repeat", v, tk::compile_regex_constraint("(foo)+d", v)});
  }
  {
    auto v = testutil::make_vocab({"a", "b", "bb"}, true);
    spec.push_back({"nested-pairs", v,
                    tk::compile_grammar_constraint("S -> /a/ S /b/ | /ab/\n", v)});
  }
  long agreements = 0;
  long speculated_total = 0;
  for (const SpecFixture& f : spec) {
    for (std::size_t block = 1; block <= kSpeculativeMaxBlock; ++block) {
      for (int seed = 1; seed <= kSpeculativeSeeds; ++seed) {
        tk::MockLm target;
        target.seed = static_cast<std::uint64_t>(seed);
        target.vocabulary = f.vocab;
        tk::MockLm draft = target;
        draft.seed = static_cast<std::uint64_t>(seed) * 7777 + block;
        const tk::DecodeResult spec_res =
            tk::speculative_decode(draft, target, f.constraint, block, kDecodeMaxSteps);
        const tk::DecodeResult tgt_res =
            tk::constrained_decode(target, f.constraint, kDecodeMaxSteps);
        if (spec_res.tokens != tgt_res.tokens || spec_res.finished != tgt_res.finished)
          return {false, "fixture '" + f.name + "', block " + std::to_string(block) +
                             ", seed " + std::to_string(seed) +
                             ": speculative stream diverged from target-only decoding"};
        ++agreements;
        speculated_total += static_cast<long>(spec_res.speculated);
      }
    }
  }
  if (speculated_total == 0)
    return {false, "speculative decoding never proposed a draft token, so the comparison "
                   "is vacuous"};
  return {true, std::to_string(ops_done) + " interleaved ops matched replay; " +
                    std::to_string(agreements) +
                    " speculative runs (blocks 1-8) matched target-only decoding in " +
                    fmt(sw.seconds()) + " s"};
}

// ---------------------------------------------------------------------------
// Criterion 8: schema-derived patterns agree with an independently written
// validator: sampled instances all validate, and validator-rejected mutants
// are all rejected by the pattern.
// ---------------------------------------------------------------------------

Outcome criterion_schema() {
  Stopwatch sw;
  const std::vector<std::pair<std::string, std::string>> schemas = {
      {"game-character", kGameSchema},
      {"primitives",
       R"({"type":"object","properties":{"id":{"type":"integer"},"ok":{"type":"boolean"},
           "score":{"type":"number"},"tag":{"type":"string"}},
           "required":["id","ok","score","tag"]})"},
      {"optional-fields",
       R"({"type":"object","properties":{"id":{"type":"integer"},"ok":{"type":"boolean"},
           "tag":{"type":"string"}},"required":["id"]})"},
      {"enums",
       R"({"type":"object","properties":{"color":{"enum":["red","green","blue"]},
           "n":{"enum":[1,2,3]}},"required":["color","n"]})"},
      {"nullable",
       R"({"type":"object","properties":{"note":{"type":["string","null"]},
           "v":{"type":["integer","null"]}},"required":["note","v"]})"},
      {"integer-array",
       R"({"type":"object","properties":{"xs":{"type":"array","items":{"type":"integer"}}},
           "required":["xs"]})"},
      {"nested-object",
       R"({"type":"object","properties":{"meta":{"type":"object","properties":{
           "a":{"type":"integer"},"b":{"type":"string"}},"required":["a","b"]}},
           "required":["meta"]})"},
      {"object-array",
       R"({"type":"object","properties":{"pts":{"type":"array","items":{"type":"object",
           "properties":{"x":{"type":"integer"},"y":{"type":"integer"}},
           "required":["x","y"]}}},"required":["pts"]})"},
      {"boolean-flag",
       R"({"type":"object","properties":{"flag":{"type":"boolean"}},"required":["flag"]})"},
      {"top-level-array", R"({"type":"array","items":{"type":"integer"}})"},
  };
  if (schemas.size() != static_cast<std::size_t>(kSchemaFixtureCount))
    return {false, "expected " + std::to_string(kSchemaFixtureCount) + " schema fixtures"};

  long samples_total = 0;
  long mutants_total = 0;
  for (const auto& [name, text] : schemas) {
    const auto schema = tk::parse_schema_json(text);
    const tk::Fsa dfa = tk::compile_regex(tk::json_schema_to_regex(schema));
    tk::SplitMix64 rng(0x8a11 + std::hash<std::string>{}(name));

    std::vector<std::string> samples;
    for (int attempts = 0; samples.size() < static_cast<std::size_t>(kSamplesPerSchema) &&
                           attempts < 50 * kSamplesPerSchema;
         ++attempts) {
      const auto s = tk::dfa_sample_string(dfa, rng);
      if (s) samples.push_back(*s);
    }
    if (samples.size() < static_cast<std::size_t>(kSamplesPerSchema))
      return {false, "schema '" + name + "': sampler produced only " +
                         std::to_string(samples.size()) + " instances"};
    for (const std::string& s : samples) {
      if (!testutil::schema_valid_text(schema, s))
        return {false, "schema '" + name + "': sampled instance failed the independent "
                       "validator: " + s};
      ++samples_total;
    }

    std::set<std::string> mutants;
    for (const std::string& s : samples) {
      for (const std::string& m : testutil::candidate_mutants(s)) {
        if (mutants.size() >= static_cast<std::size_t>(kMutantsPerSchema)) break;
        if (testutil::schema_valid_text(schema, m)) continue;  // validator accepts: skip
        if (tk::fsa_accepts(dfa, tk::utf8_decode(m)))
          return {false, "schema '" + name + "': pattern accepted a validator-rejected "
                         "mutant: " + m};
        mutants.insert(m);
      }
      if (mutants.size() >= static_cast<std::size_t>(kMutantsPerSchema)) break;
    }
    if (mutants.size() < static_cast<std::size_t>(kMutantsPerSchema))
      return {false, "schema '" + name + "': only " + std::to_string(mutants.size()) +
                         " validator-rejected mutants found"};
    mutants_total += static_cast<long>(mutants.size());
  }
  return {true, std::to_string(schemas.size()) + " schemas: " +
                    std::to_string(samples_total) + " sampled instances validated, " +
                    std::to_string(mutants_total) +
                    " validator-rejected mutants all pattern-rejected in " +
                    fmt(sw.seconds()) + " s"};
}

// ---------------------------------------------------------------------------
// Criterion 9: ambiguous grammars are rejected with a report naming the
// state, the contested input, and the stack context, while the flagship
// deterministic grammars compile cleanly.
// ---------------------------------------------------------------------------

Outcome criterion_ambiguity() {
  Stopwatch sw;
  struct Ambiguous {
    std::string name;
    std::string grammar;
    std::string expect_kind;
    std::string expect_detail_piece;
  };
  const std::vector<Ambiguous> ambiguous = {
      {"left-recursive", "S -> S /a/ | /a/\n", "left-recursion", "S"},
      // Two factorizations of the same text: after reading "ab" the machine
      // cannot tell which rule of S produced it.
      {"reduce-reduce", "S -> /ab/ | /a/ /b/\n", "reduce/reduce", "complete"},
      {"maximal-munch", "S -> A /b/\nA -> /a/ | /ab/\n", "shift/reduce", "maximal-munch"},
  };
  for (const Ambiguous& a : ambiguous) {
    const tk::Pda pda = tk::build_grammar_pda(a.grammar);
    const tk::DeterminismReport report = tk::check_determinism(pda);
    if (report.ok())
      return {false, "'" + a.name + "' was not flagged as ambiguous"};
    const tk::DeterminismConflict& c = report.conflicts.front();
    if (c.kind.find(a.expect_kind) == std::string::npos)
      return {false, "'" + a.name + "' reported kind '" + c.kind + "', expected '" +
                         a.expect_kind + "'"};
    if (c.state >= pda.state_count)
      return {false, "'" + a.name + "' reported an out-of-range state"};
    if (c.detail.find(a.expect_detail_piece) == std::string::npos)
      return {false, "'" + a.name + "' detail lacks '" + a.expect_detail_piece +
                         "': " + c.detail};
    if (c.detail.empty() || (c.input.empty() && a.expect_kind == "shift/reduce"))
      return {false, "'" + a.name + "' report is missing input or detail context"};
    const std::string rendered = report.to_string();
    if (rendered.find("conflict at state") == std::string::npos)
      return {false, "'" + a.name + "' report does not locate the conflict state"};
    // Compilation must refuse the grammar with the same diagnosis.
    bool threw = false;
    try {
      (void)tk::compile_grammar_constraint(a.grammar,
                                           testutil::make_vocab({"a", "b", "x"}));
    } catch (const tk::DeterminismError& e) {
      threw = true;
      if (std::string(e.what()).find("conflict at state") == std::string::npos)
        return {false, "'" + a.name + "' compile error lacks the conflict location"};
    }
    if (!threw)
      return {false, "'" + a.name + "' compiled despite the ambiguity"};
  }

  // Flagship deterministic grammars must pass the same check and compile.
  {
    const tk::DeterminismReport report =
        tk::check_determinism(tk::build_grammar_pda("S -> /a/ S /b/ | /ab/\n"));
    if (!report.ok()) return {false, "the nested-pairs grammar was flagged: " +
                                          report.to_string()};
    (void)tk::compile_grammar_constraint("S -> /a/ S /b/ | /ab/\n",
                                         testutil::make_vocab({"a", "b", "bb", "aaab"}));
  }
  {
    const tk::DeterminismReport report =
        tk::check_determinism(tk::build_grammar_pda(kJsonGrammarText));
    if (!report.ok()) return {false, "the JSON grammar was flagged: " + report.to_string()};
    (void)tk::compile_grammar_constraint(
        kJsonGrammarText,
        testutil::make_vocab(
            {"{", "}", "[", "]", ", ", "1", "true", "\"a\"", "\"a\": ", "{}", "[1"}));
  }
  return {true, "3 ambiguous grammars reported kind/state/input/stack context and refused "
                "to compile; nested-pairs and JSON grammars compiled cleanly in " +
                    fmt(sw.seconds()) + " s"};
}

}  // namespace

int main() {
  struct Row {
    int id;
    const char* title;
    Outcome (*fn)();
  };
  const Row rows[] = {
      {1, "detokenizing transducer matches concatenation", &criterion_transduction},
      {2, "regex masks agree with detokenize-then-match", &criterion_regex_oracle},
      {3, "grammar masks agree with detokenize-then-match", &criterion_grammar_oracle},
      {4, "constrained decoding is conformant, unconstrained is not", &criterion_decoding},
      {5, "compile and per-step latency budgets hold", &criterion_latency},
      {6, "substring acceptor is linear and exact", &criterion_substring},
      {7, "rewind replay and speculative equivalence hold", &criterion_rewind_speculative},
      {8, "schema patterns agree with an independent validator", &criterion_schema},
      {9, "ambiguity reports locate state, input, and stack", &criterion_ambiguity},
  };
  int failures = 0;
  for (const Row& row : rows) {
    Outcome o;
    try {
      o = row.fn();
    } catch (const std::exception& e) {
      o = {false, std::string("unhandled exception: ") + e.what()};
    }
    if (!o.pass) ++failures;
    std::printf("criterion %d (%s): %s - %s\n", row.id, row.title, o.pass ? "PASS" : "FAIL",
                o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("summary: %d/9 criteria passed\n", 9 - failures);
  return failures;
}
