// The mock-LM decoding harness: seeded reproducibility, constrained and
// unconstrained decoding, speculative draft/verify equivalence, the two
// independent accepted-set enumerations, vocabulary generators, and the
// pattern sampler.
#include <tokamata/tokamata.hpp>

#include <gtest/gtest.h>

#include <set>

#include "oracles.hpp"

using namespace tokamata;

namespace {

MockLm make_lm(std::uint64_t seed, std::shared_ptr<const Vocabulary> vocab,
               std::string bias_target = "", float bias_strength = 5.0f) {
  MockLm lm;
  lm.seed = seed;
  lm.vocabulary = std::move(vocab);
  lm.bias_target = std::move(bias_target);
  lm.bias_strength = lm.bias_target.empty() ? 0.0f : bias_strength;
  return lm;
}

}  // namespace

TEST(MockLmTest, LogitsAreReproducibleAndSeedSensitive) {
  const auto vocab = testutil::make_vocab({"f", "oo", "foo", "for", "food"}, true);
  const MockLm a = make_lm(7, vocab);
  const MockLm b = make_lm(8, vocab);
  const std::uint64_t h = lm_history_start(a);
  EXPECT_EQ(mock_logits(a, h), mock_logits(a, h));
  EXPECT_NE(mock_logits(a, h), mock_logits(b, lm_history_start(b)));
  EXPECT_NE(mock_logits(a, h), mock_logits(a, lm_history_push(h, 0)));
  EXPECT_EQ(mock_logits(a, h).size(), vocab->size() + 1);
}

TEST(MockLmTest, GreedyPickTakesTheLowestOfTiedMaxima) {
  EXPECT_EQ(detail::greedy_pick({1.0f, 3.0f, 3.0f}), std::optional<std::size_t>(1));
  EXPECT_EQ(detail::greedy_pick({5.0f}), std::optional<std::size_t>(0));
  const float kInf = std::numeric_limits<float>::infinity();
  EXPECT_EQ(detail::greedy_pick({-kInf, -kInf}), std::nullopt);
}

TEST(MockLmTest, BiasSteersDecodingTowardTheTarget) {
  const auto vocab = testutil::make_vocab({"f", "oo", "foo", "for", "food"}, true);
  const CompiledConstraint c = compile_regex_constraint("(foo)+d", vocab);
  const MockLm lm = make_lm(3, vocab, "foofood", 50.0f);
  const DecodeResult r = constrained_decode(lm, c, 32);
  EXPECT_TRUE(r.finished);
  EXPECT_EQ(r.text, "foofood");
}

TEST(DecodeTest, ConstrainedDecodesAlwaysConform) {
  const auto vocab = testutil::make_vocab({"f", "oo", "foo", "for", "food"}, true);
  const CompiledConstraint c = compile_regex_constraint("(foo)+d", vocab);
  int finished = 0;
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const DecodeResult r = constrained_decode(make_lm(seed, vocab), c, 48);
    if (!r.finished) continue;
    ++finished;
    EXPECT_TRUE(constraint_accepts(c, r.tokens)) << "seed " << seed;
    EXPECT_TRUE(testutil::ecma_accepts("(foo)+d", r.text)) << "seed " << seed;
    EXPECT_EQ(r.text, detokenize(*vocab, r.tokens));
  }
  EXPECT_GT(finished, 190);  // nearly every seed reaches the end slot
}

TEST(DecodeTest, UnconstrainedDecodesUsuallyViolate) {
  const auto vocab = testutil::make_vocab({"f", "oo", "foo", "for", "food"}, true);
  int conformant = 0;
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const DecodeResult r = unconstrained_decode(make_lm(seed, vocab), 48);
    EXPECT_TRUE(r.finished);
    if (testutil::ecma_accepts("(foo)+d", r.text)) ++conformant;
  }
  EXPECT_LT(conformant, 200);  // the separation the constraint provides
}

TEST(DecodeTest, DecodeResultJsonLineIsWellFormed) {
  const auto vocab = testutil::make_vocab({"f", "oo", "foo", "for", "food"}, true);
  const CompiledConstraint c = compile_regex_constraint("(foo)+d", vocab);
  const DecodeResult r = constrained_decode(make_lm(11, vocab), c, 48);
  const auto parsed = nlohmann::json::parse(decode_result_json_line(r, true));
  EXPECT_EQ(parsed["seed"], 11u);
  EXPECT_EQ(parsed["finished"], r.finished);
  EXPECT_EQ(parsed["conformant"], true);
  EXPECT_EQ(parsed["text"], r.text);
}

TEST(SpeculativeTest, OutputsEqualTargetOnlyDecodingForEveryBlockSize) {
  const auto vocab = testutil::make_vocab({"f", "oo", "foo", "for", "food"}, true);
  const CompiledConstraint c = compile_regex_constraint("(foo)+d", vocab);
  for (std::uint64_t seed = 0; seed < 25; ++seed) {
    const MockLm target = make_lm(seed, vocab);
    const MockLm draft = make_lm(seed + 1000, vocab);
    const DecodeResult want = constrained_decode(target, c, 48);
    for (std::size_t block = 1; block <= 8; ++block) {
      const DecodeResult got = speculative_decode(draft, target, c, block, 48);
      EXPECT_EQ(got.tokens, want.tokens) << "seed " << seed << " block " << block;
      EXPECT_EQ(got.finished, want.finished);
      EXPECT_GT(got.speculated, 0u);
    }
  }
}

TEST(SpeculativeTest, SelfDraftingAcceptsEverything) {
  const auto vocab = testutil::make_vocab({"f", "oo", "foo", "for", "food"}, true);
  const CompiledConstraint c = compile_regex_constraint("(foo)+d", vocab);
  const MockLm lm = make_lm(5, vocab);
  const DecodeResult r = speculative_decode(lm, lm, c, 4, 48);
  EXPECT_EQ(r.acceptance_rate(), 1.0);
}

TEST(SpeculativeTest, DistinctDraftsLandBetweenTheExtremes) {
  const auto vocab = testutil::make_vocab({"f", "oo", "foo", "for", "food"}, true);
  const CompiledConstraint c = compile_regex_constraint("(foo)+d", vocab);
  double total = 0;
  int runs = 0;
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    const DecodeResult r =
        speculative_decode(make_lm(seed + 500, vocab), make_lm(seed, vocab), c, 4, 48);
    if (r.speculated == 0) continue;
    total += r.acceptance_rate();
    ++runs;
  }
  ASSERT_GT(runs, 0);
  const double mean = total / runs;
  EXPECT_GT(mean, 0.05);
  EXPECT_LT(mean, 0.999);
}

TEST(OracleTest, TheTwoEnumerationsAgreeOnRegexFixtures) {
  const auto vocab = testutil::make_vocab({"f", "oo", "foo", "for", "food"});
  const CompiledConstraint c = compile_regex_constraint("(foo)+d", vocab);
  const auto engine = brute_force_accepted_set(c, 4);
  const auto reference = detokenize_match_accepted_set(c, 4);
  EXPECT_EQ(engine, reference);
  EXPECT_FALSE(engine.empty());
  for (const auto& seq : engine) {
    EXPECT_TRUE(testutil::ecma_accepts("(foo)+d", detokenize(*vocab, seq)));
  }
}

TEST(OracleTest, TheTwoEnumerationsAgreeOnGrammarFixtures) {
  const auto vocab = testutil::make_vocab({"a", "b", "bb", "aaab"});
  const CompiledConstraint c = compile_grammar_constraint("S -> /a/ S /b/ | /ab/\n", vocab);
  const auto engine = brute_force_accepted_set(c, 5);
  const auto reference = detokenize_match_accepted_set(c, 5);
  EXPECT_EQ(engine, reference);
  EXPECT_FALSE(engine.empty());
}

TEST(OracleTest, EnumerationBudgetsAreEnforced) {
  const auto vocab = testutil::make_vocab({"a", "b", "ab", "ba", "aa", "bb"});
  const CompiledConstraint c = compile_regex_constraint("[ab]*", vocab);
  EXPECT_THROW(brute_force_accepted_set(c, 12, 1000), ResourceLimitError);
}

TEST(OracleTest, LabelEdgesAreOutsideTheCharOracle) {
  const auto vocab = testutil::make_vocab({"a", "b"});
  const CompiledConstraint c = compile_regex_constraint("a(?P<TEXT_TOKEN>)b", vocab);
  EXPECT_THROW(detokenize_match_accepted_set(c, 3), PreconditionError);
}

TEST(VocabularyGenTest, RandomVocabulariesRespectTheRequestedShape) {
  for (std::uint64_t seed : {1ull, 2ull, 77ull}) {
    const Vocabulary v = random_vocabulary(seed, 40, 1, 6);
    EXPECT_LE(v.size(), 40u);
    EXPECT_GT(v.size(), 0u);
    std::set<std::string> seen;
    for (TokenId t = 0; t < v.size(); ++t) {
      EXPECT_GE(v.tokens[t].size(), 1u);
      EXPECT_LE(v.tokens[t].size(), 6u);
      EXPECT_TRUE(seen.insert(v.tokens[t]).second) << "duplicate " << v.tokens[t];
    }
  }
  EXPECT_NE(random_vocabulary(1, 40, 1, 6).fingerprint, random_vocabulary(2, 40, 1, 6).fingerprint);
}

TEST(VocabularyGenTest, SyntheticVocabularyCoversAsciiAndEndsWithTheEndToken) {
  const Vocabulary v = synthetic_vocabulary(512, 42);
  EXPECT_EQ(v.size(), 512u);
  ASSERT_TRUE(v.eos_id.has_value());
  EXPECT_EQ(*v.eos_id, 511u);
  EXPECT_TRUE(v.tokens[511].empty());
  // Every printable ASCII character is present as a single-character token.
  std::set<std::string> singles;
  for (TokenId t = 0; t < v.size(); ++t)
    if (v.tokens[t].size() == 1) singles.insert(v.tokens[t]);
  for (char c = 0x20; c < 0x7f; ++c)
    EXPECT_TRUE(singles.count(std::string(1, c))) << "missing " << c;
  EXPECT_TRUE(singles.count("\n"));
  EXPECT_TRUE(singles.count("\t"));
  // Same seed, same vocabulary; different seed, different tail.
  EXPECT_EQ(synthetic_vocabulary(512, 42).fingerprint, v.fingerprint);
  EXPECT_NE(synthetic_vocabulary(512, 43).fingerprint, v.fingerprint);
}

TEST(SamplerTest, SampledStringsAlwaysLandInsideTheLanguage) {
  const Fsa dfa = compile_regex("(foo|bar)\\((\\d{1,3}(, \\d{1,3})*)?\\)");
  SplitMix64 rng{11};
  int produced = 0;
  for (int i = 0; i < 100; ++i) {
    const auto s = dfa_sample_string(dfa, rng);
    if (!s) continue;
    ++produced;
    EXPECT_TRUE(fsa_accepts(dfa, utf8_decode(*s))) << "sample: " << *s;
  }
  EXPECT_GT(produced, 80);
}

TEST(SamplerTest, SamplesVaryAcrossDraws) {
  const Fsa dfa = compile_regex("[a-z]{1,8}");
  SplitMix64 rng{5};
  std::set<std::string> distinct;
  for (int i = 0; i < 50; ++i) {
    const auto s = dfa_sample_string(dfa, rng);
    if (s) distinct.insert(*s);
  }
  EXPECT_GT(distinct.size(), 10u);
}
