// The detokenizing transducer: token ids in, characters out, one chain per
// token, prefix sharing after compaction, and the token trie reading.
#include <tokamata/tokamata.hpp>

#include <gtest/gtest.h>

#include "oracles.hpp"

using namespace tokamata;

namespace {

const std::vector<std::string> kFigVocab{"f", "oo", "foo", "for", "food"};

std::vector<Symbol> to_symbols(const std::vector<TokenId>& ids) {
  return std::vector<Symbol>(ids.begin(), ids.end());
}

}  // namespace

TEST(DetokenizerTest, TransducesEverySequenceToItsConcatenation) {
  const auto vocab = testutil::make_vocab(kFigVocab);
  const Fst fst = build_detokenizing_fst(*vocab);
  const std::vector<std::vector<TokenId>> cases{
      {}, {0}, {4}, {2, 2}, {0, 1}, {0, 1, 3}, {2, 4}, {3, 3, 3}, {1, 1, 0}};
  for (const auto& ids : cases) {
    const auto out = fst_transduce(fst, to_symbols(ids));
    ASSERT_TRUE(out.has_value());
    EXPECT_EQ(*out, utf8_decode(detokenize(*vocab, ids)));
  }
}

TEST(DetokenizerTest, ChainShapeOneStatePerInteriorCharacter) {
  const auto vocab = testutil::make_vocab(kFigVocab);
  const Fst fst = build_detokenizing_fst(*vocab);
  // Interior characters: f:0, oo:1, foo:2, for:2, food:3 -> 8 plus the root.
  EXPECT_EQ(fst.state_count, 9u);
  // One edge per character of every token.
  EXPECT_EQ(fst.edges.size(), 1u + 2u + 3u + 3u + 4u);
  // Exactly one edge per token consumes its id; everything else is epsilon.
  std::size_t id_edges = 0;
  for (const FstEdge& e : fst.edges) {
    if (e.in != kEpsilon) {
      ++id_edges;
      EXPECT_EQ(e.dst, fst.initial) << "token edge must close the cycle";
    }
  }
  EXPECT_EQ(id_edges, kFigVocab.size());
}

TEST(DetokenizerTest, ReservedTokensGetNoChain) {
  const auto vocab = testutil::make_vocab(kFigVocab, /*with_eos=*/true);
  const Fst fst = build_detokenizing_fst(*vocab);
  for (const FstEdge& e : fst.edges) {
    if (e.in != kEpsilon) EXPECT_NE(e.in, static_cast<Symbol>(*vocab->eos_id));
  }
  // The end-of-sequence id cannot be transduced.
  EXPECT_FALSE(fst_transduce(fst, std::vector<Symbol>{*vocab->eos_id}).has_value());
}

TEST(DetokenizerTest, CompactionSharesPrefixesWithoutChangingTheRelation) {
  const auto vocab = testutil::make_vocab(kFigVocab);
  const Fst plain = build_detokenizing_fst(*vocab);
  const Fst compact = compact_trie(plain);
  // f/foo/for/food share the leading "f"; foo/for share "fo"; foo/food share
  // "foo". The root doubles as the final state, so the trie needs root plus
  // the interior prefix nodes {f, fo, foo, o} = 5 states.
  EXPECT_LT(compact.state_count, plain.state_count);
  EXPECT_EQ(compact.state_count, 5u);
  for (const auto& ids : std::vector<std::vector<TokenId>>{
           {}, {0}, {1}, {2}, {3}, {4}, {2, 4}, {0, 1, 3}, {4, 4, 0}, {3, 1}}) {
    EXPECT_EQ(fst_transduce(compact, to_symbols(ids)), fst_transduce(plain, to_symbols(ids)));
  }
}

TEST(DetokenizerTest, RandomVocabulariesTransduceExactly) {
  for (std::uint64_t seed = 1; seed <= 40; ++seed) {
    const Vocabulary vocab = random_vocabulary(seed, 1 + seed % 30, 1, 6);
    const Fst fst = compact_trie(build_detokenizing_fst(vocab));
    SplitMix64 rng{seed * 977};
    for (int i = 0; i < 40; ++i) {
      std::vector<TokenId> ids;
      const std::size_t len = rng.next_below(12);
      for (std::size_t j = 0; j < len; ++j)
        ids.push_back(static_cast<TokenId>(rng.next_below(vocab.size())));
      const auto out = fst_transduce(fst, to_symbols(ids));
      ASSERT_TRUE(out.has_value());
      EXPECT_EQ(*out, utf8_decode(detokenize(vocab, ids)));
    }
  }
}

namespace {

// Follows one child edge by symbol; node_count when absent.
std::uint32_t trie_child(const TokenTrie& trie, std::uint32_t node, Symbol ch) {
  const auto syms = trie.children_syms(node);
  for (std::size_t i = 0; i < syms.size(); ++i) {
    if (syms[i] == ch) return trie.child_at(node, static_cast<std::uint32_t>(i));
  }
  return trie.node_count;
}

}  // namespace

TEST(TokenTrieTest, EveryTokenClosesAtItsPrefixNode) {
  const auto vocab = testutil::make_vocab(kFigVocab, /*with_eos=*/true);
  const TokenTrie trie = build_token_trie(*vocab);
  for (TokenId t = 0; t < vocab->size(); ++t) {
    if (vocab->is_reserved(t)) continue;
    const std::vector<Symbol>& sym = vocab->symbols[t];
    std::uint32_t node = 0;
    for (std::size_t j = 0; j + 1 < sym.size(); ++j) {
      node = trie_child(trie, node, sym[j]);
      ASSERT_LT(node, trie.node_count) << "token " << t;
    }
    bool closed = false;
    for (std::uint32_t k = trie.close_begin[node]; k < trie.close_begin[node + 1]; ++k) {
      if (trie.close_syms[k] == sym.back() && trie.close_tokens[k] == t) closed = true;
    }
    EXPECT_TRUE(closed) << "token " << t << " missing its closing entry";
  }
}

TEST(TokenTrieTest, RootSubtreeSliceCoversEachTokenOnce) {
  const auto vocab = testutil::make_vocab(kFigVocab, /*with_eos=*/true);
  const TokenTrie trie = build_token_trie(*vocab);
  std::vector<int> seen(vocab->size(), 0);
  for (std::uint32_t i = trie.range_begin[0]; i < trie.range_end[0]; ++i) {
    ASSERT_LT(trie.tokens_in_order[i], vocab->size());
    ++seen[trie.tokens_in_order[i]];
  }
  for (TokenId t = 0; t < vocab->size(); ++t) {
    EXPECT_EQ(seen[t], vocab->is_reserved(t) ? 0 : 1) << "token " << t;
  }
  // The root symbol summary knows every character the vocabulary can emit.
  for (char c : std::string("ford")) {
    const auto ch = static_cast<Symbol>(c);
    EXPECT_TRUE(trie.subtree_ascii[0][ch >> 6] >> (ch & 63) & 1) << c;
  }
}
