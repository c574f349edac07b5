#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "iekm/errors.hpp"
#include "iekm/matrix_builder.hpp"
#include "support.hpp"

using namespace iekm;

namespace {

std::vector<WordSegment> words(std::initializer_list<const char*> ws) {
  std::vector<WordSegment> out;
  for (const char* w : ws) out.push_back({w, 0, 0});
  return out;
}

SimilarityProvider provider(std::initializer_list<std::tuple<const char*, const char*, double>> entries) {
  SimilarityProvider p("p");
  for (const auto& [a, b, s] : entries) p.set(a, b, s);
  return p;
}

}  // namespace

TEST(TokenizePair, LayoutAndSpans) {
  Vocabulary vocab;
  vocab.add("get");
  const auto pair = tokenize_pair(words({"get", "a card"}), words({"card"}), vocab);
  EXPECT_EQ(pair.pieces, (std::vector<std::string>{"[CLS]", "get", "a", "card", "[SEP]", "card", "[SEP]"}));
  EXPECT_EQ(pair.tokens[0], Vocabulary::kCls);
  EXPECT_EQ(pair.tokens[1], vocab.id("get"));
  EXPECT_EQ(pair.tokens[2], Vocabulary::kUnk);
  ASSERT_EQ(pair.word_spans.size(), 3u);
  EXPECT_EQ(pair.word_spans[1].begin, 2u);
  EXPECT_EQ(pair.word_spans[1].end, 4u);
  EXPECT_EQ(pair.word_spans[2].sentence, Segment::second);
  EXPECT_EQ(pair.count(Segment::special), 3u);
  EXPECT_EQ(pair.segment_ids(), (std::vector<int>{0, 1, 1, 1, 0, 2, 0}));
  EXPECT_THROW(tokenize_pair({}, words({"x"}), vocab), ValidationError);
}

TEST(WordMatrix, OneWordSentences) {
  const std::vector<SimilarityProvider> ps{provider({{"x", "y", 0.7}})};
  const auto pair = tokenize_pair(words({"x"}), words({"y"}), Vocabulary());
  const Matrix w = build_word_matrix(pair, LexicalSources{ps, {}, MissingPolicy::zero});
  Matrix expected(2, 2);
  expected << 0, 0.7, 0.7, 0;
  EXPECT_EQ(w, expected);
}

TEST(WordMatrix, OverrideReplacesProviderScore) {
  const std::vector<SimilarityProvider> ps{provider({{"x", "y", 0.7}})};
  const auto pair = tokenize_pair(words({"x"}), words({"y"}), Vocabulary());
  for (double s : {0.0, 1.0}) {
    KeywordDictionary d("d");
    d.set("y", "x", s);
    const Matrix w = build_word_matrix(pair, LexicalSources{ps, {&d}, MissingPolicy::zero});
    EXPECT_EQ(w(0, 1), s);
    EXPECT_EQ(w(1, 0), s);
    EXPECT_EQ(w(0, 0), 0.0);
  }
}

TEST(WordMatrix, FirstDictionaryWins) {
  const std::vector<SimilarityProvider> ps{provider({{"x", "y", 0.7}})};
  const auto pair = tokenize_pair(words({"x"}), words({"y"}), Vocabulary());
  KeywordDictionary a("a"), b("b");
  a.set("x", "y", 1.0);
  b.set("x", "y", 0.0);
  EXPECT_EQ(build_word_matrix(pair, LexicalSources{ps, {&a, &b}, MissingPolicy::zero})(0, 1), 1.0);
  EXPECT_EQ(build_word_matrix(pair, LexicalSources{ps, {nullptr, &b}, MissingPolicy::zero})(0, 1), 0.0);
}

TEST(ExpandToTokens, CopyRuleFillsBlocks) {
  // a 3-token word against a 2-token word
  const auto pair = tokenize_pair(words({"a b c"}), words({"d e"}), Vocabulary());
  Matrix w(2, 2);
  w << 0, 0.9, 0.9, 0;
  const Matrix m = expand_to_tokens(w, pair);
  ASSERT_EQ(m.rows(), 8);
  EXPECT_EQ(m.block(1, 5, 3, 2), Matrix::Constant(3, 2, 0.9));
  EXPECT_EQ(m.block(5, 1, 2, 3), Matrix::Constant(2, 3, 0.9));
  EXPECT_EQ(m.sum(), 0.9 * 12);
}

TEST(ExpandToTokens, ZeroStaysZeroAndSingleTokensPad) {
  const auto pair = tokenize_pair(words({"a", "b"}), words({"c"}), Vocabulary());
  EXPECT_EQ(expand_to_tokens(Matrix::Zero(3, 3), pair), Matrix::Zero(6, 6));
  Matrix w(3, 3);
  w << 0, 0, 0.2, 0, 0, 0.4, 0.2, 0.4, 0;
  const Matrix m = expand_to_tokens(w, pair);
  Matrix expected = Matrix::Zero(6, 6);
  const int pos[] = {1, 2, 4};
  for (int a = 0; a < 3; ++a)
    for (int b = 0; b < 3; ++b) expected(pos[a], pos[b]) = w(a, b);
  EXPECT_EQ(m, expected);
}

TEST(ExpandToTokens, MismatchIsShapeError) {
  const auto pair = tokenize_pair(words({"a"}), words({"c"}), Vocabulary());
  EXPECT_THROW(expand_to_tokens(Matrix::Zero(3, 3), pair), ShapeError);
}

TEST(Dissimilarity, ComplementOnCrossCells) {
  Matrix m(2, 2), cross(2, 2);
  m << 0.0, 0.7, 0.0, 0.0;
  cross << 0, 1, 1, 0;
  const Matrix r = derive_dissimilarity(m, cross);
  EXPECT_NEAR(r(0, 1), 0.3, 1e-15);
  EXPECT_EQ(r(1, 0), 1.0);
  EXPECT_EQ(r(0, 0), 0.0);
}

TEST(Dissimilarity, RejectsBadInput) {
  Matrix cross(1, 2);
  cross << 1, 0;
  Matrix m(1, 2);
  m << 1.2, 0;
  EXPECT_THROW(derive_dissimilarity(m, cross), ValidationError);
  m << 0.5, 0.5;
  EXPECT_THROW(derive_dissimilarity(m, cross), ValidationError);
}

TEST(PairMatrices, IdenticalWordsScoreOne) {
  const PairEncoder enc({provider({{"card", "card", 1.0}})}, std::nullopt);
  const auto e = enc.encode("card", "card", Vocabulary());
  EXPECT_EQ(e.bias.sim(1, 3), 1.0);
  EXPECT_EQ(e.bias.dissim(1, 3), 0.0);
}

TEST(PairMatrices, NoCoverageGivesAllDissimilar) {
  const PairEncoder enc({provider({})}, std::nullopt);
  const auto e = enc.encode("open my account", "close the card", Vocabulary());
  EXPECT_EQ(e.bias.sim, Matrix::Zero(e.bias.size(), e.bias.size()));
  EXPECT_EQ(e.bias.dissim, e.bias.cross_mask);
}

TEST(PairMatrices, OverrideChangesOnlyKeywordBlock) {
  std::mt19937_64 rng(3);
  const support::RandomLexicon lex(rng);
  const PairEncoder plain(lex.providers, std::nullopt);
  const std::string s1 = "k1 p0 q0 k2", s2 = "k3 k1 u2";
  KeywordDictionary d("d");
  d.set("p0 q0", "k1", 1.0);
  const auto a = plain.encode(s1, s2, Vocabulary());
  const auto b = plain.encode(s1, s2, Vocabulary(), &d);
  ASSERT_EQ(a.pair.pieces, b.pair.pieces);
  for (Eigen::Index i = 0; i < a.bias.size(); ++i) {
    for (Eigen::Index j = 0; j < a.bias.size(); ++j) {
      const bool block = ((i == 2 || i == 3) && j == 7) || (i == 7 && (j == 2 || j == 3));
      if (block) {
        EXPECT_EQ(b.bias.sim(i, j), 1.0);
      } else {
        EXPECT_EQ(a.bias.sim(i, j), b.bias.sim(i, j)) << i << "," << j;
      }
    }
  }
}

TEST(PairMatrices, EveryKeywordOccurrenceIsOverridden) {
  const PairEncoder plain({provider({{"x", "y", 0.5}})}, std::nullopt);
  KeywordDictionary d("d");
  d.set("x", "y", 0.0);
  const auto e = plain.encode("x z x", "y", Vocabulary(), &d);
  EXPECT_EQ(e.bias.sim(1, 5), 0.0);
  EXPECT_EQ(e.bias.sim(3, 5), 0.0);
}

TEST(PairMatrices, DictionaryWordsSegmentAsUnits) {
  KeywordDictionary d("d");
  d.set("yu e bao", "bank card", 0.0);
  const PairEncoder enc({provider({})}, d);
  const auto e = enc.encode("open yu e bao", "open bank card", Vocabulary());
  ASSERT_EQ(e.pair.word_spans.size(), 4u);
  EXPECT_EQ(e.pair.word_spans[1].word, "yu e bao");
  EXPECT_EQ(e.bias.sim.sum(), 0.0);
  EXPECT_EQ(e.bias.dissim(2, 7), 1.0);
}

TEST(BiasProperty, InvariantsOverRandomPairs) {
  std::mt19937_64 rng(11);
  for (int t = 0; t < 1000; ++t) {
    const support::RandomLexicon lex(rng);
    const PairEncoder enc(lex.providers, std::nullopt,
                          t % 2 == 0 ? MissingPolicy::zero : MissingPolicy::skip);
    const std::string s1 = lex.sentence(rng), s2 = lex.sentence(rng);
    const auto e = enc.encode(s1, s2, Vocabulary());
    ASSERT_EQ(support::bias_violation(e), "") << s1 << " | " << s2;
    EXPECT_EQ(e.bias.sim, e.bias.sim.transpose());
    // active region is exactly (l1 + l2)^2 minus the specials
    const auto l = static_cast<Eigen::Index>(e.pair.count(Segment::first) + e.pair.count(Segment::second));
    EXPECT_EQ(e.bias.size(), l + 3);
  }
}

TEST(MatrixCsv, HeaderAndEscaping) {
  const PairEncoder enc({provider({{"a", "b", 0.25}})}, std::nullopt);
  const auto e = enc.encode("a ,", "b", Vocabulary());
  std::ostringstream out;
  write_matrix_csv(out, e.bias.sim, e.pair);
  std::istringstream in(out.str());
  std::string header, row;
  std::getline(in, header);
  EXPECT_EQ(header, "token,[CLS],a,\",\",[SEP],b,[SEP]");
  std::getline(in, row);
  std::getline(in, row);
  EXPECT_EQ(row, "a,0,0,0,0,0.25,0");
}
