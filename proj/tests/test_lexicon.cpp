#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "iekm/errors.hpp"
#include "iekm/lexicon.hpp"

using namespace iekm;

namespace {

SimilarityProvider parse(const std::string& text, const std::string& name = "test") {
  std::istringstream in(text);
  return parse_similarity_lexicon(in, name);
}

}  // namespace

TEST(LexiconFile, SymmetricLookup) {
  const auto p = parse("earnings\ttotal_earnings\t0.8\n");
  EXPECT_EQ(p.score("earnings", "total_earnings"), 0.8);
  EXPECT_EQ(p.score("total_earnings", "earnings"), 0.8);
}

TEST(LexiconFile, EmptyFileKnowsNothing) {
  const auto p = parse("");
  EXPECT_EQ(p.size(), 0u);
  EXPECT_FALSE(p.score("a", "b").has_value());
}

TEST(LexiconFile, ScoreOutOfRangeReportsLine) {
  try {
    parse("# header\na\tb\t0.5\nc\td\t1.5\n");
    FAIL() << "expected ValidationError";
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find(":3"), std::string::npos) << e.what();
  }
}

TEST(LexiconFile, MalformedLineIsParseError) {
  try {
    parse("a\tb\t0.5\nonly two\tfields\n");
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
  EXPECT_THROW(parse("a\tb\tnot-a-number\n"), ParseError);
}

TEST(LexiconFile, CommentsBlankLinesAndCarriageReturns) {
  const auto p = parse("# comment\n\nA\tb\t0.25\r\n");
  EXPECT_EQ(p.score("a", "b"), 0.25);  // ASCII is lowercased
}

TEST(LexiconFile, ConflictingDuplicateLastWins) {
  const auto p = parse("a\tb\t0.2\nb\ta\t0.6\na\tb\t0.6\n");
  EXPECT_EQ(p.score("a", "b"), 0.6);
  EXPECT_EQ(p.conflicts(), 1u);
}

TEST(LexiconFile, WriteThenParseRoundTrips) {
  const auto p = parse("x\ty\t0.3333333333333333\nz\tz\t1\n");
  std::ostringstream out;
  write_similarity_lexicon(out, p);
  const auto q = parse(out.str());
  EXPECT_EQ(q.entries(), p.entries());
}

TEST(WordSimilarity, MeanOfProviders) {
  SimilarityProvider a("a"), b("b");
  a.set("x", "y", 0.8);
  b.set("x", "y", 0.6);
  const std::vector<SimilarityProvider> ps{a, b};
  const auto s = word_similarity(ps, "x", "y", false);
  EXPECT_NEAR(s.score, 0.7, 1e-15);
  EXPECT_EQ(s.source, ScoreSource::provider_average);
}

TEST(WordSimilarity, SameSentenceIsZero) {
  SimilarityProvider a("a");
  a.set("x", "y", 0.9);
  const std::vector<SimilarityProvider> ps{a};
  const auto s = word_similarity(ps, "x", "y", true);
  EXPECT_EQ(s.score, 0.0);
  EXPECT_EQ(s.source, ScoreSource::same_sentence_zero);
}

TEST(WordSimilarity, UnknownPairIsZero) {
  const std::vector<SimilarityProvider> ps{SimilarityProvider("a"), SimilarityProvider("b")};
  const auto s = word_similarity(ps, "x", "y", false);
  EXPECT_EQ(s.score, 0.0);
  EXPECT_EQ(s.source, ScoreSource::unknown_zero);
}

TEST(WordSimilarity, MissingPolicy) {
  SimilarityProvider a("a"), b("b");
  a.set("x", "y", 0.8);
  const std::vector<SimilarityProvider> ps{a, b};
  EXPECT_NEAR(word_similarity(ps, "x", "y", false, MissingPolicy::zero).score, 0.4, 1e-15);
  EXPECT_NEAR(word_similarity(ps, "x", "y", false, MissingPolicy::skip).score, 0.8, 1e-15);
}

TEST(WordSimilarityProperty, SymmetricBoundedAndSameSentenceZero) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_int_distribution<int> w(0, 14);
  SimilarityProvider a("a"), b("b");
  for (int i = 0; i < 60; ++i) {
    a.set("w" + std::to_string(w(rng)), "w" + std::to_string(w(rng)), u(rng));
    b.set("w" + std::to_string(w(rng)), "w" + std::to_string(w(rng)), u(rng));
  }
  const std::vector<SimilarityProvider> ps{a, b};
  for (int i = 0; i < 1000; ++i) {
    const std::string x = "w" + std::to_string(w(rng)), y = "w" + std::to_string(w(rng));
    for (auto policy : {MissingPolicy::zero, MissingPolicy::skip}) {
      const double s = word_similarity(ps, x, y, false, policy).score;
      EXPECT_EQ(s, word_similarity(ps, y, x, false, policy).score);
      EXPECT_GE(s, 0.0);
      EXPECT_LE(s, 1.0);
      EXPECT_EQ(word_similarity(ps, x, y, true, policy).score, 0.0);
    }
  }
}

TEST(KeywordDictionary, SymmetricOverride) {
  KeywordDictionary d("bank");
  d.set("earnings", "total_earnings", 0.0);
  EXPECT_EQ(lookup_override(d, "total_earnings", "earnings"), 0.0);
  d.set("receiving", "applying", 1.0);
  EXPECT_EQ(lookup_override(d, "receiving", "applying"), 1.0);
}

TEST(KeywordDictionary, EmptyDictionaryMisses) {
  EXPECT_FALSE(lookup_override(KeywordDictionary(), "a", "b").has_value());
}

TEST(KeywordDictionary, OnlyZeroOrOneUnlessRelaxed) {
  KeywordDictionary strict("d");
  EXPECT_THROW(strict.set("a", "b", 0.5), ValidationError);
  KeywordDictionary relaxed("d", true);
  relaxed.set("a", "b", 0.5);
  EXPECT_EQ(lookup_override(relaxed, "b", "a"), 0.5);
  EXPECT_THROW(relaxed.set("a", "b", 1.5), ValidationError);
}

TEST(KeywordDictionary, FileWithDomainColumn) {
  std::istringstream in("# kw\nearnings\ttotal_earnings\t0\tbank\nreceiving\tapplying\t1\n");
  const auto d = parse_keyword_dictionary(in, "dict.tsv");
  EXPECT_EQ(d.size(), 2u);
  EXPECT_EQ(lookup_override(d, "total_earnings", "earnings"), 0.0);
  std::istringstream bad("a\tb\t0.5\n");
  EXPECT_THROW(parse_keyword_dictionary(bad, "bad.tsv"), ValidationError);
}
