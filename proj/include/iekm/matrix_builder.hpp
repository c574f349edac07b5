#pragma once

// Builds the token-level similarity matrix M and dissimilarity matrix Mr for a
// sentence pair laid out as [CLS] s1 [SEP] s2 [SEP].

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "iekm/lexicon.hpp"
#include "iekm/numerics.hpp"
#include "iekm/text.hpp"

namespace iekm {

enum class Segment : std::uint8_t { special = 0, first = 1, second = 2, padding = 3 };

struct WordSpan {
  std::string word;
  std::size_t begin = 0;  // token positions, end exclusive
  std::size_t end = 0;
  Segment sentence = Segment::first;
};

struct TokenizedPair {
  std::vector<int> tokens;
  std::vector<std::string> pieces;
  std::vector<Segment> sentence_of;
  std::vector<WordSpan> word_spans;

  std::size_t length() const { return tokens.size(); }
  std::size_t count(Segment s) const;
  // Segment embedding index: special and padding share row 0.
  std::vector<int> segment_ids() const;
};

TokenizedPair tokenize_pair(std::span<const WordSegment> first, std::span<const WordSegment> second,
                            const Vocabulary& vocab);

// Appends [PAD] positions up to the given length.
TokenizedPair pad_pair(const TokenizedPair& pair, std::size_t length);

// 0 everywhere except kMaskDrop in columns of padding positions.
Matrix attention_mask(const TokenizedPair& pair);

// 1 where one position is in s1 and the other in s2.
Matrix cross_sentence_mask(const TokenizedPair& pair);

struct BiasMatrices {
  Matrix sim;     // M
  Matrix dissim;  // Mr
  Matrix cross_mask;

  Eigen::Index size() const { return sim.rows(); }
};

// Where word-pair scores come from. Dictionaries are consulted in order and
// the first hit replaces the provider average.
struct LexicalSources {
  std::span<const SimilarityProvider> providers;
  std::vector<const KeywordDictionary*> dictionaries;
  MissingPolicy missing = MissingPolicy::zero;

  WordSimScore score(std::string_view a, std::string_view b, bool same_sentence) const;
};

// Word-indexed matrix over pair.word_spans; same-sentence cells stay 0.
Matrix build_word_matrix(const TokenizedPair& pair, const LexicalSources& sources);

// Copies each word-pair score onto every token cell of the two words.
Matrix expand_to_tokens(const Matrix& word_matrix, const TokenizedPair& pair);

// Mr = cross_mask - M.
Matrix derive_dissimilarity(const Matrix& sim, const Matrix& cross_mask);

struct PairEncoding {
  TokenizedPair pair;
  BiasMatrices bias;
};

// Union of every word the providers and dictionaries know.
WordSet segmentation_vocabulary(const LexicalSources& sources);

PairEncoding build_pair_matrices(std::string_view s1, std::string_view s2,
                                 const LexicalSources& sources, const WordSet& words,
                                 const Vocabulary& vocab);

// Convenience wrapper owning the sources and the derived segmentation
// vocabulary.
class PairEncoder {
 public:
  PairEncoder(std::vector<SimilarityProvider> providers, std::optional<KeywordDictionary> dictionary,
              MissingPolicy missing = MissingPolicy::zero);

  // `extra` is layered above the owned dictionary (its entries win) and its
  // words join the segmentation vocabulary for this call only.
  PairEncoding encode(std::string_view s1, std::string_view s2, const Vocabulary& vocab,
                      const KeywordDictionary* extra = nullptr) const;

  std::vector<WordSegment> segment_sentence(std::string_view sentence,
                                            const KeywordDictionary* extra = nullptr) const;

  const std::vector<SimilarityProvider>& providers() const { return providers_; }
  const std::optional<KeywordDictionary>& dictionary() const { return dictionary_; }
  MissingPolicy missing() const { return missing_; }

 private:
  std::vector<SimilarityProvider> providers_;
  std::optional<KeywordDictionary> dictionary_;
  MissingPolicy missing_;
  WordSet words_;
};

// CSV with token pieces as header row and first column.
void write_matrix_csv(std::ostream& out, const Matrix& m, const TokenizedPair& pair);

}  // namespace iekm
