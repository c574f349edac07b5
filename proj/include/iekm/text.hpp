#pragma once

// Sentence segmentation into dictionary words and word-to-token splitting.
//
// Text is first cut into units: runs of letters/digits, single ASCII
// punctuation marks and single CJK characters. Segmentation then greedily
// joins the longest run of units that forms a known word; a word's units are
// its tokens.

#include <cstddef>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace iekm {

struct TextUnit {
  std::size_t begin = 0;  // byte offsets into the source text
  std::size_t end = 0;
};

std::vector<TextUnit> split_units(std::string_view text);

// Normalized token strings for one word.
std::vector<std::string> word_pieces(std::string_view word);

// Known multi-unit words for longest-match segmentation.
class WordSet {
 public:
  void add(std::string_view word);
  bool contains(const std::string& normalized) const { return words_.count(normalized) != 0; }
  std::size_t max_units() const { return max_units_; }
  std::size_t size() const { return words_.size(); }

 private:
  std::unordered_set<std::string> words_;
  std::size_t max_units_ = 1;
};

struct WordSegment {
  std::string text;  // normalized word
  std::size_t begin = 0;
  std::size_t end = 0;
};

// Greedy left-to-right longest match against vocab (and extra, when given).
// Unmatched units become single-unit words. Throws ValidationError on a blank
// sentence.
std::vector<WordSegment> segment(std::string_view sentence, const WordSet& vocab,
                                 const WordSet* extra = nullptr);

class Vocabulary {
 public:
  static constexpr int kPad = 0;
  static constexpr int kUnk = 1;
  static constexpr int kCls = 2;
  static constexpr int kSep = 3;

  Vocabulary();
  explicit Vocabulary(const std::vector<std::string>& tokens);

  int add(std::string_view token);
  int id(std::string_view token) const;
  const std::string& token(int id) const { return tokens_.at(static_cast<std::size_t>(id)); }
  int size() const { return static_cast<int>(tokens_.size()); }
  const std::vector<std::string>& tokens() const { return tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> ids_;
};

}  // namespace iekm
