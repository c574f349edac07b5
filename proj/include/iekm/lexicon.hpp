#pragma once

// File-backed word-pair similarity sources and keyword override dictionaries.

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <tuple>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace iekm {

// Lowercases ASCII letters, collapses whitespace runs to one space and trims.
std::string normalize_word(std::string_view word);

// Order-independent key for a word pair.
std::string pair_key(std::string_view a, std::string_view b);

class SimilarityProvider {
 public:
  SimilarityProvider() = default;
  explicit SimilarityProvider(std::string name) : name_(std::move(name)) {}

  const std::string& name() const { return name_; }

  // Inserts or replaces a pair; returns true when an existing different score
  // was replaced.
  bool set(std::string_view a, std::string_view b, double score);

  std::optional<double> score(std::string_view a, std::string_view b) const;

  const std::unordered_set<std::string>& words() const { return words_; }
  std::size_t size() const { return entries_.size(); }
  std::size_t conflicts() const { return conflicts_; }
  void note_conflict() { ++conflicts_; }

  // Entries as (word_a, word_b, score), sorted for reproducible output.
  std::vector<std::tuple<std::string, std::string, double>> entries() const;

 private:
  std::string name_;
  std::unordered_map<std::string, double> entries_;
  std::unordered_set<std::string> words_;
  std::size_t conflicts_ = 0;
};

struct KeywordEntry {
  std::string word_a;
  std::string word_b;
  double score = 0.0;
  std::string domain;
};

class KeywordDictionary {
 public:
  KeywordDictionary() = default;
  explicit KeywordDictionary(std::string domain, bool allow_fractional = false)
      : domain_(std::move(domain)), allow_fractional_(allow_fractional) {}

  const std::string& domain() const { return domain_; }
  bool allow_fractional() const { return allow_fractional_; }

  // Throws ValidationError when the score is not 0 or 1 (or outside [0, 1]
  // when fractional scores are allowed).
  void set(std::string_view a, std::string_view b, double score, std::string_view domain = {});

  std::optional<double> lookup(std::string_view a, std::string_view b) const;

  bool empty() const { return entries_.empty(); }
  std::size_t size() const { return entries_.size(); }
  const std::unordered_set<std::string>& words() const { return words_; }
  std::vector<KeywordEntry> entries() const;

 private:
  std::string domain_;
  bool allow_fractional_ = false;
  std::unordered_map<std::string, KeywordEntry> entries_;
  std::unordered_set<std::string> words_;
};

enum class MissingPolicy { zero, skip };

enum class ScoreSource { provider_average, override, same_sentence_zero, unknown_zero };

std::string_view to_string(ScoreSource source);

struct WordSimScore {
  std::string word_a;
  std::string word_b;
  double score = 0.0;
  ScoreSource source = ScoreSource::unknown_zero;
};

// Parses "word_a<TAB>word_b<TAB>score" lines; '#' starts a comment line.
SimilarityProvider parse_similarity_lexicon(std::istream& in, const std::string& name);
SimilarityProvider load_similarity_lexicon(const std::filesystem::path& path);
void write_similarity_lexicon(std::ostream& out, const SimilarityProvider& provider);

KeywordDictionary parse_keyword_dictionary(std::istream& in, const std::string& source,
                                           bool allow_fractional = false);
KeywordDictionary load_keyword_dictionary(const std::filesystem::path& path,
                                          bool allow_fractional = false);
void write_keyword_dictionary(std::ostream& out, const KeywordDictionary& dict);

// Mean of the provider scores for a cross-sentence pair. With
// MissingPolicy::zero a provider lacking the pair contributes 0 to the mean.
WordSimScore word_similarity(std::span<const SimilarityProvider> providers, std::string_view a,
                             std::string_view b, bool same_sentence,
                             MissingPolicy policy = MissingPolicy::zero);

std::optional<double> lookup_override(const KeywordDictionary& dict, std::string_view a,
                                      std::string_view b);

}  // namespace iekm
