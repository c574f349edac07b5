#pragma once

// Keyword-controlled synthetic sentence pairs. Every pair fills the same
// template with two different slot words; whether the words are synonyms or
// distinct entities is visible only through the lexicon.

#include <cstdint>
#include <string>
#include <vector>

#include "iekm/lexicon.hpp"
#include "iekm/model.hpp"
#include "iekm/probe.hpp"
#include "iekm/training.hpp"

namespace iekm {

struct SyntheticLexiconOptions {
  std::size_t synonym_groups = 300;
  std::size_t entity_groups = 300;
  std::size_t related_groups = 80;
  double two_word_fraction = 0.3;  // slot words made of two units
  std::uint64_t seed = 0;
};

struct SyntheticLexicon {
  std::vector<std::vector<std::string>> synonym_groups;
  std::vector<std::vector<std::string>> entity_groups;
  std::vector<std::vector<std::string>> related_groups;
  std::vector<std::string> templates;  // each contains one "{}" slot

  // Two providers that agree on structure but not on exact synonym scores:
  // synonyms 1.0 / 0.8, related words 0.5 / 0.5, entities 0 / 0, and every
  // template or slot word scores 1 against itself.
  std::vector<SimilarityProvider> providers() const;
};

SyntheticLexicon make_synthetic_lexicon(const SyntheticLexiconOptions& options);

std::vector<std::string> default_templates();

std::string fill_template(const std::string& pattern, const std::string& word);

// Derives synonym pairs (score >= 0.8) and entity pairs (score 0) from the
// lexicon and emits n balanced examples. Labels follow the task polarity:
// classification 1 = similar, regression 0 = similar. Throws ValidationError
// when the lexicon lacks either kind of pair.
std::vector<LabeledExample> generate_synthetic(std::size_t n, const SimilarityProvider& lexicon,
                                               std::uint64_t seed,
                                               TaskMode task = TaskMode::classification);

// Probe pairs over mid-scored (related) word pairs: 0 < score < 0.8.
std::vector<Probe> generate_probes(std::size_t n, const SimilarityProvider& lexicon, std::uint64_t seed);

}  // namespace iekm
