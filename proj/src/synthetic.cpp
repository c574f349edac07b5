#include "iekm/synthetic.hpp"

#include <algorithm>
#include <numeric>
#include <random>
#include <set>
#include <unordered_map>
#include <unordered_set>

#include "iekm/errors.hpp"
#include "iekm/text.hpp"

namespace iekm {
namespace {

constexpr double kSynonymFloor = 0.8;

std::size_t pick(std::mt19937_64& rng, std::size_t n) {
  return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
}

// Pronounceable nonsense so that slot words never collide with template words.
class WordMaker {
 public:
  WordMaker(std::uint64_t seed, const std::unordered_set<std::string>& reserved)
      : rng_(seed), used_(reserved) {}

  std::string unit() {
    static constexpr std::string_view consonants = "bdfgklmnprstvz";
    static constexpr std::string_view vowels = "aeiou";
    for (;;) {
      std::string w;
      const std::size_t syllables = 2 + pick(rng_, 2);
      for (std::size_t i = 0; i < syllables; ++i) {
        w += consonants[pick(rng_, consonants.size())];
        w += vowels[pick(rng_, vowels.size())];
      }
      if (used_.insert(w).second) return w;
    }
  }

  std::string word(double two_unit_fraction) {
    if (std::uniform_real_distribution<double>(0.0, 1.0)(rng_) < two_unit_fraction) {
      return unit() + " " + unit();
    }
    return unit();
  }

  std::vector<std::string> group(std::size_t min_size, std::size_t max_size, double two_unit_fraction) {
    const std::size_t n = min_size + pick(rng_, max_size - min_size + 1);
    std::vector<std::string> g;
    for (std::size_t i = 0; i < n; ++i) g.push_back(word(two_unit_fraction));
    return g;
  }

 private:
  std::mt19937_64 rng_;
  std::unordered_set<std::string> used_;
};

std::vector<std::string> template_words(const std::vector<std::string>& templates) {
  std::set<std::string> words;
  for (const auto& t : templates) {
    for (auto& piece : word_pieces(normalize_word(fill_template(t, "")))) words.insert(std::move(piece));
  }
  return {words.begin(), words.end()};
}

struct PairEdge {
  std::string a;
  std::string b;
};

// Union-find over the words of both edge kinds; component ids are dense and
// follow the sorted edge order.
std::vector<int> component_ids(const std::vector<PairEdge>& edges) {
  std::unordered_map<std::string, std::size_t> node;
  std::vector<std::size_t> parent;
  auto id = [&](const std::string& w) {
    auto [it, fresh] = node.emplace(w, parent.size());
    if (fresh) parent.push_back(parent.size());
    return it->second;
  };
  auto find = [&](std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  for (const auto& e : edges) {
    const std::size_t ra = find(id(e.a));
    const std::size_t rb = find(id(e.b));
    if (ra != rb) parent[std::max(ra, rb)] = std::min(ra, rb);
  }
  std::unordered_map<std::size_t, int> dense;
  std::vector<int> out;
  for (const auto& e : edges) {
    const auto [it, fresh] = dense.emplace(find(node.at(e.a)), static_cast<int>(dense.size()));
    out.push_back(it->second);
  }
  return out;
}

}  // namespace

std::vector<std::string> default_templates() {
  return {
      "how do i get my {} back",
      "where can i check {}",
      "what is the balance of {}",
      "can i transfer money to {}",
      "why was {} closed",
      "is there a fee for {}",
      "how long does {} take",
      "i want to cancel {}",
      "who can open {} for me",
      "does {} work on weekends",
      "please explain {} to me",
      "my {} is not working",
  };
}

std::string fill_template(const std::string& pattern, const std::string& word) {
  const auto at = pattern.find("{}");
  if (at == std::string::npos) throw ValidationError("template has no {} slot: " + pattern);
  if (pattern.find("{}", at + 2) != std::string::npos) {
    throw ValidationError("template has more than one slot: " + pattern);
  }
  return pattern.substr(0, at) + word + pattern.substr(at + 2);
}

SyntheticLexicon make_synthetic_lexicon(const SyntheticLexiconOptions& options) {
  if (options.synonym_groups == 0 || options.entity_groups == 0) {
    throw ValidationError("synthetic lexicon needs synonym and entity groups");
  }
  if (!(options.two_word_fraction >= 0.0 && options.two_word_fraction <= 1.0)) {
    throw ValidationError("two_word_fraction must lie in [0, 1]");
  }
  SyntheticLexicon lex;
  lex.templates = default_templates();
  const auto reserved = template_words(lex.templates);
  WordMaker maker(options.seed, {reserved.begin(), reserved.end()});
  for (std::size_t i = 0; i < options.synonym_groups; ++i) {
    lex.synonym_groups.push_back(maker.group(2, 3, options.two_word_fraction));
  }
  for (std::size_t i = 0; i < options.entity_groups; ++i) {
    lex.entity_groups.push_back(maker.group(2, 3, options.two_word_fraction));
  }
  for (std::size_t i = 0; i < options.related_groups; ++i) {
    lex.related_groups.push_back(maker.group(2, 2, options.two_word_fraction));
  }
  return lex;
}

std::vector<SimilarityProvider> SyntheticLexicon::providers() const {
  SimilarityProvider a("synthetic_a");
  SimilarityProvider b("synthetic_b");
  auto both = [&](const std::string& x, const std::string& y, double sa, double sb) {
    a.set(x, y, sa);
    b.set(x, y, sb);
  };
  auto pairs = [&](const std::vector<std::vector<std::string>>& groups, double sa, double sb) {
    for (const auto& g : groups) {
      for (std::size_t i = 0; i < g.size(); ++i) {
        both(g[i], g[i], 1.0, 1.0);
        for (std::size_t j = i + 1; j < g.size(); ++j) both(g[i], g[j], sa, sb);
      }
    }
  };
  pairs(synonym_groups, 1.0, 0.8);
  pairs(entity_groups, 0.0, 0.0);
  pairs(related_groups, 0.5, 0.5);
  for (const auto& w : template_words(templates)) both(w, w, 1.0, 1.0);
  return {std::move(a), std::move(b)};
}

std::vector<LabeledExample> generate_synthetic(std::size_t n, const SimilarityProvider& lexicon,
                                               std::uint64_t seed, TaskMode task) {
  std::vector<PairEdge> synonyms;
  std::vector<PairEdge> entities;
  for (const auto& [a, b, score] : lexicon.entries()) {
    if (a == b) continue;
    if (score >= kSynonymFloor) synonyms.push_back({a, b});
    if (score == 0.0) entities.push_back({a, b});
  }
  if (synonyms.empty() || entities.empty()) {
    throw ValidationError("lexicon '" + lexicon.name() +
                          "' needs both synonym pairs (score >= 0.8) and entity pairs (score 0)");
  }
  std::vector<PairEdge> all = synonyms;
  all.insert(all.end(), entities.begin(), entities.end());
  const std::vector<int> groups = component_ids(all);

  const auto templates = default_templates();
  std::mt19937_64 rng(seed);
  std::vector<LabeledExample> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const bool positive = i % 2 == 0;
    const std::size_t e = positive ? pick(rng, synonyms.size()) : pick(rng, entities.size());
    const PairEdge& edge = positive ? synonyms[e] : entities[e];
    const std::string& pattern = templates[pick(rng, templates.size())];
    const bool swap = pick(rng, 2) == 1;
    LabeledExample ex;
    ex.s1 = fill_template(pattern, swap ? edge.b : edge.a);
    ex.s2 = fill_template(pattern, swap ? edge.a : edge.b);
    if (task == TaskMode::classification) {
      ex.label = positive ? 1.0 : 0.0;
    } else {
      ex.label = positive ? 0.0 : 1.0;
    }
    ex.group = groups[positive ? e : synonyms.size() + e];
    out.push_back(std::move(ex));
  }
  std::shuffle(out.begin(), out.end(), rng);
  return out;
}

std::vector<Probe> generate_probes(std::size_t n, const SimilarityProvider& lexicon, std::uint64_t seed) {
  std::vector<PairEdge> related;
  for (const auto& [a, b, score] : lexicon.entries()) {
    if (a != b && score > 0.0 && score < kSynonymFloor) related.push_back({a, b});
  }
  if (related.empty()) throw ValidationError("lexicon '" + lexicon.name() + "' has no related pairs");
  const auto templates = default_templates();
  std::mt19937_64 rng(seed);
  std::vector<Probe> out;
  for (std::size_t i = 0; i < n; ++i) {
    const PairEdge& edge = related[i < related.size() ? i : pick(rng, related.size())];
    const std::string& pattern = templates[pick(rng, templates.size())];
    out.push_back({fill_template(pattern, edge.a), fill_template(pattern, edge.b), edge.a, edge.b});
  }
  return out;
}

}  // namespace iekm
