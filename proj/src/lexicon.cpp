#include "iekm/lexicon.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>

#include "iekm/errors.hpp"

namespace iekm {
namespace {

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; }

std::vector<std::string_view> split_tabs(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t tab = line.find('\t', start);
    if (tab == std::string_view::npos) {
      fields.push_back(line.substr(start));
      return fields;
    }
    fields.push_back(line.substr(start, tab - start));
    start = tab + 1;
  }
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

double parse_score(std::string_view text, const std::string& source, std::size_t line) {
  text = trim(text);
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size() || text.empty()) {
    throw ParseError(source, line, "score '" + std::string(text) + "' is not a decimal number");
  }
  return value;
}

struct Record {
  std::string a;
  std::string b;
  double score;
  std::string domain;
};

// Calls fn(record, line_number) for every data line with 3 (or, when
// allowed, 4) tab-separated fields.
template <typename Fn>
void for_each_record(std::istream& in, const std::string& source, bool allow_domain, Fn fn) {
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string_view line(raw);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (trim(line).empty() || trim(line).front() == '#') continue;
    const auto fields = split_tabs(line);
    const std::size_t max_fields = allow_domain ? 4 : 3;
    if (fields.size() < 3 || fields.size() > max_fields) {
      throw ParseError(source, line_no,
                       "expected " + std::string(allow_domain ? "3 or 4" : "3") +
                           " tab-separated fields, got " + std::to_string(fields.size()));
    }
    Record r{normalize_word(fields[0]), normalize_word(fields[1]),
             parse_score(fields[2], source, line_no),
             fields.size() == 4 ? std::string(trim(fields[3])) : std::string()};
    if (r.a.empty() || r.b.empty()) throw ParseError(source, line_no, "empty word");
    fn(r, line_no);
  }
}

std::string format_score(double score) {
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), score);
  return std::string(buf, ptr);
}

}  // namespace

std::string normalize_word(std::string_view word) {
  std::string out;
  out.reserve(word.size());
  bool pending_space = false;
  for (char c : word) {
    if (is_space(c)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) {
      out.push_back(' ');
      pending_space = false;
    }
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
    out.push_back(c);
  }
  return out;
}

std::string pair_key(std::string_view a, std::string_view b) {
  if (b < a) std::swap(a, b);
  std::string key;
  key.reserve(a.size() + b.size() + 1);
  key.append(a);
  key.push_back('\t');
  key.append(b);
  return key;
}

bool SimilarityProvider::set(std::string_view a, std::string_view b, double score) {
  if (!(score >= 0.0 && score <= 1.0)) {
    throw ValidationError("similarity score " + std::to_string(score) + " outside [0, 1]");
  }
  const std::string na = normalize_word(a);
  const std::string nb = normalize_word(b);
  words_.insert(na);
  words_.insert(nb);
  auto [it, inserted] = entries_.try_emplace(pair_key(na, nb), score);
  if (inserted) return false;
  const bool changed = it->second != score;
  it->second = score;
  return changed;
}

std::optional<double> SimilarityProvider::score(std::string_view a, std::string_view b) const {
  const auto it = entries_.find(pair_key(normalize_word(a), normalize_word(b)));
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

std::vector<std::tuple<std::string, std::string, double>> SimilarityProvider::entries() const {
  std::vector<std::tuple<std::string, std::string, double>> out;
  out.reserve(entries_.size());
  for (const auto& [key, score] : entries_) {
    const auto tab = key.find('\t');
    out.emplace_back(key.substr(0, tab), key.substr(tab + 1), score);
  }
  std::sort(out.begin(), out.end());
  return out;
}

void KeywordDictionary::set(std::string_view a, std::string_view b, double score,
                            std::string_view domain) {
  if (allow_fractional_) {
    if (!(score >= 0.0 && score <= 1.0)) {
      throw ValidationError("keyword score " + std::to_string(score) + " outside [0, 1]");
    }
  } else if (score != 0.0 && score != 1.0) {
    throw ValidationError("keyword score must be 0 or 1, got " + std::to_string(score));
  }
  KeywordEntry entry{normalize_word(a), normalize_word(b), score, std::string(domain)};
  words_.insert(entry.word_a);
  words_.insert(entry.word_b);
  entries_.insert_or_assign(pair_key(entry.word_a, entry.word_b), std::move(entry));
}

std::optional<double> KeywordDictionary::lookup(std::string_view a, std::string_view b) const {
  const auto it = entries_.find(pair_key(normalize_word(a), normalize_word(b)));
  if (it == entries_.end()) return std::nullopt;
  return it->second.score;
}

std::vector<KeywordEntry> KeywordDictionary::entries() const {
  std::vector<KeywordEntry> out;
  out.reserve(entries_.size());
  for (const auto& [key, entry] : entries_) out.push_back(entry);
  std::sort(out.begin(), out.end(), [](const KeywordEntry& x, const KeywordEntry& y) {
    return std::tie(x.word_a, x.word_b) < std::tie(y.word_a, y.word_b);
  });
  return out;
}

std::string_view to_string(ScoreSource source) {
  switch (source) {
    case ScoreSource::provider_average:
      return "provider-average";
    case ScoreSource::override:
      return "override";
    case ScoreSource::same_sentence_zero:
      return "same-sentence-zero";
    case ScoreSource::unknown_zero:
      return "unknown-zero";
  }
  return "unknown";
}

SimilarityProvider parse_similarity_lexicon(std::istream& in, const std::string& name) {
  SimilarityProvider provider(name);
  for_each_record(in, name, false, [&](const Record& r, std::size_t line) {
    if (!(r.score >= 0.0 && r.score <= 1.0)) {
      throw ValidationError(name + ":" + std::to_string(line) + ": score " +
                            std::to_string(r.score) + " outside [0, 1]");
    }
    if (provider.set(r.a, r.b, r.score)) provider.note_conflict();
  });
  return provider;
}

SimilarityProvider load_similarity_lexicon(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open lexicon " + path.string());
  auto provider = parse_similarity_lexicon(in, path.string());
  return provider;
}

void write_similarity_lexicon(std::ostream& out, const SimilarityProvider& provider) {
  out << "# provider: " << provider.name() << '\n';
  for (const auto& [a, b, score] : provider.entries()) {
    out << a << '\t' << b << '\t' << format_score(score) << '\n';
  }
}

KeywordDictionary parse_keyword_dictionary(std::istream& in, const std::string& source,
                                           bool allow_fractional) {
  std::string domain;
  bool mixed = false;
  std::vector<Record> records;
  for_each_record(in, source, true, [&](const Record& r, std::size_t line) {
    const bool ok = allow_fractional ? (r.score >= 0.0 && r.score <= 1.0)
                                     : (r.score == 0.0 || r.score == 1.0);
    if (!ok) {
      throw ValidationError(source + ":" + std::to_string(line) + ": keyword score " +
                            std::to_string(r.score) +
                            (allow_fractional ? " outside [0, 1]" : " must be 0 or 1"));
    }
    if (!r.domain.empty()) {
      if (domain.empty() && !mixed) {
        domain = r.domain;
      } else if (domain != r.domain) {
        mixed = true;
        domain.clear();
      }
    }
    records.push_back(r);
  });
  KeywordDictionary dict(domain, allow_fractional);
  for (const auto& r : records) dict.set(r.a, r.b, r.score, r.domain);
  return dict;
}

KeywordDictionary load_keyword_dictionary(const std::filesystem::path& path, bool allow_fractional) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open keyword dictionary " + path.string());
  return parse_keyword_dictionary(in, path.string(), allow_fractional);
}

void write_keyword_dictionary(std::ostream& out, const KeywordDictionary& dict) {
  for (const auto& e : dict.entries()) {
    out << e.word_a << '\t' << e.word_b << '\t' << format_score(e.score);
    if (!e.domain.empty()) out << '\t' << e.domain;
    out << '\n';
  }
}

WordSimScore word_similarity(std::span<const SimilarityProvider> providers, std::string_view a,
                             std::string_view b, bool same_sentence, MissingPolicy policy) {
  WordSimScore out{std::string(a), std::string(b), 0.0, ScoreSource::unknown_zero};
  if (same_sentence) {
    out.source = ScoreSource::same_sentence_zero;
    return out;
  }
  if (providers.empty()) return out;
  const std::string na = normalize_word(a);
  const std::string nb = normalize_word(b);
  double total = 0.0;
  std::size_t known = 0;
  for (const auto& p : providers) {
    if (const auto s = p.score(na, nb)) {
      total += *s;
      ++known;
    }
  }
  if (known == 0) return out;
  const double denom = policy == MissingPolicy::zero ? static_cast<double>(providers.size())
                                                     : static_cast<double>(known);
  out.score = total / denom;
  out.source = ScoreSource::provider_average;
  return out;
}

std::optional<double> lookup_override(const KeywordDictionary& dict, std::string_view a,
                                      std::string_view b) {
  return dict.lookup(a, b);
}

}  // namespace iekm
