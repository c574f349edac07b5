#include "iekm/text.hpp"

#include <algorithm>

#include "iekm/errors.hpp"
#include "iekm/lexicon.hpp"

namespace iekm {
namespace {

enum class CharClass { space, punct, cjk, word };

struct Decoded {
  char32_t code;
  std::size_t length;
};

Decoded decode_utf8(std::string_view s, std::size_t at) {
  const auto lead = static_cast<unsigned char>(s[at]);
  std::size_t len = 1;
  char32_t code = lead;
  if (lead >= 0xF0) {
    len = 4;
    code = lead & 0x07;
  } else if (lead >= 0xE0) {
    len = 3;
    code = lead & 0x0F;
  } else if (lead >= 0xC0) {
    len = 2;
    code = lead & 0x1F;
  }
  if (len == 1 || at + len > s.size()) return {lead, 1};
  for (std::size_t i = 1; i < len; ++i) {
    const auto cont = static_cast<unsigned char>(s[at + i]);
    if ((cont & 0xC0) != 0x80) return {lead, 1};
    code = (code << 6) | (cont & 0x3F);
  }
  return {code, len};
}

bool is_cjk(char32_t c) {
  return (c >= 0x2E80 && c <= 0x9FFF) || (c >= 0xAC00 && c <= 0xD7AF) ||
         (c >= 0xF900 && c <= 0xFAFF) || (c >= 0xFE30 && c <= 0xFE4F) ||
         (c >= 0xFF00 && c <= 0xFFEF) || (c >= 0x20000 && c <= 0x2FA1F);
}

CharClass classify(char32_t c) {
  if (c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v') {
    return CharClass::space;
  }
  if (c < 0x80) {
    const bool alnum = (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') ||
                       c == '_' || c == '\'' || c == '-';
    return alnum ? CharClass::word : CharClass::punct;
  }
  if (is_cjk(c)) return CharClass::cjk;
  return CharClass::word;
}

}  // namespace

std::vector<TextUnit> split_units(std::string_view text) {
  std::vector<TextUnit> units;
  std::size_t at = 0;
  bool in_word = false;
  while (at < text.size()) {
    const Decoded d = decode_utf8(text, at);
    const CharClass cls = classify(d.code);
    if (cls == CharClass::word) {
      if (in_word) {
        units.back().end = at + d.length;
      } else {
        units.push_back({at, at + d.length});
        in_word = true;
      }
    } else {
      in_word = false;
      if (cls != CharClass::space) units.push_back({at, at + d.length});
    }
    at += d.length;
  }
  return units;
}

std::vector<std::string> word_pieces(std::string_view word) {
  std::vector<std::string> pieces;
  for (const TextUnit& u : split_units(word)) {
    pieces.push_back(normalize_word(word.substr(u.begin, u.end - u.begin)));
  }
  return pieces;
}

void WordSet::add(std::string_view word) {
  std::string normalized = normalize_word(word);
  if (normalized.empty()) return;
  max_units_ = std::max(max_units_, split_units(normalized).size());
  words_.insert(std::move(normalized));
}

std::vector<WordSegment> segment(std::string_view sentence, const WordSet& vocab,
                                 const WordSet* extra) {
  const std::vector<TextUnit> units = split_units(sentence);
  if (units.empty()) throw ValidationError("segment: sentence is empty");
  const std::size_t max_units =
      std::max(vocab.max_units(), extra != nullptr ? extra->max_units() : std::size_t{1});

  std::vector<WordSegment> out;
  std::size_t i = 0;
  while (i < units.size()) {
    std::size_t take = 1;
    std::string text;
    for (std::size_t len = std::min(max_units, units.size() - i); len >= 1; --len) {
      const std::size_t begin = units[i].begin;
      const std::size_t end = units[i + len - 1].end;
      std::string candidate = normalize_word(sentence.substr(begin, end - begin));
      if (len == 1 || vocab.contains(candidate) || (extra != nullptr && extra->contains(candidate))) {
        take = len;
        text = std::move(candidate);
        break;
      }
    }
    out.push_back({std::move(text), units[i].begin, units[i + take - 1].end});
    i += take;
  }
  return out;
}

Vocabulary::Vocabulary() {
  for (const char* special : {"[PAD]", "[UNK]", "[CLS]", "[SEP]"}) add(special);
}

Vocabulary::Vocabulary(const std::vector<std::string>& tokens) : Vocabulary() {
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i < 4) {
      if (tokens[i] != tokens_[i]) throw ValidationError("vocabulary must start with the special tokens");
      continue;
    }
    add(tokens[i]);
  }
}

int Vocabulary::add(std::string_view token) {
  auto [it, inserted] = ids_.try_emplace(std::string(token), static_cast<int>(tokens_.size()));
  if (inserted) tokens_.emplace_back(token);
  return it->second;
}

int Vocabulary::id(std::string_view token) const {
  const auto it = ids_.find(std::string(token));
  return it == ids_.end() ? kUnk : it->second;
}

}  // namespace iekm
