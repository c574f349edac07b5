#include "iekm/matrix_builder.hpp"

#include <algorithm>
#include <charconv>
#include <ostream>

namespace iekm {
namespace {

bool in_sentence(Segment s) { return s == Segment::first || s == Segment::second; }

bool crosses(Segment a, Segment b) { return in_sentence(a) && in_sentence(b) && a != b; }

void append_words(TokenizedPair& pair, std::span<const WordSegment> words, Segment sentence,
                  const Vocabulary& vocab) {
  for (const WordSegment& w : words) {
    WordSpan span{w.text, pair.tokens.size(), 0, sentence};
    for (std::string& piece : word_pieces(w.text)) {
      pair.tokens.push_back(vocab.id(piece));
      pair.pieces.push_back(std::move(piece));
      pair.sentence_of.push_back(sentence);
    }
    span.end = pair.tokens.size();
    if (span.end == span.begin) throw ValidationError("word '" + w.text + "' has no tokens");
    pair.word_spans.push_back(std::move(span));
  }
}

void append_special(TokenizedPair& pair, int id, const Vocabulary& vocab) {
  pair.tokens.push_back(id);
  pair.pieces.push_back(vocab.token(id));
  pair.sentence_of.push_back(Segment::special);
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

PairEncoding assemble(std::span<const WordSegment> first, std::span<const WordSegment> second,
                      const LexicalSources& sources, const Vocabulary& vocab) {
  PairEncoding enc;
  enc.pair = tokenize_pair(first, second, vocab);
  const Matrix word_matrix = build_word_matrix(enc.pair, sources);
  enc.bias.cross_mask = cross_sentence_mask(enc.pair);
  enc.bias.sim = expand_to_tokens(word_matrix, enc.pair);
  enc.bias.dissim = derive_dissimilarity(enc.bias.sim, enc.bias.cross_mask);
  return enc;
}

}  // namespace

std::size_t TokenizedPair::count(Segment s) const {
  return static_cast<std::size_t>(std::count(sentence_of.begin(), sentence_of.end(), s));
}

std::vector<int> TokenizedPair::segment_ids() const {
  std::vector<int> ids(sentence_of.size());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const Segment s = sentence_of[i];
    ids[i] = s == Segment::padding ? 0 : static_cast<int>(s);
  }
  return ids;
}

TokenizedPair tokenize_pair(std::span<const WordSegment> first, std::span<const WordSegment> second,
                            const Vocabulary& vocab) {
  if (first.empty() || second.empty()) throw ValidationError("tokenize_pair: empty sentence");
  TokenizedPair pair;
  append_special(pair, Vocabulary::kCls, vocab);
  append_words(pair, first, Segment::first, vocab);
  append_special(pair, Vocabulary::kSep, vocab);
  append_words(pair, second, Segment::second, vocab);
  append_special(pair, Vocabulary::kSep, vocab);
  return pair;
}

TokenizedPair pad_pair(const TokenizedPair& pair, std::size_t length) {
  if (length < pair.length()) {
    throw ShapeError("pad_pair: target length " + std::to_string(length) + " below " +
                     std::to_string(pair.length()));
  }
  TokenizedPair out = pair;
  while (out.length() < length) {
    out.tokens.push_back(Vocabulary::kPad);
    out.pieces.emplace_back("[PAD]");
    out.sentence_of.push_back(Segment::padding);
  }
  return out;
}

Matrix attention_mask(const TokenizedPair& pair) {
  const auto n = static_cast<Eigen::Index>(pair.length());
  Matrix mask = Matrix::Zero(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    if (pair.sentence_of[static_cast<std::size_t>(j)] == Segment::padding) mask.col(j).setConstant(kMaskDrop);
  }
  return mask;
}

Matrix cross_sentence_mask(const TokenizedPair& pair) {
  const auto n = static_cast<Eigen::Index>(pair.length());
  Matrix mask = Matrix::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      if (crosses(pair.sentence_of[static_cast<std::size_t>(i)], pair.sentence_of[static_cast<std::size_t>(j)])) {
        mask(i, j) = 1.0;
      }
    }
  }
  return mask;
}

WordSimScore LexicalSources::score(std::string_view a, std::string_view b, bool same_sentence) const {
  if (same_sentence) return word_similarity(providers, a, b, true, missing);
  for (const KeywordDictionary* dict : dictionaries) {
    if (dict == nullptr) continue;
    if (const auto hit = lookup_override(*dict, a, b)) {
      return {std::string(a), std::string(b), *hit, ScoreSource::override};
    }
  }
  return word_similarity(providers, a, b, false, missing);
}

Matrix build_word_matrix(const TokenizedPair& pair, const LexicalSources& sources) {
  const auto n = static_cast<Eigen::Index>(pair.word_spans.size());
  Matrix out = Matrix::Zero(n, n);
  for (Eigen::Index a = 0; a < n; ++a) {
    const WordSpan& wa = pair.word_spans[static_cast<std::size_t>(a)];
    for (Eigen::Index b = 0; b < n; ++b) {
      const WordSpan& wb = pair.word_spans[static_cast<std::size_t>(b)];
      if (!crosses(wa.sentence, wb.sentence)) continue;
      out(a, b) = sources.score(wa.word, wb.word, false).score;
    }
  }
  return out;
}

Matrix expand_to_tokens(const Matrix& word_matrix, const TokenizedPair& pair) {
  const auto words = static_cast<Eigen::Index>(pair.word_spans.size());
  if (word_matrix.rows() != words || word_matrix.cols() != words) {
    throw ShapeError("expand_to_tokens: word matrix " +
                     shape_string(word_matrix.rows(), word_matrix.cols()) + " for " +
                     std::to_string(words) + " word spans");
  }
  const auto n = static_cast<Eigen::Index>(pair.length());
  Matrix out = Matrix::Zero(n, n);
  for (Eigen::Index a = 0; a < words; ++a) {
    const WordSpan& wa = pair.word_spans[static_cast<std::size_t>(a)];
    for (Eigen::Index b = 0; b < words; ++b) {
      const WordSpan& wb = pair.word_spans[static_cast<std::size_t>(b)];
      if (wa.end > pair.length() || wb.end > pair.length() || wa.begin >= wa.end || wb.begin >= wb.end) {
        throw ShapeError("expand_to_tokens: word span outside the token sequence");
      }
      out.block(static_cast<Eigen::Index>(wa.begin), static_cast<Eigen::Index>(wb.begin),
                static_cast<Eigen::Index>(wa.end - wa.begin), static_cast<Eigen::Index>(wb.end - wb.begin))
          .setConstant(word_matrix(a, b));
    }
  }
  return out;
}

Matrix derive_dissimilarity(const Matrix& sim, const Matrix& cross_mask) {
  require_same_shape(sim, cross_mask, "derive_dissimilarity");
  for (Eigen::Index i = 0; i < sim.rows(); ++i) {
    for (Eigen::Index j = 0; j < sim.cols(); ++j) {
      const double v = sim(i, j);
      if (!(v >= 0.0 && v <= 1.0)) {
        throw ValidationError("derive_dissimilarity: M(" + std::to_string(i) + "," + std::to_string(j) +
                              ") = " + std::to_string(v) + " outside [0, 1]");
      }
      if (cross_mask(i, j) == 0.0 && v != 0.0) {
        throw ValidationError("derive_dissimilarity: M nonzero outside the cross-sentence mask");
      }
    }
  }
  return cross_mask - sim;
}

WordSet segmentation_vocabulary(const LexicalSources& sources) {
  WordSet words;
  for (const auto& p : sources.providers) {
    for (const auto& w : p.words()) words.add(w);
  }
  for (const KeywordDictionary* d : sources.dictionaries) {
    if (d == nullptr) continue;
    for (const auto& w : d->words()) words.add(w);
  }
  return words;
}

PairEncoding build_pair_matrices(std::string_view s1, std::string_view s2,
                                 const LexicalSources& sources, const WordSet& words,
                                 const Vocabulary& vocab) {
  return assemble(segment(s1, words), segment(s2, words), sources, vocab);
}

PairEncoder::PairEncoder(std::vector<SimilarityProvider> providers,
                         std::optional<KeywordDictionary> dictionary, MissingPolicy missing)
    : providers_(std::move(providers)), dictionary_(std::move(dictionary)), missing_(missing) {
  LexicalSources sources{providers_, {dictionary_ ? &*dictionary_ : nullptr}, missing_};
  words_ = segmentation_vocabulary(sources);
}

std::vector<WordSegment> PairEncoder::segment_sentence(std::string_view sentence,
                                                       const KeywordDictionary* extra) const {
  if (extra == nullptr) return segment(sentence, words_);
  WordSet extra_words;
  for (const auto& w : extra->words()) extra_words.add(w);
  return segment(sentence, words_, &extra_words);
}

PairEncoding PairEncoder::encode(std::string_view s1, std::string_view s2, const Vocabulary& vocab,
                                 const KeywordDictionary* extra) const {
  LexicalSources sources{providers_, {extra, dictionary_ ? &*dictionary_ : nullptr}, missing_};
  return assemble(segment_sentence(s1, extra), segment_sentence(s2, extra), sources, vocab);
}

void write_matrix_csv(std::ostream& out, const Matrix& m, const TokenizedPair& pair) {
  if (m.rows() != static_cast<Eigen::Index>(pair.length()) || m.cols() != m.rows()) {
    throw ShapeError("write_matrix_csv: matrix does not match the token sequence");
  }
  out << "token";
  for (const auto& p : pair.pieces) out << ',' << csv_field(p);
  out << '\n';
  char buf[32];
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    out << csv_field(pair.pieces[static_cast<std::size_t>(i)]);
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), m(i, j));
      out << ',' << std::string_view(buf, static_cast<std::size_t>(ptr - buf));
    }
    out << '\n';
  }
}

}  // namespace iekm
