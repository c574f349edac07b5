#pragma once

// Independent reference implementations and random-input helpers shared by
// the unit tests and the acceptance suite. Everything here is written with
// plain loops and std math so it does not lean on the code under test.

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "iekm/matrix_builder.hpp"
#include "iekm/model.hpp"
#include "iekm/training.hpp"

namespace support {

using iekm::Matrix;

inline Matrix random_matrix(Eigen::Index r, Eigen::Index c, std::mt19937_64& rng, double lo = -1.0,
                            double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < r; ++i)
    for (Eigen::Index j = 0; j < c; ++j) m(i, j) = u(rng);
  return m;
}

// softmax(Q K^T / sqrt(d) + mask) V, row by row.
inline Matrix reference_attention(const Matrix& q, const Matrix& k, const Matrix& v, const Matrix& mask) {
  const auto n = q.rows();
  const double scale = 1.0 / std::sqrt(static_cast<double>(q.cols()));
  Matrix out = Matrix::Zero(n, v.cols());
  for (Eigen::Index i = 0; i < n; ++i) {
    std::vector<double> s(static_cast<std::size_t>(n));
    double top = -1e300;
    for (Eigen::Index j = 0; j < n; ++j) {
      double dot = 0.0;
      for (Eigen::Index c = 0; c < q.cols(); ++c) dot += q(i, c) * k(j, c);
      s[static_cast<std::size_t>(j)] = dot * scale + mask(i, j);
      top = std::max(top, s[static_cast<std::size_t>(j)]);
    }
    double z = 0.0;
    for (auto& x : s) z += (x = std::exp(x - top));
    for (Eigen::Index j = 0; j < n; ++j) {
      for (Eigen::Index c = 0; c < v.cols(); ++c) out(i, c) += s[static_cast<std::size_t>(j)] / z * v(j, c);
    }
  }
  return out;
}

inline Matrix reference_layer_norm(const Matrix& x, const Matrix& gamma, const Matrix& beta, double eps) {
  Matrix out(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    double mean = 0.0;
    for (Eigen::Index j = 0; j < x.cols(); ++j) mean += x(i, j);
    mean /= static_cast<double>(x.cols());
    double var = 0.0;
    for (Eigen::Index j = 0; j < x.cols(); ++j) var += (x(i, j) - mean) * (x(i, j) - mean);
    var /= static_cast<double>(x.cols());
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
      out(i, j) = (x(i, j) - mean) / std::sqrt(var + eps) * gamma(0, j) + beta(0, j);
    }
  }
  return out;
}

inline double reference_gelu(double x) { return 0.5 * x * (1.0 + std::erf(x / std::sqrt(2.0))); }

// A plain post-norm transformer encoder over the same parameter names, with
// no similarity or dissimilarity input at all.
inline Matrix reference_encoder(const iekm::TokenizedPair& pair, const iekm::ModelParams& p,
                                const iekm::ModelConfig& c) {
  const auto n = static_cast<Eigen::Index>(pair.length());
  const auto seg = pair.segment_ids();
  Matrix x(n, c.hidden);
  for (Eigen::Index i = 0; i < n; ++i) {
    x.row(i) = p.at("embeddings.token").row(pair.tokens[static_cast<std::size_t>(i)]) +
               p.at("embeddings.position").row(i) + p.at("embeddings.segment").row(seg[static_cast<std::size_t>(i)]);
  }
  x = reference_layer_norm(x, p.at("embeddings.norm.gamma"), p.at("embeddings.norm.beta"), c.layer_norm_eps);
  const Matrix mask = iekm::attention_mask(pair);
  const int dk = c.head_dim();
  for (int l = 0; l < c.layers; ++l) {
    auto at = [&](const char* s) -> const Matrix& { return p.at(iekm::layer_param(l, s)); };
    const Matrix q = x * at("attn.query"), k = x * at("attn.key"), v = x * at("attn.value");
    Matrix heads(n, c.heads * dk);
    for (int h = 0; h < c.heads; ++h) {
      heads.middleCols(h * dk, dk) =
          reference_attention(q.middleCols(h * dk, dk), k.middleCols(h * dk, dk), v.middleCols(h * dk, dk), mask);
    }
    x = reference_layer_norm(x + heads * at("attn.output"), at("attn_norm.gamma"), at("attn_norm.beta"),
                             c.layer_norm_eps);
    Matrix inner = x * at("ffn.w1");
    for (Eigen::Index i = 0; i < inner.rows(); ++i)
      for (Eigen::Index j = 0; j < inner.cols(); ++j) inner(i, j) = reference_gelu(inner(i, j) + at("ffn.b1")(0, j));
    Matrix ffn = inner * at("ffn.w2");
    for (Eigen::Index i = 0; i < ffn.rows(); ++i) ffn.row(i) += at("ffn.b2");
    x = reference_layer_norm(x + ffn, at("ffn_norm.gamma"), at("ffn_norm.beta"), c.layer_norm_eps);
  }
  return x;
}

// Random lexicons over a small pool of one- and two-unit words plus words no
// provider knows.
struct RandomLexicon {
  std::vector<std::string> known;
  std::vector<std::string> unknown;
  std::vector<iekm::SimilarityProvider> providers;

  RandomLexicon(std::mt19937_64& rng, int providers_count = 2) {
    for (int i = 0; i < 12; ++i) known.push_back("k" + std::to_string(i));
    for (int i = 0; i < 4; ++i) known.push_back("p" + std::to_string(i) + " q" + std::to_string(i));
    for (int i = 0; i < 6; ++i) unknown.push_back("u" + std::to_string(i));
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::bernoulli_distribution keep(0.6);
    for (int p = 0; p < providers_count; ++p) {
      iekm::SimilarityProvider prov("random" + std::to_string(p));
      for (std::size_t a = 0; a < known.size(); ++a) {
        for (std::size_t b = a; b < known.size(); ++b) {
          if (keep(rng)) prov.set(known[a], known[b], u(rng));
        }
      }
      providers.push_back(std::move(prov));
    }
  }

  std::string sentence(std::mt19937_64& rng) const {
    std::uniform_int_distribution<int> len(1, 5);
    std::bernoulli_distribution from_known(0.8);
    std::string s;
    const int n = len(rng);
    for (int i = 0; i < n; ++i) {
      const auto& pool = from_known(rng) ? known : unknown;
      std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
      if (!s.empty()) s += ' ';
      s += pool[pick(rng)];
    }
    return s;
  }
};

// Returns an empty string when the bias matrices satisfy every structural
// invariant, otherwise a description of the first violation. Symmetry is only
// checked when requested since it needs both sentences' words swapped.
inline std::string bias_violation(const iekm::PairEncoding& enc) {
  const auto& b = enc.bias;
  const auto& pair = enc.pair;
  const auto n = static_cast<Eigen::Index>(pair.length());
  if (b.sim.rows() != n || b.dissim.rows() != n || b.cross_mask.rows() != n) return "size is not L";
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      const auto si = pair.sentence_of[static_cast<std::size_t>(i)];
      const auto sj = pair.sentence_of[static_cast<std::size_t>(j)];
      const bool cross = (si == iekm::Segment::first && sj == iekm::Segment::second) ||
                         (si == iekm::Segment::second && sj == iekm::Segment::first);
      if (b.cross_mask(i, j) != (cross ? 1.0 : 0.0)) return "cross_mask wrong";
      if (b.sim(i, j) + b.dissim(i, j) != b.cross_mask(i, j)) return "M + Mr != cross_mask";
      if (b.sim(i, j) < 0.0 || b.sim(i, j) > 1.0 || b.dissim(i, j) < 0.0 || b.dissim(i, j) > 1.0)
        return "value outside [0, 1]";
      if (!cross && (b.sim(i, j) != 0.0 || b.dissim(i, j) != 0.0)) return "nonzero off cross_mask";
    }
  }
  for (const auto& wa : pair.word_spans) {
    for (const auto& wb : pair.word_spans) {
      const double first = b.sim(static_cast<Eigen::Index>(wa.begin), static_cast<Eigen::Index>(wb.begin));
      for (std::size_t i = wa.begin; i < wa.end; ++i)
        for (std::size_t j = wb.begin; j < wb.end; ++j)
          if (b.sim(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) != first) return "block not constant";
    }
  }
  return {};
}

// Confusion counts and rates straight from their definitions.
inline iekm::Metrics brute_force_metrics(const std::vector<int>& pred, const std::vector<int>& gold) {
  iekm::Metrics m;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (pred[i] == 1 && gold[i] == 1) ++m.tp;
    if (pred[i] == 1 && gold[i] == 0) ++m.fp;
    if (pred[i] == 0 && gold[i] == 0) ++m.tn;
    if (pred[i] == 0 && gold[i] == 1) ++m.fn;
  }
  m.count = pred.size();
  const double tp = static_cast<double>(m.tp), fp = static_cast<double>(m.fp), fn = static_cast<double>(m.fn);
  m.accuracy = m.count == 0 ? 0.0 : static_cast<double>(m.tp + m.tn) / static_cast<double>(m.count);
  m.precision = m.tp + m.fp == 0 ? 0.0 : tp / (tp + fp);
  m.recall = m.tp + m.fn == 0 ? 0.0 : tp / (tp + fn);
  m.f1 = m.precision + m.recall == 0.0 ? 0.0 : 2.0 * m.precision * m.recall / (m.precision + m.recall);
  return m;
}

}  // namespace support
