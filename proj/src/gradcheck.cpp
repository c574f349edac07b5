#include "iekm/gradcheck.hpp"

#include <algorithm>
#include <map>
#include <random>

#include "iekm/errors.hpp"

namespace iekm {
namespace {

// [CLS] w0 w1 [SEP] w2 w3 ... [SEP] with random cross-sentence scores.
PairEncoding random_encoding(const ModelConfig& config, std::mt19937_64& rng) {
  const int words = config.max_len - 3;
  if (words < 2) throw ValidationError("gradcheck needs max_len >= 5");
  Vocabulary vocab;
  std::vector<WordSegment> first;
  std::vector<WordSegment> second;
  for (int i = 0; i < words; ++i) {
    const std::string w = "w" + std::to_string(i);
    vocab.add(w);
    (i < (words + 1) / 2 ? first : second).push_back({w, 0, 0});
  }
  if (vocab.size() > config.vocab_size) throw ValidationError("gradcheck vocab_size too small");

  PairEncoding enc;
  enc.pair = tokenize_pair(first, second, vocab);
  enc.bias.cross_mask = cross_sentence_mask(enc.pair);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  enc.bias.sim = enc.bias.cross_mask.unaryExpr([&](double c) { return c * unit(rng); });
  enc.bias.dissim = derive_dissimilarity(enc.bias.sim, enc.bias.cross_mask);
  return enc;
}

// The task loss plus a fixed random readout over every position. With one
// layer the CLS row alone never sees M or Mr (special tokens carry no bias),
// so without the readout the gate parameters would get no gradient at all.
Var objective(Tape& tape, const ParamBinding& p, const ModelConfig& config, const PairEncoding& enc,
              double label, const Matrix& readout) {
  const Var hidden = encoder_forward(tape, p, config, enc.pair, enc.bias);
  const Var task = loss_from_logit(pool_logit(p, hidden), label, config.task);
  const Var rows = tape.constant(Matrix::Ones(1, hidden.rows()));
  const Var cols = tape.constant(Matrix::Ones(hidden.cols(), 1));
  const Var probe = ad::matmul(ad::matmul(rows, ad::hadamard(hidden, tape.constant(readout))), cols);
  return task + probe;
}

}  // namespace

ModelConfig tiny_gradcheck_config(AblationMode mode) {
  ModelConfig c;
  c.layers = 1;
  c.heads = 2;
  c.hidden = 8;
  c.max_len = 6;
  c.vocab_size = 8;
  c.init_std = 0.5;
  c.ablation = mode;
  return c;
}

std::string param_group(const std::string& name) {
  if (name.starts_with("embeddings.") && !name.starts_with("embeddings.norm")) return "embeddings";
  if (name.find("norm.") != std::string::npos) return "layer_norm";
  if (name.starts_with("pooler.") || name.starts_with("head.")) return "heads";
  for (const char* g : {"query", "key", "value", "gate_proj", "gate_weight", "gate_bias", "output"}) {
    if (name.ends_with(std::string("attn.") + g)) return g;
  }
  if (name.find(".ffn.") != std::string::npos) return "ffn";
  throw ValidationError("no gradient group for parameter " + name);
}

std::vector<std::string> unused_groups(AblationMode mode) {
  if (mode == AblationMode::full_gated) return {};
  return {"gate_proj", "gate_weight", "gate_bias"};
}

std::vector<std::string> GradcheckReport::failures() const {
  std::vector<std::string> out;
  for (const auto& g : groups) {
    if (g.expected_unused) {
      if (g.analytic_max_abs != 0.0) out.push_back(g.group + " (unused but gradient non-zero)");
    } else if (g.analytic_max_abs == 0.0) {
      out.push_back(g.group + " (gradient identically zero)");
    } else if (!(g.max_relative_error < tolerance)) {
      out.push_back(g.group + " (relative error " + std::to_string(g.max_relative_error) + ")");
    }
  }
  return out;
}

GradcheckReport gradcheck_harness(const ModelConfig& config, std::uint64_t seed, double epsilon) {
  config.validate();
  std::mt19937_64 rng(seed);
  ModelParams params = ModelParams::init(config, rng());
  const PairEncoding enc = random_encoding(config, rng);
  const double label = config.task == TaskMode::classification ? 1.0 : 0.25;

  std::normal_distribution<double> normal(0.0, 1.0);
  const Matrix readout = Matrix::NullaryExpr(static_cast<Eigen::Index>(enc.pair.length()), config.hidden,
                                             [&] { return normal(rng); });

  ModelParams analytic = params.zeros_like();
  GradcheckReport report;
  report.config = config;
  report.epsilon = epsilon;
  {
    Tape tape;
    const ParamBinding p(tape, params, &analytic);
    const Var loss = objective(tape, p, config, enc, label, readout);
    tape.backward(loss);
    report.loss = loss.value()(0, 0);
  }

  std::vector<ParamRef<double>> refs;
  for (auto& t : params.tensors()) refs.push_back({t.name, &t.value});
  const auto numeric = finite_diff_gradient<double>(
      [&] {
        Tape tape;
        const ParamBinding p(tape, params);
        return objective(tape, p, config, enc, label, readout).value()(0, 0);
      },
      refs, epsilon);

  const auto unused = unused_groups(config.ablation);
  std::map<std::string, GroupCheck> by_group;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const std::string& name = params.tensors()[i].name;
    const Matrix& a = analytic.tensors()[i].value;
    GroupCheck& g = by_group[param_group(name)];
    g.group = param_group(name);
    g.expected_unused = std::find(unused.begin(), unused.end(), g.group) != unused.end();
    g.tensors.push_back(name);
    g.max_relative_error = std::max(g.max_relative_error, relative_error(a, numeric[i]));
    g.analytic_max_abs = std::max(g.analytic_max_abs, a.cwiseAbs().maxCoeff());
  }
  for (auto& [name, g] : by_group) report.groups.push_back(std::move(g));
  return report;
}

}  // namespace iekm
