#include "iekm/model.hpp"

#include <cmath>
#include <random>

namespace iekm {
namespace {

Matrix normal_matrix(Eigen::Index rows, Eigen::Index cols, double stddev, std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, stddev);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = dist(rng);
  return m;
}

constexpr int kSegmentRows = 3;

}  // namespace

std::string_view to_string(AblationMode mode) {
  switch (mode) {
    case AblationMode::baseline:
      return "baseline";
    case AblationMode::m_only:
      return "M_only";
    case AblationMode::mr_only:
      return "Mr_only";
    case AblationMode::full_gated:
      return "full_gated";
  }
  return "unknown";
}

std::string_view to_string(GateActivation activation) {
  return activation == GateActivation::sigmoid ? "sigmoid" : "identity";
}

std::string_view to_string(TaskMode mode) {
  return mode == TaskMode::classification ? "classification" : "regression";
}

AblationMode parse_ablation_mode(std::string_view text) {
  for (auto m : {AblationMode::baseline, AblationMode::m_only, AblationMode::mr_only,
                 AblationMode::full_gated}) {
    if (text == to_string(m)) return m;
  }
  throw ValidationError("unknown ablation mode '" + std::string(text) + "'");
}

GateActivation parse_gate_activation(std::string_view text) {
  if (text == "sigmoid") return GateActivation::sigmoid;
  if (text == "identity") return GateActivation::identity;
  throw ValidationError("unknown gate activation '" + std::string(text) + "'");
}

TaskMode parse_task_mode(std::string_view text) {
  if (text == "classification") return TaskMode::classification;
  if (text == "regression") return TaskMode::regression;
  throw ValidationError("unknown task mode '" + std::string(text) + "'");
}

void ModelConfig::validate() const {
  if (heads < 1 || hidden < 1 || hidden % heads != 0) {
    throw ValidationError("hidden size must be a positive multiple of the head count");
  }
  if (layers < 1) throw ValidationError("at least one encoder layer is required");
  if (max_len < 4) throw ValidationError("max_len must be at least 4");
  if (vocab_size < 4) throw ValidationError("vocab_size must cover the 4 special tokens");
  if (ffn_multiplier < 1) throw ValidationError("ffn_multiplier must be positive");
  if (!(layer_norm_eps > 0.0)) throw ValidationError("layer_norm_eps must be positive");
  if (!(init_std > 0.0)) throw ValidationError("init_std must be positive");
}

bool operator==(const ModelConfig& a, const ModelConfig& b) {
  return a.heads == b.heads && a.hidden == b.hidden && a.layers == b.layers &&
         a.vocab_size == b.vocab_size && a.max_len == b.max_len &&
         a.ffn_multiplier == b.ffn_multiplier && a.layer_norm_eps == b.layer_norm_eps &&
         a.init_std == b.init_std && a.ablation == b.ablation && a.gate == b.gate &&
         a.task == b.task;
}

std::string layer_param(int layer, std::string_view suffix) {
  return "layer" + std::to_string(layer) + "." + std::string(suffix);
}

ModelParams ModelParams::init(const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  std::mt19937_64 rng(seed);
  const double sd = config.init_std;
  const int d = config.hidden;
  const int hd = config.heads * config.head_dim();
  ModelParams p;
  p.add("embeddings.token", normal_matrix(config.vocab_size, d, sd, rng));
  p.add("embeddings.position", normal_matrix(config.max_len, d, sd, rng));
  p.add("embeddings.segment", normal_matrix(kSegmentRows, d, sd, rng));
  p.add("embeddings.norm.gamma", Matrix::Ones(1, d));
  p.add("embeddings.norm.beta", Matrix::Zero(1, d));
  for (int l = 0; l < config.layers; ++l) {
    p.add(layer_param(l, "attn.query"), normal_matrix(d, hd, sd, rng));
    p.add(layer_param(l, "attn.key"), normal_matrix(d, hd, sd, rng));
    p.add(layer_param(l, "attn.value"), normal_matrix(d, hd, sd, rng));
    p.add(layer_param(l, "attn.gate_proj"), normal_matrix(d, hd, sd, rng));
    p.add(layer_param(l, "attn.gate_weight"), normal_matrix(config.heads, config.head_dim(), sd, rng));
    p.add(layer_param(l, "attn.gate_bias"), Matrix::Zero(1, config.heads));
    p.add(layer_param(l, "attn.output"), normal_matrix(hd, d, sd, rng));
    p.add(layer_param(l, "attn_norm.gamma"), Matrix::Ones(1, d));
    p.add(layer_param(l, "attn_norm.beta"), Matrix::Zero(1, d));
    p.add(layer_param(l, "ffn.w1"), normal_matrix(d, config.ffn_size(), sd, rng));
    p.add(layer_param(l, "ffn.b1"), Matrix::Zero(1, config.ffn_size()));
    p.add(layer_param(l, "ffn.w2"), normal_matrix(config.ffn_size(), d, sd, rng));
    p.add(layer_param(l, "ffn.b2"), Matrix::Zero(1, d));
    p.add(layer_param(l, "ffn_norm.gamma"), Matrix::Ones(1, d));
    p.add(layer_param(l, "ffn_norm.beta"), Matrix::Zero(1, d));
  }
  p.add("pooler.weight", normal_matrix(d, d, sd, rng));
  p.add("pooler.bias", Matrix::Zero(1, d));
  p.add("head.weight", normal_matrix(d, 1, sd, rng));
  p.add("head.bias", Matrix::Zero(1, 1));
  return p;
}

void ModelParams::add(std::string name, Matrix value) {
  if (!index_.emplace(name, tensors_.size()).second) {
    throw ValidationError("duplicate parameter " + name);
  }
  tensors_.push_back({std::move(name), std::move(value)});
}

std::size_t ModelParams::index(std::string_view name) const {
  const auto it = index_.find(std::string(name));
  if (it == index_.end()) throw ValidationError("unknown parameter " + std::string(name));
  return it->second;
}

std::size_t ModelParams::scalar_count() const {
  std::size_t n = 0;
  for (const auto& t : tensors_) n += static_cast<std::size_t>(t.value.size());
  return n;
}

ModelParams ModelParams::zeros_like() const {
  ModelParams z;
  for (const auto& t : tensors_) z.add(t.name, Matrix::Zero(t.value.rows(), t.value.cols()));
  return z;
}

bool ModelParams::all_finite() const {
  for (const auto& t : tensors_) {
    if (!t.value.allFinite()) return false;
  }
  return true;
}

bool operator==(const ModelParams& a, const ModelParams& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const auto& x = a.tensors()[i];
    const auto& y = b.tensors()[i];
    if (x.name != y.name || x.value.rows() != y.value.rows() || x.value.cols() != y.value.cols() ||
        x.value != y.value) {
      return false;
    }
  }
  return true;
}

ParamBinding::ParamBinding(Tape& tape, const ModelParams& params, ModelParams* grads) : params_(&params) {
  if (grads != nullptr && grads->size() != params.size()) {
    throw ShapeError("ParamBinding: gradient store does not match the parameters");
  }
  vars_.reserve(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    Matrix* sink = grads != nullptr ? &grads->tensors()[i].value : nullptr;
    vars_.push_back(tape.parameter(params.tensors()[i].value, sink));
  }
}

const Var& ParamBinding::operator[](std::string_view name) const { return vars_[params_->index(name)]; }

Var multi_head(Tape& tape, const ParamBinding& p, const ModelConfig& config, int layer, const Var& x,
               const BiasMatrices& bias, const Matrix& mask, ForwardTrace* trace) {
  const int dk = config.head_dim();
  const double inv_sqrt_dk = 1.0 / std::sqrt(static_cast<double>(dk));
  const Var q = ad::matmul(x, p[layer_param(layer, "attn.query")]);
  const Var k = ad::matmul(x, p[layer_param(layer, "attn.key")]);
  const Var v = ad::matmul(x, p[layer_param(layer, "attn.value")]);
  const bool gated = config.ablation == AblationMode::full_gated;
  Var g_all;
  if (gated) g_all = ad::matmul(x, p[layer_param(layer, "attn.gate_proj")]);

  std::vector<HeadTrace>* layer_trace = nullptr;
  if (trace != nullptr) {
    if (trace->layers.size() <= static_cast<std::size_t>(layer)) trace->layers.resize(layer + 1);
    layer_trace = &trace->layers[static_cast<std::size_t>(layer)];
    layer_trace->clear();
  }

  std::vector<Var> heads;
  heads.reserve(static_cast<std::size_t>(config.heads));
  for (int h = 0; h < config.heads; ++h) {
    const Var qh = ad::slice_cols(q, h * dk, dk);
    const Var kh = ad::slice_cols(k, h * dk, dk);
    const Var vh = ad::slice_cols(v, h * dk, dk);
    Var scores = ad::matmul_nt(qh, kh);
    HeadTrace ht;
    switch (config.ablation) {
      case AblationMode::baseline:
        break;
      case AblationMode::m_only:
        scores = ad::hadamard(scores, tape.constant((bias.sim.array() + 1.0).matrix()));
        break;
      case AblationMode::mr_only:
        scores = ad::hadamard(scores, tape.constant((bias.dissim.array() + 1.0).matrix()));
        break;
      case AblationMode::full_gated: {
        const Var gh = ad::slice_cols(g_all, h * dk, dk);
        const Var w = ad::slice_rows(p[layer_param(layer, "attn.gate_weight")], h, 1);
        const Var b = ad::slice_cols(p[layer_param(layer, "attn.gate_bias")], h, 1);
        Var gate = ad::add_row(ad::matmul_nt(gh, w), b);
        if (config.gate == GateActivation::sigmoid) gate = ad::sigmoid(gate);
        const Var multiplier = ad::gated_multiplier(gate, bias.sim, bias.dissim);
        scores = ad::hadamard(scores, multiplier);
        if (layer_trace != nullptr) {
          ht.gates = gate.value();
          ht.multiplier = multiplier.value();
        }
        break;
      }
    }
    const Var weights = ad::softmax_rows(ad::scale(scores, inv_sqrt_dk), mask);
    if (layer_trace != nullptr) {
      if (ht.multiplier.size() == 0) {
        ht.multiplier = attention_multiplier(Matrix{}, bias.sim, bias.dissim, config.ablation);
      }
      ht.weights = weights.value();
      layer_trace->push_back(std::move(ht));
    }
    heads.push_back(ad::matmul(weights, vh));
  }
  const Var concat = ad::concat_cols<double>(heads);
  return ad::matmul(concat, p[layer_param(layer, "attn.output")]);
}

Var encoder_forward(Tape& tape, const ParamBinding& p, const ModelConfig& config,
                    const TokenizedPair& pair, const BiasMatrices& bias, ForwardTrace* trace) {
  const auto len = static_cast<Eigen::Index>(pair.length());
  if (pair.length() > static_cast<std::size_t>(config.max_len)) {
    throw ValidationError("sequence of " + std::to_string(pair.length()) +
                          " tokens exceeds max_len " + std::to_string(config.max_len));
  }
  if (bias.sim.rows() != len || bias.dissim.rows() != len) {
    throw ShapeError("encoder_forward: bias matrices do not match the sequence length");
  }
  std::vector<int> positions(pair.length());
  for (std::size_t i = 0; i < positions.size(); ++i) positions[i] = static_cast<int>(i);
  const std::vector<int> segments = pair.segment_ids();
  for (int id : pair.tokens) {
    if (id < 0 || id >= config.vocab_size) {
      throw ValidationError("token id " + std::to_string(id) + " outside the vocabulary");
    }
  }

  const double eps = config.layer_norm_eps;
  Var x = ad::gather_rows<double>(p["embeddings.token"], pair.tokens);
  x = x + ad::gather_rows<double>(p["embeddings.position"], positions);
  x = x + ad::gather_rows<double>(p["embeddings.segment"], segments);
  x = ad::layer_norm(x, p["embeddings.norm.gamma"], p["embeddings.norm.beta"], eps);

  const Matrix mask = attention_mask(pair);
  for (int l = 0; l < config.layers; ++l) {
    const Var attn = multi_head(tape, p, config, l, x, bias, mask, trace);
    x = ad::layer_norm(x + attn, p[layer_param(l, "attn_norm.gamma")],
                       p[layer_param(l, "attn_norm.beta")], eps);
    Var ff = ad::gelu(ad::add_row(ad::matmul(x, p[layer_param(l, "ffn.w1")]), p[layer_param(l, "ffn.b1")]));
    ff = ad::add_row(ad::matmul(ff, p[layer_param(l, "ffn.w2")]), p[layer_param(l, "ffn.b2")]);
    x = ad::layer_norm(x + ff, p[layer_param(l, "ffn_norm.gamma")], p[layer_param(l, "ffn_norm.beta")],
                       eps);
  }
  return x;
}

Var pool_logit(const ParamBinding& p, const Var& hidden) {
  const Var cls = ad::slice_rows(hidden, 0, 1);
  const Var pooled = ad::tanh(ad::add_row(ad::matmul(cls, p["pooler.weight"]), p["pooler.bias"]));
  return ad::add_row(ad::matmul(pooled, p["head.weight"]), p["head.bias"]);
}

void validate_label(double label, TaskMode task) {
  if (task == TaskMode::classification) {
    if (label != 0.0 && label != 1.0) {
      throw ValidationError("classification label must be 0 or 1, got " + std::to_string(label));
    }
  } else if (!(label >= 0.0 && label <= 1.0)) {
    throw ValidationError("regression label must lie in [0, 1], got " + std::to_string(label));
  }
}

Var loss_from_logit(const Var& logit, double label, TaskMode task) {
  validate_label(label, task);
  if (task == TaskMode::classification) return ad::bce_with_logits(logit, label);
  return ad::squared_error(ad::sigmoid(logit), label);
}

Matrix encoder_forward(const TokenizedPair& pair, const BiasMatrices& bias, const ModelParams& params,
                       const ModelConfig& config, ForwardTrace* trace) {
  Tape tape;
  const ParamBinding p(tape, params);
  return encoder_forward(tape, p, config, pair, bias, trace).value();
}

double pool_and_score(const Matrix& hidden, const ModelParams& params) {
  Tape tape;
  const ParamBinding p(tape, params);
  const Var logit = pool_logit(p, tape.constant(hidden));
  return ad::logistic(logit.value()(0, 0));
}

double predict(const Model& model, const PairEncoding& encoding) {
  Tape tape;
  const ParamBinding p(tape, model.params);
  const Var hidden = encoder_forward(tape, p, model.config, encoding.pair, encoding.bias);
  return ad::logistic(pool_logit(p, hidden).value()(0, 0));
}

double compute_loss(double score, double label, TaskMode task) {
  validate_label(label, task);
  if (!(score >= 0.0 && score <= 1.0)) {
    throw ValidationError("score must lie in [0, 1], got " + std::to_string(score));
  }
  if (task == TaskMode::regression) return (score - label) * (score - label);
  constexpr double kTiny = 1e-15;
  const double s = std::clamp(score, kTiny, 1.0 - kTiny);
  return -(label * std::log(s) + (1.0 - label) * std::log(1.0 - s));
}

LossEval accumulate_gradients(const ModelParams& params, const ModelConfig& config,
                              const PairEncoding& encoding, double label, ModelParams& grads) {
  Tape tape;
  const ParamBinding p(tape, params, &grads);
  const Var hidden = encoder_forward(tape, p, config, encoding.pair, encoding.bias);
  const Var logit = pool_logit(p, hidden);
  const Var loss = loss_from_logit(logit, label, config.task);
  tape.backward(loss);
  return {loss.value()(0, 0), ad::logistic(logit.value()(0, 0))};
}

LossEval evaluate_loss(const ModelParams& params, const ModelConfig& config,
                       const PairEncoding& encoding, double label) {
  Tape tape;
  const ParamBinding p(tape, params);
  const Var hidden = encoder_forward(tape, p, config, encoding.pair, encoding.bias);
  const Var logit = pool_logit(p, hidden);
  const Var loss = loss_from_logit(logit, label, config.task);
  return {loss.value()(0, 0), ad::logistic(logit.value()(0, 0))};
}

}  // namespace iekm
