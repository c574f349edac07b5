#pragma once

// The cross-encoder: embeddings, a stack of encoder layers whose attention
// heads consume the (M, Mr) bias matrices, CLS pooling and a scalar head.

#include <cstdint>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "iekm/attention.hpp"
#include "iekm/autograd.hpp"
#include "iekm/matrix_builder.hpp"
#include "iekm/text.hpp"

namespace iekm {

enum class TaskMode { classification, regression };

std::string_view to_string(TaskMode mode);
TaskMode parse_task_mode(std::string_view text);

struct ModelConfig {
  int heads = 2;
  int hidden = 16;  // d_m
  int layers = 2;
  int vocab_size = 4;
  int max_len = 64;
  int ffn_multiplier = 4;
  double layer_norm_eps = 1e-12;
  double init_std = 0.02;
  AblationMode ablation = AblationMode::full_gated;
  GateActivation gate = GateActivation::sigmoid;
  TaskMode task = TaskMode::classification;

  int head_dim() const { return hidden / heads; }
  int ffn_size() const { return ffn_multiplier * hidden; }
  // Throws ValidationError on inconsistent sizes.
  void validate() const;
};

bool operator==(const ModelConfig& a, const ModelConfig& b);

// Named parameter tensors in a fixed order. The same layout doubles as
// gradient storage (see zeros_like).
class ModelParams {
 public:
  struct Tensor {
    std::string name;
    Matrix value;
  };

  ModelParams() = default;

  // normal(0, init_std) for weight matrices and embeddings, zeros for biases
  // (including the gate bias), ones for layer-norm gains.
  static ModelParams init(const ModelConfig& config, std::uint64_t seed);

  void add(std::string name, Matrix value);
  std::size_t index(std::string_view name) const;
  bool contains(std::string_view name) const { return index_.count(std::string(name)) != 0; }
  Matrix& at(std::string_view name) { return tensors_[index(name)].value; }
  const Matrix& at(std::string_view name) const { return tensors_[index(name)].value; }
  std::vector<Tensor>& tensors() { return tensors_; }
  const std::vector<Tensor>& tensors() const { return tensors_; }
  std::size_t size() const { return tensors_.size(); }
  std::size_t scalar_count() const;

  ModelParams zeros_like() const;
  bool all_finite() const;

 private:
  std::vector<Tensor> tensors_;
  std::unordered_map<std::string, std::size_t> index_;
};

bool operator==(const ModelParams& a, const ModelParams& b);

// Tensor names for layer `l`.
std::string layer_param(int layer, std::string_view suffix);

struct Model {
  ModelConfig config;
  ModelParams params;
  Vocabulary vocab;
};

using Tape = ad::Tape<double>;
using Var = ad::Var<double>;

// Tape leaves for every parameter tensor; with a gradient store the leaves
// feed their gradients into it, otherwise they are constants.
class ParamBinding {
 public:
  ParamBinding(Tape& tape, const ModelParams& params, ModelParams* grads = nullptr);
  const Var& operator[](std::string_view name) const;

 private:
  const ModelParams* params_;
  std::vector<Var> vars_;
};

struct HeadTrace {
  Matrix gates;
  Matrix multiplier;
  Matrix weights;
};

// Per layer, per head attention internals captured during a forward pass.
struct ForwardTrace {
  std::vector<std::vector<HeadTrace>> layers;
};

// One encoder layer's multi-head attention block (before the residual).
Var multi_head(Tape& tape, const ParamBinding& p, const ModelConfig& config, int layer, const Var& x,
               const BiasMatrices& bias, const Matrix& mask, ForwardTrace* trace = nullptr);

// Final hidden states, one row per position.
Var encoder_forward(Tape& tape, const ParamBinding& p, const ModelConfig& config,
                    const TokenizedPair& pair, const BiasMatrices& bias,
                    ForwardTrace* trace = nullptr);

// CLS row -> tanh dense -> linear; returns the 1x1 logit.
Var pool_logit(const ParamBinding& p, const Var& hidden);

Var loss_from_logit(const Var& logit, double label, TaskMode task);

// Forward-only evaluations on immutable parameters.
Matrix encoder_forward(const TokenizedPair& pair, const BiasMatrices& bias, const ModelParams& params,
                       const ModelConfig& config, ForwardTrace* trace = nullptr);
double pool_and_score(const Matrix& hidden, const ModelParams& params);
double predict(const Model& model, const PairEncoding& encoding);

// Binary cross-entropy (classification) or squared error (regression).
double compute_loss(double score, double label, TaskMode task);

// Throws ValidationError when the label does not fit the task.
void validate_label(double label, TaskMode task);

struct LossEval {
  double loss = 0.0;
  double score = 0.0;
};

// Runs forward and backward for one example, adding gradients into grads.
LossEval accumulate_gradients(const ModelParams& params, const ModelConfig& config,
                              const PairEncoding& encoding, double label, ModelParams& grads);

LossEval evaluate_loss(const ModelParams& params, const ModelConfig& config,
                       const PairEncoding& encoding, double label);

}  // namespace iekm
