#pragma once

// Single-head attention with the gated similarity/dissimilarity multiplier:
//
//   g = act(G w^T + b)                       one gate per query row
//   B = 1 + g * M + (1 - g) * Mr             broadcast along keys
//   A = softmax((Q K^T) .* B / sqrt(d_k) + mask)
//   out = A V
//
// These are plain forward evaluations used for inspection and as the
// reference the differentiable model is checked against.

#include <cmath>
#include <string>
#include <string_view>

#include "iekm/autograd.hpp"
#include "iekm/numerics.hpp"

namespace iekm {

enum class AblationMode { baseline, m_only, mr_only, full_gated };
enum class GateActivation { sigmoid, identity };

std::string_view to_string(AblationMode mode);
std::string_view to_string(GateActivation activation);
AblationMode parse_ablation_mode(std::string_view text);
GateActivation parse_gate_activation(std::string_view text);

template <typename Scalar>
Matrix2D<Scalar> compute_gates(const Matrix2D<Scalar>& g_proj, const Matrix2D<Scalar>& gate_weight,
                               Scalar gate_bias, GateActivation activation) {
  if (gate_weight.rows() != 1 || gate_weight.cols() != g_proj.cols()) {
    throw ShapeError("compute_gates: gate weight must be 1x" + std::to_string(g_proj.cols()));
  }
  Matrix2D<Scalar> raw = g_proj * gate_weight.transpose();
  raw.array() += gate_bias;
  if (activation == GateActivation::sigmoid) {
    raw = raw.unaryExpr([](Scalar x) { return ad::logistic(x); });
  }
  return raw;
}

// Elementwise factor applied to Q K^T for the given ablation mode.
template <typename Scalar>
Matrix2D<Scalar> attention_multiplier(const Matrix2D<Scalar>& gates, const Matrix2D<Scalar>& sim,
                                      const Matrix2D<Scalar>& dissim, AblationMode mode) {
  require_same_shape(sim, dissim, "attention_multiplier");
  switch (mode) {
    case AblationMode::baseline:
      return Matrix2D<Scalar>::Ones(sim.rows(), sim.cols());
    case AblationMode::m_only:
      return (sim.array() + Scalar(1)).matrix();
    case AblationMode::mr_only:
      return (dissim.array() + Scalar(1)).matrix();
    case AblationMode::full_gated:
      return ad::gated_multiplier_value(gates, sim, dissim);
  }
  throw ValidationError("attention_multiplier: unknown mode");
}

template <typename Scalar>
struct AttentionOutput {
  Matrix2D<Scalar> context;     // len x d_v
  Matrix2D<Scalar> gates;       // len x 1
  Matrix2D<Scalar> multiplier;  // len x len
  Matrix2D<Scalar> weights;     // len x len, rows sum to 1
};

template <typename Scalar>
AttentionOutput<Scalar> iekm_attention(const Matrix2D<Scalar>& q, const Matrix2D<Scalar>& k,
                                       const Matrix2D<Scalar>& v, const Matrix2D<Scalar>& g_proj,
                                       const Matrix2D<Scalar>& gate_weight, Scalar gate_bias,
                                       const Matrix2D<Scalar>& sim, const Matrix2D<Scalar>& dissim,
                                       const Matrix2D<Scalar>& mask,
                                       GateActivation activation = GateActivation::sigmoid,
                                       AblationMode mode = AblationMode::full_gated) {
  const Eigen::Index len = q.rows();
  if (k.rows() != len || v.rows() != len || g_proj.rows() != len || k.cols() != q.cols()) {
    throw ShapeError("iekm_attention: Q/K/V/G row counts or Q/K widths disagree");
  }
  if (sim.rows() != len || sim.cols() != len) {
    throw ShapeError("iekm_attention: M must be " + shape_string(len, len));
  }
  require_same_shape(sim, mask, "iekm_attention mask");

  AttentionOutput<Scalar> out;
  out.gates = compute_gates(g_proj, gate_weight, gate_bias, activation);
  require_finite(out.gates, "iekm_attention gate");
  out.multiplier = attention_multiplier(out.gates, sim, dissim, mode);
  Matrix2D<Scalar> scores = q * k.transpose();
  require_finite(scores, "iekm_attention QK^T");
  const Scalar inv_sqrt_dk = Scalar(1) / std::sqrt(Scalar(q.cols()));
  Matrix2D<Scalar> biased = scores.cwiseProduct(out.multiplier) * inv_sqrt_dk;
  require_finite(biased, "iekm_attention multiplier");
  out.weights = softmax_masked(biased, mask);
  out.context = out.weights * v;
  require_finite(out.context, "iekm_attention context");
  return out;
}

}  // namespace iekm
