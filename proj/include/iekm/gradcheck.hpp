#pragma once

// Analytic vs central-difference gradients for every parameter tensor of a
// tiny model, summarised per parameter group.

#include <cstdint>
#include <string>
#include <vector>

#include "iekm/model.hpp"

namespace iekm {

inline constexpr double kGradcheckTolerance = 1e-4;

// 1 layer, 2 heads, d_m = 8, sequence length 6. The larger init spread keeps
// attention scores away from zero so the gate gradients are not vanishingly
// small.
ModelConfig tiny_gradcheck_config(AblationMode mode = AblationMode::full_gated);

// embeddings, query, key, value, gate_proj, gate_weight, gate_bias, output,
// ffn, layer_norm or heads.
std::string param_group(const std::string& tensor_name);

// Groups the given ablation mode never touches.
std::vector<std::string> unused_groups(AblationMode mode);

struct GroupCheck {
  std::string group;
  std::vector<std::string> tensors;
  double max_relative_error = 0.0;  // worst tensor, Frobenius-norm relative error
  double analytic_max_abs = 0.0;
  bool expected_unused = false;
};

struct GradcheckReport {
  ModelConfig config;
  double epsilon = 1e-5;
  double tolerance = kGradcheckTolerance;
  double loss = 0.0;
  std::vector<GroupCheck> groups;

  // Names of groups that break the tolerance, have a non-zero gradient while
  // unused, or an all-zero gradient while used.
  std::vector<std::string> failures() const;
  bool passed() const { return failures().empty(); }
};

// The checked objective is the task loss plus a fixed random readout of all
// final hidden states, so one layer suffices to reach every parameter.
GradcheckReport gradcheck_harness(const ModelConfig& config, std::uint64_t seed, double epsilon = 1e-5);

}  // namespace iekm
