#pragma once

// Experiment drivers shared by the command line and the acceptance suite.

#include <string>
#include <vector>

#include "iekm/matrix_builder.hpp"
#include "iekm/model.hpp"
#include "iekm/training.hpp"

namespace iekm {

// Two layers, two heads, d_m = 16. A one-layer model cannot use the bias
// matrices for classification because the CLS row carries no bias, and the
// wider init spread lets the multiplicative bias act from the first step.
ModelConfig desk_model_config();

struct AblationRow {
  AblationMode mode = AblationMode::baseline;
  Metrics train;
  Metrics test;
  std::vector<double> epoch_loss;
  double seconds = 0.0;
};

inline constexpr AblationMode kAblationOrder[] = {AblationMode::baseline, AblationMode::m_only,
                                                  AblationMode::mr_only, AblationMode::full_gated};

// Trains and evaluates one model per ablation mode on identical data and seed.
std::vector<AblationRow> run_ablation(const TrainConfig& train_config, const ModelConfig& model_config,
                                      std::span<const LabeledExample> train,
                                      std::span<const LabeledExample> test, const PairEncoder& encoder,
                                      double threshold, int threads = 1);

// Plain-text comparison table.
std::string format_ablation_table(std::span<const AblationRow> rows);

struct ThresholdPoint {
  double threshold = 0.0;
  Metrics metrics;
};

// Metrics at `steps` evenly spaced thresholds over [0, 1].
std::vector<ThresholdPoint> sweep_threshold(std::span<const double> scores, std::span<const double> labels,
                                            TaskMode task, int steps = 101);

// Highest accuracy; ties go to the threshold nearest the task default.
ThresholdPoint best_threshold(std::span<const ThresholdPoint> sweep, TaskMode task);

}  // namespace iekm
