#include "iekm/experiments.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>

#include "iekm/errors.hpp"

namespace iekm {

ModelConfig desk_model_config() {
  ModelConfig c;
  c.heads = 2;
  c.hidden = 16;
  c.layers = 2;
  c.init_std = 0.3;
  return c;
}

std::vector<AblationRow> run_ablation(const TrainConfig& train_config, const ModelConfig& model_config,
                                      std::span<const LabeledExample> train,
                                      std::span<const LabeledExample> test, const PairEncoder& encoder,
                                      double threshold, int threads) {
  if (train.empty() || test.empty()) throw ValidationError("ablation needs train and test examples");
  std::vector<AblationRow> rows;
  for (AblationMode mode : kAblationOrder) {
    const auto start = std::chrono::steady_clock::now();
    ModelConfig config = model_config;
    config.ablation = mode;
    TrainedModel trained = train_model(train_config, config, train, encoder);
    AblationRow row;
    row.mode = mode;
    row.train = evaluate(trained.model, train, encoder, threshold, threads).metrics;
    row.test = evaluate(trained.model, test, encoder, threshold, threads).metrics;
    row.epoch_loss = std::move(trained.epoch_loss);
    row.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string format_ablation_table(std::span<const AblationRow> rows) {
  std::string out = "mode         train_acc  test_acc  test_f1  final_loss  seconds\n";
  char line[128];
  for (const auto& r : rows) {
    std::snprintf(line, sizeof line, "%-12s %9.4f %9.4f %8.4f %11.5f %8.1f\n",
                  std::string(to_string(r.mode)).c_str(), r.train.accuracy, r.test.accuracy, r.test.f1,
                  r.epoch_loss.empty() ? 0.0 : r.epoch_loss.back(), r.seconds);
    out += line;
  }
  return out;
}

std::vector<ThresholdPoint> sweep_threshold(std::span<const double> scores, std::span<const double> labels,
                                            TaskMode task, int steps) {
  if (scores.size() != labels.size() || scores.empty()) {
    throw ValidationError("sweep_threshold: need equally many scores and labels");
  }
  if (steps < 2) throw ValidationError("sweep_threshold: steps must be at least 2");
  const double gold_threshold = default_threshold(task);
  std::vector<int> gold(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) gold[i] = classify_by_threshold(labels[i], gold_threshold, task);
  std::vector<ThresholdPoint> out;
  std::vector<int> predicted(scores.size());
  for (int k = 0; k < steps; ++k) {
    const double t = static_cast<double>(k) / (steps - 1);
    for (std::size_t i = 0; i < scores.size(); ++i) predicted[i] = classify_by_threshold(scores[i], t, task);
    out.push_back({t, compute_metrics(predicted, gold)});
  }
  return out;
}

ThresholdPoint best_threshold(std::span<const ThresholdPoint> sweep, TaskMode task) {
  if (sweep.empty()) throw ValidationError("best_threshold: empty sweep");
  const double home = default_threshold(task);
  const ThresholdPoint* best = &sweep.front();
  for (const auto& p : sweep) {
    if (p.metrics.accuracy > best->metrics.accuracy ||
        (p.metrics.accuracy == best->metrics.accuracy &&
         std::abs(p.threshold - home) < std::abs(best->threshold - home))) {
      best = &p;
    }
  }
  return *best;
}

}  // namespace iekm
