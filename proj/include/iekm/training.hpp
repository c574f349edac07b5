#pragma once

// Datasets, the optimisation loop, threshold classification and metrics.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "iekm/matrix_builder.hpp"
#include "iekm/model.hpp"

namespace iekm {

struct KeywordOverride {
  std::string kw1;
  std::string kw2;
  double score = 0.0;
};

struct LabeledExample {
  std::string s1;
  std::string s2;
  double label = 0.0;
  std::optional<KeywordOverride> override;
  int group = -1;  // synthetic group id, -1 when unknown
};

// JSON lines with s1, s2, label and optional kw1, kw2, kw_score, group.
std::vector<LabeledExample> parse_dataset(std::istream& in, const std::string& source);
std::vector<LabeledExample> read_dataset(const std::filesystem::path& path);
void write_dataset(std::ostream& out, std::span<const LabeledExample> examples);
void write_dataset(const std::filesystem::path& path, std::span<const LabeledExample> examples);

struct TrainConfig {
  int epochs = 5;
  int batch_size = 64;
  double learning_rate = 2e-5;
  std::uint64_t seed = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  int min_token_count = 1;  // vocabulary cut-off

  // Settings for the small models trained on a laptop CPU.
  static TrainConfig desk_scale();
  void validate() const;
};

inline constexpr double kRegressionThreshold = 0.326;

double default_threshold(TaskMode task);

// Regression scores are distances: below the threshold is positive.
// Classification scores are similarities: above the threshold is positive.
int classify_by_threshold(double score, double threshold, TaskMode task);

struct Metrics {
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t tn = 0;
  std::size_t fn = 0;
  std::size_t count = 0;
};

bool operator==(const Metrics& a, const Metrics& b);

Metrics compute_metrics(std::span<const int> predictions, std::span<const int> gold);

// Vocabulary of the token pieces seen at least min_count times in the
// examples' segmented sentences; rarer pieces map to [UNK].
Vocabulary build_vocabulary(std::span<const LabeledExample> examples, const PairEncoder& encoder,
                            int min_count = 1);

struct EncodedExample {
  PairEncoding encoding;
  double label = 0.0;
};

// The dictionary holding one example's keyword override, if any.
std::optional<KeywordDictionary> example_dictionary(const LabeledExample& example);

std::vector<EncodedExample> encode_examples(std::span<const LabeledExample> examples,
                                            const PairEncoder& encoder, const Vocabulary& vocab);

class Adam {
 public:
  Adam(const ModelParams& like, double beta1, double beta2, double eps);
  void step(ModelParams& params, const ModelParams& grads, double learning_rate);

 private:
  ModelParams m_;
  ModelParams v_;
  double beta1_;
  double beta2_;
  double eps_;
  long steps_ = 0;
};

struct TrainResult {
  ModelParams params;
  std::vector<double> epoch_loss;
};

// Mini-batch Adam on the mean example loss. Throws NumericError naming the
// epoch and batch when a loss turns non-finite.
TrainResult train(const TrainConfig& config, const ModelConfig& model_config,
                  std::span<const EncodedExample> data, ModelParams initial);

struct TrainedModel {
  Model model;
  std::vector<double> epoch_loss;
};

// Builds the vocabulary from the examples, initialises with config.seed and
// trains.
TrainedModel train_model(const TrainConfig& config, ModelConfig model_config,
                         std::span<const LabeledExample> examples, const PairEncoder& encoder);

struct Evaluation {
  Metrics metrics;
  std::vector<double> scores;
};

// Scores every example (applying its keyword override) and thresholds both
// scores and labels with classify_by_threshold.
Evaluation evaluate(const Model& model, std::span<const LabeledExample> examples,
                    const PairEncoder& encoder, double threshold, int threads = 1);

Evaluation evaluate_encoded(const Model& model, std::span<const EncodedExample> examples,
                            double threshold, int threads = 1);

// Deterministic split that keeps each group wholly on one side. Examples
// without a group are split individually.
struct Split {
  std::vector<LabeledExample> train;
  std::vector<LabeledExample> test;
};

Split split_by_group(std::span<const LabeledExample> examples, double test_fraction, std::uint64_t seed);

}  // namespace iekm
