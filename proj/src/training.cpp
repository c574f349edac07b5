#include "iekm/training.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <random>
#include <thread>
#include <unordered_map>

#include "json.hpp"

namespace iekm {
namespace {

using nlohmann::json;

template <typename Fn>
void parallel_for(std::size_t n, int threads, Fn fn) {
  const std::size_t workers = std::clamp<std::size_t>(static_cast<std::size_t>(std::max(threads, 1)), 1, std::max<std::size_t>(n, 1));
  if (workers == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(workers);
  const std::size_t chunk = (n + workers - 1) / workers;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t i = w * chunk; i < std::min(n, (w + 1) * chunk); ++i) fn(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

template <typename T>
void shuffle_in_place(std::vector<T>& v, std::mt19937_64& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    std::uniform_int_distribution<std::size_t> pick(0, i - 1);
    std::swap(v[i - 1], v[pick(rng)]);
  }
}

}  // namespace

std::vector<LabeledExample> parse_dataset(std::istream& in, const std::string& source) {
  std::vector<LabeledExample> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ParseError(source, line_no, e.what());
    }
    try {
      LabeledExample ex;
      ex.s1 = j.at("s1").get<std::string>();
      ex.s2 = j.at("s2").get<std::string>();
      ex.label = j.contains("label") ? j.at("label").get<double>() : 0.0;
      const bool has_kw = j.contains("kw1") || j.contains("kw2") || j.contains("kw_score");
      if (has_kw) {
        ex.override = KeywordOverride{j.at("kw1").get<std::string>(), j.at("kw2").get<std::string>(),
                                      j.value("kw_score", 0.0)};
        if (ex.override->score != 0.0 && ex.override->score != 1.0) {
          throw ValidationError("kw_score must be 0 or 1");
        }
      }
      if (j.contains("group")) ex.group = j.at("group").get<int>();
      out.push_back(std::move(ex));
    } catch (const json::exception& e) {
      throw ParseError(source, line_no, e.what());
    } catch (const ValidationError& e) {
      throw ParseError(source, line_no, e.what());
    }
  }
  return out;
}

std::vector<LabeledExample> read_dataset(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open dataset " + path.string());
  return parse_dataset(in, path.string());
}

void write_dataset(std::ostream& out, std::span<const LabeledExample> examples) {
  for (const auto& ex : examples) {
    json j = {{"s1", ex.s1}, {"s2", ex.s2}, {"label", ex.label}};
    if (ex.override) {
      j["kw1"] = ex.override->kw1;
      j["kw2"] = ex.override->kw2;
      j["kw_score"] = ex.override->score;
    }
    if (ex.group >= 0) j["group"] = ex.group;
    out << j.dump() << '\n';
  }
}

void write_dataset(const std::filesystem::path& path, std::span<const LabeledExample> examples) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write dataset " + path.string());
  write_dataset(out, examples);
}

TrainConfig TrainConfig::desk_scale() {
  TrainConfig c;
  c.epochs = 20;
  c.batch_size = 16;
  c.learning_rate = 1e-3;
  // keeps rare slot words out of the vocabulary so the model cannot memorise them
  c.min_token_count = 20;
  return c;
}

void TrainConfig::validate() const {
  if (epochs < 1) throw ValidationError("epochs must be at least 1");
  if (batch_size < 1) throw ValidationError("batch_size must be at least 1");
  if (min_token_count < 1) throw ValidationError("min_token_count must be at least 1");
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
    throw ValidationError("learning_rate must be a finite non-negative number");
  }
  if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0 && adam_eps > 0.0)) {
    throw ValidationError("invalid Adam settings");
  }
}

double default_threshold(TaskMode task) {
  return task == TaskMode::regression ? kRegressionThreshold : 0.5;
}

int classify_by_threshold(double score, double threshold, TaskMode task) {
  if (task == TaskMode::regression) return score < threshold ? 1 : 0;
  return score > threshold ? 1 : 0;
}

bool operator==(const Metrics& a, const Metrics& b) {
  return a.accuracy == b.accuracy && a.precision == b.precision && a.recall == b.recall &&
         a.f1 == b.f1 && a.tp == b.tp && a.fp == b.fp && a.tn == b.tn && a.fn == b.fn &&
         a.count == b.count;
}

Metrics compute_metrics(std::span<const int> predictions, std::span<const int> gold) {
  if (predictions.size() != gold.size()) {
    throw ShapeError("compute_metrics: " + std::to_string(predictions.size()) + " predictions for " +
                     std::to_string(gold.size()) + " labels");
  }
  Metrics m;
  m.count = predictions.size();
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const bool p = predictions[i] != 0;
    const bool g = gold[i] != 0;
    if (p && g) ++m.tp;
    else if (p && !g) ++m.fp;
    else if (!p && g) ++m.fn;
    else ++m.tn;
  }
  const auto ratio = [](std::size_t num, std::size_t den) {
    return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
  };
  m.accuracy = ratio(m.tp + m.tn, m.count);
  m.precision = ratio(m.tp, m.tp + m.fp);
  m.recall = ratio(m.tp, m.tp + m.fn);
  m.f1 = m.precision + m.recall == 0.0 ? 0.0 : 2.0 * m.precision * m.recall / (m.precision + m.recall);
  return m;
}

Vocabulary build_vocabulary(std::span<const LabeledExample> examples, const PairEncoder& encoder,
                            int min_count) {
  // first-seen order keeps ids stable for a fixed dataset
  std::vector<std::string> order;
  std::unordered_map<std::string, int> counts;
  for (const auto& ex : examples) {
    const auto dict = example_dictionary(ex);
    const KeywordDictionary* extra = dict ? &*dict : nullptr;
    for (const std::string* s : {&ex.s1, &ex.s2}) {
      for (const auto& w : encoder.segment_sentence(*s, extra)) {
        for (const auto& piece : word_pieces(w.text)) {
          if (counts[piece]++ == 0) order.push_back(piece);
        }
      }
    }
  }
  Vocabulary vocab;
  for (const auto& piece : order) {
    if (counts[piece] >= min_count) vocab.add(piece);
  }
  return vocab;
}

std::optional<KeywordDictionary> example_dictionary(const LabeledExample& example) {
  if (!example.override) return std::nullopt;
  KeywordDictionary dict("example");
  dict.set(example.override->kw1, example.override->kw2, example.override->score);
  return dict;
}

std::vector<EncodedExample> encode_examples(std::span<const LabeledExample> examples,
                                            const PairEncoder& encoder, const Vocabulary& vocab) {
  std::vector<EncodedExample> out;
  out.reserve(examples.size());
  for (const auto& ex : examples) {
    const auto dict = example_dictionary(ex);
    out.push_back({encoder.encode(ex.s1, ex.s2, vocab, dict ? &*dict : nullptr), ex.label});
  }
  return out;
}

Adam::Adam(const ModelParams& like, double beta1, double beta2, double eps)
    : m_(like.zeros_like()), v_(like.zeros_like()), beta1_(beta1), beta2_(beta2), eps_(eps) {}

void Adam::step(ModelParams& params, const ModelParams& grads, double learning_rate) {
  ++steps_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(steps_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(steps_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Matrix& w = params.tensors()[i].value;
    const Matrix& g = grads.tensors()[i].value;
    Matrix& m = m_.tensors()[i].value;
    Matrix& v = v_.tensors()[i].value;
    m = beta1_ * m + (1.0 - beta1_) * g;
    v = beta2_ * v + (1.0 - beta2_) * g.cwiseAbs2();
    w.array() -= learning_rate * (m.array() / c1) / ((v.array() / c2).sqrt() + eps_);
  }
}

TrainResult train(const TrainConfig& config, const ModelConfig& model_config,
                  std::span<const EncodedExample> data, ModelParams initial) {
  config.validate();
  model_config.validate();
  if (data.empty()) throw ValidationError("train: dataset is empty");
  for (const auto& ex : data) validate_label(ex.label, model_config.task);

  TrainResult result{std::move(initial), {}};
  ModelParams grads = result.params.zeros_like();
  Adam adam(result.params, config.beta1, config.beta2, config.adam_eps);
  std::mt19937_64 rng(config.seed ^ 0x9E3779B97F4A7C15ULL);
  std::vector<std::size_t> order(data.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  const auto batch = static_cast<std::size_t>(config.batch_size);
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    shuffle_in_place(order, rng);
    double epoch_total = 0.0;
    std::size_t batch_index = 0;
    for (std::size_t start = 0; start < order.size(); start += batch, ++batch_index) {
      const std::size_t end = std::min(order.size(), start + batch);
      for (auto& t : grads.tensors()) t.value.setZero();
      for (std::size_t i = start; i < end; ++i) {
        const EncodedExample& ex = data[order[i]];
        const LossEval le = accumulate_gradients(result.params, model_config, ex.encoding, ex.label, grads);
        if (!std::isfinite(le.loss)) {
          throw NumericError("non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                             std::to_string(batch_index));
        }
        epoch_total += le.loss;
      }
      const double inv = 1.0 / static_cast<double>(end - start);
      for (auto& t : grads.tensors()) t.value *= inv;
      adam.step(result.params, grads, config.learning_rate);
      if (!result.params.all_finite()) {
        throw NumericError("non-finite parameters after epoch " + std::to_string(epoch) + ", batch " +
                           std::to_string(batch_index));
      }
    }
    result.epoch_loss.push_back(epoch_total / static_cast<double>(data.size()));
  }
  return result;
}

TrainedModel train_model(const TrainConfig& config, ModelConfig model_config,
                         std::span<const LabeledExample> examples, const PairEncoder& encoder) {
  Vocabulary vocab = build_vocabulary(examples, encoder, config.min_token_count);
  model_config.vocab_size = vocab.size();
  const auto encoded = encode_examples(examples, encoder, vocab);
  TrainResult r = train(config, model_config, encoded, ModelParams::init(model_config, config.seed));
  return {Model{model_config, std::move(r.params), std::move(vocab)}, std::move(r.epoch_loss)};
}

Evaluation evaluate_encoded(const Model& model, std::span<const EncodedExample> examples,
                            double threshold, int threads) {
  if (examples.empty()) throw ValidationError("evaluate: dataset is empty");
  Evaluation ev;
  ev.scores.resize(examples.size());
  parallel_for(examples.size(), threads, [&](std::size_t i) {
    try {
      ev.scores[i] = predict(model, examples[i].encoding);
    } catch (const std::exception& e) {
      throw std::runtime_error("example " + std::to_string(i) + ": " + e.what());
    }
  });
  std::vector<int> predicted(examples.size());
  std::vector<int> gold(examples.size());
  for (std::size_t i = 0; i < examples.size(); ++i) {
    predicted[i] = classify_by_threshold(ev.scores[i], threshold, model.config.task);
    gold[i] = classify_by_threshold(examples[i].label, threshold, model.config.task);
  }
  ev.metrics = compute_metrics(predicted, gold);
  return ev;
}

Evaluation evaluate(const Model& model, std::span<const LabeledExample> examples,
                    const PairEncoder& encoder, double threshold, int threads) {
  std::vector<EncodedExample> encoded;
  encoded.reserve(examples.size());
  for (std::size_t i = 0; i < examples.size(); ++i) {
    try {
      const auto dict = example_dictionary(examples[i]);
      encoded.push_back({encoder.encode(examples[i].s1, examples[i].s2, model.vocab,
                                        dict ? &*dict : nullptr),
                         examples[i].label});
    } catch (const std::exception& e) {
      throw std::runtime_error("example " + std::to_string(i) + ": " + e.what());
    }
  }
  return evaluate_encoded(model, encoded, threshold, threads);
}

Split split_by_group(std::span<const LabeledExample> examples, double test_fraction, std::uint64_t seed) {
  if (!(test_fraction >= 0.0 && test_fraction <= 1.0)) {
    throw ValidationError("test_fraction must lie in [0, 1]");
  }
  // Key: group id, or a unique negative key per ungrouped example.
  std::map<long, std::vector<std::size_t>> buckets;
  for (std::size_t i = 0; i < examples.size(); ++i) {
    const long key = examples[i].group >= 0 ? examples[i].group : -1 - static_cast<long>(i);
    buckets[key].push_back(i);
  }
  std::vector<long> keys;
  for (const auto& [k, v] : buckets) keys.push_back(k);
  std::mt19937_64 rng(seed);
  shuffle_in_place(keys, rng);
  const auto test_keys = static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(keys.size())));
  std::vector<bool> is_test(examples.size(), false);
  for (std::size_t k = 0; k < test_keys; ++k) {
    for (std::size_t i : buckets[keys[k]]) is_test[i] = true;
  }
  Split s;
  for (std::size_t i = 0; i < examples.size(); ++i) {
    (is_test[i] ? s.test : s.train).push_back(examples[i]);
  }
  return s;
}

}  // namespace iekm
