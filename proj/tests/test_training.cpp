#include <gtest/gtest.h>

#include <random>
#include <set>
#include <sstream>

#include "iekm/errors.hpp"
#include "iekm/experiments.hpp"
#include "iekm/synthetic.hpp"
#include "iekm/training.hpp"
#include "support.hpp"

using namespace iekm;

namespace {

ModelConfig tiny_model(AblationMode mode = AblationMode::full_gated) {
  ModelConfig c;
  c.heads = 2;
  c.hidden = 8;
  c.layers = 2;
  c.max_len = 32;
  c.init_std = 0.3;
  c.ablation = mode;
  return c;
}

struct Fixture {
  SyntheticLexicon lex;
  std::vector<SimilarityProvider> providers;
  std::vector<LabeledExample> data;

  explicit Fixture(std::size_t n, TaskMode task = TaskMode::classification) {
    SyntheticLexiconOptions o;
    o.synonym_groups = 20;
    o.entity_groups = 20;
    o.related_groups = 5;
    lex = make_synthetic_lexicon(o);
    providers = lex.providers();
    data = generate_synthetic(n, providers[0], 3, task);
  }
};

}  // namespace

TEST(Threshold, RegressionExamples) {
  EXPECT_EQ(classify_by_threshold(0.2, kRegressionThreshold, TaskMode::regression), 1);
  EXPECT_EQ(classify_by_threshold(0.326, kRegressionThreshold, TaskMode::regression), 0);
  EXPECT_EQ(classify_by_threshold(0.9, 0.5, TaskMode::classification), 1);
  EXPECT_EQ(classify_by_threshold(0.5, 0.5, TaskMode::classification), 0);
  EXPECT_EQ(default_threshold(TaskMode::regression), 0.326);
  EXPECT_EQ(default_threshold(TaskMode::classification), 0.5);
}

TEST(Threshold, MonotoneInScore) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 2000; ++i) {
    double a = u(rng), b = u(rng), t = u(rng);
    if (a > b) std::swap(a, b);
    EXPECT_GE(classify_by_threshold(a, t, TaskMode::regression), classify_by_threshold(b, t, TaskMode::regression));
    EXPECT_LE(classify_by_threshold(a, t, TaskMode::classification),
              classify_by_threshold(b, t, TaskMode::classification));
  }
}

TEST(Metrics, WorkedExample) {
  // TP=2, FP=1, FN=1, TN=6
  const std::vector<int> pred{1, 1, 1, 0, 0, 0, 0, 0, 0, 0};
  const std::vector<int> gold{1, 1, 0, 1, 0, 0, 0, 0, 0, 0};
  const Metrics m = compute_metrics(pred, gold);
  EXPECT_EQ(m.tp, 2u);
  EXPECT_EQ(m.fp, 1u);
  EXPECT_EQ(m.fn, 1u);
  EXPECT_EQ(m.tn, 6u);
  EXPECT_NEAR(m.precision, 0.667, 1e-3);
  EXPECT_NEAR(m.recall, 0.667, 1e-3);
  EXPECT_NEAR(m.f1, 0.667, 1e-3);
  EXPECT_NEAR(m.accuracy, 0.8, 1e-15);
}

TEST(Metrics, PerfectAndDegenerate) {
  const std::vector<int> gold{1, 0, 1, 0};
  const Metrics m = compute_metrics(gold, gold);
  EXPECT_EQ(m.accuracy, 1.0);
  EXPECT_EQ(m.f1, 1.0);
  const std::vector<int> zeros{0, 0, 0, 0};
  const Metrics z = compute_metrics(zeros, zeros);
  EXPECT_EQ(z.precision, 0.0);
  EXPECT_EQ(z.f1, 0.0);
  EXPECT_EQ(z.accuracy, 1.0);
  EXPECT_THROW(compute_metrics(gold, std::vector<int>{1}), ShapeError);
}

TEST(Metrics, AgreeWithCounting) {
  std::mt19937_64 rng(2);
  std::bernoulli_distribution coin(0.5);
  for (int t = 0; t < 100; ++t) {
    const std::size_t n = 1 + rng() % 50;
    std::vector<int> pred(n), gold(n);
    for (std::size_t i = 0; i < n; ++i) {
      pred[i] = coin(rng);
      gold[i] = coin(rng);
    }
    const Metrics got = compute_metrics(pred, gold);
    const Metrics want = support::brute_force_metrics(pred, gold);
    EXPECT_EQ(got.tp, want.tp);
    EXPECT_EQ(got.fn, want.fn);
    EXPECT_NEAR(got.accuracy, want.accuracy, 1e-15);
    EXPECT_NEAR(got.precision, want.precision, 1e-15);
    EXPECT_NEAR(got.recall, want.recall, 1e-15);
    EXPECT_NEAR(got.f1, want.f1, 1e-15);
  }
}

TEST(Dataset, RoundTrip) {
  std::vector<LabeledExample> in(2);
  in[0] = {"how are you", "how r u", 1.0, std::nullopt, 4};
  in[1] = {"a \"quoted\" line", "x", 0.0, KeywordOverride{"a", "x", 1.0}, -1};
  std::stringstream buf;
  write_dataset(buf, in);
  const auto out = parse_dataset(buf, "mem");
  ASSERT_EQ(out.size(), 2u);
  EXPECT_EQ(out[0].s2, "how r u");
  EXPECT_EQ(out[0].group, 4);
  EXPECT_FALSE(out[0].override);
  EXPECT_EQ(out[1].s1, in[1].s1);
  ASSERT_TRUE(out[1].override);
  EXPECT_EQ(out[1].override->kw2, "x");
  EXPECT_EQ(out[1].override->score, 1.0);
}

TEST(Dataset, ErrorsCarryLineNumbers) {
  std::istringstream bad_json("{\"s1\":\"a\",\"s2\":\"b\"}\n\n{oops\n");
  try {
    parse_dataset(bad_json, "d.jsonl");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 3u);
  }
  std::istringstream missing("{\"s1\":\"a\"}\n");
  EXPECT_THROW(parse_dataset(missing, "d"), ParseError);
  std::istringstream bad_kw("{\"s1\":\"a\",\"s2\":\"b\",\"kw1\":\"a\",\"kw2\":\"b\",\"kw_score\":0.5}\n");
  EXPECT_THROW(parse_dataset(bad_kw, "d"), ParseError);
}

TEST(Split, GroupsNeverStraddle) {
  const Fixture f(400);
  const Split s = split_by_group(f.data, 0.25, 9);
  EXPECT_EQ(s.train.size() + s.test.size(), f.data.size());
  EXPECT_FALSE(s.test.empty());
  std::set<int> train_groups;
  for (const auto& ex : s.train) train_groups.insert(ex.group);
  for (const auto& ex : s.test) EXPECT_EQ(train_groups.count(ex.group), 0u) << ex.group;
  const Split again = split_by_group(f.data, 0.25, 9);
  ASSERT_EQ(again.test.size(), s.test.size());
  for (std::size_t i = 0; i < s.test.size(); ++i) EXPECT_EQ(again.test[i].s1, s.test[i].s1);
  EXPECT_THROW(split_by_group(f.data, 1.5, 0), ValidationError);
}

TEST(Vocabulary, MinCountSendsRarePiecesToUnk) {
  const Fixture f(200);
  const PairEncoder enc(f.providers, std::nullopt);
  const Vocabulary all = build_vocabulary(f.data, enc, 1);
  const Vocabulary common = build_vocabulary(f.data, enc, 20);
  EXPECT_LT(common.size(), all.size());
  EXPECT_NE(common.id("how"), Vocabulary::kUnk);
  EXPECT_EQ(common.id(f.lex.synonym_groups[0][0].substr(0, f.lex.synonym_groups[0][0].find(' '))),
            Vocabulary::kUnk);
}

TEST(Train, ZeroLearningRateLeavesParameters) {
  const Fixture f(40);
  const PairEncoder enc(f.providers, std::nullopt);
  const Vocabulary vocab = build_vocabulary(f.data, enc);
  ModelConfig mc = tiny_model();
  mc.vocab_size = vocab.size();
  const auto encoded = encode_examples(f.data, enc, vocab);
  TrainConfig tc;
  tc.epochs = 2;
  tc.batch_size = 8;
  tc.learning_rate = 0.0;
  const ModelParams init = ModelParams::init(mc, 1);
  EXPECT_TRUE(train(tc, mc, encoded, init).params == init);
}

TEST(Train, LossFallsOverFirstEpochs) {
  const Fixture f(200);
  const PairEncoder enc(f.providers, std::nullopt);
  TrainConfig tc;
  tc.epochs = 5;
  tc.batch_size = 16;
  tc.learning_rate = 1e-3;
  const auto r = train_model(tc, tiny_model(), f.data, enc);
  ASSERT_EQ(r.epoch_loss.size(), 5u);
  for (std::size_t e = 1; e < r.epoch_loss.size(); ++e) EXPECT_LT(r.epoch_loss[e], r.epoch_loss[e - 1]) << e;
}

TEST(Train, SameSeedSameTrace) {
  const Fixture f(60);
  const PairEncoder enc(f.providers, std::nullopt);
  TrainConfig tc;
  tc.epochs = 2;
  tc.batch_size = 8;
  tc.learning_rate = 1e-3;
  const auto a = train_model(tc, tiny_model(), f.data, enc);
  const auto b = train_model(tc, tiny_model(), f.data, enc);
  EXPECT_EQ(a.epoch_loss, b.epoch_loss);
  EXPECT_TRUE(a.model.params == b.model.params);
  tc.seed = 1;
  EXPECT_NE(train_model(tc, tiny_model(), f.data, enc).epoch_loss, a.epoch_loss);
}

TEST(Train, ZeroMatricesReduceToPlainTransformer) {
  // Gated model fed all-zero matrices versus the baseline fed the real ones:
  // both are the vanilla encoder, so training follows the same path.
  const Fixture f(60);
  const PairEncoder real(f.providers, std::nullopt);
  const Vocabulary vocab = build_vocabulary(f.data, real);
  ModelConfig gated = tiny_model(AblationMode::full_gated);
  gated.vocab_size = vocab.size();
  ModelConfig base = gated;
  base.ablation = AblationMode::baseline;
  TrainConfig tc;
  tc.epochs = 3;
  tc.batch_size = 8;
  tc.learning_rate = 1e-3;
  const auto encoded = encode_examples(f.data, real, vocab);
  auto blank = encoded;
  for (auto& ex : blank) {
    ex.encoding.bias.sim.setZero();
    ex.encoding.bias.dissim.setZero();
  }
  const auto a = train(tc, gated, blank, ModelParams::init(gated, 4));
  const auto b = train(tc, base, encoded, ModelParams::init(base, 4));
  for (std::size_t e = 0; e < a.epoch_loss.size(); ++e) EXPECT_NEAR(a.epoch_loss[e], b.epoch_loss[e], 1e-9);
}

TEST(Train, RejectsBadInput) {
  const Fixture f(10);
  const PairEncoder enc(f.providers, std::nullopt);
  TrainConfig tc;
  tc.epochs = 0;
  EXPECT_THROW(train_model(tc, tiny_model(), f.data, enc), ValidationError);
  tc = TrainConfig{};
  auto data = f.data;
  data[0].label = 0.5;
  EXPECT_THROW(train_model(tc, tiny_model(), data, enc), ValidationError);
}

TEST(Train, RegressionLearnsDistancePolarity) {
  const Fixture f(300, TaskMode::regression);
  const PairEncoder enc(f.providers, std::nullopt);
  ModelConfig mc = desk_model_config();
  mc.task = TaskMode::regression;
  const TrainConfig tc = TrainConfig::desk_scale();
  const auto r = train_model(tc, mc, f.data, enc);
  const Evaluation ev = evaluate(r.model, f.data, enc, kRegressionThreshold);
  double similar = 0.0, distinct = 0.0;
  for (std::size_t i = 0; i < f.data.size(); ++i) (f.data[i].label == 0.0 ? similar : distinct) += ev.scores[i];
  EXPECT_LT(similar, distinct);
  EXPECT_GT(ev.metrics.accuracy, 0.8);
}

TEST(Evaluate, AbsentDictionaryEntriesChangeNothing) {
  const Fixture f(40);
  KeywordDictionary dict("unused");
  dict.set("zzz", "yyy", 1.0);
  const PairEncoder plain(f.providers, std::nullopt);
  const PairEncoder with(f.providers, dict);
  TrainConfig tc;
  tc.epochs = 1;
  tc.batch_size = 8;
  tc.learning_rate = 1e-3;
  const auto r = train_model(tc, tiny_model(), f.data, plain);
  const auto a = evaluate(r.model, f.data, plain, 0.5);
  const auto b = evaluate(r.model, f.data, with, 0.5, 2);
  EXPECT_EQ(a.scores, b.scores);
  EXPECT_TRUE(a.metrics == b.metrics);
}

TEST(Adam, FirstStepMovesBySignTimesRate) {
  ModelParams p;
  p.add("w", Matrix::Zero(1, 3));
  ModelParams g;
  g.add("w", (Matrix(1, 3) << 2.0, -0.5, 0.0).finished());
  Adam adam(p, 0.9, 0.999, 1e-8);
  adam.step(p, g, 0.1);
  EXPECT_NEAR(p.at("w")(0, 0), -0.1, 1e-8);
  EXPECT_NEAR(p.at("w")(0, 1), 0.1, 1e-7);
  EXPECT_EQ(p.at("w")(0, 2), 0.0);
}
