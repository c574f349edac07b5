#include <gtest/gtest.h>

#include "iekm/gradcheck.hpp"

using namespace iekm;

TEST(Gradcheck, GroupNames) {
  EXPECT_EQ(param_group("embeddings.token"), "embeddings");
  EXPECT_EQ(param_group("layer0.attn.gate_weight"), "gate_weight");
  EXPECT_EQ(param_group("layer3.attn.query"), "query");
  EXPECT_EQ(param_group("layer0.ffn.b2"), "ffn");
  EXPECT_EQ(param_group("layer0.attn_norm.gamma"), "layer_norm");
  EXPECT_EQ(param_group("head.weight"), "heads");
  EXPECT_TRUE(unused_groups(AblationMode::full_gated).empty());
  EXPECT_EQ(unused_groups(AblationMode::m_only).size(), 3u);
}

TEST(Gradcheck, TinyConfigShape) {
  const ModelConfig c = tiny_gradcheck_config();
  EXPECT_EQ(c.layers, 1);
  EXPECT_EQ(c.heads, 2);
  EXPECT_EQ(c.hidden, 8);
  EXPECT_EQ(c.max_len, 6);
}

TEST(Gradcheck, EveryModePasses) {
  for (auto mode : {AblationMode::baseline, AblationMode::m_only, AblationMode::mr_only, AblationMode::full_gated}) {
    for (auto task : {TaskMode::classification, TaskMode::regression}) {
      ModelConfig c = tiny_gradcheck_config(mode);
      c.task = task;
      const GradcheckReport r = gradcheck_harness(c, 7);
      EXPECT_TRUE(r.passed()) << to_string(mode);
      for (const auto& g : r.groups) {
        if (g.expected_unused) {
          EXPECT_EQ(g.analytic_max_abs, 0.0) << g.group;
        } else {
          EXPECT_LT(g.max_relative_error, kGradcheckTolerance) << to_string(mode) << " " << g.group;
          EXPECT_GT(g.analytic_max_abs, 0.0) << g.group;
        }
      }
    }
  }
}

TEST(Gradcheck, IdentityGateAndOtherSeeds) {
  ModelConfig c = tiny_gradcheck_config();
  c.gate = GateActivation::identity;
  for (std::uint64_t seed : {1, 2, 3}) EXPECT_TRUE(gradcheck_harness(c, seed).passed()) << seed;
}

TEST(Gradcheck, ReportFlagsBrokenGroups) {
  GradcheckReport r;
  r.groups.push_back({"query", {}, 1e-2, 1.0, false});
  r.groups.push_back({"gate_bias", {}, 0.0, 0.5, true});
  r.groups.push_back({"key", {}, 0.0, 0.0, false});
  r.groups.push_back({"value", {}, 1e-6, 1.0, false});
  const auto f = r.failures();
  ASSERT_EQ(f.size(), 3u);
  EXPECT_TRUE(f[0].starts_with("query"));
  EXPECT_TRUE(f[1].starts_with("gate_bias"));
  EXPECT_TRUE(f[2].starts_with("key"));
}
