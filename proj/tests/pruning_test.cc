// Copyright 2026 The tokprune Authors
// SPDX-License-Identifier: Apache-2.0

#include "tokprune/pruning.hpp"

#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "tokprune/errors.hpp"

namespace tokprune {
namespace {

Tensor from_vector(Shape shape, const std::vector<float>& v) { return Tensor(std::move(shape), v); }

ImportanceScores scores_from(std::vector<float> total, std::size_t special) {
  ImportanceScores s;
  s.total = std::move(total);
  s.a_s = s.total;
  s.v_s.assign(s.total.size(), 0.0f);
  s.special_count = special;
  return s;
}

Tensor random_activations(std::mt19937_64& rng, std::size_t b, std::size_t n, std::size_t d) {
  std::normal_distribution<float> dist;
  Tensor t({b, n, d});
  for (float& v : t.data()) v = dist(rng);
  return t;
}

TEST(AttentionScoresTest, UniformAttentionScoresAllOne) {
  const Tensor attn({1, 4, 4}, 0.25f);
  for (float s : attention_scores(attn, 0)) EXPECT_EQ(s, 1.0f);
  const auto with_special = attention_scores(attn, 1);
  EXPECT_TRUE(std::isinf(with_special[0]));
  for (std::size_t j = 1; j < 4; ++j) EXPECT_EQ(with_special[j], 1.0f);
}

TEST(AttentionScoresTest, SelfAttentionScoresAllOne) {
  Tensor attn({1, 5, 5});
  for (std::size_t i = 0; i < 5; ++i) attn.at(0, i, i) = 1.0f;
  for (float s : attention_scores(attn, 0)) EXPECT_EQ(s, 1.0f);
}

TEST(AttentionScoresTest, HandBuiltTwoHeadsMatchLoopOracle) {
  // Each row sums to 1.
  const std::vector<float> attn = {
      0.6f, 0.3f, 0.1f,  //
      0.2f, 0.5f, 0.3f,  //
      0.1f, 0.1f, 0.8f,  //
      0.1f, 0.1f, 0.8f,  //
      0.7f, 0.2f, 0.1f,  //
      0.3f, 0.3f, 0.4f,  //
  };
  const auto got = attention_scores(from_vector({2, 3, 3}, attn), 0);
  const auto want = oracle::attention_scores(attn, 2, 3, 0);
  // Column sums of the head max: [0.6+0.7+0.3, 0.3+0.5+0.3, 0.8+0.3+0.8] = [1.6, 1.1, 1.9].
  EXPECT_NEAR(want[2], 1.0, 1e-12);
  EXPECT_NEAR(want[0], 1.6 / 1.9, 1e-6);
  for (std::size_t j = 0; j < 3; ++j) EXPECT_NEAR(got[j], want[j], 1e-6);
}

TEST(AttentionScoresTest, RejectsNonSquareSlices) {
  EXPECT_THROW(attention_scores(Tensor({2, 3, 4}), 0), DimensionError);
  EXPECT_THROW(attention_scores(Tensor({3, 3}), 0), DimensionError);
}

TEST(ValueScoresTest, EqualValuesGiveUniformScores) {
  const auto s = value_scores(Tensor({2, 5, 3}, 0.7f), 1);
  EXPECT_EQ(s[0], 0.0f);
  for (std::size_t j = 1; j < 5; ++j) EXPECT_NEAR(s[j], 0.25f, 1e-7f);
}

TEST(ValueScoresTest, LargerValueRowScoresHighest) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<float> dist(-1.0f, 1.0f);
  Tensor v({2, 6, 4});
  for (float& x : v.data()) x = dist(rng);
  for (std::size_t h = 0; h < 2; ++h)
    for (std::size_t c = 0; c < 4; ++c) v.at(h, 3, c) += 10.0f;
  const auto s = value_scores(v, 1);
  for (std::size_t j = 1; j < 6; ++j) {
    if (j != 3) EXPECT_GT(s[3], s[j]);
  }
}

TEST(ValueScoresTest, HandBuiltTwoHeadsMatchLoopOracle) {
  const std::vector<float> values = {
      1.0f, -2.0f,  //
      0.5f, 0.5f,   //
      -1.0f, 3.0f,  //
      0.0f, 0.0f,   //
      2.0f, -1.0f,  //
      -3.0f, 1.0f,  //
  };
  const auto got = value_scores(from_vector({2, 3, 2}, values), 0);
  const auto want = oracle::value_scores(values, 2, 3, 2, 0);
  // Feature sums of the head max: [1 + 0, 2 + 0.5, -1 + 3] = [1, 2.5, 2].
  const double z = std::exp(1.0) + std::exp(2.5) + std::exp(2.0);
  EXPECT_NEAR(want[1], std::exp(2.5) / z, 1e-12);
  for (std::size_t j = 0; j < 3; ++j) EXPECT_NEAR(got[j], want[j], 1e-6);
}

TEST(TokenImportanceTest, TotalIsSumOfParts) {
  std::mt19937_64 rng(4);
  const std::size_t h = 3, n = 9, c = 5;
  AttentionCapture cap{from_vector({h, n, n}, oracle::random_attention(rng, h, n)),
                       random_activations(rng, h, n, c), 0};
  const ImportanceScores s = token_importance(cap, 1);
  const auto a = attention_scores(cap.attn, 1);
  const auto v = value_scores(cap.values, 1);
  ASSERT_EQ(s.size(), n);
  for (std::size_t j = 0; j < n; ++j) {
    EXPECT_EQ(s.a_s[j], a[j]);
    EXPECT_EQ(s.v_s[j], v[j]);
    EXPECT_EQ(s.total[j], a[j] + v[j]);
  }
  EXPECT_TRUE(std::isinf(s.total[0]));
}

TEST(TokenImportanceTest, NormalizationInvariants) {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t h = 1 + trial % 4, n = 4 + trial % 20, c = 3;
    AttentionCapture cap{from_vector({h, n, n}, oracle::random_attention(rng, h, n)),
                         random_activations(rng, h, n, c), 0};
    const ImportanceScores s = token_importance(cap, 1);
    float max_a = 0.0f;
    double sum_v = 0.0;
    for (std::size_t j = 1; j < n; ++j) {
      max_a = std::max(max_a, s.a_s[j]);
      sum_v += s.v_s[j];
      EXPECT_GT(s.v_s[j], 0.0f);
      EXPECT_LT(s.v_s[j], 1.0f);
    }
    EXPECT_EQ(max_a, 1.0f);
    EXPECT_NEAR(sum_v, 1.0, 1e-5);
  }
}

TEST(TokenImportanceTest, PermutingTokensPermutesScores) {
  std::mt19937_64 rng(21);
  const std::size_t h = 2, n = 8, c = 4;
  const auto attn = oracle::random_attention(rng, h, n);
  const Tensor values = random_activations(rng, h, n, c);

  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);

  // Permuted[i] = original[perm[i]] on both query and key axes.
  Tensor pa({h, n, n}), pv({h, n, c});
  for (std::size_t hh = 0; hh < h; ++hh) {
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) pa.at(hh, i, j) = attn[(hh * n + perm[i]) * n + perm[j]];
      for (std::size_t f = 0; f < c; ++f) pv.at(hh, i, f) = values.at(hh, perm[i], f);
    }
  }
  const auto base = token_importance({from_vector({h, n, n}, attn), values, 0}, 0);
  const auto moved = token_importance({pa, pv, 0}, 0);
  for (std::size_t i = 0; i < n; ++i) EXPECT_NEAR(moved.total[i], base.total[perm[i]], 1e-6f);
}

TEST(TokenImportanceTest, UniformCaptureGivesEqualTotals) {
  const auto s = token_importance({Tensor({2, 6, 6}, 1.0f / 6.0f), Tensor({2, 6, 3}, 0.1f), 0}, 1);
  for (std::size_t j = 2; j < 6; ++j) EXPECT_EQ(s.total[j], s.total[1]);
}

TEST(PruneTokensTest, ZeroRIsIdentity) {
  std::mt19937_64 rng(1);
  const Tensor x = random_activations(rng, 2, 5, 3);
  const std::vector<ImportanceScores> s(2, scores_from({9, 1, 2, 3, 4}, 1));
  EXPECT_EQ(prune_tokens(x, s, 0), x);
}

TEST(PruneTokensTest, SortAndMeanExample) {
  std::mt19937_64 rng(2);
  const Tensor x = random_activations(rng, 1, 4, 3);
  const std::vector<ImportanceScores> s = {scores_from({0.9f, 0.1f, 0.8f, 0.2f}, 0)};
  const Tensor out = prune_tokens(x, s, 2);
  ASSERT_EQ(out.shape(), (Shape{1, 3, 3}));
  for (std::size_t j = 0; j < 3; ++j) {
    EXPECT_EQ(out.at(0, 0, j), x.at(0, 0, j));
    EXPECT_EQ(out.at(0, 1, j), x.at(0, 2, j));
    EXPECT_NEAR(out.at(0, 2, j), (x.at(0, 1, j) + x.at(0, 3, j)) / 2.0f, 1e-6f);
  }
}

TEST(PruneTokensTest, TwoHundredFiftySevenMinus166LeavesNinetyTwo) {
  std::mt19937_64 rng(3);
  const Tensor x = random_activations(rng, 1, 257, 8);
  std::vector<float> total(257);
  std::uniform_real_distribution<float> dist;
  for (auto& v : total) v = dist(rng);
  total[0] = INFINITY;
  const std::vector<ImportanceScores> s = {scores_from(total, 1)};
  EXPECT_EQ(prune_tokens(x, s, 166).dim(1), 92u);
}

TEST(PruneTokensTest, TiesKeepLowerIndex) {
  const auto kept = select_kept_tokens(std::vector<float>{INFINITY, 0.5f, 0.7f, 0.5f, 0.5f}, 1, 2);
  EXPECT_EQ(kept, (std::vector<std::size_t>{0, 1, 2}));
}

TEST(PruneTokensTest, RejectsROutOfRange) {
  const Tensor x({1, 5, 2});
  const std::vector<ImportanceScores> s = {scores_from({INFINITY, 1, 2, 3, 4}, 1)};
  EXPECT_THROW(prune_tokens(x, s, 4), ValidationError);
  EXPECT_NO_THROW(prune_tokens(x, s, 3));
  const std::vector<ImportanceScores> wrong_batch(2, s[0]);
  EXPECT_THROW(prune_tokens(x, wrong_batch, 1), DimensionError);
}

TEST(PruneTokensTest, PropertiesOnRandomInputs) {
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<float> dist(-5.0f, 5.0f);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t special = trial % 3;
    const std::size_t n = special + 2 + rng() % 30;
    const std::size_t d = 1 + rng() % 6;
    const std::size_t b = 1 + rng() % 3;
    const std::size_t r = 1 + rng() % (n - special - 1);
    const Tensor x = random_activations(rng, b, n, d);
    std::vector<ImportanceScores> scores;
    for (std::size_t s = 0; s < b; ++s) {
      std::vector<float> total(n);
      // Coarse values force frequent ties.
      for (auto& v : total) v = std::round(dist(rng));
      for (std::size_t i = 0; i < special; ++i) total[i] = INFINITY;
      scores.push_back(scores_from(total, special));
    }
    const Tensor out = prune_tokens(x, scores, r);
    ASSERT_EQ(out.shape(), (Shape{b, n - r + 1, d}));

    for (std::size_t s = 0; s < b; ++s) {
      const auto kept = oracle::top_k_kept(scores[s].total, special, n - special - r);
      EXPECT_EQ(select_kept_tokens(scores[s].total, special, n - special - r), kept);

      // Shifting every score leaves the kept set alone.
      std::vector<float> shifted = scores[s].total;
      for (std::size_t i = special; i < n; ++i) shifted[i] += 17.0f;
      EXPECT_EQ(select_kept_tokens(shifted, special, n - special - r), kept);

      for (std::size_t i = 0; i < kept.size(); ++i) {
        if (i < special) {
          EXPECT_EQ(kept[i], i);
        }
        for (std::size_t j = 0; j < d; ++j) EXPECT_EQ(out.at(s, i, j), x.at(s, kept[i], j));
      }
      // Conservation: sum of pruned rows == r * inattentive token.
      for (std::size_t j = 0; j < d; ++j) {
        double pruned_sum = 0.0;
        for (std::size_t t = 0; t < n; ++t) {
          if (!std::binary_search(kept.begin(), kept.end(), t)) pruned_sum += x.at(s, t, j);
        }
        EXPECT_NEAR(pruned_sum, r * out.at(s, n - r, j), 1e-5 * std::max(1.0, double(r)));
      }
    }
  }
}

TEST(PruneHookTest, ZeroRHookMatchesBaseline) {
  ViTConfig c;
  c.depth = 4;
  c.embed_dim = 32;
  c.num_heads = 2;
  c.num_tokens = 21;
  c.num_classes = 5;
  const ViTModel model = generate_random_model(c, 5);
  const Tensor x = synthesize_tokens(c, 2, 21, 6);
  const PruneHook hook = make_importance_prune_hook(1, 0, 1);
  const Tensor a = model.forward(x);
  const Tensor b = model.forward(x, &hook);
  for (std::size_t i = 0; i < a.numel(); ++i) EXPECT_NEAR(a[i], b[i], 1e-6f);
}

TEST(RandomRemovalTest, RemovesExactlyRAndIsDeterministic) {
  std::mt19937_64 rng(8);
  const Tensor x = random_activations(rng, 3, 12, 2);
  const PruneHook hook = make_random_removal_hook(0, 5, 2, 77);
  EXPECT_EQ(hook.point, HookPoint::kAfterBlock);
  const Tensor a = hook.apply({}, x);
  const Tensor b = hook.apply({}, x);
  EXPECT_EQ(a, b);
  ASSERT_EQ(a.shape(), (Shape{3, 7, 2}));
  for (std::size_t s = 0; s < 3; ++s) {
    for (std::size_t i = 0; i < 2; ++i)
      for (std::size_t j = 0; j < 2; ++j) EXPECT_EQ(a.at(s, i, j), x.at(s, i, j));
  }
  const Tensor other_seed = make_random_removal_hook(0, 5, 2, 78).apply({}, x);
  EXPECT_NE(a, other_seed);
  // Sample draws depend on the absolute sample index, not the batch split.
  const Tensor tail = make_random_removal_hook(0, 5, 2, 77, 1)
                          .apply({}, Tensor({2, 12, 2}, x.data().subspan(24)));
  for (std::size_t i = 0; i < tail.numel(); ++i) EXPECT_EQ(tail[i], a[14 + i]);
}

}  // namespace
}  // namespace tokprune
