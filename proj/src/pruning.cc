// Copyright 2026 The tokprune Authors
// SPDX-License-Identifier: Apache-2.0

#include "tokprune/pruning.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "tokprune/errors.hpp"
#include "tokprune/random.hpp"

namespace tokprune {

namespace {

constexpr float kNeverPrune = std::numeric_limits<float>::infinity();

void check_prunable(std::size_t n, std::size_t special_count, const char* op) {
  if (special_count >= n) {
    throw ValidationError(std::string(op) + ": no prunable tokens (" + std::to_string(n) +
                          " tokens, " + std::to_string(special_count) + " special)");
  }
}

}  // namespace

std::vector<float> attention_scores(const Tensor& attn, std::size_t special_count) {
  if (attn.rank() != 3 || attn.dim(1) != attn.dim(2)) {
    throw DimensionError("attention_scores: expected square slices [H x N x N], got " +
                         shape_string(attn.shape()));
  }
  const std::size_t n = attn.dim(1);
  check_prunable(n, special_count, "attention_scores");

  const Tensor head_max = ops::amax(attn, 0);
  const Tensor received = ops::sum(head_max, kAttentionScoreReduceAxis);

  float peak = 0.0f;
  for (std::size_t j = special_count; j < n; ++j) peak = std::max(peak, received[j]);
  std::vector<float> out(n, kNeverPrune);
  for (std::size_t j = special_count; j < n; ++j) {
    out[j] = peak > 0.0f ? received[j] / peak : 0.0f;
  }
  return out;
}

std::vector<float> value_scores(const Tensor& values, std::size_t special_count) {
  if (values.rank() != 3) {
    throw DimensionError("value_scores: expected [H x N x C], got " +
                         shape_string(values.shape()));
  }
  const std::size_t n = values.dim(1);
  check_prunable(n, special_count, "value_scores");

  const Tensor head_max = ops::amax(values, 0);
  const Tensor feature_sum = ops::sum(head_max, 1);

  float peak = -std::numeric_limits<float>::infinity();
  for (std::size_t j = special_count; j < n; ++j) peak = std::max(peak, feature_sum[j]);
  std::vector<float> out(n, 0.0f);
  double total = 0.0;
  for (std::size_t j = special_count; j < n; ++j) {
    out[j] = std::exp(feature_sum[j] - peak);
    total += out[j];
  }
  for (std::size_t j = special_count; j < n; ++j) {
    out[j] = static_cast<float>(out[j] / total);
  }
  return out;
}

ImportanceScores token_importance(const AttentionCapture& capture, std::size_t special_count) {
  if (capture.attn.rank() != 3 || capture.values.rank() != 3 ||
      capture.attn.dim(0) != capture.values.dim(0) ||
      capture.attn.dim(1) != capture.values.dim(1)) {
    throw DimensionError("token_importance: attention " + shape_string(capture.attn.shape()) +
                         " and values " + shape_string(capture.values.shape()) +
                         " disagree on heads or tokens");
  }
  ImportanceScores s;
  s.special_count = special_count;
  s.a_s = attention_scores(capture.attn, special_count);
  s.v_s = value_scores(capture.values, special_count);
  s.total.resize(s.a_s.size());
  for (std::size_t j = 0; j < s.total.size(); ++j) s.total[j] = s.a_s[j] + s.v_s[j];
  return s;
}

std::vector<std::size_t> select_kept_tokens(std::span<const float> total,
                                            std::size_t special_count, std::size_t n_keep) {
  const std::size_t n = total.size();
  if (special_count > n || n_keep > n - special_count) {
    throw ValidationError("select_kept_tokens: cannot keep " + std::to_string(n_keep) + " of " +
                          std::to_string(n - std::min(n, special_count)) + " prunable tokens");
  }
  std::vector<std::size_t> candidates(n - special_count);
  std::iota(candidates.begin(), candidates.end(), special_count);
  auto better = [&](std::size_t a, std::size_t b) {
    return total[a] > total[b] || (total[a] == total[b] && a < b);
  };
  std::nth_element(candidates.begin(),
                   candidates.begin() + static_cast<std::ptrdiff_t>(n_keep), candidates.end(),
                   better);
  std::vector<std::size_t> kept(special_count);
  std::iota(kept.begin(), kept.end(), std::size_t{0});
  kept.insert(kept.end(), candidates.begin(),
              candidates.begin() + static_cast<std::ptrdiff_t>(n_keep));
  std::sort(kept.begin() + static_cast<std::ptrdiff_t>(special_count), kept.end());
  return kept;
}

Tensor prune_tokens(const Tensor& activations, std::span<const ImportanceScores> scores,
                    std::size_t r) {
  if (activations.rank() != 3) {
    throw DimensionError("prune_tokens: expected activations [b x N x d], got " +
                         shape_string(activations.shape()));
  }
  const std::size_t batch = activations.dim(0);
  const std::size_t n = activations.dim(1);
  const std::size_t d = activations.dim(2);
  if (scores.size() != batch) {
    throw DimensionError("prune_tokens: " + std::to_string(scores.size()) +
                         " score sets for batch of " + std::to_string(batch));
  }
  if (r == 0) return activations;

  const std::size_t special = scores[0].special_count;
  if (special + 1 > n || r > n - special - 1) {
    throw ValidationError("prune_tokens: R = " + std::to_string(r) + " outside [1, " +
                          std::to_string(n > special + 1 ? n - special - 1 : 0) + "] for " +
                          std::to_string(n) + " tokens with " + std::to_string(special) +
                          " special");
  }
  const std::size_t n_keep = n - special - r;
  const std::size_t n_out = n - r + 1;

  Tensor out({batch, n_out, d});
  std::vector<double> mean(d);
  std::vector<char> is_kept(n);
  for (std::size_t s = 0; s < batch; ++s) {
    const ImportanceScores& sc = scores[s];
    if (sc.size() != n || sc.special_count != special) {
      throw DimensionError("prune_tokens: scores for sample " + std::to_string(s) +
                           " do not match " + std::to_string(n) + " tokens");
    }
    const auto kept = select_kept_tokens(sc.total, special, n_keep);
    const float* src = activations.raw() + s * n * d;
    float* dst = out.raw() + s * n_out * d;

    std::fill(is_kept.begin(), is_kept.end(), 0);
    for (std::size_t i = 0; i < kept.size(); ++i) {
      is_kept[kept[i]] = 1;
      std::copy_n(src + kept[i] * d, d, dst + i * d);
    }
    std::fill(mean.begin(), mean.end(), 0.0);
    for (std::size_t t = 0; t < n; ++t) {
      if (is_kept[t]) continue;
      for (std::size_t j = 0; j < d; ++j) mean[j] += src[t * d + j];
    }
    float* inattentive = dst + kept.size() * d;
    for (std::size_t j = 0; j < d; ++j) {
      inattentive[j] = static_cast<float>(mean[j] / static_cast<double>(r));
    }
  }
  return out;
}

PruneHook make_importance_prune_hook(std::size_t layer, std::size_t r,
                                     std::size_t special_count) {
  PruneHook hook;
  hook.layer = layer;
  hook.point = HookPoint::kAfterAttention;
  hook.wants_capture = r > 0;
  hook.apply = [r, special_count](std::span<const AttentionCapture> captures,
                                  const Tensor& activations) {
    if (r == 0) return activations;
    std::vector<ImportanceScores> scores;
    scores.reserve(captures.size());
    for (const auto& cap : captures) scores.push_back(token_importance(cap, special_count));
    return prune_tokens(activations, scores, r);
  };
  return hook;
}

PruneHook make_random_removal_hook(std::size_t layer, std::size_t r, std::size_t special_count,
                                   std::uint64_t seed, std::size_t sample_offset) {
  PruneHook hook;
  hook.layer = layer;
  hook.point = HookPoint::kAfterBlock;
  hook.wants_capture = false;
  hook.apply = [=](std::span<const AttentionCapture>, const Tensor& activations) {
    const std::size_t batch = activations.dim(0);
    const std::size_t n = activations.dim(1);
    const std::size_t d = activations.dim(2);
    if (r == 0) return activations;
    if (special_count + 1 > n || r > n - special_count - 1) {
      throw ValidationError("random removal: R = " + std::to_string(r) + " too large for " +
                            std::to_string(n) + " tokens");
    }
    Tensor out({batch, n - r, d});
    std::vector<std::size_t> pool(n - special_count);
    std::vector<char> removed(n);
    for (std::size_t s = 0; s < batch; ++s) {
      CounterRng rng(seed, sample_offset + s);
      std::iota(pool.begin(), pool.end(), special_count);
      std::fill(removed.begin(), removed.end(), 0);
      // Partial Fisher-Yates: the first r slots become the removed set.
      for (std::size_t i = 0; i < r; ++i) {
        const std::size_t j = i + static_cast<std::size_t>(rng.below(pool.size() - i));
        std::swap(pool[i], pool[j]);
        removed[pool[i]] = 1;
      }
      const float* src = activations.raw() + s * n * d;
      float* dst = out.raw() + s * (n - r) * d;
      std::size_t o = 0;
      for (std::size_t t = 0; t < n; ++t) {
        if (removed[t]) continue;
        std::copy_n(src + t * d, d, dst + o * d);
        ++o;
      }
    }
    return out;
  };
  return hook;
}

}  // namespace tokprune
