// Copyright 2026 The tokprune Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "tokprune/tensor.hpp"
#include "tokprune/vit.hpp"

namespace tokprune {

/// Axis of the head-reduced attention map M[query][key] that is summed to
/// score a token. Summing over queries (axis 0) gives each key the
/// attention it receives from every token.
inline constexpr std::size_t kAttentionScoreReduceAxis = 0;

/// Per-token importance for one sample. Special tokens (the first
/// `special_count`) carry +inf in `a_s` and `total` and 0 in `v_s`, so they
/// are never ranked for removal.
struct ImportanceScores {
  std::vector<float> a_s;
  std::vector<float> v_s;
  std::vector<float> total;
  std::size_t special_count = 0;

  std::size_t size() const { return total.size(); }
};

/// Attention score: max over heads, sum of attention received, divided by
/// the largest prunable score.
std::vector<float> attention_scores(const Tensor& attn, std::size_t special_count);

/// Value score: max over heads, sum over features, softmax over the
/// prunable tokens.
std::vector<float> value_scores(const Tensor& values, std::size_t special_count);

/// total = attention_scores + value_scores.
ImportanceScores token_importance(const AttentionCapture& capture, std::size_t special_count);

/// Indices (ascending) of the special tokens plus the `n_keep` prunable
/// tokens with the highest total score. Equal scores keep the lower index.
std::vector<std::size_t> select_kept_tokens(std::span<const float> total,
                                            std::size_t special_count, std::size_t n_keep);

/// Removes `r` tokens per sample, keeping the survivors in input order and
/// appending one inattentive token holding the mean of the removed rows.
/// Output is [b x (N' - r + 1) x d]; r = 0 returns the input unchanged.
/// `scores` holds one entry per sample.
Tensor prune_tokens(const Tensor& activations, std::span<const ImportanceScores> scores,
                    std::size_t r);

/// Hook that scores tokens from the captured attention and values and
/// prunes `r` of them after `layer`'s attention.
PruneHook make_importance_prune_hook(std::size_t layer, std::size_t r,
                                     std::size_t special_count);

/// Hook that drops `r` uniformly random prunable tokens per sample after
/// `layer` (whole block), without an inattentive token. Draws depend only
/// on (seed, sample_offset + sample index).
PruneHook make_random_removal_hook(std::size_t layer, std::size_t r, std::size_t special_count,
                                   std::uint64_t seed, std::size_t sample_offset = 0);

}  // namespace tokprune
