// Copyright 2026 The tokprune Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "tokprune/tensor.hpp"
#include "tokprune/vit.hpp"

namespace tokprune {

/// Pre-embedded samples with integer labels.
struct Dataset {
  Tensor tokens;                      // [samples x N x d]
  std::vector<std::uint32_t> labels;  // one per sample

  std::size_t size() const { return labels.size(); }
  Tensor batch(std::size_t begin, std::size_t count) const;
  void validate(const ViTConfig& config) const;
};

/// Seeded synthetic set: tokens from synthesize_tokens, labels uniform in
/// [0, classes).
struct SyntheticDatasetSpec {
  std::size_t samples = 64;
  std::size_t classes = 2;
  std::uint64_t seed = 0;
  std::size_t num_tokens = 197;
  std::size_t embed_dim = 192;

  nlohmann::json to_json() const;
  static SyntheticDatasetSpec from_json(const nlohmann::json& doc, const std::string& context);
};

Dataset synthesize_dataset(const SyntheticDatasetSpec& spec);

/// Replaces labels with the model's unpruned top-1 predictions.
void label_with_model(Dataset& dataset, const ViTModel& model, std::size_t batch_size = 16);

/// Binary container with tensors "tokens" [S x N x d] and "labels" [S]
/// (integers stored as f32).
void save_dataset(const std::filesystem::path& path, const Dataset& dataset);

/// Accepts the binary container or a JSON synthetic spec
/// ({"synthetic": {...}}).
Dataset load_dataset(const std::filesystem::path& path);

}  // namespace tokprune
