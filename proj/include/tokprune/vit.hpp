// Copyright 2026 The tokprune Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "tokprune/tensor.hpp"
#include "tokprune/tensor_io.hpp"

namespace tokprune {

struct ViTConfig {
  std::size_t depth = 12;
  std::size_t embed_dim = 192;
  std::size_t num_heads = 3;
  double mlp_ratio = 4.0;
  // Patch tokens plus special tokens.
  std::size_t num_tokens = 197;
  // Prefix tokens (class, registers) that are never pruned.
  std::size_t num_special_tokens = 1;
  std::size_t num_classes = 1000;

  std::size_t head_dim() const { return embed_dim / num_heads; }
  std::size_t mlp_hidden() const;

  /// Throws ValidationError describing the first violated constraint.
  void validate() const;

  nlohmann::json to_json() const;
  static ViTConfig from_json(const nlohmann::json& doc, const std::string& context);

  /// Hash of the canonical JSON form.
  std::string hash() const;

  bool operator==(const ViTConfig&) const = default;
};

ViTConfig load_config(const std::filesystem::path& path);
void save_config(const std::filesystem::path& path, const ViTConfig& config);

struct EncoderLayer {
  Tensor norm1_gamma, norm1_beta;
  Tensor qkv_weight, qkv_bias;    // [d x 3d], [3d]; columns are q | k | v, head-major
  Tensor proj_weight, proj_bias;  // [d x d], [d]
  Tensor norm2_gamma, norm2_beta;
  Tensor fc1_weight, fc1_bias;  // [d x hidden], [hidden]
  Tensor fc2_weight, fc2_bias;  // [hidden x d], [d]
};

/// Post-softmax attention and values of one sample at one layer.
struct AttentionCapture {
  Tensor attn;    // [H x N' x N']
  Tensor values;  // [H x N' x C]
  std::size_t layer_index = 0;
};

enum class HookPoint {
  kAfterAttention,  // after the attention residual, before the MLP
  kAfterBlock,      // after the full encoder block
};

/// Called once during forward at `layer`. Receives one capture per batch
/// sample plus the current activations [b x N' x d] and returns the
/// activations the remaining layers consume. Must be a pure function.
struct PruneHook {
  using Fn = std::function<Tensor(std::span<const AttentionCapture>, const Tensor&)>;

  std::size_t layer = 0;
  HookPoint point = HookPoint::kAfterAttention;
  bool wants_capture = true;
  Fn apply;
};

class ViTModel {
 public:
  ViTModel(ViTConfig config, std::vector<EncoderLayer> layers, Tensor norm_gamma,
           Tensor norm_beta, Tensor head_weight, Tensor head_bias);

  const ViTConfig& config() const { return config_; }
  const std::vector<EncoderLayer>& layers() const { return layers_; }

  /// Tensors in canonical serialization order.
  std::vector<NamedTensor> named_tensors() const;

  /// Validates names, count and shapes against `config`.
  static ViTModel from_named_tensors(ViTConfig config, std::vector<NamedTensor> tensors,
                                     const std::string& source);

  /// Hash of the serialized weights.
  std::string weights_hash() const;

  /// Pre-norm encoder stack; logits [b x num_classes] from special token 0.
  Tensor forward(const Tensor& tokens, const PruneHook* hook = nullptr) const;

 private:
  Tensor attention(const Tensor& normed, const EncoderLayer& layer, std::size_t layer_index,
                   std::vector<AttentionCapture>* captures) const;
  void check_hook_output(const Tensor& before, const Tensor& after) const;

  ViTConfig config_;
  std::vector<EncoderLayer> layers_;
  Tensor norm_gamma_, norm_beta_;
  Tensor head_weight_, head_bias_;
};

/// (name, shape) of every weight tensor, in serialization order.
std::vector<std::pair<std::string, Shape>> expected_tensor_shapes(const ViTConfig& config);

/// Deterministic weights from CounterRng; tensor i draws from stream i.
ViTModel generate_random_model(const ViTConfig& config, std::uint64_t seed);

void save_weights(const std::filesystem::path& path, const ViTModel& model);
ViTModel load_model(const std::filesystem::path& config_path,
                    const std::filesystem::path& weights_path);
ViTModel load_model(const ViTConfig& config, const std::filesystem::path& weights_path);

/// Validates pre-tokenized features [b x N x d] against `config`.
Tensor embed_tokens(const Tensor& features, const ViTConfig& config);

/// Seeded synthetic tokens [batch x n_tokens x d], uniform in [-1, 1).
/// Token t of sample s is the same for every n_tokens, so a shorter input
/// is a prefix of a longer one.
Tensor synthesize_tokens(const ViTConfig& config, std::size_t batch, std::size_t n_tokens,
                         std::uint64_t seed);

}  // namespace tokprune
