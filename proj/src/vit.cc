// Copyright 2026 The tokprune Authors
// SPDX-License-Identifier: Apache-2.0

#include "tokprune/vit.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include "tokprune/errors.hpp"
#include "tokprune/io.hpp"
#include "tokprune/random.hpp"

namespace tokprune {

namespace {

std::size_t require_count(const nlohmann::json& doc, const std::string& key,
                          const std::string& context) {
  if (!doc.is_object() || !doc.contains(key)) {
    throw ValidationError(context + ": missing field '" + key + "'");
  }
  const auto& v = doc.at(key);
  if (!v.is_number_unsigned()) {
    throw ValidationError(context + ": field '" + key + "' must be a non-negative integer");
  }
  return v.get<std::size_t>();
}

std::string layer_prefix(std::size_t i) { return "blocks." + std::to_string(i) + "."; }

}  // namespace

std::size_t ViTConfig::mlp_hidden() const {
  return static_cast<std::size_t>(std::llround(static_cast<double>(embed_dim) * mlp_ratio));
}

void ViTConfig::validate() const {
  auto fail = [](const std::string& msg) { throw ValidationError("invalid ViT config: " + msg); };
  if (depth == 0) fail("depth must be >= 1");
  if (embed_dim == 0) fail("embed_dim must be >= 1");
  if (num_heads == 0) fail("num_heads must be >= 1");
  if (embed_dim % num_heads != 0) {
    fail("embed_dim " + std::to_string(embed_dim) + " is not divisible by num_heads " +
         std::to_string(num_heads));
  }
  if (!(mlp_ratio > 0.0) || !std::isfinite(mlp_ratio) || mlp_hidden() == 0) {
    fail("mlp_ratio must be positive");
  }
  if (num_tokens == 0) fail("num_tokens must be >= 1");
  if (num_special_tokens >= num_tokens) {
    fail("num_special_tokens " + std::to_string(num_special_tokens) +
         " must be smaller than num_tokens " + std::to_string(num_tokens));
  }
  if (num_classes == 0) fail("num_classes must be >= 1");
}

nlohmann::json ViTConfig::to_json() const {
  return {{"depth", depth},
          {"embed_dim", embed_dim},
          {"num_heads", num_heads},
          {"mlp_ratio", mlp_ratio},
          {"num_tokens", num_tokens},
          {"num_special_tokens", num_special_tokens},
          {"num_classes", num_classes}};
}

ViTConfig ViTConfig::from_json(const nlohmann::json& doc, const std::string& context) {
  ViTConfig c;
  c.depth = require_count(doc, "depth", context);
  c.embed_dim = require_count(doc, "embed_dim", context);
  c.num_heads = require_count(doc, "num_heads", context);
  c.mlp_ratio = require_field<double>(doc, "mlp_ratio", context);
  c.num_tokens = require_count(doc, "num_tokens", context);
  c.num_special_tokens = require_count(doc, "num_special_tokens", context);
  c.num_classes = require_count(doc, "num_classes", context);
  try {
    c.validate();
  } catch (const ValidationError& e) {
    throw ValidationError(context + ": " + e.what());
  }
  return c;
}

std::string ViTConfig::hash() const { return hex64(fnv1a64(to_json().dump())); }

ViTConfig load_config(const std::filesystem::path& path) {
  return ViTConfig::from_json(read_json(path), path.string());
}

void save_config(const std::filesystem::path& path, const ViTConfig& config) {
  write_json(path, config.to_json());
}

std::vector<std::pair<std::string, Shape>> expected_tensor_shapes(const ViTConfig& c) {
  const std::size_t d = c.embed_dim;
  const std::size_t h = c.mlp_hidden();
  std::vector<std::pair<std::string, Shape>> out;
  for (std::size_t i = 0; i < c.depth; ++i) {
    const std::string p = layer_prefix(i);
    out.emplace_back(p + "norm1.weight", Shape{d});
    out.emplace_back(p + "norm1.bias", Shape{d});
    out.emplace_back(p + "attn.qkv.weight", Shape{d, 3 * d});
    out.emplace_back(p + "attn.qkv.bias", Shape{3 * d});
    out.emplace_back(p + "attn.proj.weight", Shape{d, d});
    out.emplace_back(p + "attn.proj.bias", Shape{d});
    out.emplace_back(p + "norm2.weight", Shape{d});
    out.emplace_back(p + "norm2.bias", Shape{d});
    out.emplace_back(p + "mlp.fc1.weight", Shape{d, h});
    out.emplace_back(p + "mlp.fc1.bias", Shape{h});
    out.emplace_back(p + "mlp.fc2.weight", Shape{h, d});
    out.emplace_back(p + "mlp.fc2.bias", Shape{d});
  }
  out.emplace_back("norm.weight", Shape{d});
  out.emplace_back("norm.bias", Shape{d});
  out.emplace_back("head.weight", Shape{d, c.num_classes});
  out.emplace_back("head.bias", Shape{c.num_classes});
  return out;
}

ViTModel::ViTModel(ViTConfig config, std::vector<EncoderLayer> layers, Tensor norm_gamma,
                   Tensor norm_beta, Tensor head_weight, Tensor head_bias)
    : config_(std::move(config)),
      layers_(std::move(layers)),
      norm_gamma_(std::move(norm_gamma)),
      norm_beta_(std::move(norm_beta)),
      head_weight_(std::move(head_weight)),
      head_bias_(std::move(head_bias)) {
  config_.validate();
  if (layers_.size() != config_.depth) {
    throw ValidationError("model has " + std::to_string(layers_.size()) +
                          " layers, config depth is " + std::to_string(config_.depth));
  }
  const auto expected = expected_tensor_shapes(config_);
  const auto actual = named_tensors();
  for (std::size_t i = 0; i < expected.size(); ++i) {
    if (actual[i].tensor.shape() != expected[i].second) {
      throw ValidationError("tensor '" + expected[i].first + "' has shape " +
                            shape_string(actual[i].tensor.shape()) + ", expected " +
                            shape_string(expected[i].second));
    }
  }
}

std::vector<NamedTensor> ViTModel::named_tensors() const {
  std::vector<NamedTensor> out;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const std::string p = layer_prefix(i);
    const EncoderLayer& l = layers_[i];
    out.push_back({p + "norm1.weight", l.norm1_gamma});
    out.push_back({p + "norm1.bias", l.norm1_beta});
    out.push_back({p + "attn.qkv.weight", l.qkv_weight});
    out.push_back({p + "attn.qkv.bias", l.qkv_bias});
    out.push_back({p + "attn.proj.weight", l.proj_weight});
    out.push_back({p + "attn.proj.bias", l.proj_bias});
    out.push_back({p + "norm2.weight", l.norm2_gamma});
    out.push_back({p + "norm2.bias", l.norm2_beta});
    out.push_back({p + "mlp.fc1.weight", l.fc1_weight});
    out.push_back({p + "mlp.fc1.bias", l.fc1_bias});
    out.push_back({p + "mlp.fc2.weight", l.fc2_weight});
    out.push_back({p + "mlp.fc2.bias", l.fc2_bias});
  }
  out.push_back({"norm.weight", norm_gamma_});
  out.push_back({"norm.bias", norm_beta_});
  out.push_back({"head.weight", head_weight_});
  out.push_back({"head.bias", head_bias_});
  return out;
}

ViTModel ViTModel::from_named_tensors(ViTConfig config, std::vector<NamedTensor> tensors,
                                      const std::string& source) {
  config.validate();
  std::map<std::string, Tensor> by_name;
  for (auto& nt : tensors) {
    if (!by_name.emplace(nt.name, std::move(nt.tensor)).second) {
      throw FormatError(source + ": duplicate tensor '" + nt.name + "'");
    }
  }
  const auto expected = expected_tensor_shapes(config);
  for (const auto& [name, shape] : expected) {
    auto it = by_name.find(name);
    if (it == by_name.end()) throw FormatError(source + ": missing tensor '" + name + "'");
    if (it->second.shape() != shape) {
      throw FormatError(source + ": tensor '" + name + "' has shape " +
                        shape_string(it->second.shape()) + ", config expects " +
                        shape_string(shape));
    }
  }
  if (by_name.size() != expected.size()) {
    for (const auto& [name, t] : by_name) {
      const bool known = std::any_of(expected.begin(), expected.end(),
                                     [&](const auto& e) { return e.first == name; });
      if (!known) throw FormatError(source + ": unexpected tensor '" + name + "'");
    }
  }
  auto take = [&](const std::string& name) { return std::move(by_name.at(name)); };
  std::vector<EncoderLayer> layers(config.depth);
  for (std::size_t i = 0; i < config.depth; ++i) {
    const std::string p = layer_prefix(i);
    EncoderLayer& l = layers[i];
    l.norm1_gamma = take(p + "norm1.weight");
    l.norm1_beta = take(p + "norm1.bias");
    l.qkv_weight = take(p + "attn.qkv.weight");
    l.qkv_bias = take(p + "attn.qkv.bias");
    l.proj_weight = take(p + "attn.proj.weight");
    l.proj_bias = take(p + "attn.proj.bias");
    l.norm2_gamma = take(p + "norm2.weight");
    l.norm2_beta = take(p + "norm2.bias");
    l.fc1_weight = take(p + "mlp.fc1.weight");
    l.fc1_bias = take(p + "mlp.fc1.bias");
    l.fc2_weight = take(p + "mlp.fc2.weight");
    l.fc2_bias = take(p + "mlp.fc2.bias");
  }
  return ViTModel(std::move(config), std::move(layers), take("norm.weight"), take("norm.bias"),
                  take("head.weight"), take("head.bias"));
}

std::string ViTModel::weights_hash() const {
  return hex64(fnv1a64(encode_tensors(named_tensors())));
}

Tensor ViTModel::attention(const Tensor& normed, const EncoderLayer& layer,
                           std::size_t layer_index,
                           std::vector<AttentionCapture>* captures) const {
  const std::size_t batch = normed.dim(0);
  const std::size_t n = normed.dim(1);
  const std::size_t d = config_.embed_dim;
  const std::size_t heads = config_.num_heads;
  const std::size_t c = config_.head_dim();
  const float scale = 1.0f / std::sqrt(static_cast<float>(c));

  const Tensor qkv = ops::linear(normed, layer.qkv_weight, layer.qkv_bias.data());
  Tensor out({batch, n, d});
  if (captures) {
    captures->clear();
    for (std::size_t s = 0; s < batch; ++s) {
      captures->push_back({Tensor({heads, n, n}), Tensor({heads, n, c}), layer_index});
    }
  }

  Tensor q({n, c}), k({n, c}), v({n, c});
  for (std::size_t s = 0; s < batch; ++s) {
    for (std::size_t h = 0; h < heads; ++h) {
      for (std::size_t t = 0; t < n; ++t) {
        const float* row = qkv.raw() + (s * n + t) * 3 * d;
        std::copy_n(row + h * c, c, q.raw() + t * c);
        std::copy_n(row + d + h * c, c, k.raw() + t * c);
        std::copy_n(row + 2 * d + h * c, c, v.raw() + t * c);
      }
      Tensor scores = ops::matmul_transposed(q, k);
      for (float& x : scores.data()) x *= scale;
      const Tensor probs = ops::softmax(scores, 1);
      const Tensor head_out = ops::matmul(probs, v);
      for (std::size_t t = 0; t < n; ++t) {
        std::copy_n(head_out.raw() + t * c, c, out.raw() + (s * n + t) * d + h * c);
      }
      if (captures) {
        AttentionCapture& cap = (*captures)[s];
        std::copy_n(probs.raw(), n * n, cap.attn.raw() + h * n * n);
        std::copy_n(v.raw(), n * c, cap.values.raw() + h * n * c);
      }
    }
  }
  return ops::linear(out, layer.proj_weight, layer.proj_bias.data());
}

void ViTModel::check_hook_output(const Tensor& before, const Tensor& after) const {
  const std::size_t special = config_.num_special_tokens;
  if (after.rank() != 3 || after.dim(0) != before.dim(0)) {
    throw ValidationError("prune hook returned " + shape_string(after.shape()) +
                          ", expected [b x N' x d] with b = " + std::to_string(before.dim(0)));
  }
  if (after.dim(2) != config_.embed_dim) {
    throw ValidationError("prune hook returned embedding dim " + std::to_string(after.dim(2)) +
                          ", model uses " + std::to_string(config_.embed_dim));
  }
  if (after.dim(1) < special + 1) {
    throw ValidationError("prune hook left " + std::to_string(after.dim(1)) +
                          " tokens, need at least " + std::to_string(special + 1));
  }
  const std::size_t d = config_.embed_dim;
  for (std::size_t s = 0; s < before.dim(0); ++s) {
    const float* src = before.raw() + s * before.dim(1) * d;
    const float* dst = after.raw() + s * after.dim(1) * d;
    if (!std::equal(src, src + special * d, dst)) {
      throw ValidationError("prune hook removed or altered special tokens");
    }
  }
}

Tensor ViTModel::forward(const Tensor& tokens, const PruneHook* hook) const {
  const ViTConfig& cfg = config_;
  if (tokens.rank() != 3 || tokens.dim(2) != cfg.embed_dim) {
    throw DimensionError("forward: expected tokens [b x N x " + std::to_string(cfg.embed_dim) +
                         "], got " + shape_string(tokens.shape()));
  }
  if (tokens.dim(1) < cfg.num_special_tokens + 1 || tokens.dim(1) > cfg.num_tokens) {
    throw DimensionError("forward: token count " + std::to_string(tokens.dim(1)) +
                         " outside [" + std::to_string(cfg.num_special_tokens + 1) + ", " +
                         std::to_string(cfg.num_tokens) + "]");
  }
  if (hook && hook->layer >= cfg.depth) {
    throw ValidationError("prune hook layer " + std::to_string(hook->layer) +
                          " out of range for depth " + std::to_string(cfg.depth));
  }
  if (hook && !hook->apply) throw ValidationError("prune hook has no function");

  Tensor x = tokens;
  std::vector<AttentionCapture> captures;
  for (std::size_t i = 0; i < cfg.depth; ++i) {
    const EncoderLayer& layer = layers_[i];
    const bool hook_here = hook && hook->layer == i;
    const Tensor normed = ops::layer_norm(x, layer.norm1_gamma.data(), layer.norm1_beta.data());
    ops::add_inplace(x, attention(normed, layer, i,
                                  hook_here && hook->wants_capture ? &captures : nullptr));

    auto run_hook = [&] {
      Tensor pruned = hook->apply(captures, x);
      check_hook_output(x, pruned);
      x = std::move(pruned);
    };
    if (hook_here && hook->point == HookPoint::kAfterAttention) run_hook();

    const Tensor hidden = ops::gelu(ops::linear(
        ops::layer_norm(x, layer.norm2_gamma.data(), layer.norm2_beta.data()), layer.fc1_weight,
        layer.fc1_bias.data()));
    ops::add_inplace(x, ops::linear(hidden, layer.fc2_weight, layer.fc2_bias.data()));

    if (hook_here && hook->point == HookPoint::kAfterBlock) run_hook();
  }

  // Only token 0 feeds the classifier.
  const std::size_t batch = x.dim(0);
  const std::size_t n = x.dim(1);
  const std::size_t d = cfg.embed_dim;
  Tensor cls({batch, d});
  for (std::size_t s = 0; s < batch; ++s) std::copy_n(x.raw() + s * n * d, d, cls.raw() + s * d);
  return ops::linear(ops::layer_norm(cls, norm_gamma_.data(), norm_beta_.data()), head_weight_,
                     head_bias_.data());
}

ViTModel generate_random_model(const ViTConfig& config, std::uint64_t seed) {
  config.validate();
  const auto shapes = expected_tensor_shapes(config);
  std::vector<NamedTensor> tensors;
  tensors.reserve(shapes.size());
  for (std::size_t i = 0; i < shapes.size(); ++i) {
    const auto& [name, shape] = shapes[i];
    Tensor t(shape);
    CounterRng rng(seed, i);
    const bool is_norm = name.find("norm") != std::string::npos;
    if (is_norm) {
      // gamma = 1, beta = 0
      if (name.ends_with(".weight")) std::fill(t.data().begin(), t.data().end(), 1.0f);
    } else if (shape.size() == 2) {
      // Uniform with variance 1 / fan_in.
      const float bound = std::sqrt(3.0f / static_cast<float>(shape[0]));
      for (float& v : t.data()) v = rng.uniform(-bound, bound);
    } else {
      for (float& v : t.data()) v = rng.uniform(-0.02f, 0.02f);
    }
    tensors.push_back({name, std::move(t)});
  }
  return ViTModel::from_named_tensors(config, std::move(tensors), "generated");
}

void save_weights(const std::filesystem::path& path, const ViTModel& model) {
  save_tensors(path, model.named_tensors());
}

ViTModel load_model(const ViTConfig& config, const std::filesystem::path& weights_path) {
  return ViTModel::from_named_tensors(config, load_tensors(weights_path), weights_path.string());
}

ViTModel load_model(const std::filesystem::path& config_path,
                    const std::filesystem::path& weights_path) {
  return load_model(load_config(config_path), weights_path);
}

Tensor embed_tokens(const Tensor& features, const ViTConfig& config) {
  if (features.rank() != 3 || features.dim(2) != config.embed_dim) {
    throw DimensionError("embed_tokens: expected [b x N x " + std::to_string(config.embed_dim) +
                         "], got " + shape_string(features.shape()));
  }
  if (features.dim(1) < config.num_special_tokens + 1 || features.dim(1) > config.num_tokens) {
    throw DimensionError("embed_tokens: token count " + std::to_string(features.dim(1)) +
                         " outside the model's range");
  }
  for (float v : features.data()) {
    if (!std::isfinite(v)) throw ValidationError("embed_tokens: non-finite feature value");
  }
  return features;
}

Tensor synthesize_tokens(const ViTConfig& config, std::size_t batch, std::size_t n_tokens,
                         std::uint64_t seed) {
  const std::size_t d = config.embed_dim;
  Tensor out({batch, n_tokens, d});
  for (std::size_t s = 0; s < batch; ++s) {
    CounterRng rng(seed, s);
    for (std::size_t i = 0; i < n_tokens * d; ++i) {
      const float u = static_cast<float>(rng.at(i) >> 40) * 0x1.0p-24f;
      out[s * n_tokens * d + i] = 2.0f * u - 1.0f;
    }
  }
  return out;
}

}  // namespace tokprune
