// Copyright 2026 The tokprune Authors
// SPDX-License-Identifier: Apache-2.0

#include "tokprune/dataset.hpp"

#include <algorithm>
#include <cmath>

#include "tokprune/errors.hpp"
#include "tokprune/io.hpp"
#include "tokprune/random.hpp"
#include "tokprune/tensor_io.hpp"

namespace tokprune {

namespace {
// Keeps label draws independent of the token streams (which use stream = sample).
constexpr std::uint64_t kLabelStream = 0x4c4142454cULL;
}  // namespace

Tensor Dataset::batch(std::size_t begin, std::size_t count) const {
  const std::size_t n = tokens.dim(1);
  const std::size_t d = tokens.dim(2);
  if (begin + count > size() || count == 0) {
    throw ValidationError("dataset batch [" + std::to_string(begin) + ", " +
                          std::to_string(begin + count) + ") out of range");
  }
  return Tensor({count, n, d}, tokens.data().subspan(begin * n * d, count * n * d));
}

void Dataset::validate(const ViTConfig& config) const {
  if (labels.empty()) throw ValidationError("dataset is empty");
  if (tokens.rank() != 3 || tokens.dim(0) != labels.size()) {
    throw ValidationError("dataset tokens " + shape_string(tokens.shape()) + " do not match " +
                          std::to_string(labels.size()) + " labels");
  }
  if (tokens.dim(1) != config.num_tokens || tokens.dim(2) != config.embed_dim) {
    throw ValidationError("dataset tokens " + shape_string(tokens.shape()) +
                          " do not match model (N = " + std::to_string(config.num_tokens) +
                          ", d = " + std::to_string(config.embed_dim) + ")");
  }
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] >= config.num_classes) {
      throw ValidationError("dataset label " + std::to_string(labels[i]) + " of sample " +
                            std::to_string(i) + " is outside num_classes " +
                            std::to_string(config.num_classes));
    }
  }
}

nlohmann::json SyntheticDatasetSpec::to_json() const {
  return {{"synthetic",
           {{"samples", samples},
            {"classes", classes},
            {"seed", seed},
            {"num_tokens", num_tokens},
            {"embed_dim", embed_dim}}}};
}

SyntheticDatasetSpec SyntheticDatasetSpec::from_json(const nlohmann::json& doc,
                                                     const std::string& context) {
  const auto body = require_field<nlohmann::json>(doc, "synthetic", context);
  SyntheticDatasetSpec s;
  s.samples = require_field<std::size_t>(body, "samples", context + ": synthetic");
  s.classes = require_field<std::size_t>(body, "classes", context + ": synthetic");
  s.seed = require_field<std::uint64_t>(body, "seed", context + ": synthetic");
  s.num_tokens = require_field<std::size_t>(body, "num_tokens", context + ": synthetic");
  s.embed_dim = require_field<std::size_t>(body, "embed_dim", context + ": synthetic");
  if (s.samples == 0 || s.classes == 0 || s.num_tokens == 0 || s.embed_dim == 0) {
    throw ValidationError(context + ": synthetic dataset fields must be positive");
  }
  return s;
}

Dataset synthesize_dataset(const SyntheticDatasetSpec& spec) {
  ViTConfig shape_only;
  shape_only.embed_dim = spec.embed_dim;
  Dataset ds;
  ds.tokens = synthesize_tokens(shape_only, spec.samples, spec.num_tokens, spec.seed);
  CounterRng rng(spec.seed, kLabelStream);
  ds.labels.resize(spec.samples);
  for (auto& l : ds.labels) l = static_cast<std::uint32_t>(rng.below(spec.classes));
  return ds;
}

void label_with_model(Dataset& dataset, const ViTModel& model, std::size_t batch_size) {
  const std::size_t classes = model.config().num_classes;
  for (std::size_t b = 0; b < dataset.size(); b += batch_size) {
    const std::size_t count = std::min(batch_size, dataset.size() - b);
    const Tensor logits = model.forward(dataset.batch(b, count));
    for (std::size_t s = 0; s < count; ++s) {
      const float* row = logits.raw() + s * classes;
      dataset.labels[b + s] = static_cast<std::uint32_t>(std::max_element(row, row + classes) - row);
    }
  }
}

void save_dataset(const std::filesystem::path& path, const Dataset& dataset) {
  Tensor labels({dataset.labels.size()});
  for (std::size_t i = 0; i < dataset.labels.size(); ++i) {
    labels[i] = static_cast<float>(dataset.labels[i]);
  }
  save_tensors(path, {{"tokens", dataset.tokens}, {"labels", labels}});
}

Dataset load_dataset(const std::filesystem::path& path) {
  if (path.extension() == ".json") {
    return synthesize_dataset(SyntheticDatasetSpec::from_json(read_json(path), path.string()));
  }
  Dataset ds;
  bool have_tokens = false, have_labels = false;
  for (auto& [name, tensor] : load_tensors(path)) {
    if (name == "tokens") {
      if (tensor.rank() != 3) {
        throw FormatError(path.string() + ": tensor 'tokens' must be [S x N x d], got " +
                          shape_string(tensor.shape()));
      }
      ds.tokens = std::move(tensor);
      have_tokens = true;
    } else if (name == "labels") {
      if (tensor.rank() != 1) throw FormatError(path.string() + ": tensor 'labels' must be 1-D");
      for (float v : tensor.data()) {
        if (!(v >= 0.0f) || v != std::floor(v) || v > 16777216.0f) {
          throw FormatError(path.string() + ": tensor 'labels' holds a non-integer value");
        }
        ds.labels.push_back(static_cast<std::uint32_t>(v));
      }
      have_labels = true;
    } else {
      throw FormatError(path.string() + ": unexpected tensor '" + name + "'");
    }
  }
  if (!have_tokens) throw FormatError(path.string() + ": missing tensor 'tokens'");
  if (!have_labels) throw FormatError(path.string() + ": missing tensor 'labels'");
  if (ds.tokens.dim(0) != ds.labels.size()) {
    throw FormatError(path.string() + ": " + std::to_string(ds.tokens.dim(0)) +
                      " token samples but " + std::to_string(ds.labels.size()) + " labels");
  }
  return ds;
}

}  // namespace tokprune
