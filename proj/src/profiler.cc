// Copyright 2026 The tokprune Authors
// SPDX-License-Identifier: Apache-2.0

#include "tokprune/profiler.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "tokprune/errors.hpp"
#include "tokprune/pruning.hpp"
#include "tokprune/random.hpp"
#include "tokprune/scheduler.hpp"

namespace tokprune {

namespace {

std::size_t argmax_row(const float* row, std::size_t n) {
  return static_cast<std::size_t>(std::max_element(row, row + n) - row);
}

void check_dataset(const Dataset& dataset, const ClassifierShape& shape) {
  if (dataset.size() == 0) throw ValidationError("accuracy proxy: dataset is empty");
  if (dataset.tokens.rank() != 3 || dataset.tokens.dim(0) != dataset.size() ||
      dataset.tokens.dim(1) != shape.num_tokens) {
    throw ValidationError("accuracy proxy: dataset tokens " +
                          shape_string(dataset.tokens.shape()) + " do not match N = " +
                          std::to_string(shape.num_tokens));
  }
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    if (dataset.labels[i] >= shape.num_classes) {
      throw ValidationError("accuracy proxy: label " + std::to_string(dataset.labels[i]) +
                            " of sample " + std::to_string(i) + " outside num_classes " +
                            std::to_string(shape.num_classes));
    }
  }
}

std::size_t count_correct(const Tensor& logits, const Dataset& dataset, std::size_t begin,
                          std::size_t count, std::size_t classes) {
  if (logits.rank() != 2 || logits.dim(0) != count || logits.dim(1) != classes) {
    throw DimensionError("classifier returned " + shape_string(logits.shape()) + ", expected [" +
                         std::to_string(count) + "x" + std::to_string(classes) + "]");
  }
  std::size_t correct = 0;
  for (std::size_t s = 0; s < count; ++s) {
    if (argmax_row(logits.raw() + s * classes, classes) == dataset.labels[begin + s]) ++correct;
  }
  return correct;
}

ClassifierShape shape_of(const ViTConfig& c) {
  return {c.num_tokens, c.num_special_tokens, c.num_classes};
}

Classifier classifier_of(const ViTModel& model) {
  return [&model](const Tensor& tokens, const PruneHook* hook) {
    return model.forward(tokens, hook);
  };
}

}  // namespace

double quantile_inclusive(std::span<const double> sorted, double q) {
  if (sorted.empty()) throw ValidationError("quantile of an empty sample");
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + (sorted[hi] - sorted[lo]) * frac;
}

LatencySample summarize_latency(std::vector<double> samples_us, std::size_t n_keep,
                                std::size_t warmup) {
  if (samples_us.empty()) throw MeasurementError("no latency samples recorded");
  std::sort(samples_us.begin(), samples_us.end());
  LatencySample s;
  s.n_keep = n_keep;
  s.repetitions = samples_us.size();
  s.warmup = warmup;
  s.median_us = quantile_inclusive(samples_us, 0.5);
  s.iqr_us = quantile_inclusive(samples_us, 0.75) - quantile_inclusive(samples_us, 0.25);
  return s;
}

LatencySample measure_latency(const ViTModel& model, std::size_t n_keep,
                              const LatencyOptions& options) {
  const ViTConfig& cfg = model.config();
  if (options.repetitions < 1) throw ValidationError("measure_latency: repetitions must be >= 1");
  if (options.batch_size < 1) throw ValidationError("measure_latency: batch_size must be >= 1");
  if (n_keep < cfg.num_special_tokens + 1 || n_keep > cfg.num_tokens) {
    throw ValidationError("measure_latency: n_keep " + std::to_string(n_keep) + " outside [" +
                          std::to_string(cfg.num_special_tokens + 1) + ", " +
                          std::to_string(cfg.num_tokens) + "]");
  }

  Tensor input;
  std::optional<PruneHook> hook;
  if (options.mode == MeasurementMode::kDeployedPrune) {
    const std::size_t layer = options.prune_layer.value_or(default_prune_layer(cfg.depth));
    if (layer >= cfg.depth) {
      throw ValidationError("measure_latency: prune layer " + std::to_string(layer) +
                            " does not exist in a depth-" + std::to_string(cfg.depth) + " model");
    }
    input = synthesize_tokens(cfg, options.batch_size, cfg.num_tokens, options.input_seed);
    const std::size_t r = cfg.num_tokens - n_keep;
    if (r > 0) hook = make_importance_prune_hook(layer, r, cfg.num_special_tokens);
  } else {
    input = synthesize_tokens(cfg, options.batch_size, n_keep, options.input_seed);
  }
  const PruneHook* hook_ptr = hook ? &*hook : nullptr;

  volatile float sink = 0.0f;
  for (std::size_t i = 0; i < options.warmup; ++i) sink = model.forward(input, hook_ptr)[0];

  std::vector<double> samples;
  samples.reserve(options.repetitions);
  for (std::size_t i = 0; i < options.repetitions; ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    const Tensor logits = model.forward(input, hook_ptr);
    const auto t1 = std::chrono::steady_clock::now();
    sink = logits[0];
    samples.push_back(std::chrono::duration<double, std::micro>(t1 - t0).count());
  }
  (void)sink;

  LatencySample s = summarize_latency(std::move(samples), n_keep, options.warmup);
  if (!(s.median_us > 0.0)) {
    throw MeasurementError("measure_latency: non-positive median latency at n_keep = " +
                           std::to_string(n_keep));
  }
  return s;
}

double baseline_accuracy(const Classifier& classifier, const ClassifierShape& shape,
                         const Dataset& dataset, std::size_t batch_size) {
  check_dataset(dataset, shape);
  if (batch_size == 0) throw ValidationError("accuracy: batch_size must be >= 1");
  std::size_t correct = 0;
  for (std::size_t b = 0; b < dataset.size(); b += batch_size) {
    const std::size_t count = std::min(batch_size, dataset.size() - b);
    correct += count_correct(classifier(dataset.batch(b, count), nullptr), dataset, b, count,
                             shape.num_classes);
  }
  return static_cast<double>(correct) / static_cast<double>(dataset.size());
}

double measure_accuracy_proxy(const Classifier& classifier, const ClassifierShape& shape,
                              const Dataset& dataset, std::size_t n_keep,
                              const AccuracyOptions& options) {
  check_dataset(dataset, shape);
  if (n_keep < shape.num_special_tokens + 1 || n_keep > shape.num_tokens) {
    throw ValidationError("accuracy proxy: n_keep " + std::to_string(n_keep) + " outside [" +
                          std::to_string(shape.num_special_tokens + 1) + ", " +
                          std::to_string(shape.num_tokens) + "]");
  }
  if (options.trials == 0) throw ValidationError("accuracy proxy: trials must be >= 1");
  if (options.batch_size == 0) throw ValidationError("accuracy proxy: batch_size must be >= 1");
  const std::size_t r = shape.num_tokens - n_keep;
  if (r == 0) return baseline_accuracy(classifier, shape, dataset, options.batch_size);

  std::size_t correct = 0;
  for (std::size_t t = 0; t < options.trials; ++t) {
    const std::uint64_t trial_seed = CounterRng::mix(options.seed ^ CounterRng::mix(t + 1));
    for (std::size_t b = 0; b < dataset.size(); b += options.batch_size) {
      const std::size_t count = std::min(options.batch_size, dataset.size() - b);
      const PruneHook hook = make_random_removal_hook(options.removal_layer, r,
                                                      shape.num_special_tokens, trial_seed, b);
      correct += count_correct(classifier(dataset.batch(b, count), &hook), dataset, b, count,
                               shape.num_classes);
    }
  }
  return static_cast<double>(correct) /
         (static_cast<double>(dataset.size()) * static_cast<double>(options.trials));
}

double measure_accuracy_proxy(const ViTModel& model, const Dataset& dataset, std::size_t n_keep,
                              const AccuracyOptions& options) {
  if (options.removal_layer >= model.config().depth) {
    throw ValidationError("accuracy proxy: removal layer " +
                          std::to_string(options.removal_layer) + " out of range");
  }
  return measure_accuracy_proxy(classifier_of(model), shape_of(model.config()), dataset, n_keep,
                                options);
}

std::vector<std::size_t> grid_points(std::size_t n_min, std::size_t n_max, std::size_t stride) {
  if (stride == 0) throw ValidationError("grid stride must be >= 1");
  if (n_min > n_max) {
    throw ValidationError("grid n_min " + std::to_string(n_min) + " exceeds n_max " +
                          std::to_string(n_max));
  }
  std::vector<std::size_t> out;
  for (std::size_t n = n_min; n <= n_max; n += stride) out.push_back(n);
  if (out.back() != n_max) out.push_back(n_max);
  return out;
}

WorkloadProfile profile_grid(const ViTModel& model, const Dataset* dataset,
                             const GridOptions& options) {
  const ViTConfig& cfg = model.config();
  const std::size_t n_min = options.n_min ? options.n_min : cfg.num_special_tokens + 1;
  const std::size_t n_max = options.n_max ? options.n_max : cfg.num_tokens;
  if (n_min < cfg.num_special_tokens + 1 || n_max > cfg.num_tokens) {
    throw ValidationError("profile grid [" + std::to_string(n_min) + ", " +
                          std::to_string(n_max) + "] outside [" +
                          std::to_string(cfg.num_special_tokens + 1) + ", " +
                          std::to_string(cfg.num_tokens) + "]");
  }
  const auto grid = grid_points(n_min, n_max, options.stride);
  const bool with_accuracy = options.measure_accuracy && dataset != nullptr;
  if (with_accuracy) dataset->validate(cfg);

  WorkloadProfile p;
  p.model = {model.weights_hash(), cfg.hash(), cfg.depth, cfg.num_tokens, cfg.num_special_tokens};
  p.device_label = options.device_label;
  p.mode = options.latency.mode;
  p.stride = options.stride;
  p.prune_layer = options.latency.prune_layer.value_or(default_prune_layer(cfg.depth));
  p.batch_size = options.latency.batch_size;
  for (std::size_t n : grid) {
    ProfileRow row;
    row.n = n;
    row.latency = measure_latency(model, n, options.latency);
    if (with_accuracy) row.accuracy = measure_accuracy_proxy(model, *dataset, n, options.accuracy);
    p.rows.push_back(row);
  }
  p.validate();
  return p;
}

std::vector<LatencyStep> detect_nonlinearities(std::span<const std::size_t> n,
                                               std::span<const double> latency_us,
                                               double relative_threshold) {
  if (n.size() != latency_us.size()) {
    throw ValidationError("detect_nonlinearities: grid and latency lengths differ");
  }
  if (!(relative_threshold >= 0.0)) {
    throw ValidationError("detect_nonlinearities: threshold must be non-negative");
  }
  std::vector<LatencyStep> out;
  for (std::size_t i = 0; i + 1 < n.size(); ++i) {
    if (!(latency_us[i] > 0.0)) {
      throw ValidationError("detect_nonlinearities: non-positive latency at n = " +
                            std::to_string(n[i]));
    }
    const double frac = (latency_us[i + 1] - latency_us[i]) / latency_us[i];
    if (std::abs(frac) >= relative_threshold) out.push_back({n[i], n[i + 1], frac});
  }
  return out;
}

std::vector<LatencyStep> detect_nonlinearities(const WorkloadProfile& profile,
                                               double relative_threshold) {
  return detect_nonlinearities(profile.grid(), profile.latencies(), relative_threshold);
}

}  // namespace tokprune
