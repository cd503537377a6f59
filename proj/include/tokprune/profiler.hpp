// Copyright 2026 The tokprune Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tokprune/dataset.hpp"
#include "tokprune/vit.hpp"
#include "tokprune/workload_profile.hpp"

namespace tokprune {

/// Linear interpolation between order statistics at position q * (n - 1)
/// of an ascending sample (the "inclusive" rule). q = 0.5 on an even count
/// gives the mean of the central pair.
double quantile_inclusive(std::span<const double> sorted, double q);

/// Median and Q3 - Q1 of raw timings.
LatencySample summarize_latency(std::vector<double> samples_us, std::size_t n_keep,
                                std::size_t warmup);

struct LatencyOptions {
  MeasurementMode mode = MeasurementMode::kDeployedPrune;
  std::size_t repetitions = 100;
  std::size_t warmup = 10;
  // Deployed-prune only; defaults to the 25%-depth placement rule.
  std::optional<std::size_t> prune_layer;
  std::size_t batch_size = 1;
  std::uint64_t input_seed = 0;
};

/// Times `repetitions` forwards after `warmup` untimed ones on a fixed
/// seeded input.
///
/// Thread contract: call from a single thread with no other work running in
/// the process; the timer wraps the whole forward call.
LatencySample measure_latency(const ViTModel& model, std::size_t n_keep,
                              const LatencyOptions& options);

/// Anything that maps tokens [b x N x d] to logits [b x classes] and honours
/// an optional hook. ViTModel::forward is the usual implementation.
using Classifier = std::function<Tensor(const Tensor& tokens, const PruneHook* hook)>;

struct ClassifierShape {
  std::size_t num_tokens = 0;
  std::size_t num_special_tokens = 0;
  std::size_t num_classes = 0;
};

struct AccuracyOptions {
  std::uint64_t seed = 0;
  std::size_t trials = 1;
  std::size_t batch_size = 16;
  // Tokens are removed after this whole layer.
  std::size_t removal_layer = 0;
};

/// Top-1 accuracy with no tokens removed.
double baseline_accuracy(const Classifier& classifier, const ClassifierShape& shape,
                         const Dataset& dataset, std::size_t batch_size = 16);

/// Mean top-1 accuracy over `trials` draws, each removing N - n_keep
/// uniformly random prunable tokens per sample after `removal_layer`.
/// n_keep = N is exactly the baseline.
double measure_accuracy_proxy(const Classifier& classifier, const ClassifierShape& shape,
                              const Dataset& dataset, std::size_t n_keep,
                              const AccuracyOptions& options);

double measure_accuracy_proxy(const ViTModel& model, const Dataset& dataset, std::size_t n_keep,
                              const AccuracyOptions& options);

/// n_min, n_min + stride, ... plus n_max when the stride skips it.
std::vector<std::size_t> grid_points(std::size_t n_min, std::size_t n_max, std::size_t stride);

struct GridOptions {
  std::size_t n_min = 0;  // 0 means special + 1
  std::size_t n_max = 0;  // 0 means N
  std::size_t stride = 1;
  LatencyOptions latency;
  AccuracyOptions accuracy;
  // Skip A(n) when only re-measuring latency on a new device.
  bool measure_accuracy = true;
  std::string device_label = "unknown";
};

/// L(n) (and A(n) when `dataset` is given and enabled) at every grid point.
WorkloadProfile profile_grid(const ViTModel& model, const Dataset* dataset,
                             const GridOptions& options);

struct LatencyStep {
  std::size_t n_from = 0;
  std::size_t n_to = 0;
  // Signed: (L(n_to) - L(n_from)) / L(n_from).
  double jump_fraction = 0.0;

  bool operator==(const LatencyStep&) const = default;
};

/// Adjacent grid pairs whose relative latency change is at least
/// `relative_threshold` in magnitude, in either direction.
std::vector<LatencyStep> detect_nonlinearities(std::span<const std::size_t> n,
                                               std::span<const double> latency_us,
                                               double relative_threshold);
std::vector<LatencyStep> detect_nonlinearities(const WorkloadProfile& profile,
                                               double relative_threshold);

}  // namespace tokprune
