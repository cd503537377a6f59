// Copyright 2026 The tokprune Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

namespace tokprune {

enum class MeasurementMode {
  kDeployedPrune,  // full-N input, pruned to n at the schedule layer
  kRawTokenCount,  // input built with n tokens, no pruning
};

std::string to_string(MeasurementMode mode);
MeasurementMode parse_measurement_mode(const std::string& text);

struct LatencySample {
  std::size_t n_keep = 0;
  double median_us = 0.0;
  double iqr_us = 0.0;
  std::size_t repetitions = 1;
  std::size_t warmup = 0;
};

struct ProfileRow {
  std::size_t n = 0;
  LatencySample latency;
  std::optional<double> accuracy;  // fraction correct in [0, 1]
};

struct ProfiledModel {
  std::string weights_hash;
  std::string config_hash;
  std::size_t depth = 0;
  std::size_t num_tokens = 0;
  std::size_t num_special_tokens = 0;
};

/// Measured L(n) and A(n) over a grid of kept-token counts.
struct WorkloadProfile {
  static constexpr int kSchemaVersion = 1;

  ProfiledModel model;
  std::string device_label;
  MeasurementMode mode = MeasurementMode::kDeployedPrune;
  std::size_t stride = 1;
  std::size_t prune_layer = 0;
  std::size_t batch_size = 1;
  std::vector<ProfileRow> rows;

  /// Grid strictly increasing and inside [special + 1, N]; latency samples
  /// well-formed; accuracies in [0, 1].
  void validate() const;
  bool has_accuracy() const;

  std::vector<std::size_t> grid() const;
  std::vector<double> latencies() const;
  /// Throws ValidationError if any row lacks accuracy.
  std::vector<double> accuracies() const;

  nlohmann::json to_json() const;
  static WorkloadProfile from_json(const nlohmann::json& doc, const std::string& context);

  /// Header `n,median_us,iqr_us,accuracy`; missing accuracy is empty.
  std::string to_csv() const;

  /// Hash over every field of the JSON form (timing, accuracy, identity).
  std::string hash() const;
};

/// Profile from raw curves; convenient for synthetic inputs.
WorkloadProfile profile_from_curves(std::span<const std::size_t> n,
                                    std::span<const double> latency_us,
                                    std::span<const double> accuracy, std::size_t num_tokens,
                                    std::size_t num_special_tokens = 1, std::size_t depth = 12);

/// Latency from `latency`, accuracy from `accuracy`; grids and model
/// identity must match.
WorkloadProfile merge_accuracy(const WorkloadProfile& latency, const WorkloadProfile& accuracy);

WorkloadProfile load_profile(const std::filesystem::path& path);

}  // namespace tokprune
