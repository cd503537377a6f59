// Copyright 2026 The tokprune Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "tokprune/workload_profile.hpp"

namespace tokprune {

inline constexpr double kDefaultAlpha = 0.5;

/// round(0.25 * depth) with halves rounded up, clamped to [1, depth - 1]
/// (0 for a single-layer model). Depth 12 -> 3, depth 40 -> 10.
std::size_t default_prune_layer(std::size_t depth);

/// U_A(n) = A(n) / max A. Throws ValidationError when max A <= 0.
std::vector<double> utility_accuracy(std::span<const double> accuracy);
std::vector<double> utility_accuracy(const WorkloadProfile& profile);

/// U_L(n) = 1 - L(n) / max L.
std::vector<double> utility_latency(std::span<const double> latency_us);
std::vector<double> utility_latency(const WorkloadProfile& profile);

/// alpha * U_A + (1 - alpha) * U_L, the single expression every caller uses.
inline double combined_utility(double alpha, double u_a, double u_l) {
  return alpha * u_a + (1.0 - alpha) * u_l;
}

struct UtilityPoint {
  std::size_t n = 0;
  double u_a = 0.0;
  double u_l = 0.0;
  double u = 0.0;
};

struct PruningSchedule {
  static constexpr int kSchemaVersion = 1;

  double alpha = kDefaultAlpha;
  std::size_t num_tokens = 0;  // N
  std::size_t n_keep = 0;
  std::size_t r = 0;  // N - n_keep
  std::size_t prune_layer = 0;
  std::size_t depth = 0;
  std::size_t num_special_tokens = 0;
  std::string profile_hash;
  std::vector<UtilityPoint> utility_trace;

  void validate() const;
  nlohmann::json to_json() const;
  static PruningSchedule from_json(const nlohmann::json& doc, const std::string& context);
};

/// Grid argmax of the combined utility; ties go to the largest n. No
/// interpolation between grid points.
PruningSchedule select_schedule(const WorkloadProfile& profile, double alpha, std::size_t depth,
                                std::size_t special_count,
                                std::optional<std::size_t> prune_layer = std::nullopt);

/// Overload taking depth and special count from the profile.
PruningSchedule select_schedule(const WorkloadProfile& profile, double alpha = kDefaultAlpha);

PruningSchedule load_schedule(const std::filesystem::path& path);

/// Plot-ready view of a schedule against its profile.
struct ScheduleReport {
  nlohmann::json document;
  // n,latency_us,accuracy,u_a,u_l,u,optimum
  std::string csv;
};

ScheduleReport schedule_report(const PruningSchedule& schedule, const WorkloadProfile& profile);

}  // namespace tokprune
