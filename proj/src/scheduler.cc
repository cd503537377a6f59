// Copyright 2026 The tokprune Authors
// SPDX-License-Identifier: Apache-2.0

#include "tokprune/scheduler.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "tokprune/errors.hpp"
#include "tokprune/io.hpp"

namespace tokprune {

namespace {

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

std::size_t default_prune_layer(std::size_t depth) {
  if (depth <= 1) return 0;
  const std::size_t rounded = (depth + 2) / 4;  // floor(depth / 4 + 1/2)
  return std::clamp<std::size_t>(rounded, 1, depth - 1);
}

std::vector<double> utility_accuracy(std::span<const double> accuracy) {
  if (accuracy.empty()) throw ValidationError("degenerate profile: empty accuracy curve");
  const double peak = *std::max_element(accuracy.begin(), accuracy.end());
  if (!(peak > 0.0)) {
    throw ValidationError("degenerate profile: accuracy is zero at every grid point");
  }
  std::vector<double> out;
  out.reserve(accuracy.size());
  for (double a : accuracy) out.push_back(a / peak);
  return out;
}

std::vector<double> utility_accuracy(const WorkloadProfile& profile) {
  return utility_accuracy(profile.accuracies());
}

std::vector<double> utility_latency(std::span<const double> latency_us) {
  if (latency_us.empty()) throw ValidationError("degenerate profile: empty latency curve");
  const double peak = *std::max_element(latency_us.begin(), latency_us.end());
  if (!(peak > 0.0)) throw ValidationError("degenerate profile: latency must be positive");
  std::vector<double> out;
  out.reserve(latency_us.size());
  for (double l : latency_us) out.push_back(1.0 - l / peak);
  return out;
}

std::vector<double> utility_latency(const WorkloadProfile& profile) {
  return utility_latency(profile.latencies());
}

void PruningSchedule::validate() const {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw ValidationError("schedule: alpha outside [0, 1]");
  if (r != num_tokens - n_keep || n_keep > num_tokens) {
    throw ValidationError("schedule: R must equal N - n_keep");
  }
  if (n_keep < num_special_tokens + 1) {
    throw ValidationError("schedule: n_keep " + std::to_string(n_keep) +
                          " below num_special_tokens + 1");
  }
  if (depth == 0 || prune_layer >= depth) {
    throw ValidationError("schedule: prune_layer " + std::to_string(prune_layer) +
                          " outside [0, depth)");
  }
}

nlohmann::json PruningSchedule::to_json() const {
  nlohmann::json trace = nlohmann::json::array();
  for (const auto& p : utility_trace) {
    trace.push_back({{"n", p.n}, {"u_a", p.u_a}, {"u_l", p.u_l}, {"u", p.u}});
  }
  return {{"schema_version", kSchemaVersion},
          {"alpha", alpha},
          {"N", num_tokens},
          {"n_keep", n_keep},
          {"R", r},
          {"prune_layer", prune_layer},
          {"depth", depth},
          {"num_special_tokens", num_special_tokens},
          {"profile_hash", profile_hash},
          {"utility_trace", trace}};
}

PruningSchedule PruningSchedule::from_json(const nlohmann::json& doc, const std::string& ctx) {
  const int version = require_field<int>(doc, "schema_version", ctx);
  if (version != kSchemaVersion) {
    throw ValidationError(ctx + ": unsupported schema_version " + std::to_string(version));
  }
  PruningSchedule s;
  s.alpha = require_field<double>(doc, "alpha", ctx);
  s.num_tokens = require_field<std::size_t>(doc, "N", ctx);
  s.n_keep = require_field<std::size_t>(doc, "n_keep", ctx);
  s.r = require_field<std::size_t>(doc, "R", ctx);
  s.prune_layer = require_field<std::size_t>(doc, "prune_layer", ctx);
  s.depth = require_field<std::size_t>(doc, "depth", ctx);
  s.num_special_tokens = require_field<std::size_t>(doc, "num_special_tokens", ctx);
  s.profile_hash = require_field<std::string>(doc, "profile_hash", ctx);
  const auto trace = require_field<nlohmann::json>(doc, "utility_trace", ctx);
  for (std::size_t i = 0; i < trace.size(); ++i) {
    const std::string where = ctx + ": utility_trace[" + std::to_string(i) + "]";
    s.utility_trace.push_back({require_field<std::size_t>(trace[i], "n", where),
                               require_field<double>(trace[i], "u_a", where),
                               require_field<double>(trace[i], "u_l", where),
                               require_field<double>(trace[i], "u", where)});
  }
  try {
    s.validate();
  } catch (const ValidationError& e) {
    throw ValidationError(ctx + ": " + e.what());
  }
  return s;
}

PruningSchedule select_schedule(const WorkloadProfile& profile, double alpha, std::size_t depth,
                                std::size_t special_count,
                                std::optional<std::size_t> prune_layer) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) {
    throw ValidationError("alpha " + format_double(alpha) + " outside [0, 1]");
  }
  if (depth == 0) throw ValidationError("depth must be >= 1");
  profile.validate();
  const auto grid = profile.grid();
  const auto u_a = utility_accuracy(profile);
  const auto u_l = utility_latency(profile);

  PruningSchedule s;
  s.alpha = alpha;
  s.num_tokens = profile.model.num_tokens;
  s.depth = depth;
  s.num_special_tokens = special_count;
  s.profile_hash = profile.hash();
  std::size_t best = 0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double u = combined_utility(alpha, u_a[i], u_l[i]);
    s.utility_trace.push_back({grid[i], u_a[i], u_l[i], u});
    // >= moves ties toward the larger n.
    if (u >= s.utility_trace[best].u) best = i;
  }
  s.n_keep = grid[best];
  s.r = s.num_tokens - s.n_keep;
  s.prune_layer = prune_layer.value_or(default_prune_layer(depth));
  s.validate();
  return s;
}

PruningSchedule select_schedule(const WorkloadProfile& profile, double alpha) {
  return select_schedule(profile, alpha, profile.model.depth, profile.model.num_special_tokens);
}

PruningSchedule load_schedule(const std::filesystem::path& path) {
  return PruningSchedule::from_json(read_json(path), path.string());
}

ScheduleReport schedule_report(const PruningSchedule& schedule, const WorkloadProfile& profile) {
  if (schedule.utility_trace.size() != profile.rows.size()) {
    throw ValidationError("schedule_report: trace does not match the profile grid");
  }
  ScheduleReport report;
  report.csv = "n,latency_us,accuracy,u_a,u_l,u,optimum\n";
  nlohmann::json series = nlohmann::json::array();
  for (std::size_t i = 0; i < profile.rows.size(); ++i) {
    const ProfileRow& row = profile.rows[i];
    const UtilityPoint& p = schedule.utility_trace[i];
    if (p.n != row.n) throw ValidationError("schedule_report: trace does not match the profile grid");
    const bool optimum = p.n == schedule.n_keep;
    report.csv += std::to_string(p.n) + "," + format_double(row.latency.median_us) + "," +
                  (row.accuracy ? format_double(*row.accuracy) : std::string()) + "," +
                  format_double(p.u_a) + "," + format_double(p.u_l) + "," +
                  format_double(p.u) + "," + (optimum ? "1" : "0") + "\n";
    series.push_back({{"n", p.n},
                      {"latency_us", row.latency.median_us},
                      {"accuracy", row.accuracy ? nlohmann::json(*row.accuracy) : nlohmann::json()},
                      {"u", p.u}});
  }
  report.document = {{"alpha", schedule.alpha},
                     {"N", schedule.num_tokens},
                     {"n_keep", schedule.n_keep},
                     {"R", schedule.r},
                     {"prune_layer", schedule.prune_layer},
                     {"device_label", profile.device_label},
                     {"mode", to_string(profile.mode)},
                     {"series", series}};
  return report;
}

}  // namespace tokprune
