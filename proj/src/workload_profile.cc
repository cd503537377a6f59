// Copyright 2026 The tokprune Authors
// SPDX-License-Identifier: Apache-2.0

#include "tokprune/workload_profile.hpp"

#include <bit>
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

std::string to_string(MeasurementMode mode) {
  return mode == MeasurementMode::kDeployedPrune ? "deployed-prune" : "raw-token-count";
}

MeasurementMode parse_measurement_mode(const std::string& text) {
  if (text == "deployed-prune") return MeasurementMode::kDeployedPrune;
  if (text == "raw-token-count") return MeasurementMode::kRawTokenCount;
  throw ValidationError("unknown measurement mode '" + text +
                        "' (expected deployed-prune or raw-token-count)");
}

void WorkloadProfile::validate() const {
  if (rows.empty()) throw ValidationError("profile has an empty grid");
  if (model.num_special_tokens >= model.num_tokens) {
    throw ValidationError("profile: num_special_tokens must be smaller than num_tokens");
  }
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const ProfileRow& r = rows[i];
    if (i > 0 && r.n <= rows[i - 1].n) {
      throw ValidationError("profile grid is not strictly increasing at n = " +
                            std::to_string(r.n));
    }
    if (r.n < model.num_special_tokens + 1 || r.n > model.num_tokens) {
      throw ValidationError("profile grid point n = " + std::to_string(r.n) + " outside [" +
                            std::to_string(model.num_special_tokens + 1) + ", " +
                            std::to_string(model.num_tokens) + "]");
    }
    if (!(r.latency.median_us > 0.0) || !std::isfinite(r.latency.median_us)) {
      throw ValidationError("profile latency at n = " + std::to_string(r.n) +
                            " must be positive");
    }
    if (!(r.latency.iqr_us >= 0.0) || r.latency.repetitions < 1) {
      throw ValidationError("profile latency sample at n = " + std::to_string(r.n) +
                            " is malformed");
    }
    if (r.accuracy && !(*r.accuracy >= 0.0 && *r.accuracy <= 1.0)) {
      throw ValidationError("profile accuracy at n = " + std::to_string(r.n) +
                            " outside [0, 1]");
    }
  }
}

bool WorkloadProfile::has_accuracy() const {
  if (rows.empty()) return false;
  for (const auto& r : rows) {
    if (!r.accuracy) return false;
  }
  return true;
}

std::vector<std::size_t> WorkloadProfile::grid() const {
  std::vector<std::size_t> out;
  for (const auto& r : rows) out.push_back(r.n);
  return out;
}

std::vector<double> WorkloadProfile::latencies() const {
  std::vector<double> out;
  for (const auto& r : rows) out.push_back(r.latency.median_us);
  return out;
}

std::vector<double> WorkloadProfile::accuracies() const {
  std::vector<double> out;
  for (const auto& r : rows) {
    if (!r.accuracy) {
      throw ValidationError("profile has no accuracy at n = " + std::to_string(r.n));
    }
    out.push_back(*r.accuracy);
  }
  return out;
}

nlohmann::json WorkloadProfile::to_json() const {
  nlohmann::json grid = nlohmann::json::array();
  for (const auto& r : rows) {
    grid.push_back({{"n", r.n},
                    {"median_us", r.latency.median_us},
                    {"iqr_us", r.latency.iqr_us},
                    {"reps", r.latency.repetitions},
                    {"warmup", r.latency.warmup},
                    {"accuracy", r.accuracy ? nlohmann::json(*r.accuracy) : nlohmann::json()}});
  }
  return {{"schema_version", kSchemaVersion},
          {"model_hash", model.weights_hash},
          {"model",
           {{"config_hash", model.config_hash},
            {"depth", model.depth},
            {"num_tokens", model.num_tokens},
            {"num_special_tokens", model.num_special_tokens}}},
          {"device_label", device_label},
          {"mode", to_string(mode)},
          {"stride", stride},
          {"prune_layer", prune_layer},
          {"batch_size", batch_size},
          {"grid", grid}};
}

WorkloadProfile WorkloadProfile::from_json(const nlohmann::json& doc, const std::string& ctx) {
  const int version = require_field<int>(doc, "schema_version", ctx);
  if (version != kSchemaVersion) {
    throw ValidationError(ctx + ": unsupported schema_version " + std::to_string(version));
  }
  WorkloadProfile p;
  p.model.weights_hash = require_field<std::string>(doc, "model_hash", ctx);
  const auto model = require_field<nlohmann::json>(doc, "model", ctx);
  p.model.config_hash = require_field<std::string>(model, "config_hash", ctx + ": model");
  p.model.depth = require_field<std::size_t>(model, "depth", ctx + ": model");
  p.model.num_tokens = require_field<std::size_t>(model, "num_tokens", ctx + ": model");
  p.model.num_special_tokens =
      require_field<std::size_t>(model, "num_special_tokens", ctx + ": model");
  p.device_label = require_field<std::string>(doc, "device_label", ctx);
  p.mode = parse_measurement_mode(require_field<std::string>(doc, "mode", ctx));
  p.stride = require_field<std::size_t>(doc, "stride", ctx);
  p.prune_layer = require_field<std::size_t>(doc, "prune_layer", ctx);
  p.batch_size = require_field<std::size_t>(doc, "batch_size", ctx);
  const auto grid = require_field<nlohmann::json>(doc, "grid", ctx);
  if (!grid.is_array()) throw ValidationError(ctx + ": field 'grid' must be an array");
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const std::string where = ctx + ": grid[" + std::to_string(i) + "]";
    ProfileRow r;
    r.n = require_field<std::size_t>(grid[i], "n", where);
    r.latency.n_keep = r.n;
    r.latency.median_us = require_field<double>(grid[i], "median_us", where);
    r.latency.iqr_us = require_field<double>(grid[i], "iqr_us", where);
    r.latency.repetitions = require_field<std::size_t>(grid[i], "reps", where);
    r.latency.warmup = grid[i].value("warmup", std::size_t{0});
    if (grid[i].contains("accuracy") && !grid[i]["accuracy"].is_null()) {
      r.accuracy = require_field<double>(grid[i], "accuracy", where);
    }
    p.rows.push_back(r);
  }
  try {
    p.validate();
  } catch (const ValidationError& e) {
    throw ValidationError(ctx + ": " + e.what());
  }
  return p;
}

std::string WorkloadProfile::to_csv() const {
  std::string out = "n,median_us,iqr_us,accuracy\n";
  for (const auto& r : rows) {
    out += std::to_string(r.n) + "," + format_double(r.latency.median_us) + "," +
           format_double(r.latency.iqr_us) + "," +
           (r.accuracy ? format_double(*r.accuracy) : std::string()) + "\n";
  }
  return out;
}

static_assert(std::endian::native == std::endian::little, "profile hash assumes little-endian");

std::string WorkloadProfile::hash() const {
  // Length-prefixed strings and raw little-endian numbers; every field of the
  // JSON form, in the same order, without building the document.
  std::string buf;
  buf.reserve(128 + rows.size() * 41);
  auto put_u64 = [&](std::uint64_t v) { buf.append(reinterpret_cast<const char*>(&v), 8); };
  auto put_f64 = [&](double v) { buf.append(reinterpret_cast<const char*>(&v), 8); };
  auto put_str = [&](const std::string& v) {
    put_u64(v.size());
    buf += v;
  };
  put_u64(kSchemaVersion);
  put_str(model.weights_hash);
  put_str(model.config_hash);
  put_u64(model.depth);
  put_u64(model.num_tokens);
  put_u64(model.num_special_tokens);
  put_str(device_label);
  put_str(to_string(mode));
  put_u64(stride);
  put_u64(prune_layer);
  put_u64(batch_size);
  put_u64(rows.size());
  for (const auto& r : rows) {
    put_u64(r.n);
    put_f64(r.latency.median_us);
    put_f64(r.latency.iqr_us);
    put_u64(r.latency.repetitions);
    put_u64(r.latency.warmup);
    buf += r.accuracy ? '\1' : '\0';
    if (r.accuracy) put_f64(*r.accuracy);
  }
  return hex64(fnv1a64(buf));
}

WorkloadProfile profile_from_curves(std::span<const std::size_t> n,
                                    std::span<const double> latency_us,
                                    std::span<const double> accuracy, std::size_t num_tokens,
                                    std::size_t num_special_tokens, std::size_t depth) {
  if (n.size() != latency_us.size() || (!accuracy.empty() && accuracy.size() != n.size())) {
    throw ValidationError("profile_from_curves: curve lengths differ");
  }
  WorkloadProfile p;
  p.model.weights_hash = "synthetic";
  p.model.config_hash = "synthetic";
  p.model.depth = depth;
  p.model.num_tokens = num_tokens;
  p.model.num_special_tokens = num_special_tokens;
  p.device_label = "synthetic";
  for (std::size_t i = 0; i < n.size(); ++i) {
    ProfileRow r;
    r.n = n[i];
    r.latency = {n[i], latency_us[i], 0.0, 1, 0};
    if (!accuracy.empty()) r.accuracy = accuracy[i];
    p.rows.push_back(r);
  }
  p.validate();
  return p;
}

WorkloadProfile merge_accuracy(const WorkloadProfile& latency, const WorkloadProfile& accuracy) {
  if (latency.model.weights_hash != accuracy.model.weights_hash) {
    throw ValidationError("merge_accuracy: profiles describe different models (" +
                          latency.model.weights_hash + " vs " + accuracy.model.weights_hash +
                          ")");
  }
  if (latency.grid() != accuracy.grid()) {
    throw ValidationError("merge_accuracy: grids differ");
  }
  WorkloadProfile out = latency;
  for (std::size_t i = 0; i < out.rows.size(); ++i) {
    if (!accuracy.rows[i].accuracy) {
      throw ValidationError("merge_accuracy: accuracy profile lacks n = " +
                            std::to_string(out.rows[i].n));
    }
    out.rows[i].accuracy = accuracy.rows[i].accuracy;
  }
  return out;
}

WorkloadProfile load_profile(const std::filesystem::path& path) {
  return WorkloadProfile::from_json(read_json(path), path.string());
}

}  // namespace tokprune
