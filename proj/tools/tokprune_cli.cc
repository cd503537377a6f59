// Copyright 2026 The tokprune Authors
// SPDX-License-Identifier: Apache-2.0

// tokprune: generate toy models, profile latency/accuracy over kept-token
// counts, plan a pruning schedule and run pruned inference.
//
// Exit codes: 0 success, 1 usage error, 2 validation error, 3 measurement
// error.

#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "tokprune/dataset.hpp"
#include "tokprune/errors.hpp"
#include "tokprune/io.hpp"
#include "tokprune/manifest.hpp"
#include "tokprune/profiler.hpp"
#include "tokprune/pruning.hpp"
#include "tokprune/scheduler.hpp"
#include "tokprune/vit.hpp"

namespace fs = std::filesystem;
using namespace tokprune;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitValidation = 2;
constexpr int kExitMeasurement = 3;

fs::path sibling(const fs::path& path, const std::string& suffix) {
  fs::path out = path;
  out.replace_extension();
  out += suffix;
  return out;
}

fs::path config_for(const fs::path& weights, const std::optional<fs::path>& explicit_config) {
  return explicit_config ? *explicit_config : sibling(weights, ".json");
}

RunManifest start_manifest(const std::string& command) {
  RunManifest m;
  m.command = command;
  m.timestamp = utc_timestamp();
  return m;
}

nlohmann::json with_manifest(nlohmann::json doc, const RunManifest& manifest) {
  doc["manifest"] = manifest.to_json();
  return doc;
}

void write_manifest_sidecar(const fs::path& artifact, const RunManifest& manifest) {
  fs::path side = artifact;
  side += ".manifest.json";
  write_json(side, manifest.to_json());
}

std::string csv_with_manifest(const std::string& csv, const RunManifest& manifest) {
  return "# manifest_hash=" + manifest.hash() + "\n" + csv;
}

std::string fmt_double(const char* fmt, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), fmt, v);
  return buf;
}

// --- gen-model --------------------------------------------------------------

struct GenModelArgs {
  fs::path config;
  std::uint64_t seed = 0;
  fs::path out;
};

int cmd_gen_model(const GenModelArgs& a) {
  const ViTConfig config = load_config(a.config);
  const ViTModel model = generate_random_model(config, a.seed);
  const fs::path config_out = sibling(a.out, ".json");

  RunManifest m = start_manifest("gen-model");
  m.inputs["config"] = a.config.string();
  m.seeds["model"] = a.seed;
  m.outputs = {a.out.string(), config_out.string()};

  save_weights(a.out, model);
  write_manifest_sidecar(a.out, m);
  write_json(config_out, with_manifest(config.to_json(), m));
  std::cout << "model " << model.weights_hash() << " (config " << config.hash() << ") -> "
            << a.out.string() << "\n";
  return 0;
}

// --- gen-dataset ------------------------------------------------------------

struct GenDatasetArgs {
  fs::path config;
  std::size_t samples = 64;
  std::optional<std::size_t> classes;
  std::uint64_t seed = 0;
  fs::path out;
  std::optional<fs::path> label_model;
};

int cmd_gen_dataset(const GenDatasetArgs& a) {
  const ViTConfig config = load_config(a.config);
  SyntheticDatasetSpec spec;
  spec.samples = a.samples;
  spec.classes = a.classes.value_or(config.num_classes);
  spec.seed = a.seed;
  spec.num_tokens = config.num_tokens;
  spec.embed_dim = config.embed_dim;
  if (spec.samples == 0) throw ValidationError("--samples must be >= 1");
  if (spec.classes == 0 || spec.classes > config.num_classes) {
    throw ValidationError("--classes must be in [1, " + std::to_string(config.num_classes) + "]");
  }

  RunManifest m = start_manifest("gen-dataset");
  m.inputs["config"] = a.config.string();
  if (a.label_model) m.inputs["label_model"] = a.label_model->string();
  m.parameters["samples"] = std::to_string(spec.samples);
  m.parameters["classes"] = std::to_string(spec.classes);
  m.seeds["dataset"] = a.seed;
  m.outputs = {a.out.string()};

  if (a.out.extension() == ".json") {
    if (a.label_model) {
      throw ValidationError("--label-model needs a binary dataset output, not " + a.out.string());
    }
    write_json(a.out, with_manifest(spec.to_json(), m));
  } else {
    Dataset ds = synthesize_dataset(spec);
    if (a.label_model) {
      const ViTModel model = load_model(config_for(*a.label_model, std::nullopt), *a.label_model);
      if (!(model.config() == config)) {
        throw ValidationError(a.label_model->string() + ": config differs from " +
                              a.config.string());
      }
      label_with_model(ds, model);
    }
    save_dataset(a.out, ds);
    write_manifest_sidecar(a.out, m);
  }
  std::cout << "dataset: " << spec.samples << " samples, " << spec.classes << " classes -> "
            << a.out.string() << "\n";
  return 0;
}

// --- profile ----------------------------------------------------------------

struct ProfileArgs {
  fs::path model;
  std::optional<fs::path> model_config;
  std::optional<fs::path> dataset;
  std::optional<fs::path> accuracy_from;
  std::size_t n_min = 0;
  std::size_t n_max = 0;
  std::size_t stride = 1;
  std::string mode = "deployed-prune";
  std::size_t reps = 100;
  std::size_t warmup = 10;
  std::uint64_t seed = 0;
  std::size_t trials = 1;
  std::optional<std::size_t> prune_layer;
  std::string device_label = "unknown";
  fs::path out;
  std::optional<fs::path> csv;
};

int cmd_profile(const ProfileArgs& a) {
  const ViTModel model = load_model(config_for(a.model, a.model_config), a.model);
  std::optional<Dataset> dataset;
  if (a.dataset) dataset = load_dataset(*a.dataset);

  GridOptions opt;
  opt.n_min = a.n_min;
  opt.n_max = a.n_max;
  opt.stride = a.stride;
  opt.latency.mode = parse_measurement_mode(a.mode);
  opt.latency.repetitions = a.reps;
  opt.latency.warmup = a.warmup;
  opt.latency.prune_layer = a.prune_layer;
  opt.latency.input_seed = a.seed;
  opt.accuracy.seed = a.seed;
  opt.accuracy.trials = a.trials;
  opt.measure_accuracy = dataset.has_value();
  opt.device_label = a.device_label;

  WorkloadProfile profile = profile_grid(model, dataset ? &*dataset : nullptr, opt);
  if (a.accuracy_from) profile = merge_accuracy(profile, load_profile(*a.accuracy_from));

  const fs::path csv = a.csv.value_or(sibling(a.out, ".csv"));
  RunManifest m = start_manifest("profile");
  m.inputs["model"] = a.model.string();
  if (a.dataset) m.inputs["dataset"] = a.dataset->string();
  if (a.accuracy_from) m.inputs["accuracy_from"] = a.accuracy_from->string();
  m.parameters = {{"n_min", std::to_string(a.n_min)},     {"n_max", std::to_string(a.n_max)},
                  {"stride", std::to_string(a.stride)},   {"mode", a.mode},
                  {"reps", std::to_string(a.reps)},       {"warmup", std::to_string(a.warmup)},
                  {"trials", std::to_string(a.trials)},   {"device_label", a.device_label}};
  m.seeds["input"] = a.seed;
  m.outputs = {a.out.string(), csv.string()};

  write_json(a.out, with_manifest(profile.to_json(), m));
  atomic_write(csv, csv_with_manifest(profile.to_csv(), m));
  std::cout << "profiled " << profile.rows.size() << " grid points ("
            << to_string(profile.mode) << ") -> " << a.out.string() << "\n";
  return 0;
}

// --- plan -------------------------------------------------------------------

struct PlanArgs {
  fs::path profile;
  double alpha = kDefaultAlpha;
  std::optional<fs::path> depth_from_model;
  std::optional<std::size_t> prune_layer;
  fs::path out;
  std::optional<fs::path> csv;
};

int cmd_plan(const PlanArgs& a) {
  const WorkloadProfile profile = load_profile(a.profile);
  std::size_t depth = profile.model.depth;
  std::size_t special = profile.model.num_special_tokens;
  if (a.depth_from_model) {
    const fs::path cfg_path = a.depth_from_model->extension() == ".json"
                                  ? *a.depth_from_model
                                  : sibling(*a.depth_from_model, ".json");
    const ViTConfig cfg = load_config(cfg_path);
    if (cfg.num_tokens != profile.model.num_tokens) {
      throw ValidationError(cfg_path.string() + ": num_tokens " + std::to_string(cfg.num_tokens) +
                            " differs from the profile's " +
                            std::to_string(profile.model.num_tokens));
    }
    depth = cfg.depth;
    special = cfg.num_special_tokens;
  }
  const PruningSchedule schedule = select_schedule(profile, a.alpha, depth, special, a.prune_layer);
  const ScheduleReport report = schedule_report(schedule, profile);

  const fs::path csv = a.csv.value_or(sibling(a.out, ".utility.csv"));
  RunManifest m = start_manifest("plan");
  m.inputs["profile"] = a.profile.string();
  if (a.depth_from_model) m.inputs["depth_from_model"] = a.depth_from_model->string();
  m.parameters["alpha"] = fmt_double("%.17g", a.alpha);
  if (a.prune_layer) m.parameters["prune_layer"] = std::to_string(*a.prune_layer);
  m.outputs = {a.out.string(), csv.string()};

  nlohmann::json doc = schedule.to_json();
  doc["report"] = report.document;
  write_json(a.out, with_manifest(doc, m));
  atomic_write(csv, csv_with_manifest(report.csv, m));
  std::cout << "N = " << schedule.num_tokens << ", N_keep = " << schedule.n_keep
            << ", R = " << schedule.r << ", prune after layer " << schedule.prune_layer
            << " (alpha " << schedule.alpha << ") -> " << a.out.string() << "\n";
  return 0;
}

// --- run --------------------------------------------------------------------

struct RunArgs {
  fs::path model;
  std::optional<fs::path> model_config;
  fs::path schedule;
  std::optional<fs::path> input;
  std::size_t batch = 1;
  std::uint64_t seed = 0;
  std::size_t reps = 20;
  std::size_t warmup = 3;
  bool compare_baseline = false;
  fs::path out = "logits.json";
};

nlohmann::json logits_json(const Tensor& logits) {
  nlohmann::json rows = nlohmann::json::array();
  for (std::size_t i = 0; i < logits.dim(0); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (std::size_t j = 0; j < logits.dim(1); ++j) row.push_back(logits.at(i, j));
    rows.push_back(row);
  }
  return rows;
}

int cmd_run(const RunArgs& a) {
  const ViTModel model = load_model(config_for(a.model, a.model_config), a.model);
  const ViTConfig& cfg = model.config();
  const PruningSchedule schedule = load_schedule(a.schedule);
  if (schedule.num_tokens != cfg.num_tokens || schedule.depth != cfg.depth ||
      schedule.num_special_tokens != cfg.num_special_tokens) {
    throw ValidationError(a.schedule.string() + ": schedule (N = " +
                          std::to_string(schedule.num_tokens) + ", depth " +
                          std::to_string(schedule.depth) + ") does not match the model (N = " +
                          std::to_string(cfg.num_tokens) + ", depth " +
                          std::to_string(cfg.depth) + ")");
  }
  if (a.reps == 0) throw ValidationError("--reps must be >= 1");

  Tensor tokens;
  if (a.input) {
    const Dataset ds = load_dataset(*a.input);
    ds.validate(cfg);
    tokens = embed_tokens(ds.tokens, cfg);
  } else {
    tokens = synthesize_tokens(cfg, a.batch, cfg.num_tokens, a.seed);
  }

  const PruneHook hook =
      make_importance_prune_hook(schedule.prune_layer, schedule.r, cfg.num_special_tokens);
  auto time_forward = [&](const PruneHook* h, Tensor& logits) {
    for (std::size_t i = 0; i < a.warmup; ++i) logits = model.forward(tokens, h);
    std::vector<double> samples;
    for (std::size_t i = 0; i < a.reps; ++i) {
      const auto t0 = std::chrono::steady_clock::now();
      logits = model.forward(tokens, h);
      const auto t1 = std::chrono::steady_clock::now();
      samples.push_back(std::chrono::duration<double, std::micro>(t1 - t0).count());
    }
    return summarize_latency(std::move(samples), cfg.num_tokens - schedule.r, a.warmup);
  };

  Tensor pruned_logits;
  const LatencySample pruned = time_forward(schedule.r > 0 ? &hook : nullptr, pruned_logits);

  RunManifest m = start_manifest("run");
  m.inputs["model"] = a.model.string();
  m.inputs["schedule"] = a.schedule.string();
  if (a.input) m.inputs["input"] = a.input->string();
  m.parameters = {{"reps", std::to_string(a.reps)},
                  {"warmup", std::to_string(a.warmup)},
                  {"batch", std::to_string(tokens.dim(0))},
                  {"compare_baseline", a.compare_baseline ? "true" : "false"}};
  if (!a.input) m.seeds["input"] = a.seed;
  m.outputs = {a.out.string()};

  nlohmann::json timing = {{"pruned_median_us", pruned.median_us},
                           {"pruned_iqr_us", pruned.iqr_us},
                           {"reps", a.reps}};
  nlohmann::json doc = {{"shape", {pruned_logits.dim(0), pruned_logits.dim(1)}},
                        {"R", schedule.r},
                        {"prune_layer", schedule.prune_layer},
                        {"logits", logits_json(pruned_logits)}};

  std::cout << "pruned   median " << fmt_double("%.3f", pruned.median_us / 1000.0)
            << " ms (R = " << schedule.r << " at layer " << schedule.prune_layer << ")\n";
  if (a.compare_baseline) {
    Tensor base_logits;
    const LatencySample base = time_forward(nullptr, base_logits);
    double max_diff = 0.0;
    for (std::size_t i = 0; i < base_logits.numel(); ++i) {
      max_diff = std::max(max_diff, static_cast<double>(std::abs(base_logits[i] - pruned_logits[i])));
    }
    const double change = 100.0 * (pruned.median_us - base.median_us) / base.median_us;
    timing["baseline_median_us"] = base.median_us;
    timing["baseline_iqr_us"] = base.iqr_us;
    timing["percent_change"] = change;
    doc["baseline_logits"] = logits_json(base_logits);
    doc["max_abs_logit_diff"] = max_diff;
    std::cout << "baseline median " << fmt_double("%.3f", base.median_us / 1000.0) << " ms\n"
              << "change " << fmt_double("(%+.1f%%)", change) << ", max |logit diff| "
              << fmt_double("%.3g", max_diff) << "\n";
  }
  doc["timing"] = timing;
  write_json(a.out, with_manifest(doc, m));
  std::cout << nlohmann::json(timing).dump() << "\n";
  return 0;
}

// --- detect -----------------------------------------------------------------

struct DetectArgs {
  fs::path profile;
  double threshold = 0.10;
  fs::path out = "steps.json";
};

int cmd_detect(const DetectArgs& a) {
  const WorkloadProfile profile = load_profile(a.profile);
  const auto steps = detect_nonlinearities(profile, a.threshold);
  nlohmann::json list = nlohmann::json::array();
  for (const auto& s : steps) {
    list.push_back({{"n_from", s.n_from}, {"n_to", s.n_to}, {"jump_fraction", s.jump_fraction}});
    std::cout << s.n_from << " -> " << s.n_to << ": " << fmt_double("%+.1f%%", 100.0 * s.jump_fraction)
              << "\n";
  }
  RunManifest m = start_manifest("detect");
  m.inputs["profile"] = a.profile.string();
  m.parameters["threshold"] = fmt_double("%.17g", a.threshold);
  m.outputs = {a.out.string()};
  write_json(a.out, with_manifest({{"schema_version", 1},
                                   {"profile_hash", profile.hash()},
                                   {"threshold", a.threshold},
                                   {"steps", list}},
                                  m));
  std::cout << steps.size() << " step(s) at threshold " << a.threshold << " -> "
            << a.out.string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hardware-aware token pruning for vision transformers"};
  app.set_version_flag("--version", std::string(TOKPRUNE_VERSION));
  app.require_subcommand(1);

  GenModelArgs gm;
  auto* gen_model = app.add_subcommand("gen-model", "Generate a seeded random model");
  gen_model->add_option("--config", gm.config, "Model config JSON")->required();
  gen_model->add_option("--seed", gm.seed, "Weight seed");
  gen_model->add_option("--out", gm.out, "Weights file; config written next to it as .json")
      ->required();

  GenDatasetArgs gd;
  auto* gen_dataset = app.add_subcommand("gen-dataset", "Generate a seeded synthetic dataset");
  gen_dataset->add_option("--config", gd.config, "Model config JSON")->required();
  gen_dataset->add_option("--samples", gd.samples, "Sample count");
  gen_dataset->add_option("--classes", gd.classes, "Label classes (default: num_classes)");
  gen_dataset->add_option("--seed", gd.seed, "Dataset seed");
  gen_dataset->add_option("--out", gd.out, "Binary dataset, or .json synthetic spec")->required();
  gen_dataset->add_option("--label-model", gd.label_model,
                          "Label samples with this model's unpruned predictions");

  ProfileArgs pa;
  auto* profile = app.add_subcommand("profile", "Measure L(n) and A(n) over a token grid");
  profile->add_option("--model", pa.model, "Weights file")->required();
  profile->add_option("--model-config", pa.model_config, "Config (default: weights stem .json)");
  profile->add_option("--dataset", pa.dataset, "Dataset for the accuracy proxy");
  profile->add_option("--accuracy-from", pa.accuracy_from,
                      "Reuse A(n) from an existing profile of the same model");
  profile->add_option("--n-min", pa.n_min, "Smallest kept-token count (default special + 1)");
  profile->add_option("--n-max", pa.n_max, "Largest kept-token count (default N)");
  profile->add_option("--stride", pa.stride, "Grid stride");
  profile->add_option("--mode", pa.mode, "deployed-prune | raw-token-count")
      ->check(CLI::IsMember({"deployed-prune", "raw-token-count"}));
  profile->add_option("--reps", pa.reps, "Timed repetitions per grid point");
  profile->add_option("--warmup", pa.warmup, "Untimed warmup runs per grid point");
  profile->add_option("--seed", pa.seed, "Input and random-removal seed");
  profile->add_option("--trials", pa.trials, "Random-removal draws per sample");
  profile->add_option("--prune-layer", pa.prune_layer, "Layer for deployed-prune timing");
  profile->add_option("--device-label", pa.device_label, "Free-text device name");
  profile->add_option("--out", pa.out, "Profile JSON")->required();
  profile->add_option("--csv", pa.csv, "Curve CSV (default: <out>.csv)");

  PlanArgs pl;
  auto* plan = app.add_subcommand("plan", "Select N_keep and the prune layer from a profile");
  plan->add_option("--profile", pl.profile, "Profile JSON")->required();
  plan->add_option("--alpha", pl.alpha, "Accuracy weight in [0, 1]")->check(CLI::Range(0.0, 1.0));
  plan->add_option("--depth-from-model", pl.depth_from_model,
                   "Take depth from this model config (or weights with a sibling .json)");
  plan->add_option("--prune-layer", pl.prune_layer, "Override the 25%-depth placement");
  plan->add_option("--out", pl.out, "Schedule JSON")->required();
  plan->add_option("--csv", pl.csv, "Utility trace CSV (default: <out>.utility.csv)");

  RunArgs ra;
  auto* run = app.add_subcommand("run", "Run pruned inference with a schedule");
  run->add_option("--model", ra.model, "Weights file")->required();
  run->add_option("--model-config", ra.model_config, "Config (default: weights stem .json)");
  run->add_option("--schedule", ra.schedule, "Schedule JSON")->required();
  run->add_option("--input", ra.input, "Dataset file with input tokens");
  run->add_option("--batch", ra.batch, "Synthetic batch size when no --input");
  run->add_option("--seed", ra.seed, "Synthetic input seed");
  run->add_option("--reps", ra.reps, "Timed repetitions");
  run->add_option("--warmup", ra.warmup, "Warmup runs");
  run->add_flag("--compare-baseline", ra.compare_baseline, "Also time the unpruned model");
  run->add_option("--out", ra.out, "Logits JSON");

  DetectArgs da;
  auto* detect = app.add_subcommand("detect", "Report latency jumps between grid points");
  detect->add_option("--profile", da.profile, "Profile JSON")->required();
  detect->add_option("--threshold", da.threshold, "Relative jump threshold");
  detect->add_option("--out", da.out, "Step report JSON");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (*gen_model) return cmd_gen_model(gm);
    if (*gen_dataset) return cmd_gen_dataset(gd);
    if (*profile) return cmd_profile(pa);
    if (*plan) return cmd_plan(pl);
    if (*run) return cmd_run(ra);
    if (*detect) return cmd_detect(da);
  } catch (const MeasurementError& e) {
    std::cerr << "measurement error: " << e.what() << "\n";
    return kExitMeasurement;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  }
  return kExitUsage;
}
