// Copyright 2026 The tokprune Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

namespace tokprune {

/// Provenance record embedded in every CLI output. The hash covers
/// everything except the timestamp, so rerunning a command with the same
/// inputs and seeds reproduces it.
struct RunManifest {
  std::string command;
  std::map<std::string, std::string> inputs;
  std::map<std::string, std::string> parameters;
  std::map<std::string, std::uint64_t> seeds;
  std::vector<std::string> outputs;
  std::string tool_version = TOKPRUNE_VERSION;
  std::string timestamp;  // UTC, ISO 8601

  std::string hash() const;
  nlohmann::json to_json() const;
};

std::string utc_timestamp();

}  // namespace tokprune
