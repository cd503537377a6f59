// Copyright 2026 The tokprune Authors
// SPDX-License-Identifier: Apache-2.0

#include "tokprune/manifest.hpp"

#include <chrono>
#include <ctime>

#include "tokprune/io.hpp"

namespace tokprune {

std::string RunManifest::hash() const {
  const nlohmann::json body = {{"command", command},       {"inputs", inputs},
                               {"parameters", parameters}, {"seeds", seeds},
                               {"outputs", outputs},       {"tool_version", tool_version}};
  return hex64(fnv1a64(body.dump()));
}

nlohmann::json RunManifest::to_json() const {
  return {{"command", command},       {"inputs", inputs},
          {"parameters", parameters}, {"seeds", seeds},
          {"outputs", outputs},       {"tool_version", tool_version},
          {"timestamp", timestamp},   {"hash", hash()}};
}

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace tokprune
